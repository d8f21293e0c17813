import { readFileSync } from "node:fs";

import { beforeEach, describe, expect, it } from "vitest";

import { ApiClient, FetchLike, Rating } from "../src/api.js";
import { AnnotationSession } from "../src/session.js";
import { METRICS, Rubric, SKIP, isValidValue, keyToValue } from "../src/rubric.js";

const rubric = JSON.parse(
  readFileSync(new URL("../src/rubric.json", import.meta.url), "utf8"),
) as Rubric;

interface FakeBackend {
  fetchImpl: FetchLike;
  posts: Rating[];
  calls: string[];
  failPosts: (n: number) => void;
  failNexts: (n: number) => void;
}

/** In-memory stand-in for the annotation service: same routes, same semantics. */
function fakeBackend(items: Array<{ item_id: string; feedback: string }>): FakeBackend {
  const store = new Map<string, Rating>();
  const posts: Rating[] = [];
  const calls: string[] = [];
  let postFailures = 0;
  let nextFailures = 0;

  const progressFor = (rater: string) => {
    const metrics: Record<string, { rated: number; total: number; done: boolean }> = {};
    for (const metric of METRICS) {
      const rated = items.filter((it) => store.has(`${rater}|${metric}|${it.item_id}`)).length;
      metrics[metric] = { rated, total: items.length, done: rated === items.length };
    }
    return { rater, total: items.length, metrics };
  };

  const fetchImpl: FetchLike = async (url, init) => {
    calls.push(url);
    const parsed = new URL(url, "http://fake");
    if (parsed.pathname === "/api/next") {
      if (nextFailures > 0) {
        nextFailures -= 1;
        throw new TypeError("network down");
      }
      const rater = parsed.searchParams.get("rater") ?? "";
      const metric = parsed.searchParams.get("metric") ?? "";
      const rated = items.filter((it) => store.has(`${rater}|${metric}|${it.item_id}`)).length;
      const next = items.find((it) => !store.has(`${rater}|${metric}|${it.item_id}`));
      if (next === undefined) {
        return new Response(null, { status: 204 });
      }
      return Response.json({
        item_id: next.item_id,
        feedback: next.feedback,
        clip: null,
        metric,
        position: { rated, total: items.length },
      });
    }
    if (parsed.pathname === "/api/rating") {
      if (postFailures > 0) {
        postFailures -= 1;
        throw new TypeError("network down");
      }
      const rating = JSON.parse(String(init?.body)) as Rating;
      posts.push(rating);
      store.set(`${rating.rater_id}|${rating.metric}|${rating.item_id}`, rating);
      return Response.json({
        status: "recorded",
        item_id: rating.item_id,
        metric: rating.metric,
        value: rating.value,
        progress: progressFor(rating.rater_id),
      });
    }
    if (parsed.pathname === "/api/progress") {
      return Response.json(progressFor(parsed.searchParams.get("rater") ?? ""));
    }
    throw new Error(`unexpected route ${url}`);
  };

  return {
    fetchImpl,
    posts,
    calls,
    failPosts: (n) => {
      postFailures = n;
    },
    failNexts: (n) => {
      nextFailures = n;
    },
  };
}

const ITEMS = [
  { item_id: "a", feedback: "Keep your arm straight on the dead-point." },
  { item_id: "b", feedback: "Nice flow through the crux." },
];

describe("scale rules", () => {
  it("maps number keys within the scale and rejects the rest", () => {
    expect(keyToValue(rubric.specificity, "1")).toBe(1);
    expect(keyToValue(rubric.specificity, "4")).toBe(4);
    expect(keyToValue(rubric.specificity, "5")).toBeNull();
    expect(keyToValue(rubric.specificity, "0")).toBeNull();
    expect(keyToValue(rubric.specificity, "x")).toBeNull();
    expect(keyToValue(rubric.actionability, "3")).toBe(3);
    expect(keyToValue(rubric.actionability, "4")).toBeNull();
  });

  it("maps S to skip only where the rubric allows skipping", () => {
    expect(keyToValue(rubric.actionability, "s")).toBe(SKIP);
    expect(keyToValue(rubric.actionability, "S")).toBe(SKIP);
    expect(keyToValue(rubric.specificity, "s")).toBeNull();
    expect(keyToValue(rubric.specificity, "S")).toBeNull();
  });

  it("validates values like the annotation schema", () => {
    expect(isValidValue(rubric.specificity, 1)).toBe(true);
    expect(isValidValue(rubric.specificity, 4)).toBe(true);
    expect(isValidValue(rubric.specificity, 5)).toBe(false);
    expect(isValidValue(rubric.specificity, 2.5)).toBe(false);
    expect(isValidValue(rubric.specificity, SKIP)).toBe(false);
    expect(isValidValue(rubric.actionability, SKIP)).toBe(true);
    expect(isValidValue(rubric.actionability, 0)).toBe(false);
  });
});

describe("AnnotationSession", () => {
  let backend: FakeBackend;
  let session: AnnotationSession;

  beforeEach(() => {
    backend = fakeBackend(ITEMS);
    session = new AnnotationSession(new ApiClient("", backend.fetchImpl), "r1", rubric);
  });

  it("starts on the first unrated item of the first metric", async () => {
    await session.start();
    expect(session.state.phase).toBe("rating");
    expect(session.state.metric).toBe("specificity");
    expect(session.state.item?.item_id).toBe("a");
    expect(session.state.item?.position).toEqual({ rated: 0, total: 2 });
  });

  it("pressing '3' on a specificity item POSTs value 3 and advances", async () => {
    await session.start();
    const accepted = await session.handleKey("3");
    expect(accepted).toBe(true);
    expect(backend.posts).toHaveLength(1);
    expect(backend.posts[0]).toMatchObject({
      item_id: "a",
      rater_id: "r1",
      metric: "specificity",
      value: 3,
    });
    expect(session.state.phase).toBe("rating");
    expect(session.state.item?.item_id).toBe("b");
  });

  it("rejects 'S' on a specificity item client-side: no request is made", async () => {
    await session.start();
    const callsBefore = backend.calls.length;
    const accepted = await session.handleKey("s");
    expect(accepted).toBe(false);
    expect(backend.calls.length).toBe(callsBefore);
    expect(backend.posts).toHaveLength(0);
    expect(session.state.phase).toBe("rating");
    expect(session.state.item?.item_id).toBe("a");
    expect(session.state.rejection).toContain("specificity");
  });

  it("rejects off-scale keys without any network traffic", async () => {
    await session.start();
    const callsBefore = backend.calls.length;
    for (const key of ["5", "0", "9", "x", "Enter"]) {
      expect(await session.handleKey(key)).toBe(false);
    }
    expect(backend.calls.length).toBe(callsBefore);
    expect(backend.posts).toHaveLength(0);
  });

  it("rejects off-scale values passed to submit() directly", async () => {
    await session.start();
    const callsBefore = backend.calls.length;
    await session.submit(7);
    await session.submit(SKIP);
    expect(backend.calls.length).toBe(callsBefore);
    expect(backend.posts).toHaveLength(0);
    expect(session.state.rejection).not.toBeNull();
  });

  it("accepts skip on actionability and records it", async () => {
    await session.start();
    await session.handleKey("2");
    await session.handleKey("4");
    expect(session.state.metric).toBe("actionability");
    const accepted = await session.handleKey("s");
    expect(accepted).toBe(true);
    expect(backend.posts.at(-1)).toMatchObject({
      item_id: "a",
      metric: "actionability",
      value: "skip",
    });
  });

  it("walks both metrics in order and finishes with progress", async () => {
    await session.start();
    for (const key of ["1", "2", "3", "s"]) {
      expect(await session.handleKey(key)).toBe(true);
    }
    expect(session.state.phase).toBe("done");
    expect(session.state.item).toBeNull();
    expect(session.state.progress?.metrics.specificity.done).toBe(true);
    expect(session.state.progress?.metrics.actionability.done).toBe(true);
    expect(backend.posts.map((p) => [p.metric, p.item_id, p.value])).toEqual([
      ["specificity", "a", 1],
      ["specificity", "b", 2],
      ["actionability", "a", 3],
      ["actionability", "b", "skip"],
    ]);
  });

  it("every body that reaches the backend is valid for its metric", async () => {
    await session.start();
    for (const key of ["s", "9", "2", "0", "4", "4", "s", "1"]) {
      await session.handleKey(key);
    }
    expect(session.state.phase).toBe("done");
    for (const post of backend.posts) {
      expect(isValidValue(rubric[post.metric], post.value)).toBe(true);
    }
  });

  it("keeps an unacknowledged rating pending and re-sends it on retry", async () => {
    await session.start();
    backend.failPosts(1);
    await session.handleKey("2");
    expect(session.state.phase).toBe("retry");
    expect(session.state.error).toContain("network down");
    expect(session.state.pending).toMatchObject({ item_id: "a", value: 2 });
    expect(backend.posts).toHaveLength(0);

    await session.retry();
    expect(backend.posts).toHaveLength(1);
    expect(backend.posts[0]).toMatchObject({ item_id: "a", metric: "specificity", value: 2 });
    expect(session.state.phase).toBe("rating");
    expect(session.state.pending).toBeNull();
    expect(session.state.item?.item_id).toBe("b");
  });

  it("retries a failed fetch of the next item without inventing a rating", async () => {
    await session.start();
    backend.failNexts(1);
    await session.handleKey("4");
    expect(session.state.phase).toBe("retry");
    expect(session.state.pending).toBeNull();
    expect(backend.posts).toHaveLength(1);

    await session.retry();
    expect(session.state.phase).toBe("rating");
    expect(session.state.item?.item_id).toBe("b");
    expect(backend.posts).toHaveLength(1);
  });

  it("ignores keys while no item is shown", async () => {
    expect(await session.handleKey("3")).toBe(false);
    expect(backend.calls).toHaveLength(0);
  });

  it("resumes at the server's next unrated item after a refresh", async () => {
    await session.start();
    await session.handleKey("2");

    const fresh = new AnnotationSession(new ApiClient("", backend.fetchImpl), "r1", rubric);
    await fresh.start();
    expect(fresh.state.phase).toBe("rating");
    expect(fresh.state.metric).toBe("specificity");
    expect(fresh.state.item?.item_id).toBe("b");
    expect(fresh.state.item?.position).toEqual({ rated: 1, total: 2 });
  });

  it("raters are independent: a fresh rater starts from the first item", async () => {
    await session.start();
    await session.handleKey("2");

    const other = new AnnotationSession(new ApiClient("", backend.fetchImpl), "r2", rubric);
    await other.start();
    expect(other.state.item?.item_id).toBe("a");
  });
});

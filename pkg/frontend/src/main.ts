/** DOM wiring: renders the session state and forwards keyboard/button input. */

import { AgreementReport, ApiClient } from "./api.js";
import { AnnotationSession, SessionState } from "./session.js";
import { METRICS, MetricName, MetricRubric, Rubric, SKIP, loadRubric } from "./rubric.js";

const RATER_KEY = "feedbackkit.rater_id";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

function show(node: HTMLElement, visible: boolean): void {
  node.hidden = !visible;
}

function formatClip(item: { clip: { video_id: string; t0: number; t1: number } | null }): string {
  if (item.clip === null || item.clip === undefined) {
    return "";
  }
  const { video_id, t0, t1 } = item.clip;
  return `clip: ${video_id} @ ${t0.toFixed(1)}–${t1.toFixed(1)} s`;
}

function renderRubric(panel: HTMLElement, rubric: MetricRubric): void {
  panel.replaceChildren();
  const title = document.createElement("h3");
  title.textContent = `${rubric.metric} rubric`;
  panel.appendChild(title);
  const list = document.createElement("dl");
  for (const level of rubric.levels) {
    const term = document.createElement("dt");
    term.textContent = `${level.value} — ${level.name}`;
    const def = document.createElement("dd");
    def.textContent = level.description;
    list.appendChild(term);
    list.appendChild(def);
  }
  if (rubric.skip_allowed) {
    const term = document.createElement("dt");
    term.textContent = "S — Skip";
    const def = document.createElement("dd");
    def.textContent = rubric.skip_description ?? "Not applicable to this item.";
    list.appendChild(term);
    list.appendChild(def);
  }
  panel.appendChild(list);
}

function renderChoices(container: HTMLElement, rubric: MetricRubric, session: AnnotationSession): void {
  container.replaceChildren();
  for (const level of rubric.levels) {
    const button = document.createElement("button");
    button.textContent = `${level.value} ${level.name}`;
    button.addEventListener("click", () => void session.submit(level.value));
    container.appendChild(button);
  }
  if (rubric.skip_allowed) {
    const button = document.createElement("button");
    button.textContent = "S Skip";
    button.className = "skip";
    button.addEventListener("click", () => void session.submit(SKIP));
    container.appendChild(button);
  }
}

function renderAgreement(target: HTMLElement, metric: MetricName, report: AgreementReport): void {
  const histogram = Object.entries(report.disagreement_histogram)
    .map(([gap, count]) => `|Δ|=${gap}: ${count}`)
    .join(", ");
  target.textContent =
    `${metric}: κ = ${report.kappa_weighted.toFixed(4)} (${report.weighting}), ` +
    `retained ${report.n_retained}/${report.n_annotated}` +
    (histogram ? ` — disagreements ${histogram}` : "") +
    (report.degenerate ? " (degenerate marginals)" : "");
}

function startAgreementPolling(api: ApiClient, panel: HTMLElement): void {
  panel.replaceChildren();
  for (const metric of METRICS) {
    const row = document.createElement("div");
    row.className = "agreement-row";
    row.textContent = `${metric}: waiting for both raters…`;
    panel.appendChild(row);
    const poll = async (): Promise<void> => {
      try {
        const result = await api.agreement(metric, "linear");
        if (result.status === "ready") {
          renderAgreement(row, metric, result.report);
          return;
        }
        row.textContent = `${metric}: ${result.detail}`;
      } catch (err) {
        row.textContent = `${metric}: ${err instanceof Error ? err.message : String(err)}`;
      }
      window.setTimeout(() => void poll(), 2000);
    };
    void poll();
  }
}

function run(rubric: Rubric, raterId: string): void {
  const api = new ApiClient("");
  const session = new AnnotationSession(api, raterId, rubric);

  const annotate = el<HTMLElement>("annotate");
  const done = el<HTMLElement>("done");
  const metricLabel = el<HTMLHeadingElement>("metric-label");
  const itemId = el<HTMLElement>("item-id");
  const feedbackText = el<HTMLParagraphElement>("feedback-text");
  const clipRef = el<HTMLElement>("clip-ref");
  const progressText = el<HTMLElement>("progress-text");
  const rubricPanel = el<HTMLElement>("rubric-panel");
  const choices = el<HTMLElement>("choices");
  const rejectionBanner = el<HTMLElement>("rejection-banner");
  const retryBanner = el<HTMLElement>("retry-banner");
  const errorText = el<HTMLElement>("error-text");
  const completionText = el<HTMLElement>("completion-text");
  const agreementPanel = el<HTMLElement>("agreement-panel");

  el<HTMLElement>("rater-label").textContent = `rater: ${raterId}`;
  let retryTimer = 0;
  let agreementStarted = false;

  session.onChange = (state: SessionState) => {
    window.clearTimeout(retryTimer);
    show(annotate, state.phase !== "done" && state.phase !== "idle");
    show(done, state.phase === "done");

    if (state.phase === "rating" || state.phase === "submitting" || state.phase === "retry") {
      const metric = state.metric;
      const item = state.item;
      if (metric !== null && item !== null) {
        metricLabel.textContent = `Rate: ${metric}`;
        itemId.textContent = item.item_id;
        feedbackText.textContent = item.feedback;
        clipRef.textContent = formatClip(item);
        progressText.textContent =
          `${metric} — item ${Math.min(item.position.rated + 1, item.position.total)} of ${item.position.total}`;
        renderRubric(rubricPanel, rubric[metric]);
        renderChoices(choices, rubric[metric], session);
        for (const button of choices.querySelectorAll("button")) {
          button.disabled = state.phase !== "rating";
        }
      }
    } else if (state.phase === "loading") {
      progressText.textContent = "loading…";
    }

    show(rejectionBanner, state.rejection !== null);
    rejectionBanner.textContent = state.rejection ?? "";

    show(retryBanner, state.phase === "retry");
    if (state.phase === "retry") {
      errorText.textContent = state.error ?? "request failed";
      retryTimer = window.setTimeout(() => void session.retry(), 2500);
    }

    if (state.phase === "done") {
      const parts = [];
      if (state.progress !== null) {
        for (const [metric, entry] of Object.entries(state.progress.metrics)) {
          parts.push(`${metric}: ${entry.rated}/${entry.total}`);
        }
      }
      completionText.textContent = `All items rated (${parts.join(", ")}).`;
      if (!agreementStarted) {
        agreementStarted = true;
        startAgreementPolling(api, agreementPanel);
      }
    }
  };

  el<HTMLButtonElement>("retry-button").addEventListener("click", () => void session.retry());
  document.addEventListener("keydown", (event) => {
    if (event.altKey || event.ctrlKey || event.metaKey) {
      return;
    }
    if (event.target instanceof HTMLInputElement) {
      return;
    }
    void session.handleKey(event.key);
  });

  void session.start();
}

async function init(): Promise<void> {
  const rubric = await loadRubric();
  const setup = el<HTMLElement>("setup");
  const input = el<HTMLInputElement>("rater-input");
  const begin = (raterId: string): void => {
    sessionStorage.setItem(RATER_KEY, raterId);
    show(setup, false);
    run(rubric, raterId);
  };

  const saved = sessionStorage.getItem(RATER_KEY);
  if (saved !== null && saved.trim() !== "") {
    begin(saved);
    return;
  }
  show(setup, true);
  const start = (): void => {
    const raterId = input.value.trim();
    if (raterId !== "") {
      begin(raterId);
    }
  };
  el<HTMLButtonElement>("start-button").addEventListener("click", start);
  input.addEventListener("keydown", (event) => {
    if (event.key === "Enter") {
      start();
    }
  });
}

void init();

/** Typed client for the four /api/* endpoints of the annotation backend. */

import { MetricName, RatingValue } from "./rubric.js";

export interface ClipRef {
  video_id: string;
  t0: number;
  t1: number;
}

export interface AnnotationItem {
  item_id: string;
  feedback: string;
  clip: ClipRef | null;
  metric: string;
  position: { rated: number; total: number };
}

export interface MetricProgress {
  rated: number;
  total: number;
  done: boolean;
}

export interface Progress {
  rater: string;
  total: number;
  metrics: Record<string, MetricProgress>;
}

export interface Rating {
  item_id: string;
  rater_id: string;
  metric: MetricName;
  value: RatingValue;
  timestamp?: number;
}

export interface RatingAck {
  status: string;
  item_id: string;
  metric: string;
  value: number | string;
  progress: Progress;
}

export interface AgreementReport {
  metric: string;
  weighting: string;
  n_annotated: number;
  n_retained: number;
  kappa_weighted: number;
  degenerate: boolean;
  disagreement_histogram: Record<string, number>;
}

export type Weighting = "linear" | "quadratic";

/** 409 means the other rater has not finished yet; not an error. */
export type AgreementResult =
  | { status: "ready"; report: AgreementReport }
  | { status: "pending"; detail: string };

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

async function detailOf(response: Response): Promise<string> {
  try {
    const body = (await response.json()) as { detail?: unknown };
    if (typeof body.detail === "string") {
      return body.detail;
    }
  } catch {
    // non-JSON error body; fall back to the status line
  }
  return `HTTP ${response.status}`;
}

export class ApiClient {
  constructor(
    private baseUrl = "",
    private fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async get(path: string): Promise<Response> {
    return this.fetchImpl(this.baseUrl + path);
  }

  /** Next unrated item for (rater, metric), or null once the metric is finished. */
  async nextItem(rater: string, metric: MetricName): Promise<AnnotationItem | null> {
    const query = new URLSearchParams({ rater, metric });
    const response = await this.get(`/api/next?${query}`);
    if (response.status === 204) {
      return null;
    }
    if (!response.ok) {
      throw new Error(await detailOf(response));
    }
    return (await response.json()) as AnnotationItem;
  }

  async postRating(rating: Rating): Promise<RatingAck> {
    const response = await this.fetchImpl(`${this.baseUrl}/api/rating`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(rating),
    });
    if (!response.ok) {
      throw new Error(await detailOf(response));
    }
    return (await response.json()) as RatingAck;
  }

  async progress(rater: string): Promise<Progress> {
    const query = new URLSearchParams({ rater });
    const response = await this.get(`/api/progress?${query}`);
    if (!response.ok) {
      throw new Error(await detailOf(response));
    }
    return (await response.json()) as Progress;
  }

  async agreement(metric: MetricName, weighting: Weighting = "linear"): Promise<AgreementResult> {
    const query = new URLSearchParams({ metric, weighting });
    const response = await this.get(`/api/agreement?${query}`);
    if (response.status === 409) {
      return { status: "pending", detail: await detailOf(response) };
    }
    if (!response.ok) {
      throw new Error(await detailOf(response));
    }
    return { status: "ready", report: (await response.json()) as AgreementReport };
  }
}

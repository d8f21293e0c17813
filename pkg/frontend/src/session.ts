/** Rating flow for a single rater: fetch next item, submit, advance.
 *
 * All state lives here rather than in the DOM so the flow can be driven and
 * asserted in tests; main.ts only renders whatever `state` says.  Two rules
 * are enforced unconditionally:
 *
 *  - values are validated against the rubric before any request is built, so
 *    a keypress that is off the metric's scale never reaches the server;
 *  - a rating whose POST was not acknowledged stays pending and is re-sent on
 *    retry (the server treats repeats as overwrites), so ratings are never
 *    silently dropped.
 */

import { AnnotationItem, ApiClient, Progress, Rating } from "./api.js";
import { METRICS, MetricName, RatingValue, Rubric, isValidValue, keyToValue } from "./rubric.js";

export type SessionPhase = "idle" | "loading" | "rating" | "submitting" | "retry" | "done";

export interface SessionState {
  phase: SessionPhase;
  metric: MetricName | null;
  item: AnnotationItem | null;
  /** Accepted rating not yet acknowledged by the server. */
  pending: Rating | null;
  /** Last progress snapshot returned by the server. */
  progress: Progress | null;
  /** Message for the most recent client-side rejected input, if any. */
  rejection: string | null;
  /** Network/server error behind the retry banner. */
  error: string | null;
}

export class AnnotationSession {
  onChange: (state: SessionState) => void = () => {};

  private current: SessionState = {
    phase: "idle",
    metric: null,
    item: null,
    pending: null,
    progress: null,
    rejection: null,
    error: null,
  };

  constructor(
    private api: ApiClient,
    readonly raterId: string,
    private rubric: Rubric,
    private metrics: MetricName[] = [...METRICS],
  ) {}

  get state(): SessionState {
    return this.current;
  }

  private update(patch: Partial<SessionState>): void {
    this.current = { ...this.current, ...patch };
    this.onChange(this.current);
  }

  /** Ask the server for the first unrated item; the server decides where we resume. */
  async start(): Promise<void> {
    await this.advance(0);
  }

  /** Translate a keypress into a submission. Returns false when the key was rejected. */
  async handleKey(key: string): Promise<boolean> {
    if (this.current.phase !== "rating" || this.current.metric === null) {
      return false;
    }
    const value = keyToValue(this.rubric[this.current.metric], key);
    if (value === null) {
      this.update({ rejection: `"${key}" is not on the ${this.current.metric} scale` });
      return false;
    }
    await this.submit(value);
    return true;
  }

  /** Validate against the rubric and POST; invalid values never leave the client. */
  async submit(value: RatingValue): Promise<void> {
    const { phase, item, metric } = this.current;
    if (phase !== "rating" || item === null || metric === null) {
      return;
    }
    if (!isValidValue(this.rubric[metric], value)) {
      this.update({ rejection: `${String(value)} is not on the ${metric} scale` });
      return;
    }
    await this.deliver({
      item_id: item.item_id,
      rater_id: this.raterId,
      metric,
      value,
      timestamp: Date.now() / 1000,
    });
  }

  /** Re-send the unacknowledged rating, or re-fetch if nothing is pending. */
  async retry(): Promise<void> {
    if (this.current.pending !== null) {
      await this.deliver(this.current.pending);
    } else {
      const metric = this.current.metric;
      await this.advance(metric === null ? 0 : this.metrics.indexOf(metric));
    }
  }

  private async deliver(rating: Rating): Promise<void> {
    this.update({ phase: "submitting", pending: rating, rejection: null, error: null });
    try {
      const ack = await this.api.postRating(rating);
      this.update({ pending: null, progress: ack.progress });
    } catch (err) {
      this.update({ phase: "retry", error: err instanceof Error ? err.message : String(err) });
      return;
    }
    await this.advance(this.metrics.indexOf(rating.metric));
  }

  /** Show the next unrated item, moving on to later metrics as each finishes. */
  private async advance(fromMetric: number): Promise<void> {
    this.update({ phase: "loading", rejection: null, error: null });
    try {
      for (let i = Math.max(fromMetric, 0); i < this.metrics.length; i++) {
        const metric = this.metrics[i];
        const item = await this.api.nextItem(this.raterId, metric);
        if (item !== null) {
          this.update({ phase: "rating", metric, item });
          return;
        }
      }
      const progress = await this.api.progress(this.raterId);
      this.update({ phase: "done", metric: null, item: null, progress });
    } catch (err) {
      this.update({ phase: "retry", error: err instanceof Error ? err.message : String(err) });
    }
  }
}

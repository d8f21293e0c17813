/** Rating-scale definitions shared with the judge prompts.
 *
 * rubric.json is generated from the same source the judge prompts are built
 * from, so the level descriptions shown to raters match the prompt text.
 * Everything that decides whether a value is on a metric's scale lives here;
 * the session refuses to send anything these checks reject.
 */

export type MetricName = "specificity" | "actionability";
export type RatingValue = number | "skip";

export const METRICS: MetricName[] = ["specificity", "actionability"];
export const SKIP = "skip" as const;

export interface RubricLevel {
  value: number;
  name: string;
  description: string;
}

export interface MetricRubric {
  metric: string;
  scale_min: number;
  scale_max: number;
  skip_allowed: boolean;
  skip_description?: string;
  levels: RubricLevel[];
  examples: (string | null)[][];
}

export type Rubric = Record<MetricName, MetricRubric>;

/** True when `value` is actually on this metric's scale. */
export function isValidValue(rubric: MetricRubric, value: RatingValue): boolean {
  if (value === SKIP) {
    return rubric.skip_allowed;
  }
  return Number.isInteger(value) && value >= rubric.scale_min && value <= rubric.scale_max;
}

/** Map a keypress to a rating value, or null when the key is off the scale. */
export function keyToValue(rubric: MetricRubric, key: string): RatingValue | null {
  if (key === "s" || key === "S") {
    return rubric.skip_allowed ? SKIP : null;
  }
  if (!/^[0-9]$/.test(key)) {
    return null;
  }
  const value = Number(key);
  return isValidValue(rubric, value) ? value : null;
}

/** Fetch the bundled rubric (served next to the page). */
export async function loadRubric(url = "rubric.json"): Promise<Rubric> {
  const response = await fetch(url);
  if (!response.ok) {
    throw new Error(`failed to load rubric: HTTP ${response.status}`);
  }
  return (await response.json()) as Rubric;
}

/**
 * Extraction of metric values as literal substrings of the server
 * response. The panel must show the server's bytes, so numbers are
 * never parsed and re-rendered; they are sliced out of the body text.
 */

export interface MetricRow {
  key: string;
  literal: string;
}

const NUMBER = String.raw`-?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?`;

/** The exact number token following "key": in the body, or null. */
export const metricLiteral = (text: string, key: string): string | null => {
  const pattern = new RegExp(`"${key}"\\s*:\\s*(${NUMBER})`);
  const match = pattern.exec(text);
  return match ? match[1] : null;
};

const METRIC_KEYS = ["sm", "icp", "ifn", "ned", "qscore"];

/** Rows for every metric key present in the body, in display order. */
export const metricRows = (text: string): MetricRow[] => {
  const rows: MetricRow[] = [];
  for (const key of METRIC_KEYS) {
    const literal = metricLiteral(text, key);
    if (literal !== null) rows.push({ key, literal });
  }
  return rows;
};

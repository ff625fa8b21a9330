/** Pure cell math for the QSCORE heatmap: rows are alpha values, columns tau values. */

export interface CellIndex {
  row: number;
  col: number;
}

export interface Range {
  min: number;
  max: number;
}

export const qscoreRange = (grid: (number | null)[][]): Range | null => {
  let min = Infinity;
  let max = -Infinity;
  for (const row of grid) {
    for (const q of row) {
      if (q === null) continue;
      min = Math.min(min, q);
      max = Math.max(max, q);
    }
  }
  return min <= max ? { min, max } : null;
};

/** Two-stop interpolation, cold blue to warm red; null cells render grey. */
export const colorFor = (q: number | null, range: Range | null): string => {
  if (q === null || range === null) return "#d0d0d0";
  const span = range.max - range.min;
  const t = span > 0 ? (q - range.min) / span : 0.5;
  const r = Math.round(40 + t * (220 - 40));
  const g = Math.round(80 + (1 - Math.abs(t - 0.5) * 2) * 90);
  const b = Math.round(200 - t * (200 - 50));
  return `rgb(${r}, ${g}, ${b})`;
};

export const cellRect = (
  cell: CellIndex,
  width: number,
  height: number,
  nRows: number,
  nCols: number,
): { x: number; y: number; w: number; h: number } => {
  const w = width / nCols;
  const h = height / nRows;
  return { x: cell.col * w, y: cell.row * h, w, h };
};

export const cellCenter = (
  cell: CellIndex,
  width: number,
  height: number,
  nRows: number,
  nCols: number,
): { x: number; y: number } => {
  const { x, y, w, h } = cellRect(cell, width, height, nRows, nCols);
  return { x: x + w / 2, y: y + h / 2 };
};

/** Inverse of cellRect; null for clicks outside the drawing. */
export const cellFromPoint = (
  x: number,
  y: number,
  width: number,
  height: number,
  nRows: number,
  nCols: number,
): CellIndex | null => {
  if (x < 0 || y < 0 || x >= width || y >= height) return null;
  const col = Math.min(Math.floor((x / width) * nCols), nCols - 1);
  const row = Math.min(Math.floor((y / height) * nRows), nRows - 1);
  return { row, col };
};

/** Index of the axis value closest to the slider position, for marking the current cell. */
export const nearestIndex = (values: number[], target: number): number => {
  let best = 0;
  for (let i = 1; i < values.length; i++) {
    if (Math.abs(values[i] - target) < Math.abs(values[best] - target)) {
      best = i;
    }
  }
  return best;
};

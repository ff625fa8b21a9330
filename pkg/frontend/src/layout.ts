export interface Point {
  x: number;
  y: number;
}

/**
 * Deterministic force-directed layout. Nodes repel pairwise, edges pull
 * their endpoints together, and every service additionally pulls its
 * members toward the service centroid so groups form visible blobs.
 * No randomness: initial positions come from a hash of the node id, so
 * the same inputs always produce the same picture.
 */
export const forceLayout = (
  nodeIds: number[],
  edges: Array<[number, number]>,
  groups: number[][],
  width: number,
  height: number,
  iterations = 250,
): Map<number, Point> => {
  const n = nodeIds.length;
  const positions = new Map<number, Point>();
  if (n === 0) return positions;

  const index = new Map<number, number>();
  nodeIds.forEach((id, i) => index.set(id, i));

  const xs = new Float64Array(n);
  const ys = new Float64Array(n);
  nodeIds.forEach((id, i) => {
    // low-discrepancy ring start; the golden-angle spacing keeps even
    // consecutive ids far apart
    const angle = (i * 2.399963 + hash01(id) * 0.5) % (2 * Math.PI);
    const radius = 0.25 + 0.2 * hash01(id * 31 + 7);
    xs[i] = 0.5 + radius * Math.cos(angle);
    ys[i] = 0.5 + radius * Math.sin(angle);
  });

  const pairs: Array<[number, number]> = [];
  for (const [a, b] of edges) {
    const i = index.get(a);
    const j = index.get(b);
    if (i !== undefined && j !== undefined && i !== j) pairs.push([i, j]);
  }
  const groupIdx = groups
    .map((g) => g.map((id) => index.get(id)).filter((i): i is number => i !== undefined))
    .filter((g) => g.length > 1);

  const k = Math.sqrt(1 / n);
  const dx = new Float64Array(n);
  const dy = new Float64Array(n);

  for (let iter = 0; iter < iterations; iter++) {
    dx.fill(0);
    dy.fill(0);

    for (let i = 0; i < n; i++) {
      for (let j = i + 1; j < n; j++) {
        let ex = xs[i] - xs[j];
        let ey = ys[i] - ys[j];
        let dist = Math.hypot(ex, ey);
        if (dist < 1e-9) {
          // coincident nodes: push apart along a fixed direction
          ex = 1e-6 * (i - j);
          ey = 1e-6;
          dist = Math.hypot(ex, ey);
        }
        const force = (k * k) / dist;
        dx[i] += (ex / dist) * force;
        dy[i] += (ey / dist) * force;
        dx[j] -= (ex / dist) * force;
        dy[j] -= (ey / dist) * force;
      }
    }

    for (const [i, j] of pairs) {
      const ex = xs[i] - xs[j];
      const ey = ys[i] - ys[j];
      const dist = Math.hypot(ex, ey) || 1e-9;
      const force = (dist * dist) / k;
      dx[i] -= (ex / dist) * force;
      dy[i] -= (ey / dist) * force;
      dx[j] += (ex / dist) * force;
      dy[j] += (ey / dist) * force;
    }

    for (const members of groupIdx) {
      let cx = 0;
      let cy = 0;
      for (const i of members) {
        cx += xs[i];
        cy += ys[i];
      }
      cx /= members.length;
      cy /= members.length;
      for (const i of members) {
        dx[i] += (cx - xs[i]) * 0.06;
        dy[i] += (cy - ys[i]) * 0.06;
      }
    }

    const temperature = 0.1 * (1 - iter / iterations) + 0.002;
    for (let i = 0; i < n; i++) {
      const step = Math.hypot(dx[i], dy[i]);
      if (step > 0) {
        const limited = Math.min(step, temperature);
        xs[i] += (dx[i] / step) * limited;
        ys[i] += (dy[i] / step) * limited;
      }
    }
  }

  // rescale into the viewport with a margin
  let minX = Infinity;
  let maxX = -Infinity;
  let minY = Infinity;
  let maxY = -Infinity;
  for (let i = 0; i < n; i++) {
    minX = Math.min(minX, xs[i]);
    maxX = Math.max(maxX, xs[i]);
    minY = Math.min(minY, ys[i]);
    maxY = Math.max(maxY, ys[i]);
  }
  const pad = 0.08;
  const spanX = maxX - minX || 1;
  const spanY = maxY - minY || 1;
  nodeIds.forEach((id, i) => {
    positions.set(id, {
      x: (pad + ((xs[i] - minX) / spanX) * (1 - 2 * pad)) * width,
      y: (pad + ((ys[i] - minY) / spanY) * (1 - 2 * pad)) * height,
    });
  });
  return positions;
};

const hash01 = (value: number): number => {
  let h = value | 0;
  h = Math.imul(h ^ (h >>> 16), 0x45d9f3b);
  h = Math.imul(h ^ (h >>> 13), 0x45d9f3b);
  h ^= h >>> 16;
  return (h >>> 0) / 0xffffffff;
};

/** Convex hull by monotone chain, counter-clockwise, no repeated point. */
export const convexHull = (points: Point[]): Point[] => {
  if (points.length <= 2) return [...points];
  const sorted = [...points].sort((a, b) => a.x - b.x || a.y - b.y);
  const cross = (o: Point, a: Point, b: Point) =>
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);

  const lower: Point[] = [];
  for (const p of sorted) {
    while (
      lower.length >= 2 &&
      cross(lower[lower.length - 2], lower[lower.length - 1], p) <= 0
    ) {
      lower.pop();
    }
    lower.push(p);
  }
  const upper: Point[] = [];
  for (let i = sorted.length - 1; i >= 0; i--) {
    const p = sorted[i];
    while (
      upper.length >= 2 &&
      cross(upper[upper.length - 2], upper[upper.length - 1], p) <= 0
    ) {
      upper.pop();
    }
    upper.push(p);
  }
  lower.pop();
  upper.pop();
  return lower.concat(upper);
};

/** Hull vertices pushed outward from their centroid, for drawing padded service outlines. */
export const paddedHull = (points: Point[], pad: number): Point[] => {
  const hull = convexHull(points);
  if (hull.length === 0) return hull;
  let cx = 0;
  let cy = 0;
  for (const p of hull) {
    cx += p.x;
    cy += p.y;
  }
  cx /= hull.length;
  cy /= hull.length;
  return hull.map((p) => {
    const ex = p.x - cx;
    const ey = p.y - cy;
    const dist = Math.hypot(ex, ey) || 1;
    return { x: p.x + (ex / dist) * pad, y: p.y + (ey / dist) * pad };
  });
};

/** True when the point lies inside or on the convex polygon (CCW order). */
export const insideHull = (hull: Point[], p: Point): boolean => {
  if (hull.length < 3) {
    return hull.some((h) => Math.hypot(h.x - p.x, h.y - p.y) < 1e-9);
  }
  for (let i = 0; i < hull.length; i++) {
    const a = hull[i];
    const b = hull[(i + 1) % hull.length];
    const cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
    if (cross < -1e-9) return false;
  }
  return true;
};

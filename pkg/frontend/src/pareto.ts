// Client-side Pareto recomputation for the live scatter (all objectives
// maximized, matching the engine).

export function dominates(a: number[], b: number[]): boolean {
  if (a.length !== b.length) {
    throw new Error(`objective length mismatch: ${a.length} vs ${b.length}`);
  }
  let strict = false;
  for (let i = 0; i < a.length; i++) {
    if (a[i] < b[i]) return false;
    if (a[i] > b[i]) strict = true;
  }
  return strict;
}

/** Indices of the non-dominated points, in input order. */
export function paretoFront(points: number[][]): number[] {
  const front: number[] = [];
  for (let i = 0; i < points.length; i++) {
    let dominated = false;
    for (let j = 0; j < points.length; j++) {
      if (j !== i && dominates(points[j], points[i])) {
        dominated = true;
        break;
      }
    }
    if (!dominated) front.push(i);
  }
  return front;
}

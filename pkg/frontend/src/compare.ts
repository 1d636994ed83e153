// Log parsing and convergence math shared by the live view and the compare
// view. The arithmetic deliberately mirrors the server's report command so an
// exported CSV is byte-identical to the server's for the same runs: epoch
// seconds are integer milliseconds divided once by 1000, and rows are
// formatted with fixed decimals (3 for elapsed, 6 for the value).

import type { RunLogRecord } from "./types.js";

/** Epoch seconds; bit-identical to the server's timestamp parsing. */
export function parseUtcIso(text: string): number {
  const ms = Date.parse(text);
  if (Number.isNaN(ms)) throw new Error(`bad timestamp: ${text}`);
  return ms / 1000;
}

export function completionTime(record: RunLogRecord): number {
  return parseUtcIso(record.start_time) + record.duration_s;
}

const RECORD_FIELDS = [
  "eval_id", "parent_ids", "origin", "pipeline", "fidelity", "objectives",
  "status", "error_msg", "start_time", "duration_s", "cached",
] as const;

/**
 * Parse a JSON-Lines run log with the same tolerance rules as the engine:
 * the format_version header line is validated and skipped, and a truncated
 * final line (crash artifact) is ignored.
 */
export function parseJsonLines(text: string): RunLogRecord[] {
  const records: RunLogRecord[] = [];
  const lines = text.split("\n");
  const trailingOpen = text !== "" && !text.endsWith("\n");
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i];
    if (line === "") continue;
    let payload: Record<string, unknown>;
    try {
      payload = JSON.parse(line);
    } catch (exc) {
      if (trailingOpen && i === lines.length - 1) break; // torn last line
      throw new Error(`line ${i + 1}: malformed JSON`);
    }
    if ("format_version" in payload && !("eval_id" in payload)) {
      if (payload["format_version"] !== 1) {
        throw new Error(`line ${i + 1}: unsupported format_version`);
      }
      continue;
    }
    for (const field of RECORD_FIELDS) {
      if (!(field in payload)) {
        throw new Error(`line ${i + 1}: record missing field ${field}`);
      }
    }
    records.push(payload as unknown as RunLogRecord);
  }
  return records;
}

/**
 * Convergence series: one (elapsed seconds, running best) point per ok
 * record, ordered by completion time, elapsed from the first record's start.
 */
export function bestSoFar(
  records: RunLogRecord[],
  objectiveIndex = 0,
): Array<[number, number]> {
  if (records.length === 0) return [];
  const t0 = parseUtcIso(records[0].start_time);
  const ok = records.filter((r) => r.status === "ok");
  const keyed = ok.map((r, i) => ({ r, i, t: completionTime(r) }));
  keyed.sort((a, b) => (a.t - b.t) || (a.i - b.i));
  const series: Array<[number, number]> = [];
  let best = -Infinity;
  for (const { r, t } of keyed) {
    best = Math.max(best, (r.objectives as number[])[objectiveIndex]);
    series.push([t - t0, best]);
  }
  return series;
}

export function runIdFromName(name: string): string {
  const stem = name.replace(/\.[^.]*$/, "").split("/").pop() ?? name;
  return stem.startsWith("run-") ? stem.slice(4) : stem;
}

export interface RunForCompare {
  runId: string;
  records: RunLogRecord[];
}

/** Plot-data CSV matching the server's report export byte for byte. */
export function buildCompareCsv(runs: RunForCompare[]): string {
  const lines = ["elapsed_s,run_id,best_value"];
  for (const run of runs) {
    for (const [elapsed, value] of bestSoFar(run.records)) {
      lines.push(`${elapsed.toFixed(3)},${run.runId},${value.toFixed(6)}`);
    }
  }
  return lines.join("\n") + "\n";
}

export interface CompareSummaryRow {
  runId: string;
  evaluations: number;
  okCount: number;
  errorCount: number;
  timeoutCount: number;
  errorRate: number;
  finalBest: number | null;
}

export function summarizeRun(runId: string, records: RunLogRecord[]): CompareSummaryRow {
  const ok = records.filter((r) => r.status === "ok");
  const errors = records.filter((r) => r.status === "error").length;
  const timeouts = records.filter((r) => r.status === "timeout").length;
  let finalBest: number | null = null;
  for (const r of ok) {
    const v = (r.objectives as number[])[0];
    if (finalBest === null || v > finalBest) finalBest = v;
  }
  return {
    runId,
    evaluations: records.length,
    okCount: ok.length,
    errorCount: errors,
    timeoutCount: timeouts,
    errorRate: records.length ? (errors + timeouts) / records.length : 0,
    finalBest,
  };
}

// Live-run view model. State is derived purely from API payloads: the event
// cursor feeds the record buffer (deduplicated by eval_id), and every chart
// series is recomputed from that buffer, never invented client-side.

import { bestSoFar } from "./compare.js";
import { paretoFront } from "./pareto.js";
import type { Phase, RunLogRecord, RunStatusPayload } from "./types.js";

export interface ParetoPoint {
  evalId: string;
  pipeline: string;
  objectives: number[];
  onFront: boolean;
}

export class RunViewModel {
  readonly runId: string;
  phase: Phase = "loading";
  elapsedS = 0;
  remainingS = 0;
  bestObjectives: number[] | null = null;
  error: string | null = null;
  cursor = 0; // next `since` value for the event stream
  records: RunLogRecord[] = [];
  private seen = new Set<string>();

  constructor(runId: string) {
    this.runId = runId;
  }

  applyStatus(status: RunStatusPayload): void {
    this.phase = status.phase;
    this.elapsedS = status.elapsed_s;
    this.remainingS = status.remaining_s;
    this.bestObjectives = status.best_objectives;
    this.error = status.error;
  }

  /** Ingest one event batch; duplicate eval_ids are never rendered twice. */
  applyEvents(records: RunLogRecord[], nextSince: number, phase: Phase): void {
    for (const record of records) {
      if (this.seen.has(record.eval_id)) continue;
      this.seen.add(record.eval_id);
      this.records.push(record);
    }
    this.cursor = Math.max(this.cursor, nextSince);
    this.phase = phase;
  }

  get terminal(): boolean {
    return this.phase === "done" || this.phase === "failed" ||
      this.phase === "stopped";
  }

  counts(): { ok: number; error: number; timeout: number } {
    const counts = { ok: 0, error: 0, timeout: 0 };
    for (const r of this.records) counts[r.status] += 1;
    return counts;
  }

  /** Running-max metric over completion time; monotone by construction. */
  convergenceSeries(): Array<[number, number]> {
    return bestSoFar(this.records);
  }

  /** All ok evaluations in objective space with the current non-dominated
   * set flagged (client-side recomputation; cheap at dashboard scale). */
  paretoPoints(): ParetoPoint[] {
    const ok = this.records.filter((r) => r.status === "ok");
    const front = new Set(paretoFront(ok.map((r) => r.objectives as number[])));
    return ok.map((r, i) => ({
      evalId: r.eval_id,
      pipeline: r.pipeline,
      objectives: r.objectives as number[],
      onFront: front.has(i),
    }));
  }

  lastRecords(n: number): RunLogRecord[] {
    return this.records.slice(-n).reverse();
  }
}

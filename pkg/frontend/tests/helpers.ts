import { readFileSync } from "node:fs";

import { parseJsonLines } from "../src/compare.js";
import type { RunLogRecord } from "../src/types.js";

export function fixturePath(name: string): string {
  return new URL(`../../tests/fixtures/${name}`, import.meta.url).pathname;
}

export function readFixture(name: string): string {
  return readFileSync(fixturePath(name), "utf-8");
}

export function fixtureRecords(name: string): RunLogRecord[] {
  return parseJsonLines(readFixture(name));
}

let counter = 0;

export function record(overrides: Partial<RunLogRecord> = {}): RunLogRecord {
  counter += 1;
  const base: RunLogRecord = {
    eval_id: `e${String(counter).padStart(4, "0")}`,
    parent_ids: [],
    origin: "random",
    pipeline: "knn(k=3,weights=uniform)",
    fidelity: 1.0,
    objectives: [0.5, -1],
    status: "ok",
    error_msg: null,
    start_time: `2026-03-02T10:00:${String(counter % 60).padStart(2, "0")}.000Z`,
    duration_s: 1.0,
    cached: false,
  };
  const merged = { ...base, ...overrides };
  if (merged.status !== "ok") {
    merged.objectives = null;
    merged.error_msg = merged.error_msg ?? "synthetic failure";
  }
  return merged;
}

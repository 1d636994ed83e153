import assert from "node:assert/strict";
import { test } from "node:test";

import { bestSoFar, buildCompareCsv, parseJsonLines, parseUtcIso,
         runIdFromName, summarizeRun } from "../src/compare.js";
import { fixtureRecords, readFixture, record } from "./helpers.js";

test("exported CSV byte-equals the server report for the same runs", () => {
  const runs = ["run-alpha.jsonl", "run-beta.jsonl"].map((name) => ({
    runId: runIdFromName(name),
    records: fixtureRecords(name),
  }));
  assert.equal(buildCompareCsv(runs), readFixture("expected_compare.csv"));
});

test("timestamp parsing matches the server arithmetic", () => {
  assert.equal(parseUtcIso("2024-01-01T00:00:01.500Z"), 1704067201.5);
  assert.equal(parseUtcIso("2026-08-08T12:34:56.789Z"), 1786192496.789);
  assert.throws(() => parseUtcIso("yesterday"), /bad timestamp/);
});

test("parseJsonLines validates the header and skips a torn final line", () => {
  const lines = readFixture("run-alpha.jsonl");
  const records = parseJsonLines(lines);
  assert.equal(records.length, 14);
  const torn = lines + '{"eval_id":"zzz","status"';
  assert.equal(parseJsonLines(torn).length, 14);
  assert.throws(() => parseJsonLines('{"format_version":2}\n'),
                /unsupported format_version/);
  assert.throws(
    () => parseJsonLines('{"format_version":1}\nnot json\n{"x":1}\n'),
    /line 2: malformed JSON/);
});

test("best-so-far series is the running max over completion time", () => {
  const records = [
    record({ start_time: "2026-03-02T10:00:00.000Z", duration_s: 1,
             objectives: [0.6, -1] }),
    record({ start_time: "2026-03-02T10:00:00.000Z", duration_s: 2,
             objectives: [0.5, -1] }),
    record({ start_time: "2026-03-02T10:00:00.000Z", duration_s: 3,
             objectives: [0.7, -1] }),
  ];
  assert.deepEqual(bestSoFar(records), [[1, 0.6], [2, 0.6], [3, 0.7]]);
  assert.deepEqual(bestSoFar([]), []);
  assert.deepEqual(bestSoFar([record({ status: "error" })]), []);
});

test("run id derives from the file name", () => {
  assert.equal(runIdFromName("run-alpha.jsonl"), "alpha");
  assert.equal(runIdFromName("some/dir/run-x9.jsonl"), "x9");
  assert.equal(runIdFromName("custom.jsonl"), "custom");
});

test("summaries count statuses and surface the final best", () => {
  const summary = summarizeRun("alpha", fixtureRecords("run-alpha.jsonl"));
  assert.equal(summary.evaluations, 14);
  assert.equal(summary.okCount + summary.errorCount + summary.timeoutCount, 14);
  const expectedRate =
    (summary.errorCount + summary.timeoutCount) / summary.evaluations;
  assert.equal(summary.errorRate, expectedRate);
  const series = bestSoFar(fixtureRecords("run-alpha.jsonl"));
  assert.equal(summary.finalBest, series[series.length - 1][1]);
});

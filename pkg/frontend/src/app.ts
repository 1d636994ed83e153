// Single-page dashboard: configure and launch runs, watch convergence and the
// Pareto front live, stop runs, and compare logs. One polling loop per open
// run view; every rendered number comes from API payloads via the view model.

import { ApiError, fetchSchema, getStatus, listRuns, pollEvents, startRun,
         stopRun } from "./api.js";
import { bestSoFar, buildCompareCsv, parseJsonLines, runIdFromName,
         summarizeRun, RunForCompare } from "./compare.js";
import { serverErrorToFieldErrors, setPath, validateForm, FieldErrors }
  from "./form.js";
import type { ConfigSchema } from "./types.js";
import { RunViewModel } from "./viewmodel.js";

const app = document.getElementById("app") as HTMLElement;
let activePoller: { cancelled: boolean } | null = null;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K, attrs: Record<string, string> = {}, ...children: Array<Node | string>
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) {
    if (k === "class") node.className = v;
    else node.setAttribute(k, v);
  }
  node.append(...children);
  return node;
}

function banner(kind: "error" | "info", text: string): HTMLElement {
  return el("div", { class: `banner ${kind}` }, text);
}

// ---------------------------------------------------------------------------
// Charts (inline SVG fed straight from the view model)

const SVG_NS = "http://www.w3.org/2000/svg";

function svgEl(tag: string, attrs: Record<string, string>): SVGElement {
  const node = document.createElementNS(SVG_NS, tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  return node;
}

function textAt(text: string, x: number, y: number): SVGElement {
  const node = svgEl("text", { x: String(x), y: String(y), class: "axis" });
  node.textContent = text;
  return node;
}

function convergenceChart(series: Array<[number, number]>,
                          width = 560, height = 220): SVGElement {
  const svg = svgEl("svg", {
    viewBox: `0 0 ${width} ${height}`, class: "chart",
    width: String(width), height: String(height),
  });
  if (series.length === 0) return svg;
  const xMax = Math.max(...series.map((p) => p[0]), 1e-9);
  const yLo = Math.min(...series.map((p) => p[1]));
  const yHi = Math.max(...series.map((p) => p[1]));
  const pad = 28;
  const sx = (x: number) => pad + (x / xMax) * (width - 2 * pad);
  const sy = (y: number) => yHi === yLo
    ? height / 2
    : height - pad - ((y - yLo) / (yHi - yLo)) * (height - 2 * pad);
  // Step trace: the running best holds between completions.
  const parts: string[] = [];
  series.forEach(([x, y], i) => {
    if (i === 0) parts.push(`M ${sx(x)} ${sy(y)}`);
    else parts.push(`L ${sx(x)} ${sy(series[i - 1][1])} L ${sx(x)} ${sy(y)}`);
  });
  svg.append(svgEl("path", { d: parts.join(" "), class: "trace" }),
             textAt(`${xMax.toFixed(1)}s`, width - pad, height - 8),
             textAt(yHi.toFixed(4), 2, pad),
             textAt(yLo.toFixed(4), 2, height - pad));
  return svg;
}

function paretoChart(points: Array<{ objectives: number[]; onFront: boolean }>,
                     width = 340, height = 220): SVGElement {
  const svg = svgEl("svg", {
    viewBox: `0 0 ${width} ${height}`, class: "chart",
    width: String(width), height: String(height),
  });
  if (points.length === 0) return svg;
  const xs = points.map((p) => p.objectives[0]);
  const ys = points.map((p) => p.objectives[1]);
  const span = (lo: number, hi: number) => (hi === lo ? 1 : hi - lo);
  const [xLo, xHi] = [Math.min(...xs), Math.max(...xs)];
  const [yLo, yHi] = [Math.min(...ys), Math.max(...ys)];
  const pad = 24;
  for (const p of points) {
    svg.append(svgEl("circle", {
      cx: String(pad + ((p.objectives[0] - xLo) / span(xLo, xHi))
        * (width - 2 * pad)),
      cy: String(height - pad - ((p.objectives[1] - yLo) / span(yLo, yHi))
        * (height - 2 * pad)),
      r: p.onFront ? "5" : "3",
      class: p.onFront ? "pt front" : "pt",
    }));
  }
  return svg;
}

// ---------------------------------------------------------------------------
// New-run form

async function renderNewRun(view: HTMLElement): Promise<void> {
  view.replaceChildren(el("h2", {}, "Start a run"));
  let schema: ConfigSchema;
  try {
    schema = await fetchSchema();
  } catch {
    const retry = el("button", {}, "Retry");
    retry.addEventListener("click", () => renderNewRun(view));
    view.append(banner("error", "Server unreachable."), retry);
    return;
  }

  const form = el("form", { class: "config-form" });
  const inputs = new Map<string, HTMLInputElement | HTMLSelectElement>();
  for (const field of schema.fields) {
    const row = el("label", { class: "field", "data-path": field.path });
    row.append(el("span", { class: "name" },
                  field.path + (field.required ? " *" : "")));
    let input: HTMLInputElement | HTMLSelectElement;
    if (field.enum) {
      input = el("select", {});
      for (const option of field.enum) {
        const opt = el("option", { value: option }, option);
        if (option === field.default) opt.selected = true;
        input.append(opt);
      }
    } else {
      input = el("input", {
        type: field.type === "string" ? "text" : "number",
        value: field.default !== undefined ? String(field.default) : "",
      });
      if (field.type !== "string") input.step = "any";
    }
    inputs.set(field.path, input);
    row.append(input, el("span", { class: "field-error" }));
    form.append(row);
  }
  form.append(el("button", { type: "submit" }, "Start"));
  const errorBox = el("div", {});
  view.append(form, errorBox);

  const showErrors = (errors: FieldErrors) => {
    for (const row of form.querySelectorAll(".field")) {
      const path = (row as HTMLElement).dataset.path as string;
      (row.querySelector(".field-error") as HTMLElement).textContent =
        errors[path] ?? "";
    }
    errorBox.replaceChildren(
      ...(errors[""] ? [banner("error", errors[""])] : []));
  };

  form.addEventListener("submit", async (event) => {
    event.preventDefault();
    const doc: Record<string, unknown> = {};
    for (const [path, input] of inputs) {
      const raw = input.value.trim();
      if (raw === "") continue;
      const field = schema.fields.find((f) => f.path === path);
      setPath(doc, path, field && field.type !== "string" ? Number(raw) : raw);
    }
    const clientErrors = validateForm(doc, schema);
    if (Object.keys(clientErrors).length > 0) {
      showErrors(clientErrors); // invalid form: no request leaves the page
      return;
    }
    try {
      const started = await startRun(doc);
      location.hash = `#/run/${started.run_id}`;
    } catch (exc) {
      if (exc instanceof ApiError) showErrors(serverErrorToFieldErrors(exc.body));
      else showErrors({ "": "Server unreachable." });
    }
  });
}

// ---------------------------------------------------------------------------
// Live run view

async function renderRun(view: HTMLElement, runId: string): Promise<void> {
  const vm = new RunViewModel(runId);
  try {
    vm.applyStatus(await getStatus(runId));
  } catch (exc) {
    if (exc instanceof ApiError && exc.status === 404) {
      view.replaceChildren(el("h2", {}, "Run not found"),
                           el("p", {}, `No run ${runId} on this server.`));
      return;
    }
    throw exc;
  }

  const header = el("div", { class: "run-header" });
  const stopButton = el("button", {}, "Stop");
  stopButton.addEventListener("click", async () => {
    const ack = await stopRun(runId);
    vm.phase = ack.phase as RunViewModel["phase"];
    paint();
  });
  const charts = el("div", { class: "charts" });
  const feed = el("table", { class: "feed" });
  view.replaceChildren(el("h2", {}, `Run ${runId}`), header, charts,
                       el("h3", {}, "Recent evaluations"), feed);

  const paint = () => {
    const counts = vm.counts();
    header.replaceChildren(
      el("span", { class: `phase phase-${vm.phase}` }, vm.phase),
      stopButton,
      el("span", {}, ` elapsed ${vm.elapsedS.toFixed(0)}s, remaining ` +
        `${vm.remainingS.toFixed(0)}s `),
      el("span", {}, ` ${vm.records.length} evaluations ` +
        `(ok ${counts.ok}, error ${counts.error}, timeout ${counts.timeout}) `),
      el("span", {}, vm.bestObjectives
        ? ` best ${vm.bestObjectives[0].toFixed(4)}` : " no result yet"),
      ...(vm.error ? [banner("error", vm.error)] : []),
    );
    charts.replaceChildren(
      el("figure", {}, convergenceChart(vm.convergenceSeries()),
         el("figcaption", {}, "best-so-far over elapsed seconds")),
      el("figure", {}, paretoChart(vm.paretoPoints()),
         el("figcaption", {}, "objective space (front highlighted)")),
    );
    const rows = vm.lastRecords(15).map((r) => el(
      "tr", { class: `status-${r.status}` },
      el("td", {}, r.eval_id),
      el("td", {}, r.status + (r.cached ? " (cached)" : "")),
      el("td", {}, r.objectives ? r.objectives[0].toFixed(4) : "-"),
      el("td", { class: "pipeline" }, r.pipeline)));
    feed.replaceChildren(
      el("tr", {}, el("th", {}, "id"), el("th", {}, "status"),
         el("th", {}, "metric"), el("th", {}, "pipeline")),
      ...rows);
  };
  paint();

  const poller = { cancelled: false };
  activePoller = poller;
  let backoffMs = 500;
  while (!poller.cancelled) {
    try {
      const batch = await pollEvents(runId, vm.cursor, 15);
      if (poller.cancelled) break;
      vm.applyEvents(batch.records, batch.next_since, batch.phase);
      vm.applyStatus(await getStatus(runId));
      backoffMs = 500;
      paint();
      if (vm.terminal) break;
    } catch {
      // transient network errors: retry with backoff
      await new Promise((resolve) => setTimeout(resolve, backoffMs));
      backoffMs = Math.min(backoffMs * 2, 10_000);
    }
  }
  paint();
}

// ---------------------------------------------------------------------------
// Run list

async function renderRunList(view: HTMLElement): Promise<void> {
  const { runs } = await listRuns();
  const table = el("table", { class: "summary" },
    el("tr", {}, el("th", {}, "run"), el("th", {}, "phase"),
       el("th", {}, "evaluations"), el("th", {}, "best")));
  for (const status of runs) {
    table.append(el("tr", {},
      el("td", {}, el("a", { href: `#/run/${status.run_id}` }, status.run_id)),
      el("td", {}, status.phase),
      el("td", {}, String(status.evaluations_completed)),
      el("td", {}, status.best_objectives
        ? status.best_objectives[0].toFixed(4) : "-")));
  }
  view.replaceChildren(el("h2", {}, "Runs"), table);
}

// ---------------------------------------------------------------------------
// Compare view

async function renderCompare(view: HTMLElement): Promise<void> {
  view.replaceChildren(el("h2", {}, "Compare runs"));
  const picker = el("div", { class: "picker" });
  const output = el("div", {});
  view.append(picker, output);
  const selected = new Map<string, RunForCompare>();

  const repaint = () => {
    const runs = [...selected.values()];
    output.replaceChildren();
    if (runs.length === 0) return;
    const overlay = el("div", { class: "charts" });
    for (const run of runs) {
      overlay.append(el("figure", {},
        convergenceChart(bestSoFar(run.records), 420, 180),
        el("figcaption", {}, run.runId)));
    }
    const table = el("table", { class: "summary" },
      el("tr", {}, el("th", {}, "run"), el("th", {}, "final best"),
         el("th", {}, "evaluations"), el("th", {}, "error rate")));
    for (const run of runs) {
      const s = summarizeRun(run.runId, run.records);
      table.append(el("tr", {},
        el("td", {}, s.runId),
        el("td", {}, s.finalBest === null ? "-" : s.finalBest.toFixed(6)),
        el("td", {}, String(s.evaluations)),
        el("td", {}, (s.errorRate * 100).toFixed(1) + "%")));
    }
    const exportButton = el("button", {}, "Export CSV");
    exportButton.addEventListener("click", () => {
      const blob = new Blob([buildCompareCsv(runs)], { type: "text/csv" });
      const link = el("a", { href: URL.createObjectURL(blob),
                             download: "convergence.csv" });
      link.click();
    });
    output.append(overlay, table, exportButton);
  };

  try {
    const { runs } = await listRuns();
    for (const status of runs) {
      const checkbox = el("input", { type: "checkbox" }) as HTMLInputElement;
      checkbox.addEventListener("change", async () => {
        if (!checkbox.checked) {
          selected.delete(status.run_id);
        } else {
          const events = await pollEvents(status.run_id, 0, 0);
          selected.set(status.run_id,
                       { runId: status.run_id, records: events.records });
        }
        repaint();
      });
      picker.append(el("label", { class: "pick" }, checkbox,
                       ` ${status.run_id} (${status.phase})`));
    }
  } catch {
    picker.append(banner("info", "Server unreachable; upload logs instead."));
  }

  // Uploaded log files are parsed in-browser with the same JSON-Lines rules.
  const upload = el("input",
                    { type: "file", multiple: "multiple" }) as HTMLInputElement;
  upload.addEventListener("change", async () => {
    for (const file of upload.files ?? []) {
      try {
        const records = parseJsonLines(await file.text());
        selected.set(file.name, { runId: runIdFromName(file.name), records });
      } catch (exc) {
        picker.append(banner("error",
                             `${file.name}: ${(exc as Error).message}`));
      }
    }
    repaint();
  });
  picker.append(el("label", { class: "pick" }, "Upload logs: ", upload));
}

// ---------------------------------------------------------------------------
// Router

async function route(): Promise<void> {
  if (activePoller) activePoller.cancelled = true;
  const hash = location.hash || "#/new";
  const nav = el("nav", {},
    el("a", { href: "#/new" }, "new run"), " | ",
    el("a", { href: "#/runs" }, "runs"), " | ",
    el("a", { href: "#/compare" }, "compare"));
  const view = el("main", {});
  app.replaceChildren(nav, view);
  const runMatch = /^#\/run\/(.+)$/.exec(hash);
  try {
    if (runMatch) await renderRun(view, runMatch[1]);
    else if (hash === "#/runs") await renderRunList(view);
    else if (hash === "#/compare") await renderCompare(view);
    else await renderNewRun(view);
  } catch (exc) {
    view.append(banner("error", (exc as Error).message));
  }
}

window.addEventListener("hashchange", () => { route(); });
route();

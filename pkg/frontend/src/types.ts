// Wire types mirroring the control API payloads.

export type Phase =
  | "loading"
  | "searching"
  | "post_processing"
  | "done"
  | "failed"
  | "stopped";

export type EvalStatus = "ok" | "timeout" | "error";

export interface RunLogRecord {
  eval_id: string;
  parent_ids: string[];
  origin: string;
  pipeline: string;
  fidelity: number;
  objectives: number[] | null;
  status: EvalStatus;
  error_msg: string | null;
  start_time: string; // UTC ISO-8601 with milliseconds
  duration_s: number;
  cached: boolean;
}

export interface RunStatusPayload {
  run_id: string;
  phase: Phase;
  evaluations_completed: number;
  best_objectives: number[] | null;
  elapsed_s: number;
  remaining_s: number;
  error: string | null;
}

export interface EventsPayload {
  run_id: string;
  phase: Phase;
  records: RunLogRecord[];
  next_since: number;
}

export interface StartRunResponse {
  run_id: string;
  phase: Phase;
}

export interface ApiErrorBody {
  code: string;
  message: string;
  field?: string;
}

export interface SchemaField {
  path: string;
  type: "string" | "number" | "integer";
  required: boolean;
  enum?: string[];
  default?: unknown;
  min?: number;
}

export interface ConfigSchema {
  version: number;
  strategies: string[];
  post_processors: string[];
  metrics: string[];
  fields: SchemaField[];
}

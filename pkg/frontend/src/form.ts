// Run-config form validation: client-side checks against the schema fetched
// from the server, plus mapping of server 400 bodies onto the same per-field
// error shape so both render identically next to the offending input.

import type { ApiErrorBody, ConfigSchema, SchemaField } from "./types.js";

export type FieldErrors = Record<string, string>;

export function getPath(doc: Record<string, unknown>, path: string): unknown {
  let node: unknown = doc;
  for (const part of path.split(".")) {
    if (node === null || typeof node !== "object") return undefined;
    node = (node as Record<string, unknown>)[part];
  }
  return node;
}

export function setPath(doc: Record<string, unknown>, path: string,
                        value: unknown): void {
  const parts = path.split(".");
  let node = doc;
  for (const part of parts.slice(0, -1)) {
    if (typeof node[part] !== "object" || node[part] === null) {
      node[part] = {};
    }
    node = node[part] as Record<string, unknown>;
  }
  node[parts[parts.length - 1]] = value;
}

function checkField(field: SchemaField, value: unknown): string | null {
  if (value === undefined || value === null || value === "") {
    return field.required ? "required" : null;
  }
  if (field.type === "string") {
    if (typeof value !== "string") return "must be text";
  } else {
    if (typeof value !== "number" || Number.isNaN(value)) {
      return "must be a number";
    }
    if (field.type === "integer" && !Number.isInteger(value)) {
      return "must be an integer";
    }
    if (field.min !== undefined && value < field.min) {
      return `must be at least ${field.min}`;
    }
  }
  if (field.enum && !field.enum.includes(value as string)) {
    return `must be one of: ${field.enum.join(", ")}`;
  }
  return null;
}

/** Client-side validation; keys are config field paths. */
export function validateForm(doc: Record<string, unknown>,
                             schema: ConfigSchema): FieldErrors {
  const errors: FieldErrors = {};
  for (const field of schema.fields) {
    const problem = checkField(field, getPath(doc, field.path));
    if (problem) errors[field.path] = problem;
  }
  return errors;
}

/** Server 400 body -> the same field-keyed error shape. */
export function serverErrorToFieldErrors(body: ApiErrorBody): FieldErrors {
  if (body.field) return { [body.field]: body.message };
  return { "": body.message };
}

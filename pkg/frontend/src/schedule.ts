// Medication schedule editor model: a local draft validated before it is
// ever sent, so the server only sees schema-valid med_schedule_set
// payloads. Server nack reasons are surfaced verbatim by the caller.

import { buildCommand } from "./protocol.js";

export interface ScheduleEntry {
  id: string;
  label: string;
  time: string; // HH:MM
  enabled: boolean;
}

const TIME_RE = /^([01]\d|2[0-3]):([0-5]\d)$/;

export function validateDraft(entries: ScheduleEntry[]): string[] {
  const errors: string[] = [];
  const seen = new Set<string>();
  entries.forEach((entry, i) => {
    if (!entry.id.trim()) {
      errors.push(`entry ${i + 1}: id is required`);
    } else if (seen.has(entry.id)) {
      errors.push(`entry ${i + 1}: duplicate id '${entry.id}'`);
    } else {
      seen.add(entry.id);
    }
    if (!TIME_RE.test(entry.time)) {
      errors.push(`entry ${i + 1}: time must be HH:MM (00:00-23:59)`);
    }
  });
  return errors;
}

export function buildScheduleCommand(entries: ScheduleEntry[], id?: string): string {
  const errors = validateDraft(entries);
  if (errors.length > 0) {
    throw new Error(errors.join("; "));
  }
  return buildCommand(
    "med_schedule_set",
    {
      entries: entries.map((e) => ({
        id: e.id,
        label: e.label,
        time: e.time,
        enabled: e.enabled,
      })),
    },
    id,
  );
}

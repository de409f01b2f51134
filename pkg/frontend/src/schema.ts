import { z } from "zod";

/** Keys every artifact manifest must carry, whatever the run outcome. */
export const REQUIRED_MANIFEST_KEYS = [
  "scenario",
  "model",
  "eps",
  "N",
  "scheme",
  "status",
] as const;

export const manifestSchema = z
  .record(z.string(), z.string())
  .superRefine((rec, ctx) => {
    for (const key of REQUIRED_MANIFEST_KEYS) {
      if (!(key in rec)) {
        ctx.addIssue({
          code: z.ZodIssueCode.custom,
          message: `manifest missing key: ${key}`,
        });
      }
    }
  });

export type Manifest = z.infer<typeof manifestSchema>;

const finite = z.number().finite();

export const seriesRowSchema = z.object({
  t: finite,
  E: finite,
  h1: finite.nullable(),
  hn: finite.nullable(),
});
export type SeriesRow = z.infer<typeof seriesRowSchema>;

export const shiftRowSchema = z.object({
  t: finite,
  h: finite,
  hdot: finite,
  regime: z.enum(["characteristic", "runaway"]),
});
export type ShiftRow = z.infer<typeof shiftRowSchema>;

/** Snapshot rows carry x plus matching u/psi component columns. */
export interface SnapshotTable {
  x: number[];
  u: number[][]; // [component][row]
  psi: number[][];
}

export const CSV_HEADERS: Record<string, string[]> = {
  "series.csv": ["t", "E", "h1", "hn"],
  "shift_h1.csv": ["t", "h", "hdot", "regime"],
  "shift_hn.csv": ["t", "h", "hdot", "regime"],
};

export class SchemaError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "SchemaError";
  }
}

export function checkHeader(
  file: string,
  actual: string[],
  expected: string[],
): void {
  for (let i = 0; i < expected.length; i++) {
    if (actual[i] !== expected[i]) {
      throw new SchemaError(
        `${file}: expected column '${expected[i]}' at position ${i}, got '${actual[i] ?? "<missing>"}'`,
      );
    }
  }
  if (actual.length > expected.length) {
    throw new SchemaError(
      `${file}: unexpected extra column '${actual[expected.length]}'`,
    );
  }
}

/** Snapshot headers are x,u0..u{n-1},psi0..psi{n-1} for some n >= 1. */
export function checkSnapshotHeader(file: string, actual: string[]): number {
  if (actual[0] !== "x") {
    throw new SchemaError(`${file}: expected column 'x' at position 0, got '${actual[0]}'`);
  }
  const rest = actual.slice(1);
  if (rest.length === 0 || rest.length % 2 !== 0) {
    throw new SchemaError(`${file}: expected paired u/psi columns, got ${rest.length}`);
  }
  const n = rest.length / 2;
  for (let i = 0; i < n; i++) {
    if (rest[i] !== `u${i}`) {
      throw new SchemaError(`${file}: expected column 'u${i}', got '${rest[i]}'`);
    }
    if (rest[n + i] !== `psi${i}`) {
      throw new SchemaError(`${file}: expected column 'psi${i}', got '${rest[n + i]}'`);
    }
  }
  return n;
}

import * as fs from "node:fs";
import * as path from "node:path";
import Papa from "papaparse";

import {
  CSV_HEADERS,
  Manifest,
  SchemaError,
  SeriesRow,
  ShiftRow,
  SnapshotTable,
  checkHeader,
  checkSnapshotHeader,
  manifestSchema,
  seriesRowSchema,
  shiftRowSchema,
} from "./schema.js";

export interface ArtifactBundle {
  dir: string;
  manifest: Manifest;
  series: SeriesRow[] | null;
  shiftH1: ShiftRow[] | null;
  shiftHn: ShiftRow[] | null;
  snapshotInitial: SnapshotTable | null;
  snapshotFinal: SnapshotTable | null;
}

export function parseManifest(text: string): Manifest {
  const rec: Record<string, string> = {};
  for (const line of text.split("\n")) {
    const idx = line.indexOf("=");
    if (idx > 0) {
      rec[line.slice(0, idx).trim()] = line.slice(idx + 1).trim();
    }
  }
  const parsed = manifestSchema.safeParse(rec);
  if (!parsed.success) {
    throw new SchemaError(parsed.error.issues.map((i) => i.message).join("; "));
  }
  return parsed.data;
}

function parseCsv(file: string, text: string): { header: string[]; rows: string[][] } {
  const result = Papa.parse<string[]>(text.trim(), { skipEmptyLines: true });
  if (result.errors.length > 0) {
    throw new SchemaError(`${file}: ${result.errors[0].message}`);
  }
  const [header, ...rows] = result.data;
  if (!header) {
    throw new SchemaError(`${file}: empty file`);
  }
  return { header, rows };
}

function num(file: string, column: string, value: string): number {
  const v = Number(value);
  if (!Number.isFinite(v)) {
    throw new SchemaError(`${file}: non-numeric value '${value}' in column '${column}'`);
  }
  return v;
}

export function parseSeries(file: string, text: string): SeriesRow[] {
  const { header, rows } = parseCsv(file, text);
  checkHeader(file, header, CSV_HEADERS["series.csv"]);
  return rows.map((r) => {
    const row = {
      t: num(file, "t", r[0]),
      E: num(file, "E", r[1]),
      h1: r[2] === "" || r[2] === undefined ? null : num(file, "h1", r[2]),
      hn: r[3] === "" || r[3] === undefined ? null : num(file, "hn", r[3]),
    };
    const parsed = seriesRowSchema.safeParse(row);
    if (!parsed.success) {
      throw new SchemaError(`${file}: ${parsed.error.issues[0].message}`);
    }
    return parsed.data;
  });
}

export function parseShifts(file: string, text: string): ShiftRow[] {
  const { header, rows } = parseCsv(file, text);
  checkHeader(file, header, CSV_HEADERS["shift_h1.csv"]);
  return rows.map((r) => {
    const row = {
      t: num(file, "t", r[0]),
      h: num(file, "h", r[1]),
      hdot: num(file, "hdot", r[2]),
      regime: r[3],
    };
    const parsed = shiftRowSchema.safeParse(row);
    if (!parsed.success) {
      const issue = parsed.error.issues[0];
      throw new SchemaError(
        `${file}: column '${String(issue.path[0])}': ${issue.message}`,
      );
    }
    return parsed.data;
  });
}

export function parseSnapshot(file: string, text: string): SnapshotTable {
  const { header, rows } = parseCsv(file, text);
  const n = checkSnapshotHeader(file, header);
  const table: SnapshotTable = {
    x: [],
    u: Array.from({ length: n }, () => []),
    psi: Array.from({ length: n }, () => []),
  };
  for (const r of rows) {
    table.x.push(num(file, "x", r[0]));
    for (let i = 0; i < n; i++) {
      table.u[i].push(num(file, `u${i}`, r[1 + i]));
      table.psi[i].push(num(file, `psi${i}`, r[1 + n + i]));
    }
  }
  return table;
}

function readIfExists(dir: string, name: string): string | null {
  const p = path.join(dir, name);
  return fs.existsSync(p) ? fs.readFileSync(p, "utf8") : null;
}

export function loadArtifact(dir: string): ArtifactBundle {
  const manifestText = readIfExists(dir, "manifest.txt");
  if (manifestText === null) {
    throw new SchemaError(`${dir}: missing manifest.txt`);
  }
  const manifest = parseManifest(manifestText);
  const outside = manifest["status"] === "outside_verified_theory";

  const seriesText = readIfExists(dir, "series.csv");
  if (seriesText === null && !outside) {
    throw new SchemaError(`${dir}: missing series.csv`);
  }
  const snapInit = readIfExists(dir, "snapshot_initial.csv");
  const snapFinal = readIfExists(dir, "snapshot_final.csv");
  if (!outside && (snapInit === null || snapFinal === null)) {
    throw new SchemaError(`${dir}: missing snapshot CSVs`);
  }
  const h1Text = readIfExists(dir, "shift_h1.csv");
  const hnText = readIfExists(dir, "shift_hn.csv");

  return {
    dir,
    manifest,
    series: seriesText === null ? null : parseSeries("series.csv", seriesText),
    shiftH1: h1Text === null ? null : parseShifts("shift_h1.csv", h1Text),
    shiftHn: hnText === null ? null : parseShifts("shift_hn.csv", hnText),
    snapshotInitial:
      snapInit === null ? null : parseSnapshot("snapshot_initial.csv", snapInit),
    snapshotFinal:
      snapFinal === null ? null : parseSnapshot("snapshot_final.csv", snapFinal),
  };
}

/** Validate every run directory of a sweep (those holding a manifest). */
export function validateSweep(root: string): string[] {
  const validated: string[] = [];
  for (const entry of fs.readdirSync(root, { withFileTypes: true }).sort((a, b) =>
    a.name.localeCompare(b.name),
  )) {
    if (!entry.isDirectory()) continue;
    const dir = path.join(root, entry.name);
    if (!fs.existsSync(path.join(dir, "manifest.txt"))) continue;
    loadArtifact(dir);
    validated.push(dir);
  }
  if (validated.length === 0) {
    throw new SchemaError(`${root}: no artifact directories found`);
  }
  return validated;
}

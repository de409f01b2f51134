import * as fs from "node:fs";
import * as path from "node:path";
import Papa from "papaparse";

import { ArtifactBundle, loadArtifact } from "./artifact.js";
import { SchemaError, ShiftRow } from "./schema.js";
import { Series, linePlot, placeholderPanel } from "./svg.js";

const PALETTE = ["#1f6fb2", "#d1495b", "#3a7d44", "#8e5ba6", "#c77d2e", "#2a9d8f"];

function manifestNumber(bundle: ArtifactBundle, key: string): number | null {
  const raw = bundle.manifest[key];
  if (raw === undefined) return null;
  const v = Number(raw);
  return Number.isFinite(v) ? v : null;
}

function snapshotOverlay(bundle: ArtifactBundle): string {
  const snap = bundle.snapshotFinal;
  if (snap === null) {
    return placeholderPanel("state vs pattern", "no snapshot table in this artifact");
  }
  const series: Series[] = [];
  for (let i = 0; i < snap.u.length; i++) {
    series.push({ label: `u${i}`, x: snap.x, y: snap.u[i], color: PALETTE[i % PALETTE.length] });
    series.push({
      label: `pattern ${i}`,
      x: snap.x,
      y: snap.psi[i],
      color: PALETTE[i % PALETTE.length],
      dash: "6 3",
    });
  }
  return linePlot({
    title: `state vs shifted pattern (${bundle.manifest["scenario"]})`,
    xlabel: "x",
    ylabel: "conserved components",
    series,
  });
}

function shiftPlot(bundle: ArtifactBundle): string {
  const { shiftH1, shiftHn } = bundle;
  if (shiftH1 === null && shiftHn === null) {
    return placeholderPanel(
      "shift trajectories",
      "no shift tables: pattern has no extremal shocks",
    );
  }
  const series: Series[] = [];
  const addPath = (rows: ShiftRow[], label: string, color: string) => {
    series.push({ label, x: rows.map((r) => r.t), y: rows.map((r) => r.h), color });
  };
  const addLine = (ts: number[], speed: number, label: string, color: string) => {
    series.push({ label, x: ts, y: ts.map((t) => speed * t), color, dash: "5 4" });
  };
  const ts = (shiftH1 ?? shiftHn)!.map((r) => r.t);
  if (shiftH1) addPath(shiftH1, "h1(t)", PALETTE[0]);
  if (shiftHn) addPath(shiftHn, "hn(t)", PALETTE[1]);
  const sigma1 = manifestNumber(bundle, "sigma_1");
  if (sigma1 !== null) addLine(ts, sigma1, "slow shock line", PALETTE[2]);
  const sigman = manifestNumber(bundle, "sigma_n");
  if (sigman !== null) addLine(ts, sigman, "fast shock line", PALETTE[3]);
  const fanLow = manifestNumber(bundle, "fan_cut_low");
  if (fanLow !== null) addLine(ts, fanLow, "fan edge (lower)", PALETTE[4]);
  const fanHigh = manifestNumber(bundle, "fan_cut_high");
  if (fanHigh !== null) addLine(ts, fanHigh, "fan edge (upper)", PALETTE[5]);
  return linePlot({
    title: "shift trajectories vs exact wave lines",
    xlabel: "t",
    ylabel: "position",
    series,
  });
}

function energyPlot(bundle: ArtifactBundle): string {
  if (bundle.series === null) {
    return placeholderPanel("weighted distance", "no series table in this artifact");
  }
  return linePlot({
    title: "weighted distance over time",
    xlabel: "t",
    ylabel: "E(t)",
    series: [
      {
        label: "E(t)",
        x: bundle.series.map((r) => r.t),
        y: bundle.series.map((r) => r.E),
        color: PALETTE[0],
      },
    ],
  });
}

export function render(bundle: ArtifactBundle, outDir: string): string[] {
  fs.mkdirSync(outDir, { recursive: true });
  const files: Record<string, string> = {
    "snapshot.svg": snapshotOverlay(bundle),
    "shifts.svg": shiftPlot(bundle),
    "energy.svg": energyPlot(bundle),
  };
  const written: string[] = [];
  for (const [name, svg] of Object.entries(files)) {
    const p = path.join(outDir, name);
    fs.writeFileSync(p, svg);
    written.push(p);
  }
  return written;
}

export function renderDirectory(dir: string, outDir: string): string[] {
  return render(loadArtifact(dir), outDir);
}

interface SweepRow {
  eps: number;
  N: number;
  mu1: number | null;
  status: string;
}

export function parseSweepSummary(file: string, text: string): SweepRow[] {
  const parsed = Papa.parse<string[]>(text.trim(), { skipEmptyLines: true });
  const [header, ...rows] = parsed.data;
  const expected = ["eps", "N", "mu1", "mu2", "sup_E", "ordering_min_gap", "status"];
  for (let i = 0; i < expected.length; i++) {
    if (header[i] !== expected[i]) {
      throw new SchemaError(
        `${file}: expected column '${expected[i]}' at position ${i}, got '${header[i] ?? "<missing>"}'`,
      );
    }
  }
  return rows.map((r) => ({
    eps: Number(r[0]),
    N: Number(r[1]),
    mu1: r[2] === "" ? null : Number(r[2]),
    status: r[6],
  }));
}

/** One figure: amplification ratio against perturbation size, per grid. */
export function renderSweepSummary(summaryPath: string, outDir: string): string {
  const rows = parseSweepSummary(
    path.basename(summaryPath),
    fs.readFileSync(summaryPath, "utf8"),
  );
  const byN = new Map<number, SweepRow[]>();
  for (const row of rows) {
    if (row.mu1 === null || !Number.isFinite(row.mu1)) continue;
    if (!byN.has(row.N)) byN.set(row.N, []);
    byN.get(row.N)!.push(row);
  }
  const series: Series[] = [...byN.entries()]
    .sort((a, b) => a[0] - b[0])
    .map(([N, pts], i) => ({
      label: `N=${N}`,
      x: pts.map((p) => p.eps),
      y: pts.map((p) => p.mu1!),
      color: PALETTE[i % PALETTE.length],
    }));
  const svg =
    series.length === 0
      ? placeholderPanel("sweep summary", "no finite amplification ratios in summary")
      : linePlot({
          title: "amplification ratio vs perturbation size",
          xlabel: "eps",
          ylabel: "mu1",
          series,
        });
  fs.mkdirSync(outDir, { recursive: true });
  const p = path.join(outDir, "sweep_mu1.svg");
  fs.writeFileSync(p, svg);
  return p;
}

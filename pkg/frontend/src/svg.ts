/** Minimal deterministic SVG line plots; no external renderer. */

export interface Series {
  label: string;
  x: number[];
  y: number[];
  color: string;
  dash?: string;
}

export interface PlotSpec {
  title: string;
  xlabel: string;
  ylabel: string;
  series: Series[];
  width?: number;
  height?: number;
}

const MARGIN = { left: 64, right: 16, top: 36, bottom: 44 };

function fmt(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e4 || a < 1e-3) return v.toExponential(2);
  return String(Number(v.toPrecision(4)));
}

function extent(values: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (!Number.isFinite(lo)) return [0, 1];
  if (lo === hi) return [lo - 1, hi + 1];
  return [lo, hi];
}

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export function linePlot(spec: PlotSpec): string {
  const width = spec.width ?? 640;
  const height = spec.height ?? 420;
  const innerW = width - MARGIN.left - MARGIN.right;
  const innerH = height - MARGIN.top - MARGIN.bottom;

  const [x0, x1] = extent(spec.series.flatMap((s) => s.x));
  const [y0, y1] = extent(spec.series.flatMap((s) => s.y));
  const sx = (x: number) => MARGIN.left + ((x - x0) / (x1 - x0)) * innerW;
  const sy = (y: number) => MARGIN.top + (1 - (y - y0) / (y1 - y0)) * innerH;

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}" font-family="monospace" font-size="11">`,
  );
  parts.push(`<rect width="${width}" height="${height}" fill="white"/>`);
  parts.push(
    `<text x="${width / 2}" y="20" text-anchor="middle" font-size="13">${esc(spec.title)}</text>`,
  );

  // frame and ticks
  parts.push(
    `<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${innerW}" height="${innerH}" fill="none" stroke="#444"/>`,
  );
  const NTICK = 5;
  for (let i = 0; i <= NTICK; i++) {
    const xv = x0 + ((x1 - x0) * i) / NTICK;
    const yv = y0 + ((y1 - y0) * i) / NTICK;
    const px = sx(xv);
    const py = sy(yv);
    parts.push(`<line x1="${px}" y1="${MARGIN.top + innerH}" x2="${px}" y2="${MARGIN.top + innerH + 4}" stroke="#444"/>`);
    parts.push(`<text x="${px}" y="${MARGIN.top + innerH + 16}" text-anchor="middle">${fmt(xv)}</text>`);
    parts.push(`<line x1="${MARGIN.left - 4}" y1="${py}" x2="${MARGIN.left}" y2="${py}" stroke="#444"/>`);
    parts.push(`<text x="${MARGIN.left - 6}" y="${py + 3}" text-anchor="end">${fmt(yv)}</text>`);
  }
  parts.push(
    `<text x="${MARGIN.left + innerW / 2}" y="${height - 8}" text-anchor="middle">${esc(spec.xlabel)}</text>`,
  );
  parts.push(
    `<text x="14" y="${MARGIN.top + innerH / 2}" text-anchor="middle" transform="rotate(-90 14 ${MARGIN.top + innerH / 2})">${esc(spec.ylabel)}</text>`,
  );

  // polylines, clipped to the frame
  parts.push(`<clipPath id="frame"><rect x="${MARGIN.left}" y="${MARGIN.top}" width="${innerW}" height="${innerH}"/></clipPath>`);
  parts.push(`<g clip-path="url(#frame)">`);
  for (const s of spec.series) {
    const pts = s.x
      .map((x, i) => `${sx(x).toFixed(2)},${sy(s.y[i]).toFixed(2)}`)
      .join(" ");
    const dash = s.dash ? ` stroke-dasharray="${s.dash}"` : "";
    parts.push(
      `<polyline points="${pts}" fill="none" stroke="${s.color}" stroke-width="1.5"${dash} data-label="${esc(s.label)}"/>`,
    );
  }
  parts.push(`</g>`);

  // legend
  let ly = MARGIN.top + 10;
  for (const s of spec.series) {
    const lx = MARGIN.left + innerW - 150;
    const dash = s.dash ? ` stroke-dasharray="${s.dash}"` : "";
    parts.push(`<line x1="${lx}" y1="${ly}" x2="${lx + 22}" y2="${ly}" stroke="${s.color}" stroke-width="1.5"${dash}/>`);
    parts.push(`<text x="${lx + 28}" y="${ly + 3}">${esc(s.label)}</text>`);
    ly += 14;
  }

  parts.push("</svg>");
  return parts.join("\n");
}

/** Panel shown in place of a plot whose source table is absent. */
export function placeholderPanel(title: string, reason: string): string {
  const width = 640;
  const height = 420;
  return [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}" font-family="monospace" font-size="12">`,
    `<rect width="${width}" height="${height}" fill="#f4f4f4" stroke="#999"/>`,
    `<text x="${width / 2}" y="20" text-anchor="middle" font-size="13">${esc(title)}</text>`,
    `<text x="${width / 2}" y="${height / 2}" text-anchor="middle" fill="#666" data-placeholder="true">${esc(reason)}</text>`,
    "</svg>",
  ].join("\n");
}

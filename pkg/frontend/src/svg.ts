/** Minimal deterministic SVG line plots (no dependencies, no timestamps). */

export interface Series {
  label: string;
  x: number[];
  y: number[];
  dashed?: boolean;
}

export interface PlotSpec {
  title: string;
  xLabel: string;
  yLabel: string;
  series: Series[];
  logX?: boolean;
  logY?: boolean;
  width?: number;
  height?: number;
}

const PALETTE = ["#1f6fb2", "#d1603d", "#3d9970", "#8e57a5", "#b0a030", "#666666"];
const MARGIN = { left: 70, right: 20, top: 36, bottom: 46 };

function fmt(x: number): string {
  if (x === 0) return "0";
  const a = Math.abs(x);
  if (a >= 0.01 && a < 10000) return String(Number(x.toPrecision(4)));
  return x.toExponential(1);
}

function transform(v: number, log: boolean): number {
  return log ? Math.log10(v) : v;
}

function ticks(lo: number, hi: number, log: boolean): number[] {
  if (log) {
    const out: number[] = [];
    for (let p = Math.ceil(lo - 1e-9); p <= Math.floor(hi + 1e-9); p++) {
      out.push(p);
    }
    if (out.length >= 2) return out;
    return [lo, (lo + hi) / 2, hi];
  }
  const span = hi - lo || 1;
  const step = Math.pow(10, Math.floor(Math.log10(span / 4)));
  const mult = span / step > 8 ? 2 : 1;
  const out: number[] = [];
  for (let v = Math.ceil(lo / (step * mult)) * step * mult; v <= hi + 1e-12 * span;
       v += step * mult) {
    out.push(v);
  }
  return out.length >= 2 ? out : [lo, hi];
}

/** Render the plot as standalone SVG text. */
export function renderPlot(spec: PlotSpec): string {
  const W = spec.width ?? 640;
  const H = spec.height ?? 420;
  const innerW = W - MARGIN.left - MARGIN.right;
  const innerH = H - MARGIN.top - MARGIN.bottom;

  const pts = spec.series.flatMap((s) =>
    s.x.map((xv, i) => [xv, s.y[i]] as [number, number]))
    .filter(([xv, yv]) =>
      Number.isFinite(xv) && Number.isFinite(yv) &&
      (!spec.logX || xv > 0) && (!spec.logY || yv > 0));
  if (pts.length === 0) {
    return `<svg xmlns="http://www.w3.org/2000/svg" width="${W}" height="${H}">` +
      `<text x="20" y="40">${escapeXml(spec.title)}: no data</text></svg>`;
  }
  let xLo = Math.min(...pts.map((p) => transform(p[0], !!spec.logX)));
  let xHi = Math.max(...pts.map((p) => transform(p[0], !!spec.logX)));
  let yLo = Math.min(...pts.map((p) => transform(p[1], !!spec.logY)));
  let yHi = Math.max(...pts.map((p) => transform(p[1], !!spec.logY)));
  if (xHi === xLo) { xHi += 0.5; xLo -= 0.5; }
  if (yHi === yLo) { yHi += 0.5; yLo -= 0.5; }
  const padY = 0.06 * (yHi - yLo);
  yLo -= padY; yHi += padY;
  const padX = 0.04 * (xHi - xLo);
  xLo -= padX; xHi += padX;

  const sx = (v: number) => MARGIN.left + ((transform(v, !!spec.logX) - xLo) / (xHi - xLo)) * innerW;
  const sy = (v: number) => MARGIN.top + innerH - ((transform(v, !!spec.logY) - yLo) / (yHi - yLo)) * innerH;

  const parts: string[] = [];
  parts.push(`<svg xmlns="http://www.w3.org/2000/svg" width="${W}" height="${H}" ` +
    `font-family="Helvetica, Arial, sans-serif" font-size="12">`);
  parts.push(`<rect width="${W}" height="${H}" fill="white"/>`);
  parts.push(`<text x="${W / 2}" y="20" text-anchor="middle" font-size="14">` +
    `${escapeXml(spec.title)}</text>`);

  for (const tv of ticks(xLo + padX, xHi - padX, !!spec.logX)) {
    const vx = MARGIN.left + ((tv - xLo) / (xHi - xLo)) * innerW;
    parts.push(`<line x1="${vx.toFixed(2)}" y1="${MARGIN.top}" x2="${vx.toFixed(2)}" ` +
      `y2="${MARGIN.top + innerH}" stroke="#dddddd"/>`);
    const label = spec.logX ? `1e${fmt(tv)}` : fmt(tv);
    parts.push(`<text x="${vx.toFixed(2)}" y="${MARGIN.top + innerH + 16}" ` +
      `text-anchor="middle">${label}</text>`);
  }
  for (const tv of ticks(yLo + padY, yHi - padY, !!spec.logY)) {
    const vy = MARGIN.top + innerH - ((tv - yLo) / (yHi - yLo)) * innerH;
    parts.push(`<line x1="${MARGIN.left}" y1="${vy.toFixed(2)}" ` +
      `x2="${MARGIN.left + innerW}" y2="${vy.toFixed(2)}" stroke="#dddddd"/>`);
    const label = spec.logY ? `1e${fmt(tv)}` : fmt(tv);
    parts.push(`<text x="${MARGIN.left - 6}" y="${(vy + 4).toFixed(2)}" ` +
      `text-anchor="end">${label}</text>`);
  }
  parts.push(`<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${innerW}" ` +
    `height="${innerH}" fill="none" stroke="#333333"/>`);

  spec.series.forEach((s, idx) => {
    const color = PALETTE[idx % PALETTE.length];
    const coords = s.x
      .map((xv, i) => [xv, s.y[i]] as [number, number])
      .filter(([xv, yv]) =>
        Number.isFinite(xv) && Number.isFinite(yv) &&
        (!spec.logX || xv > 0) && (!spec.logY || yv > 0))
      .map(([xv, yv]) => `${sx(xv).toFixed(2)},${sy(yv).toFixed(2)}`);
    if (coords.length === 0) return;
    const dash = s.dashed ? ` stroke-dasharray="6,4"` : "";
    parts.push(`<polyline points="${coords.join(" ")}" fill="none" ` +
      `stroke="${color}" stroke-width="1.6"${dash}/>`);
    const ly = MARGIN.top + 14 + 15 * idx;
    parts.push(`<line x1="${W - MARGIN.right - 150}" y1="${ly - 4}" ` +
      `x2="${W - MARGIN.right - 126}" y2="${ly - 4}" stroke="${color}" ` +
      `stroke-width="1.6"${dash}/>`);
    parts.push(`<text x="${W - MARGIN.right - 120}" y="${ly}">${escapeXml(s.label)}</text>`);
  });

  parts.push(`<text x="${MARGIN.left + innerW / 2}" y="${H - 10}" text-anchor="middle">` +
    `${escapeXml(spec.xLabel)}</text>`);
  parts.push(`<text x="16" y="${MARGIN.top + innerH / 2}" text-anchor="middle" ` +
    `transform="rotate(-90 16 ${MARGIN.top + innerH / 2})">${escapeXml(spec.yLabel)}</text>`);
  parts.push("</svg>");
  return parts.join("\n") + "\n";
}

function escapeXml(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

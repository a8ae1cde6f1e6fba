#!/usr/bin/env node
/**
 * Renders a sweep manifest into convergence plots and a markdown summary.
 *
 * Usage:
 *   vmfplab-report --manifest out/sweep/manifest.json --out report/
 *
 * Outputs (deterministic; rerunning produces byte-identical files):
 *   modulated_energy.svg   modulated energy vs time, one curve per epsilon
 *   convergence.svg        sup modulated energy vs epsilon (log-log) with a
 *                          slope-1/2 reference line
 *   free_energy.svg        free-energy traces per epsilon
 *   mass.svg               mass traces per epsilon (drift scale)
 *   summary.md             the per-epsilon table; numbers match the manifest
 *                          exactly (shortest round-trip decimal form)
 */

import * as fs from "fs";
import * as path from "path";

import { ManifestError, loadManifest, loadRecords, recordsPathFor, summarize } from "./manifest";
import { renderPlot, Series } from "./svg";
import { RecordRow, SweepManifest } from "./types";

export interface ReportResult {
  files: string[];
  complete: boolean;
}

/** Exact decimal form of a double (shortest round-trip representation). */
export function exact(x: number): string {
  return String(x);
}

function markdownSummary(manifest: SweepManifest): string {
  const s = summarize(manifest);
  const lines: string[] = [];
  lines.push("# Sweep convergence summary");
  lines.push("");
  if (!manifest.complete) {
    lines.push("**WARNING: the manifest is marked incomplete; plots are partial.**");
    lines.push("");
  }
  lines.push("| eps | sup modulated energy | sup kinetic relative entropy | integrated dissipation / (eps tau) | CK max violation |");
  lines.push("| --- | --- | --- | --- | --- |");
  for (const row of s.rows) {
    lines.push(`| ${exact(row.eps)} | ${exact(row.sup_modulated_energy)} | ` +
      `${exact(row.sup_kinetic_relative_entropy)} | ${exact(row.integrated_dissipation)} | ` +
      `${exact(row.ck_max_violation)} |`);
  }
  lines.push("");
  const slope = s.fitSlope === null ? "n/a" : exact(s.fitSlope);
  lines.push(`Fitted slope of log(sup modulated energy) against log(eps): **${slope}**`);
  lines.push("");
  lines.push("The reference line in `convergence.svg` has slope 1/2, the envelope " +
    "the convergence bound scales by.");
  lines.push("");
  return lines.join("\n");
}

export function generateReport(manifestPath: string, outDir: string): ReportResult {
  const manifest = loadManifest(manifestPath);
  fs.mkdirSync(outDir, { recursive: true });
  const files: string[] = [];

  const perRun: { eps: number; rows: RecordRow[] }[] = [];
  for (const entry of manifest.per_eps) {
    perRun.push({ eps: entry.eps, rows: loadRecords(recordsPathFor(manifestPath, entry)) });
  }

  const meSeries: Series[] = perRun.map(({ eps, rows }) => ({
    label: `eps = ${exact(eps)}`,
    x: rows.map((r) => r.t),
    y: rows.map((r) => r.modulated_energy),
  }));
  files.push(writeFile(outDir, "modulated_energy.svg", renderPlot({
    title: "Modulated energy along the runs",
    xLabel: "t", yLabel: "modulated energy", series: meSeries,
  })));

  const eps = manifest.per_eps.map((e) => e.eps);
  const sup = manifest.per_eps.map((e) => e.sup_modulated_energy);
  const convSeries: Series[] = [
    { label: "sup modulated energy", x: eps, y: sup },
  ];
  if (eps.length >= 2) {
    // slope-1/2 guide anchored at the largest epsilon
    const anchorI = eps.indexOf(Math.max(...eps));
    const guide = eps.map((e) => sup[anchorI] * Math.sqrt(e / eps[anchorI]));
    convSeries.push({ label: "slope 1/2 reference", x: eps, y: guide, dashed: true });
  }
  files.push(writeFile(outDir, "convergence.svg", renderPlot({
    title: "Convergence of the modulated energy",
    xLabel: "eps", yLabel: "sup modulated energy",
    series: convSeries, logX: true, logY: true,
  })));

  files.push(writeFile(outDir, "free_energy.svg", renderPlot({
    title: "Free energy along the runs",
    xLabel: "t", yLabel: "free energy",
    series: perRun.map(({ eps: e, rows }) => ({
      label: `eps = ${exact(e)}`,
      x: rows.map((r) => r.t),
      y: rows.map((r) => r.free_energy),
    })),
  })));

  files.push(writeFile(outDir, "mass.svg", renderPlot({
    title: "Mass drift along the runs",
    xLabel: "t", yLabel: "mass(t) - mass(0)",
    series: perRun.map(({ eps: e, rows }) => ({
      label: `eps = ${exact(e)}`,
      x: rows.map((r) => r.t),
      y: rows.map((r) => r.mass - rows[0].mass),
    })),
  })));

  files.push(writeFile(outDir, "summary.md", markdownSummary(manifest)));
  return { files, complete: manifest.complete };
}

function writeFile(outDir: string, name: string, content: string): string {
  const full = path.join(outDir, name);
  fs.writeFileSync(full, content);
  return full;
}

function parseCliArgs(argv: string[]): { manifest: string; out: string } {
  let manifest = "";
  let out = "report";
  for (let i = 0; i < argv.length; i++) {
    if (argv[i] === "--manifest" && i + 1 < argv.length) manifest = argv[++i];
    else if (argv[i] === "--out" && i + 1 < argv.length) out = argv[++i];
    else if (argv[i] === "--help") {
      console.log("usage: vmfplab-report --manifest <path> [--out <dir>]");
      process.exit(0);
    } else {
      console.error(`unknown argument: ${argv[i]}`);
      process.exit(2);
    }
  }
  if (!manifest) {
    console.error("missing required --manifest argument");
    process.exit(2);
  }
  return { manifest, out };
}

function main(): void {
  const { manifest, out } = parseCliArgs(process.argv.slice(2));
  try {
    const result = generateReport(manifest, out);
    for (const f of result.files) console.log(`wrote ${f}`);
    if (!result.complete) {
      console.error("manifest is incomplete; report flagged as partial");
      process.exit(1);
    }
  } catch (err) {
    if (err instanceof ManifestError) {
      console.error(String(err.message));
      process.exit(1);
    }
    throw err;
  }
}

if (require.main === module) {
  main();
}

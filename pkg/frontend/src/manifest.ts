import * as fs from "fs";
import * as path from "path";

import { PerEpsilonSummary, RECORD_COLUMNS, RecordRow, SweepManifest, SweepSummary } from "./types";

export class ManifestError extends Error {}

function assertFinite(name: string, value: unknown): number {
  if (typeof value !== "number" || !Number.isFinite(value)) {
    throw new ManifestError(`manifest field ${name} is not a finite number: ${value}`);
  }
  return value;
}

/** Load and validate a sweep manifest; throws on structural problems. */
export function loadManifest(manifestPath: string): SweepManifest {
  let raw: string;
  try {
    raw = fs.readFileSync(manifestPath, "utf8");
  } catch (err) {
    throw new ManifestError(`cannot read manifest ${manifestPath}: ${err}`);
  }
  let data: SweepManifest;
  try {
    data = JSON.parse(raw);
  } catch (err) {
    throw new ManifestError(`manifest ${manifestPath} is not valid JSON: ${err}`);
  }
  if (!Array.isArray(data.epsilons) || !Array.isArray(data.per_eps)) {
    throw new ManifestError("manifest lacks the epsilons / per_eps arrays");
  }
  for (const entry of data.per_eps) {
    assertFinite("eps", entry.eps);
    assertFinite("sup_modulated_energy", entry.sup_modulated_energy);
    assertFinite("sup_kinetic_relative_entropy", entry.sup_kinetic_relative_entropy);
    assertFinite("integrated_dissipation", entry.integrated_dissipation);
  }
  const manifestEps = data.per_eps.map((e) => e.eps);
  for (const eps of data.epsilons) {
    if (data.complete && !manifestEps.includes(eps)) {
      throw new ManifestError(`manifest claims completeness but eps=${eps} has no summary`);
    }
  }
  return data;
}

/** Parse one records.csv produced by the harness. */
export function loadRecords(csvPath: string): RecordRow[] {
  const text = fs.readFileSync(csvPath, "utf8");
  const lines = text.trim().split("\n");
  if (lines.length < 1) {
    throw new ManifestError(`${csvPath}: empty records file`);
  }
  const header = lines[0].split(",");
  if (header.length !== RECORD_COLUMNS.length ||
      !RECORD_COLUMNS.every((c, i) => header[i] === c)) {
    throw new ManifestError(`${csvPath}: unexpected header ${lines[0]}`);
  }
  const rows: RecordRow[] = [];
  for (let i = 1; i < lines.length; i++) {
    const parts = lines[i].split(",");
    if (parts.length !== RECORD_COLUMNS.length) {
      throw new ManifestError(
        `${csvPath}: line ${i + 1} has ${parts.length} fields, expected ${RECORD_COLUMNS.length}`);
    }
    const row = {} as RecordRow;
    for (let j = 0; j < RECORD_COLUMNS.length; j++) {
      const value = Number(parts[j]);
      if (!Number.isFinite(value)) {
        throw new ManifestError(`${csvPath}: line ${i + 1}, column ${RECORD_COLUMNS[j]} ` +
          `is not a number: ${parts[j]}`);
      }
      row[RECORD_COLUMNS[j]] = value;
    }
    rows.push(row);
  }
  return rows;
}

/** Resolve the per-run record files relative to the manifest location. */
export function recordsPathFor(manifestPath: string, entry: PerEpsilonSummary): string {
  return path.join(path.dirname(manifestPath), entry.records_csv);
}

export function summarize(manifest: SweepManifest): SweepSummary {
  const fitSlope =
    manifest.per_eps.length >= 2 && typeof manifest.fit_slope === "number" &&
    Number.isFinite(manifest.fit_slope)
      ? manifest.fit_slope
      : null;
  return { rows: manifest.per_eps, fitSlope };
}

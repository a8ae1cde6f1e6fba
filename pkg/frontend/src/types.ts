/** Shapes of the artifacts the simulation harness writes. */

export interface PerEpsilonSummary {
  eps: number;
  sup_modulated_energy: number;
  sup_kinetic_relative_entropy: number;
  integrated_dissipation: number;
  ck_max_violation: number;
  records_csv: string;
}

export interface SweepManifest {
  epsilons: number[];
  complete: boolean;
  per_eps: PerEpsilonSummary[];
  fit_slope?: number;
  limit_dir?: string;
}

/** One row of records.csv; the column order is fixed by the writer. */
export interface RecordRow {
  t: number;
  eps: number;
  mass: number;
  kinetic_energy: number;
  field_energy: number;
  free_energy: number;
  entropy_dissipation: number;
  modulated_energy: number;
  kinetic_relative_entropy: number;
  l1_distance: number;
  gauss_residual: number;
  flux_equivalence_residual: number;
}

export const RECORD_COLUMNS: (keyof RecordRow)[] = [
  "t", "eps", "mass", "kinetic_energy", "field_energy", "free_energy",
  "entropy_dissipation", "modulated_energy", "kinetic_relative_entropy",
  "l1_distance", "gauss_residual", "flux_equivalence_residual",
];

/** Per-epsilon summary table distilled from the manifest. */
export interface SweepSummary {
  rows: PerEpsilonSummary[];
  fitSlope: number | null;
}

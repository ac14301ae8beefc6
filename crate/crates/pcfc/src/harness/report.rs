//! Structured experiment reports and their text rendering.
//!
//! `PipelineReport` is fully deterministic for a fixed config and seeds;
//! wall-clock numbers live in the separate `TimingReport` so reruns can be
//! compared byte-for-byte.

use serde::Serialize;

use super::{BinSummary, ConvergenceRow, ReportB};

/// One accuracy row of an on-surface validation sweep.
#[derive(Debug, Clone, Serialize)]
pub struct AccuracyRow {
    pub data_space_size: usize,
    pub alpha: f64,
    pub epsilon: f64,
    pub k: usize,
    pub tests: usize,
    pub accuracy_pct: f64,
}

/// One row of a perturbed-point sweep.
#[derive(Debug, Clone, Serialize)]
pub struct PerturbedRow {
    pub alpha: f64,
    pub epsilon: f64,
    pub k: usize,
    #[serde(flatten)]
    pub outcome: ReportB,
}

#[derive(Debug, Clone, Serialize)]
pub struct SurfaceSummary {
    pub points: usize,
    pub rve_ids: Vec<String>,
    pub grid_m: u32,
    pub amplitude_psi: f64,
    pub train_points: usize,
    pub test_points: usize,
    pub sigma_range_psi: f64,
}

/// Deterministic pipeline results: surface summary, bin distribution and the
/// three validation sweeps.
#[derive(Debug, Clone, Serialize)]
pub struct PipelineReport {
    pub surface: SurfaceSummary,
    pub bins: BinSummary,
    pub bin_counts: Vec<u64>,
    /// On-surface accuracy of the held-back split against the stored cloud.
    pub validation_split: Vec<AccuracyRow>,
    /// On-surface accuracy of the held-out RVE's points.
    pub validation_heldout: Vec<AccuracyRow>,
    /// Perturbed-point false-positive/false-negative sweep on the held-out RVE.
    pub validation_perturbed: Vec<PerturbedRow>,
}

/// Wall-clock breakdown; separated from the deterministic report.
#[derive(Debug, Clone, Serialize)]
pub struct TimingReport {
    pub microgen_s: f64,
    pub surface_s: f64,
    pub db_build_s: f64,
    pub query_s: f64,
    pub total_s: f64,
    /// Share of the total spent generating the failure surface.
    pub surface_fraction_pct: f64,
    pub queries_executed: usize,
}

fn fmt_bracket(b: Option<(f64, f64)>) -> String {
    match b {
        Some((lo, hi)) => format!("[{lo:.1}, {hi:.1}]"),
        None => "[NA, NA]".to_string(),
    }
}

impl PipelineReport {
    /// Human-readable rendering of every table.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let s = &self.surface;
        out.push_str(&format!(
            "Failure surface: {} points from RVEs [{}], grid m={} (±{} psi)\n\
             Stored/test split: {}/{} points, sigma_range = {:.1} psi\n",
            s.points,
            s.rve_ids.join(", "),
            s.grid_m,
            s.amplitude_psi,
            s.train_points,
            s.test_points,
            s.sigma_range_psi,
        ));
        out.push_str(&format!(
            "Bin distribution (min, max, avg, zero): ({}, {}, {:.1}, {})\n\n",
            self.bins.min, self.bins.max, self.bins.avg, self.bins.zero_bins
        ));

        out.push_str("On-surface validation (held-back split)\n");
        out.push_str("  2n      (alpha, eps, k)   tests  accuracy%\n");
        for r in &self.validation_split {
            out.push_str(&format!(
                "  {:<7} ({:<5}, {}, {})   {:<6} {:.1}\n",
                r.data_space_size, r.alpha, r.epsilon, r.k, r.tests, r.accuracy_pct
            ));
        }

        out.push_str("\nOn-surface validation (held-out RVE)\n");
        out.push_str("  2n      (alpha, eps, k)   tests  accuracy%\n");
        for r in &self.validation_heldout {
            out.push_str(&format!(
                "  {:<7} ({:<5}, {}, {})   {:<6} {:.1}\n",
                r.data_space_size, r.alpha, r.epsilon, r.k, r.tests, r.accuracy_pct
            ));
        }

        out.push_str("\nPerturbed-point validation (held-out RVE)\n");
        out.push_str(
            "  (alpha, eps, k)   correct (%)      FP    FP err%         FN    FN err%\n",
        );
        for r in &self.validation_perturbed {
            let o = &r.outcome;
            out.push_str(&format!(
                "  ({:<5}, {}, {})   {} ({:.0}%)   {:<5} {:<15} {:<5} {}\n",
                r.alpha,
                r.epsilon,
                r.k,
                o.correct,
                o.correct_pct,
                o.false_positives,
                fmt_bracket(o.fp_error_pct),
                o.false_negatives,
                fmt_bracket(o.fn_error_pct),
            ));
        }
        out
    }
}

impl TimingReport {
    pub fn to_text(&self) -> String {
        format!(
            "Timing: total {:.2} s — microstructures {:.2} s, surface generation {:.2} s \
             ({:.1}% of total), db build {:.3} s, {} queries in {:.3} s\n",
            self.total_s,
            self.microgen_s,
            self.surface_s,
            self.surface_fraction_pct,
            self.db_build_s,
            self.queries_executed,
            self.query_s,
        )
    }
}

/// Text rendering of a convergence study.
pub fn convergence_to_text(rows: &[ConvergenceRow]) -> String {
    let mut out = String::from(
        "W (px)  models  best seed  divisions  nodes   elements  E22 (psi)    error%\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{:<7} {:<7} {:<10} {:<10} {:<7} {:<9} {:<12.4e} {:.2}\n",
            r.window_px, r.models, r.seed, r.divisions, r.nodes, r.elements, r.e22_psi, r.error_pct
        ));
    }
    out
}

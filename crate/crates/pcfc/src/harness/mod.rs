//! Experiment drivers: data splits, bin diagnostics, validation sweeps,
//! perturbation tests, the convergence study and the end-to-end pipeline.

pub mod config;
pub mod pipeline;
pub mod report;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{ClassifierError, Decision, PointCloudDb, QueryParams};
use crate::fea::{effective_modulus, FeaError};
use crate::mesh::pixelate;
use crate::microgen::{generate, MicrogenError, MicrostructureSpec};
use crate::rng::stream;
use crate::surface::SurfaceError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("empty test set")]
    EmptyTestSet,
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error(transparent)]
    Fea(#[from] FeaError),
    #[error(transparent)]
    Microgen(#[from] MicrogenError),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Random disjoint/exhaustive index split; the train side holds
/// `round(fraction·n)` indices. Reproducible for a fixed seed.
pub fn split_indices(n: usize, train_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    assert!(
        train_fraction > 0.0 && train_fraction < 1.0,
        "train fraction must lie in (0, 1)"
    );
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = stream(seed, "split");
    order.shuffle(&mut rng);
    let train_size = (train_fraction * n as f64).round() as usize;
    let (train, test) = order.split_at(train_size);
    let mut train = train.to_vec();
    let mut test = test.to_vec();
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// Split a point list by [`split_indices`].
pub fn split<T: Clone>(points: &[T], train_fraction: f64, seed: u64) -> (Vec<T>, Vec<T>) {
    let (train_idx, test_idx) = split_indices(points.len(), train_fraction, seed);
    let pick = |idx: &[usize]| idx.iter().map(|&i| points[i].clone()).collect();
    (pick(&train_idx), pick(&test_idx))
}

/// Counts of points per sign orthant (2^d bins; a zero component counts as
/// non-negative).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BinHistogram {
    pub dim: usize,
    pub counts: Vec<u64>,
}

/// The (min, max, avg, zero-bins) summary reported for a histogram.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BinSummary {
    pub min: u64,
    pub max: u64,
    pub avg: f64,
    pub zero_bins: usize,
}

impl BinHistogram {
    pub fn summary(&self) -> BinSummary {
        BinSummary {
            min: self.counts.iter().copied().min().unwrap_or(0),
            max: self.counts.iter().copied().max().unwrap_or(0),
            avg: self.counts.iter().sum::<u64>() as f64 / self.counts.len() as f64,
            zero_bins: self.counts.iter().filter(|c| **c == 0).count(),
        }
    }
}

/// Histogram of points over sign orthants: bit i of the bin index is set
/// when component i ≥ 0.
pub fn bin_distribution(points: &[Vec<f64>]) -> BinHistogram {
    let dim = points.first().map_or(0, Vec::len);
    let mut counts = vec![0u64; 1usize << dim];
    for p in points {
        debug_assert_eq!(p.len(), dim);
        let mut bin = 0usize;
        for (i, v) in p.iter().enumerate() {
            if *v >= 0.0 {
                bin |= 1 << i;
            }
        }
        counts[bin] += 1;
    }
    BinHistogram { dim, counts }
}

/// Accuracy (%) of classifying genuine failure-surface points as outside.
pub fn validate_onsurface(
    db: &PointCloudDb,
    test_points: &[Vec<f64>],
    params: &QueryParams,
) -> Result<f64, HarnessError> {
    if test_points.is_empty() {
        return Err(HarnessError::EmptyTestSet);
    }
    let mut outside = 0usize;
    for q in test_points {
        if db.classify(q, params)?.decision == Decision::Outside {
            outside += 1;
        }
    }
    Ok(100.0 * outside as f64 / test_points.len() as f64)
}

/// Perturbation protocol: which fraction stays intact and the scaling range
/// for the rest.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub intact_fraction: f64,
    pub scale_min: f64,
    pub scale_max: f64,
    pub rng_seed: u64,
}

impl PerturbationSpec {
    pub fn new(rng_seed: u64) -> Self {
        Self { intact_fraction: 1.0 / 3.0, scale_min: 0.5, scale_max: 1.2, rng_seed }
    }
}

/// A test point with its ground-truth label.
#[derive(Debug, Clone, Serialize)]
pub struct LabeledPoint {
    pub coords: Vec<f64>,
    pub label: Decision,
    /// Scale factor applied to a perturbed point; intact points carry none.
    pub factor: Option<f64>,
}

/// Leave `intact_fraction` of the points on the surface (ground truth:
/// outside) and scale the rest by f ~ U[scale_min, scale_max]; f < 1 moves a
/// point inside the envelope, f ≥ 1 keeps it on or outside.
pub fn perturb(points: &[Vec<f64>], spec: &PerturbationSpec) -> Vec<LabeledPoint> {
    let n = points.len();
    let mut rng = stream(spec.rng_seed, "perturbation");
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_intact = (spec.intact_fraction * n as f64).round() as usize;
    let mut intact = vec![false; n];
    for &i in order.iter().take(n_intact) {
        intact[i] = true;
    }
    points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            if intact[i] {
                LabeledPoint { coords: p.clone(), label: Decision::Outside, factor: None }
            } else {
                let f = rng.random_range(spec.scale_min..=spec.scale_max);
                let label = if f < 1.0 { Decision::Inside } else { Decision::Outside };
                LabeledPoint {
                    coords: p.iter().map(|v| f * v).collect(),
                    label,
                    factor: Some(f),
                }
            }
        })
        .collect()
}

/// Outcome counts of a labeled evaluation with the distance prediction
/// errors `(‖q‖ − L2avg)/σ_range · 100` of the misclassified points.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportB {
    pub tests: usize,
    pub correct: usize,
    pub correct_pct: f64,
    pub false_positives: usize,
    /// (min, max) error % over false positives; absent when there are none.
    pub fp_error_pct: Option<(f64, f64)>,
    pub false_negatives: usize,
    pub fn_error_pct: Option<(f64, f64)>,
}

/// Classify labeled points and tally correct / false positive / false
/// negative outcomes. A false positive is an inside point classified
/// outside; a false negative is an outside point classified inside.
pub fn evaluate(
    db: &PointCloudDb,
    labeled: &[LabeledPoint],
    params: &QueryParams,
) -> Result<ReportB, HarnessError> {
    if labeled.is_empty() {
        return Err(HarnessError::EmptyTestSet);
    }
    let sigma_range = db.sigma_range();
    let mut correct = 0usize;
    let mut fp = Vec::new();
    let mut fneg = Vec::new();
    for point in labeled {
        let verdict = db.classify(&point.coords, params)?;
        if verdict.decision == point.label {
            correct += 1;
        } else {
            let error = 100.0 * (verdict.l2_query - verdict.l2_avg_neighbors) / sigma_range;
            match verdict.decision {
                Decision::Outside => fp.push(error),
                Decision::Inside => fneg.push(error),
            }
        }
    }
    let bracket = |errs: &[f64]| -> Option<(f64, f64)> {
        if errs.is_empty() {
            None
        } else {
            let min = errs.iter().copied().fold(f64::INFINITY, f64::min);
            let max = errs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            Some((min, max))
        }
    };
    Ok(ReportB {
        tests: labeled.len(),
        correct,
        correct_pct: 100.0 * correct as f64 / labeled.len() as f64,
        false_positives: fp.len(),
        fp_error_pct: bracket(&fp),
        false_negatives: fneg.len(),
        fn_error_pct: bracket(&fneg),
    })
}

/// One row of the convergence study: the best model found for a window size.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub window_px: u32,
    pub models: usize,
    pub seed: u64,
    pub divisions: u32,
    pub nodes: usize,
    pub elements: usize,
    pub e22_psi: f64,
    pub nu23: f64,
    /// (E_ref − E_fea)/E_ref · 100.
    pub error_pct: f64,
}

/// Settings for [`convergence_study`].
#[derive(Debug, Clone, Copy)]
pub struct ConvergenceSettings {
    pub vf: f64,
    pub radius_px: f64,
    pub reference_e22: f64,
}

impl Default for ConvergenceSettings {
    fn default() -> Self {
        Self { vf: 0.60, radius_px: 15.6, reference_e22: 1.07e6 }
    }
}

/// Sweep window sizes × seeds × mesh divisions, measure the transverse
/// effective modulus of each model and keep the best (smallest |error|) row
/// per window size.
pub fn convergence_study(
    seeds: &[u64],
    window_sizes: &[u32],
    divisions_list: &[u32],
    settings: &ConvergenceSettings,
    materials: &crate::fea::MaterialSet,
) -> Result<Vec<ConvergenceRow>, HarnessError> {
    let mut rows = Vec::with_capacity(window_sizes.len());
    for &w in window_sizes {
        let mut best: Option<ConvergenceRow> = None;
        let mut models = 0usize;
        for &seed in seeds {
            let ms = generate(&MicrostructureSpec::new(w, settings.vf, settings.radius_px, seed))?;
            for &d in divisions_list {
                let mesh = pixelate(&ms, d);
                let (e22, nu23) = effective_modulus(&mesh, materials)?;
                models += 1;
                let error_pct = 100.0 * (settings.reference_e22 - e22) / settings.reference_e22;
                let row = ConvergenceRow {
                    window_px: w,
                    models: 0,
                    seed,
                    divisions: d,
                    nodes: mesh.n_nodes(),
                    elements: mesh.n_elements(),
                    e22_psi: e22,
                    nu23,
                    error_pct,
                };
                if best
                    .as_ref()
                    .is_none_or(|b| row.error_pct.abs() < b.error_pct.abs())
                {
                    best = Some(row);
                }
            }
        }
        let mut row = best.expect("at least one model per window size");
        row.models = models;
        rows.push(row);
    }
    Ok(rows)
}

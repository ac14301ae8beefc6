//! End-to-end pipeline: microstructures → meshes → FEA batch → failure
//! surface → kd-tree database → validation sweeps → reports.

use std::path::PathBuf;
use std::time::Instant;

use super::config::PipelineConfig;
use super::report::{AccuracyRow, PerturbedRow, PipelineReport, SurfaceSummary, TimingReport};
use super::{bin_distribution, perturb, split_indices, HarnessError, LabeledPoint, PerturbationSpec};
use crate::classifier::{PointCloudDb, QueryParams};
use crate::fea::MaterialSet;
use crate::microgen::{generate, MicrostructureSpec};
use crate::surface::{build_surface, FailureSurface, LoadGrid, RveSpec};

/// Safety-factor sweeps used by the validation reports.
pub const SPLIT_ALPHAS: [f64; 3] = [0.001, 0.01, 0.1];
pub const HELDOUT_ALPHAS: [f64; 4] = [0.001, 0.01, 0.05, 0.1];
pub const SWEEP_KS: [usize; 2] = [3, 4];

/// Everything a pipeline run leaves on disk, plus the in-memory reports.
#[derive(Debug)]
pub struct PipelineArtifacts {
    pub report: PipelineReport,
    pub timing: TimingReport,
    pub surface_csv: PathBuf,
    pub db_snapshot: PathBuf,
    pub report_json: PathBuf,
    pub report_text: PathBuf,
    pub timing_json: PathBuf,
}

/// On-surface accuracy over an (α, k) sweep.
pub fn onsurface_sweep(
    db: &PointCloudDb,
    test_points: &[Vec<f64>],
    data_space_size: usize,
    alphas: &[f64],
    ks: &[usize],
    epsilon: f64,
) -> Result<Vec<AccuracyRow>, HarnessError> {
    let mut rows = Vec::with_capacity(alphas.len() * ks.len());
    for &k in ks {
        for &alpha in alphas {
            let accuracy =
                super::validate_onsurface(db, test_points, &QueryParams::new(k, epsilon, alpha))?;
            rows.push(AccuracyRow {
                data_space_size,
                alpha,
                epsilon,
                k,
                tests: test_points.len(),
                accuracy_pct: accuracy,
            });
        }
    }
    Ok(rows)
}

/// Perturbed-point evaluation over an (α, k) sweep.
pub fn perturbed_sweep(
    db: &PointCloudDb,
    labeled: &[LabeledPoint],
    alphas: &[f64],
    ks: &[usize],
    epsilon: f64,
) -> Result<Vec<PerturbedRow>, HarnessError> {
    let mut rows = Vec::with_capacity(alphas.len() * ks.len());
    for &k in ks {
        for &alpha in alphas {
            let outcome = super::evaluate(db, labeled, &QueryParams::new(k, epsilon, alpha))?;
            rows.push(PerturbedRow { alpha, epsilon, k, outcome });
        }
    }
    Ok(rows)
}

/// Generate and mesh the RVEs named by `seeds` at the config's resolution.
fn generate_rves(config: &PipelineConfig, seeds: &[u64]) -> Result<Vec<RveSpec>, HarnessError> {
    seeds
        .iter()
        .map(|&seed| {
            let ms = generate(&MicrostructureSpec::new(
                config.window_px,
                config.vf,
                config.radius_px,
                seed,
            ))?;
            Ok(RveSpec { id: seed.to_string(), microstructure: ms, divisions: config.divisions })
        })
        .collect()
}

/// Run the whole pipeline and write every artifact under `config.out_dir`.
///
/// The point-cloud CSV and the JSON/text reports are bit-identical across
/// reruns with the same config; wall-clock numbers go to `timing.json`.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineArtifacts, HarnessError> {
    config.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
    std::fs::create_dir_all(&config.out_dir)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| HarnessError::Config(format!("worker pool: {e}")))?;
    pool.install(|| run_pipeline_inner(config))
}

fn run_pipeline_inner(config: &PipelineConfig) -> Result<PipelineArtifacts, HarnessError> {
    let total_start = Instant::now();
    let grid = LoadGrid::new(config.grid_m, config.amplitude_psi)?;
    let materials = MaterialSet::default();

    // Microstructures; all but the last seed feed the stored surface.
    let t = Instant::now();
    let rves = generate_rves(config, &config.seeds)?;
    for rve in &rves {
        rve.microstructure
            .write_text(&config.out_dir.join(format!("rve_{}.txt", rve.id)))?;
    }
    let microgen_s = t.elapsed().as_secs_f64();
    let (train_rves, heldout_rve) = rves.split_at(rves.len() - 1);

    // FEA batch over the load grid: the failure surface.
    let t = Instant::now();
    let surface = build_surface(train_rves, &grid, &materials)?;
    let heldout_surface = build_surface(heldout_rve, &grid, &materials)?;
    let surface_s = t.elapsed().as_secs_f64();

    let surface_csv = config.out_dir.join("surface.csv");
    surface.export_csv(&surface_csv)?;
    heldout_surface.export_csv(&config.out_dir.join("surface_heldout.csv"))?;

    // Split into stored and held-back points, build the query index.
    let coords = surface.coordinates();
    let (train_idx, test_idx) = split_indices(coords.len(), config.split, config.base_seed);
    let train: Vec<Vec<f64>> = train_idx.iter().map(|&i| coords[i].clone()).collect();
    let test: Vec<Vec<f64>> = test_idx.iter().map(|&i| coords[i].clone()).collect();

    let t = Instant::now();
    let db = PointCloudDb::build(&train)?;
    let db_build_s = t.elapsed().as_secs_f64();
    let db_snapshot = config.out_dir.join("surface.pcdb");
    db.save_snapshot(&db_snapshot)?;

    // Validation sweeps (classification only; no I/O in the timed section).
    let mut ks: Vec<usize> = SWEEP_KS.to_vec();
    if !ks.contains(&config.k) {
        ks.push(config.k);
        ks.sort_unstable();
    }
    let heldout_coords = heldout_surface.coordinates();
    let labeled = perturb(&heldout_coords, &PerturbationSpec::new(config.base_seed));

    let t = Instant::now();
    let validation_split =
        onsurface_sweep(&db, &test, coords.len(), &SPLIT_ALPHAS, &ks, config.epsilon)?;
    let validation_heldout = onsurface_sweep(
        &db,
        &heldout_coords,
        coords.len(),
        &HELDOUT_ALPHAS,
        &ks,
        config.epsilon,
    )?;
    let validation_perturbed =
        perturbed_sweep(&db, &labeled, &HELDOUT_ALPHAS, &ks, config.epsilon)?;
    let query_s = t.elapsed().as_secs_f64();
    let queries_executed = ks.len()
        * (SPLIT_ALPHAS.len() * test.len() + HELDOUT_ALPHAS.len() * (heldout_coords.len() + labeled.len()));

    let bins = bin_distribution(&coords);
    let report = PipelineReport {
        surface: SurfaceSummary {
            points: coords.len(),
            rve_ids: surface.provenance.rve_ids.clone(),
            grid_m: config.grid_m,
            amplitude_psi: config.amplitude_psi,
            train_points: train.len(),
            test_points: test.len(),
            sigma_range_psi: db.sigma_range(),
        },
        bins: bins.summary(),
        bin_counts: bins.counts,
        validation_split,
        validation_heldout,
        validation_perturbed,
    };

    let total_s = total_start.elapsed().as_secs_f64();
    let timing = TimingReport {
        microgen_s,
        surface_s,
        db_build_s,
        query_s,
        total_s,
        surface_fraction_pct: 100.0 * surface_s / total_s,
        queries_executed,
    };

    let report_json = config.out_dir.join("report.json");
    let report_text = config.out_dir.join("report.txt");
    let timing_json = config.out_dir.join("timing.json");
    std::fs::write(&report_json, serde_json::to_string_pretty(&report).unwrap() + "\n")?;
    std::fs::write(&report_text, report.to_text())?;
    std::fs::write(&timing_json, serde_json::to_string_pretty(&timing).unwrap() + "\n")?;

    Ok(PipelineArtifacts {
        report,
        timing,
        surface_csv,
        db_snapshot,
        report_json,
        report_text,
        timing_json,
    })
}

/// Re-create a [`FailureSurface`]'s query database from its CSV.
pub fn db_from_surface(surface: &FailureSurface) -> Result<PointCloudDb, HarnessError> {
    Ok(PointCloudDb::build(&surface.coordinates())?)
}

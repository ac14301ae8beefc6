//! Command-line driver for the failure-surface pipeline.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numeric failure,
//! 4 validation-threshold failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pcfc::classifier::{Decision, PointCloudDb, QueryParams};
use pcfc::fea::{solve, BoundaryConditions, MaterialSet};
use pcfc::harness::config::{ConfigError, PipelineConfig};
use pcfc::harness::pipeline::{
    onsurface_sweep, perturbed_sweep, run_pipeline, HELDOUT_ALPHAS, SPLIT_ALPHAS, SWEEP_KS,
};
use pcfc::harness::report::convergence_to_text;
use pcfc::harness::{
    bin_distribution, convergence_study, perturb, split_indices, ConvergenceSettings,
    HarnessError, PerturbationSpec,
};
use pcfc::mesh::pixelate;
use pcfc::microgen::{generate, Microstructure, MicrostructureSpec};
use pcfc::surface::{build_surface, FailureSurface, LoadGrid, RveSpec};

#[derive(Parser)]
#[command(name = "pcfc", version, about = "Point-cloud failure criterion pipeline")]
struct Cli {
    /// Config file (flat key-value; see README for the keys).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Base seed for the split/perturbation random streams.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Worker threads for the FEA batches (0 = all logical cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Output directory for artifacts and reports.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the configured periodic microstructures and write their text files.
    Microgen,
    /// Mesh a microstructure and dump the node/element tables.
    Mesh {
        /// Microstructure text file; defaults to generating the first configured seed.
        #[arg(long, value_name = "PATH")]
        input: Option<PathBuf>,
    },
    /// Solve one load case on an RVE and dump per-element stresses.
    Solve {
        /// Normal traction on edge BC, psi.
        #[arg(long, default_value_t = 0.0)]
        sx: f64,
        /// Normal traction on edge CD, psi.
        #[arg(long, default_value_t = 0.0)]
        sy: f64,
        /// Shear traction, psi.
        #[arg(long, default_value_t = 0.0)]
        txy: f64,
        /// Prescribed-displacement mode: engineering strain on edge BC
        /// (overrides the tractions).
        #[arg(long)]
        strain: Option<f64>,
        /// Microstructure text file; defaults to generating the first configured seed.
        #[arg(long, value_name = "PATH")]
        input: Option<PathBuf>,
    },
    /// Build the failure-surface point cloud from the training seeds.
    Surface,
    /// Index a point-cloud CSV into a binary snapshot.
    BuildDb {
        /// Point-cloud CSV; defaults to <out>/surface.csv.
        #[arg(long, value_name = "PATH")]
        surface: Option<PathBuf>,
    },
    /// Classify stress states against a point-cloud database.
    Query {
        /// Database snapshot (.pcdb) or point-cloud CSV; defaults to <out>/surface.pcdb.
        #[arg(long, value_name = "PATH")]
        db: Option<PathBuf>,
        /// Stress state `sx,sy,sz,txy` in psi; repeatable.
        #[arg(long = "point", value_name = "SX,SY,SZ,TXY")]
        points: Vec<String>,
        /// File with one `sx,sy,sz,txy` stress state per line.
        #[arg(long, value_name = "PATH")]
        points_file: Option<PathBuf>,
    },
    /// On-surface accuracy sweep: held-back split plus the held-out RVE.
    ValidateA {
        /// Reuse an existing surface CSV instead of regenerating it.
        #[arg(long, value_name = "PATH")]
        surface: Option<PathBuf>,
        /// Reuse an existing held-out surface CSV.
        #[arg(long, value_name = "PATH")]
        heldout: Option<PathBuf>,
    },
    /// Perturbed-point false-positive/false-negative sweep on the held-out RVE.
    ValidateB {
        #[arg(long, value_name = "PATH")]
        surface: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        heldout: Option<PathBuf>,
    },
    /// Effective-modulus convergence study over window sizes.
    Converge {
        /// Comma-separated window sizes in pixels.
        #[arg(long, default_value = "100,200,325")]
        windows: String,
        /// Comma-separated mesh divisions to try per window.
        #[arg(long, default_value = "25,50,100")]
        divisions: String,
    },
    /// Run the full pipeline and emit every artifact and report.
    Pipeline,
}

/// Errors ranked by exit code.
enum CliError {
    Config(String),
    Numeric(String),
    Threshold(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Threshold(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Numeric(m) | CliError::Threshold(m) => m,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Config(m) => CliError::Config(m),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

macro_rules! numeric_from {
    ($($ty:ty),*) => {$(
        impl From<$ty> for CliError {
            fn from(e: $ty) -> Self { CliError::Numeric(e.to_string()) }
        }
    )*};
}
numeric_from!(
    pcfc::microgen::MicrogenError,
    pcfc::fea::FeaError,
    pcfc::surface::SurfaceError,
    pcfc::classifier::ClassifierError,
    std::io::Error
);

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, CliError> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.base_seed = seed;
    }
    if let Some(threads) = cli.threads {
        config.threads = threads;
    }
    if let Some(out) = &cli.out {
        config.out_dir = out.clone();
    }
    config.validate()?;
    std::fs::create_dir_all(&config.out_dir)?;
    Ok(config)
}

fn install_pool(config: &PipelineConfig) {
    // Best effort; the pool may already exist when tests call run() twice.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build_global();
}

fn load_or_generate_rve(
    config: &PipelineConfig,
    input: &Option<PathBuf>,
    seed: u64,
) -> Result<(String, Microstructure), CliError> {
    match input {
        Some(path) => {
            let ms = Microstructure::read_text(path)?;
            let id = path.file_stem().map_or_else(|| "rve".to_string(), |s| s.to_string_lossy().into_owned());
            Ok((id, ms))
        }
        None => {
            let ms = generate(&MicrostructureSpec::new(
                config.window_px,
                config.vf,
                config.radius_px,
                seed,
            ))?;
            Ok((seed.to_string(), ms))
        }
    }
}

fn training_rves(config: &PipelineConfig) -> Result<Vec<RveSpec>, CliError> {
    config.seeds[..config.seeds.len() - 1]
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

fn heldout_rve(config: &PipelineConfig) -> Result<RveSpec, CliError> {
    let seed = *config.seeds.last().unwrap();
    let ms = generate(&MicrostructureSpec::new(
        config.window_px,
        config.vf,
        config.radius_px,
        seed,
    ))?;
    Ok(RveSpec { id: seed.to_string(), microstructure: ms, divisions: config.divisions })
}

fn surface_from(
    config: &PipelineConfig,
    path: &Option<PathBuf>,
    heldout: bool,
) -> Result<FailureSurface, CliError> {
    if let Some(p) = path {
        return Ok(FailureSurface::import_csv(p)?);
    }
    let grid = LoadGrid::new(config.grid_m, config.amplitude_psi)?;
    let rves = if heldout { vec![heldout_rve(config)?] } else { training_rves(config)? };
    Ok(build_surface(&rves, &grid, &MaterialSet::default())?)
}

fn parse_stress(text: &str) -> Result<Vec<f64>, CliError> {
    let components: Result<Vec<f64>, _> =
        text.split(',').map(|s| s.trim().parse::<f64>()).collect();
    let components =
        components.map_err(|_| CliError::Config(format!("bad stress state `{text}`")))?;
    if components.len() != 4 {
        return Err(CliError::Config(format!(
            "stress state needs 4 components sx,sy,sz,txy, got {}",
            components.len()
        )));
    }
    Ok(components)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    std::fs::write(path, serde_json::to_string_pretty(value).unwrap() + "\n")?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = load_config(&cli)?;
    match &cli.command {
        Command::Microgen => {
            for &seed in &config.seeds {
                let ms = generate(&MicrostructureSpec::new(
                    config.window_px,
                    config.vf,
                    config.radius_px,
                    seed,
                ))?;
                let path = config.out_dir.join(format!("rve_{seed}.txt"));
                ms.write_text(&path)?;
                println!(
                    "rve {seed}: {} inclusions, achieved vf {:.4} -> {}",
                    ms.inclusions.len(),
                    ms.achieved_vf,
                    path.display()
                );
            }
            Ok(())
        }
        Command::Mesh { input } => {
            let (id, ms) = load_or_generate_rve(&config, input, config.seeds[0])?;
            let mesh = pixelate(&ms, config.divisions);
            let (nodes, elements) = mesh.to_csv_tables();
            let npath = config.out_dir.join(format!("mesh_{id}_nodes.csv"));
            let epath = config.out_dir.join(format!("mesh_{id}_elements.csv"));
            std::fs::write(&npath, nodes)?;
            std::fs::write(&epath, elements)?;
            println!(
                "mesh {id}: {} nodes, {} elements, mesh vf {:.4} (analytic {:.4}) -> {}, {}",
                mesh.n_nodes(),
                mesh.n_elements(),
                mesh.volume_fraction(),
                ms.achieved_vf,
                npath.display(),
                epath.display()
            );
            Ok(())
        }
        Command::Solve { sx, sy, txy, strain, input } => {
            install_pool(&config);
            let (id, ms) = load_or_generate_rve(&config, input, config.seeds[0])?;
            let mesh = pixelate(&ms, config.divisions);
            let materials = MaterialSet::default();
            let bc = match strain {
                Some(e) => BoundaryConditions::DisplacementX { strain: *e },
                None => BoundaryConditions::Traction { sx: *sx, sy: *sy, txy: *txy },
            };
            let result = solve(&mesh, &materials, &bc)?;
            let mut dump = String::from("element_id,sx,sy,sz,txy,phase\n");
            for (e, s) in result.stresses.iter().enumerate() {
                let tag = match mesh.phase[e] {
                    pcfc::microgen::Phase::Fiber => "F",
                    pcfc::microgen::Phase::Matrix => "M",
                };
                dump.push_str(&format!(
                    "{e},{:.17e},{:.17e},{:.17e},{:.17e},{tag}\n",
                    s.sx, s.sy, s.sz, s.txy
                ));
            }
            let path = config.out_dir.join(format!("stress_{id}.csv"));
            std::fs::write(&path, dump)?;

            let all: Vec<usize> = (0..mesh.n_elements()).collect();
            let rve_level =
                pcfc::fea::homogenize_stress(&result.stresses, &result.volumes, &[all])?;
            println!(
                "run {id}: homogenized (sx, sy, sz, txy) = ({:.2}, {:.2}, {:.2}, {:.2}) psi, \
                 residual {:.2e} -> {}",
                rve_level.sx, rve_level.sy, rve_level.sz, rve_level.txy,
                result.residual,
                path.display()
            );
            if strain.is_some() {
                let (e22, nu23) = pcfc::fea::effective_modulus(&mesh, &materials)?;
                println!("effective E22 = {e22:.4e} psi, nu23 = {nu23:.4}");
            }
            Ok(())
        }
        Command::Surface => {
            install_pool(&config);
            let surface = surface_from(&config, &None, false)?;
            let path = config.out_dir.join("surface.csv");
            surface.export_csv(&path)?;
            println!(
                "surface: {} points from {} training RVEs -> {}",
                surface.points.len(),
                config.seeds.len() - 1,
                path.display()
            );
            Ok(())
        }
        Command::BuildDb { surface } => {
            let csv = surface.clone().unwrap_or_else(|| config.out_dir.join("surface.csv"));
            let cloud = FailureSurface::import_csv(&csv)?;
            let db = PointCloudDb::build(&cloud.coordinates())?;
            let path = config.out_dir.join("surface.pcdb");
            db.save_snapshot(&path)?;
            println!(
                "db: {} points, d = {}, sigma_range = {:.1} psi -> {}",
                db.len(),
                db.dim(),
                db.sigma_range(),
                path.display()
            );
            Ok(())
        }
        Command::Query { db, points, points_file } => {
            let db_path = db.clone().unwrap_or_else(|| config.out_dir.join("surface.pcdb"));
            let db = if db_path.extension().is_some_and(|e| e == "csv") {
                PointCloudDb::build(&FailureSurface::import_csv(&db_path)?.coordinates())?
            } else {
                PointCloudDb::load_snapshot(&db_path)?
            };
            let mut queries: Vec<Vec<f64>> = Vec::new();
            for p in points {
                queries.push(parse_stress(p)?);
            }
            if let Some(file) = points_file {
                for line in std::fs::read_to_string(file)?.lines() {
                    if !line.trim().is_empty() {
                        queries.push(parse_stress(line)?);
                    }
                }
            }
            if queries.is_empty() {
                return Err(CliError::Config(
                    "no query points; pass --point or --points-file".into(),
                ));
            }
            let params = QueryParams::new(config.k, config.epsilon, config.alpha);
            for q in &queries {
                let v = db.classify(q, &params)?;
                let label = match v.decision {
                    Decision::Outside => "OUTSIDE",
                    Decision::Inside => "inside",
                };
                println!(
                    "({:.1}, {:.1}, {:.1}, {:.1}) -> {label}  |q| = {:.1}, neighbor avg = {:.1}",
                    q[0], q[1], q[2], q[3], v.l2_query, v.l2_avg_neighbors
                );
            }
            Ok(())
        }
        Command::ValidateA { surface, heldout } => {
            install_pool(&config);
            let cloud = surface_from(&config, surface, false)?;
            let coords = cloud.coordinates();
            let (train_idx, test_idx) =
                split_indices(coords.len(), config.split, config.base_seed);
            let train: Vec<Vec<f64>> = train_idx.iter().map(|&i| coords[i].clone()).collect();
            let test: Vec<Vec<f64>> = test_idx.iter().map(|&i| coords[i].clone()).collect();
            let db = PointCloudDb::build(&train)?;

            let split_rows =
                onsurface_sweep(&db, &test, coords.len(), &SPLIT_ALPHAS, &SWEEP_KS, config.epsilon)?;
            let heldout_cloud = surface_from(&config, heldout, true)?;
            let heldout_rows = onsurface_sweep(
                &db,
                &heldout_cloud.coordinates(),
                coords.len(),
                &HELDOUT_ALPHAS,
                &SWEEP_KS,
                config.epsilon,
            )?;

            let bins = bin_distribution(&coords).summary();
            println!(
                "bins (min, max, avg, zero): ({}, {}, {:.1}, {})",
                bins.min, bins.max, bins.avg, bins.zero_bins
            );
            println!("split sweep:");
            for r in &split_rows {
                println!(
                    "  2n={} (alpha={}, eps={}, k={}) tests={} accuracy={:.1}%",
                    r.data_space_size, r.alpha, r.epsilon, r.k, r.tests, r.accuracy_pct
                );
            }
            println!("held-out sweep:");
            for r in &heldout_rows {
                println!(
                    "  2n={} (alpha={}, eps={}, k={}) tests={} accuracy={:.1}%",
                    r.data_space_size, r.alpha, r.epsilon, r.k, r.tests, r.accuracy_pct
                );
            }
            write_json(&config.out_dir.join("validate_a.json"), &(&split_rows, &heldout_rows))?;

            for r in split_rows.iter().chain(&heldout_rows) {
                if r.alpha == 0.1 && r.accuracy_pct < 95.0 {
                    return Err(CliError::Threshold(format!(
                        "accuracy {:.1}% below 95% at alpha=0.1, k={}",
                        r.accuracy_pct, r.k
                    )));
                }
            }
            Ok(())
        }
        Command::ValidateB { surface, heldout } => {
            install_pool(&config);
            let cloud = surface_from(&config, surface, false)?;
            let db = PointCloudDb::build(&cloud.coordinates())?;
            let heldout_cloud = surface_from(&config, heldout, true)?;
            let labeled = perturb(
                &heldout_cloud.coordinates(),
                &PerturbationSpec::new(config.base_seed),
            );
            let rows = perturbed_sweep(&db, &labeled, &HELDOUT_ALPHAS, &SWEEP_KS, config.epsilon)?;
            for r in &rows {
                let o = &r.outcome;
                println!(
                    "(alpha={}, eps={}, k={}) correct={} ({:.0}%) FP={} FN={}",
                    r.alpha, r.epsilon, r.k, o.correct, o.correct_pct,
                    o.false_positives, o.false_negatives
                );
            }
            write_json(&config.out_dir.join("validate_b.json"), &rows)?;

            for r in &rows {
                if r.alpha == 0.1 && r.k == 4 && r.outcome.false_negatives > 0 {
                    return Err(CliError::Threshold(format!(
                        "{} false negatives at alpha=0.1, k=4",
                        r.outcome.false_negatives
                    )));
                }
            }
            Ok(())
        }
        Command::Converge { windows, divisions } => {
            install_pool(&config);
            let parse_list = |text: &str, what: &str| -> Result<Vec<u32>, CliError> {
                text.split(',')
                    .map(|s| s.trim().parse::<u32>())
                    .collect::<Result<Vec<u32>, _>>()
                    .map_err(|_| CliError::Config(format!("bad {what} list `{text}`")))
            };
            let windows = parse_list(windows, "windows")?;
            let divisions = parse_list(divisions, "divisions")?;
            let settings = ConvergenceSettings {
                vf: config.vf,
                radius_px: config.radius_px,
                ..ConvergenceSettings::default()
            };
            let rows = convergence_study(
                &config.seeds,
                &windows,
                &divisions,
                &settings,
                &MaterialSet::default(),
            )?;
            print!("{}", convergence_to_text(&rows));
            write_json(&config.out_dir.join("converge.json"), &rows)?;
            Ok(())
        }
        Command::Pipeline => {
            let artifacts = run_pipeline(&config)?;
            print!("{}", artifacts.report.to_text());
            print!("{}", artifacts.timing.to_text());
            println!(
                "artifacts: {}, {}, {}",
                artifacts.surface_csv.display(),
                artifacts.db_snapshot.display(),
                artifacts.report_json.display()
            );
            Ok(())
        }
    }
}

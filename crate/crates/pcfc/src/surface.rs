//! Failure-surface generation.
//!
//! A symmetric grid of surface-traction combinations (σx, σy, τxy) is applied
//! to each RVE at unit amplitude. Per load case the per-phase homogenized
//! stresses are scaled until the first constituent reaches its principal
//! failure stress; the RVE-level homogenized tensor times that factor is one
//! point of the failure-surface cloud. Linearity makes the scaling exact, so
//! every stored point sits on the failure criterion.

use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fea::{homogenize_stress, FeaError, MaterialSet, StressTensor4, TractionSolver};
use crate::mesh::{pixelate, QuadMesh};
use crate::microgen::{Microstructure, Phase};

#[derive(Debug, Error)]
pub enum SurfaceError {
    #[error("invalid load grid: {0}")]
    InvalidGrid(String),
    #[error("no valid scaling candidate: every phase has σ3 ≤ 0 and σ1 ≥ 0")]
    NoValidCandidate,
    #[error("rve {rve_id}, {run_id}: {source}")]
    Fea {
        rve_id: String,
        run_id: String,
        source: FeaError,
    },
    #[error("empty failure surface")]
    EmptySurface,
    #[error("schema mismatch: expected header `{expected}`, got `{got}`")]
    SchemaMismatch { expected: String, got: String },
    #[error("row {row}: {msg}")]
    ParseRow { row: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Symmetric traction grid: `levels_m` equally spaced values per component
/// spanning [−a, +a], zero included (m odd), all-zero case excluded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadGrid {
    pub levels_m: u32,
    pub amplitude_a: f64,
}

impl Default for LoadGrid {
    fn default() -> Self {
        Self { levels_m: 5, amplitude_a: 1000.0 }
    }
}

impl LoadGrid {
    pub fn new(levels_m: u32, amplitude_a: f64) -> Result<Self, SurfaceError> {
        if levels_m < 3 || levels_m.is_multiple_of(2) {
            return Err(SurfaceError::InvalidGrid(format!(
                "levels_m must be an odd integer ≥ 3, got {levels_m}"
            )));
        }
        if !amplitude_a.is_finite() || amplitude_a <= 0.0 {
            return Err(SurfaceError::InvalidGrid(format!(
                "amplitude must be positive, got {amplitude_a}"
            )));
        }
        Ok(Self { levels_m, amplitude_a })
    }

    /// Number of load cases, m³ − 1.
    pub fn case_count(&self) -> usize {
        let m = self.levels_m as usize;
        m * m * m - 1
    }
}

/// All (σx, σy, τxy) combinations of the grid in a fixed deterministic order
/// (σx slowest, τxy fastest), with the all-zero case skipped.
pub fn enumerate_load_cases(grid: &LoadGrid) -> Vec<(f64, f64, f64)> {
    let m = grid.levels_m as usize;
    let a = grid.amplitude_a;
    let level = |i: usize| -> f64 {
        // Symmetric levels; the midpoint is exactly zero.
        let half = (m - 1) / 2;
        if i == half {
            0.0
        } else {
            -a + 2.0 * a * i as f64 / (m - 1) as f64
        }
    };
    let mut cases = Vec::with_capacity(grid.case_count());
    for ix in 0..m {
        for iy in 0..m {
            for it in 0..m {
                let c = (level(ix), level(iy), level(it));
                if c != (0.0, 0.0, 0.0) {
                    cases.push(c);
                }
            }
        }
    }
    cases
}

/// Which constituent failed, and in which sense.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FailureMode {
    FiberTension,
    FiberCompression,
    MatrixTension,
    MatrixCompression,
}

impl FailureMode {
    pub fn code(&self) -> &'static str {
        match self {
            FailureMode::FiberTension => "FT",
            FailureMode::FiberCompression => "FC",
            FailureMode::MatrixTension => "MT",
            FailureMode::MatrixCompression => "MC",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        match code {
            "FT" => Some(FailureMode::FiberTension),
            "FC" => Some(FailureMode::FiberCompression),
            "MT" => Some(FailureMode::MatrixTension),
            "MC" => Some(FailureMode::MatrixCompression),
            _ => None,
        }
    }
}

impl fmt::Display for FailureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// One failure-surface point: the RVE-level homogenized tensor scaled to
/// first constituent failure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailurePoint {
    pub stress: StressTensor4,
    pub mode: FailureMode,
    pub s_f: f64,
    pub rve_id: String,
    pub run_id: String,
}

/// Inputs that produced a surface, kept for provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub grid: LoadGrid,
    pub rve_ids: Vec<String>,
    pub materials: MaterialSet,
}

/// The failure-surface point cloud (dimension 4: σx, σy, σz, τxy).
#[derive(Debug, Clone)]
pub struct FailureSurface {
    pub points: Vec<FailurePoint>,
    pub provenance: Provenance,
}

/// Minimum scaling factor over the tension/compression candidates of each
/// phase, and the failing candidate's label.
///
/// For a phase with principal stresses σ1 ≤ σ2 ≤ σ3: the tension candidate
/// `σft/σ3` exists iff σ3 > 0 and the compression candidate `σfc/(−σ1)` iff
/// σ1 < 0 (the compression limit is stored as a positive magnitude).
pub fn scale_to_failure(
    phase_stresses: &[(Phase, StressTensor4)],
    materials: &MaterialSet,
) -> Result<(f64, FailureMode), SurfaceError> {
    let mut best: Option<(f64, FailureMode)> = None;
    for &(phase, stress) in phase_stresses {
        let mat = materials.for_phase(phase);
        let p = stress.principal();
        let (sigma1, sigma3) = (p[0], p[2]);
        let mut candidates: Vec<(f64, FailureMode)> = Vec::with_capacity(2);
        if sigma3 > 0.0 {
            let mode = match phase {
                Phase::Fiber => FailureMode::FiberTension,
                Phase::Matrix => FailureMode::MatrixTension,
            };
            candidates.push((mat.sigma_f_t / sigma3, mode));
        }
        if sigma1 < 0.0 {
            let mode = match phase {
                Phase::Fiber => FailureMode::FiberCompression,
                Phase::Matrix => FailureMode::MatrixCompression,
            };
            candidates.push((mat.sigma_f_c / (-sigma1), mode));
        }
        for cand in candidates {
            if best.as_ref().is_none_or(|(s, _)| cand.0 < *s) {
                best = Some(cand);
            }
        }
    }
    best.ok_or(SurfaceError::NoValidCandidate)
}

/// Diagnostic variant of the scaling: the minimum over every element's own
/// candidates rather than over the homogenized phase tensors.
pub fn scale_to_failure_per_element(
    stresses: &[StressTensor4],
    phases: &[Phase],
    materials: &MaterialSet,
) -> Result<(f64, FailureMode), SurfaceError> {
    let mut best: Option<(f64, FailureMode)> = None;
    for (s, &p) in stresses.iter().zip(phases) {
        if let Ok(cand) = scale_to_failure(&[(p, *s)], materials) {
            if best.as_ref().is_none_or(|(b, _)| cand.0 < *b) {
                best = Some(cand);
            }
        }
    }
    best.ok_or(SurfaceError::NoValidCandidate)
}

/// One RVE to include in a surface build.
#[derive(Debug, Clone)]
pub struct RveSpec {
    pub id: String,
    pub microstructure: Microstructure,
    pub divisions: u32,
}

/// A solved load case: the cloud point plus the per-phase homogenized
/// tensors already scaled to the failure state.
#[derive(Debug, Clone)]
pub struct CaseOutcome {
    pub point: FailurePoint,
    pub scaled_phase_stresses: Vec<(Phase, StressTensor4)>,
}

fn phase_groups(mesh: &QuadMesh) -> Vec<(Phase, Vec<usize>)> {
    [Phase::Fiber, Phase::Matrix]
        .into_iter()
        .map(|p| (p, mesh.elements_of_phase(p)))
        .filter(|(_, els)| !els.is_empty())
        .collect()
}

fn solve_case_outcome(
    solver: &TractionSolver,
    groups: &[(Phase, Vec<usize>)],
    all: &[Vec<usize>],
    materials: &MaterialSet,
    rve_id: &str,
    case_index: usize,
    case: (f64, f64, f64),
) -> Result<CaseOutcome, SurfaceError> {
    let run_id = format!("Run{}", case_index + 1);
    let wrap = |source: FeaError| SurfaceError::Fea {
        rve_id: rve_id.to_string(),
        run_id: run_id.clone(),
        source,
    };
    let result = solver.solve_case(case.0, case.1, case.2).map_err(wrap)?;
    let mut phase_stresses = Vec::with_capacity(groups.len());
    for (phase, els) in groups {
        let s = homogenize_stress(&result.stresses, &result.volumes, std::slice::from_ref(els))
            .map_err(wrap)?;
        phase_stresses.push((*phase, s));
    }
    let (s_f, mode) = scale_to_failure(&phase_stresses, materials)?;
    let rve_level = homogenize_stress(&result.stresses, &result.volumes, all).map_err(wrap)?;
    Ok(CaseOutcome {
        point: FailurePoint {
            stress: rve_level.scaled(s_f),
            mode,
            s_f,
            rve_id: rve_id.to_string(),
            run_id,
        },
        scaled_phase_stresses: phase_stresses
            .into_iter()
            .map(|(p, s)| (p, s.scaled(s_f)))
            .collect(),
    })
}

/// Build the full point cloud with per-case details. Load cases run on the
/// ambient rayon pool; the output order is independent of scheduling (RVEs
/// sorted by id, cases in grid order).
pub fn build_surface_detailed(
    rves: &[RveSpec],
    grid: &LoadGrid,
    materials: &MaterialSet,
) -> Result<Vec<CaseOutcome>, SurfaceError> {
    LoadGrid::new(grid.levels_m, grid.amplitude_a)?;
    let cases = enumerate_load_cases(grid);
    let mut order: Vec<usize> = (0..rves.len()).collect();
    order.sort_by(|&a, &b| rves[a].id.cmp(&rves[b].id));

    let mut outcomes = Vec::with_capacity(rves.len() * cases.len());
    for &ri in &order {
        let rve = &rves[ri];
        let mesh = pixelate(&rve.microstructure, rve.divisions);
        let solver = TractionSolver::new(&mesh, materials).map_err(|source| SurfaceError::Fea {
            rve_id: rve.id.clone(),
            run_id: "assembly".into(),
            source,
        })?;
        let groups = phase_groups(&mesh);
        let all = vec![(0..mesh.n_elements()).collect::<Vec<usize>>()];
        let rve_outcomes: Result<Vec<CaseOutcome>, SurfaceError> = cases
            .par_iter()
            .enumerate()
            .map(|(i, &case)| {
                solve_case_outcome(&solver, &groups, &all, materials, &rve.id, i, case)
            })
            .collect();
        outcomes.extend(rve_outcomes?);
    }
    Ok(outcomes)
}

/// Build the failure surface: one point per (RVE, load case).
pub fn build_surface(
    rves: &[RveSpec],
    grid: &LoadGrid,
    materials: &MaterialSet,
) -> Result<FailureSurface, SurfaceError> {
    let outcomes = build_surface_detailed(rves, grid, materials)?;
    if outcomes.is_empty() {
        return Err(SurfaceError::EmptySurface);
    }
    let mut rve_ids: Vec<String> = rves.iter().map(|r| r.id.clone()).collect();
    rve_ids.sort();
    Ok(FailureSurface {
        points: outcomes.into_iter().map(|o| o.point).collect(),
        provenance: Provenance { grid: *grid, rve_ids, materials: *materials },
    })
}

pub const CSV_HEADER: &str = "rve_id,run_id,sx,sy,sz,txy,mode,s_f";

impl FailureSurface {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{:.17e},{:.17e},{:.17e},{:.17e},{},{:.17e}\n",
                p.rve_id, p.run_id, p.stress.sx, p.stress.sy, p.stress.sz, p.stress.txy,
                p.mode, p.s_f
            ));
        }
        out
    }

    pub fn export_csv(&self, path: &Path) -> Result<(), SurfaceError> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn from_csv(text: &str) -> Result<Self, SurfaceError> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or("").trim_end();
        if header != CSV_HEADER {
            return Err(SurfaceError::SchemaMismatch {
                expected: CSV_HEADER.to_string(),
                got: header.to_string(),
            });
        }
        let mut points = Vec::new();
        for (idx, line) in lines.enumerate() {
            let row = idx + 2;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 8 {
                return Err(SurfaceError::ParseRow {
                    row,
                    msg: format!("expected 8 fields, got {}", fields.len()),
                });
            }
            let num = |s: &str, what: &str| -> Result<f64, SurfaceError> {
                s.parse().map_err(|_| SurfaceError::ParseRow {
                    row,
                    msg: format!("bad {what} `{s}`"),
                })
            };
            let mode = FailureMode::from_code(fields[6]).ok_or_else(|| SurfaceError::ParseRow {
                row,
                msg: format!("unknown failure mode `{}`", fields[6]),
            })?;
            let s_f = num(fields[7], "scale factor")?;
            if !s_f.is_finite() || s_f <= 0.0 {
                return Err(SurfaceError::ParseRow {
                    row,
                    msg: format!("scale factor must be positive, got {s_f}"),
                });
            }
            points.push(FailurePoint {
                rve_id: fields[0].to_string(),
                run_id: fields[1].to_string(),
                stress: StressTensor4::new(
                    num(fields[2], "sx")?,
                    num(fields[3], "sy")?,
                    num(fields[4], "sz")?,
                    num(fields[5], "txy")?,
                ),
                mode,
                s_f,
            });
        }
        if points.is_empty() {
            return Err(SurfaceError::EmptySurface);
        }
        let mut rve_ids: Vec<String> = points.iter().map(|p| p.rve_id.clone()).collect();
        rve_ids.sort();
        rve_ids.dedup();
        Ok(FailureSurface {
            points,
            provenance: Provenance {
                grid: LoadGrid::default(),
                rve_ids,
                materials: MaterialSet::default(),
            },
        })
    }

    pub fn import_csv(path: &Path) -> Result<Self, SurfaceError> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }

    /// Point coordinates as d=4 rows for the classifier.
    pub fn coordinates(&self) -> Vec<Vec<f64>> {
        self.points.iter().map(|p| p.stress.as_array().to_vec()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::microgen::{generate, MicrostructureSpec};

    #[test]
    fn case_counts_match_grid_size() {
        assert_eq!(enumerate_load_cases(&LoadGrid::new(5, 1000.0).unwrap()).len(), 124);
        assert_eq!(enumerate_load_cases(&LoadGrid::new(3, 1000.0).unwrap()).len(), 26);
        assert_eq!(enumerate_load_cases(&LoadGrid::new(11, 1000.0).unwrap()).len(), 1330);
    }

    #[test]
    fn grid_levels_are_symmetric_and_include_zero() {
        let grid = LoadGrid::new(5, 1000.0).unwrap();
        let cases = enumerate_load_cases(&grid);
        let mut levels: Vec<f64> = cases.iter().map(|c| c.0).collect();
        levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
        levels.dedup();
        assert_eq!(levels, vec![-1000.0, -500.0, 0.0, 500.0, 1000.0]);
        // Antipodal closure: the negation of every case is present.
        for &(x, y, t) in &cases {
            assert!(cases.contains(&(-x, -y, -t)), "missing negation of ({x},{y},{t})");
        }
        // The all-zero case is excluded.
        assert!(!cases.contains(&(0.0, 0.0, 0.0)));
    }

    #[test]
    fn grid_rejects_even_or_small_m() {
        assert!(LoadGrid::new(4, 1000.0).is_err());
        assert!(LoadGrid::new(1, 1000.0).is_err());
        assert!(LoadGrid::new(3, -5.0).is_err());
    }

    #[test]
    fn scaling_examples() {
        let mats = MaterialSet::default();
        // Matrix tension driven: principals (0, 0, 1000).
        let (s, mode) = scale_to_failure(
            &[(Phase::Matrix, StressTensor4::new(1000.0, 0.0, 0.0, 0.0))],
            &mats,
        )
        .unwrap();
        assert_eq!(s, 15.375);
        assert_eq!(mode, FailureMode::MatrixTension);
        // Matrix compression: principals (−1000, 0, 0).
        let (s, mode) = scale_to_failure(
            &[(Phase::Matrix, StressTensor4::new(-1000.0, 0.0, 0.0, 0.0))],
            &mats,
        )
        .unwrap();
        assert_eq!(s, 23.0);
        assert_eq!(mode, FailureMode::MatrixCompression);
        // Competition: fiber σ3 = 2000 (s = 17.5) vs matrix σ3 = 1000 (s = 15.375).
        let (s, mode) = scale_to_failure(
            &[
                (Phase::Fiber, StressTensor4::new(2000.0, 0.0, 0.0, 0.0)),
                (Phase::Matrix, StressTensor4::new(1000.0, 0.0, 0.0, 0.0)),
            ],
            &mats,
        )
        .unwrap();
        assert_eq!(s, 15.375);
        assert_eq!(mode, FailureMode::MatrixTension);
    }

    #[test]
    fn zero_stress_has_no_candidate() {
        let err = scale_to_failure(
            &[(Phase::Matrix, StressTensor4::default())],
            &MaterialSet::default(),
        )
        .unwrap_err();
        assert!(matches!(err, SurfaceError::NoValidCandidate));
    }

    fn small_rves() -> Vec<RveSpec> {
        [7u64, 8]
            .iter()
            .map(|&seed| RveSpec {
                id: seed.to_string(),
                microstructure: generate(&MicrostructureSpec::new(200, 0.60, 15.6, seed)).unwrap(),
                divisions: 20,
            })
            .collect()
    }

    #[test]
    fn surface_has_one_point_per_rve_and_case() {
        let grid = LoadGrid::new(3, 1000.0).unwrap();
        let surface = build_surface(&small_rves(), &grid, &MaterialSet::default()).unwrap();
        assert_eq!(surface.points.len(), 2 * 26);
        assert!(surface.points.iter().all(|p| p.s_f > 0.0));
        // Deterministic ordering: RVE "7" before "8", cases in grid order.
        assert_eq!(surface.points[0].rve_id, "7");
        assert_eq!(surface.points[0].run_id, "Run1");
        assert_eq!(surface.points[26].rve_id, "8");
    }

    #[test]
    fn every_point_rescales_to_unity() {
        let grid = LoadGrid::new(3, 1000.0).unwrap();
        let outcomes =
            build_surface_detailed(&small_rves()[..1], &grid, &MaterialSet::default()).unwrap();
        for o in outcomes {
            let (s, mode) = scale_to_failure(&o.scaled_phase_stresses, &MaterialSet::default()).unwrap();
            assert!((s - 1.0).abs() <= 1e-9, "re-scale gave {s}");
            assert_eq!(mode, o.point.mode);
        }
    }

    #[test]
    fn traction_amplitude_cancels_out() {
        let rves = small_rves();
        let mats = MaterialSet::default();
        let a = build_surface(&rves[..1], &LoadGrid::new(3, 1000.0).unwrap(), &mats).unwrap();
        let b = build_surface(&rves[..1], &LoadGrid::new(3, 2500.0).unwrap(), &mats).unwrap();
        for (p, q) in a.points.iter().zip(&b.points) {
            for (x, y) in p.stress.as_array().iter().zip(q.stress.as_array()) {
                assert!(
                    (x - y).abs() <= 1e-8 * y.abs().max(1.0),
                    "amplitude changed the failure point: {x} vs {y}"
                );
            }
            assert_eq!(p.mode, q.mode);
        }
    }

    #[test]
    fn csv_round_trip_preserves_points() {
        let grid = LoadGrid::new(3, 1000.0).unwrap();
        let surface = build_surface(&small_rves()[..1], &grid, &MaterialSet::default()).unwrap();
        let back = FailureSurface::from_csv(&surface.to_csv()).unwrap();
        assert_eq!(surface.points, back.points);
    }

    #[test]
    fn csv_rejects_bad_inputs() {
        assert!(matches!(
            FailureSurface::from_csv(""),
            Err(SurfaceError::SchemaMismatch { .. })
        ));
        assert!(matches!(
            FailureSurface::from_csv("rve,run,sx\n"),
            Err(SurfaceError::SchemaMismatch { .. })
        ));
        assert!(matches!(
            FailureSurface::from_csv(CSV_HEADER),
            Err(SurfaceError::EmptySurface)
        ));
        let bad_row = format!("{CSV_HEADER}\n1,Run1,nope,0,0,0,MT,1\n");
        assert!(matches!(
            FailureSurface::from_csv(&bad_row),
            Err(SurfaceError::ParseRow { row: 2, .. })
        ));
    }

    #[test]
    fn per_element_scale_is_not_larger_than_homogenized() {
        use crate::fea::{solve, BoundaryConditions};
        let rve = &small_rves()[0];
        let mesh = pixelate(&rve.microstructure, rve.divisions);
        let mats = MaterialSet::default();
        let r = solve(&mesh, &mats, &BoundaryConditions::Traction {
            sx: 1000.0,
            sy: 0.0,
            txy: 0.0,
        })
        .unwrap();
        let groups = phase_groups(&mesh);
        let mut phase_stresses = Vec::new();
        for (phase, els) in &groups {
            phase_stresses.push((
                *phase,
                homogenize_stress(&r.stresses, &r.volumes, std::slice::from_ref(els)).unwrap(),
            ));
        }
        let (s_hom, _) = scale_to_failure(&phase_stresses, &MaterialSet::default()).unwrap();
        let (s_el, _) =
            scale_to_failure_per_element(&r.stresses, &mesh.phase, &MaterialSet::default()).unwrap();
        // Element extremes reach the limit before the homogenized average does.
        assert!(s_el <= s_hom + 1e-12, "per-element {s_el} vs homogenized {s_hom}");
    }
}

//! Python bindings: microstructure generation, meshing, plane-strain solves,
//! failure-surface building and point-cloud classification.

use std::fmt::Display;
use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use pcfc::classifier::{Decision, PointCloudDb, QueryParams};
use pcfc::fea::{homogenize_stress, solve, BoundaryConditions, MaterialSet};
use pcfc::mesh::pixelate;
use pcfc::microgen::{generate, Microstructure, MicrostructureSpec, Phase};
use pcfc::surface::{build_surface, enumerate_load_cases, FailureSurface, LoadGrid, RveSpec};

fn err<E: Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "Microstructure")]
struct PyMicrostructure {
    inner: Microstructure,
}

#[pymethods]
impl PyMicrostructure {
    #[getter]
    fn window_px(&self) -> u32 {
        self.inner.window_px
    }

    #[getter]
    fn achieved_vf(&self) -> f64 {
        self.inner.achieved_vf
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    /// Inclusions as (cx, cy, r) tuples in pixels.
    fn inclusions(&self) -> Vec<(f64, f64, f64)> {
        self.inner.inclusions.iter().map(|i| (i.cx, i.cy, i.r)).collect()
    }

    /// "fiber" or "matrix" at a point (periodic coordinates).
    fn phase_at(&self, x: f64, y: f64) -> &'static str {
        match self.inner.phase_at(x, y) {
            Phase::Fiber => "fiber",
            Phase::Matrix => "matrix",
        }
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(Self { inner: Microstructure::from_text(text).map_err(err)? })
    }

    fn write_text(&self, path: PathBuf) -> PyResult<()> {
        self.inner.write_text(&path).map_err(err)
    }

    #[staticmethod]
    fn read_text(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: Microstructure::read_text(&path).map_err(err)? })
    }

    fn __repr__(&self) -> String {
        format!(
            "Microstructure(window_px={}, inclusions={}, achieved_vf={:.4}, seed={})",
            self.inner.window_px,
            self.inner.inclusions.len(),
            self.inner.achieved_vf,
            self.inner.seed
        )
    }
}

/// Generate a periodic two-phase microstructure.
#[pyfunction]
#[pyo3(signature = (window_px, target_vf, radius_px, seed, min_gap_px = 1.0))]
fn generate_microstructure(
    window_px: u32,
    target_vf: f64,
    radius_px: f64,
    seed: u64,
    min_gap_px: f64,
) -> PyResult<PyMicrostructure> {
    let spec = MicrostructureSpec { window_px, target_vf, radius_px, min_gap_px, rng_seed: seed };
    Ok(PyMicrostructure { inner: generate(&spec).map_err(err)? })
}

#[pyclass(name = "QuadMesh")]
struct PyQuadMesh {
    inner: pcfc::mesh::QuadMesh,
}

#[pymethods]
impl PyQuadMesh {
    #[getter]
    fn n_nodes(&self) -> usize {
        self.inner.n_nodes()
    }

    #[getter]
    fn n_elements(&self) -> usize {
        self.inner.n_elements()
    }

    #[getter]
    fn divisions(&self) -> u32 {
        self.inner.divisions
    }

    fn volume_fraction(&self) -> f64 {
        self.inner.volume_fraction()
    }

    fn __repr__(&self) -> String {
        format!(
            "QuadMesh(divisions={}, nodes={}, elements={})",
            self.inner.divisions,
            self.inner.n_nodes(),
            self.inner.n_elements()
        )
    }
}

/// Mesh a microstructure into `divisions × divisions` quadrilaterals.
#[pyfunction(name = "pixelate")]
fn pixelate_py(ms: &PyMicrostructure, divisions: u32) -> PyQuadMesh {
    PyQuadMesh { inner: pixelate(&ms.inner, divisions) }
}

/// Solve one traction load case; returns per-region homogenized stresses.
#[pyclass(name = "SolveSummary")]
struct PySolveSummary {
    #[pyo3(get)]
    homogenized: (f64, f64, f64, f64),
    #[pyo3(get)]
    fiber: Option<(f64, f64, f64, f64)>,
    #[pyo3(get)]
    matrix: Option<(f64, f64, f64, f64)>,
    #[pyo3(get)]
    residual: f64,
}

#[pyfunction]
fn solve_traction(
    ms: &PyMicrostructure,
    divisions: u32,
    sx: f64,
    sy: f64,
    txy: f64,
) -> PyResult<PySolveSummary> {
    let mesh = pixelate(&ms.inner, divisions);
    let materials = MaterialSet::default();
    let result =
        solve(&mesh, &materials, &BoundaryConditions::Traction { sx, sy, txy }).map_err(err)?;
    let as_tuple = |s: pcfc::fea::StressTensor4| (s.sx, s.sy, s.sz, s.txy);
    let region = |phase: Phase| -> PyResult<Option<(f64, f64, f64, f64)>> {
        let els = mesh.elements_of_phase(phase);
        if els.is_empty() {
            return Ok(None);
        }
        let s = homogenize_stress(&result.stresses, &result.volumes, &[els]).map_err(err)?;
        Ok(Some(as_tuple(s)))
    };
    let all: Vec<usize> = (0..mesh.n_elements()).collect();
    let rve = homogenize_stress(&result.stresses, &result.volumes, &[all]).map_err(err)?;
    Ok(PySolveSummary {
        homogenized: as_tuple(rve),
        fiber: region(Phase::Fiber)?,
        matrix: region(Phase::Matrix)?,
        residual: result.residual,
    })
}

/// Transverse effective modulus (E22, nu23) from a 0.1% edge displacement.
#[pyfunction]
fn effective_modulus(ms: &PyMicrostructure, divisions: u32) -> PyResult<(f64, f64)> {
    let mesh = pixelate(&ms.inner, divisions);
    pcfc::fea::effective_modulus(&mesh, &MaterialSet::default()).map_err(err)
}

/// The (σx, σy, τxy) traction grid: m levels per component, all-zero excluded.
#[pyfunction(name = "enumerate_load_cases")]
#[pyo3(signature = (levels_m, amplitude = 1000.0))]
fn enumerate_load_cases_py(levels_m: u32, amplitude: f64) -> PyResult<Vec<(f64, f64, f64)>> {
    let grid = LoadGrid::new(levels_m, amplitude).map_err(err)?;
    Ok(enumerate_load_cases(&grid))
}

#[pyclass(name = "FailureSurface")]
struct PyFailureSurface {
    inner: FailureSurface,
}

#[pymethods]
impl PyFailureSurface {
    fn __len__(&self) -> usize {
        self.inner.points.len()
    }

    /// Failure stresses as (sx, sy, sz, txy) tuples in psi.
    fn points(&self) -> Vec<(f64, f64, f64, f64)> {
        self.inner
            .points
            .iter()
            .map(|p| (p.stress.sx, p.stress.sy, p.stress.sz, p.stress.txy))
            .collect()
    }

    /// Failure-mode codes (FT, FC, MT, MC), one per point.
    fn modes(&self) -> Vec<String> {
        self.inner.points.iter().map(|p| p.mode.code().to_string()).collect()
    }

    fn scale_factors(&self) -> Vec<f64> {
        self.inner.points.iter().map(|p| p.s_f).collect()
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }

    fn export_csv(&self, path: PathBuf) -> PyResult<()> {
        self.inner.export_csv(&path).map_err(err)
    }

    #[staticmethod]
    fn import_csv(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: FailureSurface::import_csv(&path).map_err(err)? })
    }

    fn __repr__(&self) -> String {
        format!("FailureSurface({} points)", self.inner.points.len())
    }
}

/// Build a failure surface from freshly generated RVEs.
#[pyfunction(name = "build_surface")]
#[pyo3(signature = (seeds, window_px = 200, vf = 0.60, radius_px = 15.6, divisions = 100,
                    grid_m = 5, amplitude = 1000.0))]
#[allow(clippy::too_many_arguments)]
fn build_surface_py(
    seeds: Vec<u64>,
    window_px: u32,
    vf: f64,
    radius_px: f64,
    divisions: u32,
    grid_m: u32,
    amplitude: f64,
) -> PyResult<PyFailureSurface> {
    let grid = LoadGrid::new(grid_m, amplitude).map_err(err)?;
    let rves: Result<Vec<RveSpec>, PyErr> = seeds
        .iter()
        .map(|&seed| {
            let ms = generate(&MicrostructureSpec::new(window_px, vf, radius_px, seed))
                .map_err(err)?;
            Ok(RveSpec { id: seed.to_string(), microstructure: ms, divisions })
        })
        .collect();
    let surface = build_surface(&rves?, &grid, &MaterialSet::default()).map_err(err)?;
    Ok(PyFailureSurface { inner: surface })
}

#[pyclass(name = "Verdict")]
struct PyVerdict {
    #[pyo3(get)]
    decision: String,
    #[pyo3(get)]
    l2_query: f64,
    #[pyo3(get)]
    l2_avg_neighbors: f64,
    #[pyo3(get)]
    neighbors: Vec<(usize, f64)>,
}

#[pymethods]
impl PyVerdict {
    fn __repr__(&self) -> String {
        format!(
            "Verdict(decision='{}', l2_query={:.2}, l2_avg_neighbors={:.2})",
            self.decision, self.l2_query, self.l2_avg_neighbors
        )
    }
}

#[pyclass(name = "PointCloudDb")]
struct PyPointCloudDb {
    inner: PointCloudDb,
}

#[pymethods]
impl PyPointCloudDb {
    #[staticmethod]
    fn build(points: Vec<Vec<f64>>) -> PyResult<Self> {
        Ok(Self { inner: PointCloudDb::build(&points).map_err(err)? })
    }

    #[staticmethod]
    fn from_surface(surface: &PyFailureSurface) -> PyResult<Self> {
        Self::build(surface.inner.coordinates())
    }

    #[staticmethod]
    fn from_csv(path: PathBuf) -> PyResult<Self> {
        let surface = FailureSurface::import_csv(&path).map_err(err)?;
        Self::build(surface.coordinates())
    }

    #[staticmethod]
    fn load_snapshot(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: PointCloudDb::load_snapshot(&path).map_err(err)? })
    }

    fn save_snapshot(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save_snapshot(&path).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn sigma_range(&self) -> f64 {
        self.inner.sigma_range()
    }

    /// The k nearest stored points as (index, distance) pairs.
    #[pyo3(signature = (q, k, epsilon = 0.0))]
    fn knn(&self, q: Vec<f64>, k: usize, epsilon: f64) -> PyResult<Vec<(usize, f64)>> {
        Ok(self
            .inner
            .knn(&q, k, epsilon)
            .map_err(err)?
            .into_iter()
            .map(|n| (n.index, n.distance))
            .collect())
    }

    /// Inside/outside decision for a stress state.
    #[pyo3(signature = (q, k = 4, epsilon = 0.0, alpha = 0.1, r = 2.0))]
    fn classify(&self, q: Vec<f64>, k: usize, epsilon: f64, alpha: f64, r: f64) -> PyResult<PyVerdict> {
        let mut params = QueryParams::new(k, epsilon, alpha);
        params.r = r;
        let v = self.inner.classify(&q, &params).map_err(err)?;
        Ok(PyVerdict {
            decision: match v.decision {
                Decision::Inside => "inside".to_string(),
                Decision::Outside => "outside".to_string(),
            },
            l2_query: v.l2_query,
            l2_avg_neighbors: v.l2_avg_neighbors,
            neighbors: v.neighbors.into_iter().map(|n| (n.index, n.distance)).collect(),
        })
    }
}

/// Minkowski norm of a vector, order r ≥ 1.
#[pyfunction(name = "minkowski_norm")]
#[pyo3(signature = (v, r = 2.0))]
fn minkowski_norm_py(v: Vec<f64>, r: f64) -> f64 {
    pcfc::classifier::minkowski_norm(&v, r)
}

#[pymodule]
fn pcfc_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMicrostructure>()?;
    m.add_class::<PyQuadMesh>()?;
    m.add_class::<PySolveSummary>()?;
    m.add_class::<PyFailureSurface>()?;
    m.add_class::<PyPointCloudDb>()?;
    m.add_class::<PyVerdict>()?;
    m.add_function(wrap_pyfunction!(generate_microstructure, m)?)?;
    m.add_function(wrap_pyfunction!(pixelate_py, m)?)?;
    m.add_function(wrap_pyfunction!(solve_traction, m)?)?;
    m.add_function(wrap_pyfunction!(effective_modulus, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate_load_cases_py, m)?)?;
    m.add_function(wrap_pyfunction!(build_surface_py, m)?)?;
    m.add_function(wrap_pyfunction!(minkowski_norm_py, m)?)?;
    Ok(())
}

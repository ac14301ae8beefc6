//! Linear-elastic plane-strain finite element analysis on structured meshes.
//!
//! Solves the 2–3 plane RVE problem with 4-node quadrilaterals: assembly into
//! a band matrix, boundary conditions, a direct SPD solve, Gauss-point stress
//! recovery and volume-averaged (homogenized) quantities.
//!
//! Two load modes exist:
//!
//! * **Traction** — the boundary carries the consistent traction field of a
//!   target uniform stress (σx, σy, τxy) on all four edges; three pin
//!   constraints block rigid-body motion and carry no load. Any homogeneous
//!   plate then reproduces the uniform state exactly (patch test), and the
//!   RVE-level volume-averaged in-plane stress equals the applied tensor.
//! * **Displacement** — rollers on edges AD (direction 2) and AB
//!   (direction 3) with a prescribed normal displacement on edge BC, the
//!   configuration used for effective-modulus measurements.

mod element;
mod solver;

pub use element::{
    b_matrix, constitutive_plane_strain, element_mean_strain, element_stiffness, GAUSS_POINTS,
};
pub use solver::{relative_residual, BandCholesky, BandMatrix};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::QuadMesh;
use crate::microgen::Phase;

/// Required relative residual of every linear solve.
pub const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum FeaError {
    #[error("singular element Jacobian (det = {det})")]
    SingularJacobian { det: f64 },
    #[error("stiffness matrix not positive definite at row {row} (pivot = {pivot})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("solver failed: relative residual {residual:e} exceeds {tolerance:e}")]
    SolverFailure { residual: f64, tolerance: f64 },
    #[error("invalid material: {0}")]
    InvalidMaterial(String),
    #[error("homogenization group {index} has no elements")]
    EmptyRegion { index: usize },
}

/// Isotropic linear-elastic material with brittle principal-stress limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Material {
    /// Young's modulus, psi.
    pub e: f64,
    /// Poisson's ratio.
    pub nu: f64,
    /// Principal failure stress in tension, psi (> 0).
    pub sigma_f_t: f64,
    /// Principal failure stress in compression, psi (stored as a positive magnitude).
    pub sigma_f_c: f64,
}

impl Material {
    pub fn new(e: f64, nu: f64, sigma_f_t: f64, sigma_f_c: f64) -> Result<Self, FeaError> {
        if !e.is_finite() || e <= 0.0 {
            return Err(FeaError::InvalidMaterial(format!("E must be > 0, got {e}")));
        }
        if !(0.0..0.5).contains(&nu) {
            return Err(FeaError::InvalidMaterial(format!("nu must lie in [0, 0.5), got {nu}")));
        }
        if !(sigma_f_t.is_finite() && sigma_f_t > 0.0 && sigma_f_c.is_finite() && sigma_f_c > 0.0) {
            return Err(FeaError::InvalidMaterial(
                "failure stresses must be positive magnitudes".into(),
            ));
        }
        Ok(Self { e, nu, sigma_f_t, sigma_f_c })
    }

    /// T800 carbon fiber.
    pub fn t800_fiber() -> Self {
        Self { e: 2.25e6, nu: 0.25, sigma_f_t: 35_000.0, sigma_f_c: 35_000.0 }
    }

    /// F3900 epoxy matrix.
    pub fn f3900_matrix() -> Self {
        Self { e: 4.09e5, nu: 0.387, sigma_f_t: 15_375.0, sigma_f_c: 23_000.0 }
    }
}

/// Fiber and matrix materials for a two-phase run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialSet {
    pub fiber: Material,
    pub matrix: Material,
}

impl Default for MaterialSet {
    fn default() -> Self {
        Self { fiber: Material::t800_fiber(), matrix: Material::f3900_matrix() }
    }
}

impl MaterialSet {
    pub fn for_phase(&self, phase: Phase) -> &Material {
        match phase {
            Phase::Fiber => &self.fiber,
            Phase::Matrix => &self.matrix,
        }
    }
}

/// Plane-strain stress state (τxz = τyz = 0), psi.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StressTensor4 {
    pub sx: f64,
    pub sy: f64,
    pub sz: f64,
    pub txy: f64,
}

impl StressTensor4 {
    pub fn new(sx: f64, sy: f64, sz: f64, txy: f64) -> Self {
        Self { sx, sy, sz, txy }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.sx, self.sy, self.sz, self.txy]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self { sx: a[0], sy: a[1], sz: a[2], txy: a[3] }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { sx: s * self.sx, sy: s * self.sy, sz: s * self.sz, txy: s * self.txy }
    }

    /// Principal stresses in ascending order (σ1 ≤ σ2 ≤ σ3). σz is itself a
    /// principal value because the out-of-plane shears vanish; the other two
    /// are the eigenvalues of the in-plane 2×2 block.
    pub fn principal(&self) -> [f64; 3] {
        let center = 0.5 * (self.sx + self.sy);
        let radius = (0.25 * (self.sx - self.sy).powi(2) + self.txy * self.txy).sqrt();
        let mut p = [center - radius, center + radius, self.sz];
        p.sort_by(|a, b| a.partial_cmp(b).unwrap());
        p
    }
}

/// Principal stresses of a plane-strain tensor, σ1 ≤ σ2 ≤ σ3.
pub fn principal_stresses(s: &StressTensor4) -> [f64; 3] {
    s.principal()
}

/// Boundary conditions for one solve; exactly one load mode per run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryConditions {
    /// Consistent edge tractions of the uniform target stress on all four
    /// edges plus rigid-body pins (corner A fixed, corner B held vertically).
    Traction { sx: f64, sy: f64, txy: f64 },
    /// Rollers (AD in direction 2, AB in direction 3) and a prescribed
    /// normal displacement on BC equal to `strain · W`; CD stays free.
    DisplacementX { strain: f64 },
}

/// Results of one linear solve.
#[derive(Debug, Clone)]
pub struct SolveResult {
    /// Nodal displacements, DOF-ordered (u0, v0, u1, v1, ...).
    pub displacements: Vec<f64>,
    /// Per-element stress, the mean over the element's four Gauss points.
    pub stresses: Vec<StressTensor4>,
    /// Per-element mean strain (εx, εy, γxy).
    pub strains: Vec<[f64; 3]>,
    /// Element volumes (area × unit thickness).
    pub volumes: Vec<f64>,
    /// Relative residual of the constrained linear system.
    pub residual: f64,
}

/// Per-phase element stiffness and recovery operators for one structured
/// mesh. Every element is an identical square, so the operators are built
/// once and shared.
struct ElementKernel {
    k_fiber: [[f64; 8]; 8],
    k_matrix: [[f64; 8]; 8],
    b_gps: [[[f64; 8]; 3]; 4],
    area: f64,
}

impl ElementKernel {
    fn new(mesh: &QuadMesh, materials: &MaterialSet) -> Result<Self, FeaError> {
        let h = f64::from(mesh.window_px) / f64::from(mesh.divisions);
        let coords = [[0.0, 0.0], [h, 0.0], [h, h], [0.0, h]];
        let mut b_gps = [[[0.0; 8]; 3]; 4];
        for (g, gp) in GAUSS_POINTS.iter().enumerate() {
            let (b, _) = b_matrix(&coords, gp[0], gp[1])?;
            b_gps[g] = b;
        }
        Ok(Self {
            k_fiber: element_stiffness(&coords, &materials.fiber)?,
            k_matrix: element_stiffness(&coords, &materials.matrix)?,
            b_gps,
            area: h * h,
        })
    }

    fn stiffness(&self, phase: Phase) -> &[[f64; 8]; 8] {
        match phase {
            Phase::Fiber => &self.k_fiber,
            Phase::Matrix => &self.k_matrix,
        }
    }

    /// Gauss-mean strain for an element displacement vector.
    fn mean_strain(&self, u: &[f64; 8]) -> [f64; 3] {
        let mut strain = [0.0f64; 3];
        for b in &self.b_gps {
            for r in 0..3 {
                strain[r] += (0..8).map(|c| b[r][c] * u[c]).sum::<f64>();
            }
        }
        strain.map(|s| s / 4.0)
    }
}

fn dof_bandwidth(mesh: &QuadMesh) -> usize {
    2 * (mesh.divisions as usize + 2) + 1
}

fn gather(mesh: &QuadMesh, displacements: &[f64], e: usize) -> [f64; 8] {
    let mut u = [0.0f64; 8];
    for (i, &n) in mesh.elements[e].iter().enumerate() {
        u[2 * i] = displacements[2 * n as usize];
        u[2 * i + 1] = displacements[2 * n as usize + 1];
    }
    u
}

/// Assemble the unconstrained global stiffness into a band matrix.
fn assemble(mesh: &QuadMesh, kernel: &ElementKernel) -> BandMatrix {
    let n_dof = 2 * mesh.n_nodes();
    let mut k = BandMatrix::new(n_dof, dof_bandwidth(mesh));
    for (e, conn) in mesh.elements.iter().enumerate() {
        let ke = kernel.stiffness(mesh.phase[e]);
        let mut dofs = [0usize; 8];
        for (i, &n) in conn.iter().enumerate() {
            dofs[2 * i] = 2 * n as usize;
            dofs[2 * i + 1] = 2 * n as usize + 1;
        }
        for r in 0..8 {
            for c in 0..8 {
                if dofs[r] >= dofs[c] {
                    k.add(dofs[r], dofs[c], ke[r][c]);
                }
            }
        }
    }
    k
}

/// Nodal forces equivalent to a constant traction on one boundary edge
/// (trapezoidal rule: half weight at the edge ends).
fn add_edge_traction(f: &mut [f64], nodes: &[u32], h: f64, t: [f64; 2]) {
    let last = nodes.len() - 1;
    for (i, &n) in nodes.iter().enumerate() {
        let w = if i == 0 || i == last { 0.5 * h } else { h };
        f[2 * n as usize] += t[0] * w;
        f[2 * n as usize + 1] += t[1] * w;
    }
}

/// Load vector for the traction mode: t = σ·n on each of the four edges.
fn traction_loads(mesh: &QuadMesh, sx: f64, sy: f64, txy: f64) -> Vec<f64> {
    let h = f64::from(mesh.window_px) / f64::from(mesh.divisions);
    let mut f = vec![0.0; 2 * mesh.n_nodes()];
    add_edge_traction(&mut f, &mesh.edge_sets.bc, h, [sx, txy]);
    add_edge_traction(&mut f, &mesh.edge_sets.da, h, [-sx, -txy]);
    add_edge_traction(&mut f, &mesh.edge_sets.cd, h, [txy, sy]);
    add_edge_traction(&mut f, &mesh.edge_sets.ab, h, [-txy, -sy]);
    f
}

/// Rigid-body pins for the traction mode: corner A fully fixed, corner B
/// fixed vertically. Consistent tractions are self-equilibrated, so these
/// carry no load.
fn traction_pins(mesh: &QuadMesh) -> Vec<usize> {
    let a = mesh.edge_sets.ab[0] as usize;
    let b = *mesh.edge_sets.ab.last().unwrap() as usize;
    vec![2 * a, 2 * a + 1, 2 * b + 1]
}

/// A factored traction-mode system; reusable (and shareable across threads)
/// for any number of load cases on the same mesh and materials.
pub struct TractionSolver<'a> {
    mesh: &'a QuadMesh,
    materials: MaterialSet,
    kernel: ElementKernel,
    constrained: BandMatrix,
    factor: BandCholesky,
    pins: Vec<usize>,
}

impl<'a> TractionSolver<'a> {
    pub fn new(mesh: &'a QuadMesh, materials: &MaterialSet) -> Result<Self, FeaError> {
        let kernel = ElementKernel::new(mesh, materials)?;
        let mut k = assemble(mesh, &kernel);
        let pins = traction_pins(mesh);
        for &d in &pins {
            k.isolate(d);
        }
        let constrained = k.clone();
        let factor = k.cholesky()?;
        Ok(Self { mesh, materials: *materials, kernel, constrained, factor, pins })
    }

    /// Solve one load case (σx, σy, τxy in psi).
    pub fn solve_case(&self, sx: f64, sy: f64, txy: f64) -> Result<SolveResult, FeaError> {
        let mut f = traction_loads(self.mesh, sx, sy, txy);
        for &d in &self.pins {
            f[d] = 0.0;
        }
        let u = self.factor.solve(&f);
        let residual = relative_residual(&self.constrained, &u, &f);
        if residual > RESIDUAL_TOL {
            return Err(FeaError::SolverFailure { residual, tolerance: RESIDUAL_TOL });
        }
        Ok(recover(self.mesh, &self.materials, &self.kernel, u, residual))
    }
}

/// Per-element stress/strain recovery from a displacement solution.
fn recover(
    mesh: &QuadMesh,
    materials: &MaterialSet,
    kernel: &ElementKernel,
    displacements: Vec<f64>,
    residual: f64,
) -> SolveResult {
    let ne = mesh.n_elements();
    let mut stresses = Vec::with_capacity(ne);
    let mut strains = Vec::with_capacity(ne);
    let volumes = vec![kernel.area; ne];
    for e in 0..ne {
        let u = gather(mesh, &displacements, e);
        let strain = kernel.mean_strain(&u);
        let mat = materials.for_phase(mesh.phase[e]);
        let d = constitutive_plane_strain(mat);
        let sx = d[0][0] * strain[0] + d[0][1] * strain[1];
        let sy = d[1][0] * strain[0] + d[1][1] * strain[1];
        let txy = d[2][2] * strain[2];
        let sz = mat.nu * (sx + sy);
        stresses.push(StressTensor4 { sx, sy, sz, txy });
        strains.push(strain);
    }
    SolveResult { displacements, stresses, strains, volumes, residual }
}

/// One-shot solve for either load mode.
pub fn solve(
    mesh: &QuadMesh,
    materials: &MaterialSet,
    bc: &BoundaryConditions,
) -> Result<SolveResult, FeaError> {
    match *bc {
        BoundaryConditions::Traction { sx, sy, txy } => {
            TractionSolver::new(mesh, materials)?.solve_case(sx, sy, txy)
        }
        BoundaryConditions::DisplacementX { strain } => solve_displacement(mesh, materials, strain),
    }
}

#[allow(clippy::needless_range_loop)]
fn solve_displacement(
    mesh: &QuadMesh,
    materials: &MaterialSet,
    strain: f64,
) -> Result<SolveResult, FeaError> {
    let kernel = ElementKernel::new(mesh, materials)?;
    let k_free = assemble(mesh, &kernel);
    let n_dof = k_free.n();

    let prescribed = strain * f64::from(mesh.window_px);
    let mut constraints: Vec<(usize, f64)> = Vec::new();
    for &n in &mesh.edge_sets.da {
        constraints.push((2 * n as usize, 0.0));
    }
    for &n in &mesh.edge_sets.ab {
        constraints.push((2 * n as usize + 1, 0.0));
    }
    for &n in &mesh.edge_sets.bc {
        constraints.push((2 * n as usize, prescribed));
    }

    // Move prescribed-displacement columns to the right-hand side, then
    // decouple the constrained DOFs.
    let mut f = vec![0.0; n_dof];
    let hbw = dof_bandwidth(mesh);
    for &(c, v) in &constraints {
        if v != 0.0 {
            let lo = c.saturating_sub(hbw);
            let hi = (c + hbw).min(n_dof - 1);
            for r in lo..=hi {
                if r != c {
                    f[r] -= k_free.get(r, c) * v;
                }
            }
        }
    }
    let mut k = k_free;
    for &(c, v) in &constraints {
        k.isolate(c);
        f[c] = v;
    }

    let constrained = k.clone();
    let factor = k.cholesky()?;
    let u = factor.solve(&f);
    let residual = relative_residual(&constrained, &u, &f);
    if residual > RESIDUAL_TOL {
        return Err(FeaError::SolverFailure { residual, tolerance: RESIDUAL_TOL });
    }
    Ok(recover(mesh, materials, &kernel, u, residual))
}

/// Assembled internal nodal forces `Σₑ Kₑ·uₑ` for a displacement state;
/// at constrained DOFs these are the reactions (minus any applied load).
#[allow(clippy::needless_range_loop)]
pub fn internal_forces(
    mesh: &QuadMesh,
    materials: &MaterialSet,
    displacements: &[f64],
) -> Result<Vec<f64>, FeaError> {
    let kernel = ElementKernel::new(mesh, materials)?;
    let mut f = vec![0.0; 2 * mesh.n_nodes()];
    for e in 0..mesh.n_elements() {
        let ke = kernel.stiffness(mesh.phase[e]);
        let u = gather(mesh, displacements, e);
        for (i, &n) in mesh.elements[e].iter().enumerate() {
            for comp in 0..2 {
                let r = 2 * i + comp;
                let fe: f64 = (0..8).map(|c| ke[r][c] * u[c]).sum();
                f[2 * n as usize + comp] += fe;
            }
        }
    }
    Ok(f)
}

/// Volume-weighted average of per-element scalars, computed as the nested
/// group-then-total mean: each group is averaged over its own volume, then
/// the group means are averaged with the group volumes as weights. `groups`
/// must partition (a subset of) the element set with no empty group.
pub fn homogenize_scalar(
    values: &[f64],
    volumes: &[f64],
    groups: &[Vec<usize>],
) -> Result<f64, FeaError> {
    assert_eq!(values.len(), volumes.len());
    let mut total_weighted = 0.0;
    let mut total_volume = 0.0;
    for (index, group) in groups.iter().enumerate() {
        if group.is_empty() {
            return Err(FeaError::EmptyRegion { index });
        }
        let mut pv = 0.0;
        let mut v = 0.0;
        for &e in group {
            pv += values[e] * volumes[e];
            v += volumes[e];
        }
        let mean = pv / v;
        total_weighted += mean * v;
        total_volume += v;
    }
    Ok(total_weighted / total_volume)
}

/// Component-wise [`homogenize_scalar`] over stress tensors.
pub fn homogenize_stress(
    stresses: &[StressTensor4],
    volumes: &[f64],
    groups: &[Vec<usize>],
) -> Result<StressTensor4, FeaError> {
    let comp = |get: fn(&StressTensor4) -> f64| -> Vec<f64> { stresses.iter().map(get).collect() };
    Ok(StressTensor4 {
        sx: homogenize_scalar(&comp(|s| s.sx), volumes, groups)?,
        sy: homogenize_scalar(&comp(|s| s.sy), volumes, groups)?,
        sz: homogenize_scalar(&comp(|s| s.sz), volumes, groups)?,
        txy: homogenize_scalar(&comp(|s| s.txy), volumes, groups)?,
    })
}

/// Transverse effective modulus E22 and Poisson ratio ν23 from a 0.1%
/// prescribed-displacement run on edge BC.
pub fn effective_modulus(mesh: &QuadMesh, materials: &MaterialSet) -> Result<(f64, f64), FeaError> {
    let applied = 1e-3;
    let result = solve_displacement(mesh, materials, applied)?;
    let all: Vec<usize> = (0..mesh.n_elements()).collect();
    let groups = [all];
    let sx: Vec<f64> = result.stresses.iter().map(|s| s.sx).collect();
    let ey: Vec<f64> = result.strains.iter().map(|s| s[1]).collect();
    let e22 = homogenize_scalar(&sx, &result.volumes, &groups)? / applied;
    let nu23 = -homogenize_scalar(&ey, &result.volumes, &groups)? / applied;
    Ok((e22, nu23))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::pixelate;
    use crate::microgen::{generate, MicrostructureSpec};
    use approx::assert_relative_eq;

    fn homogeneous_mesh(divisions: u32) -> QuadMesh {
        let ms = generate(&MicrostructureSpec::new(200, 0.0, 15.6, 1)).unwrap();
        pixelate(&ms, divisions)
    }

    fn matrix_only() -> MaterialSet {
        MaterialSet { fiber: Material::t800_fiber(), matrix: Material::f3900_matrix() }
    }

    fn assert_uniform(result: &SolveResult, expected: [f64; 4], tol: f64) {
        let mag = expected.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for s in &result.stresses {
            let got = s.as_array();
            for i in 0..4 {
                assert!(
                    (got[i] - expected[i]).abs() <= tol * mag,
                    "component {i}: {} vs {}",
                    got[i],
                    expected[i]
                );
            }
        }
    }

    #[test]
    fn patch_uniaxial_x() {
        let mesh = homogeneous_mesh(8);
        let r = solve(&mesh, &matrix_only(), &BoundaryConditions::Traction {
            sx: 1000.0,
            sy: 0.0,
            txy: 0.0,
        })
        .unwrap();
        assert_uniform(&r, [1000.0, 0.0, 387.0, 0.0], 1e-6);
        assert!(r.residual <= RESIDUAL_TOL);
    }

    #[test]
    fn patch_pure_shear() {
        let mesh = homogeneous_mesh(8);
        let r = solve(&mesh, &matrix_only(), &BoundaryConditions::Traction {
            sx: 0.0,
            sy: 0.0,
            txy: 500.0,
        })
        .unwrap();
        assert_uniform(&r, [0.0, 0.0, 0.0, 500.0], 1e-6);
    }

    #[test]
    fn patch_combined() {
        let mesh = homogeneous_mesh(6);
        let (sx, sy, txy) = (800.0, -400.0, 250.0);
        let r = solve(&mesh, &matrix_only(), &BoundaryConditions::Traction { sx, sy, txy }).unwrap();
        let sz = 0.387 * (sx + sy);
        assert_uniform(&r, [sx, sy, sz, txy], 1e-6);
    }

    #[test]
    fn zero_load_is_zero_everywhere() {
        let mesh = homogeneous_mesh(4);
        let r = solve(&mesh, &matrix_only(), &BoundaryConditions::Traction {
            sx: 0.0,
            sy: 0.0,
            txy: 0.0,
        })
        .unwrap();
        assert!(r.displacements.iter().all(|u| u.abs() < 1e-12));
        assert_uniform(&r, [0.0, 0.0, 0.0, 0.0], 1e-12);
    }

    #[test]
    fn solve_is_linear_in_the_load() {
        let ms = generate(&MicrostructureSpec::new(200, 0.45, 15.6, 9)).unwrap();
        let mesh = pixelate(&ms, 20);
        let mats = matrix_only();
        let solver = TractionSolver::new(&mesh, &mats).unwrap();
        let a = solver.solve_case(700.0, -300.0, 400.0).unwrap();
        let b = solver.solve_case(3.0 * 700.0, 3.0 * -300.0, 3.0 * 400.0).unwrap();
        for (ua, ub) in a.displacements.iter().zip(&b.displacements) {
            assert!((3.0 * ua - ub).abs() <= 1e-10 * ub.abs().max(1e-12));
        }
        for (sa, sb) in a.stresses.iter().zip(&b.stresses) {
            for (x, y) in sa.as_array().iter().zip(sb.as_array()) {
                assert!((3.0 * x - y).abs() <= 1e-10 * y.abs().max(1e-9));
            }
        }
    }

    #[test]
    fn reactions_balance_applied_tractions() {
        let ms = generate(&MicrostructureSpec::new(200, 0.45, 15.6, 5)).unwrap();
        let mesh = pixelate(&ms, 16);
        let mats = matrix_only();
        let (sx, sy, txy) = (900.0, 250.0, -350.0);
        let r = solve(&mesh, &mats, &BoundaryConditions::Traction { sx, sy, txy }).unwrap();
        let fint = internal_forces(&mesh, &mats, &r.displacements).unwrap();
        let f = traction_loads(&mesh, sx, sy, txy);
        // Sum of internal forces must vanish; equivalently reactions (fint − f
        // at the pins) balance the applied load, which is self-equilibrated.
        let scale: f64 = f.iter().map(|v| v.abs()).sum();
        let (mut rx, mut ry) = (0.0, 0.0);
        for i in 0..f.len() / 2 {
            rx += fint[2 * i] - f[2 * i];
            ry += fint[2 * i + 1] - f[2 * i + 1];
        }
        assert!(rx.abs() <= 1e-8 * scale, "ΣFx = {rx}, scale {scale}");
        assert!(ry.abs() <= 1e-8 * scale, "ΣFy = {ry}, scale {scale}");
    }

    #[test]
    fn sz_is_nu_times_inplane_trace() {
        let ms = generate(&MicrostructureSpec::new(200, 0.55, 15.6, 3)).unwrap();
        let mesh = pixelate(&ms, 24);
        let mats = matrix_only();
        let r = solve(&mesh, &mats, &BoundaryConditions::Traction {
            sx: 600.0,
            sy: -200.0,
            txy: 150.0,
        })
        .unwrap();
        for (e, s) in r.stresses.iter().enumerate() {
            let nu = mats.for_phase(mesh.phase[e]).nu;
            assert_eq!(s.sz, nu * (s.sx + s.sy));
        }
    }

    #[test]
    fn principal_ordering_examples() {
        assert_eq!(
            StressTensor4::new(0.0, 0.0, 0.0, 250.0).principal(),
            [-250.0, 0.0, 250.0]
        );
        assert_eq!(
            StressTensor4::new(1000.0, 0.0, 387.0, 0.0).principal(),
            [0.0, 387.0, 1000.0]
        );
    }

    #[test]
    fn principal_matches_symmetric_eigen_oracle() {
        let mut rng = crate::rng::stream(17, "principal-oracle");
        use rand::Rng;
        for _ in 0..200 {
            let s = StressTensor4::new(
                rng.random_range(-1e4..1e4),
                rng.random_range(-1e4..1e4),
                rng.random_range(-1e4..1e4),
                rng.random_range(-1e4..1e4),
            );
            let m = nalgebra::Matrix3::new(s.sx, s.txy, 0.0, s.txy, s.sy, 0.0, 0.0, 0.0, s.sz);
            let mut eig: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
            eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let got = s.principal();
            let scale = eig.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for i in 0..3 {
                assert!(
                    (got[i] - eig[i]).abs() <= 1e-9 * scale,
                    "{got:?} vs {eig:?}"
                );
            }
        }
    }

    #[test]
    fn homogenize_examples() {
        // Uniform field comes back unchanged.
        let v = vec![1.0, 1.0, 1.0];
        let groups = vec![vec![0, 1, 2]];
        assert_eq!(homogenize_scalar(&[5.0, 5.0, 5.0], &v, &groups).unwrap(), 5.0);
        // Hand-computed volume weighting: (4·1 + 8·3)/4 = 7.
        assert_eq!(
            homogenize_scalar(&[4.0, 8.0], &[1.0, 3.0], &[vec![0, 1]]).unwrap(),
            7.0
        );
    }

    #[test]
    fn homogenize_nested_equals_flat_mean() {
        let mut rng = crate::rng::stream(23, "homogenize");
        use rand::Rng;
        let n = 64;
        let values: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let volumes: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..2.0)).collect();
        let groups: Vec<Vec<usize>> = vec![
            (0..20).collect(),
            (20..21).collect(),
            (21..n).collect(),
        ];
        let nested = homogenize_scalar(&values, &volumes, &groups).unwrap();
        let flat: f64 = values.iter().zip(&volumes).map(|(p, v)| p * v).sum::<f64>()
            / volumes.iter().sum::<f64>();
        assert_relative_eq!(nested, flat, max_relative = 1e-12);
    }

    #[test]
    fn homogenize_rejects_empty_group() {
        let err = homogenize_scalar(&[1.0], &[1.0], &[vec![0], vec![]]).unwrap_err();
        assert!(matches!(err, FeaError::EmptyRegion { index: 1 }));
    }

    #[test]
    fn effective_modulus_homogeneous_controls() {
        let mesh = homogeneous_mesh(10);
        // All-matrix plate: E/(1−ν²).
        let (e22, nu23) = effective_modulus(&mesh, &matrix_only()).unwrap();
        let expected = 4.09e5 / (1.0 - 0.387 * 0.387);
        assert!((e22 - expected).abs() <= 0.005 * expected, "E22 = {e22}");
        assert_relative_eq!(nu23, 0.387 / (1.0 - 0.387), max_relative = 1e-6);
        // All-fiber plate.
        let fiber_everywhere = MaterialSet { fiber: Material::t800_fiber(), matrix: Material::t800_fiber() };
        let (e22f, _) = effective_modulus(&mesh, &fiber_everywhere).unwrap();
        let expectedf = 2.25e6 / (1.0 - 0.0625);
        assert!((e22f - expectedf).abs() <= 0.005 * expectedf, "E22 = {e22f}");
    }

    #[test]
    fn material_validation() {
        assert!(Material::new(-1.0, 0.3, 1.0, 1.0).is_err());
        assert!(Material::new(1.0, 0.5, 1.0, 1.0).is_err());
        assert!(Material::new(1.0, 0.3, 0.0, 1.0).is_err());
        assert!(Material::new(2.25e6, 0.25, 35e3, 35e3).is_ok());
    }
}

//! Isoparametric 4-node quadrilateral for plane strain, 2×2 Gauss quadrature.

use super::{FeaError, Material};

/// Gauss abscissa for the 2-point rule.
const G: f64 = 0.577_350_269_189_625_8; // 1/√3

/// The four (ξ, η) integration points; every weight is 1.
pub const GAUSS_POINTS: [[f64; 2]; 4] = [[-G, -G], [G, -G], [G, G], [-G, G]];

/// Plane-strain constitutive matrix (σx, σy, τxy) ← (εx, εy, γxy).
pub fn constitutive_plane_strain(mat: &Material) -> [[f64; 3]; 3] {
    let c = mat.e / ((1.0 + mat.nu) * (1.0 - 2.0 * mat.nu));
    [
        [c * (1.0 - mat.nu), c * mat.nu, 0.0],
        [c * mat.nu, c * (1.0 - mat.nu), 0.0],
        [0.0, 0.0, c * (1.0 - 2.0 * mat.nu) / 2.0],
    ]
}

/// Shape-function derivatives with respect to (ξ, η) at a natural point.
fn shape_derivatives(xi: f64, eta: f64) -> [[f64; 2]; 4] {
    [
        [-0.25 * (1.0 - eta), -0.25 * (1.0 - xi)],
        [0.25 * (1.0 - eta), -0.25 * (1.0 + xi)],
        [0.25 * (1.0 + eta), 0.25 * (1.0 + xi)],
        [-0.25 * (1.0 + eta), 0.25 * (1.0 - xi)],
    ]
}

/// Strain-displacement matrix and Jacobian determinant at one Gauss point.
///
/// Rows of `b` are (εx, εy, γxy); columns follow the (u1,v1,...,u4,v4) DOF
/// order.
pub fn b_matrix(coords: &[[f64; 2]; 4], xi: f64, eta: f64) -> Result<([[f64; 8]; 3], f64), FeaError> {
    let dn = shape_derivatives(xi, eta);
    let mut j = [[0.0f64; 2]; 2];
    for (i, d) in dn.iter().enumerate() {
        j[0][0] += d[0] * coords[i][0];
        j[0][1] += d[0] * coords[i][1];
        j[1][0] += d[1] * coords[i][0];
        j[1][1] += d[1] * coords[i][1];
    }
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    if det <= 0.0 || !det.is_finite() {
        return Err(FeaError::SingularJacobian { det });
    }
    let inv = [
        [j[1][1] / det, -j[0][1] / det],
        [-j[1][0] / det, j[0][0] / det],
    ];
    let mut b = [[0.0f64; 8]; 3];
    for (i, d) in dn.iter().enumerate() {
        let dx = inv[0][0] * d[0] + inv[0][1] * d[1];
        let dy = inv[1][0] * d[0] + inv[1][1] * d[1];
        b[0][2 * i] = dx;
        b[1][2 * i + 1] = dy;
        b[2][2 * i] = dy;
        b[2][2 * i + 1] = dx;
    }
    Ok((b, det))
}

/// 8×8 element stiffness, `Σ BᵀDB w |J|` over the 2×2 rule (unit thickness).
#[allow(clippy::needless_range_loop)]
pub fn element_stiffness(
    coords: &[[f64; 2]; 4],
    mat: &Material,
) -> Result<[[f64; 8]; 8], FeaError> {
    let d = constitutive_plane_strain(mat);
    let mut k = [[0.0f64; 8]; 8];
    for gp in &GAUSS_POINTS {
        let (b, det) = b_matrix(coords, gp[0], gp[1])?;
        // db = D·B (3×8)
        let mut db = [[0.0f64; 8]; 3];
        for r in 0..3 {
            for c in 0..8 {
                db[r][c] = (0..3).map(|t| d[r][t] * b[t][c]).sum();
            }
        }
        for r in 0..8 {
            for c in 0..8 {
                k[r][c] += det * (0..3).map(|t| b[t][r] * db[t][c]).sum::<f64>();
            }
        }
    }
    Ok(k)
}

/// Gauss-point-mean strain (εx, εy, γxy) and element area for displacements `u`.
pub fn element_mean_strain(
    coords: &[[f64; 2]; 4],
    u: &[f64; 8],
) -> Result<([f64; 3], f64), FeaError> {
    let mut strain = [0.0f64; 3];
    let mut area = 0.0;
    for gp in &GAUSS_POINTS {
        let (b, det) = b_matrix(coords, gp[0], gp[1])?;
        for r in 0..3 {
            strain[r] += (0..8).map(|c| b[r][c] * u[c]).sum::<f64>();
        }
        area += det;
    }
    for s in &mut strain {
        *s /= GAUSS_POINTS.len() as f64;
    }
    Ok((strain, area))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::SMatrix;

    fn unit_square() -> [[f64; 2]; 4] {
        [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]
    }

    fn matrix_material() -> Material {
        Material::f3900_matrix()
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn stiffness_is_symmetric_with_zero_rigid_modes() {
        let k = element_stiffness(&unit_square(), &matrix_material()).unwrap();
        let max = k.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        for r in 0..8 {
            for c in 0..8 {
                assert!((k[r][c] - k[c][r]).abs() <= 1e-12 * max);
            }
        }
        // Uniform x-translation produces no force.
        let ux = [1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0];
        for r in 0..8 {
            let f: f64 = (0..8).map(|c| k[r][c] * ux[c]).sum();
            assert!(f.abs() <= 1e-9 * max);
        }
    }

    #[test]
    fn eigenvalue_counts_match_rigid_modes() {
        let k = element_stiffness(&unit_square(), &matrix_material()).unwrap();
        let m = SMatrix::<f64, 8, 8>::from_fn(|r, c| k[r][c]);
        let eigen = m.symmetric_eigenvalues();
        let max = eigen.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let zeros = eigen.iter().filter(|v| v.abs() <= 1e-8 * max).count();
        let positive = eigen.iter().filter(|v| **v > 1e-8 * max).count();
        assert_eq!(zeros, 3, "eigenvalues {eigen:?}");
        assert_eq!(positive, 5);
    }

    #[test]
    fn degenerate_quad_is_rejected() {
        // Collapsed to a line.
        let coords = [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0]];
        assert!(matches!(
            element_stiffness(&coords, &matrix_material()),
            Err(FeaError::SingularJacobian { .. })
        ));
    }

    /// Discrete strain energy evaluated without the production B-matrix:
    /// shape functions are written out directly and every derivative and the
    /// Jacobian come from central differences of the isoparametric map.
    fn energy_oracle(coords: &[[f64; 2]; 4], mat: &Material, u: &[f64; 8]) -> f64 {
        let shape = |xi: f64, eta: f64| -> [f64; 4] {
            [
                0.25 * (1.0 - xi) * (1.0 - eta),
                0.25 * (1.0 + xi) * (1.0 - eta),
                0.25 * (1.0 + xi) * (1.0 + eta),
                0.25 * (1.0 - xi) * (1.0 + eta),
            ]
        };
        let interp = |xi: f64, eta: f64, values: &dyn Fn(usize) -> f64| -> f64 {
            let n = shape(xi, eta);
            (0..4).map(|i| n[i] * values(i)).sum()
        };
        let c = mat.e / ((1.0 + mat.nu) * (1.0 - 2.0 * mat.nu));
        let d = [
            [c * (1.0 - mat.nu), c * mat.nu, 0.0],
            [c * mat.nu, c * (1.0 - mat.nu), 0.0],
            [0.0, 0.0, c * (1.0 - 2.0 * mat.nu) / 2.0],
        ];
        let h = 1e-5;
        let mut energy = 0.0;
        for gp in &GAUSS_POINTS {
            let (xi, eta) = (gp[0], gp[1]);
            // Natural-coordinate gradients of x, y, u, v by central differences.
            let grad = |values: &dyn Fn(usize) -> f64| -> [f64; 2] {
                [
                    (interp(xi + h, eta, values) - interp(xi - h, eta, values)) / (2.0 * h),
                    (interp(xi, eta + h, values) - interp(xi, eta - h, values)) / (2.0 * h),
                ]
            };
            let gx = grad(&|i| coords[i][0]);
            let gy = grad(&|i| coords[i][1]);
            let gu = grad(&|i| u[2 * i]);
            let gv = grad(&|i| u[2 * i + 1]);
            let det = gx[0] * gy[1] - gx[1] * gy[0];
            // Chain rule: d/dx = (gy[1]·d/dξ − gy[0]·d/dη)/det, etc.
            let du_dx = (gy[1] * gu[0] - gy[0] * gu[1]) / det;
            let du_dy = (-gx[1] * gu[0] + gx[0] * gu[1]) / det;
            let dv_dx = (gy[1] * gv[0] - gy[0] * gv[1]) / det;
            let dv_dy = (-gx[1] * gv[0] + gx[0] * gv[1]) / det;
            let eps = [du_dx, dv_dy, du_dy + dv_dx];
            let mut w = 0.0;
            for r in 0..3 {
                for t in 0..3 {
                    w += eps[r] * d[r][t] * eps[t];
                }
            }
            energy += 0.5 * w * det;
        }
        energy
    }

    #[test]
    fn stiffness_matches_energy_hessian() {
        // Mildly distorted quad, still convex.
        let coords = [[0.0, 0.0], [1.3, 0.1], [1.1, 1.2], [-0.1, 0.9]];
        let mat = matrix_material();
        let k = element_stiffness(&coords, &mat).unwrap();
        let max = k.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        let h = 0.1;
        for i in 0..8 {
            for j in 0..8 {
                let mut up = [0.0f64; 8];
                let mut e = [0.0f64; 4];
                for (s, signs) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)]
                    .iter()
                    .enumerate()
                {
                    up.fill(0.0);
                    up[i] += signs.0 * h;
                    up[j] += signs.1 * h;
                    e[s] = energy_oracle(&coords, &mat, &up);
                }
                let fd = (e[0] - e[1] - e[2] + e[3]) / (4.0 * h * h);
                assert!(
                    (fd - k[i][j]).abs() <= 1e-6 * max,
                    "K[{i}][{j}] = {} vs finite-difference {fd}",
                    k[i][j]
                );
            }
        }
    }

    #[test]
    fn mean_strain_recovers_affine_field() {
        let coords = unit_square();
        // u = 0.002·x, v = −0.001·y  →  εx = 0.002, εy = −0.001, γ = 0.
        let mut u = [0.0f64; 8];
        for i in 0..4 {
            u[2 * i] = 0.002 * coords[i][0];
            u[2 * i + 1] = -0.001 * coords[i][1];
        }
        let (strain, area) = element_mean_strain(&coords, &u).unwrap();
        assert_relative_eq!(strain[0], 0.002, max_relative = 1e-12);
        assert_relative_eq!(strain[1], -0.001, max_relative = 1e-12);
        assert!(strain[2].abs() < 1e-15);
        assert_relative_eq!(area, 1.0, max_relative = 1e-12);
    }
}

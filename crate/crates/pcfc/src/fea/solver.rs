//! Banded symmetric positive-definite direct solver.
//!
//! The structured grid gives the global stiffness a fixed half-bandwidth, so
//! a band Cholesky factorization is both simple and fast: O(n·b²) to factor
//! and O(n·b) per right-hand side, which is what the load-grid batches need
//! (one factorization, hundreds of solves).

use super::FeaError;

/// Symmetric band matrix storing the lower band row-wise.
///
/// Entry `(r, c)` with `r − hbw ≤ c ≤ r` lives at `data[r·(hbw+1) + c − r + hbw]`.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    hbw: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn new(n: usize, hbw: usize) -> Self {
        Self {
            n,
            hbw,
            data: vec![0.0; n * (hbw + 1)],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn slot(&self, r: usize, c: usize) -> usize {
        debug_assert!(c <= r && r - c <= self.hbw);
        r * (self.hbw + 1) + c + self.hbw - r
    }

    /// Read entry `(r, c)` of the full symmetric matrix.
    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (r, c) = if r >= c { (r, c) } else { (c, r) };
        if r - c > self.hbw {
            0.0
        } else {
            self.data[self.slot(r, c)]
        }
    }

    /// Accumulate into the lower-triangle entry `(r, c)`, `r ≥ c`.
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        let s = self.slot(r, c);
        self.data[s] += v;
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        let s = self.slot(r, c);
        self.data[s] = v;
    }

    /// Zero row/column `d` and place 1 on the diagonal.
    pub fn isolate(&mut self, d: usize) {
        let lo = d.saturating_sub(self.hbw);
        for c in lo..d {
            self.set(d, c, 0.0);
        }
        let hi = (d + self.hbw).min(self.n - 1);
        for r in d + 1..=hi {
            self.set(r, d, 0.0);
        }
        self.set(d, d, 1.0);
    }

    /// y = A·x with the symmetric extension of the stored band.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        for r in 0..self.n {
            let lo = r.saturating_sub(self.hbw);
            let base = r * (self.hbw + 1) + self.hbw - r;
            for c in lo..r {
                let v = self.data[base + c];
                y[r] += v * x[c];
                y[c] += v * x[r];
            }
            y[r] += self.data[base + r] * x[r];
        }
    }

    /// In-place band Cholesky, A = L·Lᵀ. Fails on non-SPD input.
    #[allow(clippy::needless_range_loop)]
    pub fn cholesky(mut self) -> Result<BandCholesky, FeaError> {
        let hbw = self.hbw;
        for r in 0..self.n {
            let lo = r.saturating_sub(hbw);
            for c in lo..=r {
                let start = lo.max(c.saturating_sub(hbw));
                let mut sum = self.data[self.slot(r, c)];
                for t in start..c {
                    sum -= self.data[self.slot(r, t)] * self.data[self.slot(c, t)];
                }
                if c < r {
                    let s = self.slot(r, c);
                    self.data[s] = sum / self.data[self.slot(c, c)];
                } else {
                    if sum <= 0.0 || !sum.is_finite() {
                        return Err(FeaError::NotPositiveDefinite { row: r, pivot: sum });
                    }
                    let s = self.slot(r, r);
                    self.data[s] = sum.sqrt();
                }
            }
        }
        Ok(BandCholesky { factor: self })
    }
}

/// Factorized system; `solve` may be called concurrently from many threads.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    factor: BandMatrix,
}

impl BandCholesky {
    #[allow(clippy::needless_range_loop)]
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let f = &self.factor;
        let n = f.n;
        let hbw = f.hbw;
        let mut x = rhs.to_vec();
        // Forward: L·y = b.
        for r in 0..n {
            let lo = r.saturating_sub(hbw);
            let base = r * (hbw + 1) + hbw - r;
            let mut sum = x[r];
            for c in lo..r {
                sum -= f.data[base + c] * x[c];
            }
            x[r] = sum / f.data[base + r];
        }
        // Backward: Lᵀ·x = y.
        for r in (0..n).rev() {
            let hi = (r + hbw).min(n - 1);
            let mut sum = x[r];
            for c in r + 1..=hi {
                sum -= f.data[f.slot(c, r)] * x[c];
            }
            x[r] = sum / f.data[f.slot(r, r)];
        }
        x
    }
}

/// Relative residual ‖Ax − b‖₂ / ‖b‖₂ (zero when b = 0).
pub fn relative_residual(a: &BandMatrix, x: &[f64], b: &[f64]) -> f64 {
    let mut ax = vec![0.0; b.len()];
    a.matvec(x, &mut ax);
    let num: f64 = ax
        .iter()
        .zip(b)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt();
    let den: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        num / den
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::Rng;

    fn random_spd_band(n: usize, hbw: usize, seed: u64) -> BandMatrix {
        let mut rng = crate::rng::stream(seed, "solver-test");
        let mut a = BandMatrix::new(n, hbw);
        for r in 0..n {
            for c in r.saturating_sub(hbw)..r {
                a.set(r, c, rng.random_range(-1.0..1.0));
            }
            // Diagonal dominance keeps it SPD.
            a.set(r, r, 2.0 * hbw as f64 + rng.random_range(1.0..2.0));
        }
        a
    }

    #[test]
    fn matches_dense_cholesky() {
        let n = 40;
        let a = random_spd_band(n, 5, 1);
        let dense = DMatrix::from_fn(n, n, |r, c| a.get(r, c));
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();

        let x = a.clone().cholesky().unwrap().solve(&b);
        let x_ref = dense
            .cholesky()
            .unwrap()
            .solve(&nalgebra::DVector::from_column_slice(&b));
        for i in 0..n {
            assert!((x[i] - x_ref[i]).abs() < 1e-10, "i={i}");
        }
        assert!(relative_residual(&a, &x, &b) < 1e-12);
    }

    #[test]
    fn rejects_indefinite_matrix() {
        let mut a = BandMatrix::new(3, 1);
        a.set(0, 0, 1.0);
        a.set(1, 1, -1.0);
        a.set(2, 2, 1.0);
        assert!(matches!(
            a.cholesky(),
            Err(FeaError::NotPositiveDefinite { row: 1, .. })
        ));
    }

    #[test]
    fn isolate_decouples_a_dof() {
        let mut a = random_spd_band(10, 3, 2);
        a.isolate(4);
        let mut b = vec![0.0; 10];
        b[4] = 7.5;
        let x = a.clone().cholesky().unwrap().solve(&b);
        assert!((x[4] - 7.5).abs() < 1e-12);
    }

    #[test]
    fn zero_rhs_gives_zero_solution() {
        let a = random_spd_band(12, 2, 3);
        let x = a.clone().cholesky().unwrap().solve(&[0.0; 12]);
        assert!(x.iter().all(|v| *v == 0.0));
        assert_eq!(relative_residual(&a, &x, &[0.0; 12]), 0.0);
    }
}

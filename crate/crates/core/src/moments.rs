//! Gross-return moments implied by the latent distribution.
//!
//! For `R = exp(z)` with `z ~ N(μ, Σ)`:
//! `E[R_i] = exp(μ_i + Σ_ii/2)`, `Cov(R_i, R_j) = E[R_i]·E[R_j]·(exp(Σ_ij) − 1)`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::latent::LatentDistribution;

/// Mean and covariance of gross returns over the asset universe ordered
/// liquid assets first, then illiquid assets.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnMoments {
    pub mean: Vec<f64>,
    pub cov: DMatrix<f64>,
    pub n_liq: usize,
    pub n_ill: usize,
}

impl ReturnMoments {
    pub fn from_latent(dist: &LatentDistribution) -> Self {
        let l = dist.layout();
        let idx: Vec<usize> = l.ret_liq.clone().chain(l.ret_ill.clone()).collect();
        let (mu, sig) = (dist.mean(), dist.cov());
        let mean: Vec<f64> = idx.iter().map(|&i| (mu[i] + 0.5 * sig[(i, i)]).exp()).collect();
        let n = idx.len();
        let cov = DMatrix::from_fn(n, n, |a, b| mean[a] * mean[b] * sig[(idx[a], idx[b])].exp_m1());
        Self {
            mean,
            cov,
            n_liq: dist.n_liq(),
            n_ill: dist.n_ill(),
        }
    }

    pub fn liquid_mean(&self) -> &[f64] {
        &self.mean[..self.n_liq]
    }

    pub fn liquid_cov(&self) -> DMatrix<f64> {
        self.cov.view((0, 0), (self.n_liq, self.n_liq)).into_owned()
    }

    /// Index of the liquid asset with the smallest return variance (the cash
    /// asset in the shipped presets).
    pub fn cash_index(&self) -> Option<usize> {
        (0..self.n_liq).min_by(|&a, &b| self.cov[(a, a)].total_cmp(&self.cov[(b, b)]))
    }
}

/// Rows `r_k` with `Σ_k (r_kᵀ y)² = yᵀ cov y`, one per positive eigenvalue;
/// directions with (numerically) zero variance are dropped.
pub fn risk_factor_rows(cov: &DMatrix<f64>) -> Vec<Vec<f64>> {
    let eig = SymmetricEigen::new(cov.clone());
    let scale = eig.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let cutoff = 1e-14 * scale.max(f64::MIN_POSITIVE);
    let mut rows = Vec::new();
    for (k, &l) in eig.eigenvalues.iter().enumerate() {
        if l > cutoff {
            let s = l.sqrt();
            rows.push(eig.eigenvectors.column(k).iter().map(|v| v * s).collect());
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_rows_reproduce_quadratic_form() {
        let cov = DMatrix::from_row_slice(3, 3, &[0.04, 0.01, 0.0, 0.01, 0.09, 0.0, 0.0, 0.0, 0.0]);
        let rows = risk_factor_rows(&cov);
        assert_eq!(rows.len(), 2);
        let y = [0.3, -1.2, 5.0];
        let q: f64 = rows.iter().map(|r| r.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>().powi(2)).sum();
        let want = (0..3).map(|i| (0..3).map(|j| y[i] * cov[(i, j)] * y[j]).sum::<f64>()).sum::<f64>();
        assert!((q - want).abs() < 1e-14);
    }
}

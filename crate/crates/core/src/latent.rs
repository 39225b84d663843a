//! The latent normal vector that drives intensities and returns, and the map
//! from one latent sample to a period's realized draw.

use std::ops::Range;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{CoreError, Result};

/// Which latent coordinates feed which quantity.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Layout {
    /// Delayed call intensity `λ¹` (the immediate intensity is `λ¹/2`).
    pub lambda: Range<usize>,
    pub delta: Range<usize>,
    pub ret_ill: Range<usize>,
    pub ret_liq: Range<usize>,
}

impl Layout {
    /// `[λ | δ | R_ill | R_liq]` packed in that order.
    pub fn contiguous(n_ill: usize, n_liq: usize) -> Self {
        Self {
            lambda: 0..n_ill,
            delta: n_ill..2 * n_ill,
            ret_ill: 2 * n_ill..3 * n_ill,
            ret_liq: 3 * n_ill..3 * n_ill + n_liq,
        }
    }

    fn check(&self, n_ill: usize, n_liq: usize) -> Result<()> {
        let dim = 3 * n_ill + n_liq;
        let blocks = [
            ("lambda", &self.lambda, n_ill),
            ("delta", &self.delta, n_ill),
            ("ret_ill", &self.ret_ill, n_ill),
            ("ret_liq", &self.ret_liq, n_liq),
        ];
        let mut covered = vec![false; dim];
        for (name, r, len) in blocks {
            if r.len() != len {
                return Err(CoreError::Layout(format!(
                    "{name} block has {} entries, expected {len}",
                    r.len()
                )));
            }
            for i in r.clone() {
                if i >= dim {
                    return Err(CoreError::Layout(format!("{name} index {i} out of range {dim}")));
                }
                if covered[i] {
                    return Err(CoreError::Layout(format!("coordinate {i} assigned twice")));
                }
                covered[i] = true;
            }
        }
        Ok(())
    }
}

/// One period's realized randomness.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDraw {
    pub r_ill: Vec<f64>,
    pub r_liq: Vec<f64>,
    pub lambda0: Vec<f64>,
    pub lambda1: Vec<f64>,
    pub delta: Vec<f64>,
}

impl JointDraw {
    pub fn n_ill(&self) -> usize {
        self.r_ill.len()
    }

    pub fn n_liq(&self) -> usize {
        self.r_liq.len()
    }
}

/// `z ~ N(mean, cov)` of dimension `3·n_ill + n_liq`.
#[derive(Debug, Clone)]
pub struct LatentDistribution {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    n_ill: usize,
    n_liq: usize,
    layout: Layout,
    /// `factor · factorᵀ = cov`, square so every sample consumes the same
    /// number of normal variates.
    factor: DMatrix<f64>,
}

/// Symmetric part of `m` and the largest absolute asymmetry `|m_ij − m_ji|`.
pub fn symmetrize(m: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let asym = (m - m.transpose()).abs().max();
    ((m + m.transpose()) * 0.5, asym)
}

const SYMMETRY_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;

/// Square root factor `V·diag(√max(λ,0))` of a symmetric PSD matrix.
/// Rows of zero-variance coordinates are exactly zero, so a riskless
/// asset's return is exactly its mean.
pub fn psd_sqrt(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(cov.clone());
    let min = eig.eigenvalues.min();
    if min < -PSD_TOL {
        return Err(CoreError::NotPsd(min));
    }
    let mut f = eig.eigenvectors;
    for (j, &l) in eig.eigenvalues.iter().enumerate() {
        let s = l.max(0.0).sqrt();
        f.column_mut(j).scale_mut(s);
    }
    for i in 0..cov.nrows() {
        if cov[(i, i)] == 0.0 {
            f.row_mut(i).fill(0.0);
        }
    }
    Ok(f)
}

impl LatentDistribution {
    pub fn new(
        mean: Vec<f64>,
        cov: DMatrix<f64>,
        n_ill: usize,
        n_liq: usize,
        layout: Layout,
    ) -> Result<Self> {
        let dim = 3 * n_ill + n_liq;
        if mean.len() != dim || cov.nrows() != dim || cov.ncols() != dim {
            return Err(CoreError::Dimension(format!(
                "latent dimension is {dim} but mean has {} entries and covariance is {}x{}",
                mean.len(),
                cov.nrows(),
                cov.ncols()
            )));
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(CoreError::Argument("non-finite latent parameter".into()));
        }
        layout.check(n_ill, n_liq)?;
        let (_, asym) = symmetrize(&cov);
        if asym > SYMMETRY_TOL {
            return Err(CoreError::NotSymmetric(asym));
        }
        let factor = psd_sqrt(&cov)?;
        Ok(Self {
            mean: DVector::from_vec(mean),
            cov,
            n_ill,
            n_liq,
            layout,
            factor,
        })
    }

    pub fn contiguous(mean: Vec<f64>, cov: DMatrix<f64>, n_ill: usize, n_liq: usize) -> Result<Self> {
        Self::new(mean, cov, n_ill, n_liq, Layout::contiguous(n_ill, n_liq))
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn n_ill(&self) -> usize {
        self.n_ill
    }

    pub fn n_liq(&self) -> usize {
        self.n_liq
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    /// Maps a latent vector to intensities and gross returns.
    pub fn draw_from_latent(&self, z: &[f64]) -> JointDraw {
        let logistic = |v: f64| 1.0 / (1.0 + v.exp());
        let lambda1: Vec<f64> = self.layout.lambda.clone().map(|i| logistic(z[i])).collect();
        JointDraw {
            lambda0: lambda1.iter().map(|l| 0.5 * l).collect(),
            lambda1,
            delta: self.layout.delta.clone().map(|i| logistic(z[i])).collect(),
            r_ill: self.layout.ret_ill.clone().map(|i| z[i].exp()).collect(),
            r_liq: self.layout.ret_liq.clone().map(|i| z[i].exp()).collect(),
        }
    }

    /// Samples `z` into `z` (resized as needed) using exactly `dim` standard
    /// normal variates from `rng`.
    pub fn sample_latent<R: Rng + ?Sized>(&self, rng: &mut R, eps: &mut Vec<f64>, z: &mut Vec<f64>) {
        let n = self.dim();
        eps.clear();
        eps.extend((0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
        z.clear();
        z.extend(self.mean.iter());
        for j in 0..n {
            let e = eps[j];
            if e != 0.0 {
                for i in 0..n {
                    z[i] += self.factor[(i, j)] * e;
                }
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> JointDraw {
        let (mut eps, mut z) = (Vec::new(), Vec::new());
        self.sample_latent(rng, &mut eps, &mut z);
        self.draw_from_latent(&z)
    }
}

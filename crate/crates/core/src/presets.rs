//! Shipped parameter sets.
//!
//! `single_illiquid` is the one-asset intensity/return example used for the
//! response and commitment experiments. `joint_example` adds one riskless
//! and four risky liquid assets; its latent layout is the contiguous
//! `[λ | δ | R_ill | R_liq]` with liquid order `(cash, risky₁..₄)`.

use nalgebra::DMatrix;

use crate::error::Result;
use crate::latent::{symmetrize, LatentDistribution};

/// Latent mean of `(λ-logit, δ-logit, log R)`.
pub const SINGLE_MEAN: [f64; 3] = [-0.700, -0.423, 0.158];

/// Latent covariance as printed; the (0,1)/(1,0) pair disagrees in the last
/// digit and is averaged by [`single_illiquid`].
pub const SINGLE_COV_RAW: [[f64; 3]; 3] = [
    [0.068, 0.072, 0.006],
    [0.073, 0.271, 0.043],
    [0.006, 0.043, 0.079],
];

/// Log-return means over `(illiquid, cash, risky₁..₄)`.
pub const RET_MEAN: [f64; 6] = [0.158, 0.000, 0.072, 0.023, 0.036, 0.046];
pub const RET_STD: [f64; 6] = [0.281, 0.000, 0.206, 0.046, 0.047, 0.162];
pub const RET_CORR: [[f64; 6]; 6] = [
    [1.000, 0.000, 0.422, -0.298, -0.002, 0.261],
    [0.000, 1.000, 0.000, 0.000, 0.000, 0.000],
    [0.422, 0.000, 1.000, -0.843, 0.197, 0.800],
    [-0.298, 0.000, -0.843, 1.000, -0.018, -0.739],
    [-0.002, 0.000, 0.197, -0.018, 1.000, 0.628],
    [0.261, 0.000, 0.800, -0.739, 0.628, 1.000],
];

/// Smoothing weight and commitment cap of the commitment-tracking example.
pub const TRACKING_GAMMA_SMOOTH: f64 = 1.0;
pub const TRACKING_N_LIM: f64 = 0.5;
pub const TRACKING_TARGET: f64 = 1.0;
pub const TRACKING_PERIODS: usize = 20;

/// Proportional feedback gain of the steady-state heuristic.
pub const HEURISTIC_KAPPA: f64 = 0.1;

fn matrix<const N: usize>(rows: &[[f64; N]; N]) -> DMatrix<f64> {
    DMatrix::from_fn(N, N, |i, j| rows[i][j])
}

pub fn single_cov() -> DMatrix<f64> {
    symmetrize(&matrix(&SINGLE_COV_RAW)).0
}

pub fn single_illiquid() -> Result<LatentDistribution> {
    LatentDistribution::contiguous(SINGLE_MEAN.to_vec(), single_cov(), 1, 0)
}

/// Same covariance with both logit means negated: mean intensities near
/// 1/3 (calls) and 0.4 (distributions) instead of 2/3 and 0.6, so capital is
/// called and returned more slowly.
pub const SLOW_MEAN: [f64; 3] = [0.700, 0.423, 0.158];

pub fn single_illiquid_slow() -> Result<LatentDistribution> {
    LatentDistribution::contiguous(SLOW_MEAN.to_vec(), single_cov(), 1, 0)
}

/// Latent mean and covariance of the joint example.
///
/// The return block is `diag(σ)·C·diag(σ)`. The intensity block and its
/// covariance with the illiquid return come from the single-asset example;
/// intensities are uncorrelated with liquid returns.
pub fn joint_parameters() -> (Vec<f64>, DMatrix<f64>) {
    let s = single_cov();
    let mut mean = vec![SINGLE_MEAN[0], SINGLE_MEAN[1]];
    mean.extend_from_slice(&RET_MEAN);
    let mut cov = DMatrix::zeros(8, 8);
    for i in 0..6 {
        for j in 0..6 {
            cov[(2 + i, 2 + j)] = RET_STD[i] * RET_CORR[i][j] * RET_STD[j];
        }
    }
    for i in 0..2 {
        for j in 0..2 {
            cov[(i, j)] = s[(i, j)];
        }
        cov[(i, 2)] = s[(i, 2)];
        cov[(2, i)] = s[(2, i)];
    }
    (mean, cov)
}

pub fn joint_example() -> Result<LatentDistribution> {
    let (mean, cov) = joint_parameters();
    LatentDistribution::contiguous(mean, cov, 1, 5)
}

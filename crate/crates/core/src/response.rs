//! Mean responses of the illiquid system to commitment sequences.
//!
//! Period `t = 1` starts from the zero state; a commitment made in period `t`
//! produces its first calls `λ̄⁰·n_t` in the same period through `Ḡ`.

use nalgebra::DMatrix;

use crate::error::{CoreError, Result};
use crate::mean::MeanMatrices;

/// Mean illiquid outputs for one period.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub i: Vec<f64>,
    pub k: Vec<f64>,
    pub c: Vec<f64>,
    pub d: Vec<f64>,
}

impl Output {
    fn from_stacked(y: &[f64], m: usize) -> Self {
        Self {
            i: y[..m].to_vec(),
            k: y[m..2 * m].to_vec(),
            c: y[2 * m..3 * m].to_vec(),
            d: y[3 * m..4 * m].to_vec(),
        }
    }

    /// `(I, K, C, D)` stacked.
    pub fn stacked(&self) -> Vec<f64> {
        self.i.iter().chain(&self.k).chain(&self.c).chain(&self.d).copied().collect()
    }
}

/// Asymptotic mean output per unit of constant commitment.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyStateGains {
    pub alpha_i: Vec<f64>,
    pub alpha_k: Vec<f64>,
    pub alpha_c: Vec<f64>,
    pub alpha_d: Vec<f64>,
}

/// Iterates the mean dynamics from the zero state under `commitments[t]`
/// and returns the output of every period.
pub fn simulate_mean(mm: &MeanMatrices, commitments: &[Vec<f64>]) -> Vec<Output> {
    let mm = mm.illiquid_part();
    let m = mm.n_ill;
    let mut x = vec![0.0; 2 * m];
    commitments
        .iter()
        .map(|n| {
            let y = mm.output(&x, n);
            x = mm.step(&x, n);
            Output::from_stacked(&y, m)
        })
        .collect()
}

fn check_horizon(t: usize) -> Result<()> {
    if t == 0 {
        return Err(CoreError::Argument("horizon must be at least 1".into()));
    }
    Ok(())
}

/// Unit commitment in every illiquid asset at `t = 1`, nothing afterwards.
pub fn impulse_response(mm: &MeanMatrices, t: usize) -> Result<Vec<Output>> {
    check_horizon(t)?;
    let m = mm.n_ill;
    let seq: Vec<Vec<f64>> = (0..t).map(|k| vec![if k == 0 { 1.0 } else { 0.0 }; m]).collect();
    Ok(simulate_mean(mm, &seq))
}

/// Unit commitment in every illiquid asset in every period.
pub fn step_response(mm: &MeanMatrices, t: usize) -> Result<Vec<Output>> {
    check_horizon(t)?;
    Ok(simulate_mean(mm, &vec![vec![1.0; mm.n_ill]; t]))
}

const POWER_ITERATIONS: usize = 1000;
const POWER_TOL: f64 = 1e-10;

/// Spectral radius by power iteration. When the dominant eigenvalue is not
/// unique in modulus the Rayleigh growth factor oscillates; the estimate then
/// falls back to the geometric mean growth over the second half of the run.
pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    if n == 0 {
        return 0.0;
    }
    // Deterministic start with components in every direction.
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 + 1.0).sqrt() / n as f64).collect();
    let norm = |v: &[f64]| v.iter().map(|e| e * e).sum::<f64>().sqrt();
    let x0 = norm(&x);
    x.iter_mut().for_each(|e| *e /= x0);
    let mut prev = f64::NAN;
    let mut log_growth = Vec::with_capacity(POWER_ITERATIONS);
    for _ in 0..POWER_ITERATIONS {
        let y: Vec<f64> = (0..n).map(|r| (0..n).map(|c| a[(r, c)] * x[c]).sum()).collect();
        let g = norm(&y);
        if g == 0.0 || !g.is_finite() {
            return if g == 0.0 { 0.0 } else { f64::INFINITY };
        }
        if (g - prev).abs() <= POWER_TOL * g.max(1.0) {
            return g;
        }
        prev = g;
        log_growth.push(g.ln());
        x = y.into_iter().map(|e| e / g).collect();
    }
    let tail = &log_growth[log_growth.len() / 2..];
    (tail.iter().sum::<f64>() / tail.len() as f64).exp()
}

/// `α = F̄(I − Ā)⁻¹B̄ + Ḡ` applied to a unit commitment in every asset.
pub fn steady_state_gains(mm: &MeanMatrices) -> Result<SteadyStateGains> {
    let mm = mm.illiquid_part();
    let rho = spectral_radius(&mm.a);
    if !(rho < 1.0) {
        return Err(CoreError::NonConvergent(rho));
    }
    let n = mm.a.nrows();
    let lhs = DMatrix::identity(n, n) - &mm.a;
    let m = mm.n_ill;
    let ones = nalgebra::DVector::from_element(m, 1.0);
    let bu = &mm.b * &ones;
    let x = lhs
        .lu()
        .solve(&bu)
        .ok_or(CoreError::NonConvergent(rho))?;
    let y = &mm.f * x + &mm.g * ones;
    let out = Output::from_stacked(y.as_slice(), m);
    Ok(SteadyStateGains {
        alpha_i: out.i,
        alpha_k: out.k,
        alpha_c: out.c,
        alpha_d: out.d,
    })
}

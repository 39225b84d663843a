//! Risk-return sweeps over the risk tolerance `σ`.
//!
//! Every point starts from `L = 1` in the joint example (no illiquid
//! holdings) and uses the same master seed, so all families and all `σ`
//! values see the same return and intensity draws.

use std::sync::Arc;

use log::warn;
use pacer_conic::SolverSettings;

use crate::dynamics::{JointState, SystemLayout};
use crate::error::{CoreError, Result};
use crate::latent::LatentDistribution;
use crate::mean::{mean_matrices, MeanMatrices};
use crate::moments::ReturnMoments;
use crate::policy::{FullMpc, Policy, SteadyStateHeuristic, TargetAllocation};
use crate::programs::{solve_markowitz, FullMpcModel, MpcConfig};
use crate::response::{steady_state_gains, SteadyStateGains};
use crate::sim::{run_monte_carlo, run_relaxed, MonteCarlo, Stat};

/// Everything the three policy families need, computed once.
#[derive(Debug, Clone)]
pub struct FrontierModel {
    pub dist: LatentDistribution,
    pub mm: Arc<MeanMatrices>,
    pub moments: ReturnMoments,
    pub gains: SteadyStateGains,
    pub mpc: Arc<FullMpcModel>,
    pub cash: usize,
}

impl FrontierModel {
    pub fn new(dist: LatentDistribution, samples: usize, seed: u64) -> Result<Self> {
        let mm = mean_matrices(&dist, SystemLayout::Joint, samples, seed)?;
        Self::from_mean(dist, mm)
    }

    pub fn from_mean(dist: LatentDistribution, mm: MeanMatrices) -> Result<Self> {
        let moments = ReturnMoments::from_latent(&dist);
        let cash = moments
            .cash_index()
            .ok_or_else(|| CoreError::Argument("frontier experiments need a liquid asset".into()))?;
        let gains = steady_state_gains(&mm)?;
        let mpc = Arc::new(FullMpcModel::new(mm.clone(), moments.clone())?);
        Ok(Self {
            dist,
            mm: Arc::new(mm),
            moments,
            gains,
            mpc,
            cash,
        })
    }

    pub fn initial_state(&self) -> JointState {
        JointState::cash(1.0, self.dist.n_ill())
    }

    /// One-period Markowitz weights over `(liquid…, illiquid…)`.
    pub fn markowitz(&self, sigma: f64) -> Result<TargetAllocation> {
        let w = solve_markowitz(&self.moments.mean, &self.moments.cov, sigma, &SolverSettings::default())?;
        TargetAllocation::new(w, self.moments.n_liq)
    }

    pub fn heuristic(&self, sigma: f64, kappa: Option<f64>) -> Result<SteadyStateHeuristic> {
        SteadyStateHeuristic::new(self.markowitz(sigma)?, &self.gains, kappa, self.cash)
    }

    /// MPC at `cfg` with its `σ`, falling back to the heuristic at that `σ`.
    pub fn mpc_policy(&self, cfg: &MpcConfig, kappa: Option<f64>) -> Result<FullMpc> {
        FullMpc::new(Arc::clone(&self.mpc), cfg.clone(), self.heuristic(cfg.sigma, kappa)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PolicyFamily {
    /// Markowitz weights applied to freely tradable illiquids.
    Relaxed,
    Heuristic { kappa: Option<f64> },
    /// The configured `σ` is replaced by each grid value.
    Mpc { cfg: MpcConfig, kappa: Option<f64> },
}

impl PolicyFamily {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Relaxed => "relaxed",
            Self::Heuristic { .. } => "heuristic",
            Self::Mpc { .. } => "mpc",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontierPoint {
    pub policy: String,
    pub sigma: f64,
    pub periods: usize,
    pub paths: usize,
    pub realized_vol: Stat,
    pub realized_ret: Stat,
    /// Zero for the relaxed benchmark, which has no cash flows.
    pub forced_frequency: f64,
    pub fallbacks: usize,
    pub max_accounting_residual: f64,
    pub min_state: f64,
}

#[derive(Debug, Clone)]
pub struct FrontierRun {
    pub points: Vec<FrontierPoint>,
    /// `σ` values whose point could not be produced, with the reason.
    pub failures: Vec<(f64, String)>,
    /// Trajectories of the simulated (non-relaxed) points, in grid order.
    pub runs: Vec<(f64, MonteCarlo)>,
}

/// Evenly spaced grid of `count` values over `[lo, hi]`.
pub fn sigma_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count).map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64).collect(),
    }
}

#[allow(clippy::too_many_arguments)]
pub fn frontier_sweep(
    model: &FrontierModel,
    family: &PolicyFamily,
    sigmas: &[f64],
    periods: usize,
    n_paths: usize,
    master_seed: u64,
    threads: Option<usize>,
    keep_records: bool,
) -> Result<FrontierRun> {
    if sigmas.is_empty() {
        return Err(CoreError::Argument("empty risk grid".into()));
    }
    let mut run = FrontierRun {
        points: Vec::new(),
        failures: Vec::new(),
        runs: Vec::new(),
    };
    for &sigma in sigmas {
        match sweep_point(model, family, sigma, periods, n_paths, master_seed, threads) {
            Ok((point, mc)) => {
                run.points.push(point);
                if let (true, Some(mc)) = (keep_records, mc) {
                    run.runs.push((sigma, mc));
                }
            }
            Err(e) => {
                warn!("{} point at sigma={sigma} failed: {e}", family.name());
                run.failures.push((sigma, e.to_string()));
            }
        }
    }
    Ok(run)
}

fn sweep_point(
    model: &FrontierModel,
    family: &PolicyFamily,
    sigma: f64,
    periods: usize,
    n_paths: usize,
    master_seed: u64,
    threads: Option<usize>,
) -> Result<(FrontierPoint, Option<MonteCarlo>)> {
    let policy: Box<dyn Policy> = match family {
        PolicyFamily::Relaxed => {
            let w = model.markowitz(sigma)?;
            let (ret, vol) = run_relaxed(&model.dist, w.weights(), periods, n_paths, master_seed, threads)?;
            let point = FrontierPoint {
                policy: family.name().into(),
                sigma,
                periods,
                paths: n_paths,
                realized_vol: vol,
                realized_ret: ret,
                forced_frequency: 0.0,
                fallbacks: 0,
                max_accounting_residual: 0.0,
                min_state: 0.0,
            };
            return Ok((point, None));
        }
        PolicyFamily::Heuristic { kappa } => Box::new(model.heuristic(sigma, *kappa)?),
        PolicyFamily::Mpc { cfg, kappa } => {
            let cfg = MpcConfig { sigma, ..cfg.clone() };
            Box::new(model.mpc_policy(&cfg, *kappa)?)
        }
    };
    let mc = run_monte_carlo(&model.dist, policy.as_ref(), &model.initial_state(), periods, n_paths, master_seed, threads)?;
    let s = &mc.summary;
    let point = FrontierPoint {
        policy: family.name().into(),
        sigma,
        periods,
        paths: n_paths,
        realized_vol: s.volatility,
        realized_ret: s.mean_return,
        forced_frequency: s.forced_frequency,
        fallbacks: s.fallbacks,
        max_accounting_residual: s.max_accounting_residual,
        min_state: s.min_state,
    };
    Ok((point, Some(mc)))
}

/// Piecewise-linear interpolation of return at volatility `vol` along a
/// frontier sorted by volatility; clamps outside the sampled range.
pub fn interpolate_return(points: &[FrontierPoint], vol: f64) -> Option<f64> {
    let mut pts: Vec<(f64, f64)> = points.iter().map(|p| (p.realized_vol.mean, p.realized_ret.mean)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (first, last) = (*pts.first()?, *pts.last()?);
    if vol <= first.0 {
        return Some(first.1);
    }
    if vol >= last.0 {
        return Some(last.1);
    }
    pts.windows(2).find(|w| vol <= w[1].0).map(|w| {
        let (a, b) = (w[0], w[1]);
        if b.0 == a.0 {
            b.1.max(a.1)
        } else {
            a.1 + (b.1 - a.1) * (vol - a.0) / (b.0 - a.0)
        }
    })
}

//! Monte Carlo evaluation of policies on the stochastic system.
//!
//! Path `p` of a run with master seed `s` draws from a ChaCha20 stream
//! seeded with `s` on stream number `p`, so every policy sees the same
//! draws on the same path and results do not depend on scheduling. Each
//! period consumes exactly one latent sample.
//!
//! Period order: the policy decides from the current state, the period's
//! draw is sampled, the state advances, and any negative liquid wealth is
//! covered by a forced injection.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::dynamics::{step_illiquid, step_joint, Control, IlliquidState, JointState};
use crate::error::{CoreError, Result};
use crate::latent::{JointDraw, LatentDistribution};
use crate::policy::{CommitmentPolicy, Policy};

/// Tolerance of the per-decision budget check `1ᵀh = L`, per dollar.
const BUDGET_TOL: f64 = 1e-9;

pub fn path_rng(master_seed: u64, path: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(master_seed);
    rng.set_stream(path);
    rng
}

/// Runs `f(path)` for every path, in parallel when allowed, collecting in
/// path order.
fn par_paths<T: Send>(n_paths: usize, threads: Option<usize>, f: impl Fn(u64) -> T + Send + Sync) -> Result<Vec<T>> {
    let run = || (0..n_paths as u64).into_par_iter().map(&f).collect();
    match threads {
        Some(1) => Ok((0..n_paths as u64).map(&f).collect()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CoreError::Argument(format!("thread pool: {e}")))?;
            Ok(pool.install(run))
        }
        None => Ok(run()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Stat {
    pub mean: f64,
    /// Standard error of the mean across independent samples.
    pub se: f64,
}

impl Stat {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        if xs.is_empty() {
            return Self { mean: f64::NAN, se: f64::NAN };
        }
        let mean = xs.iter().sum::<f64>() / n;
        let se = if xs.len() > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
        } else {
            0.0
        };
        Self { mean, se }
    }
}

fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

// ---------------------------------------------------------------------------
// Joint simulation

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodRecord {
    pub t: usize,
    /// State at the start of the period.
    pub state: JointState,
    pub control: Control,
    pub draw: JointDraw,
    pub calls: Vec<f64>,
    pub dists: Vec<f64>,
    /// Liquid wealth before any forced injection.
    pub l_raw: f64,
    pub forced: f64,
    /// State at the start of the next period.
    pub next: JointState,
    pub fallback: bool,
}

impl PeriodRecord {
    pub fn forced_injection(&self) -> bool {
        self.forced > 0.0
    }

    /// `|L_raw − (hᵀR_liq − 1ᵀC + 1ᵀD + s)|` per dollar of wealth.
    pub fn accounting_residual(&self) -> f64 {
        let r: f64 = self.control.h.iter().zip(&self.draw.r_liq).map(|(h, r)| h * r).sum();
        let want = r - self.calls.iter().sum::<f64>() + self.dists.iter().sum::<f64>() + self.control.s;
        let scale = self.state.wealth().abs().max(self.next.wealth().abs()).max(1.0);
        ((self.l_raw - want).abs() + (self.next.l - (self.l_raw + self.forced)).abs()) / scale
    }

    /// `(W_{t+1} − s_t − forced_t)/W_t − 1`; outside cash is not return.
    pub fn realized_return(&self) -> Option<f64> {
        let w = self.state.wealth();
        (w > 0.0).then(|| (self.next.wealth() - self.control.s - self.forced) / w - 1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub policy: String,
    pub master_seed: u64,
    pub path: u64,
    pub periods: Vec<PeriodRecord>,
}

impl TrajectoryRecord {
    pub fn returns(&self) -> Vec<f64> {
        self.periods.iter().filter_map(PeriodRecord::realized_return).collect()
    }

    pub fn injected(&self) -> f64 {
        self.periods.iter().map(|p| p.control.s + p.forced).sum()
    }

    pub fn forced_count(&self) -> usize {
        self.periods.iter().filter(|p| p.forced_injection()).count()
    }

    pub fn max_accounting_residual(&self) -> f64 {
        self.periods.iter().map(PeriodRecord::accounting_residual).fold(0.0, f64::max)
    }

    /// Smallest entry of `(L, I, K)` over all recorded states.
    pub fn min_state(&self) -> f64 {
        self.periods
            .iter()
            .flat_map(|p| p.state.to_vec().into_iter().chain(p.next.to_vec()))
            .fold(f64::INFINITY, f64::min)
    }
}

fn check_decision(u: &Control, state: &JointState, n_liq: usize, n_ill: usize) -> Result<()> {
    if u.h.len() != n_liq || u.n.len() != n_ill {
        return Err(CoreError::Dimension("control does not match the asset universe".into()));
    }
    if u.to_vec().iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(CoreError::Argument(format!("control has negative or non-finite entries: {u:?}")));
    }
    let budget: f64 = u.h.iter().sum();
    if n_liq > 0 && state.l >= 0.0 && (budget - state.l).abs() > BUDGET_TOL * state.l.max(1.0) {
        return Err(CoreError::Argument(format!("allocation sums to {budget}, liquid wealth is {}", state.l)));
    }
    Ok(())
}

pub fn simulate_trajectory(
    dist: &LatentDistribution,
    policy: &mut dyn Policy,
    x0: &JointState,
    periods: usize,
    master_seed: u64,
    path: u64,
) -> Result<TrajectoryRecord> {
    if periods == 0 {
        return Err(CoreError::Argument("need at least one period".into()));
    }
    let (q, m) = (dist.n_liq(), dist.n_ill());
    if x0.ill.n_ill() != m {
        return Err(CoreError::Dimension("initial state does not match the distribution".into()));
    }
    let mut rng = path_rng(master_seed, path);
    let mut state = x0.clone();
    let mut out = Vec::with_capacity(periods);
    for t in 1..=periods {
        let d = policy.decide(t, &state)?;
        check_decision(&d.control, &state, q, m)?;
        let draw = dist.sample(&mut rng);
        let step = step_joint(&state, &d.control, &draw)?;
        let l_raw = step.next.l;
        let forced = (-l_raw).max(0.0);
        let mut next = step.next;
        next.l = l_raw + forced;
        out.push(PeriodRecord {
            t,
            state: std::mem::replace(&mut state, next.clone()),
            control: d.control,
            draw,
            calls: step.calls,
            dists: step.dists,
            l_raw,
            forced,
            next,
            fallback: d.fallback,
        });
    }
    Ok(TrajectoryRecord {
        policy: policy.name(),
        master_seed,
        path,
        periods: out,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsSummary {
    pub policy: String,
    pub paths: usize,
    pub periods: usize,
    /// Per-path mean of per-period realized return, across paths.
    pub mean_return: Stat,
    /// Per-path sample standard deviation of per-period return, across paths.
    pub volatility: Stat,
    pub injected: Stat,
    /// Fraction of path-periods with a forced injection.
    pub forced_frequency: f64,
    pub fallbacks: usize,
    pub max_accounting_residual: f64,
    pub min_state: f64,
}

impl MetricsSummary {
    pub fn from_records(records: &[TrajectoryRecord]) -> Self {
        let per_path: Vec<Vec<f64>> = records.iter().map(TrajectoryRecord::returns).collect();
        let means: Vec<f64> = per_path
            .iter()
            .filter(|r| !r.is_empty())
            .map(|r| r.iter().sum::<f64>() / r.len() as f64)
            .collect();
        let vols: Vec<f64> = per_path.iter().filter(|r| !r.is_empty()).map(|r| sample_std(r)).collect();
        let injected: Vec<f64> = records.iter().map(TrajectoryRecord::injected).collect();
        let path_periods: usize = records.iter().map(|r| r.periods.len()).sum();
        let forced: usize = records.iter().map(TrajectoryRecord::forced_count).sum();
        Self {
            policy: records.first().map(|r| r.policy.clone()).unwrap_or_default(),
            paths: records.len(),
            periods: records.first().map_or(0, |r| r.periods.len()),
            mean_return: Stat::of(&means),
            volatility: Stat::of(&vols),
            injected: Stat::of(&injected),
            forced_frequency: if path_periods > 0 { forced as f64 / path_periods as f64 } else { 0.0 },
            fallbacks: records.iter().flat_map(|r| &r.periods).filter(|p| p.fallback).count(),
            max_accounting_residual: records.iter().map(TrajectoryRecord::max_accounting_residual).fold(0.0, f64::max),
            min_state: records.iter().map(TrajectoryRecord::min_state).fold(f64::INFINITY, f64::min),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MonteCarlo {
    pub summary: MetricsSummary,
    pub records: Vec<TrajectoryRecord>,
}

/// Simulates `n_paths` independent paths with a fresh clone of `policy`
/// each. `threads = None` uses the global rayon pool.
pub fn run_monte_carlo(
    dist: &LatentDistribution,
    policy: &dyn Policy,
    x0: &JointState,
    periods: usize,
    n_paths: usize,
    master_seed: u64,
    threads: Option<usize>,
) -> Result<MonteCarlo> {
    if n_paths == 0 {
        return Err(CoreError::Argument("need at least one path".into()));
    }
    let records = par_paths(n_paths, threads, |p| {
        let mut pol = policy.clone_box();
        simulate_trajectory(dist, pol.as_mut(), x0, periods, master_seed, p)
    })?
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(MonteCarlo {
        summary: MetricsSummary::from_records(&records),
        records,
    })
}

/// Mean allocation `(h, I)/(L + 1ᵀI)` per period, averaged over the paths
/// whose wealth is positive at the start of that period.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationTrace {
    /// `weights[t][asset]` over `(liquid…, illiquid…)`.
    pub weights: Vec<Vec<f64>>,
    /// Zero-wealth path-periods left out of the averages.
    pub excluded: usize,
}

pub fn allocation_trace(records: &[TrajectoryRecord]) -> Result<AllocationTrace> {
    let first = records.first().ok_or_else(|| CoreError::Argument("no trajectories".into()))?;
    let periods = first.periods.len();
    let width = first.periods.first().map_or(0, |p| p.control.h.len() + p.state.ill.n_ill());
    let mut weights = vec![vec![0.0; width]; periods];
    let mut excluded = 0;
    for t in 0..periods {
        let mut count = 0usize;
        for r in records {
            let p = r.periods.get(t).ok_or_else(|| CoreError::Dimension("ragged trajectories".into()))?;
            let w = p.state.wealth();
            if !(w > 0.0) {
                excluded += 1;
                continue;
            }
            count += 1;
            for (acc, v) in weights[t].iter_mut().zip(p.control.h.iter().chain(&p.state.ill.i)) {
                *acc += v / w;
            }
        }
        if count > 0 {
            weights[t].iter_mut().for_each(|v| *v /= count as f64);
        }
    }
    Ok(AllocationTrace { weights, excluded })
}

// ---------------------------------------------------------------------------
// Commitment-only simulation

#[derive(Debug, Clone, PartialEq)]
pub struct CommitmentTrajectory {
    pub policy: String,
    pub path: u64,
    /// Commitments `n_1..n_T`.
    pub n: Vec<Vec<f64>>,
    /// States `x_1..x_{T+1}`, starting from zero.
    pub states: Vec<IlliquidState>,
    pub calls: Vec<Vec<f64>>,
    pub dists: Vec<Vec<f64>>,
    pub fallbacks: usize,
}

impl CommitmentTrajectory {
    /// `sqrt(mean (I_t − I_targ)²)` over `t = start..=T` and all assets.
    pub fn delayed_rms(&self, i_targ: f64, start: usize) -> Result<f64> {
        let t_end = self.n.len();
        if start == 0 || start > t_end {
            return Err(CoreError::Argument(format!("start period {start} outside 1..={t_end}")));
        }
        let errs: Vec<f64> = self.states[start - 1..t_end].iter().flat_map(|s| s.i.clone()).collect();
        Ok(crate::programs::mean_squared_error(&errs, i_targ).sqrt())
    }

    /// Mean of `(I_t − I_targ)²` over `t = 1..=T+1` and all assets.
    pub fn mse(&self, i_targ: f64) -> f64 {
        let all: Vec<f64> = self.states.iter().flat_map(|s| s.i.clone()).collect();
        crate::programs::mean_squared_error(&all, i_targ)
    }
}

pub fn simulate_commitments(
    dist: &LatentDistribution,
    policy: &mut dyn CommitmentPolicy,
    periods: usize,
    master_seed: u64,
    path: u64,
) -> Result<CommitmentTrajectory> {
    if periods == 0 {
        return Err(CoreError::Argument("need at least one period".into()));
    }
    let mut rng = path_rng(master_seed, path);
    let mut state = IlliquidState::zero(dist.n_ill());
    let mut tr = CommitmentTrajectory {
        policy: policy.name(),
        path,
        n: Vec::with_capacity(periods),
        states: vec![state.clone()],
        calls: Vec::new(),
        dists: Vec::new(),
        fallbacks: 0,
    };
    for t in 1..=periods {
        let d = policy.commit(t, &state)?;
        let draw = dist.sample(&mut rng);
        let step = step_illiquid(&state, &d.n, &draw)?;
        state = step.next;
        tr.states.push(state.clone());
        tr.n.push(d.n);
        tr.calls.push(step.calls);
        tr.dists.push(step.dists);
        tr.fallbacks += usize::from(d.fallback);
    }
    Ok(tr)
}

#[derive(Debug, Clone)]
pub struct TrackingSummary {
    pub policy: String,
    pub delayed_rms: Stat,
    pub mse: Stat,
    pub fallbacks: usize,
    pub paths: Vec<CommitmentTrajectory>,
}

#[allow(clippy::too_many_arguments)]
pub fn run_commitment_monte_carlo(
    dist: &LatentDistribution,
    policy: &dyn CommitmentPolicy,
    periods: usize,
    n_paths: usize,
    master_seed: u64,
    i_targ: f64,
    rms_start: usize,
    threads: Option<usize>,
) -> Result<TrackingSummary> {
    if n_paths == 0 {
        return Err(CoreError::Argument("need at least one path".into()));
    }
    let paths = par_paths(n_paths, threads, |p| {
        let mut pol = policy.clone_box();
        simulate_commitments(dist, pol.as_mut(), periods, master_seed, p)
    })?
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let rms = paths.iter().map(|p| p.delayed_rms(i_targ, rms_start)).collect::<Result<Vec<_>>>()?;
    let mse: Vec<f64> = paths.iter().map(|p| p.mse(i_targ)).collect();
    Ok(TrackingSummary {
        policy: policy.name(),
        delayed_rms: Stat::of(&rms),
        mse: Stat::of(&mse),
        fallbacks: paths.iter().map(|p| p.fallbacks).sum(),
        paths,
    })
}

// ---------------------------------------------------------------------------
// Relaxed (fully liquid) benchmark

/// Wealth path `W_1 = 1, W_{t+1} = W_t·(wᵀR_t)` when illiquids could be
/// rebalanced freely; `w` is over `(liquid…, illiquid…)`.
pub fn simulate_relaxed(dist: &LatentDistribution, w: &[f64], periods: usize, master_seed: u64, path: u64) -> Result<Vec<f64>> {
    if w.len() != dist.n_liq() + dist.n_ill() {
        return Err(CoreError::Dimension(format!("{} weights for {} assets", w.len(), dist.n_liq() + dist.n_ill())));
    }
    let mut rng = path_rng(master_seed, path);
    let mut wealth = Vec::with_capacity(periods + 1);
    wealth.push(1.0);
    for _ in 0..periods {
        let d = dist.sample(&mut rng);
        let gross: f64 = d.r_liq.iter().chain(&d.r_ill).zip(w).map(|(r, w)| r * w).sum();
        wealth.push(wealth.last().unwrap() * gross);
    }
    Ok(wealth)
}

/// Realized return statistics of the relaxed benchmark.
pub fn run_relaxed(
    dist: &LatentDistribution,
    w: &[f64],
    periods: usize,
    n_paths: usize,
    master_seed: u64,
    threads: Option<usize>,
) -> Result<(Stat, Stat)> {
    let paths = par_paths(n_paths, threads, |p| simulate_relaxed(dist, w, periods, master_seed, p))?
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let rets: Vec<Vec<f64>> = paths.iter().map(|w| w.windows(2).map(|p| p[1] / p[0] - 1.0).collect()).collect();
    let means: Vec<f64> = rets.iter().map(|r| r.iter().sum::<f64>() / r.len() as f64).collect();
    let vols: Vec<f64> = rets.iter().map(|r| sample_std(r)).collect();
    Ok((Stat::of(&means), Stat::of(&vols)))
}

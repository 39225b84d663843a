//! Decision policies.
//!
//! [`Policy`] maps a joint state to a full control `(h, n, s)`;
//! [`CommitmentPolicy`] maps an illiquid state to commitments only and drives
//! the tracking experiments. Policies are cloned once per simulated path so
//! any memory they keep (such as the previous commitment) is path-local.

use std::sync::Arc;

use log::warn;
use pacer_conic::SolverSettings;

use crate::dynamics::{Control, IlliquidState, JointState};
use crate::error::{CoreError, Result};
use crate::mean::MeanMatrices;
use crate::programs::{build_commitment_qp, build_full_mpc, CommitmentProblem, FullMpcModel, MpcConfig};
use crate::response::SteadyStateGains;

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub control: Control,
    /// The policy could not produce its primary decision and used its
    /// documented fallback.
    pub fallback: bool,
}

pub trait Policy: Send + Sync {
    fn name(&self) -> String;
    /// `t` is the 1-based period index.
    fn decide(&mut self, t: usize, state: &JointState) -> Result<Decision>;
    fn clone_box(&self) -> Box<dyn Policy>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommitmentDecision {
    pub n: Vec<f64>,
    pub fallback: bool,
}

pub trait CommitmentPolicy: Send + Sync {
    fn name(&self) -> String;
    fn commit(&mut self, t: usize, state: &IlliquidState) -> Result<CommitmentDecision>;
    fn clone_box(&self) -> Box<dyn CommitmentPolicy>;
}

/// Target weights over `(liquid…, illiquid…)` on the simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetAllocation {
    theta: Vec<f64>,
    n_liq: usize,
}

impl TargetAllocation {
    pub fn new(theta: Vec<f64>, n_liq: usize) -> Result<Self> {
        let total: f64 = theta.iter().sum();
        if n_liq > theta.len() || theta.iter().any(|v| !(*v >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(CoreError::Argument(format!("{theta:?} is not a simplex point")));
        }
        Ok(Self { theta, n_liq })
    }

    pub fn weights(&self) -> &[f64] {
        &self.theta
    }

    pub fn liquid(&self) -> &[f64] {
        &self.theta[..self.n_liq]
    }

    pub fn illiquid(&self) -> &[f64] {
        &self.theta[self.n_liq..]
    }
}

/// Puts all of `l` into the cash asset.
fn all_cash(l: f64, n_liq: usize, cash: usize) -> Vec<f64> {
    let mut h = vec![0.0; n_liq];
    if n_liq > 0 {
        h[cash] = l;
    }
    h
}

/// Clamps round-off negatives and restores `1ᵀh = L` exactly.
pub fn clean_control(mut u: Control, l: f64, cash: usize) -> Control {
    u.h.iter_mut().chain(u.n.iter_mut()).for_each(|v| *v = v.max(0.0));
    u.s = u.s.max(0.0);
    let total: f64 = u.h.iter().sum();
    if l <= 0.0 {
        u.h.iter_mut().for_each(|v| *v = 0.0);
    } else if total > 0.0 {
        u.h.iter_mut().for_each(|v| *v *= l / total);
    } else {
        u.h = all_cash(l, u.h.len(), cash);
    }
    u
}

// ---------------------------------------------------------------------------
// Commitment-only policies

/// Executes a fixed plan; periods beyond it commit nothing.
#[derive(Debug, Clone)]
pub struct OpenLoop {
    plan: Arc<Vec<Vec<f64>>>,
    n_ill: usize,
}

impl OpenLoop {
    pub fn new(plan: Vec<Vec<f64>>, n_ill: usize) -> Self {
        Self {
            plan: Arc::new(plan),
            n_ill,
        }
    }
}

impl CommitmentPolicy for OpenLoop {
    fn name(&self) -> String {
        "open_loop".into()
    }

    fn commit(&mut self, t: usize, _: &IlliquidState) -> Result<CommitmentDecision> {
        let n = t
            .checked_sub(1)
            .and_then(|i| self.plan.get(i))
            .cloned()
            .unwrap_or_else(|| vec![0.0; self.n_ill]);
        Ok(CommitmentDecision { n, fallback: false })
    }

    fn clone_box(&self) -> Box<dyn CommitmentPolicy> {
        Box::new(self.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanningHorizon {
    /// Plan to the end of an experiment of `T` periods, with the open-loop
    /// weights. On the mean trajectory this reproduces the open-loop plan.
    ShrinkingTo(usize),
    /// Fixed look-ahead of `H` commitments.
    Receding(usize),
}

/// Re-plans commitments from the realized state and executes the first.
#[derive(Debug, Clone)]
pub struct CommitmentMpc {
    mm: Arc<MeanMatrices>,
    i_targ: Vec<f64>,
    gamma_smooth: f64,
    n_lim: Option<f64>,
    horizon: PlanningHorizon,
    settings: SolverSettings,
    previous: Option<Vec<f64>>,
}

impl CommitmentMpc {
    pub fn new(mm: Arc<MeanMatrices>, i_targ: f64, gamma_smooth: f64, n_lim: Option<f64>, horizon: PlanningHorizon) -> Self {
        let m = mm.n_ill;
        Self {
            mm,
            i_targ: vec![i_targ; m],
            gamma_smooth,
            n_lim,
            horizon,
            settings: SolverSettings::default(),
            previous: None,
        }
    }

    pub fn with_settings(mut self, settings: SolverSettings) -> Self {
        self.settings = settings;
        self
    }

    /// The planning problem solved at period `t`.
    pub fn problem(&self, t: usize) -> Result<CommitmentProblem> {
        let mut prob = match self.horizon {
            PlanningHorizon::ShrinkingTo(total) => {
                if t == 0 || t > total {
                    return Err(CoreError::Argument(format!("period {t} outside 1..={total}")));
                }
                let mut p = CommitmentProblem::open_loop(total.max(2), self.i_targ.clone(), self.gamma_smooth, self.n_lim)?;
                p.horizon = total - t + 1;
                p
            }
            PlanningHorizon::Receding(h) => CommitmentProblem::receding(h, self.i_targ.clone(), self.gamma_smooth, self.n_lim),
        };
        prob.previous = self.previous.clone();
        Ok(prob)
    }

    fn plan_first(&self, t: usize, state: &IlliquidState) -> Result<Vec<f64>> {
        let qp = build_commitment_qp(&self.mm, state, &self.problem(t)?)?;
        let plan = qp.solve(&self.settings)?;
        Ok(plan.n[0].iter().map(|v| v.max(0.0)).collect())
    }
}

impl CommitmentPolicy for CommitmentMpc {
    fn name(&self) -> String {
        "commitment_mpc".into()
    }

    fn commit(&mut self, t: usize, state: &IlliquidState) -> Result<CommitmentDecision> {
        let d = match self.plan_first(t, state) {
            Ok(n) => CommitmentDecision { n, fallback: false },
            Err(e @ (CoreError::Solver(_) | CoreError::Program(_))) => {
                warn!("commitment plan failed at period {t}: {e}; repeating previous commitment");
                let n = self.previous.clone().unwrap_or_else(|| vec![0.0; self.mm.n_ill]);
                CommitmentDecision { n, fallback: true }
            }
            Err(e) => return Err(e),
        };
        self.previous = Some(d.n.clone());
        Ok(d)
    }

    fn clone_box(&self) -> Box<dyn CommitmentPolicy> {
        let mut c = self.clone();
        c.previous = None;
        Box::new(c)
    }
}

// ---------------------------------------------------------------------------
// Joint policies

/// Liquid wealth in cash, constant commitments. With zero commitments this
/// is the all-cash policy.
#[derive(Debug, Clone)]
pub struct ConstantCommitment {
    pub n: Vec<f64>,
    pub n_liq: usize,
    pub cash: usize,
}

impl Policy for ConstantCommitment {
    fn name(&self) -> String {
        "constant".into()
    }

    fn decide(&mut self, _: usize, state: &JointState) -> Result<Decision> {
        let control = Control {
            h: all_cash(state.l.max(0.0), self.n_liq, self.cash),
            n: self.n.clone(),
            s: (-state.l).max(0.0),
        };
        Ok(Decision { control, fallback: false })
    }

    fn clone_box(&self) -> Box<dyn Policy> {
        Box::new(self.clone())
    }
}

/// Commits so that the asymptotic mean illiquid wealth matches its target
/// share of current wealth, with optional proportional correction
/// `κ(I_targ − I)/α_I`.
#[derive(Debug, Clone)]
pub struct SteadyStateHeuristic {
    target: TargetAllocation,
    alpha_i: Vec<f64>,
    kappa: Option<f64>,
    cash: usize,
}

impl SteadyStateHeuristic {
    pub fn new(target: TargetAllocation, gains: &SteadyStateGains, kappa: Option<f64>, cash: usize) -> Result<Self> {
        if gains.alpha_i.len() != target.illiquid().len() {
            return Err(CoreError::Dimension("gains and target disagree on illiquid count".into()));
        }
        if gains.alpha_i.iter().any(|a| !(*a > 0.0)) {
            return Err(CoreError::Argument("steady-state gains must be positive".into()));
        }
        if cash >= target.n_liq.max(1) {
            return Err(CoreError::Argument(format!("cash index {cash} out of range")));
        }
        Ok(Self {
            target,
            alpha_i: gains.alpha_i.clone(),
            kappa,
            cash,
        })
    }
}

impl SteadyStateHeuristic {
    /// Pure decision rule, shared with the MPC fallback.
    pub fn rule(&self, state: &JointState) -> Control {
        let q = self.target.n_liq;
        if state.l < 0.0 {
            return Control {
                h: vec![0.0; q],
                n: vec![0.0; self.alpha_i.len()],
                s: -state.l,
            };
        }
        let liq = self.target.liquid();
        let liq_total: f64 = liq.iter().sum();
        let h = if liq_total > 0.0 {
            liq.iter().map(|w| state.l * w / liq_total).collect()
        } else {
            all_cash(state.l, q, self.cash)
        };
        let wealth = state.wealth();
        let kappa = self.kappa.unwrap_or(0.0);
        let n = self
            .target
            .illiquid()
            .iter()
            .zip(&self.alpha_i)
            .zip(&state.ill.i)
            .map(|((th, a), i)| {
                let targ = th * wealth;
                ((targ + kappa * (targ - i)) / a).max(0.0)
            })
            .collect();
        Control { h, n, s: 0.0 }
    }
}

impl Policy for SteadyStateHeuristic {
    fn name(&self) -> String {
        "heuristic".into()
    }

    fn decide(&mut self, _: usize, state: &JointState) -> Result<Decision> {
        Ok(Decision {
            control: self.rule(state),
            fallback: false,
        })
    }

    fn clone_box(&self) -> Box<dyn Policy> {
        Box::new(self.clone())
    }
}

/// Solves the joint planning problem and executes its first stage; falls
/// back to the heuristic when the solver does not reach optimality.
#[derive(Debug, Clone)]
pub struct FullMpc {
    model: Arc<FullMpcModel>,
    cfg: MpcConfig,
    settings: SolverSettings,
    fallback: SteadyStateHeuristic,
    cash: usize,
}

impl FullMpc {
    pub fn new(model: Arc<FullMpcModel>, cfg: MpcConfig, fallback: SteadyStateHeuristic) -> Result<Self> {
        cfg.validate()?;
        let cash = model.moments.cash_index().unwrap_or(0);
        Ok(Self {
            model,
            cfg,
            settings: SolverSettings::default(),
            fallback,
            cash,
        })
    }

    pub fn with_settings(mut self, settings: SolverSettings) -> Self {
        self.settings = settings;
        self
    }

    pub fn config(&self) -> &MpcConfig {
        &self.cfg
    }

    /// Uncleaned first-stage control of the planning problem.
    pub fn plan(&self, state: &JointState) -> Result<Control> {
        let q = self.model.mm.n_liq;
        let m = self.model.mm.n_ill;
        let scale = state.wealth() + state.ill.k.iter().sum::<f64>();
        if scale == 0.0 {
            return Ok(Control::zero(q, m));
        }
        let program = build_full_mpc(&self.model, state, &self.cfg)?;
        Ok(program.solve(&self.settings)?.0)
    }
}

impl Policy for FullMpc {
    fn name(&self) -> String {
        "mpc".into()
    }

    fn decide(&mut self, t: usize, state: &JointState) -> Result<Decision> {
        match self.plan(state) {
            Ok(u) => Ok(Decision {
                control: clean_control(u, state.l, self.cash),
                fallback: false,
            }),
            Err(e @ (CoreError::Solver(_) | CoreError::Program(_))) => {
                warn!("MPC solve failed at period {t}: {e}; using heuristic");
                Ok(Decision {
                    control: self.fallback.rule(state),
                    fallback: true,
                })
            }
            Err(e) => Err(e),
        }
    }

    fn clone_box(&self) -> Box<dyn Policy> {
        Box::new(self.clone())
    }
}

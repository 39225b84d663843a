//! Builders for the planning problems: commitment tracking (open loop and
//! receding horizon), one-period Markowitz, and the full joint MPC problem.

use nalgebra::DMatrix;
use pacer_conic::{solve, AffineExpr, ConicProgram, Sense, SolveResult, SolveStatus, SolverSettings, Var};

use crate::dynamics::{Control, IlliquidState, JointState, SystemLayout};
use crate::error::{CoreError, Result};
use crate::mean::MeanMatrices;
use crate::moments::{risk_factor_rows, ReturnMoments};
use crate::normal::norm_inv_cdf;

fn solved(program: &ConicProgram, settings: &SolverSettings) -> Result<SolveResult> {
    let r = solve(program, settings)?;
    match r.status {
        SolveStatus::Optimal => Ok(r),
        s => Err(CoreError::Solver(s)),
    }
}

/// Mean-dynamics rows `x' = Āx + B̄u` as affine expressions.
fn propagate(mm: &MeanMatrices, x: &[AffineExpr], u: &[AffineExpr]) -> Vec<AffineExpr> {
    (0..mm.a.nrows())
        .map(|r| {
            let mut e = AffineExpr::zero();
            for (c, xc) in x.iter().enumerate() {
                let a = mm.a[(r, c)];
                if a != 0.0 {
                    e += xc.clone() * a;
                }
            }
            for (c, uc) in u.iter().enumerate() {
                let b = mm.b[(r, c)];
                if b != 0.0 {
                    e += uc.clone() * b;
                }
            }
            e
        })
        .collect()
}

fn dot_rows(rows: &[Vec<f64>], y: &[AffineExpr]) -> Vec<AffineExpr> {
    rows.iter()
        .map(|row| {
            let mut e = AffineExpr::zero();
            for (c, yc) in row.iter().zip(y) {
                if *c != 0.0 {
                    e += yc.clone() * *c;
                }
            }
            e
        })
        .collect()
}

fn sum(exprs: &[AffineExpr]) -> AffineExpr {
    exprs.iter().fold(AffineExpr::zero(), |acc, e| acc + e.clone())
}

fn consts(v: &[f64]) -> Vec<AffineExpr> {
    v.iter().map(|&c| AffineExpr::constant(c)).collect()
}

fn exprs(v: &[Var]) -> Vec<AffineExpr> {
    v.iter().map(|&x| x.into()).collect()
}

// ---------------------------------------------------------------------------
// Commitment tracking

/// Commitment plan that tracks an illiquid wealth target.
///
/// Plans `horizon` commitments `n̂_1..n̂_H` from the given state `x̂_1` and
/// minimizes
///
/// ```text
/// tracking_weight · Σ_{τ=1}^{H+1} ‖Î_τ − I_targ‖²
///   + smoothing_weight · Σ_{τ=2}^{H} ‖n̂_τ − n̂_{τ−1}‖²  (+ ‖n̂_1 − previous‖²)
/// ```
///
/// subject to the mean dynamics and `0 ≤ n̂ ≤ n_lim`.
#[derive(Debug, Clone, PartialEq)]
pub struct CommitmentProblem {
    pub horizon: usize,
    pub i_targ: Vec<f64>,
    pub n_lim: Option<f64>,
    pub tracking_weight: f64,
    pub smoothing_weight: f64,
    /// Commitment executed in the previous period, if it should be smoothed
    /// against.
    pub previous: Option<Vec<f64>>,
}

impl CommitmentProblem {
    /// Weights `1/(T+1)` and `γ/(T−1)` for a plan of `T ≥ 2` commitments.
    pub fn open_loop(t: usize, i_targ: Vec<f64>, gamma_smooth: f64, n_lim: Option<f64>) -> Result<Self> {
        if t < 2 {
            return Err(CoreError::Argument(format!("plan length must be at least 2, got {t}")));
        }
        Ok(Self::receding(t, i_targ, gamma_smooth, n_lim))
    }

    /// Weights `1/(H+1)` and `γ/(H−1)`; a one-period horizon has nothing to
    /// smooth and uses `γ` as is.
    pub fn receding(h: usize, i_targ: Vec<f64>, gamma_smooth: f64, n_lim: Option<f64>) -> Self {
        Self {
            horizon: h,
            i_targ,
            n_lim,
            tracking_weight: 1.0 / (h as f64 + 1.0),
            smoothing_weight: gamma_smooth / (h.max(2) as f64 - 1.0),
            previous: None,
        }
    }

    fn validate(&self, n_ill: usize) -> Result<()> {
        if self.horizon == 0 {
            return Err(CoreError::Argument("horizon must be at least 1".into()));
        }
        if self.i_targ.len() != n_ill || self.previous.as_ref().is_some_and(|p| p.len() != n_ill) {
            return Err(CoreError::Dimension(format!("expected {n_ill} illiquid assets")));
        }
        let weights_ok = self.tracking_weight >= 0.0 && self.smoothing_weight >= 0.0;
        if !weights_ok || self.n_lim.is_some_and(|l| !(l >= 0.0)) {
            return Err(CoreError::Argument("weights and commitment cap must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct CommitmentProgram {
    pub program: ConicProgram,
    /// `n[τ][j]`, τ = 0..H.
    pub n: Vec<Vec<Var>>,
    /// Planned illiquid wealth and uncalled commitments, τ = 0..=H; index 0
    /// is the given state.
    pub i: Vec<Vec<AffineExpr>>,
    pub k: Vec<Vec<AffineExpr>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommitmentPlan {
    pub n: Vec<Vec<f64>>,
    pub i: Vec<Vec<f64>>,
    pub k: Vec<Vec<f64>>,
    pub objective: f64,
    pub iterations: usize,
}

pub fn build_commitment_qp(mm: &MeanMatrices, x0: &IlliquidState, prob: &CommitmentProblem) -> Result<CommitmentProgram> {
    let mm = mm.illiquid_part();
    let m = mm.n_ill;
    prob.validate(m)?;
    if x0.n_ill() != m {
        return Err(CoreError::Dimension(format!("state has {} assets, model {m}", x0.n_ill())));
    }
    let h = prob.horizon;
    let mut p = ConicProgram::new(Sense::Minimize);
    let mut x: Vec<AffineExpr> = consts(&x0.to_vec());
    let (mut is, mut ks) = (vec![x[..m].to_vec()], vec![x[m..].to_vec()]);
    let mut ns = Vec::with_capacity(h);
    for tau in 0..h {
        let n: Vec<Var> = (0..m).map(|j| p.nonneg_var(format!("n[{tau}][{j}]"))).collect();
        if let Some(lim) = prob.n_lim {
            for &nj in &n {
                p.at_most(nj, lim);
            }
        }
        let next = propagate(&mm, &x, &exprs(&n));
        let vars: Vec<Var> = (0..2 * m)
            .map(|r| {
                let name = if r < m { format!("I[{}][{r}]", tau + 1) } else { format!("K[{}][{}]", tau + 1, r - m) };
                p.var(name)
            })
            .collect();
        for (v, e) in vars.iter().zip(next) {
            p.equal(*v, e);
        }
        x = exprs(&vars);
        is.push(x[..m].to_vec());
        ks.push(x[m..].to_vec());
        ns.push(n);
    }

    let tracking: Vec<AffineExpr> = is
        .iter()
        .flat_map(|row| row.iter().zip(&prob.i_targ).map(|(e, t)| e.clone() - *t))
        .collect();
    p.add_penalty(prob.tracking_weight, tracking);
    let mut smooth = Vec::new();
    if let Some(prev) = &prob.previous {
        smooth.extend(ns[0].iter().zip(prev).map(|(&v, &c)| v - c));
    }
    for tau in 1..h {
        smooth.extend((0..m).map(|j| ns[tau][j] - ns[tau - 1][j]));
    }
    if !smooth.is_empty() && prob.smoothing_weight > 0.0 {
        p.add_penalty(prob.smoothing_weight, smooth);
    }
    Ok(CommitmentProgram { program: p, n: ns, i: is, k: ks })
}

/// Open-loop plan of `t` commitments from the zero state.
pub fn build_open_loop_qp(mm: &MeanMatrices, t: usize, i_targ: f64, gamma_smooth: f64, n_lim: f64) -> Result<CommitmentProgram> {
    let prob = CommitmentProblem::open_loop(t, vec![i_targ; mm.n_ill], gamma_smooth, Some(n_lim))?;
    build_commitment_qp(mm, &IlliquidState::zero(mm.n_ill), &prob)
}

/// Receding-horizon plan of `h` commitments from the observed state.
pub fn build_commitment_mpc_qp(
    mm: &MeanMatrices,
    x_now: &IlliquidState,
    h: usize,
    i_targ: f64,
    gamma_smooth: f64,
    n_lim: f64,
) -> Result<CommitmentProgram> {
    let prob = CommitmentProblem::receding(h, vec![i_targ; mm.n_ill], gamma_smooth, Some(n_lim));
    build_commitment_qp(mm, x_now, &prob)
}

impl CommitmentProgram {
    pub fn solve(&self, settings: &SolverSettings) -> Result<CommitmentPlan> {
        let r = solved(&self.program, settings)?;
        let eval = |rows: &[Vec<AffineExpr>]| -> Vec<Vec<f64>> {
            rows.iter().map(|row| row.iter().map(|e| r.eval(e)).collect()).collect()
        };
        Ok(CommitmentPlan {
            n: self.n.iter().map(|row| r.values(row)).collect(),
            i: eval(&self.i),
            k: eval(&self.k),
            objective: r.objective,
            iterations: r.iterations,
        })
    }
}

/// `sqrt(mean((I_t − I_targ)²))` over periods `start..=len` (1-based), where
/// `i[0]` is period 1.
pub fn delayed_rms(i: &[f64], i_targ: f64, start: usize) -> Result<f64> {
    if start == 0 || start > i.len() {
        return Err(CoreError::Argument(format!(
            "start period {start} outside 1..={}",
            i.len()
        )));
    }
    Ok(mean_squared_error(&i[start - 1..], i_targ).sqrt())
}

/// Mean of `(I_t − I_targ)²`; zero for an empty slice.
pub fn mean_squared_error(i: &[f64], i_targ: f64) -> f64 {
    if i.is_empty() {
        return 0.0;
    }
    i.iter().map(|v| (v - i_targ).powi(2)).sum::<f64>() / i.len() as f64
}

// ---------------------------------------------------------------------------
// Markowitz

#[derive(Debug, Clone)]
pub struct MarkowitzProgram {
    pub program: ConicProgram,
    pub w: Vec<Var>,
}

/// `maximize μᵀw  s.t. 1ᵀw = 1, w ≥ 0, ‖Σ^{1/2}w‖ ≤ σ`.
pub fn build_markowitz(mu: &[f64], cov: &DMatrix<f64>, sigma: f64) -> Result<MarkowitzProgram> {
    let n = mu.len();
    if cov.nrows() != n || cov.ncols() != n {
        return Err(CoreError::Dimension(format!("{n} means but {}x{} covariance", cov.nrows(), cov.ncols())));
    }
    if !(sigma >= 0.0) {
        return Err(CoreError::Argument(format!("risk bound must be nonnegative, got {sigma}")));
    }
    let mut p = ConicProgram::new(Sense::Maximize);
    let w = p.nonneg_vars("w", n);
    p.set_objective(AffineExpr::dot(&w, mu));
    p.equal(AffineExpr::sum(&w), 1.0);
    let risk = dot_rows(&risk_factor_rows(cov), &exprs(&w));
    add_risk_bound(&mut p, AffineExpr::constant(sigma), risk);
    Ok(MarkowitzProgram { program: p, w })
}

/// `‖v‖ ≤ t`; when `t` is identically zero the cone has no interior, so the
/// equivalent `v = 0` is imposed instead.
fn add_risk_bound(p: &mut ConicProgram, t: AffineExpr, v: Vec<AffineExpr>) {
    if v.is_empty() {
        p.at_least(t, 0.0);
    } else if t.is_constant() && t.constant == 0.0 {
        for e in v {
            p.equal(e, 0.0);
        }
    } else {
        p.soc(t, v);
    }
}

pub fn solve_markowitz(mu: &[f64], cov: &DMatrix<f64>, sigma: f64, settings: &SolverSettings) -> Result<Vec<f64>> {
    let mp = build_markowitz(mu, cov, sigma)?;
    let r = solved(&mp.program, settings)?;
    // Clean tiny negative round-off and renormalize onto the simplex.
    let mut w: Vec<f64> = r.values(&mp.w).into_iter().map(|v| v.max(0.0)).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    Ok(w)
}

/// `u = W·w`.
pub fn markowitz_rebalance(wealth: f64, w: &[f64]) -> Vec<f64> {
    w.iter().map(|v| wealth * v).collect()
}

// ---------------------------------------------------------------------------
// Full MPC

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RiskMode {
    /// `‖Σ^{1/2}ŷ‖ ≤ σ1ᵀŷ` at every stage.
    Hard,
    /// Excess risk `(‖Σ^{1/2}ŷ‖ − σ1ᵀŷ)₊` is charged `λ^risk` per unit.
    Penalized,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpcConfig {
    pub horizon: usize,
    pub gamma: f64,
    pub sigma: f64,
    pub epsilon_ins: f64,
    pub lambda_risk: f64,
    pub lambda_smooth: f64,
    pub lambda_cash: f64,
    pub n_lim: Option<f64>,
    pub risk_mode: RiskMode,
}

impl Default for MpcConfig {
    /// Ten-period penalized configuration used in the frontier experiments.
    fn default() -> Self {
        Self {
            horizon: 10,
            gamma: 0.97,
            sigma: 0.1,
            epsilon_ins: 0.02,
            lambda_risk: 10.0,
            lambda_smooth: 0.1,
            lambda_cash: 1000.0,
            n_lim: None,
            risk_mode: RiskMode::Penalized,
        }
    }
}

impl MpcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epsilon_ins > 0.5 {
            return Err(CoreError::Nonconvex(format!(
                "insolvency probability {} exceeds 1/2",
                self.epsilon_ins
            )));
        }
        if !(self.epsilon_ins > 0.0) {
            return Err(CoreError::Argument("insolvency probability must be positive".into()));
        }
        if self.horizon == 0 || !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(CoreError::Argument("need horizon ≥ 1 and discount in (0, 1]".into()));
        }
        let weights = [self.sigma, self.lambda_risk, self.lambda_smooth, self.lambda_cash];
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) || self.n_lim.is_some_and(|l| !(l >= 0.0)) {
            return Err(CoreError::Argument("risk bound, weights and cap must be nonnegative".into()));
        }
        Ok(())
    }

    /// `−Φ⁻¹(ε)`, the nonnegative weight on the liquid risk term of the
    /// insolvency constraint. Exactly zero at `ε = 1/2`.
    pub fn insolvency_coefficient(&self) -> f64 {
        if self.epsilon_ins == 0.5 {
            0.0
        } else {
            -norm_inv_cdf(self.epsilon_ins)
        }
    }
}

/// Data shared by every full-MPC solve: joint mean matrices and the return
/// model, with the covariance factors computed once.
#[derive(Debug, Clone)]
pub struct FullMpcModel {
    pub mm: MeanMatrices,
    pub moments: ReturnMoments,
    /// Factor rows of the gross-return covariance over `(liquid, illiquid)`.
    pub risk_rows: Vec<Vec<f64>>,
    /// Factor rows of the liquid-only covariance.
    pub liquid_rows: Vec<Vec<f64>>,
}

impl FullMpcModel {
    pub fn new(mm: MeanMatrices, moments: ReturnMoments) -> Result<Self> {
        if mm.layout != SystemLayout::Joint {
            return Err(CoreError::Argument("full MPC needs joint-layout mean matrices".into()));
        }
        if moments.n_liq != mm.n_liq || moments.n_ill != mm.n_ill {
            return Err(CoreError::Dimension("return model and mean matrices disagree on asset counts".into()));
        }
        let risk_rows = risk_factor_rows(&moments.cov);
        let liquid_rows = risk_factor_rows(&moments.liquid_cov());
        Ok(Self {
            mm,
            moments,
            risk_rows,
            liquid_rows,
        })
    }
}

#[derive(Debug, Clone)]
pub struct FullMpcProgram {
    pub program: ConicProgram,
    /// Stage controls, τ = 0..=H.
    pub h: Vec<Vec<Var>>,
    pub n: Vec<Vec<Var>>,
    pub s: Vec<Var>,
    /// Planned states, τ = 0..=H+1 (index 0 is the observed state).
    pub l: Vec<AffineExpr>,
    pub i: Vec<Vec<AffineExpr>>,
    pub k: Vec<Vec<AffineExpr>>,
}

/// The joint planning problem at the observed state.
///
/// ```text
/// maximize  Σ_τ γ^τ (L̂_τ + 1ᵀÎ_τ − λ^cash ŝ_τ [− λ^risk ξ_τ]) − (λ^smooth/S) Σ_τ γ^τ ‖n̂_{τ+1} − n̂_τ‖²
/// s.t.      x̂_0 = x,  x̂_{τ+1} = Āx̂_τ + B̄û_τ,  L̂ ≥ 0,  ĥ, n̂, ŝ ≥ 0,  1ᵀĥ_τ = L̂_τ
///           ‖Σ^{1/2}ŷ_τ‖ ≤ σ1ᵀŷ_τ [+ ξ_τ],  ŷ_τ = (ĥ_τ, Î_τ)
///           λ̄¹ᵀK̂_τ + λ̄⁰ᵀn̂_τ − μ_liqᵀĥ_τ − ŝ_τ ≤ Φ⁻¹(ε)‖Σ_liq^{1/2}ĥ_τ‖
/// ```
///
/// `S = L + 1ᵀI + 1ᵀK` of the observed state makes the smoothing term
/// scale like the rest of the objective, so the whole problem is positively
/// homogeneous in the state.
pub fn build_full_mpc(model: &FullMpcModel, x_now: &JointState, cfg: &MpcConfig) -> Result<FullMpcProgram> {
    cfg.validate()?;
    let mm = &model.mm;
    let (m, q) = (mm.n_ill, mm.n_liq);
    if x_now.ill.n_ill() != m {
        return Err(CoreError::Dimension(format!("state has {} assets, model {m}", x_now.ill.n_ill())));
    }
    let valid = x_now.l >= 0.0 && x_now.to_vec().iter().all(|v| v.is_finite() && *v >= 0.0);
    if !valid {
        return Err(CoreError::Argument(format!("invalid joint state {x_now:?}")));
    }
    let hz = cfg.horizon;
    let coef = cfg.insolvency_coefficient();
    let mu_liq = model.moments.liquid_mean();
    let (lam0, lam1) = (&mm.draw.lambda0, &mm.draw.lambda1);

    let mut p = ConicProgram::new(Sense::Maximize);
    let mut x = consts(&x_now.to_vec());
    let mut ls = vec![x[0].clone()];
    let mut is = vec![x[1..1 + m].to_vec()];
    let mut ks = vec![x[1 + m..].to_vec()];
    let (mut hs, mut ns, mut ss) = (Vec::new(), Vec::new(), Vec::new());
    let mut objective = AffineExpr::zero();

    for tau in 0..=hz {
        let disc = cfg.gamma.powi(tau as i32);
        let h = (0..q).map(|k| p.nonneg_var(format!("h[{tau}][{k}]"))).collect::<Vec<_>>();
        let n = (0..m).map(|j| p.nonneg_var(format!("n[{tau}][{j}]"))).collect::<Vec<_>>();
        let s = p.nonneg_var(format!("s[{tau}]"));
        if let Some(lim) = cfg.n_lim {
            for &nj in &n {
                p.at_most(nj, lim);
            }
        }
        let (l_tau, i_tau, k_tau) = (x[0].clone(), x[1..1 + m].to_vec(), x[1 + m..].to_vec());
        p.equal(AffineExpr::sum(&h), l_tau.clone());

        // Risk on exposure y = (h, I).
        let y: Vec<AffineExpr> = exprs(&h).into_iter().chain(i_tau.iter().cloned()).collect();
        let risk = dot_rows(&model.risk_rows, &y);
        let budget = sum(&y) * cfg.sigma;
        let mut stage = l_tau + sum(&i_tau) - AffineExpr::term(s, cfg.lambda_cash);
        match cfg.risk_mode {
            RiskMode::Hard => add_risk_bound(&mut p, budget, risk),
            RiskMode::Penalized => {
                let xi = p.nonneg_var(format!("excess_risk[{tau}]"));
                p.soc(budget + xi, risk);
                stage -= AffineExpr::term(xi, cfg.lambda_risk);
            }
        }
        objective += stage * disc;

        // Expected calls must be covered with probability 1 − ε.
        let mut margin = AffineExpr::dot(&h, mu_liq) + s;
        for j in 0..m {
            margin -= k_tau[j].clone() * lam1[j];
            margin -= AffineExpr::term(n[j], lam0[j]);
        }
        if coef == 0.0 || model.liquid_rows.is_empty() {
            p.at_least(margin, 0.0);
        } else {
            let spread = dot_rows(&model.liquid_rows, &exprs(&h))
                .into_iter()
                .map(|e| e * coef)
                .collect();
            p.soc(margin, spread);
        }

        let u: Vec<AffineExpr> = exprs(&h)
            .into_iter()
            .chain(exprs(&n))
            .chain(std::iter::once(s.into()))
            .collect();
        let next = propagate(mm, &x, &u);
        let vars: Vec<Var> = (0..next.len())
            .map(|r| {
                let t = tau + 1;
                match r {
                    0 => p.var(format!("L[{t}]")),
                    r if r <= m => p.var(format!("I[{t}][{}]", r - 1)),
                    r => p.var(format!("K[{t}][{}]", r - 1 - m)),
                }
            })
            .collect();
        for (v, e) in vars.iter().zip(next) {
            p.equal(*v, e);
        }
        p.at_least(vars[0], 0.0);
        x = exprs(&vars);
        ls.push(x[0].clone());
        is.push(x[1..1 + m].to_vec());
        ks.push(x[1 + m..].to_vec());
        hs.push(h);
        ns.push(n);
        ss.push(s);
    }
    p.set_objective(objective);

    let scale = x_now.wealth() + x_now.ill.k.iter().sum::<f64>();
    if cfg.lambda_smooth > 0.0 && scale > 0.0 {
        for tau in 0..hz {
            let rows = (0..m).map(|j| ns[tau + 1][j] - ns[tau][j]).collect();
            p.add_penalty(cfg.lambda_smooth * cfg.gamma.powi(tau as i32) / scale, rows);
        }
    }
    Ok(FullMpcProgram {
        program: p,
        h: hs,
        n: ns,
        s: ss,
        l: ls,
        i: is,
        k: ks,
    })
}

impl FullMpcProgram {
    /// First-stage control `(ĥ_0, n̂_0, ŝ_0)` from a solution.
    pub fn first_control(&self, r: &SolveResult) -> Control {
        Control {
            h: r.values(&self.h[0]),
            n: r.values(&self.n[0]),
            s: r.value(self.s[0]),
        }
    }

    pub fn solve(&self, settings: &SolverSettings) -> Result<(Control, SolveResult)> {
        let r = solved(&self.program, settings)?;
        Ok((self.first_control(&r), r))
    }
}

use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;
use pacer_core::frontier::FrontierModel;
use pacer_core::policy::{CommitmentMpc, CommitmentPolicy, PlanningHorizon};
use pacer_core::programs::*;
use pacer_core::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn single_mm() -> Arc<MeanMatrices> {
    static MM: OnceLock<Arc<MeanMatrices>> = OnceLock::new();
    MM.get_or_init(|| {
        let d = presets::single_illiquid().unwrap();
        Arc::new(mean_matrices(&d, SystemLayout::IlliquidOnly, 1_000_000, 12345).unwrap())
    })
    .clone()
}

fn joint_model() -> &'static FrontierModel {
    static M: OnceLock<FrontierModel> = OnceLock::new();
    M.get_or_init(|| FrontierModel::new(presets::joint_example().unwrap(), 200_000, 12345).unwrap())
}

fn settings() -> SolverSettings {
    SolverSettings::default()
}

// ---------------------------------------------------------------------------
// Commitment tracking

#[test]
fn zero_target_plans_nothing() {
    let plan = build_open_loop_qp(&single_mm(), 10, 0.0, 1.0, 0.5).unwrap().solve(&settings()).unwrap();
    assert!(plan.n.iter().flatten().all(|v| v.abs() < 1e-7), "{:?} obj {} it {}", plan.n, plan.objective, plan.iterations);
    assert!(plan.objective.abs() < 1e-10);
}

#[test]
fn open_loop_needs_two_periods() {
    assert!(build_open_loop_qp(&single_mm(), 1, 1.0, 1.0, 0.5).is_err());
}

#[test]
fn tracking_plan_hits_the_cap_then_settles() {
    let mm = single_mm();
    let plan = build_open_loop_qp(&mm, 20, 1.0, 1.0, 0.5).unwrap().solve(&settings()).unwrap();
    assert!((plan.n[0][0] - 0.5).abs() < 1e-6 && (plan.n[1][0] - 0.5).abs() < 1e-6);
    let alpha = steady_state_gains(&mm).unwrap().alpha_i[0];
    assert!((plan.n[19][0] - 1.0 / alpha).abs() < 0.03);
    assert!(plan.n.iter().flatten().all(|v| *v > -1e-9 && *v < 0.5 + 1e-9));
    // The reported states follow the mean dynamics of the plan.
    let sim = response::simulate_mean(&mm, &plan.n);
    for (t, out) in sim.iter().enumerate() {
        assert!((out.i[0] - plan.i[t][0]).abs() < 1e-9);
    }
    let i: Vec<f64> = plan.i.iter().map(|v| v[0]).collect();
    let rms = delayed_rms(&i[..20], 1.0, 5).unwrap();
    assert!(rms > 0.0 && rms < 0.1, "delayed RMS {rms}");
}

#[test]
fn smoothing_and_tracking_weights_follow_the_horizon() {
    let p = CommitmentProblem::open_loop(20, vec![1.0], 1.0, Some(0.5)).unwrap();
    assert_eq!((p.tracking_weight, p.smoothing_weight), (1.0 / 21.0, 1.0 / 19.0));
    let r = CommitmentProblem::receding(1, vec![1.0], 2.0, None);
    assert_eq!((r.tracking_weight, r.smoothing_weight), (0.5, 2.0));
}

#[test]
fn full_horizon_mpc_from_zero_is_the_open_loop_plan() {
    let mm = single_mm();
    let open = build_open_loop_qp(&mm, 20, 1.0, 1.0, 0.5).unwrap().solve(&settings()).unwrap();
    let mpc = build_commitment_mpc_qp(&mm, &IlliquidState::zero(1), 20, 1.0, 1.0, 0.5)
        .unwrap()
        .solve(&settings())
        .unwrap();
    for (a, b) in open.n.iter().zip(&mpc.n) {
        assert!((a[0] - b[0]).abs() < 1e-7);
    }
}

#[test]
fn mpc_on_the_nominal_path_executes_the_plan() {
    let mm = single_mm();
    // Without the cap the plan is interior and smooth.
    let prob = CommitmentProblem::open_loop(20, vec![1.0], 1.0, None).unwrap();
    let plan = build_commitment_qp(&mm, &IlliquidState::zero(1), &prob).unwrap().solve(&settings()).unwrap();
    let mut policy = CommitmentMpc::new(mm.clone(), 1.0, 1.0, None, PlanningHorizon::ShrinkingTo(20));
    for t in 1..=20 {
        let state = IlliquidState { i: plan.i[t - 1].clone(), k: plan.k[t - 1].clone() };
        let d = policy.commit(t, &state).unwrap();
        assert!((d.n[0] - plan.n[t - 1][0]).abs() < 1e-6, "period {t}: {} vs {}", d.n[0], plan.n[t - 1][0]);
    }
}

#[test]
fn overshoot_lowers_the_commitment() {
    let mm = single_mm();
    let plan = build_open_loop_qp(&mm, 20, 1.0, 1.0, 0.5).unwrap().solve(&settings()).unwrap();
    let mut policy = CommitmentMpc::new(mm.clone(), 1.0, 1.0, Some(0.5), PlanningHorizon::ShrinkingTo(20));
    let mut prob = policy.problem(5).unwrap();
    prob.previous = Some(plan.n[3].clone());
    let heavy = IlliquidState { i: vec![1.6], k: vec![2.0] };
    let first = build_commitment_qp(&mm, &heavy, &prob).unwrap().solve(&settings()).unwrap().n[0][0];
    assert!(first < plan.n[4][0] - 1e-3, "{first} vs {}", plan.n[4][0]);
    // Through the policy interface as well (no previous commitment recorded).
    let d = policy.commit(5, &heavy).unwrap();
    assert!(d.n[0] < plan.n[4][0] && !d.fallback);
}

#[test]
fn delayed_rms_examples() {
    assert_eq!(delayed_rms(&[1.0; 6], 1.0, 2).unwrap(), 0.0);
    assert_eq!(delayed_rms(&[1.0, 1.0, 3.0], 1.0, 3).unwrap(), 2.0);
    assert!(delayed_rms(&[1.0, 1.0], 1.0, 3).is_err());
    assert!(delayed_rms(&[1.0], 1.0, 0).is_err());
    assert_eq!(mean_squared_error(&[0.0, 2.0], 1.0), 1.0);
}

// ---------------------------------------------------------------------------
// Markowitz

/// Best objective over the simplex grid with spacing `1/steps` among points
/// with `wᵀΣw ≤ σ²`.
fn grid_markowitz(mu: &[f64; 3], cov: &DMatrix<f64>, sigma: f64, steps: usize) -> Option<f64> {
    let mut best: Option<f64> = None;
    for a in 0..=steps {
        for b in 0..=steps - a {
            let w = [a as f64 / steps as f64, b as f64 / steps as f64, (steps - a - b) as f64 / steps as f64];
            let risk: f64 = (0..3).map(|i| (0..3).map(|j| w[i] * cov[(i, j)] * w[j]).sum::<f64>()).sum();
            if risk <= sigma * sigma {
                let obj = w.iter().zip(mu).map(|(w, m)| w * m).sum();
                best = Some(best.map_or(obj, |b: f64| b.max(obj)));
            }
        }
    }
    best
}

#[test]
fn markowitz_matches_simplex_grid() {
    let mut rng = ChaCha20Rng::seed_from_u64(17);
    for k in 0..20 {
        let mu = [rng.random_range(1.0..1.12), rng.random_range(1.0..1.12), rng.random_range(1.0..1.12)];
        let l: DMatrix<f64> = DMatrix::from_fn(3, 3, |_, _| rng.random_range(-0.25..0.25));
        let cov = &l * l.transpose();
        let vertex_risk = (0..3).map(|i| cov[(i, i)].sqrt()).fold(0.0, f64::max);
        let sigma = rng.random_range(0.3..1.0) * vertex_risk;
        let Some(grid) = grid_markowitz(&mu, &cov, sigma, 200) else { continue };
        let w = solve_markowitz(&mu, &cov, sigma, &settings()).unwrap();
        let obj: f64 = w.iter().zip(&mu).map(|(w, m)| w * m).sum();
        assert!(obj >= grid - 1e-9, "instance {k}: solver {obj} below grid {grid}");
        assert!(obj - grid <= 1e-3, "instance {k}: solver {obj}, grid {grid}");
    }
}

#[test]
fn slack_risk_picks_the_best_vertex() {
    let cov = DMatrix::from_row_slice(3, 3, &[0.04, 0.01, 0.0, 0.01, 0.09, 0.0, 0.0, 0.0, 0.01]);
    for scale in [1.0, 3.0, 0.2] {
        let mu = [1.05 * scale, 1.10 * scale, 1.02 * scale];
        let w = solve_markowitz(&mu, &cov, 10.0, &settings()).unwrap();
        assert!((w[1] - 1.0).abs() < 1e-7, "{w:?}");
    }
}

#[test]
fn zero_risk_holds_only_the_riskless_asset() {
    let cov = DMatrix::from_row_slice(3, 3, &[0.04, 0.01, 0.0, 0.01, 0.09, 0.0, 0.0, 0.0, 0.0]);
    let w = solve_markowitz(&[1.05, 1.10, 1.0], &cov, 0.0, &settings()).unwrap();
    assert!((w[2] - 1.0).abs() < 1e-9, "{w:?}");
    // Without a riskless asset zero risk is infeasible.
    let pd = DMatrix::from_row_slice(2, 2, &[0.04, 0.0, 0.0, 0.09]);
    assert!(matches!(
        solve_markowitz(&[1.05, 1.1], &pd, 0.0, &settings()),
        Err(CoreError::Solver(SolveStatus::Infeasible))
    ));
}

#[test]
fn markowitz_frontier_is_nondecreasing_and_concave() {
    let m = joint_model();
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for k in 0..30 {
        let sigma = 0.3 * k as f64 / 29.0;
        let w = solve_markowitz(&m.moments.mean, &m.moments.cov, sigma, &settings()).unwrap();
        let ret: f64 = w.iter().zip(&m.moments.mean).map(|(w, r)| w * r).sum();
        let risk = (0..w.len())
            .map(|i| (0..w.len()).map(|j| w[i] * m.moments.cov[(i, j)] * w[j]).sum::<f64>())
            .sum::<f64>()
            .max(0.0)
            .sqrt();
        assert!(risk <= sigma + 1e-7);
        pts.push((risk, ret));
    }
    assert!((pts[0].1 - 1.0).abs() < 1e-8, "zero risk is all cash");
    for w in pts.windows(2) {
        assert!(w[1].1 >= w[0].1 - 1e-9 && w[1].0 >= w[0].0 - 1e-9);
    }
    let distinct: Vec<_> = pts.windows(2).filter(|w| w[1].0 - w[0].0 > 1e-6).map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0)).collect();
    for s in distinct.windows(2) {
        assert!(s[1] <= s[0] + 1e-5, "slopes {s:?}");
    }
}

// ---------------------------------------------------------------------------
// Full MPC

fn hard_config() -> MpcConfig {
    MpcConfig {
        sigma: 0.3,
        risk_mode: RiskMode::Hard,
        ..MpcConfig::default()
    }
}

#[test]
fn insolvency_at_the_median_is_linear() {
    let m = joint_model();
    let x = JointState { l: 1.0, ill: IlliquidState { i: vec![0.3], k: vec![0.2] } };
    let median = MpcConfig { epsilon_ins: 0.5, ..MpcConfig::default() };
    assert_eq!(median.insolvency_coefficient(), 0.0);
    let lin = build_full_mpc(&m.mpc, &x, &median).unwrap();
    let cone = build_full_mpc(&m.mpc, &x, &MpcConfig::default()).unwrap();
    let stages = MpcConfig::default().horizon + 1;
    assert_eq!(lin.program.socs.len(), stages);
    assert_eq!(cone.program.socs.len(), 2 * stages);
    assert!((MpcConfig::default().insolvency_coefficient() - 2.053748910631823).abs() < 1e-9);
}

#[test]
fn insolvency_above_median_is_refused() {
    let m = joint_model();
    let cfg = MpcConfig { epsilon_ins: 0.6, ..MpcConfig::default() };
    assert!(matches!(build_full_mpc(&m.mpc, &JointState::cash(1.0, 1), &cfg), Err(CoreError::Nonconvex(_))));
}

#[test]
fn penalized_program_is_feasible_in_awkward_states() {
    let m = joint_model();
    let states = [
        JointState { l: 0.0, ill: IlliquidState { i: vec![0.0], k: vec![5.0] } },
        JointState { l: 0.01, ill: IlliquidState { i: vec![10.0], k: vec![3.0] } },
        JointState { l: 0.0, ill: IlliquidState { i: vec![1.0], k: vec![0.0] } },
        JointState::cash(1.0, 1),
    ];
    for x in &states {
        let p = build_full_mpc(&m.mpc, x, &MpcConfig::default()).unwrap();
        let (u, r) = p.solve(&settings()).unwrap_or_else(|e| panic!("{x:?}: {e}"));
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((u.h.iter().sum::<f64>() - x.l).abs() < 1e-7);
    }
}

#[test]
fn hard_risk_decisions_scale_with_the_state() {
    let m = joint_model();
    let policy = m.mpc_policy(&hard_config(), Some(0.1)).unwrap();
    let x = JointState { l: 1.3, ill: IlliquidState { i: vec![0.2], k: vec![0.1] } };
    let base = policy.plan(&x).unwrap();
    for c in [0.5, 2.0, 10.0] {
        let u = policy.plan(&x.scaled(c)).unwrap();
        let want = base.scaled(c).to_vec();
        let err: f64 = u.to_vec().iter().zip(&want).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = want.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(err <= 1e-5 * norm, "c={c}: error {err}, norm {norm}");
    }
    assert_eq!(policy.plan(&JointState::zero(1)).unwrap(), Control::zero(5, 1));
}

#[test]
fn riskless_view_buys_the_best_liquid_asset() {
    let m = joint_model();
    let cfg = MpcConfig {
        sigma: 100.0,
        epsilon_ins: 0.5,
        lambda_smooth: 0.0,
        ..MpcConfig::default()
    };
    let x = JointState { l: 1.0, ill: IlliquidState { i: vec![0.2], k: vec![0.1] } };
    let p = build_full_mpc(&m.mpc, &x, &cfg).unwrap();
    let (u, r) = p.solve(&settings()).unwrap();

    // Oracle: the same problem with every cone removed.
    let mut lp = p.program.clone();
    lp.socs.clear();
    let r_lp = pacer_conic::solve(&lp, &settings()).unwrap();
    assert!((r.objective - r_lp.objective).abs() <= 1e-6 * r_lp.objective.abs().max(1.0));

    let mu = m.moments.liquid_mean();
    let best = (0..mu.len()).max_by(|&a, &b| mu[a].total_cmp(&mu[b])).unwrap();
    assert!((u.h[best] - 1.0).abs() < 1e-6, "{u:?}");
}

proptest! {
    #[test]
    fn risk_cone_membership_is_scale_free(
        y in prop::collection::vec(0.0..5.0f64, 6),
        c in 0.01..100.0f64,
        sigma in 0.0..0.4f64,
    ) {
        let rows = moments::risk_factor_rows(&joint_model().moments.cov);
        let check = |y: &[f64]| {
            let norm = rows.iter().map(|r| r.iter().zip(y).map(|(a, b)| a * b).sum::<f64>().powi(2)).sum::<f64>().sqrt();
            norm - sigma * y.iter().sum::<f64>()
        };
        let base = check(&y);
        let scaled: Vec<f64> = y.iter().map(|v| v * c).collect();
        // Membership is decided by the sign, which c > 0 preserves up to rounding.
        prop_assume!(base.abs() > 1e-9 * y.iter().sum::<f64>().max(1.0));
        prop_assert_eq!(base <= 0.0, check(&scaled) <= 0.0);
    }

    #[test]
    fn insolvency_sets_are_nested_in_epsilon(
        h in prop::collection::vec(0.0..2.0f64, 5),
        k in 0.0..2.0f64,
        n in 0.0..2.0f64,
        s in 0.0..0.5f64,
        e1 in 0.001..0.5f64,
        e2 in 0.001..0.5f64,
    ) {
        let m = joint_model();
        let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
        let margin = h.iter().zip(m.moments.liquid_mean()).map(|(a, b)| a * b).sum::<f64>() + s
            - m.mm.draw.lambda1[0] * k - m.mm.draw.lambda0[0] * n;
        let spread = m.mpc.liquid_rows.iter().map(|r| r.iter().zip(&h).map(|(a, b)| a * b).sum::<f64>().powi(2)).sum::<f64>().sqrt();
        let feasible = |eps: f64| {
            let cfg = MpcConfig { epsilon_ins: eps, ..MpcConfig::default() };
            margin >= cfg.insolvency_coefficient() * spread
        };
        prop_assert!(!feasible(lo) || feasible(hi));
    }
}

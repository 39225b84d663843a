use std::sync::{Arc, OnceLock};

use nalgebra::DVector;
use pacer_core::frontier::*;
use pacer_core::policy::*;
use pacer_core::programs::MpcConfig;
use pacer_core::sim::*;
use pacer_core::*;

fn model() -> &'static FrontierModel {
    static M: OnceLock<FrontierModel> = OnceLock::new();
    M.get_or_init(|| FrontierModel::new(presets::joint_example().unwrap(), 200_000, 12345).unwrap())
}

fn gains(alpha_i: f64) -> SteadyStateGains {
    SteadyStateGains {
        alpha_i: vec![alpha_i],
        alpha_k: vec![1.0],
        alpha_c: vec![1.0],
        alpha_d: vec![1.0],
    }
}

fn all_cash() -> ConstantCommitment {
    ConstantCommitment { n: vec![0.0], n_liq: 5, cash: 0 }
}

// ---------------------------------------------------------------------------
// Policies

#[test]
fn heuristic_covers_negative_liquid_wealth() {
    let target = TargetAllocation::new(vec![0.5, 0.2, 0.0, 0.0, 0.0, 0.3], 5).unwrap();
    let h = SteadyStateHeuristic::new(target, &gains(3.685), Some(0.1), 0).unwrap();
    let x = JointState { l: -5.0, ill: IlliquidState { i: vec![2.0], k: vec![1.0] } };
    assert_eq!(h.rule(&x), Control { h: vec![0.0; 5], n: vec![0.0], s: 5.0 });
}

#[test]
fn heuristic_without_illiquid_target_only_rebalances() {
    let target = TargetAllocation::new(vec![0.25, 0.5, 0.25, 0.0, 0.0, 0.0], 5).unwrap();
    let mut h = SteadyStateHeuristic::new(target, &gains(2.0), Some(0.1), 0).unwrap();
    let x = JointState { l: 8.0, ill: IlliquidState { i: vec![1.0], k: vec![0.0] } };
    let d = h.decide(1, &x).unwrap();
    assert_eq!(d.control.n, vec![0.0]);
    assert_eq!(d.control.h, vec![2.0, 4.0, 2.0, 0.0, 0.0]);
}

#[test]
fn heuristic_commits_target_over_gain() {
    let target = TargetAllocation::new(vec![0.7, 0.0, 0.0, 0.0, 0.0, 0.3], 5).unwrap();
    let plain = SteadyStateHeuristic::new(target.clone(), &gains(3.685), None, 0).unwrap();
    let x = JointState { l: 70.0, ill: IlliquidState { i: vec![30.0], k: vec![5.0] } };
    let u = plain.rule(&x);
    assert!((u.n[0] - 30.0 / 3.685).abs() < 1e-12);
    assert!((u.n[0] - 8.141).abs() < 1e-3);
    assert_eq!(u.h[0], 70.0);
    // On target the proportional correction vanishes; below target it adds.
    let fb = SteadyStateHeuristic::new(target, &gains(3.685), Some(0.1), 0).unwrap();
    assert_eq!(fb.rule(&x).n, u.n);
    let low = JointState { l: 90.0, ill: IlliquidState { i: vec![10.0], k: vec![5.0] } };
    assert!((fb.rule(&low).n[0] - (30.0 + 0.1 * 20.0) / 3.685).abs() < 1e-12);
}

#[test]
fn targets_must_be_on_the_simplex() {
    assert!(TargetAllocation::new(vec![0.5, 0.6], 1).is_err());
    assert!(TargetAllocation::new(vec![1.2, -0.2], 1).is_err());
}

#[test]
fn open_loop_executes_then_stops() {
    let mut p = OpenLoop::new(vec![vec![0.5], vec![0.25]], 1);
    let x = IlliquidState::zero(1);
    assert_eq!(p.commit(1, &x).unwrap().n, vec![0.5]);
    assert_eq!(p.commit(2, &x).unwrap().n, vec![0.25]);
    assert_eq!(p.commit(3, &x).unwrap().n, vec![0.0]);
    let mut empty = OpenLoop::new(vec![], 1);
    assert_eq!(empty.commit(1, &x).unwrap().n, vec![0.0]);
}

#[test]
fn unit_plan_is_a_stochastic_step_response() {
    let d = presets::single_illiquid().unwrap();
    let mut ones = OpenLoop::new(vec![vec![1.0]; 6], 1);
    let tr = simulate_commitments(&d, &mut ones, 6, 1, 0).unwrap();
    let mut rng = path_rng(1, 0);
    let mut x = IlliquidState::zero(1);
    for t in 0..6 {
        let s = step_illiquid(&x, &[1.0], &d.sample(&mut rng)).unwrap();
        assert_eq!(s.calls, tr.calls[t]);
        x = s.next;
    }
}

#[test]
fn cleanup_restores_the_budget() {
    let u = Control { h: vec![0.5, -1e-12, 0.7], n: vec![-3e-13], s: -1e-14 };
    let c = clean_control(u, 1.0, 0);
    assert!((c.h.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    assert!(c.to_vec().iter().all(|v| *v >= 0.0));
    assert_eq!(clean_control(Control::zero(2, 1), 3.0, 1).h, vec![0.0, 3.0]);
}

#[test]
fn mpc_decisions_are_deterministic_and_budgeted() {
    let m = model();
    let mut a = m.mpc_policy(&MpcConfig::default(), Some(0.1)).unwrap();
    let mut b = a.clone();
    let x = JointState { l: 0.8, ill: IlliquidState { i: vec![0.3], k: vec![0.2] } };
    let da = a.decide(3, &x).unwrap();
    assert_eq!(da, b.decide(3, &x).unwrap());
    assert!(!da.fallback);
    assert!((da.control.h.iter().sum::<f64>() - 0.8).abs() < 1e-12);
    assert!(da.control.to_vec().iter().all(|v| *v >= 0.0));
    assert_eq!(a.decide(1, &JointState::zero(1)).unwrap().control, Control::zero(5, 1));
}

// ---------------------------------------------------------------------------
// Trajectories

#[test]
fn all_cash_keeps_wealth_constant() {
    let m = model();
    let tr = simulate_trajectory(&m.dist, &mut all_cash(), &JointState::cash(2.5, 1), 15, 4, 0).unwrap();
    for p in &tr.periods {
        assert_eq!(p.next.wealth(), 2.5);
        assert_eq!(p.realized_return(), Some(0.0));
        assert!(!p.forced_injection());
    }
    let trace = allocation_trace(std::slice::from_ref(&tr)).unwrap();
    assert!(trace.weights.iter().all(|w| w[0] == 1.0 && w[1..].iter().all(|v| *v == 0.0)));
}

#[test]
fn shortfalls_are_covered_and_flagged() {
    let m = model();
    let mut reckless = ConstantCommitment { n: vec![10.0], n_liq: 5, cash: 0 };
    let tr = simulate_trajectory(&m.dist, &mut reckless, &JointState::cash(1.0, 1), 5, 4, 0).unwrap();
    assert!(tr.forced_count() > 0);
    for p in &tr.periods {
        assert!(p.next.l >= 0.0);
        assert_eq!(p.forced_injection(), p.l_raw < 0.0);
        assert!(p.accounting_residual() < 1e-12);
    }
    // Injections are not counted as return.
    let p = tr.periods.iter().find(|p| p.forced_injection()).unwrap();
    let r = p.realized_return().unwrap();
    assert!((r - ((p.next.wealth() - p.forced) / p.state.wealth() - 1.0)).abs() < 1e-15);
}

#[test]
fn matrix_replay_matches_the_recorded_path() {
    let m = model();
    let mut pol = m.heuristic(0.2, Some(0.1)).unwrap();
    let tr = simulate_trajectory(&m.dist, &mut pol, &m.initial_state(), 20, 8, 3).unwrap();
    for p in &tr.periods {
        let sys = build_matrices(&p.draw, SystemLayout::Joint);
        let x = DVector::from_vec(p.state.to_vec());
        let u = DVector::from_vec(p.control.to_vec());
        let next = &sys.a * x + &sys.b * u;
        let want = JointState { l: p.l_raw, ill: p.next.ill.clone() }.to_vec();
        for (a, b) in next.iter().zip(&want) {
            assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0));
        }
    }
}

#[test]
fn single_path_summary_is_the_path() {
    let m = model();
    let pol = m.heuristic(0.1, Some(0.1)).unwrap();
    let mc = run_monte_carlo(&m.dist, &pol, &m.initial_state(), 12, 1, 5, None).unwrap();
    let tr = simulate_trajectory(&m.dist, &mut pol.clone(), &m.initial_state(), 12, 5, 0).unwrap();
    assert_eq!(mc.records[0], tr);
    let r = tr.returns();
    let mean = r.iter().sum::<f64>() / r.len() as f64;
    assert!((mc.summary.mean_return.mean - mean).abs() < 1e-15);
    assert_eq!(mc.summary.mean_return.se, 0.0);
}

#[test]
fn policies_share_draws_on_matched_seeds() {
    let m = model();
    let a = run_monte_carlo(&m.dist, &all_cash(), &m.initial_state(), 6, 4, 11, None).unwrap();
    let b = run_monte_carlo(&m.dist, &m.heuristic(0.3, None).unwrap(), &m.initial_state(), 6, 4, 11, None).unwrap();
    for (x, y) in a.records.iter().zip(&b.records) {
        for (p, q) in x.periods.iter().zip(&y.periods) {
            assert_eq!(p.draw, q.draw);
        }
    }
    assert_ne!(a.records[0].periods[0].draw, a.records[1].periods[0].draw);
}

#[test]
fn monte_carlo_is_schedule_independent() {
    let m = model();
    let pol = m.mpc_policy(&MpcConfig { sigma: 0.2, ..MpcConfig::default() }, Some(0.1)).unwrap();
    let one = run_monte_carlo(&m.dist, &pol, &m.initial_state(), 8, 6, 21, Some(1)).unwrap();
    let four = run_monte_carlo(&m.dist, &pol, &m.initial_state(), 8, 6, 21, Some(4)).unwrap();
    assert_eq!(one.records, four.records);
    assert_eq!(one.summary, four.summary);
}

#[test]
fn mpc_paths_keep_the_books_and_stay_solvent() {
    let m = model();
    let pol = m.mpc_policy(&MpcConfig::default(), Some(0.1)).unwrap();
    let mc = run_monte_carlo(&m.dist, &pol, &m.initial_state(), 20, 8, 2, None).unwrap();
    let s = &mc.summary;
    assert!(s.max_accounting_residual < 1e-9);
    assert!(s.min_state >= 0.0);
    assert_eq!(s.fallbacks, 0);
    for tr in &mc.records {
        for p in &tr.periods {
            assert!((p.control.h.iter().sum::<f64>() - p.state.l).abs() <= 1e-9 * p.state.l.max(1.0));
        }
    }
    let trace = allocation_trace(&mc.records).unwrap();
    assert_eq!(trace.excluded, 0);
    for w in &trace.weights {
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn heuristic_undershoots_its_illiquid_target() {
    let m = model();
    let pol = m.heuristic(0.2, Some(0.1)).unwrap();
    let theta_ill = m.markowitz(0.2).unwrap().illiquid()[0];
    let mc = run_monte_carlo(&m.dist, &pol, &m.initial_state(), 20, 50, 9, None).unwrap();
    let trace = allocation_trace(&mc.records).unwrap();
    let last = trace.weights.last().unwrap()[5];
    assert!(theta_ill > 0.0 && last <= theta_ill + 0.01, "{last} vs target {theta_ill}");
}

// ---------------------------------------------------------------------------
// Relaxed benchmark and sweeps

#[test]
fn relaxed_zero_risk_is_flat() {
    let m = model();
    let run = frontier_sweep(m, &PolicyFamily::Relaxed, &[0.0], 20, 30, 1, None, false).unwrap();
    let p = &run.points[0];
    assert!(p.realized_vol.mean.abs() < 1e-7 && p.realized_ret.mean.abs() < 1e-7, "{p:?}");
}

#[test]
fn relaxed_frontier_rises_with_risk() {
    let m = model();
    let grid = sigma_grid(0.0, 0.3, 7);
    let run = frontier_sweep(m, &PolicyFamily::Relaxed, &grid, 20, 100, 1, None, false).unwrap();
    assert!(run.failures.is_empty());
    for w in run.points.windows(2) {
        assert!(w[1].realized_ret.mean >= w[0].realized_ret.mean - 1e-9);
        assert!(w[1].realized_vol.mean >= w[0].realized_vol.mean - 1e-9);
    }
}

#[test]
fn relaxed_rebalancing_scales_wealth() {
    assert_eq!(programs::markowitz_rebalance(0.0, &[0.2, 0.8]), vec![0.0, 0.0]);
    assert_eq!(programs::markowitz_rebalance(10.0, &[0.25, 0.75]), vec![2.5, 7.5]);
    let m = model();
    let w = simulate_relaxed(&m.dist, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0], 10, 3, 0).unwrap();
    assert!(w.iter().all(|v| *v == 1.0));
}

#[test]
fn interpolation_clamps_and_blends() {
    let pt = |v: f64, r: f64| FrontierPoint {
        policy: "relaxed".into(),
        sigma: v,
        periods: 1,
        paths: 1,
        realized_vol: Stat { mean: v, se: 0.0 },
        realized_ret: Stat { mean: r, se: 0.0 },
        forced_frequency: 0.0,
        fallbacks: 0,
        max_accounting_residual: 0.0,
        min_state: 0.0,
    };
    let f = [pt(0.2, 0.1), pt(0.0, 0.0), pt(0.1, 0.08)];
    assert_eq!(interpolate_return(&f, -1.0), Some(0.0));
    assert_eq!(interpolate_return(&f, 1.0), Some(0.1));
    assert!((interpolate_return(&f, 0.05).unwrap() - 0.04).abs() < 1e-15);
    assert_eq!(interpolate_return(&[], 0.1), None);
}

#[test]
fn failed_points_are_skipped_not_fatal() {
    // A model whose liquid side is all risky: zero risk is infeasible.
    let (mut mean, mut cov) = presets::joint_parameters();
    mean.truncate(5);
    cov = cov.view((0, 0), (5, 5)).into_owned();
    cov[(3, 3)] = 0.01;
    let d = LatentDistribution::contiguous(mean, cov, 1, 2).unwrap();
    let m = FrontierModel::new(d, 20_000, 1).unwrap();
    let run = frontier_sweep(&m, &PolicyFamily::Relaxed, &[0.0, 0.2], 5, 5, 1, None, false).unwrap();
    assert_eq!(run.failures.len(), 1);
    assert_eq!(run.points.len(), 1);
    assert!(Arc::strong_count(&m.mm) >= 1);
}

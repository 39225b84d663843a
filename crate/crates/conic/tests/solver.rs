use pacer_conic::{solve, AffineExpr, ConicProgram, Sense, SolveStatus, SolverSettings, Var};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn settings() -> SolverSettings {
    SolverSettings::default()
}

#[test]
fn bound_constrained_lp() {
    let mut p = ConicProgram::new(Sense::Minimize);
    let x = p.var("x");
    p.at_least(x, 3.0);
    p.set_objective(x);
    let r = solve(&p, &settings()).unwrap();
    assert_eq!(r.status, SolveStatus::Optimal);
    assert!((r.value(x) - 3.0).abs() < 1e-7);
    assert!((r.objective - 3.0).abs() < 1e-7);
}

#[test]
fn norm_epigraph() {
    let mut p = ConicProgram::new(Sense::Minimize);
    let t = p.var("t");
    p.soc(t, vec![3.0.into(), 4.0.into()]);
    p.set_objective(t);
    let r = solve(&p, &settings()).unwrap();
    assert_eq!(r.status, SolveStatus::Optimal);
    assert!((r.value(t) - 5.0).abs() < 1e-7);
}

#[test]
fn maximize_with_penalty() {
    // max x − (x − 2)²  →  x = 2.5, value 2.25
    let mut p = ConicProgram::new(Sense::Maximize);
    let x = p.var("x");
    p.set_objective(x);
    p.add_penalty(1.0, vec![x - 2.0]);
    let r = solve(&p, &settings()).unwrap();
    assert_eq!(r.status, SolveStatus::Optimal);
    assert!((r.value(x) - 2.5).abs() < 1e-6);
    assert!((r.objective - 2.25).abs() < 1e-6);
}

#[test]
fn detects_infeasibility() {
    let mut p = ConicProgram::new(Sense::Minimize);
    let x = p.var("x");
    p.at_least(x, 1.0);
    p.at_most(x, 0.0);
    p.set_objective(x);
    assert_eq!(solve(&p, &settings()).unwrap().status, SolveStatus::Infeasible);

    // A cone that cannot be met: ‖(x, 1)‖ ≤ 0.5.
    let mut p = ConicProgram::new(Sense::Minimize);
    let x = p.var("x");
    p.soc(0.5, vec![x.into(), 1.0.into()]);
    assert_eq!(solve(&p, &settings()).unwrap().status, SolveStatus::Infeasible);
}

#[test]
fn detects_unboundedness() {
    let mut p = ConicProgram::new(Sense::Minimize);
    let x = p.var("x");
    let y = p.var("y");
    p.at_most(x, 0.0);
    p.equal(y, 1.0);
    p.set_objective(x + y);
    assert_eq!(solve(&p, &settings()).unwrap().status, SolveStatus::Unbounded);
}

#[test]
fn result_lookup_by_name() {
    let mut p = ConicProgram::new(Sense::Minimize);
    let v = p.vars("v", 3);
    for (i, &vi) in v.iter().enumerate() {
        p.equal(vi, i as f64);
    }
    let r = solve(&p, &settings()).unwrap();
    assert!((r.get("v[2]").unwrap() - 2.0).abs() < 1e-8);
    assert!(r.get("w").is_none());
}

/// Euclidean projection onto the probability simplex (sort-based).
fn simplex_projection(y: &[f64]) -> Vec<f64> {
    let mut u = y.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &uk) in u.iter().enumerate() {
        cum += uk;
        let t = (cum - 1.0) / (k as f64 + 1.0);
        if uk - t > 0.0 {
            theta = t;
        }
    }
    y.iter().map(|v| (v - theta).max(0.0)).collect()
}

fn projection_program(target: &[f64]) -> (ConicProgram, Vec<Var>) {
    let mut p = ConicProgram::new(Sense::Minimize);
    let x = p.vars("x", target.len());
    let rows = x.iter().zip(target).map(|(&xi, &t)| xi - t).collect();
    p.add_penalty(1.0, rows);
    (p, x)
}

#[test]
fn random_box_projections() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let n = rng.random_range(1..8);
        let target: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let lo: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..0.0)).collect();
        let hi: Vec<f64> = lo.iter().map(|l| l + rng.random_range(0.1..2.0)).collect();
        let (mut p, x) = projection_program(&target);
        for i in 0..n {
            p.at_least(x[i], lo[i]);
            p.at_most(x[i], hi[i]);
        }
        let r = solve(&p, &settings()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        for i in 0..n {
            let want = target[i].clamp(lo[i], hi[i]);
            assert!((r.value(x[i]) - want).abs() < 1e-6, "{} vs {want}", r.value(x[i]));
        }
    }
}

#[test]
fn random_simplex_projections() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let n = rng.random_range(2..10);
        let target: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let (mut p, x) = projection_program(&target);
        for &xi in &x {
            p.at_least(xi, 0.0);
        }
        p.equal(AffineExpr::sum(&x), 1.0);
        let r = solve(&p, &settings()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        for (a, b) in r.values(&x).iter().zip(simplex_projection(&target)) {
            assert!((a - b).abs() < 1e-6);
        }
    }
}

#[test]
fn random_soc_projections() {
    // Projection of (t0, v0) onto {‖v‖ ≤ t} has a closed form.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let n = rng.random_range(1..6);
        let t0: f64 = rng.random_range(-2.0..2.0);
        let v0: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let nv = v0.iter().map(|v| v * v).sum::<f64>().sqrt();
        let (want_t, want_v): (f64, Vec<f64>) = if nv <= t0 {
            (t0, v0.clone())
        } else if nv <= -t0 {
            (0.0, vec![0.0; n])
        } else {
            let a = (t0 + nv) / 2.0;
            (a, v0.iter().map(|v| a * v / nv).collect())
        };
        let mut p = ConicProgram::new(Sense::Minimize);
        let t = p.var("t");
        let v = p.vars("v", n);
        let mut rows = vec![t - t0];
        rows.extend(v.iter().zip(&v0).map(|(&vi, &c)| vi - c));
        p.add_penalty(1.0, rows);
        p.soc(t, v.iter().map(|&vi| vi.into()).collect());
        let r = solve(&p, &settings()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.value(t) - want_t).abs() < 1e-6);
        for (a, b) in r.values(&v).iter().zip(&want_v) {
            assert!((a - b).abs() < 1e-6);
        }
    }
}

/// Solves the small dense SPD system `M x = b` by Cholesky.
fn cholesky_solve(m: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                l[i][i] = (m[i][i] - s).sqrt();
            } else {
                l[i][j] = (m[i][j] - s) / l[j][j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        y[i] = (b[i] - (0..i).map(|k| l[i][k] * y[k]).sum::<f64>()) / l[i][i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        x[i] = (y[i] - (i + 1..n).map(|k| l[k][i] * x[k]).sum::<f64>()) / l[i][i];
    }
    x
}

#[test]
fn random_least_norm_solutions() {
    // min ‖x‖ s.t. Ax = b has solution Aᵀ(AAᵀ)⁻¹b.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let n = rng.random_range(3..9);
        let m = rng.random_range(1..n);
        let a: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let b: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let aat: Vec<Vec<f64>> = (0..m)
            .map(|i| (0..m).map(|j| (0..n).map(|k| a[i][k] * a[j][k]).sum()).collect())
            .collect();
        let w = cholesky_solve(&aat, &b);
        let want: Vec<f64> = (0..n).map(|k| (0..m).map(|i| a[i][k] * w[i]).sum()).collect();

        let mut p = ConicProgram::new(Sense::Minimize);
        let x = p.vars("x", n);
        let t = p.var("t");
        for i in 0..m {
            p.equal(AffineExpr::dot(&x, &a[i]), b[i]);
        }
        p.soc(t, x.iter().map(|&xi| xi.into()).collect());
        p.set_objective(t);
        let r = solve(&p, &settings()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        for (got, want) in r.values(&x).iter().zip(&want) {
            assert!((got - want).abs() < 1e-6, "{got} vs {want}");
        }
    }
}

#[test]
fn risk_limited_portfolio_is_tangent() {
    // max μᵀw  s.t. 1ᵀw = 1, ‖diag(σ)w‖ ≤ s. Lagrange conditions give
    // w_i = (μ_i − ν)/(ρ σ_i²); verify stationarity at the solution instead.
    let mu = [0.05, 0.08, 0.12];
    let sig = [0.1, 0.2, 0.3];
    let s = 0.15;
    let mut p = ConicProgram::new(Sense::Maximize);
    let w = p.vars("w", 3);
    p.set_objective(AffineExpr::dot(&w, &mu));
    p.equal(AffineExpr::sum(&w), 1.0);
    p.soc(s, w.iter().zip(&sig).map(|(&wi, &si)| wi * si).collect());
    let r = solve(&p, &settings()).unwrap();
    assert_eq!(r.status, SolveStatus::Optimal);
    let wv = r.values(&w);
    let risk = wv.iter().zip(&sig).map(|(a, b)| (a * b).powi(2)).sum::<f64>().sqrt();
    assert!((risk - s).abs() < 1e-6, "risk constraint should bind");
    // (μ_i − ν) ∝ σ_i² w_i: the ratios must agree for all i.
    let grad: Vec<f64> = (0..3).map(|i| sig[i] * sig[i] * wv[i]).collect();
    // Solve for ν from the first two, check the third.
    let rho = (mu[1] - mu[0]) / (grad[1] - grad[0]);
    let nu = mu[0] - rho * grad[0];
    assert!(((mu[2] - nu) - rho * grad[2]).abs() < 1e-5);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Projections onto the nonnegative orthant match `max(·, 0)` for any
    /// target, and the returned point is always feasible.
    #[test]
    fn orthant_projection(target in prop::collection::vec(-5.0f64..5.0, 1..12)) {
        let (mut p, x) = projection_program(&target);
        for &xi in &x {
            p.at_least(xi, 0.0);
        }
        let r = solve(&p, &settings()).unwrap();
        prop_assert_eq!(r.status, SolveStatus::Optimal);
        prop_assert!(p.max_violation(&r.primal) < 1e-7);
        for (a, t) in r.values(&x).iter().zip(&target) {
            prop_assert!((a - t.max(0.0)).abs() < 1e-6);
        }
    }

    /// Scaling the objective leaves the minimizer unchanged.
    #[test]
    fn objective_scale_invariance(c in prop::collection::vec(-2.0f64..2.0, 2..6), k in 0.1f64..10.0) {
        let build = |scale: f64| {
            let mut p = ConicProgram::new(Sense::Minimize);
            let x = p.vars("x", c.len());
            let coefs: Vec<f64> = c.iter().map(|v| v * scale).collect();
            p.set_objective(AffineExpr::dot(&x, &coefs));
            p.soc(1.0, x.iter().map(|&xi| xi.into()).collect());
            (p, x)
        };
        let (p1, x1) = build(1.0);
        let (p2, x2) = build(k);
        let r1 = solve(&p1, &settings()).unwrap();
        let r2 = solve(&p2, &settings()).unwrap();
        let nc = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assume!(nc > 1e-3);
        for ((a, b), ci) in r1.values(&x1).iter().zip(r2.values(&x2)).zip(&c) {
            prop_assert!((a - b).abs() < 1e-5);
            // Closed form: x = −c/‖c‖.
            prop_assert!((a + ci / nc).abs() < 1e-5);
        }
    }
}

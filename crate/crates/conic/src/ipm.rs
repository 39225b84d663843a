//! Primal-dual interior-point method on the homogeneous self-dual embedding
//!
//! ```text
//! minimize ½xᵀPx + cᵀx  subject to  Ax = b,  Gx + s = h,  s ∈ K
//! ```
//!
//! with `P` diagonal and nonnegative,//!
//! Nesterov–Todd scaling and a Mehrotra predictor-corrector. Each
//! iteration factors one sparse quasi-definite KKT matrix.

use std::sync::Arc;

use crate::cone::{dot, norm, Cones, Scaling};
use crate::ldl::{sym_matvec, Factor, Symbolic};
use crate::program::{ConicProgram, Sense};
use crate::{Residuals, SolveResult, SolveStatus, SolverSettings};

type SparseRows = Vec<Vec<(usize, f64)>>;

/// The program lowered to standard form. Every penalty row `r = Mx + m`
/// becomes an auxiliary variable carrying the quadratic term, so `P` stays
/// diagonal. Keeping the quadratic out of a cone matters: an epigraph
/// formulation is degenerate whenever the optimal penalty is zero and then
/// only resolves the minimizer to about the square root of the gap.
struct Standard {
    n: usize,
    p_diag: Vec<f64>,
    c: Vec<f64>,
    a: SparseRows,
    b: Vec<f64>,
    g: SparseRows,
    h: Vec<f64>,
    cones: Cones,
}

impl Standard {
    fn lower(p: &ConicProgram) -> Self {
        let nv = p.num_vars();
        let n = nv + p.penalties.iter().map(|q| q.rows.len()).sum::<usize>();
        let sign = match p.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let mut c = vec![0.0; n];
        for (i, v) in p.objective.compressed() {
            c[i] += sign * v;
        }
        let mut p_diag = vec![0.0; n];

        let mut a = Vec::with_capacity(p.equalities.len());
        let mut b = Vec::with_capacity(p.equalities.len());
        for e in &p.equalities {
            a.push(e.compressed());
            b.push(-e.constant);
        }
        let mut aux = nv;
        for pen in &p.penalties {
            for r in &pen.rows {
                // r_aux − (Mx + m) = 0
                let mut row: Vec<(usize, f64)> = r.compressed().into_iter().map(|(i, v)| (i, -v)).collect();
                row.push((aux, 1.0));
                a.push(row);
                b.push(r.constant);
                p_diag[aux] = 2.0 * pen.weight;
                aux += 1;
            }
        }

        // Cone rows: s = h − Gx equals the affine expression itself.
        let mut g: SparseRows = Vec::new();
        let mut h = Vec::new();
        let mut push = |terms: Vec<(usize, f64)>, constant: f64, g: &mut SparseRows| {
            g.push(terms.into_iter().map(|(i, v)| (i, -v)).collect());
            h.push(constant);
        };
        for e in &p.nonnegatives {
            push(e.compressed(), e.constant, &mut g);
        }
        let mut soc = Vec::new();
        for blk in &p.socs {
            push(blk.t.compressed(), blk.t.constant, &mut g);
            for e in &blk.v {
                push(e.compressed(), e.constant, &mut g);
            }
            soc.push(1 + blk.v.len());
        }
        let cones = Cones {
            nonneg: p.nonnegatives.len(),
            soc,
        };
        Self {
            n,
            p_diag,
            c,
            a,
            b,
            g,
            h,
            cones,
        }
    }

    fn p(&self) -> usize {
        self.a.len()
    }

    fn m(&self) -> usize {
        self.g.len()
    }
}

fn mul(rows: &SparseRows, x: &[f64], out: &mut [f64]) {
    for (o, row) in out.iter_mut().zip(rows) {
        *o = row.iter().map(|&(j, v)| v * x[j]).sum();
    }
}

fn mul_t_add(rows: &SparseRows, y: &[f64], out: &mut [f64]) {
    for (row, &yi) in rows.iter().zip(y) {
        if yi != 0.0 {
            for &(j, v) in row {
                out[j] += v * yi;
            }
        }
    }
}

/// KKT system `[[0, Aᵀ, Gᵀ], [A, 0, 0], [G, 0, −W²]]` with static
/// regularization and iterative refinement.
struct Kkt {
    dim: usize,
    n: usize,
    entries: Vec<(usize, usize)>,
    /// Regularized values (what is factored) and true values (what is solved).
    reg: Vec<f64>,
    exact: Vec<f64>,
    /// Slot of each z-diagonal entry, and the start of each dense SOC block
    /// (row-major upper triangle) within `entries`.
    z_diag: Vec<usize>,
    soc_slots: Vec<usize>,
    symbolic: Symbolic,
    factor: Factor,
    settings: SolverSettings,
}

impl Kkt {
    fn new(sf: &Standard, settings: &SolverSettings) -> Self {
        let (n, p, m) = (sf.n, sf.p(), sf.m());
        let dim = n + p + m;
        let mut entries = Vec::new();
        let mut exact = Vec::new();
        for i in 0..n {
            entries.push((i, i));
            exact.push(sf.p_diag[i]);
        }
        for i in 0..p {
            entries.push((n + i, n + i));
            exact.push(0.0);
        }
        for (r, row) in sf.a.iter().enumerate() {
            for &(j, v) in row {
                entries.push((j, n + r));
                exact.push(v);
            }
        }
        for (r, row) in sf.g.iter().enumerate() {
            for &(j, v) in row {
                entries.push((j, n + p + r));
                exact.push(v);
            }
        }
        let mut z_diag = Vec::with_capacity(m);
        for i in 0..sf.cones.nonneg {
            z_diag.push(entries.len());
            entries.push((n + p + i, n + p + i));
            exact.push(-1.0);
        }
        let mut soc_slots = Vec::new();
        for r in sf.cones.soc_ranges() {
            soc_slots.push(entries.len());
            for i in r.clone() {
                for j in i..r.end {
                    if i == j {
                        z_diag.push(entries.len());
                    }
                    entries.push((n + p + i, n + p + j));
                    exact.push(if i == j { -1.0 } else { 0.0 });
                }
            }
        }
        // z_diag must be indexed by cone row.
        let mut zd = vec![0; m];
        {
            let mut k = 0;
            for i in 0..sf.cones.nonneg {
                zd[i] = z_diag[k];
                k += 1;
            }
            for r in sf.cones.soc_ranges() {
                for i in r {
                    zd[i] = z_diag[k];
                    k += 1;
                }
            }
        }
        let signs: Vec<f64> = (0..dim).map(|i| if i < n { 1.0 } else { -1.0 }).collect();
        let symbolic = Symbolic::new(dim, &entries, &signs);
        let reg = exact.clone();
        Self {
            dim,
            n,
            entries,
            reg,
            exact,
            z_diag: zd,
            soc_slots,
            symbolic,
            factor: Factor::new(),
            settings: settings.clone(),
        }
    }

    /// Refreshes the `−W²` block (identity scaling when `w` is `None`) and
    /// refactors.
    fn update(&mut self, cones: &Cones, w: Option<&Scaling>) {
        match w {
            None => {
                for &slot in &self.z_diag {
                    self.exact[slot] = -1.0;
                }
            }
            Some(w) => {
                for (i, w2) in w.lp_squared().enumerate() {
                    self.exact[self.z_diag[i]] = -w2;
                }
                for ((r, sq), &start) in cones.soc_ranges().zip(w.soc_squared()).zip(&self.soc_slots) {
                    let q = r.len();
                    let mut slot = start;
                    for i in 0..q {
                        for j in i..q {
                            self.exact[slot] = -sq[i * q + j];
                            slot += 1;
                        }
                    }
                }
            }
        }
        let delta = self.settings.static_regularization;
        self.reg.copy_from_slice(&self.exact);
        for (slot, &(i, j)) in self.entries.iter().enumerate() {
            if i == j {
                self.reg[slot] += if i < self.n { delta } else { -delta };
            }
        }
        self.symbolic.factor(
            &self.reg,
            self.settings.dynamic_eps,
            self.settings.dynamic_delta,
            &mut self.factor,
        );
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        self.symbolic.solve(&self.factor, &mut x);
        let mut kx = vec![0.0; self.dim];
        let bnorm = rhs.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for _ in 0..self.settings.refinement_steps {
            sym_matvec(&self.entries, &self.exact, &x, &mut kx);
            let mut r: Vec<f64> = rhs.iter().zip(&kx).map(|(b, k)| b - k).collect();
            let rnorm = r.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            if rnorm <= 1e-14 * (1.0 + bnorm) {
                break;
            }
            self.symbolic.solve(&self.factor, &mut r);
            for (xi, ri) in x.iter_mut().zip(&r) {
                *xi += ri;
            }
        }
        x
    }
}

#[derive(Clone)]
struct Iterate {
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    s: Vec<f64>,
    tau: f64,
    kappa: f64,
}

struct Direction {
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    s: Vec<f64>,
    tau: f64,
    kappa: f64,
}

pub(crate) fn solve(program: &ConicProgram, settings: &SolverSettings) -> SolveResult {
    let sf = Standard::lower(program);
    let (n, p, m) = (sf.n, sf.p(), sf.m());
    let cones = &sf.cones;
    let mut kkt = Kkt::new(&sf, settings);

    let norm_b = norm(&sf.b).max(1.0);
    let norm_h = norm(&sf.h).max(1.0);
    let norm_c = norm(&sf.c).max(1.0);

    // Initial point: least-norm primal and dual solutions, shifted into the
    // cone interior.
    kkt.update(cones, None);
    let mut rhs = vec![0.0; n + p + m];
    rhs[n..n + p].copy_from_slice(&sf.b);
    rhs[n + p..].copy_from_slice(&sf.h);
    let sol = kkt.solve(&rhs);
    let x0 = sol[..n].to_vec();
    let mut s0: Vec<f64> = sol[n + p..].iter().map(|v| -v).collect();
    rhs.fill(0.0);
    for i in 0..n {
        rhs[i] = -sf.c[i];
    }
    let sol = kkt.solve(&rhs);
    let y0 = sol[n..n + p].to_vec();
    let mut z0 = sol[n + p..].to_vec();
    let e = cones.identity();
    for u in [&mut s0, &mut z0] {
        let alpha = -cones.min_eig(u);
        if alpha >= 0.0 || !alpha.is_finite() {
            let shift = if alpha.is_finite() { 1.0 + alpha } else { 1.0 };
            for (ui, ei) in u.iter_mut().zip(&e) {
                *ui += shift * ei;
            }
        }
    }
    let mut it = Iterate {
        x: x0,
        y: y0,
        z: z0,
        s: s0,
        tau: 1.0,
        kappa: 1.0,
    };

    let degree = cones.degree() as f64 + 1.0;
    let mut status = SolveStatus::NumericalLimit;
    let mut residuals = Residuals::default();
    let mut iterations = 0;
    let mut rx = vec![0.0; n];
    let mut ry = vec![0.0; p];
    let mut rz = vec![0.0; m];
    let mut stalls = 0;
    // Best iterate meeting the reduced tolerances, kept in case later
    // iterations stall or lose accuracy.
    let mut best: Option<(f64, Iterate, Residuals)> = None;

    for iter in 0..=settings.max_iterations {
        iterations = iter;
        // rx = Aᵀy + Gᵀz + cτ,  ry = Ax − bτ,  rz = Gx + s − hτ
        for i in 0..n {
            rx[i] = sf.c[i] * it.tau + sf.p_diag[i] * it.x[i];
        }
        mul_t_add(&sf.a, &it.y, &mut rx);
        mul_t_add(&sf.g, &it.z, &mut rx);
        mul(&sf.a, &it.x, &mut ry);
        ry.iter_mut().zip(&sf.b).for_each(|(r, b)| *r -= b * it.tau);
        mul(&sf.g, &it.x, &mut rz);
        for i in 0..m {
            rz[i] += it.s[i] - sf.h[i] * it.tau;
        }
        let cx = dot(&sf.c, &it.x);
        let by_hz = dot(&sf.b, &it.y) + dot(&sf.h, &it.z);
        let xpx: f64 = (0..n).map(|i| sf.p_diag[i] * it.x[i] * it.x[i]).sum();
        let rtau = it.kappa + cx + by_hz + xpx / it.tau;

        let half_quad = 0.5 * xpx / (it.tau * it.tau);
        let pcost = half_quad + cx / it.tau;
        let dcost = -half_quad - by_hz / it.tau;
        let gap = dot(&it.s, &it.z) / (it.tau * it.tau);
        let pres = (norm(&ry) / norm_b).max(norm(&rz) / norm_h) / it.tau;
        let dres = norm(&rx) / norm_c / it.tau;
        let relgap = gap / pcost.abs().max(dcost.abs()).max(1e-300);
        residuals = Residuals {
            primal: pres,
            dual: dres,
            gap,
            relative_gap: relgap,
        };

        let gap_ok = |tol_abs: f64, tol_rel: f64| gap <= tol_abs || relgap <= tol_rel;
        let reduced = settings.reduced_tol;
        if pres <= reduced && dres <= reduced && gap_ok(reduced, reduced) {
            let merit = pres.max(dres).max(gap.min(relgap));
            if best.as_ref().is_none_or(|b| merit < b.0) {
                best = Some((merit, it.clone(), residuals));
            }
        }
        if pres <= settings.feasibility_tol && dres <= settings.feasibility_tol && gap_ok(settings.absolute_gap_tol, settings.relative_gap_tol) {
            status = SolveStatus::Optimal;
            break;
        }
        if it.kappa > it.tau {
            // Certificates of infeasibility.
            let mut aty_gtz = vec![0.0; n];
            mul_t_add(&sf.a, &it.y, &mut aty_gtz);
            mul_t_add(&sf.g, &it.z, &mut aty_gtz);
            if by_hz < 0.0 && norm(&aty_gtz) / norm_c <= settings.feasibility_tol * -by_hz {
                status = SolveStatus::Infeasible;
                break;
            }
            let px_small = (0..n).all(|i| sf.p_diag[i] * it.x[i].abs() <= settings.feasibility_tol * -cx.min(0.0));
            if cx < 0.0 && px_small {
                let mut ax = vec![0.0; p];
                mul(&sf.a, &it.x, &mut ax);
                let mut gxs = vec![0.0; m];
                mul(&sf.g, &it.x, &mut gxs);
                for i in 0..m {
                    gxs[i] += it.s[i];
                }
                let lim = settings.feasibility_tol * -cx;
                if norm(&ax) / norm_b <= lim && norm(&gxs) / norm_h <= lim {
                    status = SolveStatus::Unbounded;
                    break;
                }
            }
        }
        if iter == settings.max_iterations || stalls >= 3 {
            break;
        }

        // Newton system.
        let w = Scaling::new(cones, &it.s, &it.z);
        let mut lambda = vec![0.0; m];
        w.apply(cones, &it.z, &mut lambda, false);
        kkt.update(cones, Some(&w));
        let mu = (dot(&it.s, &it.z) + it.tau * it.kappa) / degree;

        let mut rhs2 = vec![0.0; n + p + m];
        for i in 0..n {
            rhs2[i] = -sf.c[i];
        }
        rhs2[n..n + p].copy_from_slice(&sf.b);
        rhs2[n + p..].copy_from_slice(&sf.h);
        let sol2 = kkt.solve(&rhs2);
        // c̃ = c + 2Pξ linearizes xᵀPx/τ; ξ = x/τ.
        let c_tilde: Vec<f64> = (0..n)
            .map(|i| sf.c[i] + 2.0 * sf.p_diag[i] * it.x[i] / it.tau)
            .collect();
        let denom_base = -it.kappa / it.tau - xpx / (it.tau * it.tau)
            + dot(&c_tilde, &sol2[..n])
            + dot(&sf.b, &sol2[n..n + p])
            + dot(&sf.h, &sol2[n + p..]);

        let direction = |eta: f64, ds_target: &[f64], dk_target: f64| -> Direction {
            let mut lam_inv_ds = vec![0.0; m];
            cones.inverse_product(&lambda, ds_target, &mut lam_inv_ds);
            let mut w_term = vec![0.0; m];
            w.apply(cones, &lam_inv_ds, &mut w_term, false);
            let mut rhs1 = vec![0.0; n + p + m];
            for i in 0..n {
                rhs1[i] = -eta * rx[i];
            }
            for i in 0..p {
                rhs1[n + i] = -eta * ry[i];
            }
            for i in 0..m {
                rhs1[n + p + i] = -eta * rz[i] - w_term[i];
            }
            let sol1 = kkt.solve(&rhs1);
            let num = -eta * rtau - dk_target / it.tau
                - dot(&c_tilde, &sol1[..n])
                - dot(&sf.b, &sol1[n..n + p])
                - dot(&sf.h, &sol1[n + p..]);
            let dtau = num / denom_base;
            let comb = |k: usize| sol1[k] + dtau * sol2[k];
            let dx: Vec<f64> = (0..n).map(comb).collect();
            let dy: Vec<f64> = (n..n + p).map(comb).collect();
            let dz: Vec<f64> = (n + p..n + p + m).map(comb).collect();
            // ds = W(λ \ d_s − W dz)
            let mut wdz = vec![0.0; m];
            w.apply(cones, &dz, &mut wdz, false);
            let inner: Vec<f64> = lam_inv_ds.iter().zip(&wdz).map(|(a, b)| a - b).collect();
            let mut ds = vec![0.0; m];
            w.apply(cones, &inner, &mut ds, false);
            let dkappa = (dk_target - it.kappa * dtau) / it.tau;
            Direction {
                x: dx,
                y: dy,
                z: dz,
                s: ds,
                tau: dtau,
                kappa: dkappa,
            }
        };
        let max_step = |d: &Direction| -> f64 {
            let mut a = cones.max_step(&it.s, &d.s).min(cones.max_step(&it.z, &d.z));
            if d.tau < 0.0 {
                a = a.min(-it.tau / d.tau);
            }
            if d.kappa < 0.0 {
                a = a.min(-it.kappa / d.kappa);
            }
            a
        };

        // Predictor.
        let mut ll = vec![0.0; m];
        cones.product(&lambda, &lambda, &mut ll);
        let ds_aff: Vec<f64> = ll.iter().map(|v| -v).collect();
        let aff = direction(1.0, &ds_aff, -it.tau * it.kappa);
        let alpha_aff = max_step(&aff).min(1.0);
        let sigma = (1.0 - alpha_aff).clamp(0.0, 1.0).powi(3);

        // Corrector.
        let mut winv_ds = vec![0.0; m];
        w.apply(cones, &aff.s, &mut winv_ds, true);
        let mut w_dz = vec![0.0; m];
        w.apply(cones, &aff.z, &mut w_dz, false);
        let mut cross = vec![0.0; m];
        cones.product(&winv_ds, &w_dz, &mut cross);
        let ds_comb: Vec<f64> = (0..m)
            .map(|i| -ll[i] - cross[i] + sigma * mu * e[i])
            .collect();
        let dk_comb = -it.tau * it.kappa - aff.tau * aff.kappa + sigma * mu;
        let d = direction(1.0 - sigma, &ds_comb, dk_comb);
        let alpha = (settings.step_fraction * max_step(&d)).min(1.0);
        if !alpha.is_finite() || d.x.iter().chain(&d.z).any(|v| !v.is_finite()) {
            break;
        }
        if alpha < 1e-10 {
            stalls += 1;
        } else {
            stalls = 0;
        }

        for (u, du) in it.x.iter_mut().zip(&d.x) {
            *u += alpha * du;
        }
        for (u, du) in it.y.iter_mut().zip(&d.y) {
            *u += alpha * du;
        }
        for (u, du) in it.z.iter_mut().zip(&d.z) {
            *u += alpha * du;
        }
        for (u, du) in it.s.iter_mut().zip(&d.s) {
            *u += alpha * du;
        }
        it.tau += alpha * d.tau;
        it.kappa += alpha * d.kappa;
    }

    if status == SolveStatus::NumericalLimit {
        if let Some((_, b, r)) = best {
            it = b;
            residuals = r;
            status = SolveStatus::Optimal;
        }
    }

    let nv = program.num_vars();
    let primal: Vec<f64> = match status {
        SolveStatus::Optimal | SolveStatus::NumericalLimit => {
            it.x[..nv].iter().map(|v| v / it.tau).collect()
        }
        _ => vec![f64::NAN; nv],
    };
    let objective = if primal.iter().all(|v| v.is_finite()) {
        program.objective_value(&primal)
    } else {
        f64::NAN
    };
    SolveResult {
        status,
        primal,
        names: Arc::clone(&program.shared_names()),
        objective,
        iterations,
        residuals,
    }
}

//! Product cone `ℝ₊ˡ × Q^{q₁} × … × Q^{q_k}` and the Jordan-algebra
//! operations the interior-point method needs on it.

/// Layout of a cone vector: `nonneg` leading nonnegative coordinates, then
/// second-order cone blocks of the listed dimensions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Cones {
    pub nonneg: usize,
    pub soc: Vec<usize>,
}

impl Cones {
    pub fn dim(&self) -> usize {
        self.nonneg + self.soc.iter().sum::<usize>()
    }

    /// Barrier degree.
    pub fn degree(&self) -> usize {
        self.nonneg + self.soc.len()
    }

    /// Start offsets of the SOC blocks.
    pub fn soc_ranges(&self) -> impl Iterator<Item = std::ops::Range<usize>> + '_ {
        let mut start = self.nonneg;
        self.soc.iter().map(move |&q| {
            let r = start..start + q;
            start += q;
            r
        })
    }

    /// Identity element `e`.
    pub fn identity(&self) -> Vec<f64> {
        let mut e = vec![0.0; self.dim()];
        e[..self.nonneg].fill(1.0);
        for r in self.soc_ranges() {
            e[r.start] = 1.0;
        }
        e
    }

    /// Smallest "eigenvalue" of `u`: `min_i u_i` on the orthant and
    /// `u₀ − ‖u₁‖` on each SOC block. `u` is interior iff this is positive.
    pub fn min_eig(&self, u: &[f64]) -> f64 {
        let mut m = f64::INFINITY;
        for &v in &u[..self.nonneg] {
            m = m.min(v);
        }
        for r in self.soc_ranges() {
            let b = &u[r];
            m = m.min(b[0] - norm(&b[1..]));
        }
        m
    }

    /// `u ∘ v`.
    pub fn product(&self, u: &[f64], v: &[f64], out: &mut [f64]) {
        for i in 0..self.nonneg {
            out[i] = u[i] * v[i];
        }
        for r in self.soc_ranges() {
            let (ub, vb) = (&u[r.clone()], &v[r.clone()]);
            let o = &mut out[r];
            o[0] = dot(ub, vb);
            for j in 1..ub.len() {
                o[j] = ub[0] * vb[j] + vb[0] * ub[j];
            }
        }
    }

    /// Solves `λ ∘ u = d` for `u` (λ interior).
    pub fn inverse_product(&self, lambda: &[f64], d: &[f64], out: &mut [f64]) {
        for i in 0..self.nonneg {
            out[i] = d[i] / lambda[i];
        }
        for r in self.soc_ranges() {
            let (l, db) = (&lambda[r.clone()], &d[r.clone()]);
            let o = &mut out[r];
            let l0 = l[0];
            let det = l0 * l0 - dot(&l[1..], &l[1..]);
            let u0 = (l0 * db[0] - dot(&l[1..], &db[1..])) / det;
            o[0] = u0;
            for j in 1..l.len() {
                o[j] = (db[j] - u0 * l[j]) / l0;
            }
        }
    }

    /// Largest `α ≥ 0` with `u + α·du` in the cone (`u` interior); may be
    /// infinite.
    pub fn max_step(&self, u: &[f64], du: &[f64]) -> f64 {
        let mut alpha = f64::INFINITY;
        for i in 0..self.nonneg {
            if du[i] < 0.0 {
                alpha = alpha.min(-u[i] / du[i]);
            }
        }
        for r in self.soc_ranges() {
            alpha = alpha.min(soc_max_step(&u[r.clone()], &du[r]));
        }
        alpha
    }
}

fn soc_max_step(u: &[f64], d: &[f64]) -> f64 {
    // f(α) = (u₀+αd₀)² − ‖u₁+αd₁‖² = aα² + 2bα + c with c > 0; the ray leaves
    // the cone at the smallest positive root of f.
    let a = d[0] * d[0] - dot(&d[1..], &d[1..]);
    let b = u[0] * d[0] - dot(&u[1..], &d[1..]);
    let c = (u[0] * u[0] - dot(&u[1..], &u[1..])).max(0.0);
    let scale = a.abs().max(b.abs()).max(c);
    if scale == 0.0 {
        return f64::INFINITY;
    }
    if a.abs() <= 1e-300_f64.max(1e-15 * scale) {
        return if b < 0.0 { -c / (2.0 * b) } else { f64::INFINITY };
    }
    let disc = b * b - a * c;
    if disc < 0.0 {
        return f64::INFINITY;
    }
    let sq = disc.sqrt();
    let q = -(b + b.signum() * sq);
    let mut best = f64::INFINITY;
    for root in [q / a, if q != 0.0 { c / q } else { f64::NAN }] {
        if root.is_finite() && root > 0.0 {
            best = best.min(root);
        }
    }
    // No positive root: f stays positive, so t never reaches zero either.
    best
}

/// Nesterov–Todd scaling `W` with `W z = W⁻¹ s = λ`.
#[derive(Debug, Clone)]
pub(crate) struct Scaling {
    /// Orthant part: `w_i = sqrt(s_i / z_i)`.
    lp: Vec<f64>,
    /// SOC blocks: `(η, w̄)` with `w̄ᵀJw̄ = 1`.
    soc: Vec<(f64, Vec<f64>)>,
}

impl Scaling {
    pub fn new(cones: &Cones, s: &[f64], z: &[f64]) -> Self {
        let lp = (0..cones.nonneg).map(|i| (s[i] / z[i]).sqrt()).collect();
        let soc = cones
            .soc_ranges()
            .map(|r| {
                let (sb, zb) = (&s[r.clone()], &z[r]);
                let s_res = (sb[0] * sb[0] - dot(&sb[1..], &sb[1..])).max(f64::MIN_POSITIVE);
                let z_res = (zb[0] * zb[0] - dot(&zb[1..], &zb[1..])).max(f64::MIN_POSITIVE);
                let (sn, zn) = (s_res.sqrt(), z_res.sqrt());
                let sz: f64 = sb.iter().zip(zb).map(|(a, b)| a * b).sum::<f64>() / (sn * zn);
                let gamma = ((1.0 + sz) / 2.0).sqrt();
                let mut w = Vec::with_capacity(sb.len());
                w.push((sb[0] / sn + zb[0] / zn) / (2.0 * gamma));
                for j in 1..sb.len() {
                    w.push((sb[j] / sn - zb[j] / zn) / (2.0 * gamma));
                }
                let eta = (s_res / z_res).sqrt().sqrt();
                (eta, w)
            })
            .collect();
        Self { lp, soc }
    }

    /// `out = W·v` (or `W⁻¹·v` when `inverse`).
    pub fn apply(&self, cones: &Cones, v: &[f64], out: &mut [f64], inverse: bool) {
        for i in 0..cones.nonneg {
            out[i] = if inverse { v[i] / self.lp[i] } else { v[i] * self.lp[i] };
        }
        for (r, (eta, w)) in cones.soc_ranges().zip(&self.soc) {
            let vb = &v[r.clone()];
            let o = &mut out[r];
            let sign = if inverse { -1.0 } else { 1.0 };
            let scale = if inverse { 1.0 / eta } else { *eta };
            let w1v1 = dot(&w[1..], &vb[1..]);
            let zeta = w1v1 / (1.0 + w[0]);
            o[0] = scale * (w[0] * vb[0] + sign * w1v1);
            for j in 1..vb.len() {
                o[j] = scale * (vb[j] + w[j] * (sign * vb[0] + zeta));
            }
        }
    }

    /// Diagonal of `W²` on the orthant.
    pub fn lp_squared(&self) -> impl Iterator<Item = f64> + '_ {
        self.lp.iter().map(|w| w * w)
    }

    /// Dense `W²` for each SOC block, row-major.
    pub fn soc_squared(&self) -> Vec<Vec<f64>> {
        self.soc
            .iter()
            .map(|(eta, w)| {
                let q = w.len();
                // W = η·M with M = [[w₀, w₁ᵀ], [w₁, I + w₁w₁ᵀ/(1+w₀)]].
                let mut m = vec![0.0; q * q];
                m[0] = w[0];
                for j in 1..q {
                    m[j] = w[j];
                    m[j * q] = w[j];
                    for k in 1..q {
                        m[j * q + k] = w[j] * w[k] / (1.0 + w[0]) + if j == k { 1.0 } else { 0.0 };
                    }
                }
                let e2 = eta * eta;
                let mut sq = vec![0.0; q * q];
                for i in 0..q {
                    for j in i..q {
                        let v: f64 = (0..q).map(|k| m[i * q + k] * m[k * q + j]).sum::<f64>() * e2;
                        sq[i * q + j] = v;
                        sq[j * q + i] = v;
                    }
                }
                sq
            })
            .collect()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

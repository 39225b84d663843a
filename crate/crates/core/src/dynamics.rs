//! Component-form dynamics and the equivalent random linear system.
//!
//! Illiquid state `(I, K)` per asset:
//!
//! ```text
//! C  = λ⁰∘n + λ¹∘K          D  = R∘δ∘I
//! K' = K + n − C            I' = R∘I + C − D
//! ```
//!
//! The joint system adds liquid wealth `L' = hᵀR_liq − 1ᵀC + 1ᵀD + s`.

use nalgebra::DMatrix;

use crate::error::{CoreError, Result};
use crate::latent::JointDraw;

#[derive(Debug, Clone, PartialEq)]
pub struct IlliquidState {
    pub i: Vec<f64>,
    pub k: Vec<f64>,
}

impl IlliquidState {
    pub fn zero(n_ill: usize) -> Self {
        Self {
            i: vec![0.0; n_ill],
            k: vec![0.0; n_ill],
        }
    }

    pub fn n_ill(&self) -> usize {
        self.i.len()
    }

    /// `(I, K)` stacked.
    pub fn to_vec(&self) -> Vec<f64> {
        self.i.iter().chain(&self.k).copied().collect()
    }

    pub fn from_slice(x: &[f64]) -> Self {
        let n = x.len() / 2;
        Self {
            i: x[..n].to_vec(),
            k: x[n..].to_vec(),
        }
    }

    fn is_valid(&self) -> bool {
        self.i.len() == self.k.len() && self.i.iter().chain(&self.k).all(|v| v.is_finite() && *v >= 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    pub l: f64,
    pub ill: IlliquidState,
}

impl JointState {
    pub fn zero(n_ill: usize) -> Self {
        Self {
            l: 0.0,
            ill: IlliquidState::zero(n_ill),
        }
    }

    /// All wealth in liquid form.
    pub fn cash(l: f64, n_ill: usize) -> Self {
        Self {
            l,
            ill: IlliquidState::zero(n_ill),
        }
    }

    /// Total wealth `W = L + 1ᵀI`.
    pub fn wealth(&self) -> f64 {
        self.l + self.ill.i.iter().sum::<f64>()
    }

    /// `(L, I, K)` stacked.
    pub fn to_vec(&self) -> Vec<f64> {
        std::iter::once(self.l).chain(self.ill.to_vec()).collect()
    }

    pub fn from_slice(x: &[f64]) -> Self {
        Self {
            l: x[0],
            ill: IlliquidState::from_slice(&x[1..]),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::from_slice(&self.to_vec().iter().map(|v| v * c).collect::<Vec<_>>())
    }
}

/// Liquid allocation `h`, commitments `n`, outside cash `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct Control {
    pub h: Vec<f64>,
    pub n: Vec<f64>,
    pub s: f64,
}

impl Control {
    pub fn zero(n_liq: usize, n_ill: usize) -> Self {
        Self {
            h: vec![0.0; n_liq],
            n: vec![0.0; n_ill],
            s: 0.0,
        }
    }

    /// `(h, n, s)` stacked.
    pub fn to_vec(&self) -> Vec<f64> {
        self.h
            .iter()
            .chain(&self.n)
            .copied()
            .chain(std::iter::once(self.s))
            .collect()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            h: self.h.iter().map(|v| v * c).collect(),
            n: self.n.iter().map(|v| v * c).collect(),
            s: self.s * c,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IlliquidStep {
    pub next: IlliquidState,
    pub calls: Vec<f64>,
    pub dists: Vec<f64>,
}

/// Advances the illiquid state by one period.
pub fn step_illiquid(state: &IlliquidState, n: &[f64], draw: &JointDraw) -> Result<IlliquidStep> {
    let m = state.n_ill();
    if n.len() != m || draw.n_ill() != m {
        return Err(CoreError::Dimension(format!(
            "state has {m} illiquid assets, commitment {} and draw {}",
            n.len(),
            draw.n_ill()
        )));
    }
    if !state.is_valid() {
        return Err(CoreError::Argument(format!("invalid illiquid state {state:?}")));
    }
    if let Some(v) = n.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
        return Err(CoreError::Argument(format!("negative or non-finite commitment {v}")));
    }
    let mut next = IlliquidState::zero(m);
    let mut calls = vec![0.0; m];
    let mut dists = vec![0.0; m];
    for j in 0..m {
        let c = draw.lambda0[j] * n[j] + draw.lambda1[j] * state.k[j];
        let d = draw.r_ill[j] * draw.delta[j] * state.i[j];
        calls[j] = c;
        dists[j] = d;
        // Written as convex combinations so rounding cannot push them below 0.
        next.k[j] = (1.0 - draw.lambda0[j]) * n[j] + (1.0 - draw.lambda1[j]) * state.k[j];
        next.i[j] = draw.r_ill[j] * (1.0 - draw.delta[j]) * state.i[j] + c;
    }
    Ok(IlliquidStep { next, calls, dists })
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointStep {
    /// Liquid wealth may be negative here; the caller decides how to cover it.
    pub next: JointState,
    pub calls: Vec<f64>,
    pub dists: Vec<f64>,
}

/// Advances the joint state by one period without any forced injection.
pub fn step_joint(state: &JointState, u: &Control, draw: &JointDraw) -> Result<JointStep> {
    if u.h.len() != draw.n_liq() {
        return Err(CoreError::Dimension(format!(
            "allocation has {} entries for {} liquid assets",
            u.h.len(),
            draw.n_liq()
        )));
    }
    if u.h.iter().chain(std::iter::once(&u.s)).any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(CoreError::Argument("negative or non-finite allocation or cash".into()));
    }
    let ill = step_illiquid(&state.ill, &u.n, draw)?;
    let liquid_return: f64 = u.h.iter().zip(&draw.r_liq).map(|(h, r)| h * r).sum();
    let l = liquid_return - ill.calls.iter().sum::<f64>() + ill.dists.iter().sum::<f64>() + u.s;
    Ok(JointStep {
        next: JointState { l, ill: ill.next },
        calls: ill.calls,
        dists: ill.dists,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SystemLayout {
    /// State `(I, K)`, control `n`, output `(I, K, C, D)`.
    IlliquidOnly,
    /// State `(L, I, K)`, control `(h, n, s)`, output `(L, I, K, C, D)`.
    Joint,
}

impl SystemLayout {
    pub fn state_dim(self, n_ill: usize) -> usize {
        match self {
            Self::IlliquidOnly => 2 * n_ill,
            Self::Joint => 1 + 2 * n_ill,
        }
    }

    pub fn control_dim(self, n_ill: usize, n_liq: usize) -> usize {
        match self {
            Self::IlliquidOnly => n_ill,
            Self::Joint => n_liq + n_ill + 1,
        }
    }

    pub fn output_dim(self, n_ill: usize) -> usize {
        match self {
            Self::IlliquidOnly => 4 * n_ill,
            Self::Joint => 1 + 4 * n_ill,
        }
    }
}

/// `x' = A x + B u`, `y = F x + G u`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrices {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub f: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub layout: SystemLayout,
}

impl SystemMatrices {
    pub fn zeros(layout: SystemLayout, n_ill: usize, n_liq: usize) -> Self {
        let (nx, nu, ny) = (
            layout.state_dim(n_ill),
            layout.control_dim(n_ill, n_liq),
            layout.output_dim(n_ill),
        );
        Self {
            a: DMatrix::zeros(nx, nx),
            b: DMatrix::zeros(nx, nu),
            f: DMatrix::zeros(ny, nx),
            g: DMatrix::zeros(ny, nu),
            layout,
        }
    }

    /// Overwrites every structurally nonzero entry from `draw`; the zero
    /// pattern is left untouched.
    pub fn fill(&mut self, draw: &JointDraw) {
        let m = draw.n_ill();
        // Offsets of I and K in the state, n in the control, and the
        // (I, K, C, D) output rows.
        let (oi, ok, on, oy) = match self.layout {
            SystemLayout::IlliquidOnly => (0, m, 0, 0),
            SystemLayout::Joint => (1, 1 + m, draw.n_liq(), 1),
        };
        for j in 0..m {
            let (r, d, l0, l1) = (draw.r_ill[j], draw.delta[j], draw.lambda0[j], draw.lambda1[j]);
            self.a[(oi + j, oi + j)] = r * (1.0 - d);
            self.a[(oi + j, ok + j)] = l1;
            self.a[(ok + j, ok + j)] = 1.0 - l1;
            self.b[(oi + j, on + j)] = l0;
            self.b[(ok + j, on + j)] = 1.0 - l0;

            self.f[(oy + j, oi + j)] = 1.0;
            self.f[(oy + m + j, ok + j)] = 1.0;
            self.f[(oy + 2 * m + j, ok + j)] = l1;
            self.f[(oy + 3 * m + j, oi + j)] = r * d;
            self.g[(oy + 2 * m + j, on + j)] = l0;
        }
        if self.layout == SystemLayout::Joint {
            for j in 0..m {
                self.a[(0, oi + j)] = draw.delta[j] * draw.r_ill[j];
                self.a[(0, ok + j)] = -draw.lambda1[j];
                self.b[(0, on + j)] = -draw.lambda0[j];
            }
            for (k, &r) in draw.r_liq.iter().enumerate() {
                self.b[(0, k)] = r;
            }
            self.b[(0, on + m)] = 1.0;
            self.f[(0, 0)] = 1.0;
        }
    }
}

pub fn build_matrices(draw: &JointDraw, layout: SystemLayout) -> SystemMatrices {
    let mut m = SystemMatrices::zeros(layout, draw.n_ill(), draw.n_liq());
    m.fill(draw);
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn draw(r: f64, delta: f64, l1: f64, l0: f64) -> JointDraw {
        JointDraw {
            r_ill: vec![r],
            r_liq: vec![],
            lambda0: vec![l0],
            lambda1: vec![l1],
            delta: vec![delta],
        }
    }

    #[test]
    fn scalar_matrices() {
        let m = build_matrices(&draw(1.1, 0.5, 0.4, 0.2), SystemLayout::IlliquidOnly);
        let want_a = DMatrix::from_row_slice(2, 2, &[0.55, 0.4, 0.0, 0.6]);
        assert!((m.a - want_a).abs().max() < 1e-15);
        assert_eq!(m.b.as_slice(), &[0.2, 0.8]);
    }

    #[test]
    fn call_from_fresh_commitment() {
        let s = step_illiquid(&IlliquidState::zero(1), &[1.0], &draw(1.0, 0.3, 0.256, 0.128)).unwrap();
        assert!((s.calls[0] - 0.128).abs() < 1e-15);
        assert!((s.next.k[0] - 0.872).abs() < 1e-15);
    }

    #[test]
    fn zero_state_is_fixed_point() {
        let s = step_illiquid(&IlliquidState::zero(1), &[0.0], &draw(1.3, 0.3, 0.5, 0.25)).unwrap();
        assert_eq!(s.next, IlliquidState::zero(1));
        assert_eq!((s.calls[0], s.dists[0]), (0.0, 0.0));
    }

    #[test]
    fn full_immediate_call() {
        let st = IlliquidState { i: vec![2.0], k: vec![0.0] };
        let s = step_illiquid(&st, &[1.0], &draw(1.2, 0.25, 1.0, 1.0)).unwrap();
        assert_eq!(s.calls[0], 1.0);
        assert_eq!(s.next.k[0], 0.0);
        assert!((s.next.i[0] - (1.2 * 2.0 + 1.0 - s.dists[0])).abs() < 1e-15);
    }

    #[test]
    fn negative_commitment_rejected() {
        assert!(matches!(
            step_illiquid(&IlliquidState::zero(1), &[-1.0], &draw(1.0, 0.5, 0.5, 0.25)),
            Err(CoreError::Argument(_))
        ));
    }

    #[test]
    fn joint_first_row() {
        let d = JointDraw {
            r_ill: vec![1.2],
            r_liq: vec![1.05, 1.0],
            lambda0: vec![0.1],
            lambda1: vec![0.2],
            delta: vec![0.3],
        };
        let m = build_matrices(&d, SystemLayout::Joint);
        assert_eq!(m.b.row(0).iter().copied().collect::<Vec<_>>(), vec![1.05, 1.0, -0.1, 1.0]);
        assert_eq!(m.a.row(0).iter().copied().collect::<Vec<_>>(), vec![0.0, 0.3 * 1.2, -0.2]);
    }
}

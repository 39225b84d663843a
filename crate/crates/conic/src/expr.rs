//! Affine expressions over program variables.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

/// Handle to a scalar decision variable of a [`crate::ConicProgram`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// `Σ coef·var + constant`. Repeated variables are allowed and summed when
/// the program is lowered.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AffineExpr {
    pub terms: Vec<(Var, f64)>,
    pub constant: f64,
}

impl AffineExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(value: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: value,
        }
    }

    pub fn term(var: Var, coef: f64) -> Self {
        Self {
            terms: vec![(var, coef)],
            constant: 0.0,
        }
    }

    /// `Σ coefs[i]·vars[i]`.
    pub fn dot(vars: &[Var], coefs: &[f64]) -> Self {
        assert_eq!(vars.len(), coefs.len(), "dot: length mismatch");
        Self {
            terms: vars.iter().copied().zip(coefs.iter().copied()).collect(),
            constant: 0.0,
        }
    }

    pub fn sum(vars: &[Var]) -> Self {
        Self {
            terms: vars.iter().map(|&v| (v, 1.0)).collect(),
            constant: 0.0,
        }
    }

    pub fn add_term(&mut self, var: Var, coef: f64) -> &mut Self {
        self.terms.push((var, coef));
        self
    }

    pub fn with_term(mut self, var: Var, coef: f64) -> Self {
        self.terms.push((var, coef));
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .fold(self.constant, |acc, &(v, c)| acc + c * x[v.0])
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|&(_, c)| c == 0.0)
    }

    /// Largest variable index referenced, if any.
    pub(crate) fn max_var(&self) -> Option<usize> {
        self.terms.iter().map(|&(v, _)| v.0).max()
    }

    pub(crate) fn is_finite(&self) -> bool {
        self.constant.is_finite() && self.terms.iter().all(|&(_, c)| c.is_finite())
    }

    /// Merge repeated variables and drop exact zeros, sorted by variable.
    pub fn compressed(&self) -> Vec<(usize, f64)> {
        let mut t: Vec<(usize, f64)> = self.terms.iter().map(|&(v, c)| (v.0, c)).collect();
        t.sort_by_key(|&(i, _)| i);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(t.len());
        for (i, c) in t {
            match out.last_mut() {
                Some(last) if last.0 == i => last.1 += c,
                _ => out.push((i, c)),
            }
        }
        out.retain(|&(_, c)| c != 0.0);
        out
    }
}

impl From<Var> for AffineExpr {
    fn from(v: Var) -> Self {
        Self::term(v, 1.0)
    }
}

impl From<f64> for AffineExpr {
    fn from(c: f64) -> Self {
        Self::constant(c)
    }
}

impl<T: Into<AffineExpr>> Add<T> for AffineExpr {
    type Output = AffineExpr;
    fn add(mut self, rhs: T) -> AffineExpr {
        self += rhs;
        self
    }
}

impl<T: Into<AffineExpr>> AddAssign<T> for AffineExpr {
    fn add_assign(&mut self, rhs: T) {
        let rhs = rhs.into();
        self.terms.extend(rhs.terms);
        self.constant += rhs.constant;
    }
}

impl<T: Into<AffineExpr>> Sub<T> for AffineExpr {
    type Output = AffineExpr;
    fn sub(mut self, rhs: T) -> AffineExpr {
        self -= rhs;
        self
    }
}

impl<T: Into<AffineExpr>> SubAssign<T> for AffineExpr {
    fn sub_assign(&mut self, rhs: T) {
        let rhs = rhs.into();
        self.terms.extend(rhs.terms.into_iter().map(|(v, c)| (v, -c)));
        self.constant -= rhs.constant;
    }
}

impl Mul<f64> for AffineExpr {
    type Output = AffineExpr;
    fn mul(mut self, k: f64) -> AffineExpr {
        for t in &mut self.terms {
            t.1 *= k;
        }
        self.constant *= k;
        self
    }
}

impl Neg for AffineExpr {
    type Output = AffineExpr;
    fn neg(self) -> AffineExpr {
        self * -1.0
    }
}

impl Mul<f64> for Var {
    type Output = AffineExpr;
    fn mul(self, k: f64) -> AffineExpr {
        AffineExpr::term(self, k)
    }
}

impl<T: Into<AffineExpr>> Add<T> for Var {
    type Output = AffineExpr;
    fn add(self, rhs: T) -> AffineExpr {
        AffineExpr::from(self) + rhs
    }
}

impl<T: Into<AffineExpr>> Sub<T> for Var {
    type Output = AffineExpr;
    fn sub(self, rhs: T) -> AffineExpr {
        AffineExpr::from(self) - rhs
    }
}

//! Solver-independent description of a convex conic program.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use crate::expr::{AffineExpr, Var};
use crate::ProgramError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// `weight · Σ rows[i]²`, i.e. a quadratic `(Mx+m)ᵀ(Mx+m)` kept in factor
/// form so convexity holds by construction. Penalties always worsen the
/// objective: they are added when minimizing and subtracted when maximizing.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticPenalty {
    pub weight: f64,
    pub rows: Vec<AffineExpr>,
}

/// `‖v‖₂ ≤ t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SocBlock {
    pub t: AffineExpr,
    pub v: Vec<AffineExpr>,
}

impl SocBlock {
    /// `‖v(x)‖ − t(x)`; nonpositive when satisfied.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let norm = self.v.iter().map(|e| e.eval(x).powi(2)).sum::<f64>().sqrt();
        norm - self.t.eval(x)
    }
}

/// A convex program over scalar variables:
///
/// ```text
/// minimize / maximize   objective(x) ∓ Σ penalties
/// subject to            equalities(x) = 0
///                       nonnegatives(x) ≥ 0
///                       ‖v_k(x)‖₂ ≤ t_k(x)
/// ```
#[derive(Debug, Clone)]
pub struct ConicProgram {
    names: Vec<String>,
    index: HashMap<String, usize>,
    pub sense: Sense,
    pub objective: AffineExpr,
    pub penalties: Vec<QuadraticPenalty>,
    pub equalities: Vec<AffineExpr>,
    pub nonnegatives: Vec<AffineExpr>,
    pub socs: Vec<SocBlock>,
}

impl ConicProgram {
    pub fn new(sense: Sense) -> Self {
        Self {
            names: Vec::new(),
            index: HashMap::new(),
            sense,
            objective: AffineExpr::zero(),
            penalties: Vec::new(),
            equalities: Vec::new(),
            nonnegatives: Vec::new(),
            socs: Vec::new(),
        }
    }

    /// Adds a free scalar variable. Names must be unique.
    pub fn var(&mut self, name: impl Into<String>) -> Var {
        let name = name.into();
        let id = self.names.len();
        let previous = self.index.insert(name.clone(), id);
        assert!(previous.is_none(), "duplicate variable name {name}");
        self.names.push(name);
        Var(id)
    }

    /// Adds `len` variables named `prefix[i]`.
    pub fn vars(&mut self, prefix: &str, len: usize) -> Vec<Var> {
        (0..len).map(|i| self.var(format!("{prefix}[{i}]"))).collect()
    }

    /// Adds a variable constrained to be nonnegative.
    pub fn nonneg_var(&mut self, name: impl Into<String>) -> Var {
        let v = self.var(name);
        self.nonnegatives.push(v.into());
        v
    }

    pub fn nonneg_vars(&mut self, prefix: &str, len: usize) -> Vec<Var> {
        (0..len)
            .map(|i| self.nonneg_var(format!("{prefix}[{i}]")))
            .collect()
    }

    pub fn set_objective(&mut self, objective: impl Into<AffineExpr>) {
        self.objective = objective.into();
    }

    pub fn add_penalty(&mut self, weight: f64, rows: Vec<AffineExpr>) {
        self.penalties.push(QuadraticPenalty { weight, rows });
    }

    /// `lhs = rhs`.
    pub fn equal(&mut self, lhs: impl Into<AffineExpr>, rhs: impl Into<AffineExpr>) {
        self.equalities.push(lhs.into() - rhs.into());
    }

    /// `lhs ≥ rhs`.
    pub fn at_least(&mut self, lhs: impl Into<AffineExpr>, rhs: impl Into<AffineExpr>) {
        self.nonnegatives.push(lhs.into() - rhs.into());
    }

    /// `lhs ≤ rhs`.
    pub fn at_most(&mut self, lhs: impl Into<AffineExpr>, rhs: impl Into<AffineExpr>) {
        self.nonnegatives.push(rhs.into() - lhs.into());
    }

    /// `‖v‖₂ ≤ t`.
    pub fn soc(&mut self, t: impl Into<AffineExpr>, v: Vec<AffineExpr>) {
        self.socs.push(SocBlock { t: t.into(), v });
    }

    pub fn num_vars(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn lookup(&self, name: &str) -> Option<Var> {
        self.index.get(name).map(|&i| Var(i))
    }

    pub(crate) fn shared_names(&self) -> Arc<[String]> {
        self.names.clone().into()
    }

    /// Objective value at `x` in the program's own sense, penalties included.
    pub fn objective_value(&self, x: &[f64]) -> f64 {
        let pen: f64 = self
            .penalties
            .iter()
            .map(|p| p.weight * p.rows.iter().map(|r| r.eval(x).powi(2)).sum::<f64>())
            .sum();
        match self.sense {
            Sense::Minimize => self.objective.eval(x) + pen,
            Sense::Maximize => self.objective.eval(x) - pen,
        }
    }

    /// Largest constraint violation at `x`, scaled by `1 + |constant|` of the
    /// offending row.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let scale = |e: &AffineExpr| 1.0 + e.constant.abs();
        let eq = self
            .equalities
            .iter()
            .map(|e| e.eval(x).abs() / scale(e))
            .fold(0.0, f64::max);
        let nn = self
            .nonnegatives
            .iter()
            .map(|e| (-e.eval(x)).max(0.0) / scale(e))
            .fold(0.0, f64::max);
        let soc = self
            .socs
            .iter()
            .map(|b| {
                let s = 1.0 + b.t.constant.abs() + b.v.iter().map(|e| e.constant.abs()).sum::<f64>();
                b.violation(x).max(0.0) / s
            })
            .fold(0.0, f64::max);
        eq.max(nn).max(soc)
    }

    /// Structural convexity audit: finite data, nonnegative penalty weights,
    /// every referenced variable exists, and every cone is well formed.
    pub fn audit(&self) -> Result<(), ProgramError> {
        let n = self.num_vars();
        let check = |e: &AffineExpr, what: &str| -> Result<(), ProgramError> {
            if !e.is_finite() {
                return Err(ProgramError::NonFinite(what.to_string()));
            }
            if let Some(i) = e.max_var() {
                if i >= n {
                    return Err(ProgramError::UnknownVariable(i));
                }
            }
            Ok(())
        };
        check(&self.objective, "objective")?;
        for (k, p) in self.penalties.iter().enumerate() {
            if !(p.weight >= 0.0) || !p.weight.is_finite() {
                return Err(ProgramError::NegativeWeight(k, p.weight));
            }
            for r in &p.rows {
                check(r, "penalty")?;
            }
        }
        for e in &self.equalities {
            check(e, "equality")?;
        }
        for e in &self.nonnegatives {
            check(e, "nonnegativity")?;
        }
        for (k, b) in self.socs.iter().enumerate() {
            if b.v.is_empty() {
                return Err(ProgramError::EmptyCone(k));
            }
            check(&b.t, "cone")?;
            for e in &b.v {
                check(e, "cone")?;
            }
        }
        Ok(())
    }

    /// Plain-text listing of the program, one constraint per line, for
    /// cross-checking against an external modeling tool.
    pub fn to_text(&self) -> String {
        let fmt_expr = |e: &AffineExpr| -> String {
            let mut s = String::new();
            for (i, c) in e.compressed() {
                let _ = write!(s, "{c:+e}*{} ", self.names[i]);
            }
            if e.constant != 0.0 || s.is_empty() {
                let _ = write!(s, "{:+e}", e.constant);
            }
            s.trim_end().to_string()
        };
        let mut out = String::new();
        let _ = writeln!(out, "variables {}", self.num_vars());
        for (i, name) in self.names.iter().enumerate() {
            let _ = writeln!(out, "  x{i} {name}");
        }
        let sense = match self.sense {
            Sense::Minimize => "minimize",
            Sense::Maximize => "maximize",
        };
        let _ = writeln!(out, "{sense} {}", fmt_expr(&self.objective));
        for p in &self.penalties {
            let rows: Vec<String> = p.rows.iter().map(|r| format!("({})", fmt_expr(r))).collect();
            let _ = writeln!(out, "  penalty {:e} * sumsq[{}]", p.weight, rows.join(", "));
        }
        let _ = writeln!(out, "equalities {}", self.equalities.len());
        for e in &self.equalities {
            let _ = writeln!(out, "  {} = 0", fmt_expr(e));
        }
        let _ = writeln!(out, "nonnegatives {}", self.nonnegatives.len());
        for e in &self.nonnegatives {
            let _ = writeln!(out, "  {} >= 0", fmt_expr(e));
        }
        let _ = writeln!(out, "second_order_cones {}", self.socs.len());
        for b in &self.socs {
            let v: Vec<String> = b.v.iter().map(|r| format!("({})", fmt_expr(r))).collect();
            let _ = writeln!(out, "  norm[{}] <= {}", v.join(", "), fmt_expr(&b.t));
        }
        out
    }
}

//! A small second-order cone modeling layer and interior-point solver.
//!
//! Programs are built from named scalar variables and affine expressions
//! ([`ConicProgram`]), audited for structural convexity, and solved by a
//! primal-dual interior-point method with a sparse KKT factorization.
//!
//! ```
//! use pacer_conic::{solve, ConicProgram, Sense, SolveStatus};
//!
//! let mut p = ConicProgram::new(Sense::Minimize);
//! let t = p.var("t");
//! p.set_objective(t);
//! p.soc(t, vec![3.0.into(), 4.0.into()]);
//! let r = solve(&p, &Default::default()).unwrap();
//! assert_eq!(r.status, SolveStatus::Optimal);
//! assert!((r.value(t) - 5.0).abs() < 1e-7);
//! ```

mod cone;
mod expr;
mod ipm;
mod ldl;
mod program;

use std::sync::Arc;

pub use expr::{AffineExpr, Var};
pub use program::{ConicProgram, QuadraticPenalty, Sense, SocBlock};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProgramError {
    #[error("non-finite coefficient in {0}")]
    NonFinite(String),
    #[error("expression references unknown variable index {0}")]
    UnknownVariable(usize),
    #[error("penalty {0} has invalid weight {1}")]
    NegativeWeight(usize, f64),
    #[error("second-order cone {0} has no vector part")]
    EmptyCone(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    /// A certificate of primal infeasibility was found.
    Infeasible,
    /// A certificate of dual infeasibility was found.
    Unbounded,
    /// Iteration limit or numerical breakdown; the returned point is the last
    /// iterate and may be inaccurate.
    NumericalLimit,
}

/// Relative primal/dual residuals and duality gap at the final iterate.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
    pub relative_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    pub max_iterations: usize,
    pub feasibility_tol: f64,
    pub absolute_gap_tol: f64,
    pub relative_gap_tol: f64,
    /// Looser tolerance accepted when the iteration limit is hit or progress
    /// stalls.
    pub reduced_tol: f64,
    pub step_fraction: f64,
    pub static_regularization: f64,
    pub dynamic_eps: f64,
    pub dynamic_delta: f64,
    pub refinement_steps: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            feasibility_tol: 1e-9,
            absolute_gap_tol: 1e-14,
            relative_gap_tol: 1e-11,
            reduced_tol: 1e-6,
            step_fraction: 0.99,
            static_regularization: 1e-9,
            dynamic_eps: 1e-13,
            dynamic_delta: 1e-7,
            refinement_steps: 10,
        }
    }
}

impl SolverSettings {
    /// Default settings with all convergence tolerances set to `tol`.
    pub fn with_tolerance(tol: f64) -> Self {
        Self {
            feasibility_tol: tol,
            absolute_gap_tol: tol,
            relative_gap_tol: tol,
            reduced_tol: tol.max(1e-6),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// Primal values indexed by [`Var::index`]; NaN when no primal point is
    /// available.
    pub primal: Vec<f64>,
    pub names: Arc<[String]>,
    /// Objective in the program's own sense, penalties included.
    pub objective: f64,
    pub iterations: usize,
    pub residuals: Residuals,
}

impl SolveResult {
    pub fn value(&self, v: Var) -> f64 {
        self.primal[v.index()]
    }

    pub fn values(&self, vs: &[Var]) -> Vec<f64> {
        vs.iter().map(|&v| self.value(v)).collect()
    }

    pub fn eval(&self, e: &AffineExpr) -> f64 {
        e.eval(&self.primal)
    }

    /// Value of a variable by name.
    pub fn get(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.primal[i])
    }
}

/// Audits and solves `program`.
pub fn solve(program: &ConicProgram, settings: &SolverSettings) -> Result<SolveResult, ProgramError> {
    program.audit()?;
    Ok(ipm::solve(program, settings))
}

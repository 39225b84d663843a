//! Stochastic dynamics of illiquid commitments, their mean-system
//! approximation, and the planning policies built on it.
//!
//! Each period an investor holds liquid wealth `L`, illiquid wealth `I` and
//! uncalled commitments `K`. New commitments `n` are called over time with
//! random intensities, illiquid holdings distribute cash back, and the
//! policies in [`policy`] decide how much to commit and how to hold the
//! liquid part.

pub mod dynamics;
pub mod error;
pub mod frontier;
pub mod latent;
pub mod mean;
pub mod moments;
pub mod normal;
pub mod policy;
pub mod presets;
pub mod programs;
pub mod response;
pub mod sim;

pub use dynamics::{build_matrices, step_illiquid, step_joint, Control, IlliquidState, JointState, SystemLayout, SystemMatrices};
pub use error::{CoreError, Result};
pub use latent::{JointDraw, LatentDistribution, Layout};
pub use mean::{mean_matrices, MeanMatrices, MeanMatrixCache};
pub use moments::ReturnMoments;
pub use pacer_conic::{SolveStatus, SolverSettings};
pub use response::{impulse_response, step_response, steady_state_gains, Output, SteadyStateGains};

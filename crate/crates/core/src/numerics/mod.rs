//! Dense linear algebra, exact optimal transport, the optimizer and the
//! finite-difference checker shared by every other module.

mod gradcheck;
mod linalg;
mod matrix;
mod optim;
mod transport;

pub use gradcheck::{central_difference, finite_diff_check, FD_STEP};
pub use linalg::{solve_linear, PIVOT_TOLERANCE};
pub use matrix::Matrix;
pub use optim::{AdamConfig, OptimizerState};
pub use transport::{min_cost_transport, wasserstein1, DiscreteMeasure, MASS_TOLERANCE};

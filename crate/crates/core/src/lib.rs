//! Dual policy iteration for constrained zero-sum Markov games.
//!
//! A protagonist maximizes discounted reward against an adversary while
//! keeping a state constraint `h(x) >= 0` satisfied forever. The safety
//! side is solved with a discounted minimax fixed point whose nonnegative
//! level set is a robust controlled-invariant set; the task side is then
//! solved as a matrix game restricted to that set.
//!
//! ```
//! use dualpi::{dpi, envs::reference};
//!
//! let spec = reference::absorbing_trap();
//! let res = dpi::run(&spec, &dpi::DpiConfig::default()).unwrap();
//! assert!(res.inv.is_member(0) && !res.inv.is_member(1));
//! assert_eq!(res.pi.row(0), &[1.0, 0.0]);
//! ```

pub mod dpi;
pub mod envs;
pub mod error;
pub mod fixed_point;
pub mod game;
pub mod matrix_game;
pub mod oracle;
pub mod perf;
pub mod qtable;
pub mod safety;

pub use dpi::{DpiConfig, DpiResult, DpiStep, DpiTrace};
pub use error::{Error, Result};
pub use fixed_point::{FixedPoint, Operator, SolverSettings};
pub use game::{validate, DetPolicy, GameSpec, MixedPolicy, Role, Trajectory, ValidationReport, Violation};
pub use matrix_game::{MatrixGameSolution, RestrictedMatrixGame};
pub use qtable::{PerfQ, QTable, SafetyQ};
pub use safety::InvariantSet;

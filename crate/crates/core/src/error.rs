use thiserror::Error;

/// Failures raised by the solvers and oracles.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid game: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("fixed point not reached: residual {residual:e} > tol {tol:e} after {iters} sweeps")]
    MaxIterExceeded { residual: f64, tol: f64, iters: usize },

    #[error(
        "successor {next} of member state {state} under admissible action {prot}/{adv} is not a member"
    )]
    NonMemberSuccessor {
        state: usize,
        prot: usize,
        adv: usize,
        next: usize,
    },

    #[error("infeasible: max max min Q_h^* < 0 (best value {best})")]
    InfeasibleGame { best: f64 },

    #[error("matrix game certification gap {gap:e} exceeds 1e-6")]
    NumericalFailure { gap: f64 },

    #[error("enumeration needs {pairs} policy pairs, budget is {budget}")]
    BudgetExceeded { pairs: f64, budget: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

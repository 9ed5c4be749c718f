//! Offline derivation of separated strategies.
//!
//! Finite scenarios go through a dynamic program over a belief grid and are
//! checked against exhaustive strategy enumeration. Scalar linear-Gaussian
//! scenarios take the closed-form path in [`lqg`].

mod dp;
mod grid;
pub mod lqg;
mod oracle;
mod table;

pub use dp::{dp_solve, BeliefPolicy, GridStrategy, SeparatedStrategy, ValueFunction, TIE_TOLERANCE};
pub use grid::{BeliefGrid, Projection, EXACT_TOLERANCE, SIMPLEX_LIMIT};
pub use lqg::{
    exact_linear_costs, lqg_grid_oracle, lqg_report, lqg_stagewise_solve, matching_control,
    self_consistent_matching, GridOracle, LinearCosts, LinearStrategy, LqgReport,
    MatchingStrategy, StagewiseReport,
};
pub use oracle::{exhaustive_oracle, OracleResult};
pub use table::{read_value_table, write_value_table, TableHeader, TableRow, TABLE_COLUMNS};

use crate::error::Result;
use crate::problem::Plant;

/// `c_t(x, u) + β·|x_next − x̂_next|²`.
pub fn penalized_stage_cost<P: Plant>(
    plant: &P,
    t: usize,
    x: P::State,
    u: P::Control,
    x_next: P::State,
    x_hat_next: P::State,
) -> Result<f64> {
    plant.penalized_stage_cost(t, x, u, x_next, x_hat_next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::{builtin_discrete_toy, builtin_lqg};
    use crate::scenarios::toy::*;

    #[test]
    fn penalty_examples() {
        let s = builtin_lqg();
        // zero stage cost at t=0, gap of 0.5
        assert_eq!(penalized_stage_cost(&s, 0, 1.0, 0.0, 2.0, 1.5).unwrap(), 0.25);
        assert_eq!(penalized_stage_cost(&s, 1, 1.0, 2.0, 3.0, 3.0).unwrap(), 2.0);
        let s0 = s.with_beta(0.0).unwrap();
        assert_eq!(penalized_stage_cost(&s0, 1, 1.0, 2.0, 3.0, -3.0).unwrap(), 2.0);
        let toy = builtin_discrete_toy();
        assert_eq!(penalized_stage_cost(&toy, 0, OK, REPAIR, OK, OK).unwrap(), 0.1);
        assert_eq!(penalized_stage_cost(&toy, 0, OK, REPAIR, OK, BROKEN).unwrap(), 1.1);
        assert!(penalized_stage_cost(&toy, 2, OK, REPAIR, OK, OK).is_err());
    }
}

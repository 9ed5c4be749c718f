use rayon::prelude::*;

use crate::enumerate::{enumerate_outcomes, exact_costs_over, strategy_count, TabularStrategy};
use crate::error::Result;
use crate::problem::FiniteScenario;

/// Exhaustive search over every deterministic history-dependent strategy.
#[derive(Debug, Clone)]
pub struct OracleResult {
    pub min_cost: f64,
    pub best: TabularStrategy,
    /// Penalized cost of each strategy, by strategy index.
    pub costs: Vec<f64>,
}

/// Evaluates every strategy exactly under the penalized objective and
/// returns the cheapest; ties go to the lowest strategy index.
pub fn exhaustive_oracle(s: &FiniteScenario) -> Result<OracleResult> {
    let count = strategy_count(s)?;
    let outcomes = enumerate_outcomes(s)?;
    let costs: Vec<f64> = (0..count as u64)
        .into_par_iter()
        .map(|index| {
            let strategy = TabularStrategy::from_index(s, index as u128)?;
            Ok(exact_costs_over(s, &outcomes, &strategy)?.penalized)
        })
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, c) in costs.iter().enumerate() {
        if *c < costs[best] {
            best = i;
        }
    }
    Ok(OracleResult {
        min_cost: costs[best],
        best: TabularStrategy::from_index(s, best as u128)?,
        costs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::Distribution;
    use crate::problem::{FiniteParts, TransitionTable};
    use crate::scenarios::builtin_discrete_toy;

    #[test]
    fn single_action_has_one_strategy() {
        let parts = builtin_discrete_toy().parts();
        let s = FiniteScenario::new(FiniteParts {
            controls: vec!["idle".into()],
            model: TransitionTable::from_fn(2, 1, 2, |x, _, w| if w == 0 { x } else { 1 - x })
                .unwrap(),
            actual: TransitionTable::from_fn(2, 1, 2, |x, _, w| if w == 0 { x } else { 1 - x })
                .unwrap(),
            stage_cost: vec![0.0, 0.0],
            ..parts
        })
        .unwrap();
        let result = exhaustive_oracle(&s).unwrap();
        assert_eq!(result.costs.len(), 1);
        // broken at T: 0.8·0.2 + 0.2·0.8
        assert!((result.min_cost - 0.32).abs() < 1e-15);
    }

    #[test]
    fn toy_oracle_minimum() {
        let result = exhaustive_oracle(&builtin_discrete_toy()).unwrap();
        assert_eq!(result.costs.len(), 1024);
        assert!((result.min_cost - 0.1).abs() < 1e-12);
    }

    #[test]
    fn identical_systems_have_no_penalty() {
        let parts = builtin_discrete_toy().parts();
        let s = FiniteScenario::new(FiniteParts {
            actual: parts.model.clone(),
            initial: Distribution::dense(vec![0.5, 0.5]).unwrap(),
            ..parts
        })
        .unwrap();
        let with_penalty = exhaustive_oracle(&s).unwrap();
        let without = exhaustive_oracle(&s.with_beta(0.0).unwrap()).unwrap();
        assert_eq!(with_penalty.min_cost, without.min_cost);
    }
}

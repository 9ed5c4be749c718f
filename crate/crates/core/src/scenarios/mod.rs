//! Built-in problem instances and the scenario file format.

mod builtin;
mod format;

pub use builtin::{builtin, builtin_discrete_toy, builtin_lqg, BUILTIN_NAMES};
pub use format::{
    load_scenario, parse_scenario, serialize_finite, serialize_linear, serialize_scenario,
    ScenarioFile, SCHEMA_VERSION,
};

/// Labels of the discrete toy, for tests and examples that build strategies
/// by hand.
pub mod toy {
    pub use super::builtin::{BROKEN, CALM, IDLE, OK, REPAIR, SHOCK};
}

/// Resolves a `--scenario` argument: `builtin:<name>` or a file path.
pub fn resolve(spec: &str) -> crate::Result<crate::problem::Scenario> {
    match spec.strip_prefix("builtin:") {
        Some(name) => builtin(name),
        None => Ok(load_scenario(spec)?.scenario),
    }
}

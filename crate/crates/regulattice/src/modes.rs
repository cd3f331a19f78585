//! Runtime-selected run modes behind a common trait.
//!
//! Each driver entry point is wrapped as a [`Mode`] and registered by
//! name, so callers (the CLI in particular) pick the algorithm variant
//! with a string and handle one output shape.

use crate::driver::{
    graph_regular_partition, regular_partition, simultaneous_partition,
    symmetric_regular_partition, PairVerdict, RunConfig, RunResult,
};
use crate::error::{Error, Result};
use crate::matrix::RealMatrix;

/// Pair verdicts of a graph run, with their tally.
#[derive(Debug, Clone)]
pub struct PairSummary {
    pub verdicts: Vec<PairVerdict>,
    pub regular: usize,
    pub irregular: usize,
    pub unknown: usize,
}

/// What any mode returns: a run result, plus pair verdicts in graph mode.
#[derive(Debug, Clone)]
pub struct ModeOutcome {
    pub result: RunResult,
    pub pairs: Option<PairSummary>,
}

/// An algorithm variant selectable by name at runtime.
pub trait Mode: Sync {
    fn name(&self) -> &'static str;
    fn summary(&self) -> &'static str;
    fn run(&self, inputs: &[RealMatrix], cfg: &RunConfig) -> Result<ModeOutcome>;
}

fn single<'a>(inputs: &'a [RealMatrix], mode: &str) -> Result<&'a RealMatrix> {
    match inputs {
        [a] => Ok(a),
        _ => Err(Error::Conflict(format!(
            "mode '{mode}' takes exactly one matrix, got {}",
            inputs.len()
        ))),
    }
}

struct GeneralMode;

impl Mode for GeneralMode {
    fn name(&self) -> &'static str {
        "general"
    }
    fn summary(&self) -> &'static str {
        "independent row and column partitions of one real matrix"
    }
    fn run(&self, inputs: &[RealMatrix], cfg: &RunConfig) -> Result<ModeOutcome> {
        let result = regular_partition(single(inputs, self.name())?, cfg)?;
        Ok(ModeOutcome { result, pairs: None })
    }
}

struct SymmetricMode;

impl Mode for SymmetricMode {
    fn name(&self) -> &'static str {
        "symmetric"
    }
    fn summary(&self) -> &'static str {
        "one partition used on both axes of a square matrix"
    }
    fn run(&self, inputs: &[RealMatrix], cfg: &RunConfig) -> Result<ModeOutcome> {
        let result = symmetric_regular_partition(single(inputs, self.name())?, cfg)?;
        Ok(ModeOutcome { result, pairs: None })
    }
}

struct GraphMode;

impl Mode for GraphMode {
    fn name(&self) -> &'static str {
        "graph"
    }
    fn summary(&self) -> &'static str {
        "vertex partition of a weighted graph with per-pair verdicts"
    }
    fn run(&self, inputs: &[RealMatrix], cfg: &RunConfig) -> Result<ModeOutcome> {
        let out = graph_regular_partition(single(inputs, self.name())?, cfg)?;
        Ok(ModeOutcome {
            result: out.run,
            pairs: Some(PairSummary {
                verdicts: out.pairs,
                regular: out.pairs_regular,
                irregular: out.pairs_irregular,
                unknown: out.pairs_unknown,
            }),
        })
    }
}

struct MultiMode;

impl Mode for MultiMode {
    fn name(&self) -> &'static str {
        "multi"
    }
    fn summary(&self) -> &'static str {
        "one block partition simultaneously regular for several matrices"
    }
    fn run(&self, inputs: &[RealMatrix], cfg: &RunConfig) -> Result<ModeOutcome> {
        let result = simultaneous_partition(inputs, cfg)?;
        Ok(ModeOutcome { result, pairs: None })
    }
}

static REGISTRY: [&dyn Mode; 4] = [&GeneralMode, &SymmetricMode, &GraphMode, &MultiMode];

/// All registered modes.
pub fn modes() -> &'static [&'static dyn Mode] {
    &REGISTRY
}

/// Looks a mode up by its registered name.
pub fn find_mode(name: &str) -> Result<&'static dyn Mode> {
    modes()
        .iter()
        .copied()
        .find(|m| m.name() == name)
        .ok_or_else(|| Error::UnknownMode(name.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driver::RunStatus;

    #[test]
    fn registry_names_are_unique_and_resolvable() {
        let names: Vec<&str> = modes().iter().map(|m| m.name()).collect();
        assert_eq!(names, ["general", "symmetric", "graph", "multi"]);
        for name in names {
            assert_eq!(find_mode(name).unwrap().name(), name);
        }
        assert!(matches!(find_mode("bogus"), Err(Error::UnknownMode(_))));
    }

    #[test]
    fn modes_delegate_and_enforce_arity() {
        let cfg = RunConfig::new(0.3).unwrap();
        let a = RealMatrix::from_fn(32, 32, |_, _| 0.0).unwrap();
        let two = vec![a.clone(), a.clone()];

        let out = find_mode("general").unwrap().run(std::slice::from_ref(&a), &cfg).unwrap();
        assert_eq!(out.result.status, RunStatus::CertifiedRegular);
        assert!(out.pairs.is_none());

        assert!(find_mode("general").unwrap().run(&two, &cfg).is_err());
        assert!(find_mode("symmetric").unwrap().run(&two, &cfg).is_err());
        assert!(find_mode("graph").unwrap().run(&two, &cfg).is_err());

        let multi = find_mode("multi").unwrap().run(&two, &cfg).unwrap();
        assert!(multi.pairs.is_none());
        assert_eq!(multi.result.status, RunStatus::CertifiedRegular);

        // The graph driver halves epsilon, so it needs room for more
        // initial classes.
        let g = RealMatrix::from_fn(64, 64, |_, _| 0.0).unwrap();
        let graph = find_mode("graph")
            .unwrap()
            .run(std::slice::from_ref(&g), &RunConfig::new(0.4).unwrap())
            .unwrap();
        assert!(graph.pairs.is_some());
    }

    #[test]
    fn symmetric_mode_rejects_rectangular_input() {
        let cfg = RunConfig::new(0.3).unwrap();
        let a = RealMatrix::from_fn(8, 10, |_, _| 1.0).unwrap();
        assert!(find_mode("symmetric").unwrap().run(std::slice::from_ref(&a), &cfg).is_err());
    }
}

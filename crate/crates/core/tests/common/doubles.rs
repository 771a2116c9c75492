//! Policy test doubles.

use sid_core::datasets::Goal;
use sid_core::envmodel::EnvironmentGraph;
use sid_core::policy::{Action, AgentState};
use sid_core::rollout::{NavigationPolicy, Navigator};
use sid_core::Result;

/// Uniform over stop and every frontier viewpoint.
pub struct Uniform;

/// Uniform over the frontier; never stops.
pub struct NeverStop;

/// Stops immediately.
pub struct StopAtOnce;

struct Nav {
    allow_stop: bool,
    only_stop: bool,
}

impl Navigator for Nav {
    fn distribution(&mut self, state: &AgentState) -> Result<(Vec<Action>, Vec<f64>)> {
        let mut actions = Vec::new();
        if self.allow_stop {
            actions.push(Action::Stop);
        }
        if !self.only_stop {
            actions.extend(state.frontier().iter().map(|&n| Action::Goto(n)));
        }
        let p = 1.0 / actions.len() as f64;
        let probs = vec![p; actions.len()];
        Ok((actions, probs))
    }
}

impl NavigationPolicy for Uniform {
    fn begin<'a>(&'a self, _: &'a EnvironmentGraph, _: &Goal) -> Result<Box<dyn Navigator + 'a>> {
        Ok(Box::new(Nav { allow_stop: true, only_stop: false }))
    }
}

impl NavigationPolicy for NeverStop {
    fn begin<'a>(&'a self, _: &'a EnvironmentGraph, _: &Goal) -> Result<Box<dyn Navigator + 'a>> {
        Ok(Box::new(Nav { allow_stop: false, only_stop: false }))
    }
}

impl NavigationPolicy for StopAtOnce {
    fn begin<'a>(&'a self, _: &'a EnvironmentGraph, _: &Goal) -> Result<Box<dyn Navigator + 'a>> {
        Ok(Box::new(Nav { allow_stop: true, only_stop: true }))
    }
}

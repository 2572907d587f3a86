use super::config::SolverConfig;
use super::forward::{solve_forward, ForwardProblem, ForwardSolution};
use crate::error::{Error, Result};
use log::warn;
use rayon::prelude::*;

#[derive(Debug, Clone)]
pub struct EnsembleOutcome {
    /// Successful members with their index in the input list.
    pub members: Vec<(usize, ForwardSolution)>,
    pub failures: Vec<(usize, String)>,
}

impl EnsembleOutcome {
    pub fn solutions(&self) -> impl Iterator<Item = &ForwardSolution> {
        self.members.iter().map(|(_, s)| s)
    }
}

/// Runs every member; failed members are dropped with a warning.
pub fn solve_ensemble(p: &ForwardProblem, configs: &[SolverConfig]) -> Result<EnsembleOutcome> {
    if configs.is_empty() {
        return Err(Error::Config("solver ensemble is empty".into()));
    }
    let results: Vec<Result<ForwardSolution>> = configs.par_iter().map(|c| solve_forward(p, c)).collect();
    let mut members = Vec::new();
    let mut failures = Vec::new();
    let mut first_error = None;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(s) => members.push((i, s)),
            Err(e) => {
                warn!("ensemble member {i} failed: {e}");
                failures.push((i, e.to_string()));
                first_error.get_or_insert(e);
            }
        }
    }
    if members.is_empty() {
        return Err(first_error.expect("nonempty ensemble"));
    }
    Ok(EnsembleOutcome { members, failures })
}

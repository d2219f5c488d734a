//! Posterior beliefs after completed tests. Diagnostics only; no policy
//! reads them.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::index::{AnomalyModel, PRIOR_SUM_TOLERANCE};
use crate::observation::HypothesisPair;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefState {
    pub beliefs: Vec<f64>,
}

impl BeliefState {
    pub fn new(beliefs: Vec<f64>) -> Result<Self> {
        if let Some(p) = beliefs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(domain(format!("belief {p} outside [0, 1]")));
        }
        Ok(Self { beliefs })
    }

    pub fn sum(&self) -> f64 {
        self.beliefs.iter().sum()
    }

    fn check_index(&self, probed: usize) -> Result<()> {
        if probed >= self.beliefs.len() {
            return Err(domain(format!(
                "probed index {probed} out of range for {} components",
                self.beliefs.len()
            )));
        }
        Ok(())
    }
}

/// `pi / (pi + (1 - pi) e^{-llr})` evaluated without overflow.
fn posterior(pi: f64, llr: f64) -> f64 {
    if pi == 0.0 || pi == 1.0 {
        return pi;
    }
    sigmoid(pi.ln() - (-pi).ln_1p() + llr)
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Independent model: only the probed belief moves.
pub fn belief_update_independent_llr(state: &BeliefState, probed: usize, llr: f64) -> Result<BeliefState> {
    state.check_index(probed)?;
    let mut next = state.clone();
    next.beliefs[probed] = posterior(state.beliefs[probed], llr);
    Ok(next)
}

/// Exclusive model: the probed component gets its Bayes posterior and all
/// others are rescaled by the probability that the batch came from `f0`.
pub fn belief_update_exclusive_llr(state: &BeliefState, probed: usize, llr: f64) -> Result<BeliefState> {
    state.check_index(probed)?;
    let total = state.sum();
    if (total - 1.0).abs() > PRIOR_SUM_TOLERANCE {
        return Err(domain(format!("exclusive beliefs must sum to 1, got {total}")));
    }
    let p = state.beliefs[probed];
    let rest: f64 = state
        .beliefs
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != probed)
        .map(|(_, b)| b)
        .sum();
    let mut next = state.clone();
    if p == 0.0 || rest <= 0.0 {
        return Ok(next);
    }
    // Log-odds of the probed component against the remaining mass; both
    // sides come from a stable sigmoid so neither is formed as 1 - x.
    let w = p.ln() + llr - rest.ln();
    let (post, other) = (sigmoid(w), sigmoid(-w));
    let scale = other / rest;
    for (k, b) in next.beliefs.iter_mut().enumerate() {
        *b = if k == probed { post } else { *b * scale };
    }
    let after = next.sum();
    if (after - 1.0).abs() > PRIOR_SUM_TOLERANCE {
        return Err(Error::Internal(format!(
            "exclusive belief update lost normalization: sum {after}"
        )));
    }
    Ok(next)
}

pub fn belief_update_independent(
    state: &BeliefState,
    probed: usize,
    batch: &[f64],
    pair: &HypothesisPair,
) -> Result<BeliefState> {
    belief_update_independent_llr(state, probed, pair.batch_llr(batch)?)
}

pub fn belief_update_exclusive(
    state: &BeliefState,
    probed: usize,
    batch: &[f64],
    pair: &HypothesisPair,
) -> Result<BeliefState> {
    belief_update_exclusive_llr(state, probed, pair.batch_llr(batch)?)
}

/// Applies one update per completed test, in completion order, returning
/// the belief trajectory starting with the prior.
pub fn replay_beliefs(
    prior: &BeliefState,
    model: AnomalyModel,
    updates: impl IntoIterator<Item = (usize, f64)>,
) -> Result<Vec<BeliefState>> {
    let mut path = vec![prior.clone()];
    for (probed, llr) in updates {
        let last = path.last().expect("nonempty");
        let next = match model {
            AnomalyModel::Independent => belief_update_independent_llr(last, probed, llr)?,
            AnomalyModel::Exclusive => belief_update_exclusive_llr(last, probed, llr)?,
        };
        path.push(next);
    }
    Ok(path)
}

//! Expected sample sizes, probing indices, orderings and the closed-form
//! expected cost of a probing order.
//!
//! Under the independent model components are probed in decreasing order
//! of `pi c / E(N)`; under the exclusive model in decreasing order of
//! `pi c / E(N | H0)`. Ties go to the smaller component id.

use std::cmp::Ordering as CmpOrdering;
use std::collections::HashMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::observation::{kl_to_boundary, CompositeSpace, HypothesisPair, KlDirection};

/// Identifier of a component. Presets number components from 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ComponentId(pub u32);

impl fmt::Display for ComponentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnomalyModel {
    /// Each component is abnormal with its own prior, independently.
    Independent,
    /// Exactly one component is abnormal; priors sum to one.
    Exclusive,
}

/// Tolerance on `sum pi = 1` for the exclusive model.
pub const PRIOR_SUM_TOLERANCE: f64 = 1e-9;

/// Expected sample sizes are floored here: a test consumes at least one
/// observation.
pub const MIN_EXPECTED_SAMPLES: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleSizes {
    pub en_h0: f64,
    pub en_h1: f64,
}

impl SampleSizes {
    /// `E(N) = pi E(N|H1) + (1 - pi) E(N|H0)`.
    pub fn mixture(&self, pi: f64) -> f64 {
        pi * self.en_h1 + (1.0 - pi) * self.en_h0
    }

    fn floored(self) -> Self {
        Self {
            en_h0: self.en_h0.max(MIN_EXPECTED_SAMPLES),
            en_h1: self.en_h1.max(MIN_EXPECTED_SAMPLES),
        }
    }
}

/// Wald's approximation to `E(N|H0)` and `E(N|H1)` for an SPRT with
/// boundaries `A = (1-alpha)/beta`, `B = (1-beta)/alpha`.
pub fn expected_sample_sizes_simple(pair: &HypothesisPair, alpha: f64, beta: f64) -> Result<SampleSizes> {
    let wald = crate::sequential::wald_boundaries(alpha, beta)?;
    let (ln_a, ln_b) = (wald.lower_a.ln(), wald.upper_b.ln());
    let d01 = pair.kl_divergence(KlDirection::NormalToAbnormal);
    let d10 = pair.kl_divergence(KlDirection::AbnormalToNormal);
    Ok(SampleSizes {
        en_h0: ((1.0 - alpha) * ln_a - alpha * ln_b) / d01,
        en_h1: ((1.0 - beta) * ln_b - beta * ln_a) / d10,
    }
    .floored())
}

/// Asymptotic expected sample sizes of a composite test with point-mass
/// priors at `design_lo` (normal) and `design_hi` (abnormal):
/// `E(N|H0) = b1 / D(lo || theta1)`, `E(N|H1) = b0 / D(hi || theta0)`.
///
/// Zero boundaries give zero before flooring; callers that care can check
/// [`is_degenerate_boundary`].
pub fn expected_sample_sizes_composite(
    space: &CompositeSpace,
    b0: f64,
    b1: f64,
    design_lo: f64,
    design_hi: f64,
) -> Result<SampleSizes> {
    if design_lo > space.theta0() || design_hi < space.theta1() {
        return Err(domain(format!(
            "design parameters ({design_lo}, {design_hi}) must lie outside the indifference \
             region ({}, {})",
            space.theta0(),
            space.theta1()
        )));
    }
    if b0 < 0.0 || b1 < 0.0 {
        return Err(domain("composite boundaries must be nonnegative"));
    }
    let d_lo = kl_to_boundary(space.family(), space.aux(), design_lo, space.theta1())?;
    let d_hi = kl_to_boundary(space.family(), space.aux(), design_hi, space.theta0())?;
    Ok(SampleSizes {
        en_h0: b1 / d_lo,
        en_h1: b0 / d_hi,
    }
    .floored())
}

pub fn is_degenerate_boundary(b0: f64, b1: f64) -> bool {
    b0 == 0.0 && b1 == 0.0
}

/// Index ingredients for one component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentProfile {
    pub id: ComponentId,
    pub pi: f64,
    pub cost: f64,
    pub en_h0: f64,
    pub en_h1: f64,
    pub en: f64,
}

impl ComponentProfile {
    pub fn new(id: ComponentId, pi: f64, cost: f64, sizes: SampleSizes) -> Result<Self> {
        if !(0.0..=1.0).contains(&pi) {
            return Err(domain(format!("prior of component {id} must lie in [0, 1], got {pi}")));
        }
        if !(cost >= 0.0 && cost.is_finite()) {
            return Err(domain(format!(
                "cost of component {id} must be finite and >= 0, got {cost}"
            )));
        }
        if !(sizes.en_h0 >= MIN_EXPECTED_SAMPLES && sizes.en_h1 >= MIN_EXPECTED_SAMPLES)
            || !sizes.en_h0.is_finite()
            || !sizes.en_h1.is_finite()
        {
            return Err(domain(format!(
                "expected sample sizes of component {id} must be finite and >= 1, got ({}, {})",
                sizes.en_h0, sizes.en_h1
            )));
        }
        Ok(Self {
            id,
            pi,
            cost,
            en_h0: sizes.en_h0,
            en_h1: sizes.en_h1,
            en: sizes.mixture(pi),
        })
    }

    pub fn sample_sizes(&self) -> SampleSizes {
        SampleSizes {
            en_h0: self.en_h0,
            en_h1: self.en_h1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndexRule {
    /// `pi c / E(N)`, optimal under the independent model.
    PiCN,
    /// `pi c / E(N|H0)`, optimal under the exclusive model.
    PiCN0,
}

impl IndexRule {
    /// The rule that is optimal for `model`.
    pub fn optimal_for(model: AnomalyModel) -> Self {
        match model {
            AnomalyModel::Independent => IndexRule::PiCN,
            AnomalyModel::Exclusive => IndexRule::PiCN0,
        }
    }
}

pub fn compute_index(profile: &ComponentProfile, rule: IndexRule) -> Result<f64> {
    let denom = match rule {
        IndexRule::PiCN => profile.en,
        IndexRule::PiCN0 => profile.en_h0,
    };
    if denom.is_nan() || denom <= 0.0 {
        return Err(domain(format!(
            "expected sample size of component {} must be positive",
            profile.id
        )));
    }
    Ok(profile.pi * profile.cost / denom)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrderRule {
    PiCN,
    PiCN0,
    /// Uniformly random permutation.
    Random,
    /// Input order.
    Fixed,
}

/// A probing order: each component id exactly once.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Ordering(Vec<ComponentId>);

impl Ordering {
    pub fn new(ids: Vec<ComponentId>) -> Result<Self> {
        let mut seen = ids.clone();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidOrdering("duplicate component id".into()));
        }
        Ok(Self(ids))
    }

    pub fn ids(&self) -> &[ComponentId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn reversed(&self) -> Self {
        Self(self.0.iter().rev().copied().collect())
    }

    /// Positions of this ordering's ids within `ids`; fails unless the
    /// ordering is a permutation of exactly those ids.
    pub fn positions_in(&self, ids: &[ComponentId]) -> Result<Vec<usize>> {
        if ids.len() != self.0.len() {
            return Err(Error::InvalidOrdering(format!(
                "ordering has {} entries for {} components",
                self.0.len(),
                ids.len()
            )));
        }
        let lookup: HashMap<ComponentId, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        if lookup.len() != ids.len() {
            return Err(Error::InvalidOrdering("duplicate component id in profile set".into()));
        }
        self.0
            .iter()
            .map(|id| {
                lookup
                    .get(id)
                    .copied()
                    .ok_or_else(|| Error::InvalidOrdering(format!("unknown component id {id}")))
            })
            .collect()
    }

    pub(crate) fn from_positions(positions: &[usize], ids: &[ComponentId]) -> Self {
        Self(positions.iter().map(|&p| ids[p]).collect())
    }
}

impl fmt::Display for Ordering {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, id) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{id}")?;
        }
        f.write_str("]")
    }
}

fn index_order(profiles: &[ComponentProfile], rule: IndexRule) -> Result<Vec<ComponentId>> {
    let mut keyed = profiles
        .iter()
        .map(|p| Ok((compute_index(p, rule)?, p.id)))
        .collect::<Result<Vec<_>>>()?;
    keyed.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(CmpOrdering::Equal).then(a.1.cmp(&b.1)));
    Ok(keyed.into_iter().map(|(_, id)| id).collect())
}

pub fn order_components<R: Rng + ?Sized>(
    profiles: &[ComponentProfile],
    rule: OrderRule,
    rng: &mut R,
) -> Result<Ordering> {
    if profiles.is_empty() {
        return Err(domain("cannot order an empty profile set"));
    }
    let ids = match rule {
        OrderRule::PiCN => index_order(profiles, IndexRule::PiCN)?,
        OrderRule::PiCN0 => index_order(profiles, IndexRule::PiCN0)?,
        OrderRule::Fixed => profiles.iter().map(|p| p.id).collect(),
        OrderRule::Random => {
            let mut ids: Vec<_> = profiles.iter().map(|p| p.id).collect();
            ids.shuffle(rng);
            ids
        }
    };
    Ordering::new(ids)
}

pub(crate) fn check_model_priors(pis: impl Iterator<Item = f64>, model: AnomalyModel) -> Result<()> {
    if model == AnomalyModel::Exclusive {
        let total: f64 = pis.sum();
        if (total - 1.0).abs() > PRIOR_SUM_TOLERANCE {
            return Err(domain(format!(
                "exclusive model needs priors summing to 1, got {total}"
            )));
        }
    }
    Ok(())
}

/// Delay contributed to later components by a component probed earlier.
fn delay_term(p: &ComponentProfile, model: AnomalyModel) -> f64 {
    match model {
        AnomalyModel::Independent => p.en,
        AnomalyModel::Exclusive => p.en_h0,
    }
}

fn cost_of_positions(profiles: &[ComponentProfile], order: &[usize], model: AnomalyModel) -> f64 {
    let mut elapsed = 0.0;
    let mut total = 0.0;
    for &k in order {
        let p = &profiles[k];
        total += p.pi * p.cost * (elapsed + p.en_h1);
        elapsed += delay_term(p, model);
    }
    total
}

/// Closed-form expected total cost of probing one component at a time in
/// `ordering`:
///
/// - independent: `sum_k pi_k c_k [ sum_{i before k} E(N_i) + E(N_k|H1) ]`
/// - exclusive: `sum_k pi_k c_k [ sum_{i before k} E(N_i|H0) + E(N_k|H1) ]`
pub fn analytic_expected_cost(profiles: &[ComponentProfile], ordering: &Ordering, model: AnomalyModel) -> Result<f64> {
    check_model_priors(profiles.iter().map(|p| p.pi), model)?;
    let ids: Vec<_> = profiles.iter().map(|p| p.id).collect();
    let order = ordering.positions_in(&ids)?;
    Ok(cost_of_positions(profiles, &order, model))
}

/// Expected cost of a uniformly random order: each other component
/// precedes `k` with probability one half.
pub fn analytic_expected_cost_random(profiles: &[ComponentProfile], model: AnomalyModel) -> Result<f64> {
    check_model_priors(profiles.iter().map(|p| p.pi), model)?;
    let total_delay: f64 = profiles.iter().map(|p| delay_term(p, model)).sum();
    Ok(profiles
        .iter()
        .map(|p| p.pi * p.cost * (0.5 * (total_delay - delay_term(p, model)) + p.en_h1))
        .sum())
}

/// Largest component count accepted by [`exhaustive_best_order`].
pub const EXHAUSTIVE_LIMIT: usize = 10;

/// Visits every permutation of `0..k` in lexicographic order.
pub(crate) fn for_each_permutation(k: usize, mut visit: impl FnMut(&[usize])) {
    let mut perm: Vec<usize> = (0..k).collect();
    loop {
        visit(&perm);
        // next lexicographic permutation
        let Some(i) = (1..k).rev().find(|&i| perm[i - 1] < perm[i]) else {
            return;
        };
        let j = (i..k).rev().find(|&j| perm[j] > perm[i - 1]).expect("successor exists");
        perm.swap(i - 1, j);
        perm[i..].reverse();
    }
}

/// Minimum analytic cost over all `K!` orders. Orders are enumerated
/// lexicographically over ids sorted ascending and the first strict
/// minimum is kept.
pub fn exhaustive_best_order(profiles: &[ComponentProfile], model: AnomalyModel) -> Result<(Ordering, f64)> {
    let k = profiles.len();
    if k == 0 {
        return Err(domain("cannot order an empty profile set"));
    }
    if k > EXHAUSTIVE_LIMIT {
        return Err(Error::TooManyComponents {
            k,
            max: EXHAUSTIVE_LIMIT,
        });
    }
    check_model_priors(profiles.iter().map(|p| p.pi), model)?;
    let mut sorted: Vec<ComponentProfile> = profiles.to_vec();
    sorted.sort_by_key(|p| p.id);
    let ids: Vec<_> = sorted.iter().map(|p| p.id).collect();
    let mut best: Option<(Vec<usize>, f64)> = None;
    for_each_permutation(k, |perm| {
        let c = cost_of_positions(&sorted, perm, model);
        if best.as_ref().is_none_or(|(_, b)| c < *b) {
            best = Some((perm.to_vec(), c));
        }
    });
    let (perm, cost) = best.expect("at least one permutation");
    Ok((Ordering::from_positions(&perm, &ids), cost))
}

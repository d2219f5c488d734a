//! Probing simulation: ground truth, per-component tests, slot scheduling
//! and cost accounting.
//!
//! A trial is split in two. [`sample_trial`] draws the ground truth and
//! runs every component's test on its own random stream, which fixes each
//! `N_k` and verdict independently of when the test is scheduled.
//! [`schedule_trial`] then lays the tests out on `M` probe slots in a
//! given order. Different orders can therefore be compared on the same
//! realizations.

mod belief;
mod monte_carlo;

pub use belief::{
    belief_update_exclusive, belief_update_exclusive_llr, belief_update_independent, belief_update_independent_llr,
    replay_beliefs, BeliefState,
};
pub use monte_carlo::{
    estimate_sample_sizes, profiles_for, run_monte_carlo, run_single_component, run_test_campaign, AggregateReport,
    ComponentStats, MonteCarloConfig, PolicyRule, SampleSizeMode, SingleTestSummary,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::index::{check_model_priors, AnomalyModel, ComponentId, Ordering, SampleSizes};
use crate::index::{expected_sample_sizes_composite, expected_sample_sizes_simple};
use crate::observation::{HypothesisPair, ObservationModel};
use crate::sequential::{CompositeTestConfig, Decision, SprtConfig, TestProcedure, TestVerdict};

/// One component: prior, cost rate, test, and the distributions its
/// observations are drawn from in each state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSpec {
    pub id: ComponentId,
    pub pi: f64,
    pub cost: f64,
    pub test: TestProcedure,
    pub normal_source: ObservationModel,
    pub abnormal_source: ObservationModel,
    design: HypothesisPair,
}

impl ComponentSpec {
    pub fn simple(id: ComponentId, pi: f64, cost: f64, pair: HypothesisPair, config: SprtConfig) -> Result<Self> {
        Self::build(
            id,
            pi,
            cost,
            TestProcedure::Sprt { pair, config },
            *pair.h0(),
            *pair.h1(),
        )
    }

    /// Composite test; observations come from `theta_h0` when normal and
    /// `theta_h1` when abnormal.
    pub fn composite(
        id: ComponentId,
        pi: f64,
        cost: f64,
        config: CompositeTestConfig,
        theta_h0: f64,
        theta_h1: f64,
    ) -> Result<Self> {
        let space = config.space();
        if theta_h0 > space.theta0() || theta_h1 < space.theta1() {
            return Err(domain(format!(
                "component {id}: sampling parameters ({theta_h0}, {theta_h1}) must lie in the \
                 normal and abnormal parameter sets"
            )));
        }
        Self::build(
            id,
            pi,
            cost,
            TestProcedure::Composite(config),
            space.model(theta_h0)?,
            space.model(theta_h1)?,
        )
    }

    fn build(
        id: ComponentId,
        pi: f64,
        cost: f64,
        test: TestProcedure,
        normal_source: ObservationModel,
        abnormal_source: ObservationModel,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&pi) {
            return Err(domain(format!("prior of component {id} must lie in [0, 1], got {pi}")));
        }
        if !(cost >= 0.0 && cost.is_finite()) {
            return Err(domain(format!(
                "cost of component {id} must be finite and >= 0, got {cost}"
            )));
        }
        let design = test.design_pair()?;
        Ok(Self {
            id,
            pi,
            cost,
            test,
            normal_source,
            abnormal_source,
            design,
        })
    }

    pub fn source(&self, abnormal: bool) -> &ObservationModel {
        if abnormal {
            &self.abnormal_source
        } else {
            &self.normal_source
        }
    }

    /// The simple pair used for likelihood ratios in belief updates.
    pub fn design_pair(&self) -> &HypothesisPair {
        &self.design
    }

    /// Closed-form expected sample sizes: Wald's approximation for the
    /// SPRT, the asymptotic boundary-over-divergence form (point priors at
    /// the sampling parameters) for composite tests.
    pub fn approximate_sample_sizes(&self) -> Result<SampleSizes> {
        match &self.test {
            TestProcedure::Sprt { pair, config } => expected_sample_sizes_simple(pair, config.alpha(), config.beta()),
            TestProcedure::Composite(cfg) => expected_sample_sizes_composite(
                cfg.space(),
                cfg.b0(),
                cfg.b1(),
                self.normal_source.theta(),
                self.abnormal_source.theta(),
            ),
        }
    }

    /// Runs this component's test on `rng`, returning the verdict and the
    /// log-likelihood ratio of the consumed batch under the design pair.
    pub fn run_test<R: Rng + ?Sized>(&self, abnormal: bool, rng: &mut R) -> Result<(TestVerdict, f64)> {
        let mut batch_llr = 0.0;
        let design = self.design;
        let stream = self
            .source(abnormal)
            .stream(rng)
            .inspect(|&y| batch_llr += design.llr_increment_unchecked(y));
        let verdict = self.test.run(stream)?;
        Ok((verdict, batch_llr))
    }
}

/// `H1` membership per component, indexed like the `specs` argument.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub abnormal: Vec<bool>,
}

impl GroundTruth {
    pub fn abnormal_ids<'a>(&'a self, specs: &'a [ComponentSpec]) -> impl Iterator<Item = ComponentId> + 'a {
        specs.iter().zip(&self.abnormal).filter(|(_, &a)| a).map(|(s, _)| s.id)
    }

    pub fn normal_ids<'a>(&'a self, specs: &'a [ComponentSpec]) -> impl Iterator<Item = ComponentId> + 'a {
        specs.iter().zip(&self.abnormal).filter(|(_, &a)| !a).map(|(s, _)| s.id)
    }

    pub fn abnormal_count(&self) -> usize {
        self.abnormal.iter().filter(|&&a| a).count()
    }
}

/// Independent: one Bernoulli draw per component. Exclusive: a single
/// categorical draw weighted by the priors.
pub fn draw_ground_truth<R: Rng + ?Sized>(
    specs: &[ComponentSpec],
    model: AnomalyModel,
    rng: &mut R,
) -> Result<GroundTruth> {
    check_model_priors(specs.iter().map(|s| s.pi), model)?;
    let abnormal = match model {
        AnomalyModel::Independent => specs.iter().map(|s| rng.random::<f64>() < s.pi).collect(),
        AnomalyModel::Exclusive => {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = None;
            for (i, s) in specs.iter().enumerate() {
                acc += s.pi;
                if u < acc && s.pi > 0.0 {
                    pick = Some(i);
                    break;
                }
            }
            // Rounding can leave u just above the running total.
            let pick = pick
                .or_else(|| specs.iter().rposition(|s| s.pi > 0.0))
                .expect("priors sum to 1");
            let mut v = vec![false; specs.len()];
            v[pick] = true;
            v
        }
    };
    Ok(GroundTruth { abnormal })
}

/// Ground truth and every component's test outcome for one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSample {
    pub truth: GroundTruth,
    pub verdicts: Vec<TestVerdict>,
    /// Batch log-likelihood ratio per component under its design pair.
    pub batch_llr: Vec<f64>,
}

pub fn sample_trial<R: Rng + ?Sized>(specs: &[ComponentSpec], model: AnomalyModel, rng: &mut R) -> Result<TrialSample> {
    let truth = draw_ground_truth(specs, model, rng)?;
    let mut verdicts = Vec::with_capacity(specs.len());
    let mut batch_llr = Vec::with_capacity(specs.len());
    for (spec, &abnormal) in specs.iter().zip(&truth.abnormal) {
        let mut own = ChaCha8Rng::seed_from_u64(rng.next_u64());
        let (v, l) = spec.run_test(abnormal, &mut own)?;
        verdicts.push(v);
        batch_llr.push(l);
    }
    Ok(TrialSample {
        truth,
        verdicts,
        batch_llr,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Declared(Decision),
    /// Cut short by an exclusive-model early stop.
    Untested,
}

/// Outcome of one trial. Vectors are indexed like the `specs` argument.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub ids: Vec<ComponentId>,
    /// `tau_k`: global time at which the component's state was declared.
    pub tau: Vec<u64>,
    /// Observations consumed by each component's own test.
    pub n: Vec<u64>,
    /// Global time of each component's first observation, if it started.
    pub start: Vec<Option<u64>>,
    pub verdict: Vec<Verdict>,
    pub truth: Vec<bool>,
    pub realized_cost: f64,
    pub order_used: Ordering,
    pub slot: Vec<Option<usize>>,
}

/// Positions assigned to slots by list scheduling, plus start and
/// declaration times. Works on plain sample sizes so that callers scoring
/// many orders avoid building full records.
pub(crate) fn list_schedule(
    sizes: &[u64],
    order: &[usize],
    slots: usize,
    tau: &mut [u64],
    start: &mut [u64],
    slot: &mut [usize],
) {
    let mut free_at = vec![0u64; slots];
    for &k in order {
        let (s, &t) = free_at
            .iter()
            .enumerate()
            .min_by_key(|&(i, &t)| (t, i))
            .expect("at least one slot");
        start[k] = t + 1;
        tau[k] = t + sizes[k];
        slot[k] = s;
        free_at[s] = tau[k];
    }
}

/// Cost `sum c_k tau_k` over truly abnormal components of one order on a
/// sample. `stop_at_first_abnormal` applies the exclusive-model early stop.
pub(crate) fn schedule_cost(
    specs: &[ComponentSpec],
    sample: &TrialSample,
    sizes: &[u64],
    order: &[usize],
    slots: usize,
    stop_at_first_abnormal: bool,
    scratch: &mut ScheduleScratch,
) -> f64 {
    list_schedule(
        sizes,
        order,
        slots,
        &mut scratch.tau,
        &mut scratch.start,
        &mut scratch.slot,
    );
    let stop = if stop_at_first_abnormal {
        (0..specs.len())
            .filter(|&i| sample.verdicts[i].decision == Decision::Abnormal)
            .map(|i| scratch.tau[i])
            .min()
            .unwrap_or(u64::MAX)
    } else {
        u64::MAX
    };
    specs
        .iter()
        .zip(&sample.truth.abnormal)
        .zip(&scratch.tau)
        .filter(|((_, &a), _)| a)
        .map(|((s, _), &t)| s.cost * t.min(stop) as f64)
        .sum()
}

pub(crate) struct ScheduleScratch {
    tau: Vec<u64>,
    start: Vec<u64>,
    slot: Vec<usize>,
}

impl ScheduleScratch {
    pub(crate) fn new(k: usize) -> Self {
        Self {
            tau: vec![0; k],
            start: vec![0; k],
            slot: vec![0; k],
        }
    }
}

/// Lays the sampled tests out on `num_probes` slots in `ordering`.
///
/// Slots advance in lockstep, one observation per time unit. A slot that
/// declares at time `t` starts the next undeclared component at `t + 1`;
/// when several slots are free the lowest-numbered one takes it. With
/// `early_stop` under the exclusive model the trial ends at the first
/// abnormal declaration and every component not yet declared is marked
/// untested with `tau` equal to that time.
pub fn schedule_trial(
    specs: &[ComponentSpec],
    sample: &TrialSample,
    ordering: &Ordering,
    model: AnomalyModel,
    num_probes: usize,
    early_stop: bool,
) -> Result<TrialRecord> {
    if num_probes == 0 {
        return Err(domain("at least one probe slot is required"));
    }
    let ids: Vec<_> = specs.iter().map(|s| s.id).collect();
    let order = ordering.positions_in(&ids)?;
    let k = specs.len();
    let sizes: Vec<u64> = sample.verdicts.iter().map(|v| v.sample_size).collect();
    let mut tau = vec![0u64; k];
    let mut start = vec![0u64; k];
    let mut slot = vec![0usize; k];
    list_schedule(&sizes, &order, num_probes, &mut tau, &mut start, &mut slot);

    let mut n = sizes.clone();
    let mut verdict: Vec<Verdict> = sample.verdicts.iter().map(|v| Verdict::Declared(v.decision)).collect();
    let mut start_opt: Vec<Option<u64>> = start.iter().map(|&s| Some(s)).collect();
    let mut slot_opt: Vec<Option<usize>> = slot.iter().map(|&s| Some(s)).collect();

    if early_stop && model == AnomalyModel::Exclusive {
        let stop = (0..k)
            .filter(|&i| sample.verdicts[i].decision == Decision::Abnormal)
            .map(|i| tau[i])
            .min();
        if let Some(stop) = stop {
            for i in 0..k {
                if tau[i] > stop {
                    verdict[i] = Verdict::Untested;
                    if start[i] <= stop {
                        n[i] = stop - start[i] + 1;
                    } else {
                        n[i] = 0;
                        start_opt[i] = None;
                        slot_opt[i] = None;
                    }
                    tau[i] = stop;
                }
            }
        }
    }

    let realized_cost = specs
        .iter()
        .enumerate()
        .filter(|&(i, _)| sample.truth.abnormal[i])
        .map(|(i, s)| s.cost * tau[i] as f64)
        .sum();

    Ok(TrialRecord {
        ids,
        tau,
        n,
        start: start_opt,
        verdict,
        truth: sample.truth.abnormal.clone(),
        realized_cost,
        order_used: ordering.clone(),
        slot: slot_opt,
    })
}

/// Draws a trial and schedules it.
pub fn run_trial<R: Rng + ?Sized>(
    specs: &[ComponentSpec],
    ordering: &Ordering,
    model: AnomalyModel,
    num_probes: usize,
    rng: &mut R,
    early_stop: bool,
) -> Result<TrialRecord> {
    let sample = sample_trial(specs, model, rng)?;
    schedule_trial(specs, &sample, ordering, model, num_probes, early_stop)
}

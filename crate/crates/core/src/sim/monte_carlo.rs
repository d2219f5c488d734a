//! Monte Carlo evaluation of probing policies.
//!
//! Trial `t` always draws from substream `t` of the trial domain, so every
//! policy run with the same seed sees the same ground truths and test
//! outcomes. Trials are processed in fixed-size chunks on the rayon pool
//! and the chunk summaries are combined in chunk order, which keeps
//! reports bit-identical regardless of thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{sample_trial, schedule_cost, schedule_trial, ComponentSpec, ScheduleScratch, TrialSample, Verdict};
use crate::error::{domain, Error, Result};
use crate::index::{
    analytic_expected_cost, analytic_expected_cost_random, check_model_priors, exhaustive_best_order,
    for_each_permutation, order_components, AnomalyModel, ComponentProfile, OrderRule, Ordering, SampleSizes,
    EXHAUSTIVE_LIMIT,
};
use crate::observation::ObservationModel;
use crate::rng::{substream, StreamDomain};
use crate::sequential::{Decision, TestProcedure};

const CHUNK: u64 = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyRule {
    #[serde(rename = "picn")]
    PiCN,
    #[serde(rename = "picn0")]
    PiCN0,
    /// A fresh uniformly random order in every trial.
    Random,
    /// Components in the order they were given.
    Fixed,
    /// Best of all `K!` orders: by analytic cost with one probe, by
    /// simulated cost on separate selection trials otherwise.
    Exhaustive,
}

impl PolicyRule {
    pub fn name(self) -> &'static str {
        match self {
            PolicyRule::PiCN => "picn",
            PolicyRule::PiCN0 => "picn0",
            PolicyRule::Random => "random",
            PolicyRule::Fixed => "fixed",
            PolicyRule::Exhaustive => "exhaustive",
        }
    }

    /// How the rule relates to the anomaly model: `optimal` for the index
    /// rule matched to the model, `ablation` for the other index rule and
    /// `baseline` otherwise.
    pub fn pairing(self, model: AnomalyModel) -> &'static str {
        match (self, model) {
            (PolicyRule::PiCN, AnomalyModel::Independent) | (PolicyRule::PiCN0, AnomalyModel::Exclusive) => "optimal",
            (PolicyRule::PiCN, _) | (PolicyRule::PiCN0, _) => "ablation",
            _ => "baseline",
        }
    }
}

/// Source of the expected sample sizes behind the indices and the
/// analytic cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum SampleSizeMode {
    /// Closed-form approximations.
    Wald,
    /// Offline simulation with this many tests per hypothesis.
    MonteCarlo { trials: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloConfig {
    pub model: AnomalyModel,
    pub num_probes: usize,
    pub trials: u64,
    pub seed: u64,
    pub early_stop: bool,
    pub sample_sizes: SampleSizeMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentStats {
    pub id: crate::index::ComponentId,
    /// Trials in which the component was normal and its test finished.
    pub tested_h0: u64,
    pub false_alarms: u64,
    pub tested_h1: u64,
    pub missed: u64,
    pub untested: u64,
    pub p_fa: Option<f64>,
    pub p_md: Option<f64>,
    pub mean_n_h0: Option<f64>,
    pub mean_n_h1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub policy: PolicyRule,
    pub trials: u64,
    pub mean_cost: f64,
    /// Sample standard deviation of the cost over `sqrt(trials)`.
    pub stderr: f64,
    /// The order used in every trial; `None` for per-trial random orders.
    pub ordering: Option<Ordering>,
    /// Closed-form expected cost of the policy, single-probe runs only.
    pub analytic_cost: Option<f64>,
    pub profiles: Vec<ComponentProfile>,
    pub components: Vec<ComponentStats>,
}

impl AggregateReport {
    pub fn max_p_fa(&self) -> Option<f64> {
        self.components.iter().filter_map(|c| c.p_fa).reduce(f64::max)
    }

    pub fn max_p_md(&self) -> Option<f64> {
        self.components.iter().filter_map(|c| c.p_md).reduce(f64::max)
    }

    /// Mean observations per finished test, over all components.
    pub fn mean_n(&self) -> f64 {
        let (n, count) = self.components.iter().fold((0.0, 0u64), |(n, c), s| {
            let h0 = s.mean_n_h0.unwrap_or(0.0) * s.tested_h0 as f64;
            let h1 = s.mean_n_h1.unwrap_or(0.0) * s.tested_h1 as f64;
            (n + h0 + h1, c + s.tested_h0 + s.tested_h1)
        });
        if count == 0 {
            0.0
        } else {
            n / count as f64
        }
    }
}

#[derive(Debug, Clone, Default)]
struct Tally {
    tested_h0: u64,
    false_alarms: u64,
    tested_h1: u64,
    missed: u64,
    untested: u64,
    n_h0: u64,
    n_h1: u64,
}

#[derive(Debug, Clone)]
struct Accumulator {
    trials: u64,
    cost_sum: f64,
    cost_sq: f64,
    tallies: Vec<Tally>,
}

impl Accumulator {
    fn new(k: usize) -> Self {
        Self {
            trials: 0,
            cost_sum: 0.0,
            cost_sq: 0.0,
            tallies: vec![Tally::default(); k],
        }
    }

    fn merge(mut self, other: Self) -> Self {
        self.trials += other.trials;
        self.cost_sum += other.cost_sum;
        self.cost_sq += other.cost_sq;
        for (a, b) in self.tallies.iter_mut().zip(other.tallies) {
            a.tested_h0 += b.tested_h0;
            a.false_alarms += b.false_alarms;
            a.tested_h1 += b.tested_h1;
            a.missed += b.missed;
            a.untested += b.untested;
            a.n_h0 += b.n_h0;
            a.n_h1 += b.n_h1;
        }
        self
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn mean_and_stderr(sum: f64, sum_sq: f64, n: u64) -> (f64, f64) {
    let nf = n as f64;
    let mean = sum / nf;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0);
    (mean, (var / nf).sqrt())
}

/// Runs `per_chunk` over consecutive chunks of `0..trials` in parallel and
/// combines the results in chunk order.
fn chunked<T, F, M>(trials: u64, per_chunk: F, init: T, merge: M) -> Result<T>
where
    T: Send,
    F: Fn(std::ops::Range<u64>) -> Result<T> + Sync,
    M: Fn(T, T) -> T,
{
    let chunks = trials.div_ceil(CHUNK);
    let parts: Vec<T> = (0..chunks)
        .into_par_iter()
        .map(|c| per_chunk(c * CHUNK..((c + 1) * CHUNK).min(trials)))
        .collect::<Result<_>>()?;
    Ok(parts.into_iter().fold(init, merge))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingleTestSummary {
    pub trials: u64,
    pub mean_n: f64,
    pub stderr_n: f64,
    /// Tests declaring abnormal.
    pub abnormal_count: u64,
    pub abnormal_fraction: f64,
    pub stderr_fraction: f64,
}

fn campaign(
    test: &TestProcedure,
    source: &ObservationModel,
    trials: u64,
    seed: u64,
    domain_key: StreamDomain,
    base: u64,
) -> Result<SingleTestSummary> {
    if trials == 0 {
        return Err(domain("trials must be at least 1"));
    }
    let (n_sum, n_sq, hits) = chunked(
        trials,
        |range| {
            let mut acc = (0.0, 0.0, 0u64);
            for t in range {
                let mut rng = substream(seed, domain_key, base | t);
                let v = test.run(source.stream(&mut rng))?;
                let n = v.sample_size as f64;
                acc.0 += n;
                acc.1 += n * n;
                acc.2 += u64::from(v.decision == Decision::Abnormal);
            }
            Ok(acc)
        },
        (0.0, 0.0, 0u64),
        |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2),
    )?;
    let (mean_n, stderr_n) = mean_and_stderr(n_sum, n_sq, trials);
    let f = hits as f64 / trials as f64;
    Ok(SingleTestSummary {
        trials,
        mean_n,
        stderr_n,
        abnormal_count: hits,
        abnormal_fraction: f,
        stderr_fraction: (f * (1.0 - f) / trials as f64).sqrt(),
    })
}

impl SingleTestSummary {
    pub fn normal_fraction(&self) -> f64 {
        (self.trials - self.abnormal_count) as f64 / self.trials as f64
    }
}

/// Runs `test` `trials` times on observations drawn from `source`, which
/// may be any parameter, including one inside an indifference region.
pub fn run_test_campaign(
    test: &TestProcedure,
    source: &ObservationModel,
    trials: u64,
    seed: u64,
) -> Result<SingleTestSummary> {
    campaign(test, source, trials, seed, StreamDomain::SingleTest, 0)
}

/// Runs one component's test `trials` times with observations from its
/// normal (`abnormal = false`) or abnormal source.
pub fn run_single_component(spec: &ComponentSpec, abnormal: bool, trials: u64, seed: u64) -> Result<SingleTestSummary> {
    run_test_campaign(&spec.test, spec.source(abnormal), trials, seed)
}

/// Simulated `E(N|H0)` and `E(N|H1)` of one component. `position`
/// separates the streams of components sharing a seed.
pub fn estimate_sample_sizes(spec: &ComponentSpec, trials: u64, seed: u64, position: u64) -> Result<SampleSizes> {
    let base = position << 48;
    let h0 = campaign(
        &spec.test,
        spec.source(false),
        trials,
        seed,
        StreamDomain::SampleSize,
        base,
    )?;
    let h1 = campaign(
        &spec.test,
        spec.source(true),
        trials,
        seed,
        StreamDomain::SampleSize,
        base | 1 << 47,
    )?;
    Ok(SampleSizes {
        en_h0: h0.mean_n,
        en_h1: h1.mean_n,
    })
}

pub fn profiles_for(specs: &[ComponentSpec], mode: SampleSizeMode, seed: u64) -> Result<Vec<ComponentProfile>> {
    specs
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let sizes = match mode {
                SampleSizeMode::Wald => s.approximate_sample_sizes()?,
                SampleSizeMode::MonteCarlo { trials } => estimate_sample_sizes(s, trials, seed, i as u64)?,
            };
            ComponentProfile::new(s.id, s.pi, s.cost, sizes)
        })
        .collect()
}

fn draw_sample(
    specs: &[ComponentSpec],
    cfg: &MonteCarloConfig,
    domain_key: StreamDomain,
    t: u64,
) -> Result<TrialSample> {
    sample_trial(specs, cfg.model, &mut substream(cfg.seed, domain_key, t))
}

/// Minimum mean simulated cost over every order, on trials drawn from the
/// selection domain. Lexicographic order over the given positions; the
/// first strict minimum wins.
fn empirical_best_order(specs: &[ComponentSpec], cfg: &MonteCarloConfig) -> Result<Ordering> {
    let k = specs.len();
    let samples: Vec<TrialSample> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| draw_sample(specs, cfg, StreamDomain::Selection, t))
        .collect::<Result<_>>()?;
    let sizes: Vec<Vec<u64>> = samples
        .iter()
        .map(|s| s.verdicts.iter().map(|v| v.sample_size).collect())
        .collect();
    let mut perms = Vec::new();
    for_each_permutation(k, |p| perms.push(p.to_vec()));
    let stop = cfg.early_stop && cfg.model == AnomalyModel::Exclusive;
    let totals: Vec<f64> = perms
        .par_iter()
        .map_init(
            || ScheduleScratch::new(k),
            |scratch, perm| {
                samples
                    .iter()
                    .zip(&sizes)
                    .map(|(s, n)| schedule_cost(specs, s, n, perm, cfg.num_probes, stop, scratch))
                    .sum()
            },
        )
        .collect();
    let mut best = 0;
    for (i, &c) in totals.iter().enumerate() {
        if c < totals[best] {
            best = i;
        }
    }
    let ids: Vec<_> = specs.iter().map(|s| s.id).collect();
    Ok(Ordering::from_positions(&perms[best], &ids))
}

fn validate(specs: &[ComponentSpec], cfg: &MonteCarloConfig) -> Result<()> {
    if specs.is_empty() {
        return Err(domain("at least one component is required"));
    }
    if cfg.trials == 0 {
        return Err(domain("trials must be at least 1"));
    }
    if cfg.num_probes == 0 {
        return Err(domain("at least one probe slot is required"));
    }
    check_model_priors(specs.iter().map(|s| s.pi), cfg.model)
}

/// Evaluates several policies on common random numbers.
pub fn run_monte_carlo(
    specs: &[ComponentSpec],
    policies: &[PolicyRule],
    cfg: &MonteCarloConfig,
) -> Result<Vec<AggregateReport>> {
    validate(specs, cfg)?;
    let profiles = profiles_for(specs, cfg.sample_sizes, cfg.seed)?;
    policies.iter().map(|&p| run_policy(specs, &profiles, p, cfg)).collect()
}

fn run_policy(
    specs: &[ComponentSpec],
    profiles: &[ComponentProfile],
    policy: PolicyRule,
    cfg: &MonteCarloConfig,
) -> Result<AggregateReport> {
    let single = cfg.num_probes == 1;
    let mut unused = substream(cfg.seed, StreamDomain::RandomOrder, u64::MAX);
    let fixed = match policy {
        PolicyRule::PiCN => Some(order_components(profiles, OrderRule::PiCN, &mut unused)?),
        PolicyRule::PiCN0 => Some(order_components(profiles, OrderRule::PiCN0, &mut unused)?),
        PolicyRule::Fixed => Some(order_components(profiles, OrderRule::Fixed, &mut unused)?),
        PolicyRule::Random => None,
        PolicyRule::Exhaustive => {
            if specs.len() > EXHAUSTIVE_LIMIT {
                return Err(Error::TooManyComponents {
                    k: specs.len(),
                    max: EXHAUSTIVE_LIMIT,
                });
            }
            Some(if single {
                exhaustive_best_order(profiles, cfg.model)?.0
            } else {
                empirical_best_order(specs, cfg)?
            })
        }
    };
    let analytic_cost = if single {
        Some(match &fixed {
            Some(o) => analytic_expected_cost(profiles, o, cfg.model)?,
            None => analytic_expected_cost_random(profiles, cfg.model)?,
        })
    } else {
        None
    };

    let k = specs.len();
    let acc = chunked(
        cfg.trials,
        |range| {
            let mut acc = Accumulator::new(k);
            for t in range {
                let sample = draw_sample(specs, cfg, StreamDomain::Trial, t)?;
                let ordering = match &fixed {
                    Some(o) => o.clone(),
                    None => order_components(
                        profiles,
                        OrderRule::Random,
                        &mut substream(cfg.seed, StreamDomain::RandomOrder, t),
                    )?,
                };
                let rec = schedule_trial(specs, &sample, &ordering, cfg.model, cfg.num_probes, cfg.early_stop)?;
                acc.trials += 1;
                acc.cost_sum += rec.realized_cost;
                acc.cost_sq += rec.realized_cost * rec.realized_cost;
                for (i, tally) in acc.tallies.iter_mut().enumerate() {
                    let abnormal = rec.truth[i];
                    match rec.verdict[i] {
                        Verdict::Untested => tally.untested += 1,
                        Verdict::Declared(d) if abnormal => {
                            tally.tested_h1 += 1;
                            tally.n_h1 += rec.n[i];
                            tally.missed += u64::from(d == Decision::Normal);
                        }
                        Verdict::Declared(d) => {
                            tally.tested_h0 += 1;
                            tally.n_h0 += rec.n[i];
                            tally.false_alarms += u64::from(d == Decision::Abnormal);
                        }
                    }
                }
            }
            Ok(acc)
        },
        Accumulator::new(k),
        Accumulator::merge,
    )?;

    let (mean_cost, stderr) = mean_and_stderr(acc.cost_sum, acc.cost_sq, acc.trials);
    let components = specs
        .iter()
        .zip(&acc.tallies)
        .map(|(s, t)| ComponentStats {
            id: s.id,
            tested_h0: t.tested_h0,
            false_alarms: t.false_alarms,
            tested_h1: t.tested_h1,
            missed: t.missed,
            untested: t.untested,
            p_fa: ratio(t.false_alarms, t.tested_h0),
            p_md: ratio(t.missed, t.tested_h1),
            mean_n_h0: ratio(t.n_h0, t.tested_h0),
            mean_n_h1: ratio(t.n_h1, t.tested_h1),
        })
        .collect();
    Ok(AggregateReport {
        policy,
        trials: acc.trials,
        mean_cost,
        stderr,
        ordering: fixed,
        analytic_cost,
        profiles: profiles.to_vec(),
        components,
    })
}

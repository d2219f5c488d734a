//! Experiment configuration files (TOML).

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use seqprobe_core::index::EXHAUSTIVE_LIMIT;
use seqprobe_core::sequential::BoundarySchedule;
use seqprobe_core::sim::{ComponentSpec, PolicyRule, SampleSizeMode};
use seqprobe_core::{
    AnomalyModel, ComponentId, CompositeSpace, CompositeTestConfig, Family, HypothesisPair, ObservationModel,
    SprtConfig,
};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Monte Carlo cost of probing policies over a set of components.
    Cost,
    /// Sample sizes and error rates of single tests across parameters.
    SampleSize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub kind: ExperimentKind,
    pub seed: Option<u64>,
    pub trials: u64,
    #[serde(default = "default_model")]
    pub model: AnomalyModel,
    #[serde(default = "default_probes")]
    pub num_probes: usize,
    #[serde(default)]
    pub early_stop: bool,
    #[serde(default)]
    pub policies: Vec<PolicyRule>,
    #[serde(default = "default_sample_sizes")]
    pub sample_sizes: SampleSizeMode,
    pub components: ComponentsConfig,
    #[serde(rename = "test")]
    pub tests: Vec<TestConfig>,
    pub sweep: Option<SweepConfig>,
}

fn default_model() -> AnomalyModel {
    AnomalyModel::Independent
}

fn default_probes() -> usize {
    1
}

fn default_sample_sizes() -> SampleSizeMode {
    SampleSizeMode::Wald
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NamedPrior {
    /// `1 / K` for every component.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PriorRule {
    Value(f64),
    Named(NamedPrior),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NamedTheta {
    /// The normal parameter equals the component's cost.
    Cost,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ThetaRule {
    Value(f64),
    Named(NamedTheta),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentsConfig {
    pub k: Option<usize>,
    /// Equally spaced costs over `[c_min, c_max]`.
    pub c_min: Option<f64>,
    pub c_max: Option<f64>,
    /// Explicit costs; fixes `K`.
    pub costs: Option<Vec<f64>>,
    pub prior: Option<PriorRule>,
    pub priors: Option<Vec<f64>>,
    #[serde(default = "default_family")]
    pub family: Family,
    /// Gaussian observation variance.
    pub variance: Option<f64>,
    pub theta0: ThetaRule,
    pub theta1: Option<f64>,
    pub theta1_factor: Option<f64>,
    /// Full parameter range, composite tests only.
    pub theta_min: Option<f64>,
    pub theta_max: Option<f64>,
    /// Sampling parameters of composite-test components; default to the
    /// boundaries of the normal and abnormal sets.
    pub normal_theta: Option<f64>,
    pub abnormal_theta: Option<f64>,
}

fn default_family() -> Family {
    Family::Poisson
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TestConfig {
    Sprt(SprtTestConfig),
    Sglrt(SglrtTestConfig),
    Salrt(SalrtTestConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SprtTestConfig {
    pub label: Option<String>,
    pub alpha: f64,
    pub beta: f64,
    pub max_samples: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SglrtTestConfig {
    pub label: Option<String>,
    pub cost_per_obs: f64,
    #[serde(default = "default_schedule")]
    pub schedule: BoundarySchedule,
    pub max_samples: Option<u64>,
}

fn default_schedule() -> BoundarySchedule {
    BoundarySchedule::Fixed
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SalrtTestConfig {
    pub label: Option<String>,
    pub alpha: f64,
    pub beta: f64,
    pub initial_estimate: Option<f64>,
    pub max_samples: Option<u64>,
}

impl TestConfig {
    pub fn label(&self) -> String {
        let (label, kind) = match self {
            TestConfig::Sprt(t) => (&t.label, "sprt"),
            TestConfig::Sglrt(t) => (&t.label, "sglrt"),
            TestConfig::Salrt(t) => (&t.label, "salrt"),
        };
        label.clone().unwrap_or_else(|| kind.to_string())
    }

    pub fn is_composite(&self) -> bool {
        !matches!(self, TestConfig::Sprt(_))
    }

    /// Error bounds implied by the configuration as `(false alarm, miss)`:
    /// Wald's `alpha / (1 - beta)` and `beta / (1 - alpha)` for the SPRT,
    /// `alpha` and `beta` for the SALRT, none for the SGLRT.
    pub fn error_bounds(&self) -> Option<(f64, f64)> {
        match self {
            TestConfig::Sprt(t) => Some((t.alpha / (1.0 - t.beta), t.beta / (1.0 - t.alpha))),
            TestConfig::Salrt(t) => Some((t.alpha, t.beta)),
            TestConfig::Sglrt(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    K,
    CMin,
    CMax,
    /// Sampling parameter of a sample-size experiment.
    Theta,
    NumProbes,
}

impl SweepVariable {
    pub fn column(self) -> &'static str {
        match self {
            SweepVariable::K => "K",
            SweepVariable::CMin => "c_min",
            SweepVariable::CMax => "c_max",
            SweepVariable::Theta => "theta",
            SweepVariable::NumProbes => "num_probes",
        }
    }

    fn is_integer(self) -> bool {
        matches!(self, SweepVariable::K | SweepVariable::NumProbes)
    }
}

/// Sweep points: an explicit `values` list, or `steps` evenly spaced
/// points from `start` to `stop` inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub variable: SweepVariable,
    pub values: Option<Vec<f64>>,
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub steps: Option<usize>,
}

impl SweepConfig {
    pub fn points(&self) -> Result<Vec<f64>> {
        match (&self.values, self.start, self.stop, self.steps) {
            (Some(v), None, None, None) => Ok(v.clone()),
            (None, Some(a), Some(b), Some(n)) => Ok(match n {
                0 => Vec::new(),
                1 => vec![a],
                _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
            }),
            _ => Err(CliError::invalid(
                "sweep",
                "give either `values` or all of `start`, `stop` and `steps`",
            )),
        }
    }
}

/// One resolved experiment point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub k: usize,
    pub c_min: Option<f64>,
    pub c_max: Option<f64>,
    pub num_probes: usize,
    pub theta: Option<f64>,
    /// The swept value, when the point comes from a sweep.
    pub sweep_value: Option<f64>,
}

impl ExperimentConfig {
    pub fn seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| CliError::invalid("seed", "an explicit seed is required (set `seed` or pass --seed)"))
    }

    fn base_k(&self) -> Option<usize> {
        match &self.components.costs {
            Some(c) => Some(c.len()),
            None => self.components.k.or(match self.kind {
                ExperimentKind::SampleSize => Some(1),
                ExperimentKind::Cost => None,
            }),
        }
    }

    pub fn base_point(&self) -> Result<Point> {
        self.point_template(false)
    }

    /// The base point; `K` may be left unset when the sweep supplies it.
    fn point_template(&self, sweeping_k: bool) -> Result<Point> {
        let k = match self.base_k() {
            Some(k) => k,
            None if sweeping_k => 0,
            None => return Err(CliError::invalid("components.k", "component count is required")),
        };
        Ok(Point {
            k,
            c_min: self.components.c_min,
            c_max: self.components.c_max,
            num_probes: self.num_probes,
            theta: None,
            sweep_value: None,
        })
    }

    /// The base point alone, or one point per sweep value.
    pub fn points(&self, with_sweep: bool) -> Result<Vec<Point>> {
        let sweep = match (&self.sweep, with_sweep) {
            (Some(s), true) => s,
            (None, true) => return Err(CliError::invalid("sweep", "this command needs a [sweep] section")),
            (_, false) => return Ok(vec![self.base_point()?]),
        };
        let template = self.point_template(sweep.variable == SweepVariable::K)?;
        sweep
            .points()?
            .into_iter()
            .map(|v| {
                if sweep.variable.is_integer() && (v.fract() != 0.0 || v < 1.0) {
                    return Err(CliError::invalid(
                        "sweep.values",
                        format!("{} takes positive integers, got {v}", sweep.variable.column()),
                    ));
                }
                let mut p = template;
                p.sweep_value = Some(v);
                match sweep.variable {
                    SweepVariable::K => p.k = v as usize,
                    SweepVariable::CMin => p.c_min = Some(v),
                    SweepVariable::CMax => p.c_max = Some(v),
                    SweepVariable::Theta => p.theta = Some(v),
                    SweepVariable::NumProbes => p.num_probes = v as usize,
                }
                Ok(p)
            })
            .collect()
    }

    /// Structural checks that do not need the engine.
    pub fn validate(&self) -> Result<()> {
        self.seed()?;
        if self.trials == 0 {
            return Err(CliError::invalid("trials", "must be at least 1"));
        }
        if self.num_probes == 0 {
            return Err(CliError::invalid("num_probes", "must be at least 1"));
        }
        if self.tests.is_empty() {
            return Err(CliError::invalid("test", "at least one [[test]] is required"));
        }
        let c = &self.components;
        if c.costs.is_some() && (c.c_min.is_some() || c.c_max.is_some()) {
            return Err(CliError::invalid(
                "components",
                "give either `costs` or `c_min`/`c_max`, not both",
            ));
        }
        if let (Some(costs), Some(k)) = (&c.costs, c.k) {
            if costs.len() != k {
                return Err(CliError::invalid(
                    "components.k",
                    format!("{k} does not match {} costs", costs.len()),
                ));
            }
        }
        if c.prior.is_some() == c.priors.is_some() {
            return Err(CliError::invalid(
                "components",
                "give exactly one of `prior` and `priors`",
            ));
        }
        if c.theta1.is_some() == c.theta1_factor.is_some() {
            return Err(CliError::invalid(
                "components",
                "give exactly one of `theta1` and `theta1_factor`",
            ));
        }
        if c.family == Family::Gaussian && c.variance.is_none() {
            return Err(CliError::invalid(
                "components.variance",
                "required for gaussian observations",
            ));
        }
        let composite = self.tests.iter().any(TestConfig::is_composite);
        if composite && (c.theta_min.is_none() || c.theta_max.is_none()) {
            return Err(CliError::invalid(
                "components",
                "composite tests need `theta_min` and `theta_max`",
            ));
        }
        if self.tests.iter().any(|t| !t.is_composite()) && (c.normal_theta.is_some() || c.abnormal_theta.is_some()) {
            return Err(CliError::invalid(
                "components",
                "`normal_theta` and `abnormal_theta` apply to composite tests only",
            ));
        }
        if let Some(s) = &self.sweep {
            let allowed = match self.kind {
                ExperimentKind::Cost => s.variable != SweepVariable::Theta,
                ExperimentKind::SampleSize => s.variable == SweepVariable::Theta,
            };
            if !allowed {
                return Err(CliError::invalid(
                    "sweep.variable",
                    format!("`{}` cannot be swept in this kind of experiment", s.variable.column()),
                ));
            }
            if s.variable == SweepVariable::K && c.costs.is_some() {
                return Err(CliError::invalid(
                    "sweep.variable",
                    "cannot sweep K with explicit costs",
                ));
            }
        }
        match self.kind {
            ExperimentKind::Cost => {
                if self.policies.is_empty() {
                    return Err(CliError::invalid("policies", "at least one policy is required"));
                }
            }
            ExperimentKind::SampleSize => {
                if self.base_k() != Some(1) {
                    return Err(CliError::invalid(
                        "components.k",
                        "sample-size experiments use a single component",
                    ));
                }
            }
        }
        // A base K is optional when K is swept; every other point must resolve.
        let mut points = self.points(self.sweep.is_some())?;
        if self.base_k().is_some() {
            points.push(self.base_point()?);
        }
        for p in &points {
            self.check_point(p)?;
        }
        Ok(())
    }

    fn check_point(&self, p: &Point) -> Result<()> {
        if p.k == 0 {
            return Err(CliError::invalid("components.k", "must be at least 1"));
        }
        if p.num_probes == 0 {
            return Err(CliError::invalid("num_probes", "must be at least 1"));
        }
        if p.num_probes > p.k {
            return Err(CliError::invalid(
                "num_probes",
                format!("{} probes exceed {} components", p.num_probes, p.k),
            ));
        }
        if self.kind == ExperimentKind::Cost
            && self.policies.contains(&PolicyRule::Exhaustive)
            && p.k > EXHAUSTIVE_LIMIT
        {
            return Err(CliError::invalid(
                "policies",
                format!(
                    "exhaustive search over {} components is refused; use at most {EXHAUSTIVE_LIMIT}",
                    p.k
                ),
            ));
        }
        if self.components.costs.is_none() && (p.c_min.is_none() || (p.k > 1 && p.c_max.is_none())) {
            return Err(CliError::invalid(
                "components",
                "`c_min` and `c_max` (or `costs`) are required",
            ));
        }
        Ok(())
    }

    fn costs(&self, p: &Point) -> Vec<f64> {
        match &self.components.costs {
            Some(c) => c.clone(),
            None => {
                let lo = p.c_min.expect("validated");
                if p.k == 1 {
                    return vec![lo];
                }
                let hi = p.c_max.expect("validated");
                (0..p.k).map(|i| lo + (hi - lo) * i as f64 / (p.k - 1) as f64).collect()
            }
        }
    }

    fn priors(&self, p: &Point) -> Result<Vec<f64>> {
        match (&self.components.priors, self.components.prior) {
            (Some(v), _) if v.len() == p.k => Ok(v.clone()),
            (Some(v), _) => Err(CliError::invalid(
                "components.priors",
                format!("{} priors for {} components", v.len(), p.k),
            )),
            (None, Some(PriorRule::Value(x))) => Ok(vec![x; p.k]),
            (None, Some(PriorRule::Named(NamedPrior::Uniform))) => Ok(vec![1.0 / p.k as f64; p.k]),
            (None, None) => Err(CliError::invalid("components.prior", "required")),
        }
    }

    /// Components for one point and one test.
    pub fn build_components(&self, p: &Point, test: &TestConfig) -> Result<Vec<ComponentSpec>> {
        let c = &self.components;
        let costs = self.costs(p);
        let priors = self.priors(p)?;
        let aux = c.variance.unwrap_or(0.0);
        let ctx = |i: usize| format!("component {}", i + 1);
        costs
            .iter()
            .zip(&priors)
            .enumerate()
            .map(|(i, (&cost, &pi))| {
                let theta0 = match c.theta0 {
                    ThetaRule::Value(v) => v,
                    ThetaRule::Named(NamedTheta::Cost) => cost,
                };
                let theta1 = c.theta1.unwrap_or_else(|| theta0 * c.theta1_factor.expect("validated"));
                let id = ComponentId(i as u32 + 1);
                match test {
                    TestConfig::Sprt(t) => {
                        let pair = HypothesisPair::new(
                            ObservationModel::new(c.family, theta0, aux).map_err(CliError::engine(ctx(i)))?,
                            ObservationModel::new(c.family, theta1, aux).map_err(CliError::engine(ctx(i)))?,
                        )
                        .map_err(CliError::engine(ctx(i)))?;
                        let mut cfg = SprtConfig::wald(t.alpha, t.beta).map_err(CliError::engine("test"))?;
                        if let Some(cap) = t.max_samples {
                            cfg = cfg.with_max_samples(cap);
                        }
                        ComponentSpec::simple(id, pi, cost, pair, cfg).map_err(CliError::engine(ctx(i)))
                    }
                    _ => {
                        let space = CompositeSpace::new(
                            c.family,
                            aux,
                            theta0,
                            theta1,
                            c.theta_min.expect("validated"),
                            c.theta_max.expect("validated"),
                        )
                        .map_err(CliError::engine(ctx(i)))?;
                        let cfg = composite_config(space, test).map_err(CliError::engine("test"))?;
                        ComponentSpec::composite(
                            id,
                            pi,
                            cost,
                            cfg,
                            c.normal_theta.unwrap_or(theta0),
                            c.abnormal_theta.unwrap_or(theta1),
                        )
                        .map_err(CliError::engine(ctx(i)))
                    }
                }
            })
            .collect()
    }

    /// SHA-256 of the canonical JSON form, ignoring `name`.
    pub fn hash(&self) -> String {
        let mut canon = self.clone();
        canon.name.clear();
        let bytes = serde_json::to_vec(&canon).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn composite_config(space: CompositeSpace, test: &TestConfig) -> seqprobe_core::Result<CompositeTestConfig> {
    let (mut cfg, cap) = match test {
        TestConfig::Sglrt(t) => (
            CompositeTestConfig::sglrt(space, t.cost_per_obs, t.schedule)?,
            t.max_samples,
        ),
        TestConfig::Salrt(t) => {
            let mut cfg = CompositeTestConfig::salrt(space, t.alpha, t.beta)?;
            if let Some(x) = t.initial_estimate {
                cfg = cfg.with_initial_estimate(x)?;
            }
            (cfg, t.max_samples)
        }
        TestConfig::Sprt(_) => unreachable!("simple test"),
    };
    if let Some(c) = cap {
        cfg = cfg.with_max_samples(c);
    }
    Ok(cfg)
}

pub fn parse_config_str(text: &str, path: &Path) -> Result<ExperimentConfig> {
    toml::from_str(text).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        message: e.to_string().lines().collect::<Vec<_>>().join(" "),
    })
}

/// Reads and validates a config file. Overrides replace the file's seed
/// and trial count before validation.
pub fn parse_config(path: &Path, seed: Option<u64>, trials: Option<u64>) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut cfg = parse_config_str(&text, path)?;
    if seed.is_some() {
        cfg.seed = seed;
    }
    if let Some(t) = trials {
        cfg.trials = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

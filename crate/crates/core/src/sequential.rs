//! Single-component sequential tests.
//!
//! The SPRT handles simple hypotheses. For composite hypotheses the SGLRT
//! and SALRT race two one-sided statistics, one rejecting each hypothesis,
//! and stop at whichever crosses its boundary first.
//!
//! All statistics are kept in the log domain.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::observation::{CompositeSpace, HypothesisPair};

/// `B = (1-beta)/alpha` and `A = (1-alpha)/beta`. The SPRT continues while
/// the likelihood ratio lies strictly inside `(1/A, B)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaldBoundaries {
    pub lower_a: f64,
    pub upper_b: f64,
}

impl WaldBoundaries {
    /// Zero-width continuation region; every test decides at its first
    /// observation.
    pub fn is_degenerate(&self) -> bool {
        self.upper_b * self.lower_a <= 1.0
    }
}

fn check_error_probability(name: &str, p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(domain(format!("{name} must lie in (0, 1), got {p}")))
    }
}

pub fn wald_boundaries(alpha: f64, beta: f64) -> Result<WaldBoundaries> {
    check_error_probability("alpha", alpha)?;
    check_error_probability("beta", beta)?;
    if alpha + beta > 1.0 {
        return Err(domain(format!("alpha + beta must not exceed 1, got {}", alpha + beta)));
    }
    Ok(WaldBoundaries {
        lower_a: (1.0 - alpha) / beta,
        upper_b: (1.0 - beta) / alpha,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SprtConfig {
    alpha: f64,
    beta: f64,
    /// `B`: declare abnormal once the likelihood ratio reaches it.
    upper: f64,
    /// `A`: declare normal once the likelihood ratio falls to `1/A`.
    lower: f64,
    max_samples: Option<u64>,
}

impl SprtConfig {
    /// Boundaries from Wald's approximation.
    pub fn wald(alpha: f64, beta: f64) -> Result<Self> {
        let b = wald_boundaries(alpha, beta)?;
        Self::with_boundaries(alpha, beta, b.lower_a, b.upper_b)
    }

    pub fn with_boundaries(alpha: f64, beta: f64, lower_a: f64, upper_b: f64) -> Result<Self> {
        check_error_probability("alpha", alpha)?;
        check_error_probability("beta", beta)?;
        if !(lower_a > 0.0 && upper_b > 0.0 && lower_a.is_finite() && upper_b.is_finite()) {
            return Err(domain("SPRT boundaries must be positive and finite"));
        }
        if upper_b * lower_a < 1.0 {
            return Err(domain(format!("SPRT needs B >= 1/A, got B={upper_b}, A={lower_a}")));
        }
        Ok(Self {
            alpha,
            beta,
            upper: upper_b,
            lower: lower_a,
            max_samples: None,
        })
    }

    /// Fail with [`Error::Truncated`] instead of sampling past `cap`.
    pub fn with_max_samples(mut self, cap: u64) -> Self {
        self.max_samples = Some(cap);
        self
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn upper_b(&self) -> f64 {
        self.upper
    }

    pub fn lower_a(&self) -> f64 {
        self.lower
    }

    pub fn max_samples(&self) -> Option<u64> {
        self.max_samples
    }

    pub fn log_upper(&self) -> f64 {
        self.upper.ln()
    }

    pub fn log_lower(&self) -> f64 {
        -self.lower.ln()
    }

    pub fn is_degenerate(&self) -> bool {
        self.upper * self.lower <= 1.0
    }

    /// Closed boundaries: reaching either one ends the test.
    pub fn decide(&self, llr: f64) -> Option<Decision> {
        if llr >= self.log_upper() {
            Some(Decision::Abnormal)
        } else if llr <= self.log_lower() {
            Some(Decision::Normal)
        } else {
            None
        }
    }
}

/// `delta_k`: the declared state of a component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Decision {
    Normal,
    Abnormal,
}

impl Decision {
    pub fn as_bit(self) -> u8 {
        match self {
            Decision::Normal => 0,
            Decision::Abnormal => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestVerdict {
    pub decision: Decision,
    pub sample_size: u64,
    pub terminal_statistic: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Step {
    Continue,
    Decided(TestVerdict),
}

/// Running state of one sequential test.
///
/// Composite tests keep sufficient statistics (`n`, `sum_y`) rather than
/// the raw history; every family here is a one-parameter exponential
/// family, so the likelihood at any parameter is a function of those two.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TestState {
    pub n: u64,
    pub llr: f64,
    pub sum_y: f64,
    /// SALRT numerator `sum_r log f(y_r | theta_hat(r-1))`, base measure dropped.
    pub adaptive_numerator: f64,
    /// `theta_hat(n)`, the estimate used by the next SALRT increment.
    pub estimate: Option<f64>,
}

impl TestState {
    pub fn new() -> Self {
        Self::default()
    }
}

pub fn sprt_step(state: &mut TestState, pair: &HypothesisPair, config: &SprtConfig, y: f64) -> Result<Step> {
    state.llr += pair.llr_increment(y)?;
    state.n += 1;
    state.sum_y += y;
    Ok(match config.decide(state.llr) {
        Some(decision) => Step::Decided(TestVerdict {
            decision,
            sample_size: state.n,
            terminal_statistic: state.llr,
        }),
        None => Step::Continue,
    })
}

/// Runs an SPRT to completion on `stream`.
pub fn run_sprt<I>(pair: &HypothesisPair, config: &SprtConfig, stream: I) -> Result<TestVerdict>
where
    I: IntoIterator<Item = f64>,
{
    let mut state = TestState::new();
    let mut stream = stream.into_iter();
    loop {
        if let Some(cap) = config.max_samples {
            if state.n >= cap {
                return Err(Error::Truncated { cap });
            }
        }
        let y = stream.next().ok_or(Error::StreamExhausted { consumed: state.n })?;
        if let Step::Decided(v) = sprt_step(&mut state, pair, config, y)? {
            return Ok(v);
        }
    }
}

fn restricted_statistics(space: &CompositeSpace, numerator: f64, n: f64, sum: f64) -> (f64, f64) {
    let fam = space.family();
    let aux = space.aux();
    let at0 = fam.log_likelihood_kernel(aux, space.theta0(), n, sum);
    let at1 = fam.log_likelihood_kernel(aux, space.theta1(), n, sum);
    (numerator - at0, numerator - at1)
}

/// GLR statistics `(L0, L1)` rejecting the normal and abnormal hypotheses.
///
/// The unrestricted estimate is the sample mean clamped to the space's
/// range; each restricted estimate is the corresponding boundary point.
pub fn glr_statistics(history: &[f64], space: &CompositeSpace) -> Result<(f64, f64)> {
    if history.is_empty() {
        return Err(domain("GLR statistics need at least one observation"));
    }
    let mut sum = 0.0;
    for &y in history {
        space.check_support(y)?;
        sum += y;
    }
    Ok(glr_from_sufficient(space, history.len() as f64, sum))
}

fn glr_from_sufficient(space: &CompositeSpace, n: f64, sum: f64) -> (f64, f64) {
    let mle = space.clamp(sum / n);
    let top = space.family().log_likelihood_kernel(space.aux(), mle, n, sum);
    restricted_statistics(space, top, n, sum)
}

/// Advances the SALRT by one observation and returns `(L0, L1)`.
///
/// The new observation is scored under the estimate formed from the
/// observations before it; the estimate is refreshed afterwards.
pub fn alr_statistics_step(
    state: &mut TestState,
    space: &CompositeSpace,
    initial_estimate: f64,
    y: f64,
) -> Result<(f64, f64)> {
    space.check_support(y)?;
    let prior = state.estimate.unwrap_or(initial_estimate);
    state.adaptive_numerator += space.family().log_likelihood_kernel(space.aux(), prior, 1.0, y);
    state.n += 1;
    state.sum_y += y;
    let n = state.n as f64;
    state.estimate = Some(space.clamp(state.sum_y / n));
    Ok(restricted_statistics(space, state.adaptive_numerator, n, state.sum_y))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CompositeVariant {
    Sglrt,
    Salrt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundarySchedule {
    /// Constant boundaries `b0`, `b1`.
    Fixed,
    /// `b(n) = max(ln(1/(n c)), 0)` for both statistics.
    TimeVarying,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompositeTestConfig {
    space: CompositeSpace,
    variant: CompositeVariant,
    b0: f64,
    b1: f64,
    schedule: BoundarySchedule,
    cost_per_obs: Option<f64>,
    initial_estimate: f64,
    max_samples: Option<u64>,
}

impl CompositeTestConfig {
    /// Explicit fixed boundaries.
    pub fn new(space: CompositeSpace, variant: CompositeVariant, b0: f64, b1: f64) -> Result<Self> {
        if !(b0 > 0.0 && b1 > 0.0 && b0.is_finite() && b1.is_finite()) {
            return Err(domain(format!(
                "composite boundaries must be positive, got b0={b0}, b1={b1}"
            )));
        }
        Ok(Self {
            space,
            variant,
            b0,
            b1,
            schedule: BoundarySchedule::Fixed,
            cost_per_obs: None,
            initial_estimate: 0.5 * (space.theta0() + space.theta1()),
            max_samples: None,
        })
    }

    /// SALRT with `b0 = ln(1/alpha)` and `b1 = ln(1/beta)`, which meet the
    /// error constraints without calibration.
    pub fn salrt(space: CompositeSpace, alpha: f64, beta: f64) -> Result<Self> {
        check_error_probability("alpha", alpha)?;
        check_error_probability("beta", beta)?;
        Self::new(space, CompositeVariant::Salrt, (1.0 / alpha).ln(), (1.0 / beta).ln())
    }

    /// SGLRT driven by a per-observation cost `c`: fixed boundaries
    /// `ln(1/c)` or the time-varying `ln(1/(n c))`.
    pub fn sglrt(space: CompositeSpace, cost_per_obs: f64, schedule: BoundarySchedule) -> Result<Self> {
        if !(cost_per_obs > 0.0 && cost_per_obs < 1.0) {
            return Err(domain(format!(
                "cost per observation must lie in (0, 1), got {cost_per_obs}"
            )));
        }
        let b = (1.0 / cost_per_obs).ln();
        let mut cfg = Self::new(space, CompositeVariant::Sglrt, b, b)?;
        cfg.schedule = schedule;
        cfg.cost_per_obs = Some(cost_per_obs);
        Ok(cfg)
    }

    pub fn with_initial_estimate(mut self, theta: f64) -> Result<Self> {
        if theta < self.space.theta_min() || theta > self.space.theta_max() {
            return Err(domain(format!(
                "initial estimate {theta} lies outside the parameter range"
            )));
        }
        self.initial_estimate = theta;
        Ok(self)
    }

    pub fn with_max_samples(mut self, cap: u64) -> Self {
        self.max_samples = Some(cap);
        self
    }

    pub fn space(&self) -> &CompositeSpace {
        &self.space
    }

    pub fn variant(&self) -> CompositeVariant {
        self.variant
    }

    pub fn b0(&self) -> f64 {
        self.b0
    }

    pub fn b1(&self) -> f64 {
        self.b1
    }

    pub fn schedule(&self) -> BoundarySchedule {
        self.schedule
    }

    pub fn cost_per_obs(&self) -> Option<f64> {
        self.cost_per_obs
    }

    pub fn initial_estimate(&self) -> f64 {
        self.initial_estimate
    }

    pub fn max_samples(&self) -> Option<u64> {
        self.max_samples
    }

    /// Boundaries in force at stage `n` (1-based).
    pub fn boundaries_at(&self, n: u64) -> (f64, f64) {
        match (self.schedule, self.cost_per_obs) {
            (BoundarySchedule::TimeVarying, Some(c)) => {
                let b = (1.0 / (n as f64 * c)).ln().max(0.0);
                (b, b)
            }
            _ => (self.b0, self.b1),
        }
    }

    /// Decision rule on the pair of rejection statistics at stage `n`.
    /// When both cross together the larger excess wins and an exact tie
    /// declares the component abnormal.
    pub fn decide(&self, n: u64, l0: f64, l1: f64) -> Option<Decision> {
        let (b0, b1) = self.boundaries_at(n);
        let reject0 = l0 >= b0;
        let reject1 = l1 >= b1;
        match (reject0, reject1) {
            (true, true) => {
                if l1 - b1 > l0 - b0 {
                    Some(Decision::Normal)
                } else {
                    Some(Decision::Abnormal)
                }
            }
            (true, false) => Some(Decision::Abnormal),
            (false, true) => Some(Decision::Normal),
            (false, false) => None,
        }
    }
}

pub fn composite_step(state: &mut TestState, config: &CompositeTestConfig, y: f64) -> Result<Step> {
    let (l0, l1) = match config.variant {
        CompositeVariant::Salrt => alr_statistics_step(state, &config.space, config.initial_estimate, y)?,
        CompositeVariant::Sglrt => {
            config.space.check_support(y)?;
            state.n += 1;
            state.sum_y += y;
            glr_from_sufficient(&config.space, state.n as f64, state.sum_y)
        }
    };
    Ok(match config.decide(state.n, l0, l1) {
        Some(decision) => {
            let terminal_statistic = match decision {
                Decision::Abnormal => l0,
                Decision::Normal => l1,
            };
            Step::Decided(TestVerdict {
                decision,
                sample_size: state.n,
                terminal_statistic,
            })
        }
        None => Step::Continue,
    })
}

/// Runs an SGLRT or SALRT to completion on `stream`.
pub fn run_composite_test<I>(config: &CompositeTestConfig, stream: I) -> Result<TestVerdict>
where
    I: IntoIterator<Item = f64>,
{
    let mut state = TestState::new();
    let mut stream = stream.into_iter();
    loop {
        if let Some(cap) = config.max_samples {
            if state.n >= cap {
                return Err(Error::Truncated { cap });
            }
        }
        let y = stream.next().ok_or(Error::StreamExhausted { consumed: state.n })?;
        if let Step::Decided(v) = composite_step(&mut state, config, y)? {
            return Ok(v);
        }
    }
}

/// A configured test for one component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TestProcedure {
    Sprt { pair: HypothesisPair, config: SprtConfig },
    Composite(CompositeTestConfig),
}

impl TestProcedure {
    pub fn run<I>(&self, stream: I) -> Result<TestVerdict>
    where
        I: IntoIterator<Item = f64>,
    {
        match self {
            TestProcedure::Sprt { pair, config } => run_sprt(pair, config, stream),
            TestProcedure::Composite(cfg) => run_composite_test(cfg, stream),
        }
    }

    /// The simple pair that describes the two states; for composite tests
    /// the boundary points.
    pub fn design_pair(&self) -> Result<HypothesisPair> {
        match self {
            TestProcedure::Sprt { pair, .. } => Ok(*pair),
            TestProcedure::Composite(cfg) => cfg.space.boundary_pair(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observation::ObservationModel;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn poisson_space() -> CompositeSpace {
        CompositeSpace::poisson(19.0, 21.0, 1.0, 1000.0).unwrap()
    }

    #[test]
    fn wald_boundary_values() {
        let b = wald_boundaries(0.01, 1e-6).unwrap();
        assert!((b.upper_b - (1.0 - 1e-6) / 0.01).abs() < 1e-12);
        assert!((b.upper_b - 99.9999).abs() < 1e-9);
        assert!((b.lower_a - 990_000.0).abs() < 1e-6);
        let s = wald_boundaries(0.01, 0.01).unwrap();
        assert!((s.upper_b - 99.0).abs() < 1e-12 && (s.lower_a - 99.0).abs() < 1e-12);
        let d = wald_boundaries(0.5, 0.5).unwrap();
        assert_eq!((d.upper_b, d.lower_a), (1.0, 1.0));
        assert!(d.is_degenerate());
        assert!(!s.is_degenerate());
    }

    #[test]
    fn wald_boundaries_reject_bad_probabilities() {
        assert!(wald_boundaries(0.0, 0.1).is_err());
        assert!(wald_boundaries(0.1, 1.0).is_err());
        assert!(wald_boundaries(0.7, 0.6).is_err());
    }

    #[test]
    fn boundary_hit_is_a_decision() {
        let cfg = SprtConfig::wald(0.01, 0.01).unwrap();
        assert_eq!(cfg.decide(cfg.log_upper()), Some(Decision::Abnormal));
        assert_eq!(cfg.decide(cfg.log_lower()), Some(Decision::Normal));
        assert_eq!(cfg.decide(0.0), None);
    }

    #[test]
    fn sprt_step_reports_stage_on_decision() {
        let pair = HypothesisPair::poisson(10.0, 15.0).unwrap();
        let cfg = SprtConfig::wald(0.01, 0.01).unwrap();
        let mut state = TestState::new();
        // y = 0 adds -5 each step; ln 99 ~ 4.595, so the first step decides.
        match sprt_step(&mut state, &pair, &cfg, 0.0).unwrap() {
            Step::Decided(v) => {
                assert_eq!(v.decision, Decision::Normal);
                assert_eq!(v.sample_size, 1);
                assert_eq!(v.terminal_statistic, -5.0);
            }
            Step::Continue => panic!("expected a decision"),
        }
    }

    #[test]
    fn degenerate_config_decides_at_first_observation() {
        let pair = HypothesisPair::poisson(10.0, 15.0).unwrap();
        let cfg = SprtConfig::wald(0.5, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let v = run_sprt(&pair, &cfg, pair.h0().stream(&mut rng)).unwrap();
            assert_eq!(v.sample_size, 1);
        }
    }

    #[test]
    fn sprt_is_deterministic() {
        let pair = HypothesisPair::poisson(10.0, 15.0).unwrap();
        let cfg = SprtConfig::wald(0.01, 1e-6).unwrap();
        let a = run_sprt(&pair, &cfg, pair.h1().stream(&mut ChaCha8Rng::seed_from_u64(5))).unwrap();
        let b = run_sprt(&pair, &cfg, pair.h1().stream(&mut ChaCha8Rng::seed_from_u64(5))).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cap_and_exhaustion_are_errors() {
        let pair = HypothesisPair::poisson(10.0, 15.0).unwrap();
        let cfg = SprtConfig::wald(1e-9, 1e-9).unwrap().with_max_samples(2);
        // 12 sits near the decision-neutral point, so two samples cannot decide.
        let err = run_sprt(&pair, &cfg, std::iter::repeat(12.0)).unwrap_err();
        assert_eq!(err, Error::Truncated { cap: 2 });
        let cfg = SprtConfig::wald(1e-9, 1e-9).unwrap();
        let err = run_sprt(&pair, &cfg, [12.0, 12.0]).unwrap_err();
        assert_eq!(err, Error::StreamExhausted { consumed: 2 });
    }

    #[test]
    fn sprt_rejects_out_of_support_observations() {
        let pair = HypothesisPair::poisson(10.0, 15.0).unwrap();
        let cfg = SprtConfig::wald(0.01, 0.01).unwrap();
        assert!(matches!(run_sprt(&pair, &cfg, [-3.0]), Err(Error::OutOfSupport { .. })));
    }

    #[test]
    fn sprt_under_h1_mostly_declares_abnormal() {
        let pair = HypothesisPair::poisson(10.0, 15.0).unwrap();
        let cfg = SprtConfig::wald(0.01, 0.01).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let trials = 20_000;
        let hits = (0..trials)
            .filter(|_| run_sprt(&pair, &cfg, pair.h1().stream(&mut rng)).unwrap().decision == Decision::Abnormal)
            .count();
        let rate = hits as f64 / trials as f64;
        let se = (0.01f64 * 0.99 / trials as f64).sqrt();
        assert!(rate >= 1.0 - 0.01 / 0.99 - 3.0 * se, "{rate}");
    }

    #[test]
    fn glr_statistics_values() {
        let space = poisson_space();
        let (_, l1) = glr_statistics(&[25.0, 25.0], &space).unwrap();
        let expect = 2.0 * (25.0 * (25.0f64 / 21.0).ln() - (25.0 - 21.0));
        assert!((l1 - expect).abs() < 1e-12);
        assert!((l1 - 0.7176694).abs() < 5e-7, "{l1}");
        let (l0, _) = glr_statistics(&[19.0, 19.0, 19.0], &space).unwrap();
        assert!(l0.abs() < 1e-12);
        assert!(glr_statistics(&[], &space).is_err());
    }

    #[test]
    fn glr_clamps_zero_mean() {
        let space = poisson_space();
        let (l0, l1) = glr_statistics(&[0.0, 0.0, 0.0], &space).unwrap();
        assert!(l0.is_finite() && l1.is_finite());
        assert!(l1 > l0 && l0 > 0.0);
    }

    #[test]
    fn incremental_glr_matches_batch() {
        let space = poisson_space();
        let cfg = CompositeTestConfig::sglrt(space, 1e-3, BoundarySchedule::Fixed).unwrap();
        let src = ObservationModel::poisson(20.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let hist: Vec<f64> = src.stream(&mut rng).take(40).collect();
        let mut state = TestState::new();
        for (i, &y) in hist.iter().enumerate() {
            let _ = composite_step(&mut state, &cfg, y).unwrap();
            let (b0, b1) = glr_statistics(&hist[..=i], &space).unwrap();
            let (s0, s1) = glr_from_sufficient(&space, state.n as f64, state.sum_y);
            assert!((b0 - s0).abs() < 1e-9 && (b1 - s1).abs() < 1e-9);
        }
    }

    #[test]
    fn alr_first_observation_uses_initial_estimate() {
        let space = poisson_space();
        let mut state = TestState::new();
        let (l0, l1) = alr_statistics_step(&mut state, &space, 20.0, 23.0).unwrap();
        let k = |t: f64| -t + 23.0 * t.ln();
        assert!((l0 - (k(20.0) - k(19.0))).abs() < 1e-12);
        assert!((l1 - (k(20.0) - k(21.0))).abs() < 1e-12);
        assert_eq!(state.estimate, Some(23.0));
    }

    #[test]
    fn salrt_boundaries_follow_error_targets() {
        let cfg = CompositeTestConfig::salrt(poisson_space(), 0.026, 0.03).unwrap();
        assert!((cfg.b0() - (1.0f64 / 0.026).ln()).abs() < 1e-15);
        assert!((cfg.b1() - (1.0f64 / 0.03).ln()).abs() < 1e-15);
        assert_eq!(cfg.initial_estimate(), 20.0);
        assert_eq!(cfg.boundaries_at(500), (cfg.b0(), cfg.b1()));
    }

    #[test]
    fn time_varying_boundary_shrinks_and_floors_at_zero() {
        let cfg = CompositeTestConfig::sglrt(poisson_space(), 1e-3, BoundarySchedule::TimeVarying).unwrap();
        let (b1, _) = cfg.boundaries_at(1);
        assert!((b1 - 1000f64.ln()).abs() < 1e-12);
        let (b10, _) = cfg.boundaries_at(10);
        assert!((b10 - 100f64.ln()).abs() < 1e-12);
        assert_eq!(cfg.boundaries_at(5000), (0.0, 0.0));
    }

    #[test]
    fn simultaneous_crossing_tie_rule() {
        let cfg = CompositeTestConfig::new(poisson_space(), CompositeVariant::Sglrt, 2.0, 3.0).unwrap();
        assert_eq!(cfg.decide(1, 2.5, 3.1), Some(Decision::Abnormal));
        assert_eq!(cfg.decide(1, 2.1, 3.5), Some(Decision::Normal));
        assert_eq!(cfg.decide(1, 2.5, 3.5), Some(Decision::Abnormal));
        assert_eq!(cfg.decide(1, 1.0, 1.0), None);
    }

    #[test]
    fn composite_config_validation() {
        let space = poisson_space();
        assert!(CompositeTestConfig::new(space, CompositeVariant::Salrt, 0.0, 1.0).is_err());
        assert!(CompositeTestConfig::sglrt(space, 0.0, BoundarySchedule::Fixed).is_err());
        assert!(CompositeTestConfig::salrt(space, 1.5, 0.1).is_err());
        let cfg = CompositeTestConfig::salrt(space, 0.1, 0.1).unwrap();
        assert!(cfg.with_initial_estimate(5000.0).is_err());
    }

    #[test]
    fn far_anomaly_is_detected_quickly() {
        let space = poisson_space();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let src = ObservationModel::poisson(40.0).unwrap();
        for cfg in [
            CompositeTestConfig::sglrt(space, 1e-3, BoundarySchedule::TimeVarying).unwrap(),
            CompositeTestConfig::salrt(space, 0.026, 0.03).unwrap(),
        ] {
            let trials = 2000;
            let total: u64 = (0..trials)
                .map(|_| {
                    let v = run_composite_test(&cfg, src.stream(&mut rng)).unwrap();
                    assert_eq!(v.decision, Decision::Abnormal);
                    v.sample_size
                })
                .sum();
            assert!((total as f64 / trials as f64) < 5.0);
        }
    }

    #[test]
    fn composite_cap_is_reported() {
        let cfg = CompositeTestConfig::salrt(poisson_space(), 1e-9, 1e-9)
            .unwrap()
            .with_max_samples(3);
        assert_eq!(
            run_composite_test(&cfg, std::iter::repeat(20.0)).unwrap_err(),
            Error::Truncated { cap: 3 }
        );
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn glr_statistics_are_nonnegative(ys in proptest::collection::vec(0u32..60, 1..50)) {
                let hist: Vec<f64> = ys.iter().map(|&y| y as f64).collect();
                let (l0, l1) = glr_statistics(&hist, &poisson_space()).unwrap();
                prop_assert!(l0 >= -1e-9 && l1 >= -1e-9);
            }

            #[test]
            fn alr_numerator_never_exceeds_glr(ys in proptest::collection::vec(0u32..60, 1..50)) {
                let space = poisson_space();
                let mut state = TestState::new();
                for (i, &y) in ys.iter().enumerate() {
                    let (a0, a1) = alr_statistics_step(&mut state, &space, 20.0, y as f64).unwrap();
                    let hist: Vec<f64> = ys[..=i].iter().map(|&y| y as f64).collect();
                    let (g0, g1) = glr_statistics(&hist, &space).unwrap();
                    prop_assert!(a0 <= g0 + 1e-9);
                    prop_assert!(a1 <= g1 + 1e-9);
                }
            }
        }
    }
}

//! One-parameter observation families: log-densities, sampling,
//! log-likelihood-ratio increments and Kullback-Leibler divergences.
//!
//! Observations are carried as `f64` for every family. Poisson draws are
//! nonnegative integers and Bernoulli draws are `0.0` or `1.0`.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{domain, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Poisson,
    /// Gaussian with known variance; the parameter is the mean.
    Gaussian,
    Bernoulli,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Poisson => "poisson",
            Family::Gaussian => "gaussian",
            Family::Bernoulli => "bernoulli",
        })
    }
}

impl Family {
    fn check_theta(self, theta: f64, aux: f64) -> Result<()> {
        let ok = match self {
            Family::Poisson => theta.is_finite() && theta > 0.0,
            Family::Bernoulli => theta > 0.0 && theta < 1.0,
            Family::Gaussian => theta.is_finite() && aux.is_finite() && aux > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(domain(format!("invalid {self} parameter theta={theta}, aux={aux}")))
        }
    }

    fn check_support(self, y: f64) -> Result<()> {
        let ok = match self {
            Family::Poisson => y >= 0.0 && y.is_finite() && y.fract() == 0.0,
            Family::Bernoulli => y == 0.0 || y == 1.0,
            Family::Gaussian => y.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::OutOfSupport { family: self, y })
        }
    }

    /// Log-likelihood of `n` observations summing to `sum`, dropping the
    /// base-measure term that does not depend on `theta`. Differences of
    /// this kernel at two parameters are exact log-likelihood ratios.
    pub fn log_likelihood_kernel(self, aux: f64, theta: f64, n: f64, sum: f64) -> f64 {
        match self {
            Family::Poisson => -n * theta + sum * theta.ln(),
            Family::Gaussian => (theta * sum - 0.5 * n * theta * theta) / aux,
            Family::Bernoulli => sum * theta.ln() + (n - sum) * (1.0 - theta).ln(),
        }
    }

    /// `D(f(.|a) || f(.|b))` for two members of the family.
    pub fn kl(self, aux: f64, a: f64, b: f64) -> f64 {
        match self {
            Family::Poisson => b - a + a * (a / b).ln(),
            Family::Gaussian => (a - b) * (a - b) / (2.0 * aux),
            Family::Bernoulli => a * (a / b).ln() + (1.0 - a) * ((1.0 - a) / (1.0 - b)).ln(),
        }
    }
}

/// A parametrized sampling distribution `f(y | theta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservationModel {
    family: Family,
    theta: f64,
    aux: f64,
}

impl ObservationModel {
    pub fn new(family: Family, theta: f64, aux: f64) -> Result<Self> {
        family.check_theta(theta, aux)?;
        Ok(Self { family, theta, aux })
    }

    pub fn poisson(rate: f64) -> Result<Self> {
        Self::new(Family::Poisson, rate, 0.0)
    }

    pub fn gaussian(mean: f64, variance: f64) -> Result<Self> {
        Self::new(Family::Gaussian, mean, variance)
    }

    pub fn bernoulli(p: f64) -> Result<Self> {
        Self::new(Family::Bernoulli, p, 0.0)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Variance for the Gaussian family, unused otherwise.
    pub fn aux(&self) -> f64 {
        self.aux
    }

    /// Same family and auxiliary parameter, different `theta`.
    pub fn with_theta(&self, theta: f64) -> Result<Self> {
        Self::new(self.family, theta, self.aux)
    }

    pub fn log_density(&self, y: f64) -> Result<f64> {
        self.family.check_support(y)?;
        Ok(self.log_density_unchecked(y))
    }

    pub(crate) fn log_density_unchecked(&self, y: f64) -> f64 {
        match self.family {
            Family::Poisson => -self.theta + y * self.theta.ln() - ln_gamma(y + 1.0),
            Family::Gaussian => {
                let d = y - self.theta;
                -d * d / (2.0 * self.aux) - 0.5 * (2.0 * std::f64::consts::PI * self.aux).ln()
            }
            Family::Bernoulli => {
                if y == 1.0 {
                    self.theta.ln()
                } else {
                    (1.0 - self.theta).ln()
                }
            }
        }
    }

    pub fn sampler(&self) -> Sampler {
        match self.family {
            Family::Poisson => Sampler::Poisson(Poisson::new(self.theta).expect("validated rate")),
            Family::Gaussian => {
                Sampler::Gaussian(Normal::new(self.theta, self.aux.sqrt()).expect("validated variance"))
            }
            Family::Bernoulli => Sampler::Bernoulli(self.theta),
        }
    }

    /// One i.i.d. draw. Builds a fresh [`Sampler`]; hold on to one from
    /// [`ObservationModel::sampler`] when drawing repeatedly.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sampler().draw(rng)
    }

    /// Endless i.i.d. observation stream borrowing `rng`.
    pub fn stream<'a, R: Rng + ?Sized>(&self, rng: &'a mut R) -> ModelStream<'a, R> {
        ModelStream {
            sampler: self.sampler(),
            rng,
        }
    }
}

/// Pre-built sampling distribution for an [`ObservationModel`].
#[derive(Debug, Clone, Copy)]
pub enum Sampler {
    Poisson(Poisson<f64>),
    Gaussian(Normal<f64>),
    Bernoulli(f64),
}

impl Sampler {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Sampler::Poisson(d) => d.sample(rng),
            Sampler::Gaussian(d) => d.sample(rng),
            Sampler::Bernoulli(p) => {
                if rng.random::<f64>() < *p {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

pub struct ModelStream<'a, R: ?Sized> {
    sampler: Sampler,
    rng: &'a mut R,
}

impl<R: Rng + ?Sized> Iterator for ModelStream<'_, R> {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        Some(self.sampler.draw(self.rng))
    }
}

/// Which way a divergence between the two hypotheses is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KlDirection {
    /// `D(0||1)`, expectation under the normal-state distribution.
    NormalToAbnormal,
    /// `D(1||0)`, expectation under the abnormal-state distribution.
    AbnormalToNormal,
}

/// Simple hypotheses for one component: `h0` when normal, `h1` when abnormal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HypothesisPair {
    h0: ObservationModel,
    h1: ObservationModel,
}

impl HypothesisPair {
    pub fn new(h0: ObservationModel, h1: ObservationModel) -> Result<Self> {
        if h0.family != h1.family {
            return Err(domain(format!(
                "hypotheses must share a family ({} vs {})",
                h0.family, h1.family
            )));
        }
        if h0.aux != h1.aux {
            return Err(domain("hypotheses must share the auxiliary parameter"));
        }
        if h0.theta == h1.theta {
            return Err(domain(format!(
                "degenerate hypothesis pair: both parameters equal {}",
                h0.theta
            )));
        }
        Ok(Self { h0, h1 })
    }

    pub fn poisson(rate0: f64, rate1: f64) -> Result<Self> {
        Self::new(ObservationModel::poisson(rate0)?, ObservationModel::poisson(rate1)?)
    }

    pub fn h0(&self) -> &ObservationModel {
        &self.h0
    }

    pub fn h1(&self) -> &ObservationModel {
        &self.h1
    }

    pub fn family(&self) -> Family {
        self.h0.family
    }

    pub fn swapped(&self) -> Self {
        Self {
            h0: self.h1,
            h1: self.h0,
        }
    }

    /// `log f1(y) - log f0(y)`.
    pub fn llr_increment(&self, y: f64) -> Result<f64> {
        self.h0.family.check_support(y)?;
        Ok(self.llr_increment_unchecked(y))
    }

    pub(crate) fn llr_increment_unchecked(&self, y: f64) -> f64 {
        let (t0, t1) = (self.h0.theta, self.h1.theta);
        // The base measure cancels, so the kernel with n = 1 is exact and
        // avoids ln_gamma on the hot path.
        let fam = self.h0.family;
        fam.log_likelihood_kernel(self.h0.aux, t1, 1.0, y) - fam.log_likelihood_kernel(self.h0.aux, t0, 1.0, y)
    }

    /// Log-likelihood ratio of a whole batch of observations.
    pub fn batch_llr(&self, batch: &[f64]) -> Result<f64> {
        batch.iter().map(|&y| self.llr_increment(y)).sum()
    }

    pub fn kl_divergence(&self, direction: KlDirection) -> f64 {
        let (a, b) = match direction {
            KlDirection::NormalToAbnormal => (self.h0.theta, self.h1.theta),
            KlDirection::AbnormalToNormal => (self.h1.theta, self.h0.theta),
        };
        self.h0.family.kl(self.h0.aux, a, b)
    }
}

/// Divergence from `f(.|theta)` to the one-sided parameter set whose
/// nearest point is `boundary`. For these families the infimum over a
/// one-sided set not containing `theta` sits on its boundary.
pub fn kl_to_boundary(family: Family, aux: f64, theta: f64, boundary: f64) -> Result<f64> {
    family.check_theta(theta, aux)?;
    family.check_theta(boundary, aux)?;
    if theta == boundary {
        return Err(domain(format!("true parameter {theta} coincides with the boundary")));
    }
    Ok(family.kl(aux, theta, boundary))
}

/// Composite hypotheses `theta <= theta0` (normal) against
/// `theta >= theta1` (abnormal) over the range `[theta_min, theta_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompositeSpace {
    family: Family,
    aux: f64,
    theta0: f64,
    theta1: f64,
    theta_min: f64,
    theta_max: f64,
}

impl CompositeSpace {
    pub fn new(family: Family, aux: f64, theta0: f64, theta1: f64, theta_min: f64, theta_max: f64) -> Result<Self> {
        if !(theta_min < theta0 && theta0 < theta1 && theta1 < theta_max) {
            return Err(domain(format!(
                "composite space needs theta_min < theta0 < theta1 < theta_max, got \
                 {theta_min} < {theta0} < {theta1} < {theta_max}"
            )));
        }
        family.check_theta(theta_min, aux)?;
        family.check_theta(theta_max, aux)?;
        Ok(Self {
            family,
            aux,
            theta0,
            theta1,
            theta_min,
            theta_max,
        })
    }

    pub fn poisson(theta0: f64, theta1: f64, theta_min: f64, theta_max: f64) -> Result<Self> {
        Self::new(Family::Poisson, 0.0, theta0, theta1, theta_min, theta_max)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn aux(&self) -> f64 {
        self.aux
    }

    pub fn theta0(&self) -> f64 {
        self.theta0
    }

    pub fn theta1(&self) -> f64 {
        self.theta1
    }

    pub fn theta_min(&self) -> f64 {
        self.theta_min
    }

    pub fn theta_max(&self) -> f64 {
        self.theta_max
    }

    pub fn clamp(&self, theta: f64) -> f64 {
        theta.clamp(self.theta_min, self.theta_max)
    }

    pub fn in_indifference_region(&self, theta: f64) -> bool {
        theta > self.theta0 && theta < self.theta1
    }

    pub fn model(&self, theta: f64) -> Result<ObservationModel> {
        ObservationModel::new(self.family, theta, self.aux)
    }

    /// The simple pair at the two boundaries.
    pub fn boundary_pair(&self) -> Result<HypothesisPair> {
        HypothesisPair::new(self.model(self.theta0)?, self.model(self.theta1)?)
    }

    pub(crate) fn check_support(&self, y: f64) -> Result<()> {
        self.family.check_support(y)
    }
}

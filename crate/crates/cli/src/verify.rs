//! Self-checks: brute-force order optimality and single-test error rates.

use rand::Rng;

use seqprobe_core::index::{analytic_expected_cost, exhaustive_best_order, order_components, OrderRule, SampleSizes};
use seqprobe_core::rng::{substream, StreamDomain};
use seqprobe_core::sim::run_single_component;
use seqprobe_core::{AnomalyModel, ComponentId, ComponentProfile};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::experiment::{fmt_f64, ResultTable};

/// Random profiles with `pi` in (0, 1) (normalized to sum to one under
/// the exclusive model), costs in [0.5, 100] and sample sizes in [1, 50].
pub fn random_profiles<R: Rng + ?Sized>(rng: &mut R, k: usize, model: AnomalyModel) -> Vec<ComponentProfile> {
    let mut pis: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..0.99)).collect();
    if model == AnomalyModel::Exclusive {
        let total: f64 = pis.iter().sum();
        pis.iter_mut().for_each(|p| *p /= total);
    }
    pis.into_iter()
        .enumerate()
        .map(|(i, pi)| {
            let sizes = SampleSizes {
                en_h0: rng.random_range(1.0..50.0),
                en_h1: rng.random_range(1.0..50.0),
            };
            ComponentProfile::new(ComponentId(i as u32 + 1), pi, rng.random_range(0.5..100.0), sizes)
                .expect("valid random profile")
        })
        .collect()
}

/// Largest gap between the index-rule order's analytic cost and the
/// brute-force minimum over `sets` random profile sets with `K` in 2..=6.
pub fn permutation_oracle(seed: u64, sets: u64, model: AnomalyModel) -> seqprobe_core::Result<f64> {
    let rule = match model {
        AnomalyModel::Independent => OrderRule::PiCN,
        AnomalyModel::Exclusive => OrderRule::PiCN0,
    };
    let mut worst = 0.0f64;
    for i in 0..sets {
        let mut rng = substream(seed, StreamDomain::Verify, i);
        let k = rng.random_range(2..=6);
        let profiles = random_profiles(&mut rng, k, model);
        let order = order_components(&profiles, rule, &mut rng)?;
        let cost = analytic_expected_cost(&profiles, &order, model)?;
        let (_, best) = exhaustive_best_order(&profiles, model)?;
        worst = worst.max((cost - best).abs());
    }
    Ok(worst)
}

pub const ORACLE_TOLERANCE: f64 = 1e-12;

/// Runs the oracle for both models and the error-rate suite for every
/// component of the base point. Returns the table and the failure count.
pub fn verify(cfg: &ExperimentConfig) -> Result<(ResultTable, usize)> {
    let seed = cfg.seed()?;
    let mut rows = Vec::new();
    for (model, name) in [
        (AnomalyModel::Independent, "order-oracle-independent"),
        (AnomalyModel::Exclusive, "order-oracle-exclusive"),
    ] {
        let gap = permutation_oracle(seed, 200, model).map_err(CliError::engine(name))?;
        rows.push(vec![
            name.to_string(),
            "200 random profile sets".to_string(),
            fmt_f64(gap),
            fmt_f64(ORACLE_TOLERANCE),
            status(gap <= ORACLE_TOLERANCE),
        ]);
    }

    let p = cfg.base_point()?;
    for test in &cfg.tests {
        let specs = cfg.build_components(&p, test)?;
        let bounds = test.error_bounds();
        for spec in &specs {
            let ctx = format!("component {}, test {}", spec.id, test.label());
            let h0 = run_single_component(spec, false, cfg.trials, seed).map_err(CliError::engine(ctx.clone()))?;
            let h1 = run_single_component(spec, true, cfg.trials, seed).map_err(CliError::engine(ctx))?;
            let checks = [
                (
                    "false-alarm",
                    h0.abnormal_fraction,
                    h0.stderr_fraction,
                    bounds.map(|b| b.0),
                ),
                (
                    "missed-detection",
                    h1.normal_fraction(),
                    h1.stderr_fraction,
                    bounds.map(|b| b.1),
                ),
            ];
            for (what, rate, se, bound) in checks {
                let limit = bound.map(|b| b + 3.0 * se);
                rows.push(vec![
                    what.to_string(),
                    format!("{} component {}", test.label(), spec.id),
                    fmt_f64(rate),
                    limit.map(fmt_f64).unwrap_or_default(),
                    match limit {
                        Some(l) => status(rate <= l),
                        None => "unbounded".to_string(),
                    },
                ]);
            }
        }
    }
    let failed = rows.iter().filter(|r| r[4] == "fail").count();
    Ok((
        ResultTable {
            columns: ["check", "subject", "value", "limit", "status"]
                .map(String::from)
                .to_vec(),
            rows,
        },
        failed,
    ))
}

fn status(ok: bool) -> String {
    if ok { "pass" } else { "fail" }.to_string()
}

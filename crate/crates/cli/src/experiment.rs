//! Runs configured experiments and collects result tables.

use seqprobe_core::index::{
    analytic_expected_cost, compute_index, exhaustive_best_order, order_components, IndexRule, OrderRule,
    EXHAUSTIVE_LIMIT,
};
use seqprobe_core::rng::{substream, StreamDomain};
use seqprobe_core::sim::{
    profiles_for, run_monte_carlo, run_test_campaign, AggregateReport, MonteCarloConfig, PolicyRule,
};
use seqprobe_core::{ObservationModel, Ordering};

use crate::config::{ExperimentConfig, ExperimentKind, Point, TestConfig};
use crate::error::{CliError, Result};

/// Rows of already formatted cells under fixed column names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl ResultTable {
    fn new(columns: Vec<&str>) -> Self {
        Self {
            columns: columns.into_iter().map(String::from).collect(),
            rows: Vec::new(),
        }
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Cell `name` of every row.
    pub fn values<'a>(&'a self, name: &str) -> impl Iterator<Item = &'a str> + 'a {
        let i = self.column(name).unwrap_or_else(|| panic!("no column {name}"));
        self.rows.iter().map(move |r| r[i].as_str())
    }
}

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn fmt_ordering(o: &Ordering) -> String {
    o.ids().iter().map(|id| id.to_string()).collect::<Vec<_>>().join(" ")
}

/// Leading point columns: `K`, then the swept variable unless it is `K`.
fn point_columns(cfg: &ExperimentConfig, with_sweep: bool) -> Vec<&'static str> {
    let mut cols = vec!["K"];
    if let Some(s) = cfg.sweep.as_ref().filter(|_| with_sweep) {
        if s.variable.column() != "K" {
            cols.push(s.variable.column());
        }
    }
    cols
}

fn point_cells(p: &Point, ncols: usize) -> Vec<String> {
    let mut cells = vec![p.k.to_string()];
    if ncols > 1 {
        cells.push(fmt_opt(p.sweep_value));
    }
    cells
}

fn context(p: &Point, test: &TestConfig) -> String {
    match p.sweep_value {
        Some(v) => format!("sweep point {v}, test {}", test.label()),
        None => format!("test {}", test.label()),
    }
}

pub fn cost_columns() -> &'static [&'static str] {
    &[
        "test",
        "policy",
        "pairing",
        "mean_cost",
        "stderr",
        "analytic_cost",
        "trials",
        "max_p_fa",
        "max_p_md",
        "mean_n",
        "ordering",
    ]
}

pub fn sample_size_columns() -> &'static [&'static str] {
    &[
        "theta",
        "test",
        "region",
        "mean_n",
        "stderr_n",
        "abnormal_fraction",
        "stderr_fraction",
        "error_rate",
        "error_bound",
        "trials",
    ]
}

/// Runs the experiment at its base point (`with_sweep = false`) or at
/// every sweep point.
pub fn run_experiment(cfg: &ExperimentConfig, with_sweep: bool) -> Result<ResultTable> {
    match cfg.kind {
        ExperimentKind::Cost => run_cost(cfg, with_sweep),
        ExperimentKind::SampleSize => run_sample_size(cfg, with_sweep),
    }
}

fn run_cost(cfg: &ExperimentConfig, with_sweep: bool) -> Result<ResultTable> {
    let lead = point_columns(cfg, with_sweep);
    let mut table = ResultTable::new(lead.iter().chain(cost_columns()).copied().collect());
    let seed = cfg.seed()?;
    for p in cfg.points(with_sweep)? {
        for test in &cfg.tests {
            let specs = cfg.build_components(&p, test)?;
            let mc = MonteCarloConfig {
                model: cfg.model,
                num_probes: p.num_probes,
                trials: cfg.trials,
                seed,
                early_stop: cfg.early_stop,
                sample_sizes: cfg.sample_sizes,
            };
            let reports = run_monte_carlo(&specs, &cfg.policies, &mc).map_err(CliError::engine(context(&p, test)))?;
            for r in &reports {
                let mut row = point_cells(&p, lead.len());
                row.extend(cost_cells(cfg, test, r));
                table.rows.push(row);
            }
        }
    }
    Ok(table)
}

fn cost_cells(cfg: &ExperimentConfig, test: &TestConfig, r: &AggregateReport) -> Vec<String> {
    vec![
        test.label(),
        r.policy.name().to_string(),
        r.policy.pairing(cfg.model).to_string(),
        fmt_f64(r.mean_cost),
        fmt_f64(r.stderr),
        fmt_opt(r.analytic_cost),
        r.trials.to_string(),
        fmt_opt(r.max_p_fa()),
        fmt_opt(r.max_p_md()),
        fmt_f64(r.mean_n()),
        r.ordering.as_ref().map(fmt_ordering).unwrap_or_default(),
    ]
}

fn run_sample_size(cfg: &ExperimentConfig, with_sweep: bool) -> Result<ResultTable> {
    let mut table = ResultTable::new(sample_size_columns().to_vec());
    let seed = cfg.seed()?;
    let c = &cfg.components;
    let aux = c.variance.unwrap_or(0.0);
    for p in cfg.points(with_sweep)? {
        for test in &cfg.tests {
            let spec = cfg
                .build_components(&p, test)?
                .into_iter()
                .next()
                .expect("one component");
            let design = *spec.design_pair();
            let (theta0, theta1) = (design.h0().theta(), design.h1().theta());
            let thetas = match p.theta {
                Some(t) => vec![t],
                None => vec![theta0, theta1],
            };
            for theta in thetas {
                let ctx = format!("theta {theta}, test {}", test.label());
                let source = ObservationModel::new(c.family, theta, aux).map_err(CliError::engine(ctx.clone()))?;
                let s = run_test_campaign(&spec.test, &source, cfg.trials, seed).map_err(CliError::engine(ctx))?;
                let bounds = test.error_bounds();
                let (region, rate, bound) = if theta <= theta0 {
                    ("normal", Some(s.abnormal_fraction), bounds.map(|b| b.0))
                } else if theta >= theta1 {
                    ("abnormal", Some(s.normal_fraction()), bounds.map(|b| b.1))
                } else {
                    ("indifference", None, None)
                };
                table.rows.push(vec![
                    fmt_f64(theta),
                    test.label(),
                    region.to_string(),
                    fmt_f64(s.mean_n),
                    fmt_f64(s.stderr_n),
                    fmt_f64(s.abnormal_fraction),
                    fmt_f64(s.stderr_fraction),
                    fmt_opt(rate),
                    fmt_opt(bound),
                    s.trials.to_string(),
                ]);
            }
        }
    }
    Ok(table)
}

/// Indices and orders without simulating trials (beyond offline
/// sample-size estimation when configured).
pub fn order_table(cfg: &ExperimentConfig, with_sweep: bool) -> Result<ResultTable> {
    let lead = point_columns(cfg, with_sweep);
    let mut table = ResultTable::new(
        lead.iter()
            .chain(&[
                "test",
                "policy",
                "rank",
                "id",
                "pi",
                "cost",
                "en_h0",
                "en_h1",
                "en",
                "index_picn",
                "index_picn0",
                "analytic_cost",
            ])
            .copied()
            .collect(),
    );
    let seed = cfg.seed()?;
    let policies: Vec<PolicyRule> = if cfg.policies.is_empty() {
        vec![PolicyRule::PiCN, PolicyRule::PiCN0]
    } else {
        cfg.policies
            .iter()
            .copied()
            .filter(|p| *p != PolicyRule::Random)
            .collect()
    };
    for p in cfg.points(with_sweep)? {
        for test in &cfg.tests {
            let specs = cfg.build_components(&p, test)?;
            let ctx = context(&p, test);
            let profiles = profiles_for(&specs, cfg.sample_sizes, seed).map_err(CliError::engine(ctx.clone()))?;
            for &policy in &policies {
                let mut unused = substream(seed, StreamDomain::RandomOrder, u64::MAX);
                let ordering = match policy {
                    PolicyRule::PiCN => order_components(&profiles, OrderRule::PiCN, &mut unused),
                    PolicyRule::PiCN0 => order_components(&profiles, OrderRule::PiCN0, &mut unused),
                    PolicyRule::Fixed => order_components(&profiles, OrderRule::Fixed, &mut unused),
                    PolicyRule::Exhaustive if profiles.len() <= EXHAUSTIVE_LIMIT => {
                        exhaustive_best_order(&profiles, cfg.model).map(|(o, _)| o)
                    }
                    _ => continue,
                }
                .map_err(CliError::engine(ctx.clone()))?;
                let cost =
                    analytic_expected_cost(&profiles, &ordering, cfg.model).map_err(CliError::engine(ctx.clone()))?;
                for (rank, id) in ordering.ids().iter().enumerate() {
                    let prof = profiles.iter().find(|q| q.id == *id).expect("ordering covers profiles");
                    let mut row = point_cells(&p, lead.len());
                    row.extend([
                        test.label(),
                        policy.name().to_string(),
                        (rank + 1).to_string(),
                        id.to_string(),
                        fmt_f64(prof.pi),
                        fmt_f64(prof.cost),
                        fmt_f64(prof.en_h0),
                        fmt_f64(prof.en_h1),
                        fmt_f64(prof.en),
                        fmt_f64(compute_index(prof, IndexRule::PiCN).map_err(CliError::engine(ctx.clone()))?),
                        fmt_f64(compute_index(prof, IndexRule::PiCN0).map_err(CliError::engine(ctx.clone()))?),
                        fmt_f64(cost),
                    ]);
                    table.rows.push(row);
                }
            }
        }
    }
    Ok(table)
}

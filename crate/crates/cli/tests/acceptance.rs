//! Acceptance criteria. Runs every criterion, prints one line each and
//! exits nonzero if any fails.

use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::Rng;

use seqprobe::config::ExperimentConfig;
use seqprobe::experiment::{run_experiment, ResultTable};
use seqprobe::output::write_csv;
use seqprobe::parse_config;
use seqprobe::verify::{permutation_oracle, ORACLE_TOLERANCE};
use seqprobe_core::index::{expected_sample_sizes_simple, ComponentId};
use seqprobe_core::rng::{substream, StreamDomain};
use seqprobe_core::sim::{
    belief_update_exclusive, belief_update_independent, run_single_component, BeliefState, ComponentSpec, PolicyRule,
    SampleSizeMode,
};
use seqprobe_core::{AnomalyModel, HypothesisPair, SprtConfig};

type Outcome = Result<(bool, String), Box<dyn std::error::Error>>;

struct Criterion {
    id: u8,
    name: &'static str,
    limit: Option<Duration>,
    run: fn() -> Outcome,
}

fn preset(name: &str) -> ExperimentConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("presets")
        .join(format!("{name}.toml"));
    parse_config(&path, None, None).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn num(s: &str) -> f64 {
    s.parse().unwrap_or_else(|_| panic!("not a number: {s:?}"))
}

fn cell<'a>(t: &'a ResultTable, row: &'a [String], col: &str) -> &'a str {
    &row[t.column(col).unwrap_or_else(|| panic!("no column {col}"))]
}

fn find(t: &ResultTable, pred: impl Fn(&[String]) -> bool) -> &[String] {
    t.rows.iter().find(|r| pred(r)).expect("row present")
}

fn oracle(model: AnomalyModel) -> Outcome {
    let gap = permutation_oracle(7, 200, model)?;
    Ok((
        gap <= ORACLE_TOLERANCE,
        format!("max |index cost - brute-force min| = {gap:e}"),
    ))
}

fn c1_oracle_independent() -> Outcome {
    oracle(AnomalyModel::Independent)
}

fn c2_oracle_exclusive() -> Outcome {
    oracle(AnomalyModel::Exclusive)
}

fn cost_ratio(preset_name: &str, policy: &str) -> Result<f64, Box<dyn std::error::Error>> {
    let mut cfg = preset(preset_name);
    cfg.components.k = Some(20);
    let t = run_experiment(&cfg, false)?;
    let row = |p: &str| num(cell(&t, find(&t, |r| cell(&t, r, "policy") == p), "mean_cost"));
    Ok(row(policy) / row("random"))
}

fn c3_fig1_savings() -> Outcome {
    let ind = cost_ratio("fig1-independent", "picn")?;
    let exc = cost_ratio("fig1-exclusive", "picn0")?;
    let ok = (0.35..=0.65).contains(&ind) && (0.35..=0.65).contains(&exc);
    Ok((
        ok,
        format!("K=20 cost ratio to random order: independent {ind:.4}, exclusive {exc:.4}"),
    ))
}

fn c4_fig2_multiprobe() -> Outcome {
    let cfg = preset("fig2-multiprobe");
    let t = run_experiment(&cfg, true)?;
    let mut c_mins: Vec<f64> = t.values("c_min").map(num).collect();
    c_mins.dedup();
    let mut worst: (f64, f64) = (f64::NEG_INFINITY, 0.0);
    for c_min in c_mins.into_iter().filter(|c| *c <= 97.0) {
        let cost = |p: &str| {
            num(cell(
                &t,
                find(&t, |r| num(cell(&t, r, "c_min")) == c_min && cell(&t, r, "policy") == p),
                "mean_cost",
            ))
        };
        let gain = (cost("picn") - cost("exhaustive")) / cost("picn");
        if gain > worst.0 {
            worst = (gain, c_min);
        }
    }
    Ok((
        worst.0 <= 0.02,
        format!(
            "largest exhaustive gain over index order for c_min <= 97: {:.5} at c_min={}",
            worst.0, worst.1
        ),
    ))
}

fn sprt_spec(alpha: f64, beta: f64) -> ComponentSpec {
    let pair = HypothesisPair::poisson(10.0, 15.0).unwrap();
    ComponentSpec::simple(ComponentId(1), 0.5, 1.0, pair, SprtConfig::wald(alpha, beta).unwrap()).unwrap()
}

fn c5_sprt_error_bounds() -> Outcome {
    let (a, b) = (0.01, 0.01);
    let spec = sprt_spec(a, b);
    let h0 = run_single_component(&spec, false, 100_000, 5)?;
    let h1 = run_single_component(&spec, true, 100_000, 5)?;
    let fa_limit = a / (1.0 - b) + 3.0 * h0.stderr_fraction;
    let md_limit = b / (1.0 - a) + 3.0 * h1.stderr_fraction;
    let (fa, md) = (h0.abnormal_fraction, h1.normal_fraction());
    Ok((
        fa <= fa_limit && md <= md_limit,
        format!("P_FA {fa:.5} (limit {fa_limit:.5}), P_MD {md:.5} (limit {md_limit:.5})"),
    ))
}

fn c6_wald_sample_sizes() -> Outcome {
    let ab = 1e-3;
    let spec = sprt_spec(ab, ab);
    let wald = expected_sample_sizes_simple(spec.design_pair(), ab, ab)?;
    let h0 = run_single_component(&spec, false, 100_000, 6)?;
    let h1 = run_single_component(&spec, true, 100_000, 6)?;
    let e0 = (h0.mean_n - wald.en_h0).abs() / wald.en_h0;
    let e1 = (h1.mean_n - wald.en_h1).abs() / wald.en_h1;
    Ok((
        e0 <= 0.15 && e1 <= 0.15,
        format!(
            "E(N|H0) {:.4} vs {:.4} ({:+.1}%), E(N|H1) {:.4} vs {:.4} ({:+.1}%)",
            h0.mean_n,
            wald.en_h0,
            100.0 * (h0.mean_n / wald.en_h0 - 1.0),
            h1.mean_n,
            wald.en_h1,
            100.0 * (h1.mean_n / wald.en_h1 - 1.0)
        ),
    ))
}

fn theta_row<'a>(t: &'a ResultTable, theta: f64, test: &str) -> &'a [String] {
    find(t, |r| num(cell(t, r, "theta")) == theta && cell(t, r, "test") == test)
}

fn c7_fig3_ordering() -> Outcome {
    let mut cfg = preset("fig3-theta-sweep");
    if let Some(s) = cfg.sweep.as_mut() {
        s.values = Some(vec![15.0, 19.0, 21.0, 22.0, 25.0, 30.0]);
    }
    let t = run_experiment(&cfg, true)?;
    let t = &t;
    let n = |theta: f64, test: &str| num(cell(t, theta_row(t, theta, test), "mean_n"));
    let mut failures = Vec::new();
    for theta in [19.0, 21.0] {
        if !(n(theta, "sprt") <= n(theta, "sglrt") && n(theta, "sprt") <= n(theta, "salrt")) {
            failures.push(format!(
                "(a) theta={theta}: sprt {} sglrt {} salrt {}",
                n(theta, "sprt"),
                n(theta, "sglrt"),
                n(theta, "salrt")
            ));
        }
    }
    for theta in [15.0, 25.0] {
        if n(theta, "sglrt") > n(theta, "sprt") {
            failures.push(format!(
                "(b) theta={theta}: sglrt {} > sprt {}",
                n(theta, "sglrt"),
                n(theta, "sprt")
            ));
        }
    }
    for test in ["sprt", "sglrt", "salrt"] {
        if n(30.0, test) >= n(22.0, test) {
            failures.push(format!(
                "(c) {test}: N(30) {} >= N(22) {}",
                n(30.0, test),
                n(22.0, test)
            ));
        }
    }
    let fa_row = theta_row(t, 19.0, "sglrt");
    let fa = num(cell(t, fa_row, "error_rate"));
    let fa_limit = 0.026 + 3.0 * num(cell(t, fa_row, "stderr_fraction"));
    let md_row = theta_row(t, 21.0, "sglrt");
    let md = num(cell(t, md_row, "error_rate"));
    let md_limit = 0.03 + 3.0 * num(cell(t, md_row, "stderr_fraction"));
    if fa > fa_limit || md > md_limit {
        failures.push(format!(
            "(d) sglrt P_FA {fa} (limit {fa_limit}), P_MD {md} (limit {md_limit})"
        ));
    }
    let detail = if failures.is_empty() {
        format!("all orderings hold; sglrt P_FA {fa}, P_MD {md}")
    } else {
        failures.join("; ")
    };
    Ok((failures.is_empty(), detail))
}

fn c8_belief_diagnostics() -> Outcome {
    let pair = HypothesisPair::poisson(10.0, 15.0)?;
    let mut worst = 0.0f64;
    let mut unprobed_changed = 0usize;
    for seq in 0..1000 {
        let mut rng = substream(8, StreamDomain::Verify, seq);
        let k = rng.random_range(2..=12);
        let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let mut excl = BeliefState::new(raw.iter().map(|x| x / total).collect())?;
        let mut ind = BeliefState::new(raw.clone())?;
        for _ in 0..rng.random_range(1..=30) {
            let probed = rng.random_range(0..k);
            let source = if rng.random_bool(0.5) { pair.h1() } else { pair.h0() };
            let len = rng.random_range(1..=40);
            let batch: Vec<f64> = (0..len).map(|_| source.sample(&mut rng)).collect();
            excl = belief_update_exclusive(&excl, probed, &batch, &pair)?;
            worst = worst.max((excl.sum() - 1.0).abs());
            let next = belief_update_independent(&ind, probed, &batch, &pair)?;
            unprobed_changed += (0..k)
                .filter(|&i| i != probed && next.beliefs[i].to_bits() != ind.beliefs[i].to_bits())
                .count();
            ind = next;
        }
    }
    Ok((
        worst <= 1e-9 && unprobed_changed == 0,
        format!("max |sum - 1| = {worst:e}, unprobed independent beliefs changed: {unprobed_changed}"),
    ))
}

fn c9_engine_cross_validation() -> Outcome {
    let mut cfg = preset("fig1-independent");
    cfg.components.k = Some(20);
    cfg.policies = vec![PolicyRule::PiCN];
    cfg.sample_sizes = SampleSizeMode::MonteCarlo { trials: 200_000 };
    let t = run_experiment(&cfg, false)?;
    let mut ok = true;
    let mut parts = Vec::new();
    for row in &t.rows {
        let mean = num(cell(&t, row, "mean_cost"));
        let se = num(cell(&t, row, "stderr"));
        let analytic = num(cell(&t, row, "analytic_cost"));
        let z = (mean - analytic) / se;
        ok &= z.abs() <= 3.0;
        parts.push(format!(
            "{} {mean:.2} vs {analytic:.2} (z={z:+.2})",
            cell(&t, row, "policy")
        ));
    }
    Ok((ok, parts.join(", ")))
}

fn csv_bytes(cfg: &ExperimentConfig, sweep: bool) -> Result<Vec<u8>, Box<dyn std::error::Error>> {
    let mut out = Vec::new();
    write_csv(&run_experiment(cfg, sweep)?, &mut out)?;
    Ok(out)
}

fn c10_determinism() -> Outcome {
    let mut checks = Vec::new();
    for name in [
        "fig1-independent",
        "fig1-exclusive",
        "fig2-multiprobe",
        "fig3-theta-sweep",
    ] {
        let mut cfg = preset(name);
        cfg.trials = 2000;
        checks.push((name.to_string(), csv_bytes(&cfg, true)? == csv_bytes(&cfg, true)?));
    }
    let dir = std::env::temp_dir().join(format!("seqprobe-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("presets/fig1-exclusive.toml");
    let outs: Vec<PathBuf> = (0..2).map(|i| dir.join(format!("run{i}.csv"))).collect();
    for out in &outs {
        let status = Command::new(env!("CARGO_BIN_EXE_seqprobe"))
            .args(["sweep", "--trials", "1000", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(out)
            .status()?;
        if !status.success() {
            return Ok((false, format!("cli exited with {status}")));
        }
    }
    checks.push((
        "cli sweep".to_string(),
        std::fs::read(&outs[0])? == std::fs::read(&outs[1])?,
    ));
    std::fs::remove_dir_all(&dir).ok();
    let bad: Vec<_> = checks
        .iter()
        .filter(|(_, same)| !same)
        .map(|(n, _)| n.as_str())
        .collect();
    Ok((
        bad.is_empty(),
        if bad.is_empty() {
            format!("{} reruns byte-identical", checks.len())
        } else {
            format!("differing output: {}", bad.join(", "))
        },
    ))
}

fn main() -> ExitCode {
    let secs = |s| Some(Duration::from_secs(s));
    let criteria = [
        Criterion {
            id: 1,
            name: "order optimality, independent",
            limit: secs(5),
            run: c1_oracle_independent,
        },
        Criterion {
            id: 2,
            name: "order optimality, exclusive",
            limit: secs(5),
            run: c2_oracle_exclusive,
        },
        Criterion {
            id: 3,
            name: "index order vs random order cost",
            limit: secs(300),
            run: c3_fig1_savings,
        },
        Criterion {
            id: 4,
            name: "two probes, exhaustive gain",
            limit: secs(600),
            run: c4_fig2_multiprobe,
        },
        Criterion {
            id: 5,
            name: "SPRT error bounds",
            limit: secs(60),
            run: c5_sprt_error_bounds,
        },
        Criterion {
            id: 6,
            name: "Wald sample-size approximation",
            limit: secs(60),
            run: c6_wald_sample_sizes,
        },
        Criterion {
            id: 7,
            name: "composite test sample-size ordering",
            limit: secs(600),
            run: c7_fig3_ordering,
        },
        Criterion {
            id: 8,
            name: "belief update diagnostics",
            limit: None,
            run: c8_belief_diagnostics,
        },
        Criterion {
            id: 9,
            name: "engine vs closed-form cost",
            limit: None,
            run: c9_engine_cross_validation,
        },
        Criterion {
            id: 10,
            name: "determinism",
            limit: None,
            run: c10_determinism,
        },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let (mut pass, mut detail) = match outcome {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if let Some(limit) = c.limit.filter(|l| elapsed > *l) {
            pass = false;
            detail = format!("{detail}; exceeded {}s", limit.as_secs());
        }
        failed += usize::from(!pass);
        println!(
            "criterion {:>2} {} {}: {detail} [{:.1}s]",
            c.id,
            if pass { "PASS" } else { "FAIL" },
            c.name,
            elapsed.as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

//! Command implementations behind the `weakmeas` binary.
//!
//! Each command takes parsed arguments plus a sink for its human-readable
//! report and returns `Result<(), Failure>`, where the failure carries the
//! process exit code: 2 for bad input, 3 for I/O, 4 for a chain too long
//! to enumerate, 5 for a degenerate pre/post geometry, and 6 when a
//! statistical check fails.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::config;
use crate::error::Error;
use crate::protocols::{
    exact_distribution, run_chain, ExperimentConfig, FinalOutcome, MeasurementOrder, RunLog,
    WeakStep,
};
use crate::qstate::spin_observable;
use crate::stats::{
    by_final, compare, conditional_frequency, empirical_counts, mismatch_rate, pointer_mean,
};
use crate::unsharp::{PointerOutcome, Readout, UnsharpCoupling};
use crate::weakvalue::{estimate_weak_value, weak_value};

/// A command that could not complete, with its process exit code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

fn classify(e: &Error) -> i32 {
    match e {
        Error::TooManySteps { .. } => 4,
        Error::OrthogonalPrePost | Error::ImpossiblePostselection => 5,
        Error::EmptySubEnsemble => 6,
        _ => 2,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: classify(&e),
            message: e.to_string(),
        }
    }
}

fn io_failure(action: &str, path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: 3,
        message: format!("cannot {action} {}: {e}", path.display()),
    }
}

fn sink_failure(e: std::fmt::Error) -> Failure {
    Failure {
        code: 3,
        message: format!("cannot write report: {e}"),
    }
}

/// Command-line overrides layered on top of a config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub order: Option<MeasurementOrder>,
}

impl Overrides {
    pub fn apply(&self, mut config: ExperimentConfig) -> Result<ExperimentConfig, Failure> {
        if let Some(t) = self.trials {
            config = config.with_trials(t)?;
        }
        if let Some(s) = self.seed {
            config = config.with_seed(s);
        }
        if let Some(o) = self.order {
            config = config.with_order(o);
        }
        Ok(config)
    }
}

/// Relative output paths land in `$WEAKMEAS_OUTPUT_DIR` when it is set.
pub fn resolve_output_path(path: &Path) -> PathBuf {
    if path.is_absolute() {
        return path.to_path_buf();
    }
    match std::env::var_os("WEAKMEAS_OUTPUT_DIR") {
        Some(dir) if !dir.is_empty() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    }
}

fn load_config(path: &Path) -> Result<ExperimentConfig, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| io_failure("read", path, e))?;
    Ok(config::parse_config(&text)?)
}

fn run_csv(log: &RunLog) -> String {
    let steps = log.config.steps().len();
    let mut csv = String::with_capacity(32 * (1 + log.records.len() * steps));
    csv.push_str("serial,step,pointer,final,mismatch\n");
    for r in &log.records {
        for (step, outcome) in r.pointer_outcomes.iter().enumerate() {
            let mismatch = match r.mismatch {
                Some(true) => "1",
                Some(false) => "0",
                None => "",
            };
            let _ = writeln!(
                csv,
                "{},{},{},{},{}",
                r.serial,
                step,
                outcome.letter(),
                r.final_outcome.symbol(),
                mismatch
            );
        }
    }
    csv
}

fn run_summary(log: &RunLog, written: &Path, out: &mut String) -> std::fmt::Result {
    let config = &log.config;
    writeln!(out, "order: {}", config.order())?;
    writeln!(out, "steps: {}", config.steps().len())?;
    writeln!(out, "trials: {} (seed {})", config.trials(), config.seed())?;
    for step in 0..config.steps().len() {
        let ups = log
            .records
            .iter()
            .filter(|r| r.pointer_outcomes[step].sign() > 0.0)
            .count();
        let rate = ups as f64 / log.records.len() as f64;
        writeln!(out, "step {step} P(pointer = u): {rate:.6}")?;
    }
    let plus = log
        .records
        .iter()
        .filter(|r| r.final_outcome == FinalOutcome::Plus)
        .count();
    writeln!(
        out,
        "P(final = +): {:.6}",
        plus as f64 / log.records.len() as f64
    )?;
    if config.steps().len() == 1 {
        if let Ok(m) = mismatch_rate(log) {
            writeln!(
                out,
                "mismatch rate: {:.6} (95% CI {:.6}..{:.6})",
                m.rate, m.wilson_low, m.wilson_high
            )?;
        }
    }
    for f in [FinalOutcome::Plus, FinalOutcome::Minus] {
        let sub = by_final(log, f);
        writeln!(
            out,
            "final={} sub-ensemble: {} trials",
            f.symbol(),
            sub.len()
        )?;
        if sub.is_empty() {
            continue;
        }
        for step in 0..config.steps().len() {
            let freq =
                conditional_frequency(&sub, |r| r.pointer_outcomes[step] == PointerOutcome::U)
                    .expect("sub-ensemble is nonempty");
            let (mean, stderr) = pointer_mean(&sub, step).expect("sub-ensemble is nonempty");
            writeln!(
                out,
                "  step {step}: P(pointer=u) = {:.6}, mean = {mean:+.6} (stderr {stderr:.6})",
                freq.rate
            )?;
        }
    }
    writeln!(out, "wrote: {}", written.display())
}

/// Simulate a config and write one CSV row per trial and step.
pub fn cmd_run(
    config_path: &Path,
    output: &Path,
    overrides: &Overrides,
    out: &mut impl Write,
) -> Result<(), Failure> {
    let config = overrides.apply(load_config(config_path)?)?;
    let log = run_chain(&config)?;
    let target = resolve_output_path(output);
    std::fs::write(&target, run_csv(&log)).map_err(|e| io_failure("write", &target, e))?;
    let mut report = String::new();
    run_summary(&log, &target, &mut report).map_err(sink_failure)?;
    out.write_all(report.as_bytes())
        .map_err(|e| io_failure("write", Path::new("<stdout>"), e))
}

fn exact_csv(config: &ExperimentConfig) -> Result<String, Failure> {
    let table = exact_distribution(config)?;
    let mut csv = String::from("outcome_tuple,final,probability\n");
    for (key, p) in table.entries() {
        let tuple: String = key.0.iter().map(|o| o.letter()).collect();
        let _ = writeln!(csv, "{tuple},{},{p:.12}", key.1.symbol());
    }
    Ok(csv)
}

/// Print (or save) the exact joint outcome distribution of a config.
pub fn cmd_exact(
    config_path: &Path,
    output: Option<&Path>,
    overrides: &Overrides,
    out: &mut impl Write,
) -> Result<(), Failure> {
    let config = overrides.apply(load_config(config_path)?)?;
    let csv = exact_csv(&config)?;
    match output {
        Some(path) => {
            let target = resolve_output_path(path);
            std::fs::write(&target, csv).map_err(|e| io_failure("write", &target, e))?;
            writeln!(out, "wrote: {}", target.display())
                .map_err(|e| io_failure("write", Path::new("<stdout>"), e))
        }
        None => out
            .write_all(csv.as_bytes())
            .map_err(|e| io_failure("write", Path::new("<stdout>"), e)),
    }
}

/// Arguments for the weak-value command: pre/post states, the observable
/// direction, and an optional sampling request.
#[derive(Debug, Clone)]
pub struct WeakValueRequest {
    pub pre: String,
    pub post: String,
    pub direction: String,
    pub epsilon: Option<f64>,
    pub trials: Option<u64>,
    pub seed: u64,
}

/// Print the exact weak value, and when `--epsilon`/`--trials` are given,
/// estimate it from a simulated two-step run (standard then conjugate
/// readout of the same observable).
pub fn cmd_weakvalue(req: &WeakValueRequest, out: &mut impl Write) -> Result<(), Failure> {
    let pre = config::parse_state(&req.pre)?;
    let post_direction = config::parse_direction(&req.post)?;
    let post = post_direction.plus_eigenket();
    let obs_direction = config::parse_direction(&req.direction)?;
    let observable = spin_observable(&obs_direction);
    let wv = weak_value(&pre, &post, &observable)?;

    let mut report = String::new();
    writeln!(&mut report, "weak value: {:.12}{:+.12}i", wv.re, wv.im).map_err(sink_failure)?;

    match (req.epsilon, req.trials) {
        (None, None) => {}
        (Some(eps), Some(trials)) => {
            let coupling = UnsharpCoupling::from_epsilon(eps)?;
            let steps = vec![
                WeakStep {
                    direction: obs_direction,
                    coupling,
                    readout: Readout::Standard,
                },
                WeakStep {
                    direction: obs_direction,
                    coupling,
                    readout: Readout::Conjugate,
                },
            ];
            let config = ExperimentConfig::new(
                &pre,
                steps,
                post_direction,
                MeasurementOrder::PointerFirst,
                trials,
                req.seed,
            )?;
            let log = run_chain(&config)?;
            let est = estimate_weak_value(&log)?;
            writeln!(&mut report, "epsilon: {eps:.6}").map_err(sink_failure)?;
            writeln!(&mut report, "trials: {trials} (seed {})", req.seed).map_err(sink_failure)?;
            writeln!(&mut report, "postselected: {}", est.postselected).map_err(sink_failure)?;
            writeln!(
                &mut report,
                "re estimate: {:.6} (stderr {:.6})",
                est.re, est.re_stderr
            )
            .map_err(sink_failure)?;
            if let (Some(im), Some(se)) = (est.im, est.im_stderr) {
                writeln!(&mut report, "im estimate: {im:.6} (stderr {se:.6})")
                    .map_err(sink_failure)?;
            }
        }
        _ => {
            return Err(Failure {
                code: 2,
                message: "estimation needs both --epsilon and --trials".into(),
            });
        }
    }
    out.write_all(report.as_bytes())
        .map_err(|e| io_failure("write", Path::new("<stdout>"), e))
}

/// Simulate a config, compare against the exact distribution, and fail
/// with exit code 6 when any outcome sits five or more sigma away.
pub fn cmd_compare(
    config_path: &Path,
    overrides: &Overrides,
    out: &mut impl Write,
) -> Result<(), Failure> {
    let config = overrides.apply(load_config(config_path)?)?;
    let log = run_chain(&config)?;
    let table = exact_distribution(&config)?;
    let report = compare(&log, &table)?;
    debug_assert_eq!(
        report.rows.len(),
        empirical_counts(&log).len().max(table.len())
    );

    let mut text = String::new();
    let fail = |e| sink_failure(e);
    writeln!(
        &mut text,
        "outcomes final exact          empirical      count    z"
    )
    .map_err(fail)?;
    for row in &report.rows {
        let tuple: String = row.key.0.iter().map(|o| o.letter()).collect();
        let z = if row.z.is_finite() {
            format!("{:+.2}", row.z)
        } else {
            "inf".into()
        };
        writeln!(
            &mut text,
            "{tuple:<8} {:<5} {:.12} {:.12} {:<8} {z}",
            row.key.1.symbol(),
            row.exact,
            row.empirical,
            row.count
        )
        .map_err(fail)?;
    }
    writeln!(&mut text, "trials: {}", report.trials).map_err(fail)?;
    writeln!(&mut text, "total variation: {:.6}", report.total_variation).map_err(fail)?;
    writeln!(&mut text, "max |z|: {:.2}", report.max_abs_z).map_err(fail)?;
    out.write_all(text.as_bytes())
        .map_err(|e| io_failure("write", Path::new("<stdout>"), e))?;

    if report.max_abs_z >= 5.0 {
        return Err(Failure {
            code: 6,
            message: format!(
                "empirical distribution disagrees with exact: max |z| = {:.2}",
                report.max_abs_z
            ),
        });
    }
    Ok(())
}

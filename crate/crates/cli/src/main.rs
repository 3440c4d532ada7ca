use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use convergema::anchoring::{AnchoringStrategy, PLevelSource};
use convergema::convergence::{
    clevel, epsilon_sequence, find_optimal_look_ahead, normalize_threshold, put_series, ConditionKind, EpsilonRecord,
    ProximityCondition, TuningInputs, TuningReport,
};
use convergema::evalframe::{
    accuracy, format2, performance, AbsoluteThreshold, AccuracyMode, ErrorTarget, FrameInputs,
    FrameReport, Horizon, LocalTestingFrame, RecordedFrame, Run, DEFAULT_HORIZON_LEN,
    REPORT_COLUMNS,
};
use convergema::fit::FitConfig;
use convergema::io;
use convergema::par::Parallelism;
use convergema::synth::{generate, GeneratorSpec};
use convergema::trace::{BackboneEntry, LearningScheme, LearningTrace, Observation, TraceParams};

const EXIT_NOT_CONVERGED: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "convergema", version, about = "Stop decisions for learning curves with anchored power-law traces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a trace over an observation file and decide whether it converged.
    Analyze {
        observations: PathBuf,
        #[command(flatten)]
        config: Config,
        /// Tidy CSV with level, size, backbone, epsilon and PUT columns.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Sweep PUT targets to pick the look-ahead of a fixed anchor.
    Tune {
        observations: PathBuf,
        #[command(flatten)]
        config: Config,
        /// Anchor value of the fixed strategy being tuned.
        #[arg(long, default_value_t = 100.0)]
        beta: f64,
        /// Relative threshold of the anchor-free baseline run.
        #[arg(long)]
        tau_r: f64,
    },
    /// Build a local testing frame and report cost, accuracy and performance.
    Evaluate {
        frame: PathBuf,
        #[command(flatten)]
        config: Config,
        /// Report table as CSV.
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Generate a synthetic observation file from a JSON spec.
    Simulate {
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Clone)]
struct Config {
    /// none | canonical | fixed:<beta> | fixed:<beta>+<look-ahead>
    #[arg(long, default_value = "fixed:100")]
    strategy: String,
    #[arg(long, default_value = "absolute")]
    condition: ConditionKind,
    #[arg(long, allow_hyphen_values = true)]
    tau: Option<f64>,
    #[arg(long, default_value_t = 2e-5)]
    nu: f64,
    #[arg(long, default_value_t = 1)]
    slowdown: u32,
    #[arg(long, default_value_t = 5)]
    lambda: u32,
    /// Enforce a uniform scheme with this kernel size.
    #[arg(long)]
    kernel: Option<u64>,
    /// Enforce a uniform scheme with this step.
    #[arg(long)]
    step: Option<u64>,
    /// Horizon observation file; defaults to the observation file itself.
    #[arg(long)]
    horizon: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_HORIZON_LEN)]
    horizon_len: usize,
    /// JSON report path.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-12)]
    fit_tol: f64,
    #[arg(long, default_value_t = 200)]
    fit_max_iter: usize,
    #[arg(long, default_value_t = 1.0)]
    anchor_weight: f64,
    #[arg(long, default_value = "reference")]
    plevel_source: PLevelSource,
    #[arg(long, default_value = "raw")]
    error_target: ErrorTarget,
    /// Disable the thread pool.
    #[arg(long)]
    sequential: bool,
}

impl Config {
    fn params(&self) -> Result<TraceParams> {
        let defaults = TraceParams::default();
        if self.fit_max_iter == 0 {
            bail!("--fit-max-iter must be positive");
        }
        let params = TraceParams {
            nu: self.nu,
            slowdown: self.slowdown,
            lambda: self.lambda,
            anchor_weight: self.anchor_weight,
            plevel_source: self.plevel_source,
            fit: FitConfig {
                sse_tol: self.fit_tol,
                max_iter: self.fit_max_iter,
                ..defaults.fit
            },
            ..defaults
        };
        params.validate()?;
        Ok(params)
    }

    fn scheme(&self) -> Option<LearningScheme> {
        match (self.kernel, self.step) {
            (None, None) => None,
            (k, s) => Some(LearningScheme::uniform(k.unwrap_or(5000), s.unwrap_or(5000))),
        }
    }

    fn strategy(&self) -> Result<AnchoringStrategy> {
        Ok(self.strategy.parse()?)
    }

    fn condition(&self) -> Result<ProximityCondition> {
        let tau = self.tau.ok_or_else(|| anyhow!("--tau is required"))?;
        Ok(ProximityCondition::new(self.condition, tau)?)
    }

    fn parallelism(&self) -> Parallelism {
        if self.sequential {
            Parallelism::Sequential
        } else {
            Parallelism::Parallel
        }
    }

    fn trace(&self, observations: &[Observation], strategy: AnchoringStrategy) -> Result<LearningTrace> {
        Ok(LearningTrace::from_observations(
            observations,
            self.params()?,
            strategy,
            self.scheme(),
            self.parallelism(),
        )?)
    }

    fn horizon(&self, fallback: &[Observation]) -> Result<Horizon> {
        let mut obs = match &self.horizon {
            Some(path) => read_observations(path)?,
            None => fallback.to_vec(),
        };
        obs.truncate(self.horizon_len);
        Ok(Horizon::from_observations(obs, &self.params()?.fit)?)
    }
}

fn read_observations(path: &Path) -> Result<Vec<Observation>> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    io::read_observations(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, io::to_json(value)?).with_context(|| format!("cannot write {}", path.display()))
}

#[derive(Serialize)]
struct AnalysisReport {
    strategy: String,
    condition: ConditionKind,
    tau: f64,
    levels: u32,
    wlevel: Option<u32>,
    plevel: Option<u32>,
    clevel: Option<u32>,
    converged: bool,
    backbone: Vec<BackboneEntry>,
    epsilon: Vec<EpsilonRecord>,
    put: Vec<(u32, f64)>,
}

fn analyze(path: &Path, config: &Config, plot: Option<&Path>) -> Result<bool> {
    let condition = config.condition()?;
    let observations = read_observations(path)?;
    let trace = config.trace(&observations, config.strategy()?)?;
    let stop = clevel(&trace, &condition)?;
    let epsilon = epsilon_sequence(&trace).unwrap_or_default();
    let put = if trace.strategy().is_fixed() {
        put_series(&trace, &condition).unwrap_or_default()
    } else {
        Vec::new()
    };
    let report = AnalysisReport {
        strategy: trace.strategy().to_string(),
        condition: condition.kind,
        tau: condition.tau,
        levels: trace.last_level(),
        wlevel: trace.wlevel(),
        plevel: trace.plevel(),
        clevel: stop,
        converged: stop.is_some(),
        backbone: trace.backbone(),
        epsilon,
        put,
    };

    let show = |v: Option<u32>| v.map_or("unresolved".to_string(), |l| l.to_string());
    println!("levels   {}", report.levels);
    println!("wlevel   {}", show(report.wlevel));
    println!("plevel   {}", show(report.plevel));
    match stop {
        Some(l) => println!("converged at level {l} ({} {} tau {})", report.strategy, condition.kind, condition.tau),
        None => println!("not converged ({} {} tau {})", report.strategy, condition.kind, condition.tau),
    }
    if let Some(out) = &config.out {
        write_json(out, &report)?;
    }
    if let Some(plot) = plot {
        write_plot(plot, &report)?;
    }
    Ok(report.converged)
}

fn write_plot(path: &Path, report: &AnalysisReport) -> Result<()> {
    let cell = |v: Option<f64>| v.map(io::fmt_num).unwrap_or_default();
    let rows: Vec<Vec<String>> = report
        .backbone
        .iter()
        .map(|b| {
            let eps = report.epsilon.iter().find(|e| e.level == b.level);
            vec![
                b.level.to_string(),
                io::fmt_num(b.x),
                io::fmt_num(b.alpha),
                cell(eps.map(|e| e.epsilon).filter(|e| e.is_finite())),
                eps.map_or(String::new(), |e| e.is_rupture.to_string()),
                cell(report.put.iter().find(|p| p.0 == b.level).map(|p| p.1)),
            ]
        })
        .collect();
    let file = File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
    io::write_table(file, &["level", "size", "alpha", "epsilon", "rupture", "put"], &rows)?;
    Ok(())
}

#[derive(Serialize)]
struct TuneOutput {
    baseline_clevel: u32,
    #[serde(flatten)]
    report: TuningReport,
    selected_a_c: Option<f64>,
    selected_rp_c: Option<f64>,
}

fn tune(path: &Path, config: &Config, beta: f64, tau_r: f64) -> Result<()> {
    let relative = ProximityCondition::new(ConditionKind::Relative, tau_r)?;
    if config.horizon.is_none() {
        bail!("tune needs --horizon");
    }
    let observations = read_observations(path)?;
    // without --tau, an absolute threshold is normalized from --tau-r
    let condition = match (config.tau, config.condition) {
        (None, ConditionKind::Absolute) => {
            let fixed = config.trace(&observations, AnchoringStrategy::fixed(beta))?;
            let tau = normalize_threshold(&fixed, tau_r)
                .context("cannot normalize --tau-r into an absolute threshold")?;
            ProximityCondition::new(ConditionKind::Absolute, tau)?
        }
        _ => config.condition()?,
    };
    let horizon = config.horizon(&observations)?;
    let plain = config.trace(&observations, AnchoringStrategy::None)?;
    let baseline = Run::new("baseline", plain, relative)
        .clevel
        .ok_or_else(|| anyhow!("the anchor-free baseline never meets the relative condition"))?;
    let inputs = TuningInputs {
        observations: observations.clone(),
        params: config.params()?,
        scheme: config.scheme(),
        condition,
        baseline_clevel: baseline,
        parallelism: config.parallelism(),
    };
    let report = find_optimal_look_ahead(&inputs, beta);

    let mut selected_a_c = None;
    if let Some(la) = report.selected_candidate().and_then(|c| c.look_ahead) {
        let trace = config.trace(&observations, AnchoringStrategy::fixed_look_ahead(beta, la))?;
        let run = Run::new("selected", trace, condition);
        selected_a_c = accuracy(&run, &horizon, AccuracyMode::Convergence, config.error_target, condition.tau).ok();
    }
    let selected_rc = report.selected_candidate().and_then(|c| c.rc);

    println!("baseline clevel {baseline}");
    println!("threshold {} {}", condition.kind, condition.tau);
    println!("{:>6} {:>10} {:>8} {:>8} {:>8}", "zeta", "look_ahead", "put", "clevel", "rc");
    for (k, c) in report.candidates.iter().enumerate() {
        let mark = if report.selected == Some(k) { " *" } else { "" };
        println!(
            "{:>6} {:>10} {:>8} {:>8} {:>8}{mark}",
            c.zeta,
            c.look_ahead.map_or("-".into(), |v| v.to_string()),
            c.put.map_or("-".into(), format2),
            c.clevel.map_or("-".into(), |v| v.to_string()),
            c.rc.map_or("-".into(), format2),
        );
    }
    let output = TuneOutput {
        baseline_clevel: baseline,
        selected_rp_c: selected_a_c.zip(selected_rc).map(|(a, r)| performance(a, r)),
        report,
        selected_a_c,
    };
    if let Some(out) = &config.out {
        write_json(out, &output)?;
    }
    Ok(())
}

/// Frame built from an observation log; paths are relative to the spec.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TraceFrameSpec {
    observations: PathBuf,
    #[serde(default)]
    horizon: Option<PathBuf>,
    #[serde(default)]
    horizon_len: Option<usize>,
    tau_r: f64,
    #[serde(default)]
    tau_a: Option<f64>,
    #[serde(default)]
    normalize_on: Option<String>,
    strategies: Vec<String>,
    conditions: Vec<ConditionKind>,
    #[serde(default)]
    tune: bool,
    #[serde(default)]
    error_target: Option<ErrorTarget>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum FrameSpec {
    Recorded(RecordedFrame),
    Trace(TraceFrameSpec),
}

fn evaluate(path: &Path, config: &Config, table: Option<&Path>) -> Result<()> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot open {}", path.display()))?;
    let spec: FrameSpec = serde_json::from_str(&text)
        .with_context(|| format!("{} is neither a recorded nor a trace frame spec", path.display()))?;
    let report = match spec {
        FrameSpec::Recorded(frame) => frame.report()?,
        FrameSpec::Trace(spec) => trace_frame(path, spec, config)?,
    };
    let rows = report.table();
    let mut stdout = std::io::stdout().lock();
    io::write_table(&mut stdout, &REPORT_COLUMNS, &rows)?;
    stdout.flush()?;
    if let Some(t) = table {
        io::write_table(File::create(t)?, &REPORT_COLUMNS, &rows)?;
    }
    if let Some(out) = &config.out {
        write_json(out, &report)?;
    }
    Ok(())
}

fn trace_frame(spec_path: &Path, spec: TraceFrameSpec, config: &Config) -> Result<FrameReport> {
    let base = spec_path.parent().unwrap_or(Path::new("."));
    let observations = read_observations(&base.join(&spec.observations))?;
    let mut config = config.clone();
    if let Some(h) = &spec.horizon {
        config.horizon = Some(base.join(h));
    }
    if let Some(n) = spec.horizon_len {
        config.horizon_len = n;
    }
    if let Some(t) = spec.error_target {
        config.error_target = t;
    }
    let horizon = config.horizon(&observations)?;
    let strategies = spec
        .strategies
        .iter()
        .map(|s| s.parse::<AnchoringStrategy>())
        .collect::<Result<Vec<_>, _>>()?;
    let tau_a = match (spec.tau_a, spec.normalize_on) {
        (Some(t), _) => AbsoluteThreshold::Explicit(t),
        (None, s) => AbsoluteThreshold::NormalizeOn(s.as_deref().unwrap_or("fixed:100").parse()?),
    };
    let inputs = FrameInputs {
        observations,
        scheme: config.scheme(),
        params: config.params()?,
        tau_r: spec.tau_r,
        tau_a,
        strategies,
        conditions: spec.conditions,
        tune: spec.tune,
        error_target: config.error_target,
        parallelism: config.parallelism(),
    };
    let frame = LocalTestingFrame::build(&inputs)?;
    Ok(frame.report(&horizon, config.error_target, config.parallelism()))
}

fn simulate(spec_path: &Path, out: Option<&Path>) -> Result<()> {
    let text = fs::read_to_string(spec_path).with_context(|| format!("cannot open {}", spec_path.display()))?;
    let mut spec: GeneratorSpec = serde_json::from_str(&text).context("invalid generator spec")?;
    if let Ok(seed) = std::env::var("CONVERGEMA_SEED") {
        spec.seed = seed
            .trim()
            .parse()
            .map_err(|_| anyhow!("CONVERGEMA_SEED must be an unsigned integer, got '{seed}'"))?;
    }
    let observations = generate(&spec)?;
    match out {
        Some(path) => io::write_observations(File::create(path)?, &observations)?,
        None => io::write_observations(std::io::stdout().lock(), &observations)?,
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Analyze { observations, config, plot } => {
            let converged = analyze(&observations, &config, plot.as_deref())?;
            Ok(if converged {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_NOT_CONVERGED)
            })
        }
        Command::Tune { observations, config, beta, tau_r } => {
            tune(&observations, &config, beta, tau_r)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Evaluate { frame, config, table } => {
            evaluate(&frame, &config, table.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate { spec, out } => {
            simulate(&spec, out.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // usage errors share the generic failure code; 2 means "not converged"
            let _ = err.print();
            return if err.use_stderr() {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn recorded_and_trace_specs_are_told_apart() {
        let recorded = r#"{"baseline_clevel": 58, "runs": [{"name": "fixed", "clevel": 100, "a_c": 4.24}]}"#;
        assert!(matches!(serde_json::from_str(recorded).unwrap(), FrameSpec::Recorded(_)));
        let trace = r#"{"observations": "o.csv", "tau_r": 0.05, "strategies": ["none"], "conditions": ["relative"]}"#;
        assert!(matches!(serde_json::from_str(trace).unwrap(), FrameSpec::Trace(_)));
    }
}

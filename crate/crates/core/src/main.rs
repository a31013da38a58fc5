use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use hsps_core::analytic::{self, RelativeSigmas};
use hsps_core::config::{Config, SimSettings};
use hsps_core::domain::make_scenario;
use hsps_core::error::{Error, Result};
use hsps_core::estimator::{accidental_coincidence_rate, bootstrap_errors};
use hsps_core::record::{fmt_f64, Record};
use hsps_core::report::{run_reproduce, Which};
use hsps_core::simulator::{self, true_window_distribution, Engine, RawCounts};
use hsps_core::sweep::{run_sweep, Figure, Method, Scale, SweepParam, SweepSpec};

#[derive(Parser)]
#[command(name = "hsps", version, about = "Heralded single-photon source model, simulator and estimator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the built-in scenarios against the published figure tables.
    Reproduce(ReproduceArgs),
    /// Closed-form figures of merit of a configuration.
    Analytic(AnalyticArgs),
    /// Monte Carlo run of the bench; writes a counts record.
    Simulate(SimulateArgs),
    /// Figures of merit from a counts record.
    Estimate(EstimateArgs),
    /// One-parameter sweep as CSV.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Csv,
}

#[derive(Args)]
struct Source {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Catalog scenario, used when no config file is given.
    #[arg(long, conflicts_with = "config")]
    scenario: Option<String>,
}

impl Source {
    fn load(&self) -> Result<Config> {
        match (&self.config, &self.scenario) {
            (Some(path), _) => Config::load(path),
            (None, Some(name)) => Ok(Config::from_scenario(&make_scenario(name)?)),
            (None, None) => Config::parse(""),
        }
    }
}

#[derive(Args)]
struct ReproduceArgs {
    #[arg(long, default_value = "all")]
    which: String,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
    /// Also simulate the model columns for this many seconds per replica.
    #[arg(long)]
    mc_duration: Option<f64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    replicas: u32,
}

#[derive(Args)]
struct AnalyticArgs {
    #[command(flatten)]
    source: Source,
    /// Relative parameter uncertainty, e.g. `mu=0.05`; repeatable.
    #[arg(long = "rel-sigma", value_name = "PARAM=SIGMA")]
    rel_sigma: Vec<String>,
    #[arg(long, default_value_t = 10000)]
    resamples: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicas: Option<u32>,
    #[arg(long)]
    dead_time: Option<f64>,
    #[arg(long)]
    engine: Option<String>,
    /// Output file; standard output if absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    counts: PathBuf,
    #[command(flatten)]
    source: Source,
    #[arg(long, default_value_t = 2000)]
    resamples: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Analytic,
    MonteCarlo,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long)]
    param: String,
    #[arg(long)]
    min: f64,
    #[arg(long)]
    max: f64,
    #[arg(long)]
    steps: usize,
    #[arg(long)]
    log: bool,
    #[arg(long, value_enum, default_value = "analytic")]
    method: MethodArg,
    /// Comma-separated subset of p1, p2, g2, suppression.
    #[arg(long, value_delimiter = ',')]
    figures: Vec<String>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Monte Carlo duration per step and replica (s).
    #[arg(long, default_value_t = 1.0)]
    duration: f64,
    #[arg(long, default_value_t = 1)]
    replicas: u32,
    #[arg(long, default_value_t = 500)]
    resamples: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Reproduce(a) => reproduce(a),
        Command::Analytic(a) => analytic_cmd(a).map(|()| true),
        Command::Simulate(a) => simulate_cmd(a).map(|()| true),
        Command::Estimate(a) => estimate_cmd(a).map(|()| true),
        Command::Sweep(a) => sweep_cmd(a).map(|()| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display()))),
        None => stdout(text),
    }
}

fn stdout(text: &str) -> Result<()> {
    use std::io::Write;
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn reproduce(a: ReproduceArgs) -> Result<bool> {
    let which: Which = a.which.parse()?;
    let mc = a.mc_duration.map(|duration| SimSettings {
        duration,
        seed: a.seed,
        replicas: a.replicas,
        ..SimSettings::default()
    });
    let report = run_reproduce(which, mc.as_ref())?;
    match a.format {
        Format::Table => stdout(&report.to_table())?,
        Format::Csv => stdout(&report.to_csv())?,
    }
    Ok(report.passed())
}

fn parse_rel_sigmas(items: &[String]) -> Result<RelativeSigmas> {
    let mut s = RelativeSigmas::default();
    for item in items {
        let (name, value) = item
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected PARAM=SIGMA, got `{item}`")))?;
        let v: f64 = value
            .parse()
            .map_err(|_| Error::Config(format!("bad sigma `{value}` for {name}")))?;
        let slot = match name {
            "mu" => &mut s.mu,
            "delta_t" => &mut s.delta_t,
            "gamma" => &mut s.gamma,
            "eta_trigger" => &mut s.eta_trigger,
            "trigger_transmission" => &mut s.trigger_transmission,
            "dark_rate_trigger" => &mut s.dark_rate_trigger,
            other => return Err(Error::Config(format!("no uncertainty for parameter `{other}`"))),
        };
        *slot = v;
    }
    Ok(s)
}

fn analytic_cmd(a: AnalyticArgs) -> Result<()> {
    let config = a.source.load()?;
    let p = &config.params;
    let sigmas = parse_rel_sigmas(&a.rel_sigma)?;
    let fom = if a.rel_sigma.is_empty() {
        analytic::figures_of_merit(p)?
    } else {
        analytic::propagate_uncertainty(p, &sigmas, a.resamples, a.seed)?
    };
    let mut rec = Record::new();
    fom.to_record(&mut rec, "figures");
    let d = rec.section("derived");
    d.push("herald_rate", fmt_f64(p.herald_rate()));
    d.push("single_detection_rate", fmt_f64(analytic::single_detection_rate(p)?));
    d.push("empty_window_probability", fmt_f64(analytic::empty_window_probability(p)?));
    d.push("suppression", fmt_f64(analytic::multiphoton_suppression(&fom)?.value()));
    stdout(&format!("{rec}\n# config\n{}", comment(&config.to_toml())))
}

fn comment(text: &str) -> String {
    text.lines().map(|l| format!("# {l}\n")).collect()
}

fn simulate_cmd(a: SimulateArgs) -> Result<()> {
    let mut config = a.source.load()?;
    let s = &mut config.sim;
    if let Some(v) = a.duration {
        s.duration = v;
    }
    if let Some(v) = a.seed {
        s.seed = v;
    }
    if let Some(v) = a.replicas {
        s.replicas = v;
    }
    if let Some(v) = a.dead_time {
        s.dead_time = v;
    }
    if let Some(v) = &a.engine {
        s.engine = v.parse::<Engine>()?;
    }
    let run = simulator::simulate(&config.sim_config())?;
    for f in &run.flags {
        eprintln!("warning: {f}");
    }
    let mut rec = Record::new();
    run.to_record(&mut rec);
    let dist = true_window_distribution(&run.truth)?;
    let w = rec.section("window");
    w.push("p0", fmt_f64(dist.p0));
    w.push("p1", fmt_f64(dist.p1));
    w.push("p2plus", fmt_f64(dist.p2plus));
    let r = rec.section("rates");
    r.push("herald_rate", fmt_f64(run.counts.herald_rate()));
    r.push("singles_rate", fmt_f64(run.counts.singles_rate()));
    r.push("coincidence_rate", fmt_f64(run.counts.coincidence_rate()));
    let text = format!("{rec}\n# config\n{}", comment(&config.to_toml()));
    emit(a.out.as_deref(), &text)
}

fn estimate_cmd(a: EstimateArgs) -> Result<()> {
    let config = a.source.load()?;
    let text = std::fs::read_to_string(&a.counts)
        .map_err(|e| Error::Io(format!("{}: {e}", a.counts.display())))?;
    let counts = RawCounts::from_record(&text.parse()?)?;
    if let Some(d) = counts.params_digest {
        if d != simulator::params_digest(&config.params) {
            eprintln!("warning: counts were simulated with parameters other than this config");
        }
    }
    let opts = config.bootstrap_options(a.resamples, a.seed);
    let fom = bootstrap_errors(&counts, &config.bench, &opts)?;
    let mut rec = Record::new();
    fom.to_record(&mut rec, "figures");
    let d = rec.section("derived");
    d.push("kappa", fmt_f64(config.bench.kappa()));
    d.push(
        "accidental_coincidence_rate",
        fmt_f64(accidental_coincidence_rate(&counts, &config.bench)?),
    );
    emit(a.out.as_deref(), &rec.to_string())
}

fn sweep_cmd(a: SweepArgs) -> Result<()> {
    let config = a.source.load()?;
    let mut spec = SweepSpec::new(a.param.parse::<SweepParam>()?, a.min, a.max, a.steps);
    if a.log {
        spec.scale = Scale::Log;
    }
    if !a.figures.is_empty() {
        spec.figures = a.figures.iter().map(|f| f.parse::<Figure>()).collect::<Result<_>>()?;
    }
    let method = match a.method {
        MethodArg::Analytic => Method::Analytic,
        MethodArg::MonteCarlo => Method::MonteCarlo {
            duration: a.duration,
            seed: a.seed,
            replicas: a.replicas,
            n_resamples: a.resamples,
        },
    };
    let table = run_sweep(&spec, &config.params, &config.bench, method)?;
    let text = format!("{}{}", table.to_csv(), comment(&config.to_toml()));
    emit(a.out.as_deref(), &text)
}

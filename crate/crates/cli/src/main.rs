use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use sjc_core::config::KeyValues;
use sjc_core::estimator::{bootstrap_se, fit_sjc, format_table, FitConfig};
use sjc_core::margins::PseudoObservations;
use sjc_core::pipeline::fixture::{
    make_fixture, FixtureConfig, BENCHMARK_FILE, PRICES_FILE, RECOMMENDATIONS_FILE,
};
use sjc_core::pipeline::{build_panel, io, run_study, PipelineConfig};
use sjc_core::sampler::sample;
use sjc_core::volatility::{garch11_fit, iid_screen, DEFAULT_ARCH_LAGS};
use sjc_core::{ReflectedTerm, Sjc, TailParams};

#[derive(Parser)]
#[command(name = "sjc", version, about = "Symmetrized Joe-Clayton tail dependence toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the SJC copula to a two-column CSV and print the report as JSON.
    Fit(FitArgs),
    /// Draw pairs from the SJC copula and write them as a `u,v` CSV.
    Simulate(SimulateArgs),
    /// GARCH(1,1)-filter a return series and ARCH-test it before and after.
    Filter(FilterArgs),
    /// Build the matched panel from the three input CSVs and fit each subsample.
    Pipeline(PipelineArgs),
    /// Write a synthetic input set with planted dependence.
    Fixture(FixtureArgs),
}

#[derive(Args)]
struct FitArgs {
    /// CSV with two numeric columns.
    input: PathBuf,
    /// Rank the columns first; without this they must already lie in (0, 1).
    #[arg(long)]
    rank: bool,
    /// Use the reflected term with unswapped parameters.
    #[arg(long)]
    unswapped: bool,
    /// Bootstrap replicates (0 disables).
    #[arg(long, default_value_t = 0)]
    bootstrap: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    lambda_u: f64,
    #[arg(long)]
    lambda_l: f64,
    #[arg(short)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    unswapped: bool,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct FilterArgs {
    /// Single-column CSV of returns.
    input: PathBuf,
    #[arg(long, default_value_t = DEFAULT_ARCH_LAGS)]
    lags: usize,
    #[arg(long, default_value_t = 0.05)]
    significance: f64,
    /// Where to write the standardized residuals.
    #[arg(long)]
    residuals: PathBuf,
    /// Where to write the fit and test results (stdout if omitted).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineArgs {
    /// Directory holding recommendations.csv, prices.csv and benchmark.csv.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    recommendations: Option<PathBuf>,
    #[arg(long)]
    prices: Option<PathBuf>,
    #[arg(long)]
    benchmark: Option<PathBuf>,
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `copula` in the configuration.
    #[arg(long)]
    unswapped: bool,
    /// Report JSON destination.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Panel and provenance JSON destination.
    #[arg(long)]
    panel: Option<PathBuf>,
}

#[derive(Args)]
struct FixtureArgs {
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn mode(unswapped: bool) -> ReflectedTerm {
    if unswapped {
        ReflectedTerm::Unswapped
    } else {
        ReflectedTerm::Swapped
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).with_context(|| format!("opening {}", path.display()))
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn write_json(path: Option<&Path>, value: &impl serde::Serialize) -> Result<()> {
    let mut w = sink(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn fit(a: FitArgs) -> Result<()> {
    let pairs = io::read_pairs(open(&a.input)?)
        .with_context(|| format!("reading {}", a.input.display()))?;
    let obs = if a.rank {
        let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        PseudoObservations::from_raw(&x, &y)?
    } else {
        PseudoObservations::from_pairs(pairs)?
    };
    let config = FitConfig {
        mode: mode(a.unswapped),
        ..FitConfig::default()
    };
    let mut report = fit_sjc(&obs, &config)?;
    report.subsample_label = a.input.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    if a.bootstrap > 0 {
        report.bootstrap = Some(bootstrap_se(&obs, a.bootstrap, a.seed, &config)?);
    }
    write_json(a.output.as_deref(), &report)
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let params = TailParams::new(a.lambda_u, a.lambda_l)?;
    let copula = Sjc::with_mode(params, mode(a.unswapped));
    let pairs = sample(&copula, a.n, a.seed);
    io::write_pairs(sink(a.output.as_deref())?, &pairs)?;
    Ok(())
}

fn filter(a: FilterArgs) -> Result<()> {
    let returns = io::read_column(open(&a.input)?)
        .with_context(|| format!("reading {}", a.input.display()))?;
    let screen = iid_screen(&returns, a.lags, a.significance)?;
    let fit = match screen.fit.clone() {
        Some(f) => f,
        None => garch11_fit(&returns)?,
    };
    io::write_column(
        BufWriter::new(File::create(&a.residuals)?),
        "residual",
        &fit.residuals,
    )?;
    let filtered = match screen.filtered {
        Some(t) => t,
        None => sjc_core::volatility::arch_lm_test(&fit.residuals, a.lags)?,
    };
    write_json(
        a.output.as_deref(),
        &json!({
            "params": fit.params,
            "loglik": fit.loglik,
            "converged": fit.converged,
            "arch_raw": screen.raw,
            "arch_filtered": filtered,
            "passed": screen.passed,
        }),
    )
}

fn pipeline(a: PipelineArgs) -> Result<()> {
    let pick = |explicit: Option<PathBuf>, name: &str| -> Result<PathBuf> {
        match (explicit, &a.data_dir) {
            (Some(p), _) => Ok(p),
            (None, Some(d)) => Ok(d.join(name)),
            (None, None) => bail!("--{} or --data-dir is required", name.trim_end_matches(".csv")),
        }
    };
    let recs_path = pick(a.recommendations.clone(), RECOMMENDATIONS_FILE)?;
    let prices_path = pick(a.prices.clone(), PRICES_FILE)?;
    let bench_path = pick(a.benchmark.clone(), BENCHMARK_FILE)?;
    let mut config = match &a.config {
        Some(p) => PipelineConfig::from_kv(&KeyValues::load(p)?)?,
        None => PipelineConfig::default(),
    };
    if a.unswapped {
        config.copula = ReflectedTerm::Unswapped;
    }
    let (recs, market) = io::load_inputs(&recs_path, &prices_path, &bench_path)?;
    let panels = build_panel(&recs, &market, &config)?;
    let prov = &panels[0].provenance;
    eprintln!(
        "records {} | prior-only {} | dropped: analysts {} no-prices {} short-history {} screen {} coverage {} | retained {} (down {} up {} unchanged {} no-prior {})",
        prov.records_in,
        prov.prior_only,
        prov.dropped_analysts,
        prov.dropped_no_prices,
        prov.dropped_short_history,
        prov.dropped_screen,
        prov.dropped_coverage,
        prov.retained,
        prov.downgrades,
        prov.upgrades,
        prov.unchanged,
        prov.no_prior
    );
    if let Some(p) = &a.panel {
        write_json(Some(p), &panels)?;
    }
    let reports = run_study(&panels, &config)?;
    print!("{}", format_table(&reports));
    if let Some(p) = &a.output {
        write_json(Some(p), &reports)?;
    }
    Ok(())
}

fn fixture(a: FixtureArgs) -> Result<()> {
    let config = match &a.config {
        Some(p) => FixtureConfig::from_kv(&KeyValues::load(p)?)?,
        None => FixtureConfig::default(),
    };
    let f = make_fixture(&config, a.seed)?;
    f.write_to(&a.out_dir)?;
    eprintln!(
        "wrote {} records, {} price series to {}",
        f.recommendations.len(),
        f.prices.len(),
        a.out_dir.display()
    );
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Fit(a) => fit(a),
        Command::Simulate(a) => simulate(a),
        Command::Filter(a) => filter(a),
        Command::Pipeline(a) => pipeline(a),
        Command::Fixture(a) => fixture(a),
    }
}

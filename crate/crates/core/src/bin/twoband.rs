//! Command line front end: run configurations and figure presets, print
//! rates, compare result files.
//!
//! Exit codes: 0 success, 1 configuration error, 2 numerical accuracy
//! failure, 3 I/O error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use twoband::correlations::golden_rule_rates;
use twoband::harness::{self, compare_curves, read_csv, ExperimentConfig, OutputFormat, ResultSet, Setting};
use twoband::model::ModelParams;
use twoband::parallel::configure_workers_from_env;
use twoband::{Error, Result};

#[derive(Parser)]
#[command(name = "twoband", version, about = "Spin relaxation in a two-band random-matrix environment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a key-value config file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Run a figure preset (fig2, fig3, fig4, fig5).
    Figure {
        id: String,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Print Golden-Rule and fourth-order rates. PARAMS is a preset id, a
    /// config file, or a list like `n1=500,n2=500,band_width=0.5,coupling=5e-4`.
    Rates { params: String },
    /// Compare the curves of two result CSV files method by method.
    Compare { file_a: PathBuf, file_b: PathBuf },
}

#[derive(Args)]
struct RunOpts {
    /// Override a config entry (repeatable), e.g. `--set realizations=4`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    realizations: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated method list or `all`.
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
    /// Directory for default output names when no path is configured.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

impl RunOpts {
    fn settings(&self) -> Result<Vec<Setting>> {
        let mut out: Vec<Setting> = self.set.iter().map(|s| Setting::from_assignment(s)).collect::<Result<_>>()?;
        let mut flag = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                out.push(Setting::new(k, &v, "command line"));
            }
        };
        flag("realizations", self.realizations.map(|v| v.to_string()));
        flag("seed", self.seed.map(|v| v.to_string()));
        flag("methods", self.methods.clone());
        flag("csv", self.csv.as_ref().map(|p| p.display().to_string()));
        flag("json", self.json.as_ref().map(|p| p.display().to_string()));
        Ok(out)
    }
}

fn run_and_write(mut config: ExperimentConfig, stem: &str, out_dir: &Path) -> Result<ResultSet> {
    if config.output.csv.is_none() && config.output.json.is_none() {
        config.output.csv = Some(out_dir.join(format!("{stem}.csv")));
        config.output.json = Some(out_dir.join(format!("{stem}.json")));
    }
    let results = harness::run_experiment(&config)?;
    if let Some(p) = &config.output.csv {
        harness::emit(&results, OutputFormat::Csv, p)?;
        println!("wrote {}", p.display());
    }
    if let Some(p) = &config.output.json {
        harness::emit(&results, OutputFormat::Json, p)?;
        println!("wrote {}", p.display());
    }
    for c in &results.comparisons {
        println!(
            "{:<13} vs {:<6} max|d rho11| {:.3e}  rms {:.3e}  final diff {:+.4}",
            c.method.name(),
            c.reference.name(),
            c.metrics.max_abs_rho11,
            c.metrics.rms_rho11,
            c.metrics.final_rho11_diff
        );
    }
    if results.is_partial() {
        for f in &results.failures {
            eprintln!("realization {} failed (coupling seed {}, state seed {}): {}", f.seeds.index, f.seeds.coupling, f.seeds.state, f.message);
        }
        return Err(Error::PartialEnsemble { failed: results.failures.len(), total: config.realizations });
    }
    Ok(results)
}

fn params_from_arg(arg: &str) -> Result<ModelParams> {
    if let Ok(config) = harness::preset(arg) {
        return Ok(config.params);
    }
    let path = Path::new(arg);
    if path.is_file() {
        return Ok(harness::load_config(path, &[])?.params);
    }
    let settings: Vec<Setting> = arg.split(',').map(Setting::from_assignment).collect::<Result<_>>()?;
    Ok(harness::resolve(None, &settings, &[])?.params)
}

fn print_rates(arg: &str) -> Result<()> {
    let params = params_from_arg(arg)?;
    let rates = golden_rule_rates(&params).with_fourth_order(params.band_width);
    let f = rates.fourth_order.expect("requested above");
    println!("N1 = {}  N2 = {}  band_width = {}  coupling = {}", params.n1, params.n2, params.band_width, params.coupling);
    println!("gamma1        = {:.6e}", rates.gamma1);
    println!("gamma2        = {:.6e}", rates.gamma2);
    println!("gamma2/de     = {:.6e}", rates.gamma2 / params.band_width);
    println!("stationary    = {:.6}", rates.stationary_fraction());
    println!("Gamma1        = {:.6e}", f.big_gamma1);
    println!("Gamma2        = {:.6e}", f.big_gamma2);
    println!("Gamma3        = {:.6e}", f.big_gamma3);
    println!("tilde Gamma1  = {:.6e}", f.tilde_gamma1);
    println!("tilde Gamma2  = {:.6e}", f.tilde_gamma2);
    println!("tilde Gamma3  = {:.6e}", f.tilde_gamma3);
    println!("recurrence    = {:.6e}", params.recurrence_time());
    Ok(())
}

fn compare_files(a: &Path, b: &Path) -> Result<()> {
    let (ta, tb) = (read_csv(a)?, read_csv(b)?);
    let common: Vec<_> = ta.methods().into_iter().filter(|m| tb.methods().contains(m)).collect();
    if common.is_empty() {
        return Err(Error::config("the files share no method columns"));
    }
    let rows = common
        .into_iter()
        .map(|m| Ok((m, compare_curves(&ta.trajectory(m)?, &tb.trajectory(m)?)?)))
        .collect::<Result<Vec<_>>>()?;
    println!("method,max_abs_rho11,rms_rho11,max_abs_coherence,rms_coherence,final_rho11_diff");
    for (m, metrics) in rows {
        println!(
            "{m},{},{},{},{},{}",
            metrics.max_abs_rho11, metrics.rms_rho11, metrics.max_abs_coherence, metrics.rms_coherence, metrics.final_rho11_diff
        );
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    configure_workers_from_env()?;
    match cli.command {
        Command::Run { config, opts } => {
            let cfg = harness::load_config(&config, &opts.settings()?)?;
            let stem = config.file_stem().and_then(|s| s.to_str()).unwrap_or("run").to_string();
            run_and_write(cfg, &stem, &opts.out_dir).map(|_| ())
        }
        Command::Figure { id, opts } => {
            let cfg = harness::resolve(Some(&id), &[], &opts.settings()?)?;
            run_and_write(cfg, &id, &opts.out_dir).map(|_| ())
        }
        Command::Rates { params } => print_rates(&params),
        Command::Compare { file_a, file_b } => compare_files(&file_a, &file_b),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

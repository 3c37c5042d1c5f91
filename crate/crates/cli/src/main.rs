use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spdcsim::{run_scenario, run_sweep, validate_config, ConfigBuilder, Error, ScenarioId};

const EXIT_INVALID: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

/// Cavity-enhanced SPDC source simulator: regenerates figure data sets from a layered
/// TOML configuration.
#[derive(Parser, Debug)]
#[command(name = "spdcsim", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one scenario and write its data files and manifest.
    Simulate {
        /// fig1c, fig2a, fig2b, fig3a, fig3b, fig4a, fig4b or custom
        scenario: ScenarioId,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Check a configuration file and list every violated invariant.
    Validate {
        #[arg(long)]
        config: PathBuf,
        /// Check against this scenario's preset instead of the file's own.
        #[arg(long)]
        scenario: Option<ScenarioId>,
    },
    /// Run a scenario once per value of one parameter.
    Sweep {
        /// Scenario to sweep; defaults to the one named in the config.
        scenario: Option<ScenarioId>,
        /// Dotted parameter path, e.g. `cell.temperature`.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Args, Debug)]
struct RunArgs {
    /// TOML file layered over the scenario preset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or json
    #[arg(long)]
    format: Option<String>,
    /// Also write gnuplot scripts.
    #[arg(long)]
    gnuplot: bool,
    /// Simulated stream length, s.
    #[arg(long)]
    duration: Option<f64>,
    /// Pump power, µW.
    #[arg(long = "pump-uw")]
    pump_uw: Option<f64>,
    /// Histogram bin width, ps.
    #[arg(long = "bin-ps")]
    bin_ps: Option<f64>,
    /// Histogram half width, ns.
    #[arg(long = "window-ns")]
    window_ns: Option<f64>,
    /// Coincidence window τ_c, ns.
    #[arg(long = "tau-c-ns")]
    tau_c_ns: Option<f64>,
    /// Any parameter as PATH=VALUE, applied last.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    set: Vec<String>,
}

impl RunArgs {
    fn builder(&self, scenario: Option<ScenarioId>) -> Result<ConfigBuilder, Error> {
        let mut b = match &self.config {
            Some(path) => ConfigBuilder::from_file(path, scenario)?,
            None => ConfigBuilder::new(scenario.or(Some(ScenarioId::Fig1c)))?,
        };
        let float = |x: f64| format!("{x:e}");
        let mut pairs: Vec<(String, String)> = Vec::new();
        if let Some(s) = self.seed {
            pairs.push(("seed".into(), s.to_string()));
        }
        if let Some(f) = &self.format {
            pairs.push(("output.format".into(), format!("\"{f}\"")));
        }
        if self.gnuplot {
            pairs.push(("output.gnuplot".into(), "true".into()));
        }
        if let Some(x) = self.duration {
            pairs.push(("simulation.duration".into(), float(x)));
        }
        if let Some(x) = self.pump_uw {
            pairs.push(("biphoton.pump_power".into(), float(x * 1e-6)));
        }
        if let Some(x) = self.bin_ps {
            pairs.push(("simulation.bin".into(), float(x * 1e-12)));
        }
        if let Some(x) = self.window_ns {
            pairs.push(("simulation.window".into(), float(x * 1e-9)));
        }
        if let Some(x) = self.tau_c_ns {
            pairs.push(("detection.tau_c".into(), float(x * 1e-9)));
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(vec![format!("--set expects PATH=VALUE, got `{kv}`")]))?;
            pairs.push((k.trim().into(), v.trim().into()));
        }
        for (k, v) in pairs {
            b.set(&k, &v)?;
        }
        if let Some(out) = &self.out {
            b.output_dir(out);
        }
        Ok(b)
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Simulate { scenario, run } => {
            let config = run.builder(Some(scenario))?.build()?;
            eprintln!("running {} (seed {}, config {})", config.scenario, config.seed, &config.hash()[..12]);
            let manifest = run_scenario(&config)?;
            eprintln!("wrote {} files to {}", manifest.files.len() + 1, config.output.dir.display());
            println!("{}", serde_json::to_string_pretty(&manifest.results).expect("results serialize"));
        }
        Command::Validate { config, scenario } => {
            let c = ConfigBuilder::from_file(&config, scenario)?.build_unchecked()?;
            let problems = validate_config(&c);
            if !problems.is_empty() {
                return Err(Error::InvalidConfig(problems));
            }
            println!("{}: valid {} configuration (hash {})", config.display(), c.scenario, c.hash());
        }
        Command::Sweep {
            scenario,
            param,
            values,
            run,
        } => {
            let b = run.builder(scenario)?;
            let out = b.build_unchecked()?.output.dir;
            let summary = run_sweep(&b, &param, &values, &out)?;
            eprintln!("swept {param} over {} values into {}", values.len(), out.display());
            println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::InvalidConfig(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INVALID)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

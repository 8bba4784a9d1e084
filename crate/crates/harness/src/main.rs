use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use grokbench::grokdetect::{detect, DetectorParams};
use grokbench::nn::MetricCurve;
use harness::config::{load, Axis, ExperimentConfig, GridPoint};
use harness::error::{HarnessError, Result};
use harness::experiment::{self, datasets, default_jobs, Options};
use harness::fsio::{read_to_string, write_atomic};
use harness::presets;

#[derive(Parser)]
#[command(
    name = "grokbench",
    version,
    about = "Synthetic benchmarks for delayed generalization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the train and test sets of one run as CSV plus JSON metadata.
    GenDataset {
        #[command(flatten)]
        config: ConfigArgs,
        /// Run index whose seeds are used.
        #[arg(long, default_value_t = 0)]
        run: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train every grid point of a preset, or a single config, over all seeds.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        exec: ExecArgs,
    },
    /// Run one experiment per value of a parameter.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        /// gamma_D, f, learning_rate, weight_decay or init_scale.
        #[arg(long)]
        axis: String,
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<f64>,
        #[command(flatten)]
        exec: ExecArgs,
    },
    /// Analyse a curve CSV and print the report JSON.
    Detect {
        #[arg(long)]
        curve: PathBuf,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        window: Option<usize>,
        #[arg(long)]
        margin: Option<f64>,
        #[arg(long)]
        min_separation: Option<f64>,
        #[arg(long)]
        support_ratio: Option<f64>,
    },
    /// Summarize an output directory written by `run` or `sweep`.
    Report {
        #[arg(long)]
        dir: PathBuf,
    },
    /// List the built-in presets.
    Presets,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in preset; a config file and overrides apply on top of it.
    #[arg(long)]
    preset: Option<String>,
    /// Override a value, e.g. `--set train.max_epochs=2000`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    max_epochs: Option<usize>,
}

#[derive(Args)]
struct ExecArgs {
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads [default: available cores].
    #[arg(long)]
    jobs: Option<usize>,
    /// Suppress per-run progress lines.
    #[arg(long)]
    quiet: bool,
}

impl ExecArgs {
    fn options(&self) -> Options {
        Options {
            jobs: self.jobs.unwrap_or_else(default_jobs),
            progress: !self.quiet,
        }
    }
}

/// The effective base config and, for presets, the preset itself.
fn resolve(args: &ConfigArgs) -> Result<(ExperimentConfig, Option<presets::Preset>)> {
    let preset = args.preset.as_deref().map(presets::preset).transpose()?;
    let mut sets = args.sets.clone();
    if let Some(s) = args.seed {
        sets.push(format!("seed={s}"));
    }
    if let Some(r) = args.runs {
        sets.push(format!("runs={r}"));
    }
    if let Some(m) = args.max_epochs {
        sets.push(format!("train.max_epochs={m}"));
    }
    let base = preset.as_ref().map(|p| &p.base);
    let cfg = load(base, args.config.as_deref(), &sets)?;
    Ok((cfg, preset))
}

fn out_dir(flag: &Option<PathBuf>, cfg: &ExperimentConfig) -> Result<PathBuf> {
    flag.clone()
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| HarnessError::config("no output directory: pass --out or set output_dir"))
}

fn print_manifest_summary(out: &Path, manifest: &harness::Manifest) {
    for p in &manifest.points {
        let failed = p.runs.iter().filter(|r| r.error.is_some()).count();
        println!("{}: {} runs, {} failed", p.label, p.runs.len(), failed);
    }
    println!("wrote {}", out.join(harness::manifest::FILE_NAME).display());
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenDataset { config, run, out } => {
            let (cfg, _) = resolve(&config)?;
            cfg.validate()?;
            if run >= cfg.runs {
                return Err(HarnessError::config(format!("run {run} is outside 0..{}", cfg.runs)));
            }
            let out = out_dir(&out, &cfg)?;
            let spec = cfg.spec()?;
            let (train_set, test_set) = datasets(&cfg, &spec, run)?;
            for (name, ds) in [("train", &train_set), ("test", &test_set)] {
                let mut csv = Vec::new();
                ds.write_csv(&mut csv)?;
                write_atomic(&out.join(format!("{name}.csv")), &csv)?;
                write_atomic(&out.join(format!("{name}.json")), ds.metadata_json()?.as_bytes())?;
                println!("{name}: {} points in {} dimensions", ds.len(), ds.dim());
            }
        }
        Command::Run { config, exec } => {
            let (cfg, preset) = resolve(&config)?;
            let out = out_dir(&exec.out, &cfg)?;
            let (grid, source) = match &preset {
                Some(p) => (p.grid(&cfg)?, p.name.to_string()),
                None => (vec![GridPoint::new(&cfg, vec![])?], "config".to_string()),
            };
            let manifest = experiment::execute(&grid, &out, &source, exec.options())?;
            print_manifest_summary(&out, &manifest);
        }
        Command::Sweep {
            config,
            axis,
            values,
            exec,
        } => {
            let (cfg, _) = resolve(&config)?;
            let axis: Axis = axis.parse()?;
            let out = out_dir(&exec.out, &cfg)?;
            let manifest = experiment::sweep(&cfg, axis, &values, &out, exec.options())?;
            print_manifest_summary(&out, &manifest);
        }
        Command::Detect {
            curve,
            out,
            tau,
            window,
            margin,
            min_separation,
            support_ratio,
        } => {
            let mut params = DetectorParams::default();
            params.tau = tau.unwrap_or(params.tau);
            params.window = window.unwrap_or(params.window);
            params.margin = margin.unwrap_or(params.margin);
            params.min_separation = min_separation.unwrap_or(params.min_separation);
            params.support_ratio = support_ratio.unwrap_or(params.support_ratio);
            params
                .validate()
                .map_err(|e| HarnessError::config(format!("detector: {e}")))?;
            let text = read_to_string(&curve)?;
            let c =
                MetricCurve::read_csv(text.as_bytes()).map_err(|e| HarnessError::artifact(&curve, e.to_string()))?;
            if c.is_empty() {
                return Err(HarnessError::artifact(&curve, "curve has no recordings"));
            }
            let json = detect(&c, &params)?.to_json()?;
            match out {
                Some(path) => write_atomic(&path, json.as_bytes())?,
                None => print!("{json}"),
            }
        }
        Command::Report { dir } => {
            let r = harness::report::report(&dir)?;
            print!("{}", r.text);
            if !r.errors.is_empty() {
                return Err(HarnessError::artifact(
                    &dir,
                    format!("{} unreadable artifact(s), listed above", r.errors.len()),
                ));
            }
        }
        Command::Presets => {
            for name in presets::NAMES {
                let p = presets::preset(name)?;
                println!("{:<6} {}", p.name, p.description);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use missforecast::datagen::{calibrate_intercept, synthetic_trauma, GenerativeSpec, Scenario};
use missforecast::mechanisms::{classify, DiscreteJoint, DEFAULT_TOL};
use missforecast::oracle::{conditional_gaussian, OracleForecaster};
use missforecast::procedures::{self, ItrFill, ItrLearner, ProcedureConfig, ProcedureKind, TrainedForecaster};
use missforecast::runner::{self, ApplyOptions, Cell, SweepConfig};
use missforecast::{io, Error, Forecaster, Pattern, Query, Result, Target};

#[derive(Parser)]
#[command(name = "missforecast", version, about = "Prediction with missing predictors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the simulation sweep and write metrics CSV plus manifest.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Use the 0.1% proportion grid.
        #[arg(long)]
        paper_scale: bool,
        /// Run a single cell, e.g. S4:0.30:0.
        #[arg(long)]
        cell: Option<String>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Scenario 5 with a partially missing training outcome.
    ExploreYmiss {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        paper_scale: bool,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Leave-one-out Brier scores with bootstrap intervals on a CSV dataset.
    Apply {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        outcome: String,
        /// Procedure name; repeat for several.
        #[arg(long = "procedure", default_values_t = vec!["ps".to_string()])]
        procedures: Vec<String>,
        /// MIMI without indicator-by-predictor interactions.
        #[arg(long)]
        no_interactions: bool,
        #[arg(long, default_value_t = 10_000)]
        bootstrap: usize,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        #[arg(long, default_value_t = runner::DEFAULT_MASTER_SEED)]
        seed: u64,
        /// Write the report rows as CSV here.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Classify a discrete joint table (variable columns, M_<var> columns, prob).
    CheckMechanism {
        table: PathBuf,
        #[arg(long, default_value = "Y")]
        outcome: String,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
    /// MU and MC oracle predictions for one query.
    Oracle {
        #[arg(long)]
        scenario: Scenario,
        #[arg(long)]
        prop: f64,
        /// Missingness pattern over (X1, X2), e.g. 10.
        #[arg(long)]
        pattern: Pattern,
        #[arg(long)]
        x1: Option<f64>,
        #[arg(long)]
        x2: Option<f64>,
    },
    /// Train a procedure on a CSV dataset and save it as JSON.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        outcome: String,
        #[arg(long)]
        procedure: String,
        #[arg(long)]
        itr_fill: Option<String>,
        #[arg(long)]
        itr_learner: Option<String>,
        #[arg(long, default_value_t = runner::DEFAULT_MASTER_SEED)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Predict every row of a CSV dataset with a saved forecaster.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Write the synthetic trauma-like dataset.
    SynthTrauma {
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = runner::DEFAULT_MASTER_SEED)]
        seed: u64,
    },
}

fn load_config(path: Option<PathBuf>, paper_scale: bool, output_dir: Option<PathBuf>) -> Result<SweepConfig> {
    let mut cfg = match path {
        Some(p) => SweepConfig::load(&p)?,
        None => SweepConfig::default(),
    };
    if paper_scale {
        cfg = cfg.paper_scale();
    }
    if let Some(d) = output_dir {
        cfg.output_dir = d;
    }
    Ok(cfg)
}

fn parse_enum<T: serde::de::DeserializeOwned>(s: &str) -> Result<T> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| Error::Config(format!("unrecognised value {s:?}")))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config, paper_scale, cell, output_dir } => {
            let cfg = load_config(config, paper_scale, output_dir)?;
            let started = Instant::now();
            let only = cell.as_deref().map(|c| Cell::parse(c, &cfg.prop_grid)).transpose()?;
            let out = runner::run_sweep(&cfg, only)?;
            let stem = match &only {
                Some(c) => format!("metrics_{}_{}_{}", c.scenario, c.grid_index, c.replicate),
                None => "metrics".to_string(),
            };
            runner::write_outputs(&cfg, &out, &stem, started)?;
            eprintln!(
                "{} cells, {} records, {} failures -> {}",
                out.cells,
                out.records.len(),
                out.failures.len(),
                runner::metrics_path(&cfg, &stem).display()
            );
        }
        Command::ExploreYmiss { config, paper_scale, output_dir } => {
            let cfg = load_config(config, paper_scale, output_dir)?;
            let started = Instant::now();
            let out = runner::run_explore_missing_y(&cfg)?;
            runner::write_outputs(&cfg, &out, "explore_ymiss", started)?;
            eprintln!("{} records -> {}", out.records.len(), runner::metrics_path(&cfg, "explore_ymiss").display());
        }
        Command::Apply { data, outcome, procedures, no_interactions, bootstrap, level, seed, output } => {
            let ds = io::read_dataset_path(&data, &outcome)?;
            let procs = procedures
                .iter()
                .map(|p| {
                    let kind: ProcedureKind = p.parse()?;
                    let mut c = ProcedureConfig::new(kind);
                    if kind == ProcedureKind::MIMI && no_interactions {
                        c.mimi_interactions = false;
                    }
                    Ok(c)
                })
                .collect::<Result<Vec<_>>>()?;
            let opts = ApplyOptions { procedures: procs, bootstrap, level, seed };
            let rows = runner::run_apply(&ds, &opts)?;
            print!("{}", runner::format_report(&rows, ds.column_names()));
            if let Some(path) = output {
                runner::write_apply_csv(&rows, std::fs::File::create(path)?)?;
            }
        }
        Command::CheckMechanism { table, outcome, tol } => {
            let joint = DiscreteJoint::from_csv(&table, &outcome)?;
            let report = classify(&joint, tol);
            print!("{report}");
            for v in report.lattice_violations() {
                println!("lattice violation: {v}");
            }
        }
        Command::Oracle { scenario, prop, pattern, x1, x2 } => {
            let base = GenerativeSpec::new(scenario);
            let spec = base.with_intercept(calibrate_intercept(&base, prop)?);
            if pattern.len() != 2 {
                return Err(Error::Input("pattern must cover X1 and X2".into()));
            }
            let mut observed = Vec::new();
            for (j, v) in [(0, x1), (1, x2)] {
                match (pattern.is_missing(j), v) {
                    (false, Some(v)) => observed.push((j, v)),
                    (false, None) => return Err(Error::Input(format!("pattern {pattern} needs --x{}", j + 1))),
                    (true, _) => {}
                }
            }
            let mu = conditional_gaussian(&spec, &pattern, &observed)?;
            println!("MU {}", serde_json::to_string(&mu)?);
            let oracle = OracleForecaster::new(spec, Target::MC)?;
            let mc = oracle.predict(&Query { pattern, observed })?;
            println!("MC {}", serde_json::to_string(&mc)?);
        }
        Command::Train { data, outcome, procedure, itr_fill, itr_learner, seed, output } => {
            let ds = io::read_dataset_path(&data, &outcome)?;
            let mut cfg = ProcedureConfig { seed, ..ProcedureConfig::new(procedure.parse()?) };
            if let Some(f) = itr_fill {
                cfg.itr_fill = parse_enum::<ItrFill>(&f)?;
            }
            if let Some(l) = itr_learner {
                cfg.itr_learner = parse_enum::<ItrLearner>(&l)?;
            }
            procedures::train(&cfg, &ds)?.save(&output)?;
        }
        Command::Predict { model, data } => {
            let f = TrainedForecaster::load(&model)?;
            let ds = io::read_dataset_path(&data, &f.outcome_name)?;
            if ds.column_names() != f.column_names.as_slice() {
                return Err(Error::Input("dataset columns differ from the training columns".into()));
            }
            println!("row,pattern,prediction");
            for i in 0..ds.n() {
                let q = ds.query(i);
                match f.predict(&q) {
                    Ok(d) => println!("{i},{},{}", q.pattern, d.point()),
                    Err(Error::UnsupportedPattern { .. }) => println!("{i},{},NA", q.pattern),
                    Err(e) => return Err(e),
                }
            }
        }
        Command::SynthTrauma { output, seed } => {
            io::write_dataset_path(&synthetic_trauma(seed)?, &output)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

//! `swipt`: batch front-end over scenario files.
//!
//! Exit codes: 0 success, 1 failed validation checks, 2 invalid input,
//! 3 infeasible requirement, 4 numerical or I/O failure.

mod artifacts;
mod commands;
mod validate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use swipt_core::optimizer::Scheme;
use swipt_core::scenario::ResponderKind;
use swipt_core::Error;

use commands::{Context, Finished};

/// Worker threads for the parallel parts of every command.
const WORKERS_ENV: &str = "SWIPT_WORKERS";

#[derive(Parser)]
#[command(name = "swipt", version, about = "Rate-power region design for SWIPT receivers with a nonlinear harvester")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: PathBuf,
    /// Source of the symbol responses.
    #[arg(long, value_enum)]
    backend: Option<BackendArg>,
    /// Overrides the scenario seed (dataset and training).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to the scenario's `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Circuit,
    Surrogate,
    Table,
}

impl From<BackendArg> for ResponderKind {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Circuit => ResponderKind::Circuit,
            BackendArg::Surrogate => ResponderKind::Surrogate,
            BackendArg::Table => ResponderKind::Table,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    I,
    Ii,
    Iii,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::I => Scheme::I,
            SchemeArg::Ii => Scheme::II,
            SchemeArg::Iii => Scheme::III,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Symbol responses on the MDP grid, or for a single (v0, r_E) pair.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Initial load voltage, V.
        #[arg(long, requires = "r_e")]
        v0: Option<f64>,
        /// Received amplitude, √W.
        #[arg(long = "r-e", requires = "v0")]
        r_e: Option<f64>,
    },
    /// Training tuples for the surrogate networks.
    Dataset {
        #[command(flatten)]
        common: Common,
    },
    /// Trains the voltage and power networks.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Builds the transition model.
    BuildMdp {
        #[command(flatten)]
        common: Common,
    },
    /// Solves one design problem.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        scheme: SchemeArg,
        /// Minimum mutual information, bits/symbol.
        #[arg(long = "i-req")]
        i_req: Option<f64>,
    },
    /// Traces the rate-power boundary.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        scheme: SchemeArg,
        #[arg(long, default_value_t = 12)]
        points: usize,
    },
    /// Runs the invariant suite on a coarse copy of the scenario.
    Validate {
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate { .. } => "simulate",
            Command::Dataset { .. } => "dataset",
            Command::Train { .. } => "train",
            Command::BuildMdp { .. } => "build-mdp",
            Command::Solve { .. } => "solve",
            Command::Sweep { .. } => "sweep",
            Command::Validate { .. } => "validate",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Simulate { common, .. }
            | Command::Dataset { common }
            | Command::Train { common }
            | Command::BuildMdp { common }
            | Command::Solve { common, .. }
            | Command::Sweep { common, .. }
            | Command::Validate { common } => common,
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::Domain(_) | Error::Json(_) => 2,
        Error::Infeasible(_) => 3,
        _ => 4,
    }
}

fn configure_workers() -> Result<(), String> {
    let Ok(raw) = std::env::var(WORKERS_ENV) else { return Ok(()) };
    let n: usize = raw.trim().parse().map_err(|_| format!("{WORKERS_ENV} must be a positive integer, got `{raw}`"))?;
    if n == 0 {
        return Err(format!("{WORKERS_ENV} must be a positive integer, got `{raw}`"));
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn summary(command: &str, status: &str, extra: Value) -> String {
    let mut doc = json!({ "command": command, "status": status });
    if let (Value::Object(doc), Value::Object(extra)) = (&mut doc, extra) {
        doc.extend(extra);
    }
    doc.to_string()
}

fn fail(command: &str, code: u8, message: &str) -> ExitCode {
    eprintln!("error: {message}");
    println!("{}", summary(command, "error", json!({ "exit_code": code, "error": message })));
    ExitCode::from(code)
}

fn execute(command: &Command, ctx: &Context) -> Result<(Finished, bool), Error> {
    Ok(match command {
        Command::Simulate { v0, r_e, .. } => (commands::simulate(ctx, v0.zip(*r_e))?, true),
        Command::Dataset { .. } => (commands::dataset(ctx)?, true),
        Command::Train { .. } => (commands::train_surrogate(ctx)?, true),
        Command::BuildMdp { .. } => (commands::build_mdp(ctx)?, true),
        Command::Solve { scheme, i_req, .. } => (commands::solve(ctx, (*scheme).into(), *i_req)?, true),
        Command::Sweep { scheme, points, .. } => (commands::sweep(ctx, (*scheme).into(), *points)?, true),
        Command::Validate { .. } => {
            let checks = validate::run(ctx)?;
            for c in &checks {
                eprintln!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            let passed = checks.iter().all(|c| c.passed);
            let failures: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
            let mut outputs = artifacts::Outputs::new(ctx.out_dir.clone());
            let prov = artifacts::Provenance::new("validate", &ctx.scenario)?;
            outputs.add_json("validate.json", &prov, "checks", &checks)?;
            (Finished { outputs, details: json!({ "checks": checks.len(), "failures": failures }) }, passed)
        }
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let name = cli.command.name();
    if let Err(msg) = configure_workers() {
        return fail(name, 2, &msg);
    }
    let common = cli.command.common();
    let ctx = match Context::load(&common.scenario, common.backend.map(Into::into), common.seed, common.out.clone()) {
        Ok(ctx) => ctx,
        Err(e) => return fail(name, exit_code(&e), &e.to_string()),
    };
    let (finished, passed) = match execute(&cli.command, &ctx) {
        Ok(done) => done,
        Err(e) => return fail(name, exit_code(&e), &e.to_string()),
    };
    let paths = match finished.outputs.commit() {
        Ok(p) => p,
        Err(e) => return fail(name, 4, &e.to_string()),
    };
    let files: Vec<String> = paths.iter().map(|p| p.display().to_string()).collect();
    let status = if passed { "ok" } else { "failed" };
    let mut extra = json!({ "scenario": ctx.scenario.name, "artifacts": files });
    if let (Value::Object(e), Value::Object(d)) = (&mut extra, finished.details) {
        e.extend(d);
    }
    println!("{}", summary(name, status, extra));
    if passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

//! Command-line front end for the simulation experiments.
//!
//!   mest simulate --n 200,500,700 --dist normal,t5,mixture --reps 500 --format markdown
//!   mest normality --n 700 --reps 500 --sn-gamma-power 2 --out samples.csv
//!
//! Setting `M_EST_SEED` overrides `--seed`.
//! Exit codes: 0 success, 1 usage or input error, 2 solver-failure budget exceeded.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;

use mest::exec::{with_threads, Execution};
use mest::experiments::{normality_check, run_scenario, HarnessOptions, MethodSpec, NormalityOptions};
use mest::report::{emit_report, MethodKind, ReportFormat};
use mest::simgen::gen_dataset;
use mest::{ErrorDist, LossSpec, MestError, ScenarioConfig, SolveOptions};

const SEED_ENV: &str = "M_EST_SEED";

#[derive(Parser, Debug)]
#[command(name = "mest", version, about = "Penalized robust M-estimation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run Monte Carlo variable-selection scenarios and print a results table.
    Simulate(SimulateArgs),
    /// Check asymptotic normality of the LLA estimator along a coordinate.
    Normality(NormalityArgs),
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// Sample sizes (comma separated); p is round(2 sqrt(n)).
    #[arg(long, value_delimiter = ',', default_value = "200")]
    n: Vec<usize>,
    /// Error laws: normal, t5, mixture (comma separated).
    #[arg(long, value_delimiter = ',', default_value = "normal")]
    dist: Vec<ErrorDist>,
    #[arg(long, default_value_t = 500)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Loss for the oracle and LLA fits: lad, ls, huber:C, quantile:A, lq:Q.
    #[arg(long, default_value = "lad")]
    loss: LossSpec,
    #[arg(long, default_value_t = mest::tuning::DEFAULT_GRID_POINTS)]
    grid_points: usize,
    #[arg(long, default_value_t = 1e-6)]
    zero_tol: f64,
    /// Worker threads (0 = all cores, 1 = serial).
    #[arg(long, default_value_t = 0)]
    parallel: usize,
    /// Fit on unit-RMS columns.
    #[arg(long)]
    standardize: bool,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Methods: oracle, lasso-ls, lasso-lad, lla (comma separated).
    #[arg(long, value_delimiter = ',', default_value = "oracle,lasso-ls,lla")]
    methods: Vec<MethodKind>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: ReportFormat,
    /// Write every replicate's data as x1..xp,y CSV files into this directory.
    #[arg(long)]
    dump_data: Option<PathBuf>,
    /// Prediction error on a fresh draw instead of in-sample.
    #[arg(long)]
    holdout_pe: bool,
}

#[derive(Args, Debug)]
struct NormalityArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// One-based coordinate j of the direction u = e_j within the true support.
    #[arg(long, default_value_t = 1)]
    coord: usize,
    /// Exponent of gamma in s_n^2 = sigma^2 gamma^(-power) u' D11^-1 u.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(i32).range(1..=2))]
    sn_gamma_power: i32,
    /// Write the standardized statistics as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Budget(String),
}

impl From<MestError> for Failure {
    fn from(e: MestError) -> Self {
        match e {
            MestError::FailureBudgetExceeded { .. } => Failure::Budget(e.to_string()),
            other => Failure::Usage(other.to_string()),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Failure {
    Failure::Usage(format!("{}: {e}", path.display()))
}

impl CommonArgs {
    fn seed(&self) -> Result<u64, Failure> {
        match std::env::var(SEED_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| Failure::Usage(format!("{SEED_ENV}='{v}' is not an unsigned integer"))),
            Err(_) => Ok(self.seed),
        }
    }

    fn harness(&self) -> HarnessOptions {
        HarnessOptions {
            solve: SolveOptions {
                zero_tol: self.zero_tol,
                ..SolveOptions::default()
            },
            grid_points: self.grid_points,
            exec: if self.parallel == 1 {
                Execution::Serial
            } else {
                Execution::Parallel
            },
            standardize: self.standardize,
            ..HarnessOptions::default()
        }
    }

    fn scenarios(&self) -> Result<Vec<ScenarioConfig>, Failure> {
        if self.reps == 0 {
            return Err(Failure::Usage("--reps must be at least 1".into()));
        }
        if self.grid_points == 0 {
            return Err(Failure::Usage("--grid-points must be at least 1".into()));
        }
        let seed = self.seed()?;
        let mut out = Vec::new();
        for dist in &self.dist {
            for &n in &self.n {
                let cfg = ScenarioConfig::new(n, *dist, seed).with_replicates(self.reps);
                cfg.validate()?;
                out.push(cfg);
            }
        }
        Ok(out)
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| io_err(p, e)),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::Usage(e.to_string())),
    }
}

fn simulate(args: &SimulateArgs) -> Result<(), Failure> {
    let opts = args.common.harness();
    let opts = HarnessOptions {
        holdout_pe: args.holdout_pe,
        ..opts
    };
    let methods: Vec<MethodSpec> = args
        .methods
        .iter()
        .map(|k| MethodSpec::with_loss(*k, args.common.loss))
        .collect();
    let mut rows = Vec::new();
    for cfg in args.common.scenarios()? {
        eprintln!(
            "scenario {}: n={} p={} k={} m={} replicates={}",
            cfg.id(),
            cfg.n,
            cfg.p,
            cfg.k(),
            cfg.p - cfg.k(),
            cfg.replicates
        );
        if let Some(dir) = &args.dump_data {
            std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
            for r in 0..cfg.replicates {
                let rep = gen_dataset(&cfg, r)?;
                rep.data
                    .write_csv_file(&dir.join(format!("{}_rep{r:04}.csv", cfg.id())))?;
            }
        }
        let outcome = run_scenario(&cfg, &methods, &opts)?;
        if outcome.failed_fits > 0 {
            eprintln!("  {} of {} fits failed", outcome.failed_fits, outcome.total_fits);
        }
        rows.extend(outcome.rows);
    }
    write_output(args.out.as_deref(), &emit_report(&rows, args.format)?)
}

fn normality(args: &NormalityArgs) -> Result<(), Failure> {
    let mut scenarios = args.common.scenarios()?;
    if scenarios.len() != 1 {
        return Err(Failure::Usage("normality takes a single --n and --dist".into()));
    }
    let cfg = scenarios.remove(0);
    let k = cfg.k();
    if args.coord == 0 || args.coord > k {
        return Err(Failure::Usage(format!("--coord must lie in 1..={k}")));
    }
    let mut u = DVector::zeros(k);
    u[args.coord - 1] = 1.0;
    let opts = NormalityOptions {
        harness: args.common.harness(),
        loss: args.common.loss,
        gamma_power: args.sn_gamma_power,
    };
    let report = normality_check(&cfg, &u, cfg.replicates, &opts)?;
    println!(
        "scenario {} n={} p={} k={} loss={}",
        cfg.id(),
        cfg.n,
        cfg.p,
        k,
        opts.loss
    );
    println!("direction u = e{}", args.coord);
    println!(
        "gamma = {:.6} sigma2 = {:.6} sn_gamma_power = {}",
        report.gamma, report.sigma2, report.gamma_power
    );
    println!(
        "support recovered in {} of {} replicates",
        report.samples.len(),
        report.samples.len() + report.unrecovered.len()
    );
    println!(
        "ks_stat = {:.5} critical_1pct = {:.5} {}",
        report.ks_stat,
        report.critical_value,
        if report.passes() { "PASS" } else { "FAIL" }
    );
    if let Some(path) = &args.out {
        let mut text = String::from("statistic,recovered\n");
        for s in &report.samples {
            text.push_str(&format!("{s},true\n"));
        }
        for s in &report.unrecovered {
            text.push_str(&format!("{s},false\n"));
        }
        write_output(Some(path), &text)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let threads = match &cli.command {
        Command::Simulate(a) => a.common.parallel,
        Command::Normality(a) => a.common.parallel,
    };
    let result = with_threads(threads, || match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Normality(a) => normality(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Budget(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

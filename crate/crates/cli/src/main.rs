//! `lbmh`: run sampler experiments from a key-value config file.

use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lbmh_core::harness::{
    build_model, load_mnist_idx, scaling_study, simulate, sweep_csv, two_cluster_data, validate, write_csv_to, CsvRow,
    ExperimentConfig, Mode,
};
use lbmh_core::models::{save_rbm, CdConfig};
use lbmh_core::theory::{estimate_lambda1, estimate_lambda2, lambda1, lambda2};
use lbmh_core::{solve_optimal, BitState, Chain, CurveKind, Error, SamplerKind, TheoryCurve};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const EXIT_CONFIG: u8 = 1;
const EXIT_VALIDATION: u8 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "lbmh",
    version,
    about = "Locally balanced and random-walk Metropolis-Hastings on binary spaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one fixed or adaptive setting.
    Simulate(Common),
    /// Sweep target acceptance rates and report EJD per rate.
    Sweep(Common),
    /// Adaptive LBP and RWM over the configured sizes.
    Scaling(Common),
    /// Tune the scale adaptively and report the frozen value.
    Adapt(Common),
    /// Print scaling constants, optimal rates and predicted curves.
    Theory(Common),
    /// Exact-kernel and visit-frequency checks on small instances.
    Validate(Common),
    /// Train an RBM by CD-1 and save its weights.
    TrainRbm(TrainArgs),
}

#[derive(Args, Debug, Default)]
struct Common {
    /// Key-value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// CSV output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    chains: Option<usize>,
    /// Chain length including burn-in.
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    burnin: Option<usize>,
    /// Extra `key=value` overrides, applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// IDX image file; synthetic two-cluster data when absent.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Visible units of the synthetic data.
    #[arg(long, default_value_t = 64)]
    visible: usize,
    /// Synthetic examples.
    #[arg(long, default_value_t = 1000)]
    count: usize,
    #[arg(long, default_value_t = 0.05)]
    noise: f64,
    #[arg(long, default_value_t = 16)]
    hidden: usize,
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    learning_rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output weights file.
    #[arg(long)]
    out: PathBuf,
}

enum Failure {
    Config(String),
    Validation(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

type CliResult = Result<(), Failure>;

impl Common {
    fn load(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        for o in &self.overrides {
            let (k, v) = o.split_once('=').ok_or_else(|| Error::Config {
                key: o.clone(),
                message: "expected KEY=VALUE".into(),
            })?;
            cfg.set(k.trim(), v.trim())?;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(c) = self.chains {
            cfg.chains = c;
        }
        if let Some(s) = self.steps {
            cfg.steps = s;
        }
        if let Some(b) = self.burnin {
            cfg.burnin = b;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn emit(&self, rows: &[CsvRow]) -> Result<(), Error> {
        match &self.out {
            Some(path) => write_csv_to(File::create(path)?, rows),
            None => write_csv_to(io::stdout().lock(), rows),
        }
    }
}

fn run_simulate(args: &Common, force_adaptive: bool) -> CliResult {
    let mut cfg = args.load()?;
    if force_adaptive {
        cfg.mode = Mode::Adaptive;
    } else if !matches!(cfg.mode, Mode::Fixed | Mode::Adaptive) {
        cfg.mode = Mode::Fixed;
    }
    let (result, row) = simulate(&cfg)?;
    if force_adaptive {
        eprintln!(
            "{}: frozen R = {:.3}, realized acceptance = {:.4} (target {:.3})",
            row.sampler,
            result.frozen_scale,
            result.merged.mean_accept,
            cfg.resolved_target_rate()
        );
    }
    args.emit(&[row])?;
    Ok(())
}

fn run_sweep(args: &Common) -> CliResult {
    let cfg = args.load()?;
    let model = build_model(&cfg)?;
    let rows = sweep_csv(&cfg, model.as_ref())?;
    args.emit(&rows)?;
    Ok(())
}

fn run_scaling(args: &Common) -> CliResult {
    let cfg = args.load()?;
    let res = scaling_study(&cfg)?;
    for p in &res.points {
        eprintln!(
            "N = {:>6}: R*(LBP) = {:>8.2}  R*(RWM) = {:>6.2}  EJD ratio = {:.2}",
            p.n,
            p.r_lbp,
            p.r_rwm,
            p.ejd_lbp / p.ejd_rwm
        );
    }
    eprintln!(
        "slopes vs log N: LBP {:.3}, RWM {:.3}, EJD ratio {:.3}",
        res.slope_lbp, res.slope_rwm, res.slope_ratio
    );
    args.emit(&res.rows)?;
    Ok(())
}

fn sample_states(cfg: &ExperimentConfig, model: &dyn lbmh_core::TargetModel) -> Result<Vec<BitState>, Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let kind = SamplerKind::Lbp(lbmh_core::LbpConfig::new(cfg.weight));
    let mut chain = Chain::new(model, kind, BitState::random(model.dim(), &mut rng))?;
    let mut out = Vec::new();
    for t in 0..cfg.steps {
        chain.step(1, &mut rng)?;
        if t >= cfg.burnin && (t - cfg.burnin).is_multiple_of(10) {
            out.push(chain.state().clone());
        }
    }
    Ok(out)
}

fn run_theory(args: &Common) -> CliResult {
    let cfg = args.load()?;
    let model = build_model(&cfg)?;
    let n = model.dim();
    let (l1, l2, how) = match (lambda1(model.as_ref(), cfg.weight), lambda2(model.as_ref(), 0.0)) {
        (Ok(a), Ok(b)) => (a, b, "exact"),
        _ => {
            let samples = sample_states(&cfg, model.as_ref())?;
            if samples.is_empty() {
                return Err(Failure::Config("theory: steps must exceed burnin to estimate λ".into()));
            }
            (
                estimate_lambda1(model.as_ref(), &samples, cfg.weight)?,
                estimate_lambda2(model.as_ref(), &samples, 0.0)?,
                "estimated",
            )
        }
    };
    let mut out = io::stdout().lock();
    writeln!(out, "model {} {} N = {n}", model.name(), cfg.config)?;
    writeln!(out, "lambda1 ({}) = {l1:.6} ({how})", cfg.weight)?;
    writeln!(out, "lambda2 = {l2:.6} ({how})")?;
    for kind in [CurveKind::Lbp, CurveKind::Rwm] {
        let (z, a) = solve_optimal(kind);
        writeln!(out, "{kind}: z* = {z:.4}, a* = {a:.4}")?;
    }
    let lbp = TheoryCurve::new(CurveKind::Lbp, l1, n, 0.0)?;
    let rwm = TheoryCurve::new(CurveKind::Rwm, l2, n, 0.0)?;
    writeln!(out, "R,lbp_acceptance,lbp_efficiency,rwm_acceptance,rwm_efficiency")?;
    let mut r = 1usize;
    while r <= n {
        let rf = r as f64;
        writeln!(
            out,
            "{r},{:.6},{:.6},{:.6},{:.6}",
            lbp.acceptance_at_scale(rf),
            lbp.efficiency_at_scale(rf),
            rwm.acceptance_at_scale(rf),
            rwm.efficiency_at_scale(rf)
        )?;
        r = if r < 10 { r + 1 } else { r * 2 };
    }
    Ok(())
}

fn run_validate(args: &Common) -> CliResult {
    let cfg = args.load()?;
    let report = validate(&cfg)?;
    let mut out = io::stdout().lock();
    for e in &report.entries {
        writeln!(
            out,
            "{:<40} detailed balance {:.2e}  stationarity {:.2e}",
            e.label, e.detailed_balance, e.stationarity
        )?;
    }
    writeln!(out, "visit chi-square (df 15) = {:.3}", report.chi_square)?;
    if report.passed() {
        writeln!(out, "validation passed")?;
        Ok(())
    } else {
        Err(Failure::Validation(format!(
            "validation failed: residual above {:e} or chi-square above critical value",
            report.tolerance
        )))
    }
}

fn run_train(args: &TrainArgs) -> CliResult {
    let data = match &args.data {
        Some(path) => load_mnist_idx(path)?,
        None => two_cluster_data(args.visible, args.count, args.noise, args.seed),
    };
    if data.is_empty() {
        return Err(Failure::Config("training data is empty".into()));
    }
    let cd = CdConfig::new(args.hidden, args.epochs, args.learning_rate, args.seed);
    let rbm = lbmh_core::models::train_rbm_cd(&data, &cd)?;
    save_rbm(&rbm, &args.out)?;
    eprintln!(
        "trained RBM: {} visible, {} hidden, {} epochs on {} examples -> {}",
        data[0].len(),
        args.hidden,
        args.epochs,
        data.len(),
        args.out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Simulate(a) => run_simulate(a, false),
        Command::Adapt(a) => run_simulate(a, true),
        Command::Sweep(a) => run_sweep(a),
        Command::Scaling(a) => run_scaling(a),
        Command::Theory(a) => run_theory(a),
        Command::Validate(a) => run_validate(a),
        Command::TrainRbm(a) => run_train(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Validation(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(EXIT_VALIDATION)
        }
    }
}

//! Chains, settings, sweeps and scaling studies, with CSV emission.

use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, Mode, ModelFamily, SamplerChoice};
use crate::adaptive::{ScaleController, LBP_TARGET_RATE, RWM_TARGET_RATE};
use crate::error::Result;
use crate::metrics::{merge, ChainStats, MergedStats};
use crate::models::{load_rbm, make_bernoulli, make_fhmm, make_ising, BitState, TargetModel};
use crate::oracle::{
    check_detailed_balance, check_stationarity, exact_kernel, random_rbm, toy_models, visit_chi_square,
    CHI2_CRITICAL_DF15_P001,
};
use crate::samplers::{Chain, SamplerKind};

pub const CSV_HEADER: [&str; 13] = [
    "sampler",
    "model",
    "config",
    "N",
    "mode",
    "target_rate",
    "R",
    "acc_rate",
    "ejd_rb",
    "ejd_realized",
    "ess",
    "seconds",
    "seed",
];

pub fn build_model(cfg: &ExperimentConfig) -> Result<Box<dyn TargetModel>> {
    Ok(match cfg.model {
        ModelFamily::Bernoulli => Box::new(make_bernoulli(cfg.size, cfg.config, cfg.model_seed)?),
        ModelFamily::Ising => Box::new(make_ising(cfg.size, cfg.config, cfg.model_seed)?),
        ModelFamily::Fhmm => Box::new(make_fhmm(cfg.size, cfg.fhmm_chains, cfg.config, cfg.model_seed)?),
        ModelFamily::Rbm => {
            let path = cfg
                .rbm_file
                .as_ref()
                .ok_or_else(|| crate::Error::config("rbm_file", "required for model = rbm"))?;
            Box::new(load_rbm(path)?)
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ScaleMode {
    Fixed(f64),
    Adaptive { target: f64, step_size: f64, initial: f64 },
}

impl ScaleMode {
    fn controller(&self, warmup: usize, dim: usize) -> ScaleController {
        match *self {
            ScaleMode::Fixed(r) => ScaleController::fixed(r, dim),
            ScaleMode::Adaptive {
                target,
                step_size,
                initial,
            } => ScaleController::new(target, warmup, dim)
                .with_initial_scale(initial)
                .with_step_size(step_size),
        }
    }

    pub fn target(&self) -> Option<f64> {
        match *self {
            ScaleMode::Fixed(_) => None,
            ScaleMode::Adaptive { target, .. } => Some(target),
        }
    }
}

/// A sampler at one scale policy, run over several seeded chains.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Setting {
    pub kind: SamplerKind,
    pub mode: ScaleMode,
    /// Chain length including burn-in; adaptation stops at the burn-in boundary.
    pub steps: usize,
    pub burnin: usize,
    pub chains: usize,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct ChainRun {
    pub stats: ChainStats,
    /// Real-valued scale at the end of the chain (frozen after warmup).
    pub frozen_scale: f64,
}

/// One chain seeded with `seed`, metrics recorded after burn-in.
pub fn run_chain_with<M: TargetModel + ?Sized>(
    model: &M,
    kind: SamplerKind,
    mode: ScaleMode,
    steps: usize,
    burnin: usize,
    seed: u64,
) -> Result<ChainRun> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = model.dim();
    let init = BitState::random(n, &mut rng);
    let mut chain = Chain::new(model, kind, init)?;
    let mut controller = mode.controller(burnin, n);
    let mut stats = ChainStats::with_capacity(steps.saturating_sub(burnin));
    for t in 0..steps {
        let r = controller.draw(&mut rng);
        let outcome = chain.step(r, &mut rng)?;
        controller.adapt(outcome.accept_prob);
        if t >= burnin {
            stats.record(&outcome, chain.log_prob());
        }
    }
    Ok(ChainRun {
        stats,
        frozen_scale: controller.scale(),
    })
}

/// The first chain of the configured setting.
pub fn run_chain(cfg: &ExperimentConfig) -> Result<ChainStats> {
    cfg.validate()?;
    let model = build_model(cfg)?;
    let s = setting_from_config(cfg);
    run_chain_with(model.as_ref(), s.kind, s.mode, s.steps, s.burnin, s.seed).map(|run| run.stats)
}

pub fn setting_from_config(cfg: &ExperimentConfig) -> Setting {
    let mode = if cfg.mode == Mode::Adaptive {
        ScaleMode::Adaptive {
            target: cfg.resolved_target_rate(),
            step_size: cfg.step_size,
            initial: cfg.scale,
        }
    } else {
        ScaleMode::Fixed(cfg.scale)
    };
    Setting {
        kind: cfg.sampler_kind(),
        mode,
        steps: cfg.steps,
        burnin: cfg.burnin,
        chains: cfg.chains,
        seed: cfg.seed,
    }
}

#[derive(Clone, Debug)]
pub struct SettingResult {
    pub merged: MergedStats,
    /// Mean frozen scale across chains.
    pub frozen_scale: f64,
    pub seconds: f64,
    pub runs: Vec<ChainRun>,
}

/// Runs chains `seed + i` concurrently; results keep chain order.
pub fn run_setting<M: TargetModel + ?Sized>(model: &M, setting: &Setting, timing: bool) -> Result<SettingResult> {
    let start = Instant::now();
    let runs = (0..setting.chains)
        .into_par_iter()
        .map(|i| {
            run_chain_with(
                model,
                setting.kind,
                setting.mode,
                setting.steps,
                setting.burnin,
                setting.seed.wrapping_add(i as u64),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let seconds = if timing { start.elapsed().as_secs_f64() } else { 0.0 };
    let stats: Vec<ChainStats> = runs.iter().map(|r| r.stats.clone()).collect();
    let merged = merge(&stats)?;
    let frozen_scale = runs.iter().map(|r| r.frozen_scale).sum::<f64>() / runs.len() as f64;
    Ok(SettingResult {
        merged,
        frozen_scale,
        seconds,
        runs,
    })
}

/// Mean frozen scale of `chains` adaptive chains run through `warmup` steps.
#[allow(clippy::too_many_arguments)]
pub fn tune_scale<M: TargetModel + ?Sized>(
    model: &M,
    kind: SamplerKind,
    target: f64,
    step_size: f64,
    initial: f64,
    warmup: usize,
    chains: usize,
    seed: u64,
) -> Result<f64> {
    let mode = ScaleMode::Adaptive {
        target,
        step_size,
        initial,
    };
    let scales = (0..chains)
        .into_par_iter()
        .map(|i| run_chain_with(model, kind, mode, warmup, warmup, seed.wrapping_add(i as u64)).map(|r| r.frozen_scale))
        .collect::<Result<Vec<f64>>>()?;
    Ok(scales.iter().sum::<f64>() / scales.len().max(1) as f64)
}

/// One CSV line per setting.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CsvRow {
    pub sampler: String,
    pub model: String,
    pub config: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub mode: String,
    pub target_rate: Option<f64>,
    #[serde(rename = "R")]
    pub r: f64,
    pub acc_rate: f64,
    pub ejd_rb: f64,
    pub ejd_realized: f64,
    pub ess: f64,
    pub seconds: f64,
    pub seed: u64,
}

impl CsvRow {
    pub fn new(
        cfg: &ExperimentConfig,
        model: &dyn TargetModel,
        setting: &Setting,
        mode: &str,
        result: &SettingResult,
    ) -> Self {
        CsvRow {
            sampler: setting.kind.short_name(),
            model: model.name().to_string(),
            config: cfg.config.to_string(),
            n: model.dim(),
            mode: mode.to_string(),
            target_rate: setting.mode.target(),
            r: result.frozen_scale,
            acc_rate: result.merged.mean_accept,
            ejd_rb: result.merged.ejd_rb,
            ejd_realized: result.merged.ejd_realized,
            ess: result.merged.ess,
            seconds: result.seconds,
            seed: setting.seed,
        }
    }
}

pub fn write_csv_to<W: Write>(writer: W, rows: &[CsvRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv(path: impl AsRef<Path>, rows: &[CsvRow]) -> Result<()> {
    write_csv_to(File::create(path)?, rows)
}

/// The configured fixed or adaptive setting as one CSV row.
pub fn simulate(cfg: &ExperimentConfig) -> Result<(SettingResult, CsvRow)> {
    cfg.validate()?;
    let model = build_model(cfg)?;
    let setting = setting_from_config(cfg);
    let result = run_setting(model.as_ref(), &setting, cfg.timing)?;
    let mode = if cfg.mode == Mode::Adaptive {
        "adaptive"
    } else {
        "fixed"
    };
    let row = CsvRow::new(cfg, model.as_ref(), &setting, mode, &result);
    Ok((result, row))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub target_rate: f64,
    pub estimated_r: f64,
    pub realized_rate: f64,
    /// Rao-Blackwellized EJD.
    pub ejd: f64,
    pub ejd_realized: f64,
    pub ess: f64,
    pub seconds: f64,
    pub seed: u64,
}

/// Acceptance-vs-efficiency sweep. The first row runs at `R = 1` and sets
/// `a_max`; each later row targets `a_max − k · rate_step` (down to
/// `min_rate`), estimates `R` with adaptive chains and then runs the fixed
/// chains at that frozen scale.
pub fn sweep(cfg: &ExperimentConfig, model: &dyn TargetModel) -> Result<Vec<SweepRow>> {
    Ok(sweep_detailed(cfg, model)?.into_iter().map(|(row, _)| row).collect())
}

fn sweep_detailed(cfg: &ExperimentConfig, model: &dyn TargetModel) -> Result<Vec<(SweepRow, CsvRow)>> {
    cfg.validate()?;
    let kind = cfg.sampler_kind();
    let fixed = |r: f64| Setting {
        kind,
        mode: ScaleMode::Fixed(r),
        steps: cfg.steps,
        burnin: cfg.burnin,
        chains: cfg.chains,
        seed: cfg.seed,
    };
    let to_row = |target: f64, setting: &Setting, result: &SettingResult| {
        let sweep_row = SweepRow {
            target_rate: target,
            estimated_r: result.frozen_scale,
            realized_rate: result.merged.mean_accept,
            ejd: result.merged.ejd_rb,
            ejd_realized: result.merged.ejd_realized,
            ess: result.merged.ess,
            seconds: result.seconds,
            seed: setting.seed,
        };
        let mut csv = CsvRow::new(cfg, model, setting, "sweep", result);
        csv.target_rate = Some(target);
        (sweep_row, csv)
    };

    let base_setting = fixed(1.0);
    let base = run_setting(model, &base_setting, cfg.timing)?;
    let a_max = base.merged.mean_accept;
    let mut rows = vec![to_row(a_max, &base_setting, &base)];
    let mut initial = 1.0;
    for k in 1.. {
        let target = a_max - cfg.rate_step * k as f64;
        if target < cfg.min_rate {
            break;
        }
        let r = tune_scale(
            model,
            kind,
            target,
            cfg.step_size,
            initial,
            cfg.burnin,
            cfg.tune_chains,
            cfg.seed.wrapping_add(1 << 32),
        )?;
        initial = r;
        let setting = fixed(r);
        let result = run_setting(model, &setting, cfg.timing)?;
        rows.push(to_row(target, &setting, &result));
    }
    Ok(rows)
}

/// Sweep rows in CSV form.
pub fn sweep_csv(cfg: &ExperimentConfig, model: &dyn TargetModel) -> Result<Vec<CsvRow>> {
    Ok(sweep_detailed(cfg, model)?.into_iter().map(|(_, csv)| csv).collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingPoint {
    pub n: usize,
    pub r_lbp: f64,
    pub r_rwm: f64,
    pub ejd_lbp: f64,
    pub ejd_rwm: f64,
    pub acc_lbp: f64,
    pub acc_rwm: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingResult {
    pub points: Vec<ScalingPoint>,
    pub slope_lbp: f64,
    pub slope_rwm: f64,
    pub slope_ratio: f64,
    pub rows: Vec<CsvRow>,
}

/// Least-squares slope of `y` on `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Adaptive LBP and RWM at each size in `cfg.sizes`; slopes of `log R*`
/// and of the log EJD ratio against `log N`.
pub fn scaling_study(cfg: &ExperimentConfig) -> Result<ScalingResult> {
    cfg.validate()?;
    if cfg.sizes.len() < 3 {
        return Err(crate::Error::config("sizes", "scaling study needs at least 3 sizes"));
    }
    let mut points = Vec::new();
    let mut rows = Vec::new();
    for &n in &cfg.sizes {
        let mut sized = cfg.clone();
        sized.size = n;
        let model = build_model(&sized)?;
        let mut run = |sampler: SamplerChoice, target: f64| -> Result<SettingResult> {
            let mut c = sized.clone();
            c.sampler = sampler;
            let setting = Setting {
                kind: c.sampler_kind(),
                mode: ScaleMode::Adaptive {
                    target,
                    step_size: cfg.step_size,
                    initial: 1.0,
                },
                steps: cfg.steps,
                burnin: cfg.burnin,
                chains: cfg.chains,
                seed: cfg.seed,
            };
            let result = run_setting(model.as_ref(), &setting, cfg.timing)?;
            rows.push(CsvRow::new(&c, model.as_ref(), &setting, "scaling", &result));
            Ok(result)
        };
        let lbp = run(SamplerChoice::Lbp, LBP_TARGET_RATE)?;
        let rwm = run(SamplerChoice::Rwm, RWM_TARGET_RATE)?;
        points.push(ScalingPoint {
            n: model.dim(),
            r_lbp: lbp.frozen_scale,
            r_rwm: rwm.frozen_scale,
            ejd_lbp: lbp.merged.ejd_rb,
            ejd_rwm: rwm.merged.ejd_rb,
            acc_lbp: lbp.merged.mean_accept,
            acc_rwm: rwm.merged.mean_accept,
        });
    }
    let log_n: Vec<f64> = points.iter().map(|p| (p.n as f64).ln()).collect();
    let slope = |f: fn(&ScalingPoint) -> f64| ls_slope(&log_n, &points.iter().map(|p| f(p).ln()).collect::<Vec<_>>());
    Ok(ScalingResult {
        slope_lbp: slope(|p| p.r_lbp),
        slope_rwm: slope(|p| p.r_rwm),
        slope_ratio: slope(|p| p.ejd_lbp / p.ejd_rwm),
        points,
        rows,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationEntry {
    pub label: String,
    pub detailed_balance: f64,
    pub stationarity: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub entries: Vec<ValidationEntry>,
    pub chi_square: f64,
    pub tolerance: f64,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.chi_square < CHI2_CRITICAL_DF15_P001
            && self
                .entries
                .iter()
                .all(|e| e.detailed_balance < self.tolerance && e.stationarity < self.tolerance)
    }
}

/// Exact-kernel residuals of the configured sampler on toy instances of the
/// configured family (`N ∈ {4, 5, 6}`, `R ∈ {1, 2, 3}`), plus a visit
/// frequency test at `N = 4`.
pub fn validate(cfg: &ExperimentConfig) -> Result<ValidationReport> {
    let kind = cfg.sampler_kind();
    let family = cfg.model.to_string();
    let mut entries = Vec::new();
    let mut toy4 = None;
    for n in [4usize, 5, 6] {
        let models: Vec<Box<dyn TargetModel>> = match cfg.model {
            ModelFamily::Rbm => vec![Box::new(random_rbm(n, 3, cfg.model_seed)?)],
            _ => toy_models(n, cfg.model_seed)?
                .into_iter()
                .filter(|m| m.name() == family)
                .collect(),
        };
        for model in models {
            for r in 1..=3 {
                let kernel = exact_kernel(model.as_ref(), kind, r)?;
                entries.push(ValidationEntry {
                    label: format!("{} N={n} {} R={r}", model.name(), kind.short_name()),
                    detailed_balance: check_detailed_balance(&kernel),
                    stationarity: check_stationarity(&kernel),
                });
            }
            if n == 4 {
                toy4 = Some(model);
            }
        }
    }
    let toy4 = toy4.expect("every family has a toy instance at N = 4");
    let chi = visit_chi_square(toy4.as_ref(), kind, 1, 1_000_000, 11, cfg.seed)?;
    Ok(ValidationReport {
        entries,
        chi_square: chi.statistic,
        tolerance: 1e-10,
    })
}

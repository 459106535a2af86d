//! Flat `key = value` experiment configuration with `#` comments.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::adaptive::{LBP_TARGET_RATE, RWM_TARGET_RATE};
use crate::error::{Error, Result};
use crate::models::ConfigLabel;
use crate::samplers::{LbpConfig, SamplerKind, WeightFunction};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelFamily {
    Bernoulli,
    Ising,
    Fhmm,
    Rbm,
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelFamily::Bernoulli => "bernoulli",
            ModelFamily::Ising => "ising",
            ModelFamily::Fhmm => "fhmm",
            ModelFamily::Rbm => "rbm",
        })
    }
}

impl FromStr for ModelFamily {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "bernoulli" => Ok(ModelFamily::Bernoulli),
            "ising" => Ok(ModelFamily::Ising),
            "fhmm" => Ok(ModelFamily::Fhmm),
            "rbm" => Ok(ModelFamily::Rbm),
            other => Err(format!("unknown model family `{other}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SamplerChoice {
    Rwm,
    Lbp,
}

impl fmt::Display for SamplerChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SamplerChoice::Rwm => "rwm",
            SamplerChoice::Lbp => "lbp",
        })
    }
}

impl FromStr for SamplerChoice {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "rwm" => Ok(SamplerChoice::Rwm),
            "lbp" => Ok(SamplerChoice::Lbp),
            other => Err(format!("unknown sampler `{other}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Fixed,
    Adaptive,
    Sweep,
    Scaling,
    Validate,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Fixed => "fixed",
            Mode::Adaptive => "adaptive",
            Mode::Sweep => "sweep",
            Mode::Scaling => "scaling",
            Mode::Validate => "validate",
        })
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "fixed" => Ok(Mode::Fixed),
            "adaptive" => Ok(Mode::Adaptive),
            "sweep" => Ok(Mode::Sweep),
            "scaling" => Ok(Mode::Scaling),
            "validate" => Ok(Mode::Validate),
            other => Err(format!("unknown mode `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelFamily,
    pub config: ConfigLabel,
    /// `N` for Bernoulli, lattice side for Ising, sequence length for FHMM.
    pub size: usize,
    /// Number of FHMM chains `K`.
    pub fhmm_chains: usize,
    pub rbm_file: Option<PathBuf>,
    /// Seed for model parameters, independent of the chain seed.
    pub model_seed: u64,
    pub sampler: SamplerChoice,
    pub weight: WeightFunction,
    pub replacement: bool,
    pub gradient: bool,
    pub mode: Mode,
    /// Scale in fixed mode; real values are rounded probabilistically.
    pub scale: f64,
    /// Adaptive target; defaults to the sampler's optimal rate.
    pub target_rate: Option<f64>,
    pub step_size: f64,
    pub rate_step: f64,
    pub min_rate: f64,
    /// Adaptive chains used to estimate `R` for each sweep row.
    pub tune_chains: usize,
    pub sizes: Vec<usize>,
    /// Chain length including burn-in.
    pub steps: usize,
    pub burnin: usize,
    pub chains: usize,
    pub seed: u64,
    /// Record wall-clock seconds; off keeps CSV output byte-identical.
    pub timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: ModelFamily::Bernoulli,
            config: ConfigLabel::C1,
            size: 100,
            fhmm_chains: 5,
            rbm_file: None,
            model_seed: 0,
            sampler: SamplerChoice::Lbp,
            weight: WeightFunction::Barker,
            replacement: false,
            gradient: true,
            mode: Mode::Fixed,
            scale: 1.0,
            target_rate: None,
            step_size: 1.0,
            rate_step: 0.02,
            min_rate: 0.03,
            tune_chains: 4,
            sizes: vec![100, 400, 1600],
            steps: 10_000,
            burnin: 5_000,
            chains: 20,
            seed: 0,
            timing: false,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| Error::config(key, format!("cannot parse `{value}`: {e}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::config(key, format!("expected true or false, got `{value}`"))),
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(
                    format!("line {}", lineno + 1),
                    format!("expected `key = value`, got `{line}`"),
                )
            })?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "model" => self.model = parse_value(key, value)?,
            "config" => self.config = parse_value(key, value)?,
            "size" => self.size = parse_value(key, value)?,
            "fhmm_chains" => self.fhmm_chains = parse_value(key, value)?,
            "rbm_file" => self.rbm_file = (!value.is_empty()).then(|| PathBuf::from(value)),
            "model_seed" => self.model_seed = parse_value(key, value)?,
            "sampler" => self.sampler = parse_value(key, value)?,
            "weight" => self.weight = parse_value(key, value)?,
            "replacement" => self.replacement = parse_bool(key, value)?,
            "gradient" => self.gradient = parse_bool(key, value)?,
            "mode" => self.mode = parse_value(key, value)?,
            "scale" => self.scale = parse_value(key, value)?,
            "target_rate" => {
                self.target_rate = if value.is_empty() {
                    None
                } else {
                    Some(parse_value(key, value)?)
                }
            }
            "step_size" => self.step_size = parse_value(key, value)?,
            "rate_step" => self.rate_step = parse_value(key, value)?,
            "min_rate" => self.min_rate = parse_value(key, value)?,
            "tune_chains" => self.tune_chains = parse_value(key, value)?,
            "sizes" => {
                self.sizes = value
                    .split(',')
                    .map(|v| parse_value(key, v.trim()))
                    .collect::<Result<Vec<usize>>>()?
            }
            "steps" => self.steps = parse_value(key, value)?,
            "burnin" => self.burnin = parse_value(key, value)?,
            "chains" => self.chains = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "timing" => self.timing = parse_bool(key, value)?,
            _ => return Err(Error::config(key, "unknown key")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |key: &str, msg: String| Err(Error::config(key, msg));
        if self.size == 0 {
            return fail("size", "must be positive".into());
        }
        if self.model == ModelFamily::Ising && self.size < 2 {
            return fail("size", "Ising lattice side must be at least 2".into());
        }
        if self.fhmm_chains == 0 {
            return fail("fhmm_chains", "must be positive".into());
        }
        if self.model == ModelFamily::Rbm && self.rbm_file.is_none() {
            return fail("rbm_file", "required for model = rbm".into());
        }
        if !self.scale.is_finite() || self.scale < 1.0 {
            return fail("scale", format!("must be at least 1, got {}", self.scale));
        }
        if let Some(t) = self.target_rate {
            if !(t > 0.0 && t < 1.0) {
                return fail("target_rate", format!("must lie in (0, 1), got {t}"));
            }
        }
        if !self.step_size.is_finite() || self.step_size <= 0.0 {
            return fail("step_size", format!("must be positive, got {}", self.step_size));
        }
        if !(self.rate_step > 0.0 && self.rate_step < 1.0) {
            return fail("rate_step", format!("must lie in (0, 1), got {}", self.rate_step));
        }
        if !(self.min_rate > 0.0 && self.min_rate < 1.0) {
            return fail("min_rate", format!("must lie in (0, 1), got {}", self.min_rate));
        }
        if self.tune_chains == 0 {
            return fail("tune_chains", "must be at least 1".into());
        }
        if self.sizes.contains(&0) {
            return fail("sizes", "sizes must be positive".into());
        }
        if self.mode == Mode::Scaling && self.sizes.len() < 3 {
            return fail("sizes", "scaling study needs at least 3 sizes".into());
        }
        if self.burnin >= self.steps {
            return fail(
                "burnin",
                format!("must be below steps ({} >= {})", self.burnin, self.steps),
            );
        }
        if self.chains == 0 {
            return fail("chains", "must be at least 1".into());
        }
        Ok(())
    }

    pub fn sampler_kind(&self) -> SamplerKind {
        match self.sampler {
            SamplerChoice::Rwm => SamplerKind::Rwm,
            SamplerChoice::Lbp => SamplerKind::Lbp(
                LbpConfig::new(self.weight)
                    .with_replacement(self.replacement)
                    .with_gradient(self.gradient),
            ),
        }
    }

    pub fn resolved_target_rate(&self) -> f64 {
        self.target_rate.unwrap_or(match self.sampler {
            SamplerChoice::Rwm => RWM_TARGET_RATE,
            SamplerChoice::Lbp => LBP_TARGET_RATE,
        })
    }
}

impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "model = {}", self.model)?;
        writeln!(f, "config = {}", self.config)?;
        writeln!(f, "size = {}", self.size)?;
        writeln!(f, "fhmm_chains = {}", self.fhmm_chains)?;
        if let Some(p) = &self.rbm_file {
            writeln!(f, "rbm_file = {}", p.display())?;
        }
        writeln!(f, "model_seed = {}", self.model_seed)?;
        writeln!(f, "sampler = {}", self.sampler)?;
        writeln!(f, "weight = {}", self.weight)?;
        writeln!(f, "replacement = {}", self.replacement)?;
        writeln!(f, "gradient = {}", self.gradient)?;
        writeln!(f, "mode = {}", self.mode)?;
        writeln!(f, "scale = {:?}", self.scale)?;
        if let Some(t) = self.target_rate {
            writeln!(f, "target_rate = {t:?}")?;
        }
        writeln!(f, "step_size = {:?}", self.step_size)?;
        writeln!(f, "rate_step = {:?}", self.rate_step)?;
        writeln!(f, "min_rate = {:?}", self.min_rate)?;
        writeln!(f, "tune_chains = {}", self.tune_chains)?;
        let sizes: Vec<String> = self.sizes.iter().map(|n| n.to_string()).collect();
        writeln!(f, "sizes = {}", sizes.join(","))?;
        writeln!(f, "steps = {}", self.steps)?;
        writeln!(f, "burnin = {}", self.burnin)?;
        writeln!(f, "chains = {}", self.chains)?;
        writeln!(f, "seed = {}", self.seed)?;
        writeln!(f, "timing = {}", self.timing)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.resolved_target_rate(), LBP_TARGET_RATE);
    }

    #[test]
    fn parses_comments_and_blank_lines() {
        let text = "# experiment\nmodel = ising  # lattice\n\nsize = 20\nsampler = rwm\nmode = adaptive\n";
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.model, ModelFamily::Ising);
        assert_eq!(cfg.size, 20);
        assert_eq!(cfg.sampler_kind(), SamplerKind::Rwm);
        assert_eq!(cfg.resolved_target_rate(), RWM_TARGET_RATE);
    }

    fn key_of(err: Error) -> String {
        match err {
            Error::Config { key, .. } => key,
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn errors_name_the_key() {
        assert_eq!(key_of(ExperimentConfig::parse("steps = ten").unwrap_err()), "steps");
        assert_eq!(key_of(ExperimentConfig::parse("colour = red").unwrap_err()), "colour");
        assert_eq!(
            key_of(ExperimentConfig::parse("steps = 100\nburnin = 100").unwrap_err()),
            "burnin"
        );
        assert_eq!(key_of(ExperimentConfig::parse("chains = 0").unwrap_err()), "chains");
        assert_eq!(key_of(ExperimentConfig::parse("model = rbm").unwrap_err()), "rbm_file");
        assert_eq!(
            key_of(ExperimentConfig::parse("replacement = maybe").unwrap_err()),
            "replacement"
        );
        assert_eq!(
            key_of(ExperimentConfig::parse("target_rate = 1.5").unwrap_err()),
            "target_rate"
        );
        assert_eq!(
            key_of(ExperimentConfig::parse("mode = scaling\nsizes = 10,20").unwrap_err()),
            "sizes"
        );
        assert_eq!(key_of(ExperimentConfig::parse("just words").unwrap_err()), "line 1");
    }

    fn arb_config() -> impl Strategy<Value = ExperimentConfig> {
        (
            (
                0usize..4,
                0usize..3,
                2usize..5000,
                1usize..8,
                any::<u64>(),
                any::<bool>(),
            ),
            (any::<bool>(), any::<bool>(), any::<bool>(), 0usize..5, 1.0f64..500.0),
            (proptest::option::of(0.01f64..0.99), 0.01f64..5.0, 1usize..10),
            (
                proptest::collection::vec(1usize..10_000, 3..6),
                1usize..5000,
                1usize..5000,
                1usize..64,
                any::<u64>(),
                any::<bool>(),
            ),
        )
            .prop_map(|(a, b, c, d)| {
                let model = [
                    ModelFamily::Bernoulli,
                    ModelFamily::Ising,
                    ModelFamily::Fhmm,
                    ModelFamily::Rbm,
                ][a.0];
                ExperimentConfig {
                    model,
                    config: ConfigLabel::ALL[a.1],
                    size: a.2,
                    fhmm_chains: a.3,
                    rbm_file: (model == ModelFamily::Rbm).then(|| PathBuf::from("weights/rbm.txt")),
                    model_seed: a.4,
                    sampler: if a.5 { SamplerChoice::Lbp } else { SamplerChoice::Rwm },
                    weight: if b.0 {
                        WeightFunction::Sqrt
                    } else {
                        WeightFunction::Barker
                    },
                    replacement: b.1,
                    gradient: b.2,
                    mode: [Mode::Fixed, Mode::Adaptive, Mode::Sweep, Mode::Scaling, Mode::Validate][b.3],
                    scale: b.4,
                    target_rate: c.0,
                    step_size: c.1,
                    rate_step: 0.02,
                    min_rate: 0.03,
                    tune_chains: c.2,
                    sizes: d.0,
                    steps: d.1 + d.2,
                    burnin: d.2,
                    chains: d.3,
                    seed: d.4,
                    timing: d.5,
                }
            })
    }

    proptest! {
        #[test]
        fn round_trips_through_text(cfg in arb_config()) {
            let text = cfg.to_string();
            let back = ExperimentConfig::parse(&text).unwrap();
            prop_assert_eq!(back, cfg);
        }
    }
}

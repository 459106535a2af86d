//! Binary target distributions behind a single evaluation interface.
//!
//! Every model works on [`BitState`] values in `{0,1}^N` and exposes an
//! unnormalized log-density, exact single-site flip deltas and the gradient
//! of a continuous relaxation of the log-density (used by the gradient
//! approximation of the proposal weights).

mod bernoulli;
mod fhmm;
mod ising;
mod rbm;

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::samplers::WeightFunction;

pub use bernoulli::{make_bernoulli, BernoulliModel};
pub use fhmm::{make_fhmm, FhmmModel};
pub use ising::{make_ising, IsingModel};
pub use rbm::{load_rbm, save_rbm, train_rbm_cd, CdConfig, RbmModel, RbmTrainer};

/// A configuration `x ∈ {0,1}^N`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BitState(Vec<u8>);

impl BitState {
    pub fn zeros(n: usize) -> Self {
        BitState(vec![0; n])
    }

    pub fn ones(n: usize) -> Self {
        BitState(vec![1; n])
    }

    pub fn from_bits(bits: Vec<u8>) -> Result<Self> {
        if let Some(&bad) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::InvalidBit(bad));
        }
        Ok(BitState(bits))
    }

    /// State whose bit `i` is bit `i` of `index` (little-endian enumeration).
    pub fn from_index(index: usize, n: usize) -> Self {
        BitState((0..n).map(|i| ((index >> i) & 1) as u8).collect())
    }

    pub fn to_index(&self) -> usize {
        self.0
            .iter()
            .enumerate()
            .fold(0, |acc, (i, &b)| acc | ((b as usize) << i))
    }

    /// Uniformly random state.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        BitState((0..n).map(|_| rng.random::<bool>() as u8).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> u8 {
        self.0[i]
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        self.0[i] ^= 1;
    }

    /// Copy with every listed index flipped; repeated indices cancel.
    pub fn flipped(&self, indices: &[usize]) -> Self {
        let mut y = self.clone();
        for &i in indices {
            y.flip(i);
        }
        y
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&b| b as f64).collect()
    }

    pub fn hamming(&self, other: &BitState) -> usize {
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count()
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().map(|&b| b as usize).sum()
    }
}

impl fmt::Display for BitState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

/// Smooth / moderate / sharp model configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ConfigLabel {
    C1,
    C2,
    C3,
}

impl ConfigLabel {
    pub const ALL: [ConfigLabel; 3] = [ConfigLabel::C1, ConfigLabel::C2, ConfigLabel::C3];
}

impl fmt::Display for ConfigLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConfigLabel::C1 => "C1",
            ConfigLabel::C2 => "C2",
            ConfigLabel::C3 => "C3",
        })
    }
}

impl FromStr for ConfigLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "C1" => Ok(ConfigLabel::C1),
            "C2" => Ok(ConfigLabel::C2),
            "C3" => Ok(ConfigLabel::C3),
            other => Err(Error::InvalidParameter(format!(
                "unknown configuration label `{other}`"
            ))),
        }
    }
}

/// An unnormalized log-density on `{0,1}^N`.
///
/// Methods taking a [`BitState`] or an index assume the input has already
/// been validated against [`TargetModel::dim`]; they panic on out-of-range
/// indices. Use the checked free functions ([`log_prob`], [`flip_delta`],
/// [`grad_log_prob`]) at API boundaries.
pub trait TargetModel: Send + Sync {
    fn name(&self) -> &'static str;

    fn dim(&self) -> usize;

    /// Log-density of the continuous relaxation on `[0,1]^N`. Agrees with
    /// [`TargetModel::log_prob`] on binary points.
    fn relaxed_log_prob(&self, x: &[f64]) -> f64;

    /// Gradient of [`TargetModel::relaxed_log_prob`].
    fn relaxed_grad(&self, x: &[f64]) -> Vec<f64>;

    /// `log π̃(x with bit i flipped) − log π̃(x)`.
    fn flip_delta(&self, x: &BitState, i: usize) -> f64;

    fn log_prob(&self, x: &BitState) -> f64 {
        self.relaxed_log_prob(&x.to_f64())
    }

    fn grad_log_prob(&self, x: &BitState) -> Vec<f64> {
        self.relaxed_grad(&x.to_f64())
    }

    /// All single-site flip deltas at `x`.
    fn flip_deltas(&self, x: &BitState) -> Vec<f64> {
        (0..self.dim()).map(|i| self.flip_delta(x, i)).collect()
    }

    /// Exact log proposal weights `log g(exp(Δ_j))` for every site.
    fn flip_log_weights(&self, x: &BitState, weight: WeightFunction) -> Vec<f64> {
        self.flip_deltas(x).into_iter().map(|d| weight.log_g(d)).collect()
    }

    /// Log proposal weights `log g(exp((1 − 2x_j) ∂_j log π̃(x)))` from the
    /// gradient of the relaxation.
    fn gradient_log_weights(&self, x: &BitState, weight: WeightFunction) -> Vec<f64> {
        self.grad_log_prob(x)
            .into_iter()
            .zip(x.as_slice())
            .map(|(g, &b)| weight.log_g((1.0 - 2.0 * b as f64) * g))
            .collect()
    }

    /// `log π̃(y) − log π̃(x)` where `y` flips `indices` of `x` (XOR semantics).
    fn log_ratio(&self, x: &BitState, indices: &[usize]) -> f64 {
        let mut scratch = x.clone();
        let mut acc = 0.0;
        for &i in indices {
            acc += self.flip_delta(&scratch, i);
            scratch.flip(i);
        }
        acc
    }

    /// Site marginals `p_i = P(x_i = 1)` when the model is a product measure.
    fn marginals(&self) -> Option<&[f64]> {
        None
    }
}

pub fn check_state<M: TargetModel + ?Sized>(model: &M, x: &BitState) -> Result<()> {
    if x.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: x.len(),
        });
    }
    Ok(())
}

/// Checked [`TargetModel::log_prob`].
pub fn log_prob<M: TargetModel + ?Sized>(model: &M, x: &BitState) -> Result<f64> {
    check_state(model, x)?;
    Ok(model.log_prob(x))
}

/// Checked [`TargetModel::flip_delta`].
pub fn flip_delta<M: TargetModel + ?Sized>(model: &M, x: &BitState, i: usize) -> Result<f64> {
    check_state(model, x)?;
    if i >= model.dim() {
        return Err(Error::IndexOutOfRange {
            index: i,
            dim: model.dim(),
        });
    }
    Ok(model.flip_delta(x, i))
}

/// Checked [`TargetModel::grad_log_prob`].
pub fn grad_log_prob<M: TargetModel + ?Sized>(model: &M, x: &BitState) -> Result<Vec<f64>> {
    check_state(model, x)?;
    Ok(model.grad_log_prob(x))
}

/// `log(1 + e^z)` without overflow.
#[inline]
pub(crate) fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

#[inline]
pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

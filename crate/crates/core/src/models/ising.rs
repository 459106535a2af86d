use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{BitState, ConfigLabel, TargetModel};
use crate::error::{Error, Result};

/// Ising model on a `side × side` 4-neighbour lattice,
/// `π(s) ∝ exp(Σ α_i s_i − λ Σ_{(i,j)∈E} s_i s_j)` with spins `s = 2x − 1`.
///
/// Site `(r, c)` (0-based) is stored at index `r · side + c`.
#[derive(Clone, Debug, PartialEq)]
pub struct IsingModel {
    side: usize,
    alpha: Vec<f64>,
    lambda: f64,
}

#[inline]
fn spin(b: u8) -> f64 {
    2.0 * b as f64 - 1.0
}

impl IsingModel {
    pub fn new(side: usize, alpha: Vec<f64>, lambda: f64) -> Result<Self> {
        if side < 2 {
            return Err(Error::InvalidParameter(format!(
                "lattice side {side} must be at least 2"
            )));
        }
        if alpha.len() != side * side {
            return Err(Error::DimensionMismatch {
                expected: side * side,
                got: alpha.len(),
            });
        }
        Ok(IsingModel { side, alpha, lambda })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Lattice neighbours of site `i`.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let p = self.side;
        let (r, c) = (i / p, i % p);
        [
            (r > 0).then(|| i - p),
            (r + 1 < p).then(|| i + p),
            (c > 0).then(|| i - 1),
            (c + 1 < p).then(|| i + 1),
        ]
        .into_iter()
        .flatten()
    }

    /// Spin view of a bit state.
    pub fn spins(x: &BitState) -> Vec<i8> {
        x.as_slice().iter().map(|&b| 2 * b as i8 - 1).collect()
    }

    #[inline]
    fn neighbor_spin_sum_bits(&self, x: &BitState, i: usize) -> f64 {
        self.neighbors(i).map(|j| spin(x.get(j))).sum()
    }
}

impl TargetModel for IsingModel {
    fn name(&self) -> &'static str {
        "ising"
    }

    fn dim(&self) -> usize {
        self.side * self.side
    }

    fn relaxed_log_prob(&self, x: &[f64]) -> f64 {
        let p = self.side;
        let s: Vec<f64> = x.iter().map(|&xi| 2.0 * xi - 1.0).collect();
        let field: f64 = self.alpha.iter().zip(&s).map(|(a, si)| a * si).sum();
        let mut coupling = 0.0;
        for r in 0..p {
            for c in 0..p {
                let i = r * p + c;
                if c + 1 < p {
                    coupling += s[i] * s[i + 1];
                }
                if r + 1 < p {
                    coupling += s[i] * s[i + p];
                }
            }
        }
        field - self.lambda * coupling
    }

    fn relaxed_grad(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|i| {
                let nbr: f64 = self.neighbors(i).map(|j| 2.0 * x[j] - 1.0).sum();
                2.0 * (self.alpha[i] - self.lambda * nbr)
            })
            .collect()
    }

    #[inline]
    fn flip_delta(&self, x: &BitState, i: usize) -> f64 {
        let s = spin(x.get(i));
        -2.0 * s * self.alpha[i] + 2.0 * self.lambda * s * self.neighbor_spin_sum_bits(x, i)
    }
}

/// Fields drawn uniformly from the inner interval for nodes `v = (v1, v2)`
/// (1-based) with `(v1 − p/2)² + (v2 − p/2)² ≤ p²/2` and from the outer
/// interval otherwise: C1 `(−0.2, 0.4)/(−0.4, 0.2), λ = 0.1`; C2
/// `(−0.3, 0.6)/(−0.6, 0.3), λ = 0.15`; C3 `(−0.4, 0.8)/(−0.8, 0.4), λ = 0.2`.
pub fn make_ising(side: usize, config: ConfigLabel, seed: u64) -> Result<IsingModel> {
    if side < 2 {
        return Err(Error::InvalidParameter(format!(
            "lattice side {side} must be at least 2"
        )));
    }
    let (scale, lambda) = match config {
        ConfigLabel::C1 => (0.2, 0.1),
        ConfigLabel::C2 => (0.3, 0.15),
        ConfigLabel::C3 => (0.4, 0.2),
    };
    let inner = (-scale, 2.0 * scale);
    let outer = (-2.0 * scale, scale);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = side as f64 / 2.0;
    let radius2 = (side * side) as f64 / 2.0;
    let mut alpha = Vec::with_capacity(side * side);
    for v1 in 1..=side {
        for v2 in 1..=side {
            let d2 = (v1 as f64 - half).powi(2) + (v2 as f64 - half).powi(2);
            let (lo, hi) = if d2 <= radius2 { inner } else { outer };
            alpha.push(rng.random_range(lo..hi));
        }
    }
    IsingModel::new(side, alpha, lambda)
}

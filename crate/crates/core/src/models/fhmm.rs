use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{BitState, ConfigLabel, TargetModel};
use crate::error::{Error, Result};

const P_FIRST_ON: f64 = 0.1;
const P_STAY: f64 = 0.8;

/// Posterior of a factorial HMM over latent bits `x_{l,k}` given `y ∈ R^L`.
///
/// Prior: `p(x_{l,1} = 1) = 0.1` and `p(x_{l,k} = x_{l,k−1}) = 0.8` for
/// `k ≥ 2`, independently over `l`. Likelihood:
/// `y_l ~ N(wᵀ x_l + b, σ²)`. Bit `(l, k)` lives at index `l · K + k`.
#[derive(Clone, Debug, PartialEq)]
pub struct FhmmModel {
    len: usize,
    chains: usize,
    w: Vec<f64>,
    b: f64,
    sigma2: f64,
    y: Vec<f64>,
    latent: Option<BitState>,
}

// log p(x_{l,1}) and log p(x_{l,k} | x_{l,k-1}) for binary arguments.
fn log_first(bit: u8) -> f64 {
    if bit == 1 {
        P_FIRST_ON.ln()
    } else {
        (1.0 - P_FIRST_ON).ln()
    }
}

fn log_trans(prev: u8, cur: u8) -> f64 {
    if prev == cur {
        P_STAY.ln()
    } else {
        (1.0 - P_STAY).ln()
    }
}

impl FhmmModel {
    pub fn new(len: usize, chains: usize, w: Vec<f64>, b: f64, sigma2: f64, y: Vec<f64>) -> Result<Self> {
        if len == 0 || chains == 0 {
            return Err(Error::InvalidParameter("L and K must be at least 1".into()));
        }
        if sigma2.is_nan() || sigma2 <= 0.0 {
            return Err(Error::InvalidParameter(format!("sigma2 {sigma2} must be positive")));
        }
        if w.len() != chains {
            return Err(Error::DimensionMismatch {
                expected: chains,
                got: w.len(),
            });
        }
        if y.len() != len {
            return Err(Error::DimensionMismatch {
                expected: len,
                got: y.len(),
            });
        }
        Ok(FhmmModel {
            len,
            chains,
            w,
            b,
            sigma2,
            y,
            latent: None,
        })
    }

    pub fn sequence_len(&self) -> usize {
        self.len
    }

    pub fn chains(&self) -> usize {
        self.chains
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn observations(&self) -> &[f64] {
        &self.y
    }

    /// The latent configuration the observations were generated from, if known.
    pub fn latent(&self) -> Option<&BitState> {
        self.latent.as_ref()
    }

    fn emission_mean(&self, x: &BitState, l: usize) -> f64 {
        let row = &x.as_slice()[l * self.chains..(l + 1) * self.chains];
        self.b + row.iter().zip(&self.w).map(|(&b, w)| b as f64 * w).sum::<f64>()
    }
}

impl TargetModel for FhmmModel {
    fn name(&self) -> &'static str {
        "fhmm"
    }

    fn dim(&self) -> usize {
        self.len * self.chains
    }

    fn relaxed_log_prob(&self, x: &[f64]) -> f64 {
        let k = self.chains;
        let first_logit = (P_FIRST_ON / (1.0 - P_FIRST_ON)).ln();
        let stay_log_odds = (P_STAY / (1.0 - P_STAY)).ln();
        let mut acc = 0.0;
        for l in 0..self.len {
            let row = &x[l * k..(l + 1) * k];
            acc += (1.0 - P_FIRST_ON).ln() + row[0] * first_logit;
            for j in 1..k {
                let agree = row[j] * row[j - 1] + (1.0 - row[j]) * (1.0 - row[j - 1]);
                acc += (1.0 - P_STAY).ln() + agree * stay_log_odds;
            }
            let mean = self.b + row.iter().zip(&self.w).map(|(a, w)| a * w).sum::<f64>();
            acc -= (self.y[l] - mean).powi(2) / (2.0 * self.sigma2);
        }
        acc
    }

    fn relaxed_grad(&self, x: &[f64]) -> Vec<f64> {
        let k = self.chains;
        let first_logit = (P_FIRST_ON / (1.0 - P_FIRST_ON)).ln();
        let stay_log_odds = (P_STAY / (1.0 - P_STAY)).ln();
        let mut g = vec![0.0; x.len()];
        for l in 0..self.len {
            let row = &x[l * k..(l + 1) * k];
            let mean = self.b + row.iter().zip(&self.w).map(|(a, w)| a * w).sum::<f64>();
            let resid = (self.y[l] - mean) / self.sigma2;
            for j in 0..k {
                let mut gj = resid * self.w[j];
                if j == 0 {
                    gj += first_logit;
                } else {
                    gj += stay_log_odds * (2.0 * row[j - 1] - 1.0);
                }
                if j + 1 < k {
                    gj += stay_log_odds * (2.0 * row[j + 1] - 1.0);
                }
                g[l * k + j] = gj;
            }
        }
        g
    }

    fn flip_delta(&self, x: &BitState, i: usize) -> f64 {
        let k = self.chains;
        let (l, j) = (i / k, i % k);
        let old = x.get(i);
        let new = old ^ 1;
        let mut delta = 0.0;
        if j == 0 {
            delta += log_first(new) - log_first(old);
        } else {
            let prev = x.get(i - 1);
            delta += log_trans(prev, new) - log_trans(prev, old);
        }
        if j + 1 < k {
            let next = x.get(i + 1);
            delta += log_trans(new, next) - log_trans(old, next);
        }
        let mean = self.emission_mean(x, l);
        let shifted = mean + (new as f64 - old as f64) * self.w[j];
        let r_old = self.y[l] - mean;
        let r_new = self.y[l] - shifted;
        delta - (r_new * r_new - r_old * r_old) / (2.0 * self.sigma2)
    }
}

/// Random FHMM posterior: `w, b ~ N(0, 1)`, latent bits from the prior,
/// `y ~ p(y | x)` with `σ²` of 2 (C1), 1 (C2) or 0.5 (C3).
pub fn make_fhmm(len: usize, chains: usize, config: ConfigLabel, seed: u64) -> Result<FhmmModel> {
    if len == 0 || chains == 0 {
        return Err(Error::InvalidParameter("L and K must be at least 1".into()));
    }
    let sigma2: f64 = match config {
        ConfigLabel::C1 => 2.0,
        ConfigLabel::C2 => 1.0,
        ConfigLabel::C3 => 0.5,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w: Vec<f64> = (0..chains).map(|_| rng.sample(StandardNormal)).collect();
    let b: f64 = rng.sample(StandardNormal);
    let mut bits = Vec::with_capacity(len * chains);
    for _ in 0..len {
        let mut prev = rng.random_bool(P_FIRST_ON) as u8;
        bits.push(prev);
        for _ in 1..chains {
            let cur = if rng.random_bool(P_STAY) { prev } else { prev ^ 1 };
            bits.push(cur);
            prev = cur;
        }
    }
    let latent = BitState::from_bits(bits)?;
    let sd = sigma2.sqrt();
    let mut model = FhmmModel::new(len, chains, w, b, sigma2, vec![0.0; len])?;
    let y: Vec<f64> = (0..len)
        .map(|l| {
            let noise: f64 = rng.sample(StandardNormal);
            model.emission_mean(&latent, l) + sd * noise
        })
        .collect();
    model.y = y;
    model.latent = Some(latent);
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::test_util::{check_model_invariants, finite_diff_grad};

    #[test]
    fn sizes_and_configs() {
        let m = make_fhmm(200, 5, ConfigLabel::C2, 1).unwrap();
        assert_eq!(m.dim(), 1000);
        assert_eq!(m.sigma2(), 1.0);
        assert_eq!(make_fhmm(3, 2, ConfigLabel::C1, 0).unwrap().sigma2(), 2.0);
        assert_eq!(make_fhmm(3, 2, ConfigLabel::C3, 0).unwrap().sigma2(), 0.5);
        assert_eq!(m, make_fhmm(200, 5, ConfigLabel::C2, 1).unwrap());
        assert!(make_fhmm(0, 5, ConfigLabel::C1, 0).is_err());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(FhmmModel::new(2, 2, vec![0.0; 2], 0.0, 0.0, vec![0.0; 2]).is_err());
        assert!(FhmmModel::new(2, 2, vec![0.0; 3], 0.0, 1.0, vec![0.0; 2]).is_err());
    }

    #[test]
    fn prior_only_matches_hand_computation() {
        // w = 0 makes the likelihood constant in x.
        let m = FhmmModel::new(1, 3, vec![0.0; 3], 0.0, 1.0, vec![0.0]).unwrap();
        let x = BitState::from_bits(vec![1, 1, 0]).unwrap();
        let expected = 0.1f64.ln() + 0.8f64.ln() + 0.2f64.ln();
        assert!((m.log_prob(&x) - expected).abs() < 1e-12);
    }

    #[test]
    fn flip_deltas_are_consistent() {
        check_model_invariants(&make_fhmm(2, 3, ConfigLabel::C3, 5).unwrap(), 0, 0);
        check_model_invariants(&make_fhmm(30, 5, ConfigLabel::C2, 6).unwrap(), 20, 1);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let m = make_fhmm(20, 5, ConfigLabel::C3, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..5 {
            let x = BitState::random(100, &mut rng).to_f64();
            let fd = finite_diff_grad(&m, &x, 1e-5);
            for (a, b) in fd.iter().zip(m.relaxed_grad(&x)) {
                assert!((a - b).abs() < 1e-5);
            }
        }
    }
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{BitState, ConfigLabel, TargetModel};
use crate::error::{Error, Result};
use crate::samplers::WeightFunction;

/// Independent product measure `π(x) = ∏ p_i^{x_i} (1 − p_i)^{1 − x_i}`.
#[derive(Clone, Debug, PartialEq)]
pub struct BernoulliModel {
    p: Vec<f64>,
    log_p: Vec<f64>,
    log_q: Vec<f64>,
    logit: Vec<f64>,
    // Per-site log weights indexed [site][bit] for each weight function.
    sqrt_table: Vec<[f64; 2]>,
    barker_table: Vec<[f64; 2]>,
}

impl BernoulliModel {
    /// Builds the model; with `epsilon` set, every site must satisfy
    /// `ε < p_i ∧ (1 − p_i)` for `ε ∈ (0, 1/4)`.
    pub fn new(p: Vec<f64>, epsilon: Option<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::InvalidParameter("empty probability vector".into()));
        }
        if let Some(&bad) = p.iter().find(|&&pi| !(pi > 0.0 && pi < 1.0)) {
            return Err(Error::InvalidParameter(format!(
                "site probability {bad} outside (0, 1)"
            )));
        }
        if let Some(eps) = epsilon {
            if !(eps > 0.0 && eps < 0.25) {
                return Err(Error::InvalidParameter(format!("epsilon {eps} outside (0, 1/4)")));
            }
            if let Some(&bad) = p.iter().find(|&&pi| pi.min(1.0 - pi) <= eps) {
                return Err(Error::InvalidParameter(format!(
                    "site probability {bad} violates epsilon bound {eps}"
                )));
            }
        }
        let log_p: Vec<f64> = p.iter().map(|pi| pi.ln()).collect();
        let log_q: Vec<f64> = p.iter().map(|pi| (-pi).ln_1p()).collect();
        let logit: Vec<f64> = log_p.iter().zip(&log_q).map(|(a, b)| a - b).collect();
        let table = |w: WeightFunction| -> Vec<[f64; 2]> {
            // Flipping a 0 gains +logit, flipping a 1 gains −logit.
            logit.iter().map(|&l| [w.log_g(l), w.log_g(-l)]).collect()
        };
        let sqrt_table = table(WeightFunction::Sqrt);
        let barker_table = table(WeightFunction::Barker);
        Ok(BernoulliModel {
            p,
            log_p,
            log_q,
            logit,
            sqrt_table,
            barker_table,
        })
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    /// The model repeated `times` times (dimension `times · N`).
    pub fn repeated(&self, times: usize) -> Self {
        let p = self.p.repeat(times);
        BernoulliModel::new(p, None).expect("already validated")
    }
}

impl TargetModel for BernoulliModel {
    fn name(&self) -> &'static str {
        "bernoulli"
    }

    fn dim(&self) -> usize {
        self.p.len()
    }

    fn relaxed_log_prob(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.log_p.iter().zip(&self.log_q))
            .map(|(&xi, (lp, lq))| xi * lp + (1.0 - xi) * lq)
            .sum()
    }

    fn relaxed_grad(&self, _x: &[f64]) -> Vec<f64> {
        self.logit.clone()
    }

    fn log_prob(&self, x: &BitState) -> f64 {
        x.as_slice()
            .iter()
            .enumerate()
            .map(|(i, &b)| if b == 1 { self.log_p[i] } else { self.log_q[i] })
            .sum()
    }

    #[inline]
    fn flip_delta(&self, x: &BitState, i: usize) -> f64 {
        if x.get(i) == 0 {
            self.logit[i]
        } else {
            -self.logit[i]
        }
    }

    fn flip_log_weights(&self, x: &BitState, weight: WeightFunction) -> Vec<f64> {
        let table = match weight {
            WeightFunction::Sqrt => &self.sqrt_table,
            WeightFunction::Barker => &self.barker_table,
        };
        x.as_slice().iter().zip(table).map(|(&b, t)| t[b as usize]).collect()
    }

    /// The gradient is exact for a product target, so this is the table.
    fn gradient_log_weights(&self, x: &BitState, weight: WeightFunction) -> Vec<f64> {
        self.flip_log_weights(x, weight)
    }

    fn marginals(&self) -> Option<&[f64]> {
        Some(&self.p)
    }
}

/// Site probabilities drawn uniformly from the configuration's interval:
/// C1 `[0.25, 0.75]`, C2 `[0.15, 0.85]`, C3 `[0.05, 0.95]`.
pub fn make_bernoulli(n: usize, config: ConfigLabel, seed: u64) -> Result<BernoulliModel> {
    if n == 0 {
        return Err(Error::InvalidParameter("N must be at least 1".into()));
    }
    let (lo, hi) = match config {
        ConfigLabel::C1 => (0.25, 0.75),
        ConfigLabel::C2 => (0.15, 0.85),
        ConfigLabel::C3 => (0.05, 0.95),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = (0..n).map(|_| rng.random_range(lo..=hi)).collect();
    BernoulliModel::new(p, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::test_util::{check_model_invariants, finite_diff_grad};

    #[test]
    fn uniform_log_prob() {
        let m = BernoulliModel::new(vec![0.5; 7], None).unwrap();
        let x = BitState::from_bits(vec![1, 0, 1, 1, 0, 0, 1]).unwrap();
        assert!((m.log_prob(&x) - 7.0 * 0.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn two_site_log_prob() {
        let m = BernoulliModel::new(vec![0.8, 0.3], None).unwrap();
        let x = BitState::from_bits(vec![1, 0]).unwrap();
        assert!((m.log_prob(&x) - (0.8f64.ln() + 0.7f64.ln())).abs() < 1e-12);
        assert!((m.relaxed_log_prob(&x.to_f64()) - m.log_prob(&x)).abs() < 1e-12);
    }

    #[test]
    fn flip_delta_is_log_odds() {
        let m = BernoulliModel::new(vec![0.8], None).unwrap();
        assert!((m.flip_delta(&BitState::zeros(1), 0) - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn gradient_is_exact_for_product_targets() {
        let m = make_bernoulli(50, ConfigLabel::C3, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let x = BitState::random(50, &mut rng);
            let g = m.grad_log_prob(&x);
            for i in 0..50 {
                let approx = (1.0 - 2.0 * x.get(i) as f64) * g[i];
                assert!((approx - m.flip_delta(&x, i)).abs() < 1e-12);
            }
        }
        let half = BernoulliModel::new(vec![0.5; 3], None).unwrap();
        assert_eq!(half.grad_log_prob(&BitState::zeros(3)), vec![0.0; 3]);
        let fd = finite_diff_grad(&m, &vec![0.5; 50], 1e-5);
        for (a, b) in fd.iter().zip(m.grad_log_prob(&BitState::zeros(50))) {
            assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn invariants_hold() {
        check_model_invariants(&make_bernoulli(5, ConfigLabel::C2, 1).unwrap(), 0, 0);
        check_model_invariants(&make_bernoulli(40, ConfigLabel::C3, 2).unwrap(), 20, 5);
    }

    #[test]
    fn table_weights_match_direct_evaluation() {
        let m = make_bernoulli(30, ConfigLabel::C3, 4).unwrap();
        let x = BitState::random(30, &mut ChaCha8Rng::seed_from_u64(1));
        for w in [WeightFunction::Sqrt, WeightFunction::Barker] {
            let table = m.flip_log_weights(&x, w);
            for i in 0..30 {
                assert_eq!(table[i], w.log_g(m.flip_delta(&x, i)));
            }
        }
    }

    #[test]
    fn configs_respect_intervals_and_seed() {
        for (cfg, lo, hi) in [
            (ConfigLabel::C1, 0.25, 0.75),
            (ConfigLabel::C2, 0.15, 0.85),
            (ConfigLabel::C3, 0.05, 0.95),
        ] {
            let m = make_bernoulli(1000, cfg, 17).unwrap();
            assert!(m.probabilities().iter().all(|&p| (lo..=hi).contains(&p)));
        }
        assert_eq!(
            make_bernoulli(20, ConfigLabel::C2, 5).unwrap(),
            make_bernoulli(20, ConfigLabel::C2, 5).unwrap()
        );
        assert!(make_bernoulli(0, ConfigLabel::C1, 0).is_err());
    }

    #[test]
    fn epsilon_bound_is_enforced() {
        assert!(BernoulliModel::new(vec![0.3, 0.9], Some(0.15)).is_err());
        assert!(BernoulliModel::new(vec![0.3, 0.8], Some(0.15)).is_ok());
        assert!(BernoulliModel::new(vec![0.5], Some(0.3)).is_err());
        assert!(BernoulliModel::new(vec![1.0], None).is_err());
    }
}

//! Per-chain accumulation of acceptance rate, expected jump distance and
//! effective sample size.

use crate::error::{Error, Result};
use crate::samplers::ProposalOutcome;

pub const MIN_ESS_LEN: usize = 10;

/// Running statistics of one chain after burn-in.
#[derive(Clone, Debug, Default)]
pub struct ChainStats {
    n_steps: usize,
    accept_sum: f64,
    ejd_rb_sum: f64,
    ejd_realized_sum: f64,
    diff_sum: f64,
    diff_sq_sum: f64,
    max_jump: usize,
    trace: Vec<f64>,
    r_history: Vec<usize>,
}

impl ChainStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(steps: usize) -> Self {
        ChainStats {
            trace: Vec::with_capacity(steps),
            r_history: Vec::with_capacity(steps),
            ..Self::default()
        }
    }

    /// Adds one step; `state_logp` is `log π̃` of the state after the decision.
    pub fn record(&mut self, outcome: &ProposalOutcome, state_logp: f64) {
        let jump = outcome.jump_distance as f64;
        let rb = outcome.accept_prob * jump;
        let realized = if outcome.accepted { jump } else { 0.0 };
        self.n_steps += 1;
        self.accept_sum += outcome.accept_prob;
        self.ejd_rb_sum += rb;
        self.ejd_realized_sum += realized;
        self.diff_sum += rb - realized;
        self.diff_sq_sum += (rb - realized).powi(2);
        if outcome.accepted {
            self.max_jump = self.max_jump.max(outcome.jump_distance);
        }
        self.trace.push(state_logp);
        self.r_history.push(outcome.indices.len());
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    fn mean(&self, sum: f64) -> f64 {
        if self.n_steps == 0 {
            0.0
        } else {
            sum / self.n_steps as f64
        }
    }

    pub fn mean_accept(&self) -> f64 {
        self.mean(self.accept_sum)
    }

    /// Rao-Blackwellized EJD, mean of `A · jump`.
    pub fn ejd_rb(&self) -> f64 {
        self.mean(self.ejd_rb_sum)
    }

    /// Mean realized Hamming jump.
    pub fn ejd_realized(&self) -> f64 {
        self.mean(self.ejd_realized_sum)
    }

    /// Standard error of `ejd_rb − ejd_realized`. The per-step differences
    /// are martingale increments, so no autocorrelation correction applies.
    pub fn ejd_difference_se(&self) -> f64 {
        if self.n_steps < 2 {
            return f64::INFINITY;
        }
        let n = self.n_steps as f64;
        let mean = self.diff_sum / n;
        ((self.diff_sq_sum / n - mean * mean).max(0.0) / n).sqrt()
    }

    pub fn max_jump(&self) -> usize {
        self.max_jump
    }

    pub fn trace(&self) -> &[f64] {
        &self.trace
    }

    pub fn r_history(&self) -> &[usize] {
        &self.r_history
    }

    pub fn mean_r(&self) -> f64 {
        if self.r_history.is_empty() {
            return 0.0;
        }
        self.r_history.iter().sum::<usize>() as f64 / self.r_history.len() as f64
    }

    pub fn ess(&self) -> Result<f64> {
        ess(&self.trace)
    }
}

/// Statistics pooled over the chains of one setting.
#[derive(Clone, Debug, PartialEq)]
pub struct MergedStats {
    pub chains: usize,
    pub n_steps: usize,
    pub mean_accept: f64,
    pub ejd_rb: f64,
    pub ejd_realized: f64,
    pub mean_r: f64,
    /// Mean of the per-chain ESS values.
    pub ess: f64,
}

/// Pools chains: means weighted by step counts, ESS averaged per chain.
pub fn merge(stats: &[ChainStats]) -> Result<MergedStats> {
    if stats.is_empty() {
        return Err(Error::InvalidParameter("no chains to merge".into()));
    }
    let n: usize = stats.iter().map(|s| s.n_steps).sum();
    let weighted = |f: fn(&ChainStats) -> f64| -> f64 {
        if n == 0 {
            return 0.0;
        }
        stats.iter().map(|s| f(s) * s.n_steps as f64).sum::<f64>() / n as f64
    };
    let mut ess_sum = 0.0;
    for s in stats {
        ess_sum += s.ess()?;
    }
    Ok(MergedStats {
        chains: stats.len(),
        n_steps: n,
        mean_accept: weighted(ChainStats::mean_accept),
        ejd_rb: weighted(ChainStats::ejd_rb),
        ejd_realized: weighted(ChainStats::ejd_realized),
        mean_r: weighted(ChainStats::mean_r),
        ess: ess_sum / stats.len() as f64,
    })
}

fn autocovariance(centered: &[f64], lag: usize) -> f64 {
    let n = centered.len();
    centered[..n - lag]
        .iter()
        .zip(&centered[lag..])
        .map(|(a, b)| a * b)
        .sum::<f64>()
        / n as f64
}

/// Effective sample size with the initial positive sequence truncation,
/// clipped to `[1, n]`.
pub fn ess(trace: &[f64]) -> Result<f64> {
    let n = trace.len();
    if n < MIN_ESS_LEN {
        return Err(Error::TraceTooShort {
            len: n,
            min: MIN_ESS_LEN,
        });
    }
    let mean = trace.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = trace.iter().map(|v| v - mean).collect();
    let c0 = autocovariance(&centered, 0);
    if !c0.is_finite() || c0 <= (1e-12 * mean.abs()).powi(2) {
        return Ok(1.0);
    }
    // tau = -1 + 2 * sum of positive pair sums (rho_{2m} + rho_{2m+1})
    let mut tau = -1.0;
    let mut m = 0;
    while 2 * m + 1 < n {
        let pair = (autocovariance(&centered, 2 * m) + autocovariance(&centered, 2 * m + 1)) / c0;
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        m += 1;
    }
    Ok((n as f64 / tau).clamp(1.0, n as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{make_bernoulli, BernoulliModel, BitState, ConfigLabel};
    use crate::samplers::{Chain, LbpConfig, SamplerKind, WeightFunction};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn outcome(accept_prob: f64, accepted: bool, r: usize) -> ProposalOutcome {
        ProposalOutcome {
            indices: (0..r).collect(),
            proposal: BitState::zeros(r),
            accept_prob,
            accepted,
            jump_distance: r,
            log_ratio: 0.0,
        }
    }

    #[test]
    fn always_rejecting_has_zero_realized_jump() {
        let mut s = ChainStats::new();
        for _ in 0..50 {
            s.record(&outcome(0.3, false, 2), 0.0);
        }
        assert_eq!(s.ejd_realized(), 0.0);
        assert!((s.ejd_rb() - 0.6).abs() < 1e-12);
        assert!((s.mean_accept() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn full_acceptance_at_scale_three() {
        let mut s = ChainStats::new();
        for _ in 0..20 {
            s.record(&outcome(1.0, true, 3), 1.0);
        }
        assert_eq!(s.ejd_rb(), 3.0);
        assert_eq!(s.ejd_realized(), 3.0);
        assert_eq!(s.max_jump(), 3);
        assert_eq!(s.trace().len(), s.n_steps());
        assert_eq!(s.mean_r(), 3.0);
    }

    #[test]
    fn merge_weights_by_steps() {
        let mut a = ChainStats::new();
        let mut b = ChainStats::new();
        for k in 0..10 {
            a.record(&outcome(1.0, true, 1), k as f64);
        }
        for k in 0..30 {
            b.record(&outcome(0.0, false, 1), (k % 3) as f64);
        }
        let m = merge(&[a.clone(), b]).unwrap();
        assert_eq!(m.chains, 2);
        assert_eq!(m.n_steps, 40);
        assert!((m.mean_accept - 0.25).abs() < 1e-12);
        assert!(merge(&[]).is_err());
    }

    #[test]
    fn ess_of_iid_normals() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 10_000;
        let trace: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let e = ess(&trace).unwrap();
        assert!(e >= 0.9 * n as f64 && e <= 1.1 * n as f64, "ess {e}");
    }

    #[test]
    fn ess_of_constant_trace_is_one() {
        assert_eq!(ess(&[2.5; 100]).unwrap(), 1.0);
    }

    #[test]
    fn ess_of_ar1() {
        let phi: f64 = 0.9;
        let n = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut x = 0.0;
        let trace: Vec<f64> = (0..n)
            .map(|_| {
                x = phi * x + (1.0 - phi * phi).sqrt() * rng.sample::<f64, _>(StandardNormal);
                x
            })
            .collect();
        let ratio = ess(&trace).unwrap() / n as f64;
        let expected = (1.0 - phi) / (1.0 + phi);
        assert!((ratio - expected).abs() / expected < 0.2, "{ratio} vs {expected}");
    }

    #[test]
    fn ess_rejects_short_trace() {
        assert!(matches!(ess(&[1.0; 9]), Err(Error::TraceTooShort { len: 9, min: 10 })));
    }

    proptest! {
        #[test]
        fn ess_affine_invariant(seed in 0u64..1000, shift in -100.0f64..100.0, scale in 0.01f64..100.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut x = 0.0;
            let trace: Vec<f64> = (0..500).map(|_| { x = 0.5 * x + rng.random::<f64>(); x }).collect();
            let moved: Vec<f64> = trace.iter().map(|v| shift + scale * v).collect();
            let a = ess(&trace).unwrap();
            let b = ess(&moved).unwrap();
            prop_assert!((a - b).abs() <= 1e-6 * a);
        }

        #[test]
        fn ess_within_bounds(values in proptest::collection::vec(-10.0f64..10.0, 10..300)) {
            let e = ess(&values).unwrap();
            prop_assert!(e >= 1.0 && e <= values.len() as f64);
        }
    }

    #[test]
    fn rwm_on_uniform_target_always_accepts() {
        let m = BernoulliModel::new(vec![0.5; 12], None).unwrap();
        let mut chain = Chain::new(&m, SamplerKind::Rwm, BitState::zeros(12)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut s = ChainStats::new();
        for _ in 0..1000 {
            let o = chain.step(1, &mut rng).unwrap();
            s.record(&o, chain.log_prob());
        }
        assert_eq!(s.mean_accept(), 1.0);
    }

    #[test]
    fn ejd_estimators_agree() {
        let m = make_bernoulli(100, ConfigLabel::C2, 5).unwrap();
        let kind = SamplerKind::Lbp(LbpConfig::new(WeightFunction::Barker));
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut chain = Chain::new(&m, kind, BitState::random(100, &mut rng)).unwrap();
        let mut s = ChainStats::with_capacity(100_000);
        for _ in 0..100_000 {
            let o = chain.step(8, &mut rng).unwrap();
            s.record(&o, chain.log_prob());
        }
        let gap = (s.ejd_rb() - s.ejd_realized()).abs();
        assert!(
            gap < 3.0 * s.ejd_difference_se(),
            "gap {gap} se {}",
            s.ejd_difference_se()
        );
        assert!(s.ejd_realized() <= s.max_jump() as f64);
        assert!((0.0..=1.0).contains(&s.mean_accept()));
    }
}

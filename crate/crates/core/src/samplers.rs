//! One Metropolis-Hastings step of the locally balanced proposal (LBP-R,
//! with or without replacement) and of random-walk Metropolis (RWM-R).
//!
//! All probabilities are handled in log space. Proposal weights are kept as
//! `log w_j(x) = log g(exp(Δ_j))`, where `Δ_j` is the exact flip delta of
//! site `j` or its gradient estimate `(1 − 2x_j)(∇ log π(x))_j`.
//!
//! The LBP acceptance probability treats the ordered index sequence `u` as
//! an auxiliary variable: the forward path draws `u_1, …, u_R` at `x`, the
//! reverse path draws `u_R, …, u_1` at `y`, and the reverse weights are
//! always recomputed at `y`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::models::{check_state, softplus, BitState, TargetModel};

/// A locally balanced weight function, `g(t) = t · g(1/t)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum WeightFunction {
    /// `g(t) = √t`
    Sqrt,
    /// `g(t) = t / (t + 1)`
    Barker,
}

impl WeightFunction {
    /// `log g(t)` from `log t`.
    #[inline]
    pub fn log_g(self, log_t: f64) -> f64 {
        match self {
            WeightFunction::Sqrt => 0.5 * log_t,
            WeightFunction::Barker => -softplus(-log_t),
        }
    }

    pub fn g(self, t: f64) -> f64 {
        self.log_g(t.ln()).exp()
    }
}

impl fmt::Display for WeightFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WeightFunction::Sqrt => "sqrt",
            WeightFunction::Barker => "barker",
        })
    }
}

impl FromStr for WeightFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sqrt" => Ok(WeightFunction::Sqrt),
            "barker" => Ok(WeightFunction::Barker),
            other => Err(Error::InvalidParameter(format!("unknown weight function `{other}`"))),
        }
    }
}

/// Options of the locally balanced proposal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LbpConfig {
    pub weight: WeightFunction,
    /// Draw indices with replacement (no pop from the candidate set).
    pub replacement: bool,
    /// Estimate flip deltas from the gradient instead of computing them.
    pub gradient: bool,
}

impl LbpConfig {
    pub fn new(weight: WeightFunction) -> Self {
        LbpConfig {
            weight,
            replacement: false,
            gradient: false,
        }
    }

    pub fn with_replacement(mut self, replacement: bool) -> Self {
        self.replacement = replacement;
        self
    }

    pub fn with_gradient(mut self, gradient: bool) -> Self {
        self.gradient = gradient;
        self
    }
}

/// Which proposal a chain uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SamplerKind {
    Rwm,
    Lbp(LbpConfig),
}

impl SamplerKind {
    pub fn short_name(&self) -> String {
        match self {
            SamplerKind::Rwm => "rwm".into(),
            SamplerKind::Lbp(c) => {
                let base = if c.replacement { "gwg" } else { "lbp" };
                format!("{base}-{}", c.weight)
            }
        }
    }

    pub fn is_lbp(&self) -> bool {
        matches!(self, SamplerKind::Lbp(_))
    }
}

/// Result of proposing (and testing) one M-H move.
#[derive(Clone, Debug, PartialEq)]
pub struct ProposalOutcome {
    /// Chosen site indices in selection order.
    pub indices: Vec<usize>,
    pub proposal: BitState,
    pub accept_prob: f64,
    pub accepted: bool,
    /// Hamming distance between the current state and the proposal.
    pub jump_distance: usize,
    /// `log π̃(y) − log π̃(x)`.
    pub log_ratio: f64,
}

/// Log proposal weights `log w_j(x)` for every site.
pub fn compute_weights<M: TargetModel + ?Sized>(
    model: &M,
    x: &BitState,
    weight: WeightFunction,
    gradient: bool,
) -> Vec<f64> {
    if gradient {
        model.gradient_log_weights(x, weight)
    } else {
        model.flip_log_weights(x, weight)
    }
}

fn max_of(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Log probability of drawing the ordered sequence `indices` from weights
/// `log_weights`: sequentially without replacement (each draw normalized
/// over the sites not yet drawn) or i.i.d. with replacement.
pub fn sequence_log_prob(log_weights: &[f64], indices: &[usize], replacement: bool) -> f64 {
    let m = max_of(log_weights);
    if replacement {
        let total: f64 = log_weights.iter().map(|&lw| (lw - m).exp()).sum();
        let picked: f64 = indices.iter().map(|&u| log_weights[u] - m).sum();
        return picked - indices.len() as f64 * total.ln();
    }
    let mut chosen = vec![false; log_weights.len()];
    for &u in indices {
        debug_assert!(!chosen[u], "duplicate index without replacement");
        chosen[u] = true;
    }
    // Sum over the never-drawn sites, then add drawn sites back in reverse.
    let rest: f64 = log_weights
        .iter()
        .zip(&chosen)
        .filter(|(_, &c)| !c)
        .map(|(&lw, _)| (lw - m).exp())
        .sum();
    let mut suffix = 0.0;
    let mut acc = 0.0;
    for &u in indices.iter().rev() {
        suffix += (log_weights[u] - m).exp();
        acc += (log_weights[u] - m) - (rest + suffix).ln();
    }
    acc
}

/// `log A(x, y, u)` before truncation at zero: target ratio plus reverse
/// path (at `y`, order reversed) minus forward path (at `x`).
pub fn lbp_log_acceptance(
    log_weights_x: &[f64],
    log_weights_y: &[f64],
    indices: &[usize],
    replacement: bool,
    log_ratio: f64,
) -> f64 {
    let reversed: Vec<usize> = indices.iter().rev().copied().collect();
    log_ratio + sequence_log_prob(log_weights_y, &reversed, replacement)
        - sequence_log_prob(log_weights_x, indices, replacement)
}

/// `min(1, e^{log_a})`, with NaN mapped to rejection.
#[inline]
pub fn accept_prob_from_log(log_a: f64) -> f64 {
    if log_a >= 0.0 {
        1.0
    } else if log_a.is_nan() {
        0.0
    } else {
        log_a.exp()
    }
}

#[cfg(test)]
fn scaled_weights(log_weights: &[f64]) -> Vec<f64> {
    let m = max_of(log_weights);
    log_weights.iter().map(|&lw| (lw - m).exp()).collect()
}

fn cumulative(weights: &[f64]) -> Vec<f64> {
    weights
        .iter()
        .scan(0.0, |acc, &w| {
            *acc += w;
            Some(*acc)
        })
        .collect()
}

#[inline]
fn draw_categorical<R: Rng + ?Sized>(cum: &[f64], rng: &mut R) -> usize {
    let total = *cum.last().expect("non-empty");
    let target = rng.random::<f64>() * total;
    cum.partition_point(|&c| c <= target).min(cum.len() - 1)
}

/// Exponential-key ranking: the first `k` candidates ordered by
/// `ln(U)/w` have the law of `k` sequential weighted draws without
/// replacement.
fn weighted_keys_top_k<R: Rng + ?Sized>(weights: &[f64], excluded: &[bool], k: usize, rng: &mut R) -> Vec<usize> {
    let mut keyed: Vec<(f64, usize)> = weights
        .iter()
        .enumerate()
        .filter(|(j, _)| !excluded[*j])
        .map(|(j, &w)| {
            let u: f64 = 1.0 - rng.random::<f64>();
            let key = if w > 0.0 { u.ln() / w } else { f64::NEG_INFINITY };
            (key, j)
        })
        .collect();
    let by_key_desc = |a: &(f64, usize), b: &(f64, usize)| b.0.total_cmp(&a.0);
    if k < keyed.len() {
        keyed.select_nth_unstable_by(k, by_key_desc);
        keyed.truncate(k);
    }
    keyed.sort_unstable_by(by_key_desc);
    keyed.into_iter().map(|(_, j)| j).collect()
}

/// Proposal weights at one state, kept in log and shifted linear form
/// with cumulative sums so that selection and path probabilities cost
/// `O(R log N)` after an `O(N)` setup.
#[derive(Clone, Debug)]
pub struct SiteWeights {
    log: Vec<f64>,
    shift: f64,
    lin: Vec<f64>,
    cum: Vec<f64>,
}

impl SiteWeights {
    pub fn from_log(log: Vec<f64>) -> Self {
        let shift = max_of(&log);
        let lin = log.iter().map(|&lw| (lw - shift).exp()).collect::<Vec<_>>();
        let cum = cumulative(&lin);
        SiteWeights { log, shift, lin, cum }
    }

    /// Like [`SiteWeights::from_log`], keeping the shift of `prev` when it is
    /// numerically safe and reusing its linear weights wherever the log
    /// weight is unchanged.
    pub fn from_log_reusing(log: Vec<f64>, prev: &SiteWeights) -> Self {
        let max = max_of(&log);
        if log.len() != prev.len() || !max.is_finite() || (max - prev.shift).abs() > 200.0 {
            return Self::from_log(log);
        }
        let shift = prev.shift;
        let lin = log
            .iter()
            .zip(&prev.log)
            .zip(&prev.lin)
            .map(|((&lw, &old), &w)| if lw == old { w } else { (lw - shift).exp() })
            .collect::<Vec<_>>();
        let cum = cumulative(&lin);
        SiteWeights { log, shift, lin, cum }
    }

    pub fn log(&self) -> &[f64] {
        &self.log
    }

    pub fn len(&self) -> usize {
        self.log.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log.is_empty()
    }

    fn total(&self) -> f64 {
        self.cum.last().copied().unwrap_or(0.0)
    }

    /// Draws `r` distinct sites sequentially with `P(u_r = j) ∝ w_j` over the
    /// remaining candidates.
    ///
    /// Each draw first tries a few categorical draws over all sites, keeping
    /// the first not yet chosen (an exact draw from the conditional law). If
    /// those all hit chosen sites, the remaining draws are completed by
    /// exponential keys over the unchosen sites.
    pub fn select_distinct<R: Rng + ?Sized>(&self, r: usize, rng: &mut R) -> Vec<usize> {
        let n = self.len();
        assert!(r <= n, "cannot draw {r} distinct sites out of {n}");
        let mut chosen = vec![false; n];
        if 2 * r > n {
            return weighted_keys_top_k(&self.lin, &chosen, r, rng);
        }
        let mut out = Vec::with_capacity(r);
        while out.len() < r {
            let hit = (0..REJECTION_TRIES)
                .map(|_| draw_categorical(&self.cum, rng))
                .find(|&j| !chosen[j]);
            match hit {
                Some(j) => {
                    chosen[j] = true;
                    out.push(j);
                }
                None => {
                    let rest = weighted_keys_top_k(&self.lin, &chosen, r - out.len(), rng);
                    out.extend(rest);
                }
            }
        }
        out
    }

    /// Draws `r` sites i.i.d. with `P(u = j) ∝ w_j`.
    pub fn select_iid<R: Rng + ?Sized>(&self, r: usize, rng: &mut R) -> Vec<usize> {
        (0..r).map(|_| draw_categorical(&self.cum, rng)).collect()
    }

    /// Same value as [`sequence_log_prob`] on [`SiteWeights::log`].
    pub fn sequence_log_prob(&self, indices: &[usize], replacement: bool) -> f64 {
        let total = self.total();
        if replacement {
            let picked: f64 = indices.iter().map(|&u| self.log[u] - self.shift).sum();
            return picked - indices.len() as f64 * total.ln();
        }
        let drawn: f64 = indices.iter().map(|&u| self.lin[u]).sum();
        let rest = if drawn <= 0.5 * total {
            total - drawn
        } else {
            let mut chosen = vec![false; self.len()];
            indices.iter().for_each(|&u| chosen[u] = true);
            self.lin.iter().zip(&chosen).filter(|(_, &c)| !c).map(|(&w, _)| w).sum()
        };
        let mut suffix = 0.0;
        let mut acc = 0.0;
        for &u in indices.iter().rev() {
            suffix += self.lin[u];
            acc += (self.log[u] - self.shift) - (rest + suffix).ln();
        }
        acc
    }
}

const REJECTION_TRIES: usize = 4;

/// Draws `r` distinct sites sequentially with `P(u_r = j) ∝ w_j` over the
/// remaining candidates.
pub fn select_without_replacement<R: Rng + ?Sized>(log_weights: &[f64], r: usize, rng: &mut R) -> Vec<usize> {
    SiteWeights::from_log(log_weights.to_vec()).select_distinct(r, rng)
}

/// Draws `r` sites i.i.d. with `P(u = j) ∝ w_j`.
pub fn select_with_replacement<R: Rng + ?Sized>(log_weights: &[f64], r: usize, rng: &mut R) -> Vec<usize> {
    SiteWeights::from_log(log_weights.to_vec()).select_iid(r, rng)
}

fn check_scale(r: usize, n: usize, replacement: bool) -> Result<()> {
    if r == 0 || (!replacement && r > n) {
        return Err(Error::ScaleOutOfRange { scale: r, max: n });
    }
    Ok(())
}

/// One LBP-R step given the weights at `x`; also returns the weights at
/// the proposal so a chain can reuse them after acceptance.
pub fn lbp_step_with_weights<M: TargetModel + ?Sized, R: Rng + ?Sized>(
    model: &M,
    x: &BitState,
    weights_x: &SiteWeights,
    r: usize,
    config: LbpConfig,
    rng: &mut R,
) -> Result<(ProposalOutcome, SiteWeights)> {
    check_state(model, x)?;
    check_scale(r, model.dim(), config.replacement)?;
    if weights_x.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: weights_x.len(),
        });
    }
    let indices = if config.replacement {
        weights_x.select_iid(r, rng)
    } else {
        weights_x.select_distinct(r, rng)
    };
    let proposal = x.flipped(&indices);
    let log_ratio = model.log_ratio(x, &indices);
    let weights_y = SiteWeights::from_log_reusing(
        compute_weights(model, &proposal, config.weight, config.gradient),
        weights_x,
    );
    let reversed: Vec<usize> = indices.iter().rev().copied().collect();
    let log_a = log_ratio + weights_y.sequence_log_prob(&reversed, config.replacement)
        - weights_x.sequence_log_prob(&indices, config.replacement);
    let accept_prob = accept_prob_from_log(log_a);
    let accepted = rng.random::<f64>() < accept_prob;
    let jump_distance = if config.replacement {
        x.hamming(&proposal)
    } else {
        indices.len()
    };
    Ok((
        ProposalOutcome {
            indices,
            proposal,
            accept_prob,
            accepted,
            jump_distance,
            log_ratio,
        },
        weights_y,
    ))
}

/// One LBP-R step from `x`.
pub fn lbp_step<M: TargetModel + ?Sized, R: Rng + ?Sized>(
    model: &M,
    x: &BitState,
    r: usize,
    config: LbpConfig,
    rng: &mut R,
) -> Result<ProposalOutcome> {
    check_state(model, x)?;
    let weights_x = SiteWeights::from_log(compute_weights(model, x, config.weight, config.gradient));
    lbp_step_with_weights(model, x, &weights_x, r, config, rng).map(|(o, _)| o)
}

/// One RWM-R step: `r` distinct sites chosen uniformly and flipped.
pub fn rwm_step<M: TargetModel + ?Sized, R: Rng + ?Sized>(
    model: &M,
    x: &BitState,
    r: usize,
    rng: &mut R,
) -> Result<ProposalOutcome> {
    check_state(model, x)?;
    let n = model.dim();
    check_scale(r, n, false)?;
    let indices = rand::seq::index::sample(rng, n, r).into_vec();
    let proposal = x.flipped(&indices);
    let log_ratio = model.log_ratio(x, &indices);
    let accept_prob = accept_prob_from_log(log_ratio);
    let accepted = rng.random::<f64>() < accept_prob;
    Ok(ProposalOutcome {
        indices,
        proposal,
        accept_prob,
        accepted,
        jump_distance: r,
        log_ratio,
    })
}

/// A running chain: current state, its log-density and cached weights.
pub struct Chain<'m, M: TargetModel + ?Sized> {
    model: &'m M,
    kind: SamplerKind,
    state: BitState,
    log_prob: f64,
    weights: Option<SiteWeights>,
}

impl<'m, M: TargetModel + ?Sized> Chain<'m, M> {
    pub fn new(model: &'m M, kind: SamplerKind, init: BitState) -> Result<Self> {
        check_state(model, &init)?;
        let log_prob = model.log_prob(&init);
        Ok(Chain {
            model,
            kind,
            state: init,
            log_prob,
            weights: None,
        })
    }

    pub fn state(&self) -> &BitState {
        &self.state
    }

    /// Log-density of the current state, tracked through accepted log ratios.
    pub fn log_prob(&self) -> f64 {
        self.log_prob
    }

    pub fn kind(&self) -> SamplerKind {
        self.kind
    }

    /// Proposes with scale `r`, applies the M-H decision and returns the outcome.
    pub fn step<R: Rng + ?Sized>(&mut self, r: usize, rng: &mut R) -> Result<ProposalOutcome> {
        let outcome = match self.kind {
            SamplerKind::Rwm => rwm_step(self.model, &self.state, r, rng)?,
            SamplerKind::Lbp(config) => {
                let w_x = match self.weights.take() {
                    Some(w) => w,
                    None => {
                        SiteWeights::from_log(compute_weights(self.model, &self.state, config.weight, config.gradient))
                    }
                };
                let (outcome, w_y) = lbp_step_with_weights(self.model, &self.state, &w_x, r, config, rng)?;
                self.weights = Some(if outcome.accepted { w_y } else { w_x });
                outcome
            }
        };
        if outcome.accepted {
            self.state.clone_from(&outcome.proposal);
            self.log_prob += outcome.log_ratio;
        }
        Ok(outcome)
    }
}

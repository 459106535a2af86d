//! Exact transition kernels on `{0,1}^N` for tiny `N`, built by enumerating
//! every proposal path with the samplers' own weight and acceptance code.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::models::{make_bernoulli, make_fhmm, make_ising, BitState, ConfigLabel, RbmModel, TargetModel};
use crate::samplers::{
    accept_prob_from_log, compute_weights, lbp_log_acceptance, sequence_log_prob, Chain, LbpConfig, SamplerKind,
};

pub const MAX_TARGET_DIM: usize = 20;
pub const MAX_KERNEL_DIM: usize = 10;
pub const MAX_KERNEL_SCALE: usize = 3;

/// Upper 0.001 quantile of χ² with 15 degrees of freedom.
pub const CHI2_CRITICAL_DF15_P001: f64 = 37.697;

/// Dense kernel over all `2^N` states with the normalized target.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactKernel {
    pub n_states: usize,
    /// Row-major `n_states × n_states`.
    pub p: Vec<f64>,
    pub pi: Vec<f64>,
}

impl ExactKernel {
    pub fn identity(pi: Vec<f64>) -> Self {
        let n = pi.len();
        let mut p = vec![0.0; n * n];
        for i in 0..n {
            p[i * n + i] = 1.0;
        }
        ExactKernel { n_states: n, p, pi }
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.p[x * self.n_states + y]
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.p[x * self.n_states..(x + 1) * self.n_states]
    }

    /// Largest deviation of a row sum from 1.
    pub fn row_sum_error(&self) -> f64 {
        (0..self.n_states)
            .map(|x| (self.row(x).iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn min_entry(&self) -> f64 {
        self.p.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Normalized target by enumeration.
pub fn exact_target<M: TargetModel + ?Sized>(model: &M) -> Result<Vec<f64>> {
    let n = model.dim();
    if n > MAX_TARGET_DIM {
        return Err(Error::TooLarge(format!(
            "exact target needs N <= {MAX_TARGET_DIM}, got {n}"
        )));
    }
    let logs: Vec<f64> = (0..1usize << n)
        .map(|s| model.log_prob(&BitState::from_index(s, n)))
        .collect();
    let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut pi: Vec<f64> = logs.iter().map(|l| (l - m).exp()).collect();
    let z: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|v| *v /= z);
    Ok(pi)
}

fn permutations(n: usize, r: usize) -> Vec<Vec<usize>> {
    fn go(n: usize, r: usize, cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if cur.len() == r {
            out.push(cur.clone());
            return;
        }
        for i in 0..n {
            if !used[i] {
                used[i] = true;
                cur.push(i);
                go(n, r, cur, used, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(n, r, &mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

fn sequences(n: usize, r: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..r {
        out = out
            .into_iter()
            .flat_map(|s| {
                (0..n).map(move |i| {
                    let mut t = s.clone();
                    t.push(i);
                    t
                })
            })
            .collect();
    }
    out
}

fn subsets(n: usize, r: usize) -> Vec<Vec<usize>> {
    permutations(n, r)
        .into_iter()
        .filter(|u| u.windows(2).all(|w| w[0] < w[1]))
        .collect()
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum ReversePath {
    AtProposal,
    /// Mutation: reuses the forward weights for the reverse path.
    #[cfg_attr(not(test), allow(dead_code))]
    AtCurrent,
}

fn build_kernel<M: TargetModel + ?Sized>(
    model: &M,
    kind: SamplerKind,
    r: usize,
    reverse: ReversePath,
) -> Result<ExactKernel> {
    let n = model.dim();
    if n > MAX_KERNEL_DIM || r > MAX_KERNEL_SCALE {
        return Err(Error::TooLarge(format!(
            "exact kernel needs N <= {MAX_KERNEL_DIM} and R <= {MAX_KERNEL_SCALE}, got N = {n}, R = {r}"
        )));
    }
    let replacement = matches!(kind, SamplerKind::Lbp(c) if c.replacement);
    if r == 0 || (!replacement && r > n) {
        return Err(Error::ScaleOutOfRange { scale: r, max: n });
    }
    let pi = exact_target(model)?;
    let states = 1usize << n;
    let paths = match kind {
        SamplerKind::Rwm => subsets(n, r),
        SamplerKind::Lbp(c) if c.replacement => sequences(n, r),
        SamplerKind::Lbp(_) => permutations(n, r),
    };
    let rows: Vec<Vec<f64>> = (0..states)
        .into_par_iter()
        .map(|s| {
            let x = BitState::from_index(s, n);
            let mut row = vec![0.0; states];
            match kind {
                SamplerKind::Rwm => {
                    let q = 1.0 / paths.len() as f64;
                    for u in &paths {
                        let y = x.flipped(u);
                        row[y.to_index()] += q * accept_prob_from_log(model.log_ratio(&x, u));
                    }
                }
                SamplerKind::Lbp(LbpConfig {
                    weight,
                    replacement,
                    gradient,
                }) => {
                    let lw_x = compute_weights(model, &x, weight, gradient);
                    for u in &paths {
                        let y = x.flipped(u);
                        let q = sequence_log_prob(&lw_x, u, replacement).exp();
                        let lw_y = match reverse {
                            ReversePath::AtProposal => compute_weights(model, &y, weight, gradient),
                            ReversePath::AtCurrent => lw_x.clone(),
                        };
                        let log_a = lbp_log_acceptance(&lw_x, &lw_y, u, replacement, model.log_ratio(&x, u));
                        row[y.to_index()] += q * accept_prob_from_log(log_a);
                    }
                }
            }
            row[s] = 0.0;
            row[s] = 1.0 - row.iter().sum::<f64>();
            row
        })
        .collect();
    Ok(ExactKernel {
        n_states: states,
        p: rows.concat(),
        pi,
    })
}

/// Exact kernel of `kind` at fixed scale `r`.
pub fn exact_kernel<M: TargetModel + ?Sized>(model: &M, kind: SamplerKind, r: usize) -> Result<ExactKernel> {
    build_kernel(model, kind, r, ReversePath::AtProposal)
}

/// `max |π_x P_xy − π_y P_yx|`
pub fn check_detailed_balance(kernel: &ExactKernel) -> f64 {
    let n = kernel.n_states;
    let mut worst: f64 = 0.0;
    for x in 0..n {
        for y in x + 1..n {
            let flow = kernel.pi[x] * kernel.get(x, y) - kernel.pi[y] * kernel.get(y, x);
            worst = worst.max(flow.abs());
        }
    }
    worst
}

/// `max |(πᵀP − πᵀ)_y|`
pub fn check_stationarity(kernel: &ExactKernel) -> f64 {
    let n = kernel.n_states;
    (0..n)
        .map(|y| {
            let mass: f64 = (0..n).map(|x| kernel.pi[x] * kernel.get(x, y)).sum();
            (mass - kernel.pi[y]).abs()
        })
        .fold(0.0, f64::max)
}

/// Small instances of every model family with dimension `n`; Ising only
/// exists on square lattices, so it appears for `n = 4` and `n = 9`.
pub fn toy_models(n: usize, seed: u64) -> Result<Vec<Box<dyn TargetModel>>> {
    let mut out: Vec<Box<dyn TargetModel>> = vec![Box::new(make_bernoulli(n, ConfigLabel::C3, seed)?)];
    let side = (n as f64).sqrt().round() as usize;
    if side >= 2 && side * side == n {
        out.push(Box::new(make_ising(side, ConfigLabel::C3, seed)?));
    }
    let (len, chains) = (2..=n)
        .rev()
        .find(|k| n.is_multiple_of(*k) && *k < n)
        .map_or((1, n), |k| (n / k, k));
    out.push(Box::new(make_fhmm(len, chains, ConfigLabel::C3, seed)?));
    out.push(Box::new(random_rbm(n, 3, seed)?));
    Ok(out)
}

/// RBM with standard normal weights and biases.
pub fn random_rbm(visible: usize, hidden: usize, seed: u64) -> Result<RbmModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut draw = |k: usize| -> Vec<f64> { (0..k).map(|_| normal.sample(&mut rng)).collect() };
    let w = draw(hidden * visible);
    let b = draw(visible);
    let c = draw(hidden);
    RbmModel::new(hidden, visible, w, b, c)
}

/// Pearson statistic of visit counts against the exact target.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChiSquare {
    pub statistic: f64,
    pub df: usize,
    pub samples: usize,
}

/// Runs `steps` sampler steps after a short burn-in and compares the
/// frequencies of every `thin`-th state against the exact target. Even
/// scales preserve the parity of `|x|`, so only odd `r` give an ergodic chain.
pub fn visit_chi_square<M: TargetModel + ?Sized>(
    model: &M,
    kind: SamplerKind,
    r: usize,
    steps: usize,
    thin: usize,
    seed: u64,
) -> Result<ChiSquare> {
    let pi = exact_target(model)?;
    let n = model.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = BitState::random(n, &mut rng);
    let mut chain = Chain::new(model, kind, init)?;
    for _ in 0..1000 {
        chain.step(r, &mut rng)?;
    }
    let thin = thin.max(1);
    let mut counts = vec![0usize; pi.len()];
    for t in 0..steps {
        chain.step(r, &mut rng)?;
        if t % thin == 0 {
            counts[chain.state().to_index()] += 1;
        }
    }
    let samples: usize = counts.iter().sum();
    let statistic = counts
        .iter()
        .zip(&pi)
        .map(|(&c, &p)| {
            let e = p * samples as f64;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    Ok(ChiSquare {
        statistic,
        df: pi.len() - 1,
        samples,
    })
}

/// Draw from the exact target, used to seed chains at stationarity.
pub fn sample_exact<R: Rng + ?Sized>(pi: &[f64], n: usize, rng: &mut R) -> BitState {
    let mut u: f64 = rng.random();
    for (s, &p) in pi.iter().enumerate() {
        u -= p;
        if u < 0.0 {
            return BitState::from_index(s, n);
        }
    }
    BitState::from_index(pi.len() - 1, n)
}

//! Asymptotic acceptance and efficiency curves of LBP-R and RWM-R on product
//! targets, their optimal constants, and the Gaussian identity
//! `E[1 ∧ e^Z] = Φ(μ/σ) + e^{μ + σ²/2} Φ(−σ − μ/σ)` for `Z ~ N(μ, σ²)`.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::models::{BitState, TargetModel};
use crate::samplers::WeightFunction;

/// Standard normal CDF via `erfc`.
pub fn std_normal_cdf(t: f64) -> f64 {
    0.5 * libm::erfc(-t / SQRT_2)
}

/// `ln Φ(t)`, accurate far into the lower tail.
pub fn log_std_normal_cdf(t: f64) -> f64 {
    if t > -30.0 {
        return std_normal_cdf(t).ln();
    }
    // Mills-ratio series: Φ(t) ≈ φ(t)/|t| · (1 − 1/t² + 3/t⁴ − 15/t⁶)
    let t2 = t * t;
    let series = 1.0 - 1.0 / t2 + 3.0 / (t2 * t2) - 15.0 / (t2 * t2 * t2);
    -0.5 * t2 - (-t).ln() - 0.5 * (2.0 * PI).ln() + series.ln()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CurveKind {
    Lbp,
    Rwm,
}

impl fmt::Display for CurveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CurveKind::Lbp => "lbp",
            CurveKind::Rwm => "rwm",
        })
    }
}

impl FromStr for CurveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lbp" => Ok(CurveKind::Lbp),
            "rwm" => Ok(CurveKind::Rwm),
            other => Err(Error::InvalidParameter(format!("unknown curve kind `{other}`"))),
        }
    }
}

/// Limiting acceptance curve `a(l)` and efficiency `ρ = a · R`.
///
/// LBP: `R = l N^{2/3}`, `a = 2Φ(−½ λ₁ l^{3/2})`.
/// RWM: `R = l N^{2β}`, `a = 2Φ(−½ λ₂ l^{1/2})`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TheoryCurve {
    pub kind: CurveKind,
    pub lambda: f64,
    pub dim: usize,
    pub beta: f64,
}

impl TheoryCurve {
    pub fn new(kind: CurveKind, lambda: f64, dim: usize, beta: f64) -> Result<Self> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "lambda {lambda} must be finite and non-negative"
            )));
        }
        if beta.is_nan() || beta < 0.0 {
            return Err(Error::InvalidParameter(format!("beta {beta} must be non-negative")));
        }
        Ok(TheoryCurve {
            kind,
            lambda,
            dim,
            beta,
        })
    }

    /// `N^{2/3}` for LBP, `N^{2β}` for RWM.
    pub fn scale_unit(&self) -> f64 {
        let n = self.dim as f64;
        match self.kind {
            CurveKind::Lbp => n.powf(2.0 / 3.0),
            CurveKind::Rwm => n.powf(2.0 * self.beta),
        }
    }

    pub fn acceptance(&self, l: f64) -> f64 {
        let exponent = match self.kind {
            CurveKind::Lbp => 1.5,
            CurveKind::Rwm => 0.5,
        };
        2.0 * std_normal_cdf(-0.5 * self.lambda * l.powf(exponent))
    }

    pub fn efficiency(&self, l: f64) -> f64 {
        self.acceptance(l) * l * self.scale_unit()
    }

    pub fn acceptance_at_scale(&self, r: f64) -> f64 {
        self.acceptance(r / self.scale_unit())
    }

    /// Expected acceptance when the integer scale is the probabilistic
    /// rounding of a real `r`: the floor/ceiling mixture of the curve.
    pub fn acceptance_at_rounded_scale(&self, r: f64) -> f64 {
        let lo = r.floor().max(1.0);
        let frac = (r - lo).clamp(0.0, 1.0);
        (1.0 - frac) * self.acceptance_at_scale(lo) + frac * self.acceptance_at_scale(lo + 1.0)
    }

    pub fn efficiency_at_scale(&self, r: f64) -> f64 {
        self.acceptance_at_scale(r) * r
    }
}

fn site_weights(p: f64, weight: WeightFunction) -> (f64, f64) {
    let logit = (p / (1.0 - p)).ln();
    // w(1) = g(π(0)/π(1)), w(0) = g(π(1)/π(0))
    (weight.log_g(-logit).exp(), weight.log_g(logit).exp())
}

/// `λ₁` of a product target from its site probabilities.
pub fn lambda1_from_probs(p: &[f64], weight: WeightFunction) -> f64 {
    let n = p.len() as f64;
    let mut numer = 0.0;
    let mut mean_w = 0.0;
    let mut mass_one = 0.0;
    for &pi in p {
        let (w1, w0) = site_weights(pi, weight);
        numer += pi * w1 * (w0 - w1).powi(2);
        mean_w += pi * w1 + (1.0 - pi) * w0;
        mass_one += pi * w1;
    }
    mean_w /= n;
    (numer / (4.0 * mean_w * mean_w * mass_one)).sqrt()
}

/// `λ₁` of a product model.
pub fn lambda1<M: TargetModel + ?Sized>(model: &M, weight: WeightFunction) -> Result<f64> {
    let p = model.marginals().ok_or(Error::UnsupportedModel(model.name()))?;
    Ok(lambda1_from_probs(p, weight))
}

/// `λ₂` of a product target, `λ₂² = (2/N) Σ N^{2β} (2p_i − 1) log(p_i / (1 − p_i))`.
pub fn lambda2_from_probs(p: &[f64], beta: f64) -> f64 {
    let n = p.len() as f64;
    let sum: f64 = p.iter().map(|&pi| (2.0 * pi - 1.0) * (pi / (1.0 - pi)).ln()).sum();
    (2.0 / n * n.powf(2.0 * beta) * sum).sqrt()
}

pub fn lambda2<M: TargetModel + ?Sized>(model: &M, beta: f64) -> Result<f64> {
    if beta.is_nan() || beta < 0.0 {
        return Err(Error::InvalidParameter(format!("beta {beta} must be non-negative")));
    }
    let p = model.marginals().ok_or(Error::UnsupportedModel(model.name()))?;
    Ok(lambda2_from_probs(p, beta))
}

/// Plug-in estimate of `λ₁` from samples of any model.
///
/// With `a_j = g(e^{Δ_j})` and `b_j = g(e^{−Δ_j})` the weights of site `j`
/// at its current and flipped value, uses
/// `λ₁² = Σ_j E[a_j (b_j − a_j)²] / (4 E[ā]² Σ_i E[a_i])`, which is exact in
/// expectation for product targets.
pub fn estimate_lambda1<M: TargetModel + ?Sized>(
    model: &M,
    samples: &[BitState],
    weight: WeightFunction,
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidParameter("no samples".into()));
    }
    let n = model.dim();
    let mut numer = 0.0;
    let mut total = 0.0;
    for x in samples {
        crate::models::check_state(model, x)?;
        for d in model.flip_deltas(x) {
            let a = weight.log_g(d).exp();
            let b = weight.log_g(-d).exp();
            numer += a * (b - a).powi(2);
            total += a;
        }
    }
    let s = samples.len() as f64;
    let numer = numer / s;
    let sum_a = total / s;
    let mean_a = sum_a / n as f64;
    Ok((numer / (4.0 * mean_a * mean_a * sum_a)).sqrt())
}

/// Plug-in estimate of `λ₂`: `λ₂² = −(2/N) N^{2β} Σ_j E[Δ_j]`.
pub fn estimate_lambda2<M: TargetModel + ?Sized>(model: &M, samples: &[BitState], beta: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidParameter("no samples".into()));
    }
    let n = model.dim() as f64;
    let mut total = 0.0;
    for x in samples {
        crate::models::check_state(model, x)?;
        total += model.flip_deltas(x).iter().sum::<f64>();
    }
    let mean = total / samples.len() as f64;
    Ok((-2.0 / n * n.powf(2.0 * beta) * mean).max(0.0).sqrt())
}

/// `2zΦ(−½ z^{3/2})`
pub fn lbp_objective(z: f64) -> f64 {
    2.0 * z * std_normal_cdf(-0.5 * z.powf(1.5))
}

/// `2zΦ(−½ z^{1/2})`
pub fn rwm_objective(z: f64) -> f64 {
    2.0 * z * std_normal_cdf(-0.5 * z.sqrt())
}

fn golden_section_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        }
    }
    0.5 * (lo + hi)
}

/// Optimal normalized scale `z*` and the acceptance rate `a*` there.
pub fn solve_optimal(kind: CurveKind) -> (f64, f64) {
    match kind {
        CurveKind::Lbp => {
            let z = golden_section_max(lbp_objective, 1e-4, 50.0, 1e-9);
            (z, 2.0 * std_normal_cdf(-0.5 * z.powf(1.5)))
        }
        CurveKind::Rwm => {
            let z = golden_section_max(rwm_objective, 1e-4, 50.0, 1e-9);
            (z, 2.0 * std_normal_cdf(-0.5 * z.sqrt()))
        }
    }
}

/// `E[1 ∧ e^Z]` for `Z ~ N(μ, σ²)`.
pub fn gaussian_min_exp(mu: f64, sigma: f64) -> Result<f64> {
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(Error::InvalidParameter(format!("sigma {sigma} must be positive")));
    }
    let first = std_normal_cdf(mu / sigma);
    let log_second = mu + 0.5 * sigma * sigma + log_std_normal_cdf(-sigma - mu / sigma);
    Ok(first + log_second.exp())
}

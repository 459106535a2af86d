//! Stochastic-approximation tuning of the proposal scale `R` toward a target
//! acceptance rate, with a warmup phase after which the scale is frozen.

use rand::Rng;

/// Asymptotically optimal acceptance rate of the locally balanced proposal.
pub const LBP_TARGET_RATE: f64 = 0.574;
/// Asymptotically optimal acceptance rate of random-walk Metropolis.
pub const RWM_TARGET_RATE: f64 = 0.234;

/// Real-valued scale updated as `R ← clamp(R + η (A − δ), 1, N)` while
/// `t < warmup`, frozen afterwards.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaleController {
    scale: f64,
    target: f64,
    step_size: f64,
    warmup: usize,
    t: usize,
    max_scale: f64,
}

impl ScaleController {
    /// Starts at `R = 1` with unit step size. `dim` is the upper clamp.
    pub fn new(target: f64, warmup: usize, dim: usize) -> Self {
        assert!(target > 0.0 && target < 1.0, "target rate must lie in (0, 1)");
        assert!(dim >= 1);
        ScaleController {
            scale: 1.0,
            target,
            step_size: 1.0,
            warmup,
            t: 0,
            max_scale: dim as f64,
        }
    }

    pub fn with_initial_scale(mut self, scale: f64) -> Self {
        self.scale = scale.clamp(1.0, self.max_scale);
        self
    }

    pub fn with_step_size(mut self, eta: f64) -> Self {
        self.step_size = eta;
        self
    }

    /// Controller that never adapts.
    pub fn fixed(scale: f64, dim: usize) -> Self {
        ScaleController::new(0.5, 0, dim).with_initial_scale(scale)
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn target(&self) -> f64 {
        self.target
    }

    pub fn steps(&self) -> usize {
        self.t
    }

    pub fn is_frozen(&self) -> bool {
        self.t >= self.warmup
    }

    /// Feeds the M-H acceptance probability of the latest step.
    pub fn adapt(&mut self, accept_prob: f64) {
        debug_assert!((0.0..=1.0).contains(&accept_prob));
        if !self.is_frozen() {
            let next = self.scale + self.step_size * (accept_prob - self.target);
            self.scale = next.clamp(1.0, self.max_scale);
        }
        self.t = self.t.saturating_add(1);
    }

    /// Integer scale for the next step.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        probabilistic_round(self.scale, rng).min(self.max_scale as usize)
    }
}

/// `⌊r⌋ + 1` with probability `frac(r)`, else `⌊r⌋`; never below 1.
pub fn probabilistic_round<R: Rng + ?Sized>(r: f64, rng: &mut R) -> usize {
    let floor = r.floor();
    let frac = r - floor;
    let up = frac > 0.0 && rng.random::<f64>() < frac;
    (floor as usize + up as usize).max(1)
}

//! Metropolis-Hastings on binary state spaces: locally balanced multi-site
//! proposals (LBP-R), random-walk Metropolis (RWM-R), adaptive scale tuning,
//! asymptotic theory, exact small-instance kernels and an experiment harness.

pub mod adaptive;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod models;
pub mod oracle;
pub mod samplers;
pub mod theory;

pub use adaptive::{probabilistic_round, ScaleController, LBP_TARGET_RATE, RWM_TARGET_RATE};
pub use error::{Error, Result};
pub use metrics::{ess, merge, ChainStats, MergedStats};
pub use models::{BitState, ConfigLabel, TargetModel};
pub use samplers::{Chain, LbpConfig, ProposalOutcome, SamplerKind, WeightFunction};
pub use theory::{solve_optimal, CurveKind, TheoryCurve};

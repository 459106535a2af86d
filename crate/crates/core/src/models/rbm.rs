use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{sigmoid, softplus, BitState, TargetModel};
use crate::error::{Error, Result};

/// Restricted Boltzmann machine marginalized over its hidden units:
/// `log π̃(x) = bᵀx + Σ_i softplus(W_i x + c_i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RbmModel {
    hidden: usize,
    visible: usize,
    /// Row-major `hidden × visible`.
    w: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
}

impl RbmModel {
    pub fn new(hidden: usize, visible: usize, w: Vec<f64>, b: Vec<f64>, c: Vec<f64>) -> Result<Self> {
        if hidden == 0 || visible == 0 {
            return Err(Error::InvalidParameter(
                "RBM needs at least one hidden and one visible unit".into(),
            ));
        }
        if w.len() != hidden * visible {
            return Err(Error::DimensionMismatch {
                expected: hidden * visible,
                got: w.len(),
            });
        }
        if b.len() != visible {
            return Err(Error::DimensionMismatch {
                expected: visible,
                got: b.len(),
            });
        }
        if c.len() != hidden {
            return Err(Error::DimensionMismatch {
                expected: hidden,
                got: c.len(),
            });
        }
        if w.iter().chain(&b).chain(&c).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite RBM parameter".into()));
        }
        Ok(RbmModel {
            hidden,
            visible,
            w,
            b,
            c,
        })
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn visible_bias(&self) -> &[f64] {
        &self.b
    }

    pub fn hidden_bias(&self) -> &[f64] {
        &self.c
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.w[i * self.visible..(i + 1) * self.visible]
    }

    /// Hidden pre-activations `W x + c` of a relaxed state.
    fn activations(&self, x: &[f64]) -> Vec<f64> {
        (0..self.hidden)
            .map(|i| self.c[i] + self.row(i).iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>())
            .collect()
    }

    fn activations_bits(&self, x: &BitState) -> Vec<f64> {
        let bits = x.as_slice();
        (0..self.hidden)
            .map(|i| {
                self.c[i]
                    + self
                        .row(i)
                        .iter()
                        .zip(bits)
                        .filter(|(_, &b)| b == 1)
                        .map(|(w, _)| w)
                        .sum::<f64>()
            })
            .collect()
    }

    fn delta_with(&self, x: &BitState, act: &[f64], j: usize) -> f64 {
        let d = 1.0 - 2.0 * x.get(j) as f64;
        let mut acc = d * self.b[j];
        for (i, &a) in act.iter().enumerate() {
            let wij = self.w[i * self.visible + j];
            acc += softplus(a + d * wij) - softplus(a);
        }
        acc
    }
}

impl TargetModel for RbmModel {
    fn name(&self) -> &'static str {
        "rbm"
    }

    fn dim(&self) -> usize {
        self.visible
    }

    fn relaxed_log_prob(&self, x: &[f64]) -> f64 {
        let lin: f64 = self.b.iter().zip(x).map(|(b, xi)| b * xi).sum();
        lin + self.activations(x).into_iter().map(softplus).sum::<f64>()
    }

    fn relaxed_grad(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.b.clone();
        for (i, a) in self.activations(x).into_iter().enumerate() {
            let s = sigmoid(a);
            for (gj, w) in g.iter_mut().zip(self.row(i)) {
                *gj += w * s;
            }
        }
        g
    }

    fn log_prob(&self, x: &BitState) -> f64 {
        let lin: f64 = self
            .b
            .iter()
            .zip(x.as_slice())
            .filter(|(_, &b)| b == 1)
            .map(|(b, _)| b)
            .sum();
        lin + self.activations_bits(x).into_iter().map(softplus).sum::<f64>()
    }

    fn flip_delta(&self, x: &BitState, i: usize) -> f64 {
        let act = self.activations_bits(x);
        self.delta_with(x, &act, i)
    }

    fn flip_deltas(&self, x: &BitState) -> Vec<f64> {
        let act = self.activations_bits(x);
        (0..self.visible).map(|j| self.delta_with(x, &act, j)).collect()
    }

    fn log_ratio(&self, x: &BitState, indices: &[usize]) -> f64 {
        let act = self.activations_bits(x);
        let y = x.flipped(indices);
        let mut moved = act.clone();
        let mut lin = 0.0;
        for j in 0..self.visible {
            let d = y.get(j) as f64 - x.get(j) as f64;
            if d != 0.0 {
                lin += d * self.b[j];
                for (i, m) in moved.iter_mut().enumerate() {
                    *m += d * self.w[i * self.visible + j];
                }
            }
        }
        lin + moved
            .iter()
            .zip(&act)
            .map(|(&n, &o)| softplus(n) - softplus(o))
            .sum::<f64>()
    }
}

/// Writes `rbm h N`, then `h` rows of `W`, one row of `b`, one row of `c`.
pub fn save_rbm(model: &RbmModel, path: impl AsRef<Path>) -> Result<()> {
    let mut out = format!("rbm {} {}\n", model.hidden, model.visible);
    let mut push_row = |row: &[f64]| {
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    };
    for i in 0..model.hidden {
        push_row(model.row(i));
    }
    push_row(&model.b);
    push_row(&model.c);
    fs::write(path, out)?;
    Ok(())
}

pub fn load_rbm(path: impl AsRef<Path>) -> Result<RbmModel> {
    let text = fs::read_to_string(path)?;
    parse_rbm(&text)
}

fn parse_rbm(text: &str) -> Result<RbmModel> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::MalformedRbm("empty file".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let (hidden, visible) = match fields.as_slice() {
        ["rbm", h, n] => (
            h.parse::<usize>()
                .map_err(|_| Error::MalformedRbm(format!("bad hidden count `{h}`")))?,
            n.parse::<usize>()
                .map_err(|_| Error::MalformedRbm(format!("bad visible count `{n}`")))?,
        ),
        _ => return Err(Error::MalformedRbm(format!("bad header `{header}`"))),
    };
    let mut read_row = |what: &str, len: usize| -> Result<Vec<f64>> {
        let line = lines
            .next()
            .ok_or_else(|| Error::MalformedRbm(format!("missing {what} row")))?;
        let row = line
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| Error::MalformedRbm(format!("bad number `{t}` in {what}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != len {
            return Err(Error::MalformedRbm(format!(
                "{what} row has {} values, expected {len}",
                row.len()
            )));
        }
        Ok(row)
    };
    let mut w = Vec::with_capacity(hidden * visible);
    for i in 0..hidden {
        w.extend(read_row(&format!("W[{i}]"), visible)?);
    }
    let b = read_row("b", visible)?;
    let c = read_row("c", hidden)?;
    if lines.next().is_some() {
        return Err(Error::MalformedRbm("trailing data after c row".into()));
    }
    RbmModel::new(hidden, visible, w, b, c).map_err(|e| Error::MalformedRbm(e.to_string()))
}

/// Contrastive-divergence hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub struct CdConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl CdConfig {
    pub fn new(hidden: usize, epochs: usize, learning_rate: f64, seed: u64) -> Self {
        CdConfig {
            hidden,
            epochs,
            learning_rate,
            batch_size: 100,
            seed,
        }
    }
}

/// CD-1 trainer, exposed epoch by epoch.
pub struct RbmTrainer {
    model: RbmModel,
    config: CdConfig,
    rng: ChaCha8Rng,
}

impl RbmTrainer {
    pub fn new(visible: usize, config: CdConfig) -> Result<Self> {
        if config.batch_size == 0 || config.learning_rate.is_nan() || config.learning_rate <= 0.0 {
            return Err(Error::InvalidParameter(
                "batch size and learning rate must be positive".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let init = Normal::new(0.0, 0.01).expect("valid normal");
        let w = (0..config.hidden * visible).map(|_| init.sample(&mut rng)).collect();
        let model = RbmModel::new(config.hidden, visible, w, vec![0.0; visible], vec![0.0; config.hidden])?;
        Ok(RbmTrainer { model, config, rng })
    }

    pub fn model(&self) -> &RbmModel {
        &self.model
    }

    pub fn into_model(self) -> RbmModel {
        self.model
    }

    /// One pass over `data` in shuffled minibatches.
    pub fn epoch(&mut self, data: &[BitState]) -> Result<()> {
        let n = self.model.visible;
        let h = self.model.hidden;
        if let Some(bad) = data.iter().find(|x| x.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: bad.len(),
            });
        }
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut self.rng);
        let mut dw = vec![0.0; h * n];
        let mut db = vec![0.0; n];
        let mut dc = vec![0.0; h];
        for batch in order.chunks(self.config.batch_size) {
            dw.iter_mut().for_each(|v| *v = 0.0);
            db.iter_mut().for_each(|v| *v = 0.0);
            dc.iter_mut().for_each(|v| *v = 0.0);
            for &idx in batch {
                let v0 = data[idx].to_f64();
                let h0: Vec<f64> = self.model.activations(&v0).into_iter().map(sigmoid).collect();
                let h0_sample: Vec<f64> = h0
                    .iter()
                    .map(|&p| (self.rng.random::<f64>() < p) as u8 as f64)
                    .collect();
                let v1: Vec<f64> = (0..n)
                    .map(|j| {
                        let a = self.model.b[j] + (0..h).map(|i| self.model.w[i * n + j] * h0_sample[i]).sum::<f64>();
                        sigmoid(a)
                    })
                    .collect();
                let h1: Vec<f64> = self.model.activations(&v1).into_iter().map(sigmoid).collect();
                for i in 0..h {
                    for j in 0..n {
                        dw[i * n + j] += h0[i] * v0[j] - h1[i] * v1[j];
                    }
                    dc[i] += h0[i] - h1[i];
                }
                for j in 0..n {
                    db[j] += v0[j] - v1[j];
                }
            }
            let scale = self.config.learning_rate / batch.len() as f64;
            for (w, d) in self.model.w.iter_mut().zip(&dw) {
                *w += scale * d;
            }
            for (b, d) in self.model.b.iter_mut().zip(&db) {
                *b += scale * d;
            }
            for (c, d) in self.model.c.iter_mut().zip(&dc) {
                *c += scale * d;
            }
        }
        Ok(())
    }
}

/// CD-1 with probabilities for the reconstruction and the negative hidden
/// phase, sampled hidden units in the positive phase.
pub fn train_rbm_cd(data: &[BitState], config: &CdConfig) -> Result<RbmModel> {
    let visible = data
        .first()
        .map(BitState::len)
        .ok_or_else(|| Error::InvalidParameter("empty training set".into()))?;
    let mut trainer = RbmTrainer::new(visible, config.clone())?;
    for _ in 0..config.epochs {
        trainer.epoch(data)?;
    }
    Ok(trainer.into_model())
}

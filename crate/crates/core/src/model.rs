//! A small feedforward binary scorer written from scratch.
//!
//! The same network type serves as the adversary's classifier (read through
//! a sigmoid) and as the challenger's scorer (read as a raw logit). Hidden
//! layers use `tanh`; the output layer is a single linear unit.

use std::io::{BufRead, Write};

use log::warn;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{GameError, Result};
use crate::rng::rng_from_seed;

/// Probabilities are clamped to `[PROB_EPS, 1 - PROB_EPS]` before any log.
pub const PROB_EPS: f64 = 1e-7;

/// Labeled feature vector; label 1 = damaging.
pub type Sample = (Vec<f64>, u8);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    AdversaryTheta,
    ChallengerPhi,
}

impl Role {
    fn as_str(&self) -> &'static str {
        match self {
            Role::AdversaryTheta => "adversary",
            Role::ChallengerPhi => "challenger",
        }
    }
}

/// Fully connected layer, weights stored row-major as `[outputs][inputs]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    fn n_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.outputs {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            out.push(self.bias[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>());
        }
    }
}

/// Network weights plus the role they play in the game.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierParams {
    pub role: Role,
    pub layers: Vec<Dense>,
}

impl ClassifierParams {
    /// All-zero network: the adversary reads 0.5 and the challenger reads 0
    /// everywhere.
    pub fn zeros(role: Role, input_dim: usize, hidden: &[usize]) -> Self {
        let mut sizes = vec![input_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let layers = sizes.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect();
        ClassifierParams { role, layers }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(role: Role, input_dim: usize, hidden: &[usize], seed: u64) -> Self {
        let mut params = Self::zeros(role, input_dim, hidden);
        let mut rng = rng_from_seed(seed);
        for layer in &mut params.layers {
            let s = (6.0 / (layer.inputs + layer.outputs) as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.random_range(-s..s);
            }
        }
        params
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.inputs)
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1]
            .iter()
            .map(|l| l.outputs)
            .collect()
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(Dense::n_params).sum()
    }

    /// Parameters flattened layer by layer: weights row-major, then bias.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            v.extend_from_slice(&l.weights);
            v.extend_from_slice(&l.bias);
        }
        v
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.n_params(), "flat parameter length");
        let mut i = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&flat[i..i + nw]);
            i += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&flat[i..i + nb]);
            i += nb;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }

    /// True when every weight and bias is exactly zero.
    pub fn is_flat(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|v| *v == 0.0))
    }

    /// Stable fingerprint of the exact parameter bits.
    pub fn fingerprint(&self) -> u64 {
        self.to_flat().iter().fold(0xcbf2_9ce4_8422_2325u64, |h, v| {
            (h ^ v.to_bits()).wrapping_mul(0x0000_0100_0000_01b3)
        })
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(GameError::Dimension {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Output logit, no role check.
    pub fn logit(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.apply(&cur, &mut next);
            if i < last {
                next.iter_mut().for_each(|v| *v = v.tanh());
            }
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur[0])
    }

    /// Add `upstream * d logit(x) / d params` into `grad` (flat layout).
    pub fn backprop_into(&self, x: &[f64], upstream: f64, grad: &mut [f64]) -> Result<()> {
        self.check_dim(x)?;
        // Forward pass keeping each layer's input activation.
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::new();
            layer.apply(acts.last().unwrap(), &mut out);
            if i < last {
                out.iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(out);
        }

        let offsets: Vec<usize> = self
            .layers
            .iter()
            .scan(0, |acc, l| {
                let start = *acc;
                *acc += l.n_params();
                Some(start)
            })
            .collect();

        // delta = d logit / d (pre-activation of layer i)
        let mut delta = vec![upstream];
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let input = &acts[i];
            let off = offsets[i];
            for o in 0..layer.outputs {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                let row = &mut grad[off + o * layer.inputs..off + (o + 1) * layer.inputs];
                for (g, v) in row.iter_mut().zip(input) {
                    *g += d * v;
                }
                grad[off + layer.weights.len() + o] += d;
            }
            if i > 0 {
                let mut prev = vec![0.0; layer.inputs];
                for (row, d) in layer.weights.chunks(layer.inputs).zip(&delta) {
                    for (p, w) in prev.iter_mut().zip(row) {
                        *p += d * w;
                    }
                }
                // input[j] = tanh(z_j), so d tanh = 1 - input^2
                for (p, a) in prev.iter_mut().zip(input) {
                    *p *= 1.0 - a * a;
                }
                delta = prev;
            }
        }
        Ok(())
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

/// a(x) = P(damaging | x) under the adversary's parameters.
pub fn forward_prob(params: &ClassifierParams, x: &[f64]) -> Result<f64> {
    if params.role != Role::AdversaryTheta {
        return Err(GameError::Role(format!(
            "forward_prob needs adversary parameters, got {}",
            params.role.as_str()
        )));
    }
    Ok(sigmoid(params.logit(x)?))
}

/// g(x): the challenger's unnormalized decoy score.
pub fn forward_score(params: &ClassifierParams, x: &[f64]) -> Result<f64> {
    if params.role != Role::ChallengerPhi {
        return Err(GameError::Role(format!(
            "forward_score needs challenger parameters, got {}",
            params.role.as_str()
        )));
    }
    params.logit(x)
}

/// Summed negative log-likelihood over the batch.
pub fn nll_loss(params: &ClassifierParams, batch: &[Sample]) -> Result<f64> {
    if batch.is_empty() {
        return Err(GameError::EmptyBatch);
    }
    let mut total = 0.0;
    for (x, y) in batch {
        let a = clamp_prob(sigmoid(params.logit(x)?));
        total += if *y == 1 { -a.ln() } else { -(1.0 - a).ln() };
    }
    Ok(total)
}

/// Analytic gradient of [`nll_loss`], flat layout.
pub fn nll_gradient(params: &ClassifierParams, batch: &[Sample]) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(GameError::EmptyBatch);
    }
    let mut grad = vec![0.0; params.n_params()];
    for (x, y) in batch {
        let a = sigmoid(params.logit(x)?);
        // The clamp is flat outside [eps, 1-eps].
        let upstream = if (PROB_EPS..=1.0 - PROB_EPS).contains(&a) {
            a - f64::from(*y)
        } else {
            0.0
        };
        params.backprop_into(x, upstream, &mut grad)?;
    }
    Ok(grad)
}

/// Central finite differences of `loss` around `params`.
pub fn numeric_gradient<F>(params: &ClassifierParams, epsilon: f64, loss: F) -> Result<Vec<f64>>
where
    F: Fn(&ClassifierParams) -> Result<f64>,
{
    let base = params.to_flat();
    let mut probe = params.clone();
    let mut flat = base.clone();
    let mut out = Vec::with_capacity(base.len());
    for i in 0..base.len() {
        flat[i] = base[i] + epsilon;
        probe.set_flat(&flat);
        let up = loss(&probe)?;
        flat[i] = base[i] - epsilon;
        probe.set_flat(&flat);
        let down = loss(&probe)?;
        flat[i] = base[i];
        out.push((up - down) / (2.0 * epsilon));
    }
    Ok(out)
}

/// Largest symmetric relative error between two gradients.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / (a.abs() + n.abs()).max(1e-12))
        .fold(0.0, f64::max)
}

/// Compare backprop against finite differences of [`nll_loss`].
pub fn grad_check(params: &ClassifierParams, batch: &[Sample], epsilon: f64) -> Result<f64> {
    if !(1e-7..=1e-3).contains(&epsilon) {
        return Err(GameError::Config(format!(
            "gradient-check epsilon {epsilon} outside [1e-7, 1e-3]"
        )));
    }
    let analytic = nll_gradient(params, batch)?;
    let numeric = numeric_gradient(params, epsilon, |p| nll_loss(p, batch))?;
    Ok(max_relative_error(&analytic, &numeric))
}

/// [`grad_check`] on `draws` random small networks and batches: input
/// dimension 1..=4, up to two tanh layers of width 1..=6, batch size 1..=8,
/// features in [-1, 1]. Returns each draw's max relative error.
pub fn grad_check_draws(draws: usize, epsilon: f64, seed: u64) -> Result<Vec<f64>> {
    let mut rng = rng_from_seed(seed);
    (0..draws)
        .map(|_| {
            let dim = rng.random_range(1..=4);
            let depth = rng.random_range(0..=2);
            let hidden: Vec<usize> = (0..depth).map(|_| rng.random_range(1..=6)).collect();
            let params = ClassifierParams::init(Role::AdversaryTheta, dim, &hidden, rng.random());
            let batch: Vec<Sample> = (0..rng.random_range(1..=8))
                .map(|_| {
                    let x = (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect();
                    (x, rng.random_range(0..=1))
                })
                .collect();
            grad_check(&params, &batch, epsilon)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainHyper {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub balance_batches: bool,
}

impl Default for TrainHyper {
    fn default() -> Self {
        TrainHyper {
            learning_rate: 0.05,
            epochs: 100,
            batch_size: 16,
            balance_batches: true,
        }
    }
}

impl TrainHyper {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate.is_nan() || self.learning_rate < 0.0 || self.batch_size == 0 {
            return Err(GameError::Config(format!(
                "invalid training hyperparameters: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Slack allowed on the training-batch loss across one `train` call.
const LOSS_SLACK: f64 = 0.01;

/// Mini-batch gradient descent on [`nll_loss`].
///
/// If the run ends with a non-finite parameter or with a loss more than 1%
/// above where it started, the update is discarded and the input parameters
/// are returned unchanged.
pub fn train(
    params: &ClassifierParams,
    batch: &[Sample],
    hyper: &TrainHyper,
    seed: u64,
) -> Result<ClassifierParams> {
    if batch.is_empty() {
        return Err(GameError::EmptyBatch);
    }
    hyper.validate()?;
    let mut rng = rng_from_seed(seed);
    let mut pos: Vec<usize> = (0..batch.len()).filter(|&i| batch[i].1 == 1).collect();
    let mut neg: Vec<usize> = (0..batch.len()).filter(|&i| batch[i].1 != 1).collect();
    let mut balance = hyper.balance_batches;
    if balance && (pos.is_empty() || neg.is_empty()) {
        warn!(
            "single-class training batch ({} positive, {} negative); balancing disabled",
            pos.len(),
            neg.len()
        );
        balance = false;
    }

    let before = nll_loss(params, batch)?;
    let mut current = params.clone();
    let mut flat = current.to_flat();
    let bs = hyper.batch_size.min(batch.len()).max(1);
    let n_batches = batch.len().div_ceil(bs);
    let mut order: Vec<usize> = (0..batch.len()).collect();
    let (mut pi, mut ni) = (pos.len(), neg.len());
    let mut minibatch: Vec<usize> = Vec::with_capacity(bs);

    for _ in 0..hyper.epochs {
        if !balance {
            order.shuffle(&mut rng);
        }
        for b in 0..n_batches {
            minibatch.clear();
            if balance {
                let n_pos = bs / 2;
                let n_neg = bs - n_pos;
                for _ in 0..n_pos.max(1) {
                    if pi == pos.len() {
                        pos.shuffle(&mut rng);
                        pi = 0;
                    }
                    minibatch.push(pos[pi]);
                    pi += 1;
                }
                for _ in 0..n_neg {
                    if ni == neg.len() {
                        neg.shuffle(&mut rng);
                        ni = 0;
                    }
                    minibatch.push(neg[ni]);
                    ni += 1;
                }
            } else {
                let end = ((b + 1) * bs).min(order.len());
                minibatch.extend_from_slice(&order[b * bs..end]);
            }
            let mut grad = vec![0.0; flat.len()];
            for &i in &minibatch {
                let (x, y) = &batch[i];
                let a = sigmoid(current.logit(x)?);
                let upstream = if (PROB_EPS..=1.0 - PROB_EPS).contains(&a) {
                    a - f64::from(*y)
                } else {
                    0.0
                };
                current.backprop_into(x, upstream, &mut grad)?;
            }
            let scale = hyper.learning_rate / minibatch.len() as f64;
            for (w, g) in flat.iter_mut().zip(&grad) {
                *w -= scale * g;
            }
            current.set_flat(&flat);
        }
    }

    if !current.is_finite() {
        warn!("training produced non-finite parameters; update discarded");
        return Ok(params.clone());
    }
    let after = nll_loss(&current, batch)?;
    if after > before * (1.0 + LOSS_SLACK) {
        warn!("training raised the batch loss from {before:.6} to {after:.6}; update discarded");
        return Ok(params.clone());
    }
    Ok(current)
}

/// Write parameters as plain text:
///
/// ```text
/// role <adversary|challenger>
/// sizes <d> <h1> ... <1>
/// <one line per output unit of layer 1: its input weights>
/// <one line: layer 1 biases>
/// ... repeated for each layer
/// ```
pub fn write_params<W: Write>(params: &ClassifierParams, mut out: W) -> Result<()> {
    writeln!(out, "role {}", params.role.as_str())?;
    write!(out, "sizes {}", params.input_dim())?;
    for l in &params.layers {
        write!(out, " {}", l.outputs)?;
    }
    writeln!(out)?;
    let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
    for l in &params.layers {
        for o in 0..l.outputs {
            writeln!(out, "{}", join(&l.weights[o * l.inputs..(o + 1) * l.inputs]))?;
        }
        writeln!(out, "{}", join(&l.bias))?;
    }
    Ok(())
}

pub fn read_params<R: BufRead>(input: R) -> Result<ClassifierParams> {
    let mut lines = input.lines().enumerate();
    let mut next_line = |what: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some((i, Ok(l))) => Ok((i + 1, l)),
            Some((_, Err(e))) => Err(e.into()),
            None => Err(GameError::Parse {
                line: 0,
                msg: format!("unexpected end of input, expected {what}"),
            }),
        }
    };
    let parse_err = |line: usize, msg: String| GameError::Parse { line, msg };

    let (ln, role_line) = next_line("role")?;
    let role = match role_line.trim() {
        "role adversary" => Role::AdversaryTheta,
        "role challenger" => Role::ChallengerPhi,
        other => return Err(parse_err(ln, format!("bad role line '{other}'"))),
    };
    let (ln, sizes_line) = next_line("sizes")?;
    let mut parts = sizes_line.split_whitespace();
    if parts.next() != Some("sizes") {
        return Err(parse_err(ln, "expected 'sizes'".into()));
    }
    let sizes: Vec<usize> = parts
        .map(|s| s.parse().map_err(|e| parse_err(ln, format!("{e}"))))
        .collect::<Result<_>>()?;
    if sizes.len() < 2 || *sizes.last().unwrap() != 1 {
        return Err(parse_err(ln, "sizes must end with a single output".into()));
    }
    let hidden = &sizes[1..sizes.len() - 1];
    let mut params = ClassifierParams::zeros(role, sizes[0], hidden);
    let mut read_row = |n: usize| -> Result<Vec<f64>> {
        let (ln, l) = next_line("weights")?;
        let row: Vec<f64> = l
            .split_whitespace()
            .map(|s| s.parse().map_err(|e| parse_err(ln, format!("{e}"))))
            .collect::<Result<_>>()?;
        if row.len() != n {
            return Err(parse_err(ln, format!("expected {n} values, got {}", row.len())));
        }
        Ok(row)
    };
    for layer in &mut params.layers {
        for o in 0..layer.outputs {
            let row = read_row(layer.inputs)?;
            layer.weights[o * layer.inputs..(o + 1) * layer.inputs].copy_from_slice(&row);
        }
        layer.bias = read_row(layer.outputs)?;
    }
    Ok(params)
}

//! Neural belief dynamics: a transition network that predicts the next hidden state from
//! the current one and the action, an observation network that corrects it, and a decoder
//! that maps the hidden state to Gaussian-mixture belief parameters.

use std::io::{Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use vnb_core::grasp::{ACTION_DIM, LATENT_DIM};
use vnb_core::observation::OBS_DIM;
use vnb_core::{BeliefParams, Observation};

use crate::error::{PlanningError, Result};

pub const HIDDEN_DIM: usize = 64;
pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;
/// Temperature given to decoded beliefs used for planning.
pub const PLANNING_TEMPERATURE: f64 = 0.1;

const MAGIC: &[u8; 4] = b"VNBW";
const FORMAT_VERSION: u32 = 1;

/// Dense layer `y = W x + b` with `W` stored row-major as `rows × cols`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Linear {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, weights: vec![0.0; rows * cols], bias: vec![0.0; rows] }
    }

    /// Uniform initialization in `±1/√cols`.
    pub fn init<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (cols as f64).sqrt();
        let weights = (0..rows * cols).map(|_| rng.gen_range(-bound..bound)).collect();
        let bias = (0..rows).map(|_| rng.gen_range(-bound..bound)).collect();
        Self { rows, cols, weights, bias }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        self.weights
            .chunks_exact(self.cols)
            .zip(&self.bias)
            .map(|(row, b)| b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
            .collect()
    }

    /// Accumulates parameter gradients into `grad` and returns the input gradient.
    fn backward(&self, x: &[f64], gy: &[f64], grad: &mut Linear) -> Vec<f64> {
        let mut gx = vec![0.0; self.cols];
        for (r, &g) in gy.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            grad.bias[r] += g;
            let row = &self.weights[r * self.cols..(r + 1) * self.cols];
            let grow = &mut grad.weights[r * self.cols..(r + 1) * self.cols];
            for c in 0..self.cols {
                grow[c] += g * x[c];
                gx[c] += g * row[c];
            }
        }
        gx
    }

    fn zeros_like(&self) -> Self {
        Self::zeros(self.rows, self.cols)
    }
}

/// Multi-layer perceptron with tanh hidden activations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Linear>,
    /// Applies tanh to the output layer as well.
    pub tanh_output: bool,
}

/// Activations recorded during a forward pass: `acts[0]` is the input, `acts[l + 1]` the output of layer `l`.
#[derive(Debug, Clone)]
pub struct MlpTrace {
    pub acts: Vec<Vec<f64>>,
}

impl Mlp {
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], tanh_output: bool, rng: &mut R) -> Self {
        let layers = sizes.windows(2).map(|w| Linear::init(w[1], w[0], rng)).collect();
        Self { layers, tanh_output }
    }

    pub fn zeros(sizes: &[usize], tanh_output: bool) -> Self {
        Self { layers: sizes.windows(2).map(|w| Linear::zeros(w[1], w[0])).collect(), tanh_output }
    }

    fn activated(&self, l: usize) -> bool {
        l + 1 < self.layers.len() || self.tanh_output
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].cols
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].rows
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.trace(x).acts.pop().unwrap_or_default()
    }

    pub fn trace(&self, x: &[f64]) -> MlpTrace {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        for (l, layer) in self.layers.iter().enumerate() {
            let mut y = layer.forward(&acts[l]);
            if self.activated(l) {
                y.iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(y);
        }
        MlpTrace { acts }
    }

    /// Backpropagates `gy` through a recorded pass, accumulating into `grad`; returns the input gradient.
    pub fn backward(&self, trace: &MlpTrace, gy: &[f64], grad: &mut Mlp) -> Vec<f64> {
        let mut g = gy.to_vec();
        for l in (0..self.layers.len()).rev() {
            if self.activated(l) {
                for (gi, a) in g.iter_mut().zip(&trace.acts[l + 1]) {
                    *gi *= 1.0 - a * a;
                }
            }
            g = self.layers[l].backward(&trace.acts[l], &g, &mut grad.layers[l]);
        }
        g
    }

    pub fn zeros_like(&self) -> Self {
        Self { layers: self.layers.iter().map(Linear::zeros_like).collect(), tanh_output: self.tanh_output }
    }
}

/// Per-dimension affine map `z = (x − shift) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Normalizer {
    pub fn identity(dim: usize) -> Self {
        Self { shift: vec![0.0; dim], scale: vec![1.0; dim] }
    }

    /// Fits mean and standard deviation per dimension; near-constant dimensions get unit scale.
    pub fn fit<'a>(rows: impl Iterator<Item = &'a [f64]>, dim: usize) -> Self {
        let mut n = 0usize;
        let mut mean = vec![0.0; dim];
        let mut m2 = vec![0.0; dim];
        for row in rows {
            n += 1;
            for j in 0..dim {
                let d = row[j] - mean[j];
                mean[j] += d / n as f64;
                m2[j] += d * (row[j] - mean[j]);
            }
        }
        let scale = m2
            .iter()
            .map(|&s| {
                let sd = if n > 1 { (s / (n - 1) as f64).sqrt() } else { 0.0 };
                if sd > 1e-6 { sd } else { 1.0 }
            })
            .collect();
        Self { shift: mean, scale }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.shift).zip(&self.scale).map(|((v, m), s)| (v - m) / s).collect()
    }

    fn as_linear(&self) -> Linear {
        Linear { rows: self.shift.len(), cols: 1, weights: self.scale.clone(), bias: self.shift.clone() }
    }

    fn from_linear(l: Linear) -> Self {
        Self { shift: l.bias, scale: l.weights }
    }
}

/// Transition, correction and decoder networks with their input/output normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefNets {
    pub components: usize,
    pub trans: Mlp,
    pub obs: Mlp,
    pub decoder: Mlp,
    pub obs_norm: Normalizer,
    pub latent_norm: Normalizer,
    pub temperature: f64,
}

pub fn decoder_width(components: usize) -> usize {
    components * (2 * LATENT_DIM + 1)
}

impl BeliefNets {
    pub fn new<R: Rng + ?Sized>(components: usize, rng: &mut R) -> Self {
        Self {
            components,
            trans: Mlp::new(&[HIDDEN_DIM + ACTION_DIM, 128, 128, HIDDEN_DIM], true, rng),
            obs: Mlp::new(&[HIDDEN_DIM + OBS_DIM, 128, 128, HIDDEN_DIM], true, rng),
            decoder: Mlp::new(&[HIDDEN_DIM, 64, decoder_width(components)], false, rng),
            obs_norm: Normalizer::identity(OBS_DIM),
            latent_norm: Normalizer::identity(LATENT_DIM),
            temperature: PLANNING_TEMPERATURE,
        }
    }

    /// Networks with every weight and bias set to zero.
    pub fn zeros(components: usize) -> Self {
        Self {
            components,
            trans: Mlp::zeros(&[HIDDEN_DIM + ACTION_DIM, 128, 128, HIDDEN_DIM], true),
            obs: Mlp::zeros(&[HIDDEN_DIM + OBS_DIM, 128, 128, HIDDEN_DIM], true),
            decoder: Mlp::zeros(&[HIDDEN_DIM, 64, decoder_width(components)], false),
            obs_norm: Normalizer::identity(OBS_DIM),
            latent_norm: Normalizer::identity(LATENT_DIM),
            temperature: PLANNING_TEMPERATURE,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            components: self.components,
            trans: self.trans.zeros_like(),
            obs: self.obs.zeros_like(),
            decoder: self.decoder.zeros_like(),
            obs_norm: self.obs_norm.clone(),
            latent_norm: self.latent_norm.clone(),
            temperature: self.temperature,
        }
    }

    /// Prediction `f_trans([h; a])`.
    pub fn predict(&self, h: &[f64], action: &[f64]) -> Vec<f64> {
        self.trans.forward(&[h, action].concat())
    }

    /// Correction `f_obs([h̄; o])` with the observation normalized.
    pub fn correct(&self, predicted: &[f64], obs: &[f64]) -> Vec<f64> {
        self.obs.forward(&[predicted, &self.obs_norm.apply(obs)].concat())
    }

    /// One prediction-correction step of the hidden state.
    pub fn step(&self, h: &[f64], action: &[f64], obs: &[f64]) -> Vec<f64> {
        self.correct(&self.predict(h, action), obs)
    }

    /// Decodes a hidden state into mixture parameters in latent units.
    pub fn decode(&self, h: &[f64]) -> BeliefParams {
        self.params_from_raw(&self.decoder.forward(h))
    }

    /// Splits a raw decoder output into logits, means and clamped log standard deviations,
    /// mapping means and scales from normalized to latent units.
    pub fn params_from_raw(&self, raw: &[f64]) -> BeliefParams {
        let (k, d) = (self.components, LATENT_DIM);
        let logits = raw[..k].to_vec();
        let norm = &self.latent_norm;
        let means = (0..k)
            .map(|c| (0..d).map(|j| norm.shift[j] + norm.scale[j] * raw[k + c * d + j]).collect())
            .collect();
        let log_stds = (0..k)
            .map(|c| (0..d).map(|j| raw[k + k * d + c * d + j].clamp(LOG_STD_MIN, LOG_STD_MAX) + norm.scale[j].ln()).collect())
            .collect();
        BeliefParams { logits, means, log_stds, temperature: self.temperature }
    }

    /// Belief decoded from the zero hidden state.
    pub fn initial_belief(&self) -> BeliefParams {
        self.decode(&vec![0.0; HIDDEN_DIM])
    }

    fn layers(&self) -> impl Iterator<Item = &Linear> {
        self.trans.layers.iter().chain(&self.obs.layers).chain(&self.decoder.layers)
    }

    fn layers_mut(&mut self) -> impl Iterator<Item = &mut Linear> {
        self.trans.layers.iter_mut().chain(self.obs.layers.iter_mut()).chain(self.decoder.layers.iter_mut())
    }

    pub fn num_params(&self) -> usize {
        self.layers().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Trainable parameters in declaration order (weights then bias per layer).
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in self.layers() {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(PlanningError::Weights(format!("expected {} parameters, got {}", self.num_params(), flat.len())));
        }
        let mut off = 0;
        for l in self.layers_mut() {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&flat[off..off + nw]);
            off += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&flat[off..off + nb]);
            off += nb;
        }
        Ok(())
    }

    /// Writes the binary weight format: magic, version, layer shapes, then little-endian `f64` data.
    pub fn write_weights<W: Write>(&self, mut w: W) -> Result<()> {
        let mut layers: Vec<Linear> = self.layers().cloned().collect();
        layers.push(self.obs_norm.as_linear());
        layers.push(self.latent_norm.as_linear());
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(layers.len() as u32).to_le_bytes())?;
        for l in &layers {
            w.write_all(&(l.rows as u32).to_le_bytes())?;
            w.write_all(&(l.cols as u32).to_le_bytes())?;
        }
        for l in &layers {
            for v in l.weights.iter().chain(&l.bias) {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_weights<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(PlanningError::Weights("bad magic".into()));
        }
        let version = read_u32(&mut r)?;
        if version != FORMAT_VERSION {
            return Err(PlanningError::Weights(format!("unsupported version {version}")));
        }
        let count = read_u32(&mut r)? as usize;
        if count != 10 {
            return Err(PlanningError::Weights(format!("expected 10 layers, found {count}")));
        }
        let shapes: Vec<(usize, usize)> =
            (0..count).map(|_| Ok((read_u32(&mut r)? as usize, read_u32(&mut r)? as usize))).collect::<Result<_>>()?;
        let dec_out = shapes[7].0;
        if dec_out % (2 * LATENT_DIM + 1) != 0 || dec_out == 0 {
            return Err(PlanningError::Weights(format!("decoder width {dec_out} is not a multiple of {}", 2 * LATENT_DIM + 1)));
        }
        let mut nets = Self::zeros(dec_out / (2 * LATENT_DIM + 1));
        let mut expected: Vec<(usize, usize)> = nets.layers().map(|l| (l.rows, l.cols)).collect();
        expected.push((OBS_DIM, 1));
        expected.push((LATENT_DIM, 1));
        if shapes != expected {
            return Err(PlanningError::Weights("layer shapes do not match the network architecture".into()));
        }
        let mut layers: Vec<Linear> = Vec::with_capacity(count);
        for &(rows, cols) in &shapes {
            let mut l = Linear::zeros(rows, cols);
            for v in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                let mut b = [0u8; 8];
                r.read_exact(&mut b)?;
                *v = f64::from_le_bytes(b);
            }
            layers.push(l);
        }
        let latent = layers.pop().expect("layer count checked");
        let obs = layers.pop().expect("layer count checked");
        for (dst, src) in nets.layers_mut().zip(layers) {
            *dst = src;
        }
        nets.obs_norm = Normalizer::from_linear(obs);
        nets.latent_norm = Normalizer::from_linear(latent);
        Ok(nets)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_weights(std::io::BufWriter::new(f))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_weights(std::io::BufReader::new(f))
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

/// Componentwise `(1 − α) φ + α φ̂` over logits, means and log standard deviations.
pub fn ema_blend(prev: &BeliefParams, decoded: &BeliefParams, ema: f64) -> BeliefParams {
    let mix = |a: f64, b: f64| (1.0 - ema) * a + ema * b;
    let blend = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(&x, &y)| mix(x, y)).collect::<Vec<_>>();
    BeliefParams {
        logits: blend(&prev.logits, &decoded.logits),
        means: prev.means.iter().zip(&decoded.means).map(|(a, b)| blend(a, b)).collect(),
        log_stds: prev.log_stds.iter().zip(&decoded.log_stds).map(|(a, b)| blend(a, b)).collect(),
        temperature: prev.temperature,
    }
}

/// Prediction, correction and EMA-smoothed decoding of the belief after executing `action`
/// and receiving `obs`. Returns the new hidden state and belief.
pub fn neural_belief_update(
    h: &[f64],
    phi: &BeliefParams,
    action: &[f64],
    obs: &Observation,
    nets: &BeliefNets,
    ema: f64,
) -> Result<(Vec<f64>, BeliefParams)> {
    let check = |what: &str, expected: usize, got: usize| {
        if expected == got {
            Ok(())
        } else {
            Err(PlanningError::Core(vnb_core::VnbError::InvalidInput(format!("{what} has length {got}, expected {expected}"))))
        }
    };
    check("hidden state", HIDDEN_DIM, h.len())?;
    check("action", ACTION_DIM, action.len())?;
    check("belief components", nets.components, phi.num_components())?;
    check("belief dimension", LATENT_DIM, phi.dim())?;
    if !(0.0..=1.0).contains(&ema) {
        return Err(PlanningError::Core(vnb_core::VnbError::InvalidInput(format!("EMA rate {ema} outside [0, 1]"))));
    }
    let h_next = nets.step(h, action, obs.as_slice());
    let decoded = nets.decode(&h_next);
    Ok((h_next, ema_blend(phi, &decoded, ema)))
}

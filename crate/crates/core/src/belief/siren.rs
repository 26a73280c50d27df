//! Implicit belief: a sinusoidal network as an unnormalized log-density, sampled with
//! unadjusted Langevin dynamics.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, VnbError};
use crate::scalar::Real;

const DIVERGENCE_NORM: f64 = 1e6;

/// Fully connected layer `y = W x + b` with `W` stored row-major as `out × in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer<T> {
    pub weights: Vec<Vec<T>>,
    pub bias: Vec<T>,
}

impl<T: Real> DenseLayer<T> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self { weights: vec![vec![T::zero(); inputs]; outputs], bias: vec![T::zero(); outputs] }
    }

    /// Uniform initialization in `±bound` for weights and biases.
    pub fn uniform<R: Rng + ?Sized>(inputs: usize, outputs: usize, bound: f64, rng: &mut R) -> Self {
        let mut draw = || T::lit(rng.gen_range(-bound..=bound));
        let weights = (0..outputs).map(|_| (0..inputs).map(|_| draw()).collect()).collect();
        let bias = (0..outputs).map(|_| draw()).collect();
        Self { weights, bias }
    }

    pub fn inputs(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn outputs(&self) -> usize {
        self.bias.len()
    }

    pub fn forward(&self, x: &[T]) -> Vec<T> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(row, &b)| row.iter().zip(x).fold(b, |acc, (&w, &xi)| acc + w * xi))
            .collect()
    }

    /// `Wᵀ g`.
    pub fn backward_input(&self, g: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.inputs()];
        for (row, &gi) in self.weights.iter().zip(g) {
            for (o, &w) in out.iter_mut().zip(row) {
                *o += w * gi;
            }
        }
        out
    }
}

/// SIREN density model `f_ω(θ) = wᵀh + b − (c/2)‖h‖²` over sine hidden features `h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SirenBelief<T> {
    pub hidden: Vec<DenseLayer<T>>,
    pub output: DenseLayer<T>,
    /// Weight `c` of the quadratic head term; zero for a plain SIREN.
    pub curvature: T,
    pub omega0: T,
    pub langevin_step: T,
    pub langevin_iters: usize,
}

impl<T: Real> SirenBelief<T> {
    pub const WIDTH: usize = 128;
    pub const DEPTH: usize = 3;

    /// Randomly initialized network with `depth` sine layers of `width` units.
    pub fn new<R: Rng + ?Sized>(dim: usize, width: usize, depth: usize, rng: &mut R) -> Self {
        let omega0 = 30.0;
        let mut hidden = Vec::with_capacity(depth);
        let mut fan_in = dim;
        for _ in 0..depth {
            hidden.push(DenseLayer::uniform(fan_in, width, (6.0 / fan_in as f64).sqrt() / omega0, rng));
            fan_in = width;
        }
        let output = DenseLayer::uniform(fan_in, 1, (6.0 / fan_in as f64).sqrt() / omega0, rng);
        Self::with_layers(hidden, output, T::zero())
    }

    /// Default architecture over a `dim`-dimensional latent.
    pub fn standard<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        Self::new(dim, Self::WIDTH, Self::DEPTH, rng)
    }

    /// All-zero network with the default architecture.
    pub fn zeros(dim: usize) -> Self {
        let mut hidden = Vec::new();
        let mut fan_in = dim;
        for _ in 0..Self::DEPTH {
            hidden.push(DenseLayer::zeros(fan_in, Self::WIDTH));
            fan_in = Self::WIDTH;
        }
        Self::with_layers(hidden, DenseLayer::zeros(fan_in, 1), T::zero())
    }

    /// Network with no hidden layers and log-density `−½‖θ‖²`.
    pub fn standard_normal(dim: usize) -> Self {
        Self::with_layers(Vec::new(), DenseLayer::zeros(dim, 1), T::one())
    }

    pub fn with_layers(hidden: Vec<DenseLayer<T>>, output: DenseLayer<T>, curvature: T) -> Self {
        Self { hidden, output, curvature, omega0: T::lit(30.0), langevin_step: T::lit(1e-3), langevin_iters: 50 }
    }

    pub fn dim(&self) -> usize {
        self.hidden.first().unwrap_or(&self.output).inputs()
    }

    fn features(&self, theta: &[T]) -> (Vec<Vec<T>>, Vec<T>) {
        let mut pre = Vec::with_capacity(self.hidden.len());
        let mut h = theta.to_vec();
        for layer in &self.hidden {
            let z = layer.forward(&h);
            h = z.iter().map(|&v| (self.omega0 * v).sin()).collect();
            pre.push(z);
        }
        (pre, h)
    }
}

/// Unnormalized log-density `f_ω(θ)`.
pub fn siren_log_density<T: Real>(belief: &SirenBelief<T>, theta: &[T]) -> T {
    let (_, h) = belief.features(theta);
    let sq: T = h.iter().map(|&v| v * v).sum();
    belief.output.forward(&h)[0] - T::lit(0.5) * belief.curvature * sq
}

/// Score `∇_θ f_ω(θ)` by an exact reverse pass.
pub fn siren_score<T: Real>(belief: &SirenBelief<T>, theta: &[T]) -> Vec<T> {
    let (pre, h) = belief.features(theta);
    let mut g: Vec<T> = belief.output.weights[0].iter().zip(&h).map(|(&w, &hi)| w - belief.curvature * hi).collect();
    for (layer, z) in belief.hidden.iter().zip(&pre).rev() {
        let dz: Vec<T> = g.iter().zip(z).map(|(&gi, &zi)| gi * belief.omega0 * (belief.omega0 * zi).cos()).collect();
        g = layer.backward_input(&dz);
    }
    g
}

/// Runs the belief's configured number of Langevin steps from `init`.
pub fn langevin_sample<T: Real, R: Rng + ?Sized>(belief: &SirenBelief<T>, init: &[T], rng: &mut R) -> Result<Vec<T>> {
    if init.len() != belief.dim() {
        return Err(VnbError::ShapeMismatch { expected: belief.dim(), got: init.len() });
    }
    if belief.langevin_step < T::zero() || belief.langevin_iters == 0 {
        return Err(invalid("Langevin step must be non-negative and iterations positive"));
    }
    let half = T::lit(0.5) * belief.langevin_step;
    let noise_scale = belief.langevin_step.sqrt();
    let mut theta = init.to_vec();
    for iteration in 0..belief.langevin_iters {
        let score = siren_score(belief, &theta);
        for (t, s) in theta.iter_mut().zip(score) {
            let eps = T::lit(rng.sample::<f64, _>(StandardNormal));
            *t += half * s + noise_scale * eps;
        }
        let norm = theta.iter().map(|&v| v * v).sum::<T>().sqrt().as_f64();
        if !(norm <= DIVERGENCE_NORM) {
            return Err(VnbError::SamplerDivergence { iteration, norm });
        }
    }
    Ok(theta)
}

/// Runs one chain per initial state, warm-started from `inits`.
pub fn langevin_chains<T: Real, R: Rng + ?Sized>(
    belief: &SirenBelief<T>,
    inits: &[Vec<T>],
    rng: &mut R,
) -> Result<Vec<Vec<T>>> {
    inits.iter().map(|x| langevin_sample(belief, x, rng)).collect()
}

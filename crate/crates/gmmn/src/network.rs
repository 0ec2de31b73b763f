//! Feed-forward networks: affine layers with ReLU/sigmoid/linear
//! nonlinearities, inverted dropout, reverse-mode gradients, and classical
//! momentum updates.

use crate::error::{Error, Result};
use crate::linalg::{rng_uniform, Matrix, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
    Linear,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Linear => z,
        }
    }

    /// Derivative as a function of the pre-activation.
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => {
                let s = 1.0 / (1.0 + (-z).exp());
                s * (1.0 - s)
            }
            Activation::Linear => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Linear => "linear",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "sigmoid" => Ok(Activation::Sigmoid),
            "linear" => Ok(Activation::Linear),
            other => Err(Error::Config(format!("unknown activation '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
    /// Inverted dropout on this layer's output during training; 0 disables.
    pub dropout_rate: f64,
}

impl LayerSpec {
    pub fn new(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        LayerSpec {
            in_dim,
            out_dim,
            activation,
            dropout_rate: 0.0,
        }
    }

    pub fn with_dropout(mut self, rate: f64) -> Self {
        self.dropout_rate = rate;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Feed-forward network: ordered affine layers plus momentum buffers.
///
/// Weight of layer `l` has shape `(in_dim_l, out_dim_l)`; activations flow as
/// row-major batches, rows are examples.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<LayerSpec>,
    weights: Vec<Matrix>,
    biases: Vec<Vec<f64>>,
    vel_weights: Vec<Matrix>,
    vel_biases: Vec<Vec<f64>>,
}

/// Per-layer gradients produced by [`Network::backward`].
#[derive(Debug, Clone)]
pub struct ParamGrads {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

impl ParamGrads {
    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.is_finite())
            && self.biases.iter().flatten().all(|b| b.is_finite())
    }
}

/// Intermediate state captured by a forward pass, consumed by backprop.
/// Immutable after creation.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// Input seen by each layer (post-dropout output of the previous layer).
    inputs: Vec<Matrix>,
    /// Pre-activation of each layer.
    preacts: Vec<Matrix>,
    /// Inverted-dropout masks (values 0 or 1/keep), where applied.
    masks: Vec<Option<Matrix>>,
}

fn validate_chain(layers: &[LayerSpec]) -> Result<()> {
    if layers.is_empty() {
        return Err(Error::Config("network needs at least one layer".into()));
    }
    for l in layers {
        if l.in_dim == 0 || l.out_dim == 0 {
            return Err(Error::Config("layer dimensions must be positive".into()));
        }
        if !(0.0..1.0).contains(&l.dropout_rate) {
            return Err(Error::Config(format!(
                "dropout rate must be in [0,1), got {}",
                l.dropout_rate
            )));
        }
    }
    for w in layers.windows(2) {
        if w[0].out_dim != w[1].in_dim {
            return Err(Error::Config(format!(
                "layer dims do not chain: {} -> {}",
                w[0].out_dim, w[1].in_dim
            )));
        }
    }
    Ok(())
}

impl Network {
    /// Fan-scaled uniform init: weights in `+-sqrt(6/(in+out))`, biases zero.
    pub fn new(layers: Vec<LayerSpec>, rng: &mut Rng) -> Result<Self> {
        validate_chain(&layers)?;
        let mut weights = Vec::with_capacity(layers.len());
        let mut biases = Vec::with_capacity(layers.len());
        let mut vel_weights = Vec::with_capacity(layers.len());
        let mut vel_biases = Vec::with_capacity(layers.len());
        for l in &layers {
            let bound = (6.0 / (l.in_dim + l.out_dim) as f64).sqrt();
            weights.push(rng_uniform(rng, l.in_dim, l.out_dim, -bound, bound)?);
            biases.push(vec![0.0; l.out_dim]);
            vel_weights.push(Matrix::zeros(l.in_dim, l.out_dim));
            vel_biases.push(vec![0.0; l.out_dim]);
        }
        Ok(Network {
            layers,
            weights,
            biases,
            vel_weights,
            vel_biases,
        })
    }

    /// Assemble from explicit parameters (checkpoint loading, layer
    /// surgery). Momentum buffers start zeroed.
    pub fn from_params(
        layers: Vec<LayerSpec>,
        weights: Vec<Matrix>,
        biases: Vec<Vec<f64>>,
    ) -> Result<Self> {
        validate_chain(&layers)?;
        if weights.len() != layers.len() || biases.len() != layers.len() {
            return Err(Error::Shape("parameter count does not match layer count".into()));
        }
        for (l, (w, b)) in layers.iter().zip(weights.iter().zip(&biases)) {
            if w.rows() != l.in_dim || w.cols() != l.out_dim || b.len() != l.out_dim {
                return Err(Error::Shape(format!(
                    "layer {}x{} given weight {}x{}, bias len {}",
                    l.in_dim,
                    l.out_dim,
                    w.rows(),
                    w.cols(),
                    b.len()
                )));
            }
        }
        let vel_weights = layers
            .iter()
            .map(|l| Matrix::zeros(l.in_dim, l.out_dim))
            .collect();
        let vel_biases = layers.iter().map(|l| vec![0.0; l.out_dim]).collect();
        Ok(Network {
            layers,
            weights,
            biases,
            vel_weights,
            vel_biases,
        })
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn weights(&self) -> &[Matrix] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub fn weights_mut(&mut self) -> &mut [Matrix] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.biases
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.in_dim * l.out_dim + l.out_dim).sum()
    }

    pub fn forward(
        &self,
        input: &Matrix,
        mode: Mode,
        rng: &mut Rng,
    ) -> Result<(Matrix, ForwardTrace)> {
        if input.cols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "network input dim {} but got {} columns",
                self.input_dim(),
                input.cols()
            )));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut preacts = Vec::with_capacity(self.layers.len());
        let mut masks = Vec::with_capacity(self.layers.len());
        let mut current = input.clone();
        for (l, (w, b)) in self.layers.iter().zip(self.weights.iter().zip(&self.biases)) {
            let mut z = current.matmul(w)?;
            for i in 0..z.rows() {
                for (v, &bias) in z.row_mut(i).iter_mut().zip(b.iter()) {
                    *v += bias;
                }
            }
            let mut a = z.map(|v| l.activation.apply(v));
            let mask = if mode == Mode::Train && l.dropout_rate > 0.0 {
                let keep = 1.0 - l.dropout_rate;
                let mut mask = Matrix::zeros(a.rows(), a.cols());
                for (mv, av) in mask.data_mut().iter_mut().zip(a.data_mut()) {
                    if rng.next_f64() < keep {
                        *mv = 1.0 / keep;
                        *av *= *mv;
                    } else {
                        *mv = 0.0;
                        *av = 0.0;
                    }
                }
                Some(mask)
            } else {
                None
            };
            inputs.push(current);
            preacts.push(z);
            masks.push(mask);
            current = a;
        }
        Ok((
            current,
            ForwardTrace {
                inputs,
                preacts,
                masks,
            },
        ))
    }

    /// Eval-mode forward pass without trace bookkeeping overhead at the call
    /// site. Deterministic and rng-independent.
    pub fn forward_eval(&self, input: &Matrix) -> Result<Matrix> {
        let mut rng = Rng::from_seed(0); // unused in eval mode
        Ok(self.forward(input, Mode::Eval, &mut rng)?.0)
    }

    /// Exact reverse-mode gradients of the scalar whose output-gradient is
    /// `grad_output`, honoring the dropout masks recorded in the trace.
    pub fn backward(
        &self,
        trace: &ForwardTrace,
        grad_output: &Matrix,
    ) -> Result<(ParamGrads, Matrix)> {
        if trace.inputs.len() != self.layers.len() {
            return Err(Error::Shape(format!(
                "stale trace: {} layers recorded, network has {}",
                trace.inputs.len(),
                self.layers.len()
            )));
        }
        let last = self.layers.len() - 1;
        if grad_output.rows() != trace.preacts[last].rows()
            || grad_output.cols() != self.output_dim()
        {
            return Err(Error::Shape(format!(
                "grad_output {}x{} does not match output {}x{}",
                grad_output.rows(),
                grad_output.cols(),
                trace.preacts[last].rows(),
                self.output_dim()
            )));
        }
        for (l, inp) in self.layers.iter().zip(&trace.inputs) {
            if inp.cols() != l.in_dim {
                return Err(Error::Shape("stale trace: layer input width mismatch".into()));
            }
        }
        let mut grad_w = Vec::with_capacity(self.layers.len());
        let mut grad_b = Vec::with_capacity(self.layers.len());
        let mut grad = grad_output.clone();
        for l in (0..self.layers.len()).rev() {
            if let Some(mask) = &trace.masks[l] {
                for (g, &m) in grad.data_mut().iter_mut().zip(mask.data()) {
                    *g *= m;
                }
            }
            // dz = grad * act'(z)
            let z = &trace.preacts[l];
            let mut dz = grad;
            for (g, &zv) in dz.data_mut().iter_mut().zip(z.data()) {
                *g *= self.layers[l].activation.derivative(zv);
            }
            grad_w.push(trace.inputs[l].matmul_tn(&dz)?);
            grad_b.push(dz.col_sums());
            grad = dz.matmul_nt(&self.weights[l])?;
        }
        grad_w.reverse();
        grad_b.reverse();
        Ok((
            ParamGrads {
                weights: grad_w,
                biases: grad_b,
            },
            grad,
        ))
    }

    /// Classical (heavy-ball) momentum update:
    /// `v <- momentum*v - lr*g; p <- p + v`.
    ///
    /// A non-finite gradient rejects the whole update; no parameter moves.
    pub fn sgd_momentum_step(
        &mut self,
        grads: &ParamGrads,
        lr: f64,
        momentum: f64,
    ) -> Result<()> {
        if !(lr > 0.0) {
            return Err(Error::Config(format!("learning rate must be positive, got {lr}")));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::Config(format!("momentum must be in [0,1), got {momentum}")));
        }
        if grads.weights.len() != self.layers.len() || grads.biases.len() != self.layers.len() {
            return Err(Error::Shape("gradient count does not match layer count".into()));
        }
        if !grads.is_finite() {
            return Err(Error::Numerical("non-finite gradient, update rejected".into()));
        }
        for l in 0..self.layers.len() {
            let (vw, w) = (&mut self.vel_weights[l], &mut self.weights[l]);
            for ((v, &g), p) in vw
                .data_mut()
                .iter_mut()
                .zip(grads.weights[l].data())
                .zip(w.data_mut())
            {
                *v = momentum * *v - lr * g;
                *p += *v;
            }
            let (vb, b) = (&mut self.vel_biases[l], &mut self.biases[l]);
            for ((v, &g), p) in vb.iter_mut().zip(&grads.biases[l]).zip(b.iter_mut()) {
                *v = momentum * *v - lr * g;
                *p += *v;
            }
        }
        Ok(())
    }
}

/// Batch of prior draws: i.i.d. uniform in `[-1, 1)`, one row per example.
pub fn sample_prior(rng: &mut Rng, batch: usize, h_dim: usize) -> Result<Matrix> {
    if batch == 0 || h_dim == 0 {
        return Err(Error::Argument("prior batch and dimension must be positive".into()));
    }
    rng_uniform(rng, batch, h_dim, -1.0, 1.0)
}

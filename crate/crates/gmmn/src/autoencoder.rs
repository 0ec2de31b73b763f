//! Sigmoid autoencoders: greedy layer-wise pretraining, joint fine-tuning
//! under a cross-entropy reconstruction loss with dropout on the encoder
//! layers, and the encode/decode maps that define the code space a GMMN can
//! be trained in.
//!
//! All layers are sigmoid, so codes live in `(0,1)` elementwise and line up
//! with a sigmoid-output GMMN.

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Rng};
use crate::network::{Activation, LayerSpec, Mode, Network};
use crate::pipeline::TrainConfig;

const CE_CLAMP: f64 = 1e-7;

/// Mirrored sigmoid encoder/decoder pair.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoEncoder {
    pub encoder: Network,
    pub decoder: Network,
}

impl AutoEncoder {
    pub fn new(encoder: Network, decoder: Network) -> Result<Self> {
        if decoder.input_dim() != encoder.output_dim() {
            return Err(Error::Shape(format!(
                "decoder input dim {} but encoder code dim is {}",
                decoder.input_dim(),
                encoder.output_dim()
            )));
        }
        if decoder.output_dim() != encoder.input_dim() {
            return Err(Error::Shape(format!(
                "decoder output dim {} but encoder input dim is {}",
                decoder.output_dim(),
                encoder.input_dim()
            )));
        }
        Ok(AutoEncoder { encoder, decoder })
    }

    pub fn code_dim(&self) -> usize {
        self.encoder.output_dim()
    }

    pub fn input_dim(&self) -> usize {
        self.encoder.input_dim()
    }

    /// Eval-mode encoding; outputs in `(0,1)`.
    pub fn encode(&self, x: &Matrix) -> Result<Matrix> {
        self.encoder.forward_eval(x)
    }

    /// Eval-mode decoding; outputs in `(0,1)`.
    pub fn decode(&self, codes: &Matrix) -> Result<Matrix> {
        self.decoder.forward_eval(codes)
    }

    pub fn reconstruct(&self, x: &Matrix) -> Result<Matrix> {
        self.decode(&self.encode(x)?)
    }
}

/// Mean over examples of the per-example cross entropy
/// `-sum_p [t log r + (1-t) log(1-r)]`, with reconstructions clamped to
/// `[1e-7, 1-1e-7]` before the logs.
pub fn cross_entropy(recon: &Matrix, target: &Matrix) -> Result<f64> {
    if recon.rows() != target.rows() || recon.cols() != target.cols() {
        return Err(Error::Shape(format!(
            "cross_entropy: recon {}x{} vs target {}x{}",
            recon.rows(),
            recon.cols(),
            target.rows(),
            target.cols()
        )));
    }
    let mut total = 0.0;
    for (&r, &t) in recon.data().iter().zip(target.data()) {
        let r = r.clamp(CE_CLAMP, 1.0 - CE_CLAMP);
        total -= t * r.ln() + (1.0 - t) * (1.0 - r).ln();
    }
    Ok(total / recon.rows() as f64)
}

/// Gradient of [`cross_entropy`] with respect to the reconstruction.
fn cross_entropy_grad(recon: &Matrix, target: &Matrix) -> Result<Matrix> {
    if recon.rows() != target.rows() || recon.cols() != target.cols() {
        return Err(Error::Shape("cross_entropy_grad: shape mismatch".into()));
    }
    let n = recon.rows() as f64;
    let mut grad = Matrix::zeros(recon.rows(), recon.cols());
    for ((g, &r), &t) in grad.data_mut().iter_mut().zip(recon.data()).zip(target.data()) {
        let r = r.clamp(CE_CLAMP, 1.0 - CE_CLAMP);
        *g = (r - t) / (r * (1.0 - r)) / n;
    }
    Ok(grad)
}

/// Shared inner loop: train `net` to reconstruct `targets` from `inputs`
/// under cross entropy, epoch-shuffled minibatches with the ragged remainder
/// dropped.
fn train_reconstruction(
    net: &mut Network,
    inputs: &Matrix,
    targets: &Matrix,
    cfg: &TrainConfig,
    steps: usize,
    shuffle_rng: &mut Rng,
    dropout_rng: &mut Rng,
) -> Result<Vec<f64>> {
    let batch = cfg.minibatch.min(inputs.rows());
    let mut order: Vec<usize> = (0..inputs.rows()).collect();
    let mut cursor = usize::MAX;
    let mut losses = Vec::new();
    for step in 0..steps {
        if cursor == usize::MAX || cursor + batch > order.len() {
            shuffle_rng.shuffle(&mut order);
            cursor = 0;
        }
        let idx = &order[cursor..cursor + batch];
        cursor += batch;
        let x = inputs.select_rows(idx);
        let t = targets.select_rows(idx);
        let (recon, trace) = net.forward(&x, Mode::Train, dropout_rng)?;
        let loss = cross_entropy(&recon, &t)?;
        if !loss.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite reconstruction loss at step {step}"
            )));
        }
        let grad_out = cross_entropy_grad(&recon, &t)?;
        let (grads, _) = net.backward(&trace, &grad_out)?;
        net.sgd_momentum_step(&grads, cfg.lr, cfg.momentum)?;
        if step % cfg.log_every == 0 || step + 1 == steps {
            losses.push(loss);
        }
    }
    Ok(losses)
}

/// Greedy layer-wise pretraining. Each encoder layer is trained as a
/// one-hidden-layer autoencoder on the previous layer's codes; its untied
/// temporary decode layer is kept to initialize the mirrored decoder
/// position. `cfg.steps` is the per-layer step budget; 0 leaves the random
/// initialization untouched.
pub fn pretrain_layerwise(
    data: &Matrix,
    arch: &[LayerSpec],
    cfg: &TrainConfig,
    rng: &mut Rng,
) -> Result<AutoEncoder> {
    cfg.validate()?;
    if arch.is_empty() {
        return Err(Error::Config("autoencoder needs at least one encoder layer".into()));
    }
    if arch[0].in_dim != data.cols() {
        return Err(Error::Shape(format!(
            "first encoder layer expects {} inputs, data has {} columns",
            arch[0].in_dim,
            data.cols()
        )));
    }
    let mut shuffle_rng = Rng::substream(cfg.seed, "ae-pretrain-shuffle");
    let mut dropout_rng = Rng::substream(cfg.seed, "ae-pretrain-dropout");

    let mut enc_weights = Vec::new();
    let mut enc_biases = Vec::new();
    let mut dec_layers_rev = Vec::new();
    let mut dec_weights_rev = Vec::new();
    let mut dec_biases_rev = Vec::new();
    let mut codes = data.clone();
    for spec in arch {
        let enc_layer = LayerSpec::new(spec.in_dim, spec.out_dim, Activation::Sigmoid)
            .with_dropout(cfg.dropout_rate);
        let dec_layer = LayerSpec::new(spec.out_dim, spec.in_dim, Activation::Sigmoid);
        let mut stage = Network::new(vec![enc_layer, dec_layer], rng)?;
        train_reconstruction(
            &mut stage,
            &codes,
            &codes,
            cfg,
            cfg.steps,
            &mut shuffle_rng,
            &mut dropout_rng,
        )?;
        enc_weights.push(stage.weights()[0].clone());
        enc_biases.push(stage.biases()[0].clone());
        dec_layers_rev.push(dec_layer);
        dec_weights_rev.push(stage.weights()[1].clone());
        dec_biases_rev.push(stage.biases()[1].clone());
        // next stage trains on this stage's eval-mode codes
        let enc_only = Network::from_params(
            vec![enc_layer],
            vec![enc_weights.last().unwrap().clone()],
            vec![enc_biases.last().unwrap().clone()],
        )?;
        codes = enc_only.forward_eval(&codes)?;
    }
    let enc_layers: Vec<LayerSpec> = arch
        .iter()
        .map(|s| {
            LayerSpec::new(s.in_dim, s.out_dim, Activation::Sigmoid).with_dropout(cfg.dropout_rate)
        })
        .collect();
    let encoder = Network::from_params(enc_layers, enc_weights, enc_biases)?;
    dec_layers_rev.reverse();
    dec_weights_rev.reverse();
    dec_biases_rev.reverse();
    let decoder = Network::from_params(dec_layers_rev, dec_weights_rev, dec_biases_rev)?;
    AutoEncoder::new(encoder, decoder)
}

/// Per-epoch held-out reconstruction loss from [`finetune`].
#[derive(Debug, Clone, Default)]
pub struct FinetuneReport {
    pub train_losses: Vec<f64>,
    pub heldout_ce_per_epoch: Vec<f64>,
}

/// Joint fine-tuning of encoder and decoder under cross entropy. Dropout
/// (from the encoder layer specs) applies to encoder outputs only; the
/// decoder never sees a mask. Held-out reconstruction CE is recorded after
/// each epoch when a holdout set is given.
pub fn finetune(
    ae: &mut AutoEncoder,
    data: &Matrix,
    holdout: Option<&Matrix>,
    cfg: &TrainConfig,
    epochs: usize,
) -> Result<FinetuneReport> {
    cfg.validate()?;
    if data.cols() != ae.input_dim() {
        return Err(Error::Shape(format!(
            "autoencoder expects {} columns, data has {}",
            ae.input_dim(),
            data.cols()
        )));
    }
    let batch = cfg.minibatch.min(data.rows());
    let steps_per_epoch = data.rows() / batch;
    let mut joint_layers = ae.encoder.layers().to_vec();
    joint_layers.extend_from_slice(ae.decoder.layers());
    let mut joint_weights: Vec<Matrix> = ae.encoder.weights().to_vec();
    joint_weights.extend_from_slice(ae.decoder.weights());
    let mut joint_biases: Vec<Vec<f64>> = ae.encoder.biases().to_vec();
    joint_biases.extend_from_slice(ae.decoder.biases());
    let mut joint = Network::from_params(joint_layers, joint_weights, joint_biases)?;

    let mut shuffle_rng = Rng::substream(cfg.seed, "ae-finetune-shuffle");
    let mut dropout_rng = Rng::substream(cfg.seed, "ae-finetune-dropout");
    let mut report = FinetuneReport::default();
    for _epoch in 0..epochs {
        let losses = train_reconstruction(
            &mut joint,
            data,
            data,
            cfg,
            steps_per_epoch,
            &mut shuffle_rng,
            &mut dropout_rng,
        )?;
        report.train_losses.extend(losses);
        if let Some(h) = holdout {
            let recon = joint.forward_eval(h)?;
            report.heldout_ce_per_epoch.push(cross_entropy(&recon, h)?);
        }
    }
    // split joint parameters back into the encoder/decoder pair
    let n_enc = ae.encoder.layers().len();
    let enc = Network::from_params(
        joint.layers()[..n_enc].to_vec(),
        joint.weights()[..n_enc].to_vec(),
        joint.biases()[..n_enc].to_vec(),
    )?;
    let dec = Network::from_params(
        joint.layers()[n_enc..].to_vec(),
        joint.weights()[n_enc..].to_vec(),
        joint.biases()[n_enc..].to_vec(),
    )?;
    *ae = AutoEncoder::new(enc, dec)?;
    Ok(report)
}

/// Cross entropy of the constant predictor that always outputs the
/// per-column mean of `data`. Baseline for reconstruction-quality checks.
pub fn constant_predictor_ce(data: &Matrix, targets: &Matrix) -> Result<f64> {
    let mut means = data.col_sums();
    for m in &mut means {
        *m /= data.rows() as f64;
    }
    let mut recon = Matrix::zeros(targets.rows(), targets.cols());
    for i in 0..targets.rows() {
        recon.row_mut(i).copy_from_slice(&means);
    }
    cross_entropy(&recon, targets)
}

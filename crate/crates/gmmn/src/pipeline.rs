//! Minibatch GMMN training: draw a data minibatch, draw fresh prior samples,
//! push them through the network, take the MMD loss gradient with respect to
//! the generated batch, backpropagate, and apply a momentum step. Works in
//! raw data space or in the code space of a frozen autoencoder.

use std::time::Instant;

use crate::autoencoder::AutoEncoder;
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Rng};
use crate::mmd::{mmd2_biased, mmd2_grad_samples, mmd_sqrt_loss, KernelSpec};
use crate::network::{sample_prior, Mode, Network};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// Raw squared-MMD objective.
    Mmd2,
    /// Square root of the squared MMD; keeps gradients useful near zero.
    SqrtMmd,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::Mmd2 => "mmd2",
            LossKind::SqrtMmd => "sqrt_mmd",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "mmd2" => Ok(LossKind::Mmd2),
            "sqrt_mmd" | "sqrt" => Ok(LossKind::SqrtMmd),
            other => Err(Error::Config(format!("unknown loss '{other}'"))),
        }
    }
}

/// Everything the training loop leaves to the experimenter.
///
/// The data minibatch size equals the generated-sample count; the two are
/// never decoupled.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub lr: f64,
    pub momentum: f64,
    pub minibatch: usize,
    pub steps: usize,
    pub kernel: KernelSpec,
    pub loss: LossKind,
    pub dropout_rate: f64,
    pub seed: u64,
    pub log_every: usize,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("momentum must be in [0,1), got {}", self.momentum)));
        }
        if self.minibatch == 0 {
            return Err(Error::Config("minibatch must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!(
                "dropout_rate must be in [0,1), got {}",
                self.dropout_rate
            )));
        }
        if self.log_every == 0 {
            return Err(Error::Config("log_every must be positive".into()));
        }
        Ok(())
    }
}

/// One logged training step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogEntry {
    pub step: usize,
    pub loss: f64,
    pub elapsed_secs: f64,
}

/// Loss telemetry plus the held-out sqrt-MMD before and after training.
#[derive(Debug, Clone, Default)]
pub struct TrainReport {
    pub entries: Vec<LogEntry>,
    pub heldout_mmd_initial: Option<f64>,
    pub heldout_mmd_final: Option<f64>,
}

impl TrainReport {
    /// Line-oriented text form: `step <i> loss <v>` per entry and a final
    /// `heldout_mmd <v>` line when a validation batch was given.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&format!("step {} loss {:.17e}\n", e.step, e.loss));
        }
        if let Some(v) = self.heldout_mmd_initial {
            out.push_str(&format!("heldout_mmd_initial {v:.17e}\n"));
        }
        if let Some(v) = self.heldout_mmd_final {
            out.push_str(&format!("heldout_mmd {v:.17e}\n"));
        }
        out
    }
}

/// Iterator over epoch-shuffled minibatch index blocks. The ragged final
/// block of each epoch is dropped so batch sizes never vary mid-run.
pub struct EpochBatches {
    order: Vec<usize>,
    batch: usize,
    cursor: usize,
}

impl EpochBatches {
    pub fn new(n_rows: usize, batch: usize) -> Self {
        EpochBatches {
            order: (0..n_rows).collect(),
            batch,
            // forces a shuffle on first use
            cursor: usize::MAX,
        }
    }

    pub fn next_batch(&mut self, rng: &mut Rng) -> &[usize] {
        if self.cursor == usize::MAX || self.cursor + self.batch > self.order.len() {
            rng.shuffle(&mut self.order);
            self.cursor = 0;
        }
        let block = &self.order[self.cursor..self.cursor + self.batch];
        self.cursor += self.batch;
        block
    }
}

fn heldout_sqrt_mmd(
    net: &Network,
    valid: &Matrix,
    kernel: &KernelSpec,
    eval_rng: &mut Rng,
) -> Result<f64> {
    let h = sample_prior(eval_rng, valid.rows(), net.input_dim())?;
    let samples = net.forward_eval(&h)?;
    Ok(mmd2_biased(&samples, valid, kernel)?.mmd2.max(0.0).sqrt())
}

/// Minibatch GMMN training. The network is mutated in place; `valid`, when
/// given, is scored with a fresh batch of generated samples before the first
/// and after the last step.
pub fn train_gmmn(
    data: &Matrix,
    valid: Option<&Matrix>,
    net: &mut Network,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    if net.output_dim() != data.cols() {
        return Err(Error::Shape(format!(
            "network output dim {} but data has {} columns",
            net.output_dim(),
            data.cols()
        )));
    }
    if data.rows() < cfg.minibatch {
        return Err(Error::Config(format!(
            "minibatch {} exceeds data rows {}",
            cfg.minibatch,
            data.rows()
        )));
    }
    let mut shuffle_rng = Rng::substream(cfg.seed, "data-shuffle");
    let mut prior_rng = Rng::substream(cfg.seed, "prior");
    let mut dropout_rng = Rng::substream(cfg.seed, "dropout");
    let mut eval_rng = Rng::substream(cfg.seed, "heldout-eval");

    let mut report = TrainReport::default();
    if let Some(v) = valid {
        report.heldout_mmd_initial = Some(heldout_sqrt_mmd(net, v, &cfg.kernel, &mut eval_rng)?);
    }
    let mut batches = EpochBatches::new(data.rows(), cfg.minibatch);
    let start = Instant::now();
    for step in 0..cfg.steps {
        let idx = batches.next_batch(&mut shuffle_rng).to_vec();
        let x_d = data.select_rows(&idx);
        let h = sample_prior(&mut prior_rng, cfg.minibatch, net.input_dim())?;
        let (x_s, trace) = net.forward(&h, Mode::Train, &mut dropout_rng)?;
        let (loss, grad_samples) = match cfg.loss {
            LossKind::SqrtMmd => mmd_sqrt_loss(&x_s, &x_d, &cfg.kernel)?,
            LossKind::Mmd2 => {
                let r = mmd2_biased(&x_s, &x_d, &cfg.kernel)?;
                (r.mmd2, mmd2_grad_samples(&x_s, &x_d, &cfg.kernel)?)
            }
        };
        if !loss.is_finite() {
            return Err(Error::Numerical(format!("non-finite loss at step {step}")));
        }
        let (grads, _) = net.backward(&trace, &grad_samples)?;
        net.sgd_momentum_step(&grads, cfg.lr, cfg.momentum)?;
        if step % cfg.log_every == 0 || step + 1 == cfg.steps {
            report.entries.push(LogEntry {
                step,
                loss,
                elapsed_secs: start.elapsed().as_secs_f64(),
            });
        }
    }
    if let Some(v) = valid {
        report.heldout_mmd_final = Some(heldout_sqrt_mmd(net, v, &cfg.kernel, &mut eval_rng)?);
    }
    Ok(report)
}

/// Code-space GMMN training: encode the data once through the frozen
/// autoencoder, then train in code space. No autoencoder parameter is
/// touched.
pub fn train_gmmn_ae(
    data: &Matrix,
    valid: Option<&Matrix>,
    ae: &AutoEncoder,
    net: &mut Network,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    if net.output_dim() != ae.code_dim() {
        return Err(Error::Shape(format!(
            "network output dim {} but autoencoder code dim is {}",
            net.output_dim(),
            ae.code_dim()
        )));
    }
    let codes = ae.encode(data)?;
    let valid_codes = match valid {
        Some(v) => Some(ae.encode(v)?),
        None => None,
    };
    train_gmmn(&codes, valid_codes.as_ref(), net, cfg)
}

/// Draw `n` samples: prior draws pushed through the network in eval mode,
/// then through the decoder when one is given.
pub fn generate(
    net: &Network,
    decoder: Option<&AutoEncoder>,
    n: usize,
    rng: &mut Rng,
) -> Result<Matrix> {
    if n == 0 {
        return Err(Error::Argument("sample count must be at least 1".into()));
    }
    let h = sample_prior(rng, n, net.input_dim())?;
    let out = net.forward_eval(&h)?;
    match decoder {
        Some(ae) => ae.decode(&out),
        None => Ok(out),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::rng_uniform;
    use crate::network::{Activation, LayerSpec};

    fn small_cfg(seed: u64) -> TrainConfig {
        TrainConfig {
            lr: 0.05,
            momentum: 0.9,
            minibatch: 16,
            steps: 10,
            kernel: KernelSpec::default_synthetic(),
            loss: LossKind::SqrtMmd,
            dropout_rate: 0.0,
            seed,
            log_every: 1,
        }
    }

    fn small_net(seed: u64) -> Network {
        let mut rng = Rng::from_seed(seed);
        Network::new(
            vec![
                LayerSpec::new(2, 8, Activation::Relu),
                LayerSpec::new(8, 2, Activation::Linear),
            ],
            &mut rng,
        )
        .unwrap()
    }

    #[test]
    fn zero_steps_leaves_net_untouched() {
        let mut rng = Rng::from_seed(1);
        let data = rng_uniform(&mut rng, 64, 2, -1.0, 1.0).unwrap();
        let mut net = small_net(2);
        let before = net.clone();
        let mut cfg = small_cfg(3);
        cfg.steps = 0;
        train_gmmn(&data, None, &mut net, &cfg).unwrap();
        assert_eq!(net, before);
    }

    #[test]
    fn same_seed_bit_identical_runs() {
        let mut rng = Rng::from_seed(4);
        let data = rng_uniform(&mut rng, 64, 2, -1.0, 1.0).unwrap();
        let cfg = small_cfg(5);
        let mut net_a = small_net(6);
        let mut net_b = small_net(6);
        let ra = train_gmmn(&data, None, &mut net_a, &cfg).unwrap();
        let rb = train_gmmn(&data, None, &mut net_b, &cfg).unwrap();
        assert_eq!(net_a, net_b);
        assert_eq!(ra.to_text(), rb.to_text());
    }

    #[test]
    fn epoch_covers_every_row_once() {
        let mut rng = Rng::from_seed(7);
        let mut batches = EpochBatches::new(10, 3);
        let mut seen = Vec::new();
        // 3 full batches per epoch, remainder of 1 dropped
        for _ in 0..3 {
            seen.extend_from_slice(batches.next_batch(&mut rng));
        }
        assert_eq!(seen.len(), 9);
        let mut unique = seen.clone();
        unique.sort_unstable();
        unique.dedup();
        assert_eq!(unique.len(), 9, "row repeated within an epoch");
    }

    #[test]
    fn minibatch_larger_than_data_rejected() {
        let data = Matrix::zeros(8, 2);
        let mut net = small_net(8);
        let mut cfg = small_cfg(9);
        cfg.minibatch = 16;
        assert!(train_gmmn(&data, None, &mut net, &cfg).is_err());
    }

    #[test]
    fn loss_entries_finite_and_logged() {
        let mut rng = Rng::from_seed(10);
        let data = rng_uniform(&mut rng, 64, 2, -1.0, 1.0).unwrap();
        let mut net = small_net(11);
        let mut cfg = small_cfg(12);
        cfg.steps = 20;
        cfg.log_every = 5;
        let report = train_gmmn(&data, Some(&data), &mut net, &cfg).unwrap();
        assert!(report.entries.iter().all(|e| e.loss.is_finite()));
        assert!(report.heldout_mmd_initial.unwrap().is_finite());
        assert!(report.heldout_mmd_final.unwrap().is_finite());
        let text = report.to_text();
        assert!(text.contains("step 0 loss "));
        assert!(text.contains("heldout_mmd "));
    }

    #[test]
    fn generate_deterministic_and_sized() {
        let net = small_net(13);
        let mut a = Rng::from_seed(14);
        let mut b = Rng::from_seed(14);
        let sa = generate(&net, None, 5, &mut a).unwrap();
        let sb = generate(&net, None, 5, &mut b).unwrap();
        assert_eq!(sa, sb);
        assert_eq!(sa.rows(), 5);
        assert_eq!(sa.cols(), 2);
    }

    #[test]
    fn generate_sigmoid_net_in_unit_range() {
        let mut rng = Rng::from_seed(15);
        let net = Network::new(
            vec![
                LayerSpec::new(3, 6, Activation::Relu),
                LayerSpec::new(6, 4, Activation::Sigmoid),
            ],
            &mut rng,
        )
        .unwrap();
        let samples = generate(&net, None, 20, &mut rng).unwrap();
        assert!(samples.data().iter().all(|&v| v > 0.0 && v < 1.0));
    }
}

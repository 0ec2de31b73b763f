//! Command-line wiring: flat key=value configs with flag overrides, one
//! sub-command per pipeline stage, and a resolved-config echo in every
//! output directory so runs can be replayed bit-identically.
//!
//! Commands: `train-ae`, `train-gmmn`, `sample`, `eval`, `interpolate`,
//! `nn-audit`. Common keys: `config`, `seed`, `out_dir`, `data_dir`.
//! Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numerical
//! abort.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::autoencoder::{finetune, pretrain_layerwise, AutoEncoder};
use crate::data_io::{
    emit_grid, load_checkpoint, load_idx_images, mnist_splits, save_checkpoint, save_matrix,
    split_train_valid, synth_four_blobs, Checkpoint, ComponentTag, Dataset,
};
use crate::error::{Error, Result};
use crate::evaluation::{
    interpolate_prior, log_spaced_grid, nearest_neighbors, parzen_grid_search,
};
use crate::linalg::{Matrix, Rng};
use crate::mmd::KernelSpec;
use crate::network::{sample_prior, Activation, LayerSpec, Network};
use crate::pipeline::{generate, train_gmmn, train_gmmn_ae, LossKind, TrainConfig};

const USAGE: &str = "usage: gmmn <command> [--config FILE] [--KEY VALUE]...

commands:
  train-ae     pretrain + fine-tune a sigmoid autoencoder
  train-gmmn   train a GMMN in data space or (with --ae DIR) code space
  sample       draw samples from a trained model
  eval         Parzen-window log-likelihood evaluation
  interpolate  closed-loop interpolation in prior space
  nn-audit     pair samples with nearest training neighbors

common keys: seed, out_dir, data_dir; see README for per-command keys";

/// Resolved key=value configuration for one run.
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl RunConfig {
    fn from_args(args: &[String]) -> Result<Self> {
        let mut values = BTreeMap::new();
        let mut flags = BTreeMap::new();
        let mut i = 0;
        while i < args.len() {
            let arg = &args[i];
            let key = arg
                .strip_prefix("--")
                .ok_or_else(|| Error::Config(format!("expected --key, got '{arg}'")))?
                .replace('-', "_");
            let value = args
                .get(i + 1)
                .ok_or_else(|| Error::Config(format!("flag --{key} needs a value")))?;
            flags.insert(key, value.clone());
            i += 2;
        }
        if let Some(path) = flags.get("config") {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read config {path}: {e}")))?;
            for (lineno, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (k, v) = line.split_once('=').ok_or_else(|| {
                    Error::Config(format!("{path}:{}: expected key=value", lineno + 1))
                })?;
                values.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        flags.remove("config");
        values.extend(flags);
        Ok(RunConfig { values })
    }

    fn check_known(&self, allowed: &[&str]) -> Result<()> {
        for key in self.values.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(Error::Config(format!(
                    "unknown key '{key}' (allowed: {})",
                    allowed.join(", ")
                )));
            }
        }
        Ok(())
    }

    fn str_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.values.get(key).map(String::as_str).unwrap_or(default)
    }

    fn opt(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        match self.values.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("{key}: expected integer, got '{v}'"))),
        }
    }

    fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        Ok(self.u64_or(key, default as u64)? as usize)
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.values.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("{key}: expected number, got '{v}'"))),
        }
    }

    /// Record a default so the echoed config is complete.
    fn pin(&mut self, key: &str, value: String) {
        self.values.entry(key.to_string()).or_insert(value);
    }

    fn echo(&self, out_dir: &Path) -> Result<()> {
        let mut text = String::new();
        for (k, v) in &self.values {
            text.push_str(&format!("{k}={v}\n"));
        }
        fs::write(out_dir.join("config.txt"), text)?;
        Ok(())
    }
}

fn parse_widths(s: &str, what: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| Error::Config(format!("{what}: expected comma-separated widths, got '{s}'")))
        })
        .collect()
}

fn parse_floats(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| Error::Config(format!("{what}: expected comma-separated numbers, got '{s}'")))
        })
        .collect()
}

fn parse_shape(s: &str) -> Result<(usize, usize)> {
    let (h, w) = s
        .split_once('x')
        .ok_or_else(|| Error::Config(format!("shape: expected HxW, got '{s}'")))?;
    Ok((
        h.parse().map_err(|_| Error::Config(format!("shape: bad height in '{s}'")))?,
        w.parse().map_err(|_| Error::Config(format!("shape: bad width in '{s}'")))?,
    ))
}

/// Resolve the `data` key into train/valid/test splits.
///
/// - `mnist`: IDX files `train-images-idx3-ubyte` and `t10k-images-idx3-ubyte`
///   under `data_dir`, with the 55000/5000 shuffled split.
/// - `synth2d`: the 4-blob 2-D Gaussian mixture, sizes from `synth_n`.
/// - anything else: a path to an IDX image file, split 10/12 train, 1/12
///   valid, 1/12 test.
fn resolve_dataset(cfg: &RunConfig, seed: u64) -> Result<Dataset> {
    let data = cfg.str_or("data", "mnist");
    let data_dir = PathBuf::from(cfg.str_or("data_dir", "data"));
    match data {
        "mnist" => {
            let (train_all, shape) = load_idx_images(&data_dir.join("train-images-idx3-ubyte"))?;
            let (test, _) = load_idx_images(&data_dir.join("t10k-images-idx3-ubyte"))?;
            let (train, valid) = mnist_splits(&train_all, seed)?;
            Ok(Dataset {
                train,
                valid,
                test,
                image_shape: Some(shape),
            })
        }
        "synth2d" => {
            let n = cfg.usize_or("synth_n", 1000)?;
            let mut rng = Rng::substream(seed, "synth-data");
            let train = synth_four_blobs(&mut rng, n);
            let valid = synth_four_blobs(&mut rng, n / 2);
            let test = synth_four_blobs(&mut rng, n / 2);
            Ok(Dataset {
                train,
                valid,
                test,
                image_shape: None,
            })
        }
        path => {
            let (all, shape) = load_idx_images(Path::new(path))?;
            let twelfth = (all.rows() / 12).max(1);
            let (rest, test) = split_train_valid(&all, twelfth, seed)?;
            let (train, valid) = split_train_valid(&rest, twelfth, seed.wrapping_add(1))?;
            Ok(Dataset {
                train,
                valid,
                test,
                image_shape: Some(shape),
            })
        }
    }
}

fn train_config(cfg: &RunConfig, seed: u64, default_bw: &KernelSpec) -> Result<TrainConfig> {
    let kernel = match cfg.opt("bandwidths") {
        Some(s) => KernelSpec::new(parse_floats(s, "bandwidths")?)?,
        None => default_bw.clone(),
    };
    Ok(TrainConfig {
        lr: cfg.f64_or("lr", 0.1)?,
        momentum: cfg.f64_or("momentum", 0.9)?,
        minibatch: cfg.usize_or("minibatch", 200)?,
        steps: cfg.usize_or("steps", 2000)?,
        kernel,
        loss: LossKind::parse(cfg.str_or("loss", "sqrt_mmd"))?,
        dropout_rate: cfg.f64_or("dropout", 0.0)?,
        seed,
        log_every: cfg.usize_or("log_every", 100)?,
    })
}

fn load_ae(dir: &str) -> Result<AutoEncoder> {
    let dir = Path::new(dir);
    let enc = load_checkpoint(&dir.join("encoder.ckpt"))?;
    if enc.component != ComponentTag::Encoder {
        return Err(Error::Data(format!(
            "{} is not an encoder checkpoint",
            dir.join("encoder.ckpt").display()
        )));
    }
    let dec = load_checkpoint(&dir.join("decoder.ckpt"))?;
    if dec.component != ComponentTag::Decoder {
        return Err(Error::Data(format!(
            "{} is not a decoder checkpoint",
            dir.join("decoder.ckpt").display()
        )));
    }
    AutoEncoder::new(enc.to_network()?, dec.to_network()?)
}

fn load_gmmn(path: &str) -> Result<Network> {
    let ckpt = load_checkpoint(Path::new(path))?;
    if ckpt.component != ComponentTag::Gmmn {
        return Err(Error::Data(format!("{path} is not a GMMN checkpoint")));
    }
    ckpt.to_network()
}

fn prepare_out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let out_dir = PathBuf::from(cfg.str_or("out_dir", "out"));
    fs::create_dir_all(&out_dir)?;
    Ok(out_dir)
}

const COMMON_KEYS: [&str; 4] = ["seed", "out_dir", "data_dir", "data"];

fn cmd_train_ae(mut cfg: RunConfig) -> Result<()> {
    let mut allowed = vec![
        "arch", "pretrain_steps", "epochs", "lr", "momentum", "minibatch", "dropout",
        "log_every",
    ];
    allowed.extend(COMMON_KEYS);
    allowed.push("synth_n");
    cfg.check_known(&allowed)?;
    let seed = cfg.u64_or("seed", 42)?;
    let dataset = resolve_dataset(&cfg, seed)?;
    let widths = parse_widths(cfg.str_or("arch", "256,32"), "arch")?;
    let mut arch = Vec::new();
    let mut in_dim = dataset.train.cols();
    for &w in &widths {
        arch.push(LayerSpec::new(in_dim, w, Activation::Sigmoid));
        in_dim = w;
    }
    let mut tc = train_config(&cfg, seed, &KernelSpec::default_pixel())?;
    tc.steps = cfg.usize_or("pretrain_steps", 500)?;
    tc.dropout_rate = cfg.f64_or("dropout", 0.1)?;
    let epochs = cfg.usize_or("epochs", 5)?;

    cfg.pin("seed", seed.to_string());
    cfg.pin("arch", widths.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(","));
    cfg.pin("pretrain_steps", tc.steps.to_string());
    cfg.pin("epochs", epochs.to_string());
    cfg.pin("lr", tc.lr.to_string());
    cfg.pin("momentum", tc.momentum.to_string());
    cfg.pin("minibatch", tc.minibatch.to_string());
    cfg.pin("dropout", tc.dropout_rate.to_string());
    let out_dir = prepare_out_dir(&cfg)?;
    cfg.echo(&out_dir)?;

    let mut init_rng = Rng::substream(seed, "ae-init");
    let mut ae = pretrain_layerwise(&dataset.train, &arch, &tc, &mut init_rng)?;
    let report = finetune(&mut ae, &dataset.train, Some(&dataset.valid), &tc, epochs)?;

    save_checkpoint(
        &out_dir.join("encoder.ckpt"),
        &Checkpoint::from_network(&ae.encoder, ComponentTag::Encoder),
    )?;
    save_checkpoint(
        &out_dir.join("decoder.ckpt"),
        &Checkpoint::from_network(&ae.decoder, ComponentTag::Decoder),
    )?;
    let mut text = String::new();
    for (i, loss) in report.train_losses.iter().enumerate() {
        text.push_str(&format!("log {i} ce {loss:.17e}\n"));
    }
    for (epoch, ce) in report.heldout_ce_per_epoch.iter().enumerate() {
        text.push_str(&format!("epoch {epoch} heldout_ce {ce:.17e}\n"));
    }
    fs::write(out_dir.join("ae_report.txt"), text)?;
    println!("wrote {}", out_dir.display());
    Ok(())
}

fn cmd_train_gmmn(mut cfg: RunConfig) -> Result<()> {
    let mut allowed = vec![
        "ae", "prior_dim", "hidden", "output", "bandwidths", "lr", "momentum", "minibatch",
        "steps", "loss", "log_every", "synth_n",
    ];
    allowed.extend(COMMON_KEYS);
    cfg.check_known(&allowed)?;
    let seed = cfg.u64_or("seed", 42)?;
    let dataset = resolve_dataset(&cfg, seed)?;
    let synth = cfg.str_or("data", "mnist") == "synth2d";
    let ae = match cfg.opt("ae") {
        Some(dir) => Some(load_ae(dir)?),
        None => None,
    };
    let out_dim = match &ae {
        Some(ae) => ae.code_dim(),
        None => dataset.train.cols(),
    };
    let prior_dim = cfg.usize_or("prior_dim", if synth { 2 } else { 10 })?;
    let hidden = parse_widths(cfg.str_or("hidden", if synth { "32,32" } else { "64,256,256" }), "hidden")?;
    let out_act = Activation::parse(cfg.str_or("output", if synth { "linear" } else { "sigmoid" }))?;
    let mut layers = Vec::new();
    let mut in_dim = prior_dim;
    for &w in &hidden {
        layers.push(LayerSpec::new(in_dim, w, Activation::Relu));
        in_dim = w;
    }
    layers.push(LayerSpec::new(in_dim, out_dim, out_act));
    let default_bw = if synth {
        KernelSpec::default_synthetic()
    } else {
        KernelSpec::default_pixel()
    };
    let tc = train_config(&cfg, seed, &default_bw)?;

    cfg.pin("seed", seed.to_string());
    cfg.pin("prior_dim", prior_dim.to_string());
    cfg.pin("hidden", hidden.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(","));
    cfg.pin("output", out_act.name().to_string());
    cfg.pin(
        "bandwidths",
        tc.kernel.bandwidths().iter().map(|b| b.to_string()).collect::<Vec<_>>().join(","),
    );
    cfg.pin("lr", tc.lr.to_string());
    cfg.pin("momentum", tc.momentum.to_string());
    cfg.pin("minibatch", tc.minibatch.to_string());
    cfg.pin("steps", tc.steps.to_string());
    cfg.pin("loss", tc.loss.name().to_string());
    cfg.pin("log_every", tc.log_every.to_string());
    let out_dir = prepare_out_dir(&cfg)?;
    cfg.echo(&out_dir)?;

    let mut init_rng = Rng::substream(seed, "gmmn-init");
    let mut net = Network::new(layers, &mut init_rng)?;
    let report = match &ae {
        Some(ae) => train_gmmn_ae(&dataset.train, Some(&dataset.valid), ae, &mut net, &tc)?,
        None => train_gmmn(&dataset.train, Some(&dataset.valid), &mut net, &tc)?,
    };
    save_checkpoint(
        &out_dir.join("gmmn.ckpt"),
        &Checkpoint::from_network(&net, ComponentTag::Gmmn),
    )?;
    fs::write(out_dir.join("train_report.txt"), report.to_text())?;
    println!("wrote {}", out_dir.display());
    Ok(())
}

fn cmd_sample(mut cfg: RunConfig) -> Result<()> {
    let mut allowed = vec!["model", "ae", "n", "grid_cols", "shape"];
    allowed.extend(COMMON_KEYS);
    cfg.check_known(&allowed)?;
    let seed = cfg.u64_or("seed", 42)?;
    let model = cfg
        .opt("model")
        .ok_or_else(|| Error::Config("sample: the 'model' key (path to gmmn.ckpt) is required".into()))?
        .to_string();
    let net = load_gmmn(&model)?;
    let ae = match cfg.opt("ae") {
        Some(dir) => Some(load_ae(dir)?),
        None => None,
    };
    let n = cfg.usize_or("n", 100)?;
    let grid_cols = cfg.usize_or("grid_cols", 10)?;
    cfg.pin("seed", seed.to_string());
    cfg.pin("n", n.to_string());
    let out_dir = prepare_out_dir(&cfg)?;
    cfg.echo(&out_dir)?;

    let mut rng = Rng::substream(seed, "sample");
    let samples = generate(&net, ae.as_ref(), n, &mut rng)?;
    save_matrix(&out_dir.join("samples.bin"), &samples)?;
    if let Some(shape) = cfg.opt("shape") {
        let shape = parse_shape(shape)?;
        emit_grid(&samples, shape, grid_cols, &out_dir.join("samples.pgm"))?;
    }
    println!("wrote {}", out_dir.display());
    Ok(())
}

fn cmd_eval(mut cfg: RunConfig) -> Result<()> {
    let mut allowed = vec![
        "model", "ae", "n_samples", "grid_lo", "grid_hi", "grid_count", "synth_n",
    ];
    allowed.extend(COMMON_KEYS);
    cfg.check_known(&allowed)?;
    let seed = cfg.u64_or("seed", 42)?;
    let model = cfg
        .opt("model")
        .ok_or_else(|| Error::Config("eval: the 'model' key (path to gmmn.ckpt) is required".into()))?
        .to_string();
    let net = load_gmmn(&model)?;
    let ae = match cfg.opt("ae") {
        Some(dir) => Some(load_ae(dir)?),
        None => None,
    };
    let dataset = resolve_dataset(&cfg, seed)?;
    let n_samples = cfg.usize_or("n_samples", 10_000)?;
    let grid = log_spaced_grid(
        cfg.f64_or("grid_lo", 0.01)?,
        cfg.f64_or("grid_hi", 1.0)?,
        cfg.usize_or("grid_count", 20)?,
    )?;
    cfg.pin("seed", seed.to_string());
    cfg.pin("n_samples", n_samples.to_string());
    let out_dir = prepare_out_dir(&cfg)?;
    cfg.echo(&out_dir)?;

    let mut rng = Rng::substream(seed, "eval-sample");
    let samples = generate(&net, ae.as_ref(), n_samples, &mut rng)?;
    let (parzen, _) = parzen_grid_search(&samples, &dataset.valid, &grid)?;
    let (mean_ll, se) = crate::evaluation::parzen_loglik(&parzen, &dataset.test)?;
    let text = format!(
        "parzen_sigma {:.17e}\ntest_ll {:.6} +/- {:.6}\nn_samples {}\n",
        parzen.sigma, mean_ll, se, n_samples
    );
    fs::write(out_dir.join("eval_report.txt"), &text)?;
    print!("{text}");
    Ok(())
}

fn cmd_interpolate(mut cfg: RunConfig) -> Result<()> {
    let mut allowed = vec!["model", "ae", "n_anchors", "steps_between", "shape"];
    allowed.extend(COMMON_KEYS);
    cfg.check_known(&allowed)?;
    let seed = cfg.u64_or("seed", 42)?;
    let model = cfg
        .opt("model")
        .ok_or_else(|| Error::Config("interpolate: the 'model' key is required".into()))?
        .to_string();
    let net = load_gmmn(&model)?;
    let ae = match cfg.opt("ae") {
        Some(dir) => Some(load_ae(dir)?),
        None => None,
    };
    let n_anchors = cfg.usize_or("n_anchors", 6)?;
    let steps_between = cfg.usize_or("steps_between", 7)?;
    cfg.pin("seed", seed.to_string());
    cfg.pin("n_anchors", n_anchors.to_string());
    cfg.pin("steps_between", steps_between.to_string());
    let out_dir = prepare_out_dir(&cfg)?;
    cfg.echo(&out_dir)?;

    let mut rng = Rng::substream(seed, "interpolate-anchors");
    let anchors = sample_prior(&mut rng, n_anchors, net.input_dim())?;
    let frames = interpolate_prior(&net, ae.as_ref(), &anchors, steps_between)?;
    save_matrix(&out_dir.join("frames.bin"), &frames)?;
    if let Some(shape) = cfg.opt("shape") {
        let shape = parse_shape(shape)?;
        emit_grid(&frames, shape, steps_between + 1, &out_dir.join("interp.pgm"))?;
    }
    println!("wrote {} frames to {}", frames.rows(), out_dir.display());
    Ok(())
}

fn cmd_nn_audit(mut cfg: RunConfig) -> Result<()> {
    let mut allowed = vec!["model", "ae", "n", "shape", "synth_n"];
    allowed.extend(COMMON_KEYS);
    cfg.check_known(&allowed)?;
    let seed = cfg.u64_or("seed", 42)?;
    let model = cfg
        .opt("model")
        .ok_or_else(|| Error::Config("nn-audit: the 'model' key is required".into()))?
        .to_string();
    let net = load_gmmn(&model)?;
    let ae = match cfg.opt("ae") {
        Some(dir) => Some(load_ae(dir)?),
        None => None,
    };
    let dataset = resolve_dataset(&cfg, seed)?;
    let n = cfg.usize_or("n", 10)?;
    cfg.pin("seed", seed.to_string());
    cfg.pin("n", n.to_string());
    let out_dir = prepare_out_dir(&cfg)?;
    cfg.echo(&out_dir)?;

    let mut rng = Rng::substream(seed, "nn-audit-sample");
    let samples = generate(&net, ae.as_ref(), n, &mut rng)?;
    let nn = nearest_neighbors(&samples, &dataset.train, 1)?;
    let indices: Vec<usize> = nn.iter().map(|row| row[0].0).collect();
    let neighbors = dataset.train.select_rows(&indices);
    let mut text = String::new();
    for (i, row) in nn.iter().enumerate() {
        text.push_str(&format!("sample {i} neighbor {} distance {:.17e}\n", row[0].0, row[0].1));
    }
    fs::write(out_dir.join("nn_indices.txt"), text)?;
    // top row samples, bottom row their nearest neighbors
    if let Some(shape) = dataset.image_shape.or_else(|| {
        cfg.opt("shape").and_then(|s| parse_shape(s).ok())
    }) {
        let mut paired = Matrix::zeros(2 * n, samples.cols());
        for i in 0..n {
            paired.row_mut(i).copy_from_slice(samples.row(i));
            paired.row_mut(n + i).copy_from_slice(neighbors.row(i));
        }
        emit_grid(&paired, shape, n, &out_dir.join("nn_audit.pgm"))?;
    }
    save_matrix(&out_dir.join("nn_samples.bin"), &samples)?;
    save_matrix(&out_dir.join("nn_neighbors.bin"), &neighbors)?;
    println!("wrote {}", out_dir.display());
    Ok(())
}

/// Entry point; returns the process exit code.
pub fn run(args: &[String]) -> i32 {
    let Some(command) = args.first() else {
        eprintln!("{USAGE}");
        return 1;
    };
    let cfg = match RunConfig::from_args(&args[1..]) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let result = match command.as_str() {
        "train-ae" => cmd_train_ae(cfg),
        "train-gmmn" => cmd_train_gmmn(cfg),
        "sample" => cmd_sample(cfg),
        "eval" => cmd_eval(cfg),
        "interpolate" => cmd_interpolate(cfg),
        "nn-audit" => cmd_nn_audit(cfg),
        other => {
            eprintln!("error: unknown command '{other}'\n{USAGE}");
            return 1;
        }
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Numerical(_) => 3,
                Error::Data(_) | Error::Io(_) => 2,
                _ => 1,
            }
        }
    }
}

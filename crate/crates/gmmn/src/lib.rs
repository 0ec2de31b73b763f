//! Generative moment matching networks: feed-forward samplers trained by
//! minimizing maximum mean discrepancy (MMD) against data, in raw data space
//! or in the code space of a pretrained sigmoid autoencoder, evaluated with
//! Parzen-window log-likelihood, nearest-neighbor audits, and prior-space
//! interpolation.
//!
//! The moving parts:
//!
//! - [`linalg`]: dense row-major `f64` matrices and a seedable,
//!   platform-stable RNG. Identical seeds give bit-identical runs.
//! - [`mmd`]: Gaussian kernel mixtures, the biased MMD^2 estimator, its
//!   analytic gradient with respect to generated samples, and the
//!   square-root loss.
//! - [`network`]: from-scratch MLP with ReLU/sigmoid/linear layers,
//!   inverted dropout, backprop, and momentum SGD.
//! - [`autoencoder`]: greedy layer-wise pretraining and joint fine-tuning
//!   under cross entropy; defines the `(0,1)` code space.
//! - [`pipeline`]: the minibatch training loop and sample generation.
//! - [`evaluation`]: Parzen-window log-likelihood with bandwidth grid
//!   search, nearest neighbors, prior interpolation.
//! - [`data_io`]: IDX image loading, splits, synthetic data, checkpoints,
//!   PGM grids.
//! - [`cli`]: the `gmmn` command-line front end.
//!
//! ```
//! use gmmn::linalg::Rng;
//! use gmmn::mmd::{mmd2_biased, KernelSpec};
//! use gmmn::data_io::synth_four_blobs;
//!
//! let mut rng = Rng::from_seed(7);
//! let a = synth_four_blobs(&mut rng, 200);
//! let b = synth_four_blobs(&mut rng, 200);
//! let kernel = KernelSpec::default_synthetic();
//! // two draws from the same distribution: small MMD^2
//! let r = mmd2_biased(&a, &b, &kernel).unwrap();
//! assert!(r.mmd2 >= 0.0 && r.mmd2 < 0.2);
//!
//! // a shifted draw scores clearly higher
//! let shifted = b.map(|v| v + 3.0);
//! let far = mmd2_biased(&a, &shifted, &kernel).unwrap();
//! assert!(far.mmd2 > 10.0 * r.mmd2);
//! ```

pub mod autoencoder;
pub mod cli;
pub mod data_io;
pub mod error;
pub mod evaluation;
pub mod linalg;
pub mod mmd;
pub mod network;
pub mod pipeline;

pub use error::{Error, Result};

// Run the guide's code blocks as doctests so the book stays in sync with
// the library.
#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            #[allow(dead_code)]
            struct $name;
        };
    }
    chapter!(Introduction, "../../../book/src/introduction.md");
    chapter!(MatricesAndRandomness, "../../../book/src/matrices-and-randomness.md");
    chapter!(MaximumMeanDiscrepancy, "../../../book/src/maximum-mean-discrepancy.md");
    chapter!(NetworksAndBackprop, "../../../book/src/networks-and-backprop.md");
    chapter!(TrainingLoop, "../../../book/src/training-loop.md");
    chapter!(Autoencoders, "../../../book/src/autoencoders.md");
    chapter!(Evaluation, "../../../book/src/evaluation.md");
    chapter!(CommandLine, "../../../book/src/command-line.md");
}

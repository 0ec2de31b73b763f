//! Gaussian kernel mixtures, the biased squared maximum mean discrepancy
//! (MMD) estimator, its analytic gradient with respect to the generated
//! samples, and the square-root loss wrapper.
//!
//! The Gaussian kernel here is `k_sigma(x, x') = exp(-|x - x'|^2 / (2 sigma))`
//! with the bandwidth `sigma` directly in the denominator (not `sigma^2`).
//! Bandwidth tables from sources using the other convention differ by that
//! reparameterization.

use crate::error::{Error, Result};
use crate::linalg::{pairwise_sq_dists, Matrix};

/// Guard against division blow-up in the square-root loss gradient when the
/// two batches coincide.
pub const SQRT_LOSS_EPS: f64 = 1e-8;

/// A mixture of Gaussian kernels: `k(x, x') = sum_q w_q k_{sigma_q}(x, x')`.
///
/// Weights default to all 1.0; they are configurable but never trained.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    bandwidths: Vec<f64>,
    weights: Vec<f64>,
}

impl KernelSpec {
    /// Equal-weight mixture over the given bandwidths.
    pub fn new(bandwidths: Vec<f64>) -> Result<Self> {
        let weights = vec![1.0; bandwidths.len()];
        Self::with_weights(bandwidths, weights)
    }

    pub fn with_weights(bandwidths: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if bandwidths.is_empty() {
            return Err(Error::Argument("kernel mixture needs at least one bandwidth".into()));
        }
        if bandwidths.len() != weights.len() {
            return Err(Error::Argument(format!(
                "kernel mixture: {} bandwidths but {} weights",
                bandwidths.len(),
                weights.len()
            )));
        }
        if let Some(b) = bandwidths.iter().find(|&&b| !(b > 0.0)) {
            return Err(Error::Argument(format!("kernel bandwidth must be positive, got {b}")));
        }
        if let Some(w) = weights.iter().find(|&&w| !(w > 0.0)) {
            return Err(Error::Argument(format!("kernel weight must be positive, got {w}")));
        }
        Ok(KernelSpec { bandwidths, weights })
    }

    /// Default mixture for pixel-space data in `[0,1]^D`.
    pub fn default_pixel() -> Self {
        KernelSpec::new(vec![1.0, 5.0, 10.0, 20.0, 40.0]).unwrap()
    }

    /// Default mixture for low-dimensional synthetic data.
    pub fn default_synthetic() -> Self {
        KernelSpec::new(vec![0.5, 1.0, 2.0, 4.0, 8.0]).unwrap()
    }

    pub fn bandwidths(&self) -> &[f64] {
        &self.bandwidths
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Value of the mixture at `x == x'`.
    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Mixture evaluated at a given squared distance.
    pub fn eval_sq_dist(&self, sq_dist: f64) -> f64 {
        self.bandwidths
            .iter()
            .zip(&self.weights)
            .map(|(&s, &w)| w * (-sq_dist / (2.0 * s)).exp())
            .sum()
    }
}

/// Suggested bandwidth list centered on the median pairwise squared distance
/// of `x`, scaled by `{1/4, 1/2, 1, 2, 4}`. A cheap stand-in for a bandwidth
/// line search.
pub fn median_heuristic_bandwidths(x: &Matrix) -> Result<Vec<f64>> {
    if x.rows() < 2 {
        return Err(Error::Argument("median heuristic needs at least two rows".into()));
    }
    let d = pairwise_sq_dists(x, x)?;
    let mut off_diag = Vec::with_capacity(x.rows() * (x.rows() - 1));
    for i in 0..x.rows() {
        for j in 0..x.rows() {
            if i != j {
                off_diag.push(d.get(i, j));
            }
        }
    }
    off_diag.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = off_diag[off_diag.len() / 2].max(1e-12);
    Ok(vec![median / 4.0, median / 2.0, median, median * 2.0, median * 4.0])
}

/// Squared-MMD estimate together with its three kernel sums, kept separate
/// for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmdResult {
    /// The biased V-statistic estimate of MMD^2.
    pub mmd2: f64,
    /// `(1/M^2) sum_ij k(x^s_i, x^s_j)`
    pub term_ss: f64,
    /// `(1/MN) sum_ij k(x^s_i, x^d_j)`
    pub term_sd: f64,
    /// `(1/N^2) sum_ij k(x^d_i, x^d_j)`
    pub term_dd: f64,
}

/// Kernel mixture evaluated between all row pairs of `x` and `y`.
pub fn kernel_matrix(x: &Matrix, y: &Matrix, k: &KernelSpec) -> Result<Matrix> {
    let d = pairwise_sq_dists(x, y)?;
    Ok(d.map(|sq| k.eval_sq_dist(sq)))
}

fn check_batches(x_s: &Matrix, x_d: &Matrix) -> Result<()> {
    if x_s.cols() != x_d.cols() {
        return Err(Error::Shape(format!(
            "sample batch {}x{} vs data batch {}x{}",
            x_s.rows(),
            x_s.cols(),
            x_d.rows(),
            x_d.cols()
        )));
    }
    if x_s.rows() == 0 || x_d.rows() == 0 {
        return Err(Error::Argument("mmd needs at least one row in each batch".into()));
    }
    Ok(())
}

fn mean_of(m: &Matrix) -> f64 {
    m.data().iter().sum::<f64>() / (m.rows() * m.cols()) as f64
}

/// Biased (V-statistic) estimate of MMD^2 between a sample batch and a data
/// batch, self-pair terms included.
pub fn mmd2_biased(x_s: &Matrix, x_d: &Matrix, k: &KernelSpec) -> Result<MmdResult> {
    check_batches(x_s, x_d)?;
    let term_ss = mean_of(&kernel_matrix(x_s, x_s, k)?);
    let term_sd = mean_of(&kernel_matrix(x_s, x_d, k)?);
    let term_dd = mean_of(&kernel_matrix(x_d, x_d, k)?);
    Ok(MmdResult {
        mmd2: term_ss - 2.0 * term_sd + term_dd,
        term_ss,
        term_sd,
        term_dd,
    })
}

/// Analytic gradient of the biased MMD^2 with respect to every entry of the
/// sample batch, extended linearly over the kernel mixture.
pub fn mmd2_grad_samples(x_s: &Matrix, x_d: &Matrix, k: &KernelSpec) -> Result<Matrix> {
    check_batches(x_s, x_d)?;
    let m = x_s.rows() as f64;
    let n = x_d.rows() as f64;
    let d_ss = pairwise_sq_dists(x_s, x_s)?;
    let d_sd = pairwise_sq_dists(x_s, x_d)?;
    let mut grad = Matrix::zeros(x_s.rows(), x_s.cols());
    for (&sigma, &weight) in k.bandwidths().iter().zip(k.weights()) {
        let k_ss = d_ss.map(|sq| (-sq / (2.0 * sigma)).exp());
        let k_sd = d_sd.map(|sq| (-sq / (2.0 * sigma)).exp());
        // sum_j k(x^s_i, .)(x_jp - x^s_ip) = (K X)_ip - rowsum(K)_i x^s_ip
        let ks_xs = k_ss.matmul(x_s)?;
        let ksd_xd = k_sd.matmul(x_d)?;
        let rs_ss = k_ss.row_sums();
        let rs_sd = k_sd.row_sums();
        let c_ss = 2.0 * weight / (sigma * m * m);
        let c_sd = 2.0 * weight / (sigma * m * n);
        for i in 0..x_s.rows() {
            let g = grad.row_mut(i);
            for p in 0..x_s.cols() {
                let xs_ip = x_s.get(i, p);
                g[p] += c_ss * (ks_xs.get(i, p) - rs_ss[i] * xs_ip)
                    - c_sd * (ksd_xd.get(i, p) - rs_sd[i] * xs_ip);
            }
        }
    }
    Ok(grad)
}

/// Square-root MMD loss and its gradient with respect to the sample batch:
/// `L = sqrt(max(MMD^2, 0))`, gradient scaled by `1 / (2 max(L, eps))`.
pub fn mmd_sqrt_loss(x_s: &Matrix, x_d: &Matrix, k: &KernelSpec) -> Result<(f64, Matrix)> {
    let result = mmd2_biased(x_s, x_d, k)?;
    let loss = result.mmd2.max(0.0).sqrt();
    let mut grad = mmd2_grad_samples(x_s, x_d, k)?;
    grad.scale_in_place(1.0 / (2.0 * loss.max(SQRT_LOSS_EPS)));
    if !loss.is_finite() || !grad.is_finite() {
        return Err(Error::Numerical("non-finite sqrt-MMD loss or gradient".into()));
    }
    Ok((loss, grad))
}

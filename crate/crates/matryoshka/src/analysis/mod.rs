//! Weight-distribution analysis: normalized histograms on [-1, 1] and the
//! optimal transportation distance (OTD) between them.
//!
//! The production `otd` path is the 1D closed form (the transportation cost
//! between two normalized histograms on a shared grid equals the L1 distance
//! between their CDFs times the bin width). The [`transport`] module solves
//! the underlying linear program directly and is kept as an independent
//! cross-check.

pub mod transport;

use crate::nn::{Model, ParamKind};
use crate::{Error, Result};

/// Default bin count for weight histograms.
pub const DEFAULT_BINS: usize = 100;

/// Normalized histogram of parameter values on the fixed range [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct WeightHistogram {
    pub n: usize,
    /// Non-negative masses summing to 1.
    pub masses: Vec<f64>,
    /// Number of input values that fell outside [-1, 1] and were clamped
    /// into the edge bins.
    pub clamped: usize,
}

impl WeightHistogram {
    /// Center of bin `l`: -1 + (2l + 1) / n.
    pub fn bin_center(&self, l: usize) -> f64 {
        -1.0 + (2 * l + 1) as f64 / self.n as f64
    }

    pub fn bin_width(&self) -> f64 {
        2.0 / self.n as f64
    }
}

/// Equal-width normalized histogram over [-1, 1]. Out-of-range values are
/// clamped into the edge bins and counted in `clamped` instead of crashing
/// the analysis.
pub fn weight_histogram(values: &[f64], n: usize) -> Result<WeightHistogram> {
    if values.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if n == 0 {
        return Err(Error::InvalidArgument("histogram needs at least one bin".into()));
    }
    let mut counts = vec![0u64; n];
    let mut clamped = 0usize;
    for &x in values {
        let idx = if x < -1.0 {
            clamped += 1;
            0
        } else if x > 1.0 {
            clamped += 1;
            n - 1
        } else {
            (((x + 1.0) / 2.0 * n as f64) as usize).min(n - 1)
        };
        counts[idx] += 1;
    }
    let total = values.len() as f64;
    let masses = counts.iter().map(|&c| c as f64 / total).collect();
    Ok(WeightHistogram { n, masses, clamped })
}

/// Optimal transportation distance between two same-grid histograms, via the
/// 1D closed form: sum over bins of |CDF1 - CDF2| times the bin width.
pub fn otd(h1: &WeightHistogram, h2: &WeightHistogram) -> Result<f64> {
    if h1.n != h2.n {
        return Err(Error::ShapeMismatch(format!(
            "histograms have different bin counts ({} vs {})",
            h1.n, h2.n
        )));
    }
    let mut cdf1 = 0.0;
    let mut cdf2 = 0.0;
    let mut sum = 0.0;
    for l in 0..h1.n {
        cdf1 += h1.masses[l];
        cdf2 += h2.masses[l];
        sum += (cdf1 - cdf2).abs();
    }
    Ok(sum * h1.bin_width())
}

/// The same distance computed by solving the transportation linear program
/// with ground cost |w_i - w_j|. Exposed as a cross-check for [`otd`].
pub fn otd_lp(h1: &WeightHistogram, h2: &WeightHistogram) -> Result<f64> {
    if h1.n != h2.n {
        return Err(Error::ShapeMismatch(format!(
            "histograms have different bin counts ({} vs {})",
            h1.n, h2.n
        )));
    }
    let width = h1.bin_width();
    let cost = |i: usize, j: usize| (i as f64 - j as f64).abs() * width;
    transport::min_cost_transport(&h1.masses, &h2.masses, cost)
}

/// Pairwise OTD matrix over the weight histograms of a set of models, with
/// the default 100-bin grid. Symmetric, zero diagonal.
pub fn pairwise_otd(models: &[Model]) -> Result<Vec<Vec<f64>>> {
    if models.len() < 2 {
        return Err(Error::InvalidArgument(
            "pairwise OTD needs at least two models".into(),
        ));
    }
    let hists: Vec<WeightHistogram> = models
        .iter()
        .map(|m| weight_histogram(m.params(ParamKind::Weight), DEFAULT_BINS))
        .collect::<Result<_>>()?;
    let k = models.len();
    let mut mat = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i + 1..k {
            let d = otd(&hists[i], &hists[j])?;
            mat[i][j] = d;
            mat[j][i] = d;
        }
    }
    Ok(mat)
}

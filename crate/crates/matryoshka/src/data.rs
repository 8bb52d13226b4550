//! Dataset handling: in-memory datasets, deterministic splits and batching,
//! a seeded synthetic fallback, and IDX-format MNIST ingestion.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use crate::mat::Mat;
use crate::nn::{Batch, Targets};
use crate::rng::{self, Rng};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Mat,
    pub targets: Targets,
}

impl Dataset {
    pub fn classification(inputs: Mat, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != inputs.rows {
            return Err(Error::ShapeMismatch(
                "label count does not match sample count".into(),
            ));
        }
        Ok(Dataset {
            inputs,
            targets: Targets::Classes(labels),
        })
    }

    pub fn regression(inputs: Mat, values: Mat) -> Result<Self> {
        if values.rows != inputs.rows {
            return Err(Error::ShapeMismatch(
                "target rows do not match sample count".into(),
            ));
        }
        Ok(Dataset {
            inputs,
            targets: Targets::Values(values),
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.rows
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.rows == 0
    }

    pub fn dim(&self) -> usize {
        self.inputs.cols
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let inputs = self.inputs.select_rows(indices);
        let targets = match &self.targets {
            Targets::Classes(labels) => {
                Targets::Classes(indices.iter().map(|&i| labels[i]).collect())
            }
            Targets::Values(vals) => Targets::Values(vals.select_rows(indices)),
        };
        Dataset { inputs, targets }
    }

    /// One batch assembled from the given sample indices.
    pub fn batch(&self, indices: &[usize]) -> Batch {
        let s = self.subset(indices);
        Batch {
            inputs: s.inputs,
            targets: s.targets,
        }
    }

    /// Seeded shuffle-and-split into (train, validation). The fraction is
    /// clamped so both halves stay non-empty.
    pub fn split(&self, val_fraction: f64, seed: u64) -> (Dataset, Dataset) {
        let n = self.len();
        let order = rng::permutation(n, seed);
        let n_val = ((n as f64 * val_fraction).floor() as usize).clamp(1, n.saturating_sub(1));
        let (val_idx, train_idx) = order.split_at(n_val);
        (self.subset(train_idx), self.subset(val_idx))
    }

    /// Apply a fixed column (pixel) permutation: output column `j` is input
    /// column `perm[j]`.
    pub fn permute_columns(&self, perm: &[usize]) -> Result<Dataset> {
        if perm.len() != self.inputs.cols {
            return Err(Error::ShapeMismatch(
                "permutation length does not match input dim".into(),
            ));
        }
        let mut out = Mat::zeros(self.inputs.rows, self.inputs.cols);
        for r in 0..self.inputs.rows {
            let src = self.inputs.row(r);
            let dst = out.row_mut(r);
            for (j, &p) in perm.iter().enumerate() {
                dst[j] = src[p];
            }
        }
        Ok(Dataset {
            inputs: out,
            targets: self.targets.clone(),
        })
    }
}

/// Seeded Gaussian-blob classification dataset: `classes` spherical clusters
/// in `dim` dimensions, balanced labels. `center_std` controls how far the
/// class centers spread, `noise_std` the within-class scatter; their ratio
/// sets the difficulty.
pub fn synthetic_blobs_with(
    n: usize,
    dim: usize,
    classes: usize,
    seed: u64,
    center_std: f64,
    noise_std: f64,
) -> Dataset {
    let mut rng = Rng::new(seed);
    let mut centers = vec![0.0f64; classes * dim];
    for c in centers.iter_mut() {
        *c = rng.next_gaussian() * center_std;
    }
    let mut inputs = Mat::zeros(n, dim);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let y = i % classes;
        labels.push(y);
        let row = inputs.row_mut(i);
        let center = &centers[y * dim..(y + 1) * dim];
        for (x, &c) in row.iter_mut().zip(center) {
            *x = c + rng.next_gaussian() * noise_std;
        }
    }
    Dataset {
        inputs,
        targets: Targets::Classes(labels),
    }
}

/// The bundled synthetic fallback: 10-class blobs at a difficulty where a
/// small FCN lands in the mid-90s, leaving visible headroom for degradation
/// effects.
pub fn synthetic_blobs(n: usize, dim: usize, classes: usize, seed: u64) -> Dataset {
    synthetic_blobs_with(n, dim, classes, seed, 0.12, 1.0)
}

fn read_be_u32(r: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_be_bytes(buf))
}

/// Read an IDX3 image file (magic 2051). Pixels are scaled to [0, 1] and
/// each image is flattened row-major.
pub fn load_idx_images(path: &Path) -> Result<Mat> {
    let mut f = File::open(path)?;
    let magic = read_be_u32(&mut f)?;
    if magic != 2051 {
        return Err(Error::Format(format!(
            "{}: bad IDX image magic {magic} (expected 2051)",
            path.display()
        )));
    }
    let count = read_be_u32(&mut f)? as usize;
    let rows = read_be_u32(&mut f)? as usize;
    let cols = read_be_u32(&mut f)? as usize;
    let mut bytes = vec![0u8; count * rows * cols];
    f.read_exact(&mut bytes)?;
    let data = bytes.iter().map(|&b| b as f64 / 255.0).collect();
    Mat::new(count, rows * cols, data)
}

/// Read an IDX1 label file (magic 2049).
pub fn load_idx_labels(path: &Path) -> Result<Vec<usize>> {
    let mut f = File::open(path)?;
    let magic = read_be_u32(&mut f)?;
    if magic != 2049 {
        return Err(Error::Format(format!(
            "{}: bad IDX label magic {magic} (expected 2049)",
            path.display()
        )));
    }
    let count = read_be_u32(&mut f)? as usize;
    let mut bytes = vec![0u8; count];
    f.read_exact(&mut bytes)?;
    Ok(bytes.iter().map(|&b| b as usize).collect())
}

/// Load the MNIST training split from a directory of uncompressed IDX files
/// (`train-images-idx3-ubyte` / `train-labels-idx1-ubyte`).
pub fn load_mnist_train(dir: &Path) -> Result<Dataset> {
    let images = load_idx_images(&dir.join("train-images-idx3-ubyte"))?;
    let labels = load_idx_labels(&dir.join("train-labels-idx1-ubyte"))?;
    Dataset::classification(images, labels)
}

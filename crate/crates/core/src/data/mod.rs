//! Datasets and the CIFAR-10 colour-histogram pipeline.

mod cifar;

pub use cifar::{
    featurize, load_cifar_files, make_pair_dataset, parse_cifar_batch, read_feature_cache,
    write_feature_cache, CifarImage, HistogramFeatures, CIFAR_CLASSES, CIFAR_RECORD_LEN,
    DEFAULT_BINS,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Holdout,
}

/// Features `{X_i}` and targets `{Y_i}`, one sample per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    features: Matrix<T>,
    targets: Matrix<T>,
    split: Split,
}

impl<T: Real> Dataset<T> {
    pub fn new(features: Matrix<T>, targets: Matrix<T>, split: Split) -> Result<Self> {
        if features.rows() != targets.rows() {
            return Err(Error::invalid(format!(
                "{} feature rows but {} target rows",
                features.rows(),
                targets.rows()
            )));
        }
        Ok(Self {
            features,
            targets,
            split,
        })
    }

    pub fn train(features: Matrix<T>, targets: Matrix<T>) -> Result<Self> {
        Self::new(features, targets, Split::Train)
    }

    pub fn features(&self) -> &Matrix<T> {
        &self.features
    }

    pub fn targets(&self) -> &Matrix<T> {
        &self.targets
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn input_width(&self) -> usize {
        self.features.cols()
    }

    pub fn output_width(&self) -> usize {
        self.targets.cols()
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            features: self.features.select_rows(indices),
            targets: self.targets.select_rows(indices),
            split: self.split,
        }
    }

    /// Same features, different targets (used for residual fitting).
    pub fn with_targets(&self, targets: Matrix<T>) -> Result<Self> {
        Self::new(self.features.clone(), targets, self.split)
    }

    pub fn append(&mut self, features: &[T], targets: &[T]) -> Result<()> {
        if !self.is_empty()
            && (features.len() != self.input_width() || targets.len() != self.output_width())
        {
            return Err(Error::invalid("appended sample has the wrong width"));
        }
        self.features.push_row(features)?;
        self.targets.push_row(targets)
    }
}

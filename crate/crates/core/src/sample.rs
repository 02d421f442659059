use serde::Serialize;

use crate::error::{Error, Result};

/// Where a sample came from.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Provenance {
    pub seed: Option<u64>,
    pub source: String,
}

/// Paired observations `(x_i, y_i)`; equal lengths, at least three, all finite.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSample {
    xs: Vec<f64>,
    ys: Vec<f64>,
    meta: Provenance,
}

impl PairedSample {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>, meta: Provenance) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::InvalidParameter(format!(
                "paired sample columns differ in length ({} vs {})",
                xs.len(),
                ys.len()
            )));
        }
        if xs.len() < 3 {
            return Err(Error::InvalidParameter(format!(
                "paired sample needs at least 3 observations, got {}",
                xs.len()
            )));
        }
        if let Some(i) = xs
            .iter()
            .zip(&ys)
            .position(|(x, y)| !x.is_finite() || !y.is_finite())
        {
            return Err(Error::InvalidParameter(format!(
                "non-finite value in paired sample at row {i}"
            )));
        }
        Ok(PairedSample { xs, ys, meta })
    }

    pub fn from_columns(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        PairedSample::new(xs, ys, Provenance::default())
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn meta(&self) -> &Provenance {
        &self.meta
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// The pair with the roles of X and Y exchanged.
    pub fn swapped(&self) -> PairedSample {
        PairedSample {
            xs: self.ys.clone(),
            ys: self.xs.clone(),
            meta: self.meta.clone(),
        }
    }

    pub fn into_columns(self) -> (Vec<f64>, Vec<f64>) {
        (self.xs, self.ys)
    }
}

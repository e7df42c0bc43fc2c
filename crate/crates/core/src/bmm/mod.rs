//! Bernoulli mixture models over binary embeddings.
//!
//! A model is `K` prototypes `mu[k]` (per-feature Bernoulli probabilities)
//! and mixing weights `pi`. Parameters are estimated with EM in the log
//! domain; fitted prototypes can be uniformly quantized to `q` bits for
//! storage.

mod em;
mod fit;
pub mod format;
mod quantize;
pub(crate) mod sample;

pub use em::{e_step, e_step_with_ll, eq3_value, log_likelihood, m_step, PiUpdate};
pub use fit::{fit, init_params, EmConfig, FitReport, InitMode};
pub use quantize::{dequantize, quantize, QuantizedBmm, MAX_Q};
pub use sample::sample;

use crate::data::RealMatrix;
use crate::error::{Error, Result};

/// Probability floor applied to prototypes after every M-step and whenever a
/// model is evaluated, so mismatched bits never produce `ln 0`.
pub const EPS_P: f64 = 1e-6;

#[inline]
pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(EPS_P, 1.0 - EPS_P)
}

/// Prototypes (`K x D`) and mixing coefficients of one mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct BmmParams {
    mu: RealMatrix,
    pi: Vec<f64>,
}

impl BmmParams {
    /// Validates `mu` entries in `[0, 1]`, `pi >= 0` summing to one.
    pub fn new(mu: RealMatrix, pi: Vec<f64>) -> Result<Self> {
        if mu.n_rows() != pi.len() {
            return Err(Error::shape(format!(
                "{} prototypes but {} mixing coefficients",
                mu.n_rows(),
                pi.len()
            )));
        }
        if pi.is_empty() {
            return Err(Error::InvalidParameter("a mixture needs K >= 1".into()));
        }
        if mu.as_slice().iter().any(|&m| !(0.0..=1.0).contains(&m)) {
            return Err(Error::InvalidParameter(
                "prototype entries must lie in [0, 1]".into(),
            ));
        }
        if pi.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::InvalidParameter(
                "mixing coefficients must be non-negative".into(),
            ));
        }
        let total: f64 = pi.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "mixing coefficients sum to {total}, expected 1"
            )));
        }
        Ok(Self { mu, pi })
    }

    pub fn from_rows<R: AsRef<[f64]>>(mu_rows: &[R], pi: Vec<f64>) -> Result<Self> {
        Self::new(RealMatrix::from_rows(mu_rows)?, pi)
    }

    /// Construction for values already known to satisfy the invariants.
    pub(crate) fn new_unchecked(mu: RealMatrix, pi: Vec<f64>) -> Self {
        debug_assert_eq!(mu.n_rows(), pi.len());
        Self { mu, pi }
    }

    pub fn k(&self) -> usize {
        self.pi.len()
    }

    pub fn d(&self) -> usize {
        self.mu.n_cols()
    }

    pub fn mu(&self) -> &RealMatrix {
        &self.mu
    }

    pub fn prototype(&self, k: usize) -> &[f64] {
        self.mu.row(k)
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    /// Per-feature marginal `sum_k pi_k mu_kj`.
    pub fn mean(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.d()];
        for (k, &p) in self.pi.iter().enumerate() {
            for (o, &m) in out.iter_mut().zip(self.prototype(k)) {
                *o += p * m;
            }
        }
        out
    }
}

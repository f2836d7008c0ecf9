//! Model families `c(x; xi)` with exact gradients and seeded samplers.
//!
//! Matrix parameters are flattened column-major: `X in R^{D x r0}` is the
//! vector `(X[:,0], X[:,1], ...)`, and a measurement matrix `A in R^{D x D}`
//! is stored the same way.

mod dataset;
mod sampling;

pub use dataset::Dataset;
pub use sampling::{draw_dataset, Corruption, DistributionSpec, Measurement, Response};

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::dot;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum CompositeModel {
    /// `c(x; a, b) = <a, x>^2 - b`
    PhaseRetrieval { d: usize },
    /// `c(X; A, b) = <A, X X^T> - b`
    MatrixSensing { dim: usize, rank: usize },
    /// `c((y, w); u, v, b) = <u, y><v, w> - b`
    BlindDeconv { d1: usize, d2: usize },
    /// `c(x; phi, b) = <phi, x> - b`
    Linear { d: usize },
}

/// One draw `xi` of the data.
#[derive(Debug, Clone, PartialEq)]
pub enum SampleXi {
    PhaseRetrieval { a: Vec<f64>, b: f64 },
    MatrixSensing { a: Vec<f64>, b: f64 },
    BlindDeconv { u: Vec<f64>, v: Vec<f64>, b: f64 },
    Linear { phi: Vec<f64>, b: f64 },
}

impl SampleXi {
    pub fn response(&self) -> f64 {
        match self {
            SampleXi::PhaseRetrieval { b, .. }
            | SampleXi::MatrixSensing { b, .. }
            | SampleXi::BlindDeconv { b, .. }
            | SampleXi::Linear { b, .. } => *b,
        }
    }

    pub(crate) fn with_response(mut self, value: f64) -> Self {
        match &mut self {
            SampleXi::PhaseRetrieval { b, .. }
            | SampleXi::MatrixSensing { b, .. }
            | SampleXi::BlindDeconv { b, .. }
            | SampleXi::Linear { b, .. } => *b = value,
        }
        self
    }

    /// Measurement components followed by the response, in storage order.
    pub fn components(&self) -> Vec<f64> {
        let mut out = match self {
            SampleXi::PhaseRetrieval { a, .. } | SampleXi::MatrixSensing { a, .. } => a.clone(),
            SampleXi::BlindDeconv { u, v, .. } => {
                let mut c = u.clone();
                c.extend_from_slice(v);
                c
            }
            SampleXi::Linear { phi, .. } => phi.clone(),
        };
        out.push(self.response());
        out
    }
}

impl CompositeModel {
    /// Dimension of the flattened parameter vector.
    pub fn param_dim(&self) -> usize {
        match *self {
            CompositeModel::PhaseRetrieval { d } | CompositeModel::Linear { d } => d,
            CompositeModel::MatrixSensing { dim, rank } => dim * rank,
            CompositeModel::BlindDeconv { d1, d2 } => d1 + d2,
        }
    }

    /// Polynomial degree of `x -> c(x; xi)`.
    pub fn degree(&self) -> usize {
        match self {
            CompositeModel::Linear { .. } => 1,
            _ => 2,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            CompositeModel::PhaseRetrieval { .. } => "pr",
            CompositeModel::MatrixSensing { .. } => "ms",
            CompositeModel::BlindDeconv { .. } => "bd",
            CompositeModel::Linear { .. } => "linear",
        }
    }

    /// Number of measurement components in one sample (response excluded).
    pub fn measurement_len(&self) -> usize {
        match *self {
            CompositeModel::PhaseRetrieval { d } | CompositeModel::Linear { d } => d,
            CompositeModel::MatrixSensing { dim, .. } => dim * dim,
            CompositeModel::BlindDeconv { d1, d2 } => d1 + d2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            CompositeModel::PhaseRetrieval { d } | CompositeModel::Linear { d } => d >= 1,
            CompositeModel::MatrixSensing { dim, rank } => dim >= 1 && rank >= 1,
            CompositeModel::BlindDeconv { d1, d2 } => d1 >= 1 && d2 >= 1,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("model {self:?} has a zero dimension")))
        }
    }

    /// Checks that `xi` belongs to this model family.
    pub fn check_sample(&self, xi: &SampleXi) -> Result<()> {
        match (*self, xi) {
            (CompositeModel::PhaseRetrieval { d }, SampleXi::PhaseRetrieval { a, .. }) => check_dim(d, a.len()),
            (CompositeModel::Linear { d }, SampleXi::Linear { phi, .. }) => check_dim(d, phi.len()),
            (CompositeModel::MatrixSensing { dim, .. }, SampleXi::MatrixSensing { a, .. }) => {
                check_dim(dim * dim, a.len())
            }
            (CompositeModel::BlindDeconv { d1, d2 }, SampleXi::BlindDeconv { u, v, .. }) => {
                check_dim(d1, u.len())?;
                check_dim(d2, v.len())
            }
            _ => Err(Error::Domain(format!(
                "sample variant does not match model {}",
                self.tag()
            ))),
        }
    }

    /// `c(x; xi)`.
    pub fn c_value(&self, x: &[f64], xi: &SampleXi) -> Result<f64> {
        check_dim(self.param_dim(), x.len())?;
        self.check_sample(xi)?;
        Ok(self.value_unchecked(x, xi))
    }

    /// `grad_x c(x; xi)`, flattened like `x`.
    pub fn c_grad(&self, x: &[f64], xi: &SampleXi) -> Result<Vec<f64>> {
        check_dim(self.param_dim(), x.len())?;
        self.check_sample(xi)?;
        let mut g = vec![0.0; x.len()];
        self.value_grad_unchecked(x, xi, &mut g);
        Ok(g)
    }

    pub(crate) fn value_unchecked(&self, x: &[f64], xi: &SampleXi) -> f64 {
        match (*self, xi) {
            (CompositeModel::PhaseRetrieval { .. }, SampleXi::PhaseRetrieval { a, b }) => {
                let s = dot(a, x);
                s * s - b
            }
            (CompositeModel::Linear { .. }, SampleXi::Linear { phi, b }) => dot(phi, x) - b,
            (CompositeModel::MatrixSensing { dim, rank }, SampleXi::MatrixSensing { a, b }) => {
                let mut total = 0.0;
                for l in 0..rank {
                    let col = &x[l * dim..(l + 1) * dim];
                    for k in 0..dim {
                        let ak = &a[k * dim..(k + 1) * dim];
                        total += col[k] * dot(ak, col);
                    }
                }
                total - b
            }
            (CompositeModel::BlindDeconv { d1, .. }, SampleXi::BlindDeconv { u, v, b }) => {
                dot(u, &x[..d1]) * dot(v, &x[d1..]) - b
            }
            _ => f64::NAN,
        }
    }

    /// Writes the gradient into `grad` (overwriting) and returns the value.
    pub(crate) fn value_grad_unchecked(&self, x: &[f64], xi: &SampleXi, grad: &mut [f64]) -> f64 {
        match (*self, xi) {
            (CompositeModel::PhaseRetrieval { .. }, SampleXi::PhaseRetrieval { a, b }) => {
                let s = dot(a, x);
                for (g, ai) in grad.iter_mut().zip(a) {
                    *g = 2.0 * s * ai;
                }
                s * s - b
            }
            (CompositeModel::Linear { .. }, SampleXi::Linear { phi, b }) => {
                grad.copy_from_slice(phi);
                dot(phi, x) - b
            }
            (CompositeModel::MatrixSensing { dim, rank }, SampleXi::MatrixSensing { a, b }) => {
                // grad column l = (A + A^T) x_l; A is column-major so
                // (A x)_j = sum_k a[k*dim + j] x_k and (A^T x)_j = <a[j*dim..], x>.
                let mut total = 0.0;
                for l in 0..rank {
                    let col = &x[l * dim..(l + 1) * dim];
                    let out = &mut grad[l * dim..(l + 1) * dim];
                    for j in 0..dim {
                        out[j] = dot(&a[j * dim..(j + 1) * dim], col);
                    }
                    total += dot(col, out);
                    for k in 0..dim {
                        let xk = col[k];
                        if xk != 0.0 {
                            let ak = &a[k * dim..(k + 1) * dim];
                            for j in 0..dim {
                                out[j] += ak[j] * xk;
                            }
                        }
                    }
                }
                total - b
            }
            (CompositeModel::BlindDeconv { d1, .. }, SampleXi::BlindDeconv { u, v, b }) => {
                let (y, w) = x.split_at(d1);
                let uy = dot(u, y);
                let vw = dot(v, w);
                let (gy, gw) = grad.split_at_mut(d1);
                for (g, ui) in gy.iter_mut().zip(u) {
                    *g = vw * ui;
                }
                for (g, vi) in gw.iter_mut().zip(v) {
                    *g = uy * vi;
                }
                uy * vw - b
            }
            _ => f64::NAN,
        }
    }
}

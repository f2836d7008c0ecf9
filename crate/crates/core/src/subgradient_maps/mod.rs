//! Selected subgradients `G_S`, empirical subdifferentials as zonotopes,
//! population oracles and gap measurements.

mod closed_form;
mod gap;
mod oracle;

pub use closed_form::{closed_form_available, closed_form_g};
pub use gap::{
    pointwise_gap, sup_gap_over_ball, write_gap_csv, GapRecord, HausdorffBasis, SupGap, REFINE_STEPS, REFINE_TOP,
};
pub use oracle::{population_g, OracleStrategy, PopulationOracle};

use rayon::prelude::*;

use crate::error::{check_dim, Error, Result};
use crate::linalg::norm;
use crate::models::{CompositeModel, SampleXi};
use crate::scalar_loss::ScalarConvexLoss;
use crate::set_calculus::ConvexBody;

/// Default absolute tolerance for deciding that `c_i` sits at a kink.
pub const KINK_TOL: f64 = 1e-12;

const CHUNK: usize = 2048;

/// `f_S(x) = (1/m) sum_i h(c(x; xi_i))`.
#[derive(Debug, Clone)]
pub struct EmpiricalObjective {
    model: CompositeModel,
    loss: ScalarConvexLoss,
    data: Vec<SampleXi>,
    kink_tol: f64,
}

/// Sums `f(i)` for `i < m` in fixed-size chunks, combining chunk totals in
/// index order so the result does not depend on the thread count.
pub(crate) fn ordered_sum<F>(m: usize, dim: usize, scratch_len: usize, f: F) -> Vec<f64>
where
    F: Fn(usize, &mut [f64], &mut [f64]) + Sync,
{
    let chunks: Vec<Vec<f64>> = (0..m.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![0.0; dim];
            let mut scratch = vec![0.0; scratch_len];
            for i in c * CHUNK..((c + 1) * CHUNK).min(m) {
                f(i, &mut acc, &mut scratch);
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; dim];
    for c in chunks {
        total.iter_mut().zip(c).for_each(|(t, v)| *t += v);
    }
    total
}

impl EmpiricalObjective {
    pub fn new(model: CompositeModel, loss: ScalarConvexLoss, data: Vec<SampleXi>) -> Result<Self> {
        model.validate()?;
        if data.is_empty() {
            return Err(Error::EmptyInput("empirical objective needs at least one sample"));
        }
        for xi in &data {
            model.check_sample(xi)?;
        }
        Ok(Self {
            model,
            loss,
            data,
            kink_tol: KINK_TOL,
        })
    }

    pub fn with_kink_tol(mut self, tol: f64) -> Self {
        self.kink_tol = tol;
        self
    }

    pub fn model(&self) -> &CompositeModel {
        &self.model
    }

    pub fn loss(&self) -> &ScalarConvexLoss {
        &self.loss
    }

    pub fn data(&self) -> &[SampleXi] {
        &self.data
    }

    pub fn m(&self) -> usize {
        self.data.len()
    }

    pub fn dim(&self) -> usize {
        self.model.param_dim()
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        let s = ordered_sum(self.m(), 1, 0, |i, acc, _| {
            acc[0] += self.loss.eval(self.model.value_unchecked(x, &self.data[i]));
        });
        Ok(s[0] / self.m() as f64)
    }

    /// `G_S(x) = (1/m) sum_i g(c_i) grad c_i`.
    pub fn g_s(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        Ok(self.g_s_unchecked(x))
    }

    pub(crate) fn g_s_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let m = self.m() as f64;
        let mut s = ordered_sum(self.m(), self.dim(), self.dim(), |i, acc, grad| {
            let c = self.model.value_grad_unchecked(x, &self.data[i], grad);
            let g = self.loss.selection_g(c);
            if g != 0.0 {
                acc.iter_mut().zip(grad.iter()).for_each(|(a, v)| *a += g * v);
            }
        });
        s.iter_mut().for_each(|v| *v /= m);
        s
    }

    /// Per-sample terms `g(c_i) grad c_i`, used for error estimates.
    pub(crate) fn g_s_with_second_moment(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let d = self.dim();
        let m = self.m() as f64;
        let s = ordered_sum(self.m(), 2 * d, d, |i, acc, g_buf| {
            let c = self.model.value_grad_unchecked(x, &self.data[i], g_buf);
            let g = self.loss.selection_g(c);
            for j in 0..d {
                let t = g * g_buf[j];
                acc[j] += t;
                acc[d + j] += t * t;
            }
        });
        let mean: Vec<f64> = s[..d].iter().map(|v| v / m).collect();
        let second: Vec<f64> = s[d..].iter().map(|v| v / m).collect();
        (mean, second)
    }

    /// `partial f_S(x) = (1/m) sum_i [h'_-(c_i), h'_+(c_i)] grad c_i` as a zonotope;
    /// a sample contributes a generator only when `c_i` is within the kink
    /// tolerance of a kink.
    pub fn empirical_subdiff(&self, x: &[f64]) -> Result<ConvexBody> {
        self.subdiff_inner(x, |_| self.kink_tol)
    }

    /// Enlarged subdifferential: sample `i` is treated as active when `c_i`
    /// lies within `radius * ||grad c_i||` of a kink, i.e. when the kink is
    /// reachable to first order inside the ball of that radius.
    pub fn eps_subdiff(&self, x: &[f64], radius: f64) -> Result<ConvexBody> {
        self.subdiff_inner(x, |gn| self.kink_tol.max(radius * gn))
    }

    fn subdiff_inner(&self, x: &[f64], tol: impl Fn(f64) -> f64) -> Result<ConvexBody> {
        check_dim(self.dim(), x.len())?;
        let d = self.dim();
        let m = self.m() as f64;
        let mut center = vec![0.0; d];
        let mut generators = Vec::new();
        let mut grad = vec![0.0; d];
        for xi in &self.data {
            let c = self.model.value_grad_unchecked(x, xi, &mut grad);
            let (lo, hi) = match self.loss.near_kink(c, tol(norm(&grad))) {
                Some(k) => self.loss.one_sided_derivatives(k.location),
                None => {
                    let g = self.loss.selection_g(c);
                    (g, g)
                }
            };
            let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
            center.iter_mut().zip(&grad).for_each(|(cv, g)| *cv += mid * g / m);
            if half > 0.0 && grad.iter().any(|&g| g != 0.0) {
                generators.push(grad.iter().map(|g| half * g / m).collect());
            }
        }
        ConvexBody::zonotope(center, generators)
    }
}

/// `G_S(x)` for `obj` at `x`.
pub fn g_s(obj: &EmpiricalObjective, x: &[f64]) -> Result<Vec<f64>> {
    obj.g_s(x)
}

pub fn empirical_subdiff(obj: &EmpiricalObjective, x: &[f64]) -> Result<ConvexBody> {
    obj.empirical_subdiff(x)
}

use std::sync::Mutex;

use super::closed_form::{closed_form_g, ensure_closed_form};
use super::EmpiricalObjective;
use crate::error::{check_dim, Error, Result};
use crate::models::{draw_dataset, CompositeModel, DistributionSpec, SampleXi};
use crate::scalar_loss::ScalarConvexLoss;
use crate::set_calculus::ConvexBody;

#[derive(Debug, Clone, PartialEq)]
pub enum OracleStrategy {
    /// `G_S` over an independent dataset of size `m_pop` drawn with `seed`.
    MegaSample { m_pop: usize, seed: u64 },
    /// Exact expectation where a closed form is registered.
    ClosedForm,
    /// A fixed finite distribution given by its atoms (uniform weights).
    Dataset(Vec<SampleXi>),
}

impl OracleStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            OracleStrategy::MegaSample { .. } => "mega_sample",
            OracleStrategy::ClosedForm => "closed_form",
            OracleStrategy::Dataset(_) => "dataset",
        }
    }
}

#[derive(Debug)]
enum Backend {
    Sample { obj: EmpiricalObjective, exact: bool },
    Closed { dist: DistributionSpec, xbar: Vec<f64> },
}

/// Estimator of the population map `G(x) = E[g(c(x; xi)) grad c(x; xi)]`.
#[derive(Debug)]
pub struct PopulationOracle {
    strategy: OracleStrategy,
    model: CompositeModel,
    loss: ScalarConvexLoss,
    backend: Backend,
    last_error: Mutex<Option<f64>>,
}

impl PopulationOracle {
    pub fn new(
        strategy: OracleStrategy,
        model: CompositeModel,
        loss: ScalarConvexLoss,
        dist: &DistributionSpec,
        xbar: &[f64],
    ) -> Result<Self> {
        model.validate()?;
        check_dim(model.param_dim(), xbar.len())?;
        let backend = match &strategy {
            OracleStrategy::MegaSample { m_pop, seed } => {
                let data = draw_dataset(&model, dist, xbar, *m_pop, *seed)?;
                Backend::Sample {
                    obj: EmpiricalObjective::new(model, loss.clone(), data)?,
                    exact: false,
                }
            }
            OracleStrategy::ClosedForm => {
                ensure_closed_form(&model, &loss, dist)?;
                Backend::Closed {
                    dist: dist.clone(),
                    xbar: xbar.to_vec(),
                }
            }
            OracleStrategy::Dataset(data) => Backend::Sample {
                obj: EmpiricalObjective::new(model, loss.clone(), data.clone())?,
                exact: true,
            },
        };
        Ok(Self {
            strategy,
            model,
            loss,
            backend,
            last_error: Mutex::new(None),
        })
    }

    /// Oracle whose distribution is the empirical distribution of `obj`.
    pub fn from_objective(obj: &EmpiricalObjective) -> Self {
        Self {
            strategy: OracleStrategy::Dataset(obj.data().to_vec()),
            model: *obj.model(),
            loss: obj.loss().clone(),
            backend: Backend::Sample {
                obj: obj.clone(),
                exact: true,
            },
            last_error: Mutex::new(None),
        }
    }

    pub fn strategy(&self) -> &OracleStrategy {
        &self.strategy
    }

    pub fn model(&self) -> &CompositeModel {
        &self.model
    }

    pub fn loss(&self) -> &ScalarConvexLoss {
        &self.loss
    }

    /// Error bound reported by the most recent evaluation.
    pub fn cached_error(&self) -> Option<f64> {
        *self.last_error.lock().expect("oracle mutex")
    }

    /// `(G(x), error bound)`. For mega-samples the bound is three times the
    /// norm of the per-coordinate standard errors.
    pub fn evaluate(&self, x: &[f64]) -> Result<(Vec<f64>, f64)> {
        check_dim(self.model.param_dim(), x.len())?;
        let out = match &self.backend {
            Backend::Sample { obj, exact: true } => (obj.g_s_unchecked(x), 0.0),
            Backend::Sample { obj, exact: false } => {
                let (mean, second) = obj.g_s_with_second_moment(x);
                let m = obj.m() as f64;
                let var_sum: f64 = mean
                    .iter()
                    .zip(&second)
                    .map(|(mu, s2)| (s2 - mu * mu).max(0.0) / m)
                    .sum();
                (mean, 3.0 * var_sum.sqrt())
            }
            Backend::Closed { dist, xbar } => closed_form_g(&self.model, &self.loss, dist, xbar, x)?,
        };
        *self.last_error.lock().expect("oracle mutex") = Some(out.1);
        Ok(out)
    }

    /// Exact population subdifferential when the distribution is finite.
    pub fn subdiff(&self, x: &[f64]) -> Option<Result<ConvexBody>> {
        match &self.backend {
            Backend::Sample { obj, exact: true } => Some(obj.empirical_subdiff(x)),
            _ => None,
        }
    }
}

/// One-shot evaluation of `G(x)`; builds the oracle, so prefer
/// [`PopulationOracle::evaluate`] for repeated queries.
pub fn population_g(
    strategy: OracleStrategy,
    model: &CompositeModel,
    loss: &ScalarConvexLoss,
    dist: &DistributionSpec,
    xbar: &[f64],
    x: &[f64],
) -> Result<(Vec<f64>, f64)> {
    if model.param_dim() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: model.param_dim(),
            got: x.len(),
        });
    }
    PopulationOracle::new(strategy, *model, loss.clone(), dist, xbar)?.evaluate(x)
}

use std::fmt;
use std::sync::Arc;

use rand::Rng as _;
use rand_distr::{Cauchy, Distribution, StandardNormal};
use rayon::prelude::*;

use super::{CompositeModel, SampleXi};
use crate::error::{check_dim, Error, Result};
use crate::rng::{rng_from, Rng};

/// Law of the measurement vectors (`a`, `A`, `u`, `v`, `phi`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Measurement {
    /// i.i.d. `N(0, sigma^2)` coordinates.
    Gaussian { sigma: f64 },
    /// i.i.d. coordinates uniform on `{-sigma/4, +sigma/4}`.
    RademacherCube { sigma: f64 },
}

impl Measurement {
    pub fn sigma(&self) -> f64 {
        match *self {
            Measurement::Gaussian { sigma } | Measurement::RademacherCube { sigma } => sigma,
        }
    }

    fn draw(&self, rng: &mut Rng, n: usize) -> Vec<f64> {
        match *self {
            Measurement::Gaussian { sigma } => (0..n).map(|_| sigma * rng.sample::<f64, _>(StandardNormal)).collect(),
            Measurement::RademacherCube { sigma } => (0..n)
                .map(|_| if rng.gen::<bool>() { 0.25 * sigma } else { -0.25 * sigma })
                .collect(),
        }
    }
}

/// How the response `b` is produced from the clean value at the ground truth.
#[derive(Clone)]
pub enum Response {
    /// `b` equals the clean measurement, so `c(xbar; xi) = 0`.
    Noiseless,
    AdditiveGaussian {
        std: f64,
    },
    Custom(Arc<dyn Fn(f64, &mut Rng) -> f64 + Send + Sync>),
}

impl fmt::Debug for Response {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Response::Noiseless => write!(f, "Noiseless"),
            Response::AdditiveGaussian { std } => write!(f, "AdditiveGaussian({std})"),
            Response::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// Heavy-tailed corruption hook: with probability `prob` the response is
/// replaced by `scale` times a standard Cauchy draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Corruption {
    pub prob: f64,
    pub scale: f64,
}

#[derive(Debug, Clone)]
pub struct DistributionSpec {
    pub measurement: Measurement,
    pub response: Response,
    pub corruption: Option<Corruption>,
}

impl DistributionSpec {
    pub fn gaussian(sigma: f64) -> Self {
        Self {
            measurement: Measurement::Gaussian { sigma },
            response: Response::Noiseless,
            corruption: None,
        }
    }

    pub fn rademacher(sigma: f64) -> Self {
        Self {
            measurement: Measurement::RademacherCube { sigma },
            response: Response::Noiseless,
            corruption: None,
        }
    }

    pub fn is_noiseless(&self) -> bool {
        matches!(self.response, Response::Noiseless) && self.corruption.is_none()
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.measurement.sigma();
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::Domain(format!("sigma {s} must be positive")));
        }
        if let Some(c) = self.corruption {
            if !(0.0..=1.0).contains(&c.prob) || !(c.scale > 0.0) {
                return Err(Error::Domain(format!("bad corruption {c:?}")));
            }
        }
        Ok(())
    }

    /// Draws sample `index` of a stream keyed by `seed`.
    pub fn draw_one(&self, model: &CompositeModel, xbar: &[f64], seed: u64, index: u64) -> SampleXi {
        let mut rng = rng_from(seed, &[index]);
        let meas = self.measurement;
        let xi = match *model {
            CompositeModel::PhaseRetrieval { d } => SampleXi::PhaseRetrieval {
                a: meas.draw(&mut rng, d),
                b: 0.0,
            },
            CompositeModel::Linear { d } => SampleXi::Linear {
                phi: meas.draw(&mut rng, d),
                b: 0.0,
            },
            CompositeModel::MatrixSensing { dim, .. } => SampleXi::MatrixSensing {
                a: meas.draw(&mut rng, dim * dim),
                b: 0.0,
            },
            CompositeModel::BlindDeconv { d1, d2 } => SampleXi::BlindDeconv {
                u: meas.draw(&mut rng, d1),
                v: meas.draw(&mut rng, d2),
                b: 0.0,
            },
        };
        let clean = model.value_unchecked(xbar, &xi);
        let mut b = match &self.response {
            Response::Noiseless => clean,
            Response::AdditiveGaussian { std } => clean + std * rng.sample::<f64, _>(StandardNormal),
            Response::Custom(f) => f(clean, &mut rng),
        };
        if let Some(c) = self.corruption {
            if rng.gen::<f64>() < c.prob {
                b = c.scale * Cauchy::new(0.0, 1.0).expect("unit Cauchy").sample(&mut rng);
            }
        }
        xi.with_response(b)
    }
}

/// Draws `m` i.i.d. samples. Sample `i` depends only on `(seed, i)`, so the
/// output does not depend on the number of worker threads.
pub fn draw_dataset(
    model: &CompositeModel,
    dist: &DistributionSpec,
    xbar: &[f64],
    m: usize,
    seed: u64,
) -> Result<Vec<SampleXi>> {
    model.validate()?;
    dist.validate()?;
    check_dim(model.param_dim(), xbar.len())?;
    if m == 0 {
        return Err(Error::Domain("dataset size m must be at least 1".into()));
    }
    Ok((0..m as u64)
        .into_par_iter()
        .map(|i| dist.draw_one(model, xbar, seed, i))
        .collect())
}

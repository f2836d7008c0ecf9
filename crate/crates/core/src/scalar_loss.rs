//! One-dimensional closed convex losses written as a smooth part plus a
//! finite sum of hinge kinks, `h(z) = h_sm(z) + sum_j a_j (z - t_j)_+`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::set_calculus::ConvexBody;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A kink at `location` where the derivative jumps up by `jump > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinkSpec {
    pub location: f64,
    pub jump: f64,
}

#[derive(Clone)]
pub struct ScalarConvexLoss {
    name: String,
    kinks: Vec<KinkSpec>,
    smooth_value: ScalarFn,
    smooth_deriv: ScalarFn,
    /// Closed-form `h`, when known, used to audit the decomposition.
    reference: Option<ScalarFn>,
    lipschitz: bool,
}

impl fmt::Debug for ScalarConvexLoss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarConvexLoss")
            .field("name", &self.name)
            .field("kinks", &self.kinks)
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

impl ScalarConvexLoss {
    /// Builds a loss from its kinks and smooth part. Kink locations must be
    /// strictly increasing with positive jumps, and the smooth derivative
    /// must be nondecreasing on a probe grid.
    pub fn new(
        name: impl Into<String>,
        kinks: Vec<KinkSpec>,
        smooth_value: ScalarFn,
        smooth_deriv: ScalarFn,
    ) -> Result<Self> {
        for k in &kinks {
            if !(k.jump > 0.0) || !k.jump.is_finite() || !k.location.is_finite() {
                return Err(Error::InvalidLoss(format!("bad kink {k:?}")));
            }
        }
        if kinks.windows(2).any(|w| w[0].location >= w[1].location) {
            return Err(Error::InvalidLoss("kink locations must be strictly increasing".into()));
        }
        let loss = Self {
            name: name.into(),
            kinks,
            smooth_value,
            smooth_deriv,
            reference: None,
            lipschitz: true,
        };
        let grid: Vec<f64> = (-400..=400).map(|i| i as f64 * 0.05).collect();
        if let Some(bad) = loss.monotonicity_violation(&grid) {
            return Err(Error::InvalidLoss(format!(
                "smooth derivative decreases near z = {bad}"
            )));
        }
        Ok(loss)
    }

    pub fn with_reference(mut self, h: ScalarFn) -> Self {
        self.reference = Some(h);
        self
    }

    pub fn with_lipschitz(mut self, lipschitz: bool) -> Self {
        self.lipschitz = lipschitz;
        self
    }

    /// `h(z) = |z|` with `h_sm(z) = -z` and one kink of jump 2 at 0.
    pub fn abs() -> Self {
        Self::new(
            "abs",
            vec![KinkSpec {
                location: 0.0,
                jump: 2.0,
            }],
            Arc::new(|z| -z),
            Arc::new(|_| -1.0),
        )
        .expect("abs loss is valid")
        .with_reference(Arc::new(f64::abs))
    }

    /// `h(z) = max(z, 0)`.
    pub fn hinge() -> Self {
        Self::new(
            "hinge",
            vec![KinkSpec {
                location: 0.0,
                jump: 1.0,
            }],
            Arc::new(|_| 0.0),
            Arc::new(|_| 0.0),
        )
        .expect("hinge loss is valid")
        .with_reference(Arc::new(|z: f64| z.max(0.0)))
    }

    /// Quantile loss `h(z) = alpha z_+ + (1 - alpha)(-z)_+`, `alpha` in (0,1).
    pub fn pinball(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidLoss(format!("pinball alpha {alpha} not in (0,1)")));
        }
        Ok(Self::new(
            format!("pinball({alpha})"),
            vec![KinkSpec {
                location: 0.0,
                jump: 1.0,
            }],
            Arc::new(move |z| (alpha - 1.0) * z),
            Arc::new(move |_| alpha - 1.0),
        )?
        .with_reference(Arc::new(move |z: f64| {
            alpha * z.max(0.0) + (1.0 - alpha) * (-z).max(0.0)
        })))
    }

    /// `h(z) = z^2`; smooth but not globally Lipschitz.
    pub fn square() -> Self {
        Self::new("square", Vec::new(), Arc::new(|z| z * z), Arc::new(|z| 2.0 * z))
            .expect("square loss is valid")
            .with_reference(Arc::new(|z: f64| z * z))
            .with_lipschitz(false)
    }

    /// Convex piecewise-linear loss with `slopes[i]` on the `i`-th piece
    /// between consecutive `breakpoints`, and `h(0) = value_at_zero`.
    /// Equal neighbouring slopes are merged.
    pub fn piecewise_linear(breakpoints: &[f64], slopes: &[f64], value_at_zero: f64) -> Result<Self> {
        if slopes.len() != breakpoints.len() + 1 {
            return Err(Error::InvalidLoss("need one more slope than breakpoints".into()));
        }
        if slopes.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidLoss("slopes must be nondecreasing".into()));
        }
        let kinks: Vec<KinkSpec> = breakpoints
            .iter()
            .zip(slopes.windows(2))
            .filter(|(_, w)| w[1] > w[0])
            .map(|(&t, w)| KinkSpec {
                location: t,
                jump: w[1] - w[0],
            })
            .collect();
        // h_sm(z) = s0 z + const, chosen so that h(0) = value_at_zero.
        let s0 = slopes[0];
        let ns0: f64 = kinks.iter().map(|k| k.jump * (-k.location).max(0.0)).sum();
        let offset = value_at_zero - ns0;
        Self::new(
            "piecewise_linear",
            kinks,
            Arc::new(move |z| s0 * z + offset),
            Arc::new(move |_| s0),
        )
    }

    /// Scales the loss by `alpha > 0`.
    pub fn scaled(&self, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidLoss(format!("scale {alpha} must be positive")));
        }
        let hv = self.smooth_value.clone();
        let hd = self.smooth_deriv.clone();
        let mut out = Self {
            name: format!("{alpha}*{}", self.name),
            kinks: self
                .kinks
                .iter()
                .map(|k| KinkSpec {
                    location: k.location,
                    jump: alpha * k.jump,
                })
                .collect(),
            smooth_value: Arc::new(move |z| alpha * hv(z)),
            smooth_deriv: Arc::new(move |z| alpha * hd(z)),
            reference: None,
            lipschitz: self.lipschitz,
        };
        if let Some(r) = self.reference.clone() {
            out.reference = Some(Arc::new(move |z| alpha * r(z)));
        }
        Ok(out)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kinks(&self) -> &[KinkSpec] {
        &self.kinks
    }

    pub fn is_lipschitz(&self) -> bool {
        self.lipschitz
    }

    pub fn smooth_value(&self, z: f64) -> f64 {
        (self.smooth_value)(z)
    }

    pub fn smooth_deriv(&self, z: f64) -> f64 {
        (self.smooth_deriv)(z)
    }

    pub fn nonsmooth_value(&self, z: f64) -> f64 {
        self.kinks.iter().map(|k| k.jump * (z - k.location).max(0.0)).sum()
    }

    /// `h(z) = h_sm(z) + h_ns(z)`.
    pub fn eval(&self, z: f64) -> f64 {
        self.smooth_value(z) + self.nonsmooth_value(z)
    }

    /// `[h'_-(z), h'_+(z)]`.
    pub fn subdiff_interval(&self, z: f64) -> ConvexBody {
        let (lo, hi) = self.one_sided_derivatives(z);
        ConvexBody::interval(lo, hi).expect("one-sided derivatives are ordered")
    }

    /// `(h'_-(z), h'_+(z))`.
    pub fn one_sided_derivatives(&self, z: f64) -> (f64, f64) {
        let g = self.smooth_deriv(z);
        let left: f64 = self.kinks.iter().filter(|k| k.location < z).map(|k| k.jump).sum();
        let at: f64 = self.kinks.iter().filter(|k| k.location == z).map(|k| k.jump).sum();
        (g + left, g + left + at)
    }

    /// Right-continuous selection `g(z) = g_sm(z) + sum_j a_j 1(z >= t_j)`.
    pub fn selection_g(&self, z: f64) -> f64 {
        self.smooth_deriv(z)
            + self
                .kinks
                .iter()
                .filter(|k| z >= k.location)
                .map(|k| k.jump)
                .sum::<f64>()
    }

    /// Whether `z` lies within `tol` of a kink.
    pub fn near_kink(&self, z: f64, tol: f64) -> Option<KinkSpec> {
        self.kinks.iter().find(|k| (z - k.location).abs() <= tol).copied()
    }

    /// `zeta = 1 + sum_j a_j`.
    pub fn zeta(&self) -> f64 {
        1.0 + self.kinks.iter().map(|k| k.jump).sum::<f64>()
    }

    fn monotonicity_violation(&self, grid: &[f64]) -> Option<f64> {
        let mut sorted = grid.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        sorted
            .windows(2)
            .find(|w| self.smooth_deriv(w[1]) < self.smooth_deriv(w[0]) - 1e-12)
            .map(|w| w[0])
    }

    /// Audits the decomposition on `grid`.
    pub fn decompose_check(&self, grid: &[f64]) -> Result<DecomposeReport> {
        if grid.is_empty() {
            return Err(Error::EmptyInput("decompose_check grid"));
        }
        let mut report = DecomposeReport::default();
        if let Some(h) = &self.reference {
            for &z in grid {
                let r = (h(z) - self.eval(z)).abs();
                if r > report.max_residual {
                    report.max_residual = r;
                }
                if r > 1e-9 * (1.0 + z.abs()) {
                    report.violations.push(Violation::Reconstruction { z, residual: r });
                }
            }
        } else {
            report.reference_missing = true;
        }
        let eps = 1e-7;
        for k in &self.kinks {
            let l = self.smooth_deriv(k.location - eps);
            let r = self.smooth_deriv(k.location + eps);
            let gap = (r - l).abs();
            report.max_continuity_gap = report.max_continuity_gap.max(gap);
            if gap > 1e-6 {
                report.violations.push(Violation::SmoothJump { t: k.location, gap });
            }
        }
        if let Some(z) = self.monotonicity_violation(grid) {
            report.violations.push(Violation::NonMonotone { z });
        }
        // midpoint convexity of the reconstructed h
        let mut sorted = grid.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        for w in sorted.windows(3) {
            let (a, b) = (w[0], w[2]);
            let mid = 0.5 * (a + b);
            let excess = self.eval(mid) - 0.5 * (self.eval(a) + self.eval(b));
            if excess > 1e-9 * (1.0 + self.eval(a).abs() + self.eval(b).abs()) {
                report.violations.push(Violation::NonConvex { z: mid });
                break;
            }
        }
        Ok(report)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Reconstruction { z: f64, residual: f64 },
    SmoothJump { t: f64, gap: f64 },
    NonMonotone { z: f64 },
    NonConvex { z: f64 },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DecomposeReport {
    pub max_residual: f64,
    pub max_continuity_gap: f64,
    pub reference_missing: bool,
    pub violations: Vec<Violation>,
}

impl DecomposeReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Built-in loss by name: `abs`, `hinge`, `square`, `pinball(alpha)`.
pub fn builtin(name: &str) -> Result<ScalarConvexLoss> {
    match name {
        "abs" => Ok(ScalarConvexLoss::abs()),
        "hinge" => Ok(ScalarConvexLoss::hinge()),
        "square" => Ok(ScalarConvexLoss::square()),
        other => {
            if let Some(arg) = other.strip_prefix("pinball(").and_then(|s| s.strip_suffix(')')) {
                let alpha: f64 = arg
                    .parse()
                    .map_err(|_| Error::InvalidLoss(format!("bad pinball level {arg}")))?;
                ScalarConvexLoss::pinball(alpha)
            } else {
                Err(Error::InvalidLoss(format!("unknown loss {other}")))
            }
        }
    }
}

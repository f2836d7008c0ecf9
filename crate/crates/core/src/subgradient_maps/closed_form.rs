//! Exact population subgradients `G(x) = E[g(c(x; xi)) grad c(x; xi)]` for
//! Gaussian measurements with noiseless responses.
//!
//! Supported losses are the "sign-affine" ones, whose derivative is a
//! constant `s0` plus jumps located at zero (abs, hinge, pinball), so that
//! `g(c) = (s0 + J/2) + (J/2) sgn(c)` with `sgn(0) = +1`. The square loss is
//! also supported for the linear model. Each model reduces `E[sgn(c) grad c]`
//! to a two-dimensional problem:
//!
//! * phase retrieval: `(2 s^2 / pi) (int_0^{2pi} sgn(e^T M e) e e^T dtheta) p`
//!   in an orthonormal basis of `span{x, xbar}`, `M = p p^T - q q^T`, with the
//!   arcs split at the roots of `e^T M e` and integrated in closed form;
//! * matrix sensing: `2 s sqrt(2/pi) M X / ||M||_F` with `M = X X^T - Xbar Xbar^T`;
//! * blind deconvolution: conditioning on one factor leaves a Gaussian
//!   half-space expectation, and the remaining angular integral is computed by
//!   adaptive Gauss-Legendre quadrature;
//! * linear: `s sqrt(2/pi) (x - xbar) / ||x - xbar||`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm};
use crate::models::{CompositeModel, DistributionSpec, Measurement, Response};
use crate::scalar_loss::ScalarConvexLoss;

const QUAD_TOL: f64 = 1e-13;

enum LossForm {
    SignAffine { base: f64, half_jump: f64 },
    Square,
}

fn loss_form(loss: &ScalarConvexLoss) -> Option<LossForm> {
    let probes = [-3.0, -1.0, -0.25, 0.0, 0.5, 2.0, 7.0];
    let s0 = loss.smooth_deriv(0.0);
    if loss.kinks().iter().all(|k| k.location == 0.0) && probes.iter().all(|&z| loss.smooth_deriv(z) == s0) {
        let jump: f64 = loss.kinks().iter().map(|k| k.jump).sum();
        return Some(LossForm::SignAffine {
            base: s0 + 0.5 * jump,
            half_jump: 0.5 * jump,
        });
    }
    if loss.kinks().is_empty()
        && probes
            .iter()
            .all(|&z| (loss.smooth_deriv(z) - 2.0 * z).abs() <= 1e-15 * (1.0 + z.abs()))
    {
        return Some(LossForm::Square);
    }
    None
}

/// Whether [`closed_form_g`] supports this combination.
pub fn closed_form_available(model: &CompositeModel, loss: &ScalarConvexLoss, dist: &DistributionSpec) -> bool {
    closed_form_check(model, loss, dist).is_ok()
}

fn closed_form_check(
    model: &CompositeModel,
    loss: &ScalarConvexLoss,
    dist: &DistributionSpec,
) -> Result<(f64, LossForm)> {
    let unavailable =
        |why: &str| Error::OracleUnavailable(format!("closed form for {}/{}: {why}", model.tag(), loss.name()));
    let sigma = match dist.measurement {
        Measurement::Gaussian { sigma } => sigma,
        Measurement::RademacherCube { .. } => return Err(unavailable("requires Gaussian measurements")),
    };
    let form = loss_form(loss).ok_or_else(|| unavailable("unsupported loss"))?;
    match form {
        LossForm::Square => {
            let noise_ok = dist.corruption.is_none()
                && matches!(dist.response, Response::Noiseless | Response::AdditiveGaussian { .. });
            if !matches!(model, CompositeModel::Linear { .. }) || !noise_ok {
                return Err(unavailable("square loss only for the linear model"));
            }
        }
        LossForm::SignAffine { .. } => {
            if !dist.is_noiseless() {
                return Err(unavailable("requires noiseless responses"));
            }
        }
    }
    Ok((sigma, form))
}

pub(crate) fn ensure_closed_form(
    model: &CompositeModel,
    loss: &ScalarConvexLoss,
    dist: &DistributionSpec,
) -> Result<()> {
    closed_form_check(model, loss, dist).map(|_| ())
}

/// Exact `G(x)` for the supported (model, loss, distribution) combinations.
pub fn closed_form_g(
    model: &CompositeModel,
    loss: &ScalarConvexLoss,
    dist: &DistributionSpec,
    xbar: &[f64],
    x: &[f64],
) -> Result<(Vec<f64>, f64)> {
    let (sigma, form) = closed_form_check(model, loss, dist)?;
    crate::error::check_dim(model.param_dim(), xbar.len())?;
    crate::error::check_dim(model.param_dim(), x.len())?;
    let (base, half_jump) = match form {
        LossForm::Square => {
            let g = x.iter().zip(xbar).map(|(a, b)| 2.0 * sigma * sigma * (a - b)).collect();
            return Ok((g, 0.0));
        }
        LossForm::SignAffine { base, half_jump } => (base, half_jump),
    };
    let (signed, err) = match *model {
        CompositeModel::PhaseRetrieval { .. } => (pr_signed(sigma, xbar, x), 0.0),
        CompositeModel::MatrixSensing { dim, rank } => (ms_signed(sigma, dim, rank, xbar, x), 0.0),
        CompositeModel::BlindDeconv { d1, .. } => bd_signed(sigma, d1, xbar, x),
        CompositeModel::Linear { .. } => (linear_signed(sigma, xbar, x), 0.0),
    };
    let mut g: Vec<f64> = signed.iter().map(|v| half_jump * v).collect();
    if base != 0.0 {
        if let CompositeModel::PhaseRetrieval { .. } = model {
            for (gi, xi) in g.iter_mut().zip(x) {
                *gi += base * 2.0 * sigma * sigma * xi;
            }
        }
    }
    Ok((g, half_jump.abs() * err))
}

/// Orthonormal basis of `span{u, v}` (`u` first) with one or two vectors.
fn basis2(u: &[f64], v: &[f64]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for w in [u, v] {
        let mut r = w.to_vec();
        for e in &out {
            let c = dot(e, &r);
            r.iter_mut().zip(e).for_each(|(ri, ei)| *ri -= c * ei);
        }
        // second Gram-Schmidt pass for accuracy
        for e in &out {
            let c = dot(e, &r);
            r.iter_mut().zip(e).for_each(|(ri, ei)| *ri -= c * ei);
        }
        let n = norm(&r);
        if n > 1e-13 * norm(w).max(f64::MIN_POSITIVE) && n > 0.0 {
            out.push(r.iter().map(|v| v / n).collect());
        }
    }
    out
}

fn coords(basis: &[Vec<f64>], w: &[f64]) -> [f64; 2] {
    let mut c = [0.0; 2];
    for (i, e) in basis.iter().enumerate() {
        c[i] = dot(e, w);
    }
    c
}

fn lift(basis: &[Vec<f64>], c: [f64; 2], dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    for (i, e) in basis.iter().enumerate() {
        out.iter_mut().zip(e).for_each(|(o, ei)| *o += c[i] * ei);
    }
    out
}

/// `int_a^b e e^T dtheta` as `(xx, xy, yy)`.
fn arc_moments(a: f64, b: f64) -> (f64, f64, f64) {
    let ds2 = ((2.0 * b).sin() - (2.0 * a).sin()) / 4.0;
    let half = (b - a) / 2.0;
    let xy = (b.sin().powi(2) - a.sin().powi(2)) / 2.0;
    (half + ds2, xy, half - ds2)
}

/// Arc endpoints in `[0, 2 pi]` splitting the circle where the quadratic
/// form `e^T M e` changes sign, together with the sign on each arc.
fn sign_arcs(m11: f64, m12: f64, m22: f64) -> Vec<(f64, f64, f64)> {
    let mean = 0.5 * (m11 + m22);
    let half_diff = 0.5 * (m11 - m22);
    let amp = half_diff.hypot(m12);
    let mut cuts = vec![0.0, 2.0 * PI];
    if amp > 0.0 && (mean / amp).abs() <= 1.0 {
        let phi = m12.atan2(half_diff);
        let psi = (-mean / amp).acos();
        for base in [phi + psi, phi - psi] {
            for k in -2..=2 {
                let t = 0.5 * base + PI * k as f64;
                if t > 0.0 && t < 2.0 * PI {
                    cuts.push(t);
                }
            }
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite angles"));
    cuts.dedup();
    cuts.windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            let (c, s) = (mid.cos(), mid.sin());
            let q = m11 * c * c + 2.0 * m12 * c * s + m22 * s * s;
            (w[0], w[1], if q >= 0.0 { 1.0 } else { -1.0 })
        })
        .collect()
}

fn pr_signed(sigma: f64, xbar: &[f64], x: &[f64]) -> Vec<f64> {
    let d = x.len();
    let basis = basis2(xbar, x);
    if basis.is_empty() {
        return vec![0.0; d];
    }
    let p = coords(&basis, x);
    let q = coords(&basis, xbar);
    let m11 = p[0] * p[0] - q[0] * q[0];
    let m12 = p[0] * p[1] - q[0] * q[1];
    let m22 = p[1] * p[1] - q[1] * q[1];
    let (mut s11, mut s12, mut s22) = (0.0, 0.0, 0.0);
    for (a, b, s) in sign_arcs(m11, m12, m22) {
        let (xx, xy, yy) = arc_moments(a, b);
        s11 += s * xx;
        s12 += s * xy;
        s22 += s * yy;
    }
    let k = 2.0 * sigma * sigma / PI;
    let g = [k * (s11 * p[0] + s12 * p[1]), k * (s12 * p[0] + s22 * p[1])];
    lift(&basis, g, d)
}

fn ms_signed(sigma: f64, dim: usize, rank: usize, xbar: &[f64], x: &[f64]) -> Vec<f64> {
    let gram = |z: &[f64], i: usize, j: usize| (0..rank).map(|r| z[r * dim + i] * z[r * dim + j]).sum::<f64>();
    let mut m = vec![0.0; dim * dim];
    for j in 0..dim {
        for i in 0..dim {
            m[j * dim + i] = gram(x, i, j) - gram(xbar, i, j);
        }
    }
    let fro = norm(&m);
    if fro == 0.0 {
        return vec![0.0; dim * rank];
    }
    let k = 2.0 * sigma * (2.0 / PI).sqrt() / fro;
    let mut out = vec![0.0; dim * rank];
    for r in 0..rank {
        for i in 0..dim {
            out[r * dim + i] = k * (0..dim).map(|l| m[l * dim + i] * x[r * dim + l]).sum::<f64>();
        }
    }
    out
}

fn linear_signed(sigma: f64, xbar: &[f64], x: &[f64]) -> Vec<f64> {
    let diff: Vec<f64> = x.iter().zip(xbar).map(|(a, b)| a - b).collect();
    let n = norm(&diff);
    if n == 0.0 {
        return diff;
    }
    let k = sigma * (2.0 / PI).sqrt() / n;
    diff.iter().map(|v| k * v).collect()
}

/// `E[sgn(<u,y><v,w> - <u,ybar><v,wbar>) <v,w> u]` over Gaussian `u, v`,
/// returned together with a quadrature error estimate.
fn bd_block(sigma: f64, y: &[f64], ybar: &[f64], w: &[f64], wbar: &[f64]) -> (Vec<f64>, f64) {
    let d1 = y.len();
    let by = basis2(y, ybar);
    let bw = basis2(w, wbar);
    if by.is_empty() || bw.is_empty() {
        return (vec![0.0; d1], 0.0);
    }
    let (yy, yb) = (coords(&by, y), coords(&by, ybar));
    let (p, q) = (coords(&bw, w), coords(&bw, wbar));
    // z(theta) = C e(theta) with C = Y p^T - Ybar q^T
    let c = [
        [yy[0] * p[0] - yb[0] * q[0], yy[0] * p[1] - yb[0] * q[1]],
        [yy[1] * p[0] - yb[1] * q[0], yy[1] * p[1] - yb[1] * q[1]],
    ];
    let integrand = |t: f64| -> [f64; 2] {
        let e = [t.cos(), t.sin()];
        let z = [c[0][0] * e[0] + c[0][1] * e[1], c[1][0] * e[0] + c[1][1] * e[1]];
        let nz = z[0].hypot(z[1]);
        if nz == 0.0 {
            return [0.0, 0.0];
        }
        let alpha = p[0] * e[0] + p[1] * e[1];
        [alpha * z[0] / nz, alpha * z[1] / nz]
    };
    let mut cuts = vec![0.0, 2.0 * PI];
    let cn = c.iter().flatten().map(|v| v * v).sum::<f64>();
    let det = c[0][0] * c[1][1] - c[0][1] * c[1][0];
    if det.abs() <= 1e-12 * cn {
        // rank one: z vanishes where e is orthogonal to the row space
        let row = if c[0][0].hypot(c[0][1]) >= c[1][0].hypot(c[1][1]) {
            c[0]
        } else {
            c[1]
        };
        let t0 = row[1].atan2(row[0]) + 0.5 * PI;
        for k in -2..=2 {
            let t = t0 + PI * k as f64;
            if t > 0.0 && t < 2.0 * PI {
                cuts.push(t);
            }
        }
    }
    for i in 1..16 {
        cuts.push(2.0 * PI * i as f64 / 16.0);
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite angles"));
    cuts.dedup();
    let mut total = [0.0; 2];
    let mut err = 0.0;
    for wdw in cuts.windows(2) {
        let (v, e) = adaptive_gl(&integrand, wdw[0], wdw[1], QUAD_TOL, 0);
        total[0] += v[0];
        total[1] += v[1];
        err += e;
    }
    let k = sigma * sigma / (2.0 * PI);
    (lift(&by, [k * total[0], k * total[1]], d1), k * err)
}

const GL_NODES: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_WEIGHTS: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

fn gl8(f: &impl Fn(f64) -> [f64; 2], a: f64, b: f64) -> [f64; 2] {
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    let mut s = [0.0; 2];
    for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
        for t in [mid - half * x, mid + half * x] {
            let v = f(t);
            s[0] += w * v[0];
            s[1] += w * v[1];
        }
    }
    [half * s[0], half * s[1]]
}

fn adaptive_gl(f: &impl Fn(f64) -> [f64; 2], a: f64, b: f64, tol: f64, depth: usize) -> ([f64; 2], f64) {
    let whole = gl8(f, a, b);
    let m = 0.5 * (a + b);
    let (l, r) = (gl8(f, a, m), gl8(f, m, b));
    let halves = [l[0] + r[0], l[1] + r[1]];
    let diff = (halves[0] - whole[0]).hypot(halves[1] - whole[1]);
    if diff <= tol || depth >= 40 {
        return (halves, diff);
    }
    let (lv, le) = adaptive_gl(f, a, m, 0.5 * tol, depth + 1);
    let (rv, re) = adaptive_gl(f, m, b, 0.5 * tol, depth + 1);
    ([lv[0] + rv[0], lv[1] + rv[1]], le + re)
}

fn bd_signed(sigma: f64, d1: usize, xbar: &[f64], x: &[f64]) -> (Vec<f64>, f64) {
    let (y, w) = x.split_at(d1);
    let (ybar, wbar) = xbar.split_at(d1);
    let (gy, ey) = bd_block(sigma, y, ybar, w, wbar);
    let (gw, ew) = bd_block(sigma, w, wbar, y, ybar);
    let mut g = gy;
    g.extend(gw);
    (g, ey.hypot(ew))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arc_moments_full_circle() {
        let (xx, xy, yy) = arc_moments(0.0, 2.0 * PI);
        assert!((xx - PI).abs() < 1e-14 && xy.abs() < 1e-14 && (yy - PI).abs() < 1e-14);
    }

    #[test]
    fn pr_at_truth_is_smooth_gradient() {
        let xbar = [0.6, -0.8, 0.0];
        let (g, err) = closed_form_g(
            &CompositeModel::PhaseRetrieval { d: 3 },
            &ScalarConvexLoss::abs(),
            &DistributionSpec::gaussian(1.0),
            &xbar,
            &xbar,
        )
        .unwrap();
        assert_eq!(err, 0.0);
        for (gi, xi) in g.iter().zip(&xbar) {
            assert!((gi - 2.0 * xi).abs() < 1e-14);
        }
    }

    #[test]
    fn pr_orthogonal_symmetry() {
        // x orthogonal to xbar with equal norms: e^T M e = cos(2 theta) up to rotation
        let (g, _) = closed_form_g(
            &CompositeModel::PhaseRetrieval { d: 2 },
            &ScalarConvexLoss::abs(),
            &DistributionSpec::gaussian(1.0),
            &[1.0, 0.0],
            &[0.0, 1.0],
        )
        .unwrap();
        // (2/pi) * int_{|sin|>|cos|} sin^2 - int_{|sin|<|cos|} sin^2 = (2/pi)(pi/2 + 1 - (pi/2 - 1))
        assert!(g[0].abs() < 1e-14);
        assert!((g[1] - 4.0 / PI).abs() < 1e-13, "{}", g[1]);
    }

    #[test]
    fn unsupported_combinations() {
        let dist = DistributionSpec::rademacher(1.0);
        assert!(!closed_form_available(
            &CompositeModel::PhaseRetrieval { d: 2 },
            &ScalarConvexLoss::abs(),
            &dist
        ));
        let gauss = DistributionSpec::gaussian(1.0);
        assert!(!closed_form_available(
            &CompositeModel::PhaseRetrieval { d: 2 },
            &ScalarConvexLoss::square(),
            &gauss
        ));
        assert!(closed_form_available(
            &CompositeModel::Linear { d: 2 },
            &ScalarConvexLoss::square(),
            &gauss
        ));
    }
}

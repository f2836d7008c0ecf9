use super::body::ConvexBody;
use crate::error::{check_dim, Error, Result};

/// Convex hull of a finite point list.
///
/// One distinct point gives a `Point`, one-dimensional input an
/// `Interval1D`, planar input the hull vertices in counter-clockwise order.
/// In higher dimension every point is kept.
pub fn convex_hull(points: &[Vec<f64>]) -> Result<ConvexBody> {
    let first = points.first().ok_or(Error::EmptyInput("convex_hull points"))?;
    let d = first.len();
    for p in points {
        check_dim(d, p.len())?;
    }
    let distinct = points.iter().any(|p| p != first);
    if !distinct {
        return ConvexBody::point(first.clone());
    }
    match d {
        1 => {
            let lo = points.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
            let hi = points.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
            ConvexBody::interval(lo, hi)
        }
        2 => {
            let pts: Vec<[f64; 2]> = points.iter().map(|p| [p[0], p[1]]).collect();
            let hull = monotone_chain(&pts);
            ConvexBody::vpolytope(hull.into_iter().map(|p| vec![p[0], p[1]]).collect())
        }
        _ => ConvexBody::vpolytope(points.to_vec()),
    }
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Andrew's monotone chain; collinear boundary points are dropped.
pub(crate) fn monotone_chain(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }
    let mut lower: Vec<[f64; 2]> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<[f64; 2]> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::set_calculus::Shape;

    #[test]
    fn hull_examples() {
        assert_eq!(
            convex_hull(&[vec![0.0]]).unwrap(),
            ConvexBody::point(vec![0.0]).unwrap()
        );
        assert_eq!(
            convex_hull(&[vec![-1.0], vec![1.0], vec![0.0]]).unwrap(),
            ConvexBody::interval(-1.0, 1.0).unwrap()
        );
        assert!(convex_hull(&[]).is_err());
    }

    #[test]
    fn square_with_interior_point() {
        let pts = vec![
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![1.0, 1.0],
            vec![0.0, 1.0],
            vec![0.5, 0.5],
            vec![0.5, 0.0],
        ];
        match convex_hull(&pts).unwrap().shape() {
            Shape::VPolytope(v) => assert_eq!(v.len(), 4),
            _ => panic!("expected polytope"),
        }
    }
}

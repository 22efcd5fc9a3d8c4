//! Support-function algebra over a small family of convex compact sets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Convex compact set described structurally; support functions and
/// extremal points compose recursively.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConvexSet {
    /// Euclidean ball of the given radius centered at the origin.
    Ball2 { dim: usize, radius: f64 },
    /// Max-norm ball of the given radius centered at the origin.
    BallInf { dim: usize, radius: f64 },
    /// Symmetric segment `{mu * endpoint : mu in [-1, 1]}`.
    Segment { endpoint: Vec<f64> },
    Point { point: Vec<f64> },
    Translate {
        base: Box<ConvexSet>,
        offset: Vec<f64>,
    },
    MinkowskiSum {
        a: Box<ConvexSet>,
        b: Box<ConvexSet>,
    },
    Scale { base: Box<ConvexSet>, factor: f64 },
    /// Cartesian product stacked over coordinate blocks.
    Product {
        a: Box<ConvexSet>,
        b: Box<ConvexSet>,
    },
}

impl ConvexSet {
    pub fn ball2(dim: usize, radius: f64) -> Self {
        ConvexSet::Ball2 { dim, radius }
    }

    pub fn ball_inf(dim: usize, radius: f64) -> Self {
        ConvexSet::BallInf { dim, radius }
    }

    pub fn segment(endpoint: Vec<f64>) -> Self {
        ConvexSet::Segment { endpoint }
    }

    pub fn point(point: Vec<f64>) -> Self {
        ConvexSet::Point { point }
    }

    pub fn origin(dim: usize) -> Self {
        ConvexSet::Point {
            point: vec![0.0; dim],
        }
    }

    pub fn translate(self, offset: Vec<f64>) -> Self {
        ConvexSet::Translate {
            base: Box::new(self),
            offset,
        }
    }

    pub fn minkowski_sum(self, other: ConvexSet) -> Self {
        ConvexSet::MinkowskiSum {
            a: Box::new(self),
            b: Box::new(other),
        }
    }

    pub fn scale(self, factor: f64) -> Self {
        ConvexSet::Scale {
            base: Box::new(self),
            factor,
        }
    }

    pub fn product(self, other: ConvexSet) -> Self {
        ConvexSet::Product {
            a: Box::new(self),
            b: Box::new(other),
        }
    }

    /// Ambient dimension.
    pub fn dim(&self) -> usize {
        match self {
            ConvexSet::Ball2 { dim, .. } | ConvexSet::BallInf { dim, .. } => *dim,
            ConvexSet::Segment { endpoint } => endpoint.len(),
            ConvexSet::Point { point } => point.len(),
            ConvexSet::Translate { base, .. } | ConvexSet::Scale { base, .. } => base.dim(),
            ConvexSet::MinkowskiSum { a, .. } => a.dim(),
            ConvexSet::Product { a, b } => a.dim() + b.dim(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ConvexSet::Ball2 { radius, .. } | ConvexSet::BallInf { radius, .. } => {
                if *radius >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidConfig("radius must be nonnegative".into()))
                }
            }
            ConvexSet::Segment { .. } | ConvexSet::Point { .. } => Ok(()),
            ConvexSet::Translate { base, offset } => {
                if base.dim() != offset.len() {
                    return Err(Error::DimensionMismatch {
                        expected: base.dim(),
                        got: offset.len(),
                    });
                }
                base.validate()
            }
            ConvexSet::MinkowskiSum { a, b } => {
                if a.dim() != b.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: a.dim(),
                        got: b.dim(),
                    });
                }
                a.validate()?;
                b.validate()
            }
            ConvexSet::Scale { base, factor } => {
                if *factor < 0.0 {
                    return Err(Error::InvalidConfig(
                        "scale factor must be nonnegative".into(),
                    ));
                }
                base.validate()
            }
            ConvexSet::Product { a, b } => {
                a.validate()?;
                b.validate()
            }
        }
    }
}

/// Support function `s(l; K) = max_{y in K} <l, y>`.
pub fn support(set: &ConvexSet, l: &[f64]) -> f64 {
    debug_assert_eq!(l.len(), set.dim());
    match set {
        ConvexSet::Ball2 { radius, .. } => {
            radius * l.iter().map(|v| v * v).sum::<f64>().sqrt()
        }
        ConvexSet::BallInf { radius, .. } => radius * l.iter().map(|v| v.abs()).sum::<f64>(),
        ConvexSet::Segment { endpoint } => dot(l, endpoint).abs(),
        ConvexSet::Point { point } => dot(l, point),
        ConvexSet::Translate { base, offset } => support(base, l) + dot(l, offset),
        ConvexSet::MinkowskiSum { a, b } => support(a, l) + support(b, l),
        ConvexSet::Scale { base, factor } => factor * support(base, l),
        ConvexSet::Product { a, b } => {
            let da = a.dim();
            support(a, &l[..da]) + support(b, &l[da..])
        }
    }
}

/// One maximizer attaining the support value. The segment picks its
/// positive endpoint for a positive inner product, the negative one for a
/// negative inner product, and the origin on ties; composite sets combine
/// their parts' choices.
pub fn arg_support(set: &ConvexSet, l: &[f64]) -> Vec<f64> {
    debug_assert_eq!(l.len(), set.dim());
    match set {
        ConvexSet::Ball2 { dim, radius } => {
            let norm = l.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                vec![0.0; *dim]
            } else {
                l.iter().map(|v| radius * v / norm).collect()
            }
        }
        ConvexSet::BallInf { radius, .. } => l
            .iter()
            .map(|v| {
                if *v > 0.0 {
                    *radius
                } else if *v < 0.0 {
                    -radius
                } else {
                    0.0
                }
            })
            .collect(),
        ConvexSet::Segment { endpoint } => {
            let d = dot(l, endpoint);
            if d > 0.0 {
                endpoint.clone()
            } else if d < 0.0 {
                endpoint.iter().map(|v| -v).collect()
            } else {
                vec![0.0; endpoint.len()]
            }
        }
        ConvexSet::Point { point } => point.clone(),
        ConvexSet::Translate { base, offset } => {
            let mut y = arg_support(base, l);
            for (yi, oi) in y.iter_mut().zip(offset) {
                *yi += oi;
            }
            y
        }
        ConvexSet::MinkowskiSum { a, b } => {
            let mut y = arg_support(a, l);
            for (yi, bi) in y.iter_mut().zip(arg_support(b, l)) {
                *yi += bi;
            }
            y
        }
        ConvexSet::Scale { base, factor } => {
            let mut y = arg_support(base, l);
            for yi in y.iter_mut() {
                *yi *= factor;
            }
            y
        }
        ConvexSet::Product { a, b } => {
            let da = a.dim();
            let mut y = arg_support(a, &l[..da]);
            y.extend(arg_support(b, &l[da..]));
            y
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball2_support_and_point() {
        let k = ConvexSet::ball2(2, 0.1);
        let l = [0.6, 0.8];
        assert!((support(&k, &l) - 0.1).abs() < 1e-15);
        let y = arg_support(&k, &l);
        assert!((y[0] - 0.06).abs() < 1e-15 && (y[1] - 0.08).abs() < 1e-15);
    }

    #[test]
    fn ball_inf_support() {
        let k = ConvexSet::ball_inf(2, 2.0);
        assert!((support(&k, &[0.6, 0.8]) - 2.8).abs() < 1e-15);
        assert_eq!(arg_support(&k, &[0.6, -0.8]), vec![2.0, -2.0]);
    }

    #[test]
    fn segment_support_and_ties() {
        let k = ConvexSet::segment(vec![1.0, 2.0]);
        assert_eq!(support(&k, &[1.0, 0.0]), 1.0);
        assert_eq!(arg_support(&k, &[1.0, 0.0]), vec![1.0, 2.0]);
        assert_eq!(arg_support(&k, &[-1.0, 0.0]), vec![-1.0, -2.0]);
        // Orthogonal direction: tie resolved at the origin.
        assert_eq!(arg_support(&k, &[2.0, -1.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn support_attained_at_arg_point() {
        let sets = [
            ConvexSet::ball2(3, 1.5),
            ConvexSet::ball_inf(3, 0.7).translate(vec![0.1, -0.2, 0.4]),
            ConvexSet::segment(vec![1.0, 0.0, -2.0])
                .minkowski_sum(ConvexSet::ball2(3, 0.25))
                .scale(2.0),
        ];
        let dirs = [[1.0, 0.0, 0.0], [0.3, -0.4, 0.5], [-1.0, 2.0, 0.1]];
        for set in &sets {
            for l in &dirs {
                let s = support(set, l);
                let y = arg_support(set, l);
                assert!((dot(l, &y) - s).abs() < 1e-12);
            }
        }
    }
}

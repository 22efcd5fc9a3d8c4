//! Differentiable scalar fields and the spherical parametrization of
//! adjoint search spaces.
//!
//! [`ScalarField`] is the closed set of field shapes the CLI can configure;
//! the solver APIs accept anything implementing [`Field`], so programmatic
//! callers may plug in their own (value, gradient) callbacks.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A continuously differentiable scalar field with an analytic gradient.
pub trait Field: Send + Sync {
    /// State dimension the field is defined on.
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    /// Writes the gradient into `grad` and returns the value.
    fn eval_grad_into(&self, x: &[f64], grad: &mut [f64]) -> f64;

    /// Analytic sign information, when the shape guarantees one.
    fn definite_sign(&self) -> Option<Sign> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Negative,
    Positive,
}

/// Closed set of field shapes expressible in the CLI configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScalarField {
    /// `0.5 * <A x, x> + c0` for a symmetric matrix `A` (row-major).
    Quadratic {
        dim: usize,
        matrix: Vec<f64>,
        #[serde(default)]
        offset: f64,
    },
    /// `base + amplitude * exp(-rate * ||x - center||^2)`.
    GaussOffset {
        base: f64,
        amplitude: f64,
        rate: f64,
        center: Vec<f64>,
    },
    Constant { dim: usize, value: f64 },
    /// `0.5 * ||x||^2`.
    NormSquaredHalf { dim: usize },
}

impl ScalarField {
    /// Diagonal quadratic `0.5 * <diag(d) x, x> + offset`.
    pub fn quadratic_diag(diag: &[f64], offset: f64) -> Self {
        let n = diag.len();
        let mut matrix = vec![0.0; n * n];
        for (i, d) in diag.iter().enumerate() {
            matrix[i * n + i] = *d;
        }
        ScalarField::Quadratic {
            dim: n,
            matrix,
            offset,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ScalarField::Quadratic { dim, matrix, .. } => {
                if matrix.len() != dim * dim {
                    return Err(Error::InvalidConfig(format!(
                        "quadratic matrix needs {} entries, got {}",
                        dim * dim,
                        matrix.len()
                    )));
                }
                for i in 0..*dim {
                    for j in 0..i {
                        if (matrix[i * dim + j] - matrix[j * dim + i]).abs() > 1e-12 {
                            return Err(Error::InvalidConfig(
                                "quadratic matrix must be symmetric".into(),
                            ));
                        }
                    }
                }
                Ok(())
            }
            ScalarField::GaussOffset { rate, .. } => {
                if *rate > 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidConfig("gauss rate must be positive".into()))
                }
            }
            _ => Ok(()),
        }
    }
}

impl Field for ScalarField {
    fn dim(&self) -> usize {
        match self {
            ScalarField::Quadratic { dim, .. } => *dim,
            ScalarField::GaussOffset { center, .. } => center.len(),
            ScalarField::Constant { dim, .. } => *dim,
            ScalarField::NormSquaredHalf { dim } => *dim,
        }
    }

    fn value(&self, x: &[f64]) -> f64 {
        match self {
            ScalarField::Quadratic {
                dim,
                matrix,
                offset,
            } => {
                let mut q = 0.0;
                for i in 0..*dim {
                    let mut row = 0.0;
                    for j in 0..*dim {
                        row += matrix[i * dim + j] * x[j];
                    }
                    q += row * x[i];
                }
                0.5 * q + offset
            }
            ScalarField::GaussOffset {
                base,
                amplitude,
                rate,
                center,
            } => {
                let d2: f64 = x
                    .iter()
                    .zip(center)
                    .map(|(xi, ci)| (xi - ci) * (xi - ci))
                    .sum();
                base + amplitude * (-rate * d2).exp()
            }
            ScalarField::Constant { value, .. } => *value,
            ScalarField::NormSquaredHalf { .. } => 0.5 * x.iter().map(|v| v * v).sum::<f64>(),
        }
    }

    fn eval_grad_into(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim());
        debug_assert_eq!(grad.len(), self.dim());
        match self {
            ScalarField::Quadratic {
                dim,
                matrix,
                offset,
            } => {
                let mut q = 0.0;
                for i in 0..*dim {
                    let mut row = 0.0;
                    for j in 0..*dim {
                        row += matrix[i * dim + j] * x[j];
                    }
                    grad[i] = row;
                    q += row * x[i];
                }
                0.5 * q + offset
            }
            ScalarField::GaussOffset {
                base,
                amplitude,
                rate,
                center,
            } => {
                let mut d2 = 0.0;
                for i in 0..x.len() {
                    let d = x[i] - center[i];
                    grad[i] = d;
                    d2 += d * d;
                }
                let bump = amplitude * (-rate * d2).exp();
                for g in grad.iter_mut() {
                    *g *= -2.0 * rate * bump;
                }
                base + bump
            }
            ScalarField::Constant { value, .. } => {
                grad.fill(0.0);
                *value
            }
            ScalarField::NormSquaredHalf { .. } => {
                grad.copy_from_slice(x);
                0.5 * x.iter().map(|v| v * v).sum::<f64>()
            }
        }
    }

    fn definite_sign(&self) -> Option<Sign> {
        match self {
            ScalarField::GaussOffset {
                base, amplitude, ..
            } => {
                if *base > 0.0 && *amplitude >= 0.0 {
                    Some(Sign::Positive)
                } else if *base < 0.0 && *amplitude <= 0.0 {
                    Some(Sign::Negative)
                } else if *base > 0.0 && base + amplitude > 0.0 && *amplitude < 0.0 {
                    // Negative bump that never cancels the base.
                    Some(Sign::Positive)
                } else if *base < 0.0 && base + amplitude < 0.0 && *amplitude > 0.0 {
                    Some(Sign::Negative)
                } else {
                    None
                }
            }
            ScalarField::Constant { value, .. } => {
                if *value > 0.0 {
                    Some(Sign::Positive)
                } else if *value < 0.0 {
                    Some(Sign::Negative)
                } else {
                    None
                }
            }
            _ => None,
        }
    }
}

/// Value and analytic gradient of a field at `x`.
pub fn field_eval_grad(field: &dyn Field, x: &[f64]) -> Result<(f64, Vec<f64>)> {
    if x.len() != field.dim() {
        return Err(Error::DimensionMismatch {
            expected: field.dim(),
            got: x.len(),
        });
    }
    let mut grad = vec![0.0; x.len()];
    let value = field.eval_grad_into(x, &mut grad);
    Ok((value, grad))
}

/// Angles parametrizing a point of the unit sphere in `R^m`:
/// `theta_1 in [0, 2*pi)`, `theta_j in [0, pi]` for `j >= 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereAngles {
    angles: Vec<f64>,
}

impl SphereAngles {
    pub fn new(angles: Vec<f64>) -> Self {
        SphereAngles { angles }
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    /// Ambient dimension `m` (one more than the angle count).
    pub fn dim(&self) -> usize {
        self.angles.len() + 1
    }
}

/// Embeds sphere angles as a unit vector in `R^m`:
/// `x_1 = prod_{i<m} sin(theta_i)`,
/// `x_j = cos(theta_{j-1}) * prod_{i>=j} sin(theta_i)`,
/// `x_m = cos(theta_{m-1})`.
pub fn sphere_embed(angles: &SphereAngles) -> Result<Vec<f64>> {
    let m = angles.dim();
    if m < 2 {
        return Err(Error::InvalidConfig(
            "sphere embedding needs dimension >= 2".into(),
        ));
    }
    let mut out = vec![0.0; m];
    sphere_embed_into(angles.angles(), &mut out);
    Ok(out)
}

/// Allocation-free embedding used in search loops; `out.len()` must equal
/// `angles.len() + 1`.
pub(crate) fn sphere_embed_into(angles: &[f64], out: &mut [f64]) {
    let m = out.len();
    debug_assert_eq!(angles.len() + 1, m);
    // Running product of sines from the highest angle downward.
    let mut sin_tail = 1.0;
    out[m - 1] = angles[m - 2].cos();
    for j in (1..m - 1).rev() {
        sin_tail *= angles[j].sin();
        out[j] = angles[j - 1].cos() * sin_tail;
    }
    out[0] = sin_tail * angles[0].sin();
}

/// Uniform tensor grid over the angle box: `counts[0]` points on `[0, 2*pi)`
/// (endpoint excluded) and `counts[j]` points on `[0, pi]` (endpoints
/// included) for the remaining angles.
pub fn sphere_grid(m: usize, counts: &[usize]) -> Result<Vec<SphereAngles>> {
    if m < 2 {
        return Err(Error::InvalidConfig(
            "sphere grid needs dimension >= 2".into(),
        ));
    }
    if counts.len() != m - 1 {
        return Err(Error::DimensionMismatch {
            expected: m - 1,
            got: counts.len(),
        });
    }
    if counts.iter().any(|&c| c == 0) {
        return Err(Error::InvalidConfig("angle counts must be positive".into()));
    }
    let total: usize = counts.iter().product();
    let mut grid = Vec::with_capacity(total);
    let mut idx = vec![0usize; m - 1];
    loop {
        let angles: Vec<f64> = idx
            .iter()
            .enumerate()
            .map(|(j, &k)| axis_angle(j, k, counts[j]))
            .collect();
        grid.push(SphereAngles::new(angles));
        // Odometer increment over the index box.
        let mut carry = m - 1;
        for j in (0..m - 1).rev() {
            idx[j] += 1;
            if idx[j] < counts[j] {
                carry = j;
                break;
            }
            idx[j] = 0;
        }
        if carry == m - 1 {
            break;
        }
    }
    Ok(grid)
}

fn axis_angle(axis: usize, k: usize, count: usize) -> f64 {
    if axis == 0 {
        2.0 * std::f64::consts::PI * k as f64 / count as f64
    } else if count == 1 {
        0.0
    } else {
        std::f64::consts::PI * k as f64 / (count - 1) as f64
    }
}

/// Inverse of [`sphere_embed`] for a unit vector: recovers angles with
/// `theta_1` from the leading pair and the polar angles from running norms.
pub(crate) fn sphere_angles_of(v: &[f64]) -> Vec<f64> {
    let m = v.len();
    debug_assert!(m >= 2);
    let mut angles = vec![0.0; m - 1];
    let mut theta1 = v[0].atan2(v[1]);
    if theta1 < 0.0 {
        theta1 += 2.0 * std::f64::consts::PI;
    }
    angles[0] = theta1;
    let mut r = (v[0] * v[0] + v[1] * v[1]).sqrt();
    for j in 2..m {
        angles[j - 1] = r.atan2(v[j]);
        r = (r * r + v[j] * v[j]).sqrt();
    }
    angles
}

/// Random angles, uniform per angle coordinate (not area-uniform; this
/// matches how search restarts are drawn).
pub fn sphere_random_angles<R: Rng>(m: usize, rng: &mut R) -> SphereAngles {
    let mut angles = Vec::with_capacity(m - 1);
    angles.push(rng.random::<f64>() * 2.0 * std::f64::consts::PI);
    for _ in 2..m {
        angles.push(rng.random::<f64>() * std::f64::consts::PI);
    }
    SphereAngles::new(angles)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_value_and_gradient() {
        let f = ScalarField::quadratic_diag(&[0.25, 1.0], -0.5);
        let (v, g) = field_eval_grad(&f, &[2.0, 0.0]).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(g, vec![0.5, 0.0]);
    }

    #[test]
    fn gauss_gradient_vanishes_at_center() {
        let f = ScalarField::GaussOffset {
            base: 1.0,
            amplitude: 3.0,
            rate: 4.0,
            center: vec![1.0, 1.0],
        };
        let (v, g) = field_eval_grad(&f, &[1.0, 1.0]).unwrap();
        assert_eq!(v, 4.0);
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn constant_field() {
        let f = ScalarField::Constant { dim: 3, value: 5.0 };
        let (v, g) = field_eval_grad(&f, &[9.0, -1.0, 0.0]).unwrap();
        assert_eq!(v, 5.0);
        assert_eq!(g, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let f = ScalarField::Constant { dim: 2, value: 1.0 };
        assert!(field_eval_grad(&f, &[1.0]).is_err());
    }

    #[test]
    fn embed_matches_hand_values() {
        let e = |a: &[f64]| sphere_embed(&SphereAngles::new(a.to_vec())).unwrap();
        let v = e(&[0.0]);
        assert!((v[0] - 0.0).abs() < 1e-15 && (v[1] - 1.0).abs() < 1e-15);
        let v = e(&[std::f64::consts::FRAC_PI_2]);
        assert!((v[0] - 1.0).abs() < 1e-15 && v[1].abs() < 1e-15);
        let v = e(&[0.0, std::f64::consts::FRAC_PI_2]);
        assert!(v[0].abs() < 1e-15 && (v[1] - 1.0).abs() < 1e-15 && v[2].abs() < 1e-15);
    }

    #[test]
    fn grid_shapes() {
        let g = sphere_grid(2, &[1000]).unwrap();
        assert_eq!(g.len(), 1000);
        let step = g[1].angles()[0] - g[0].angles()[0];
        assert!((step - 2.0 * std::f64::consts::PI / 1000.0).abs() < 1e-15);

        let g = sphere_grid(2, &[1]).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].angles()[0], 0.0);

        let g = sphere_grid(3, &[4, 3]).unwrap();
        assert_eq!(g.len(), 12);
    }

    #[test]
    fn gauss_sign_analysis() {
        let pos = ScalarField::GaussOffset {
            base: 1.0,
            amplitude: 3.0,
            rate: 4.0,
            center: vec![0.0],
        };
        assert_eq!(pos.definite_sign(), Some(Sign::Positive));
        let neg = ScalarField::GaussOffset {
            base: -1.0,
            amplitude: -3.0,
            rate: 4.0,
            center: vec![0.0],
        };
        assert_eq!(neg.definite_sign(), Some(Sign::Negative));
        let mixed = ScalarField::GaussOffset {
            base: 1.0,
            amplitude: -3.0,
            rate: 4.0,
            center: vec![0.0],
        };
        assert_eq!(mixed.definite_sign(), None);
    }
}

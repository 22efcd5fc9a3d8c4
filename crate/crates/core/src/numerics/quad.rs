//! Composite Simpson quadrature.

use crate::error::{Error, Result};

/// The `n + 1` Simpson nodes on `[a, b]`.
pub(crate) fn simpson_nodes(a: f64, b: f64, n: usize) -> Vec<f64> {
    let h = (b - a) / n as f64;
    (0..=n)
        .map(|k| if k == n { b } else { a + k as f64 * h })
        .collect()
}

/// Simpson-weighted sum of `n + 1` node values on `[a, b]`.
pub(crate) fn simpson_sum(values: &[f64], a: f64, b: f64) -> f64 {
    let n = values.len() - 1;
    let h = (b - a) / n as f64;
    let mut acc = 0.0;
    for (k, v) in values.iter().enumerate() {
        let w = if k == 0 || k == n {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += w * v;
    }
    acc * h / 3.0
}

/// Composite Simpson rule on `n` (even, >= 2) subintervals; exact for cubic
/// polynomials. An empty interval integrates to zero.
pub fn quad_simpson<F>(mut f: F, a: f64, b: f64, n: usize) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    if a == b {
        return Ok(0.0);
    }
    if n < 2 || n % 2 != 0 {
        return Err(Error::InvalidConfig(
            "Simpson rule needs an even subinterval count >= 2".into(),
        ));
    }
    let mut values = Vec::with_capacity(n + 1);
    for x in simpson_nodes(a, b, n) {
        let fx = f(x);
        if !fx.is_finite() {
            return Err(Error::DynamicsFailed { t: x });
        }
        values.push(fx);
    }
    Ok(simpson_sum(&values, a, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_on_squares() {
        let v = quad_simpson(|x| x * x, 0.0, 1.0, 10).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn exponential_to_1e7() {
        let v = quad_simpson(|x| x.exp(), 0.0, 1.0, 64).unwrap();
        assert!((v - (1.0f64.exp() - 1.0)).abs() < 1e-7);
    }

    #[test]
    fn empty_interval_is_zero() {
        assert_eq!(quad_simpson(|x| x.exp(), 2.0, 2.0, 8).unwrap(), 0.0);
    }

    #[test]
    fn fourth_order_convergence() {
        let exact = 1.0f64.exp() - 1.0;
        let err = |n| (quad_simpson(|x| x.exp(), 0.0, 1.0, n).unwrap() - exact).abs();
        for n in [8, 16, 32, 64] {
            let ratio = err(n) / err(2 * n);
            assert!(ratio >= 8.0, "halving h gained only {ratio}x at n = {n}");
        }
    }

    #[test]
    fn odd_count_rejected() {
        assert!(quad_simpson(|x| x, 0.0, 1.0, 3).is_err());
    }
}

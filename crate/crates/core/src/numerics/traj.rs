//! Trajectory storage with dense output, integrator tolerances, RNG seeding.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Piecewise-cubic record of an integrated trajectory.
///
/// Each accepted step stores the state and its time derivative at both ends,
/// so any interior time can be evaluated by cubic Hermite interpolation.
/// Interpolation at a stored stamp reproduces the stored state exactly.
#[derive(Debug, Clone)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
    derivs: Vec<Vec<f64>>,
    dim: usize,
}

impl Trajectory {
    /// Single-point trajectory (degenerate horizon).
    pub fn single(t: f64, y: &[f64]) -> Self {
        Trajectory {
            times: vec![t],
            states: vec![y.to_vec()],
            derivs: vec![vec![0.0; y.len()]],
            dim: y.len(),
        }
    }

    pub(crate) fn with_capacity(dim: usize, cap: usize) -> Self {
        Trajectory {
            times: Vec::with_capacity(cap),
            states: Vec::with_capacity(cap),
            derivs: Vec::with_capacity(cap),
            dim,
        }
    }

    /// Appends a stamp; times must stay strictly increasing.
    pub(crate) fn push(&mut self, t: f64, y: &[f64], dy: &[f64]) {
        debug_assert_eq!(y.len(), self.dim);
        debug_assert!(self.times.last().is_none_or(|&last| t > last));
        self.times.push(t);
        self.states.push(y.to_vec());
        self.derivs.push(dy.to_vec());
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn start_time(&self) -> f64 {
        self.times[0]
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn end_state(&self) -> &[f64] {
        self.states.last().unwrap()
    }

    /// Dense evaluation at `t`, clamped to the stored span.
    pub fn state_at(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.state_at_into(t, &mut out);
        out
    }

    pub fn state_at_into(&self, t: f64, out: &mut [f64]) {
        assert_eq!(out.len(), self.dim);
        let n = self.times.len();
        if n == 1 || t <= self.times[0] {
            out.copy_from_slice(&self.states[0]);
            return;
        }
        if t >= self.times[n - 1] {
            out.copy_from_slice(&self.states[n - 1]);
            return;
        }
        // partition_point gives the first index with time > t; the segment
        // starts one before it.
        let hi = self.times.partition_point(|&tk| tk <= t);
        let lo = hi - 1;
        if self.times[lo] == t {
            out.copy_from_slice(&self.states[lo]);
            return;
        }
        hermite_eval(
            self.times[lo],
            &self.states[lo],
            &self.derivs[lo],
            self.times[hi],
            &self.states[hi],
            &self.derivs[hi],
            t,
            out,
        );
    }
}

/// Cubic Hermite interpolation on one segment.
#[allow(clippy::too_many_arguments)]
pub(crate) fn hermite_eval(
    t0: f64,
    y0: &[f64],
    f0: &[f64],
    t1: f64,
    y1: &[f64],
    f1: &[f64],
    t: f64,
    out: &mut [f64],
) {
    let h = t1 - t0;
    let s = (t - t0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    for i in 0..out.len() {
        out[i] = h00 * y0[i] + h10 * h * f0[i] + h01 * y1[i] + h11 * h * f1[i];
    }
}

/// Error-control settings for the adaptive integrator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ToleranceSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub initial_step: f64,
    pub max_steps: usize,
}

impl Default for ToleranceSpec {
    fn default() -> Self {
        ToleranceSpec {
            abs_tol: 1e-5,
            rel_tol: 1e-5,
            initial_step: 1e-3,
            max_steps: 100_000,
        }
    }
}

impl ToleranceSpec {
    pub fn validate(&self) -> Result<()> {
        if self.abs_tol > 0.0 && self.rel_tol > 0.0 && self.initial_step > 0.0 && self.max_steps > 0
        {
            Ok(())
        } else {
            Err(Error::InvalidConfig(
                "tolerances, initial step and step budget must all be positive".into(),
            ))
        }
    }
}

/// Seed plus stream index for reproducible, independent random sequences.
///
/// Equal `(seed, stream)` pairs reproduce identical sequences; distinct
/// stream indices select independent ChaCha streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngSeed {
    pub seed: u64,
    #[serde(default)]
    pub stream: u64,
}

impl RngSeed {
    pub fn new(seed: u64, stream: u64) -> Self {
        RngSeed { seed, stream }
    }

    /// Same seed, shifted stream index.
    pub fn with_stream_offset(&self, offset: u64) -> Self {
        RngSeed {
            seed: self.seed,
            stream: self.stream.wrapping_add(offset),
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_eval_clamps() {
        let tr = Trajectory::single(1.0, &[2.0, -3.0]);
        assert_eq!(tr.state_at(0.5), vec![2.0, -3.0]);
        assert_eq!(tr.state_at(7.0), vec![2.0, -3.0]);
    }

    #[test]
    fn hermite_reproduces_endpoints() {
        let mut tr = Trajectory::with_capacity(1, 3);
        tr.push(0.0, &[1.0], &[0.5]);
        tr.push(1.0, &[2.0], &[-0.25]);
        assert_eq!(tr.state_at(0.0)[0], 1.0);
        assert_eq!(tr.state_at(1.0)[0], 2.0);
    }

    #[test]
    fn seeded_streams_reproduce() {
        use rand::Rng;
        let a: Vec<u64> = RngSeed::new(7, 3).rng().random_iter().take(8).collect();
        let b: Vec<u64> = RngSeed::new(7, 3).rng().random_iter().take(8).collect();
        let c: Vec<u64> = RngSeed::new(7, 4).rng().random_iter().take(8).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}

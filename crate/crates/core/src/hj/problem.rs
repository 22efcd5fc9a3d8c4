//! Problem definitions for pointwise value evaluation.

use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::fields::{Field, Sign};
use crate::numerics::{RngSeed, ToleranceSpec};

pub type FieldRef = Arc<dyn Field>;

/// Optimization direction of the underlying control problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Min,
    Max,
}

impl Sense {
    /// True when `candidate` improves on `incumbent` for this sense.
    #[inline]
    pub(crate) fn improves(self, candidate: f64, incumbent: f64) -> bool {
        match self {
            Sense::Min => candidate < incumbent,
            Sense::Max => candidate > incumbent,
        }
    }

    pub(crate) fn worst(self) -> f64 {
        match self {
            Sense::Min => f64::INFINITY,
            Sense::Max => f64::NEG_INFINITY,
        }
    }
}

/// Caller-declared structure of the terminal function's critical set,
/// needed to trust terminal-only evaluation. Verified by sampling only.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigmaCondition {
    /// The terminal gradient never vanishes.
    GradNonzero,
    /// Critical points of the terminal function are all worst-case optima
    /// (global maxima for a min problem, minima for a max problem); the
    /// zero initial adjoint is then evaluated as a stationary candidate.
    CriticalAtOptimum,
}

/// Caller-declared structure of the running cost's critical set.
#[derive(Debug, Clone, PartialEq)]
pub enum EtaCondition {
    /// The running-cost gradient never vanishes; no freeze handling needed.
    GradNonzero,
    /// Unique critical point: once a trajectory reaches it (detected by the
    /// running-cost criterion `eta(x) - eta(point) < tol`), the control is
    /// frozen at zero and the remaining cost accrues analytically.
    CriticalPoint { point: Vec<f64>, tol: f64 },
}

/// Default trigger tolerance for the critical-point criterion.
pub const DEFAULT_CRITICAL_TOL: f64 = 5e-6;

/// Number of random points used to sample-check declared conditions.
const CHECK_SAMPLES: usize = 1000;
/// Half-width of the sampling box around the origin.
const CHECK_BOX: f64 = 8.0;
const CHECK_SEED: u64 = 0x5EED_CAFE;

/// Terminal-value problem for the speed-field dynamics `dx/dt = c(x) u`,
/// `||u|| <= 1`, with terminal cost `sigma` and optional running cost `eta`.
/// The sign of `c` fixes the optimization sense: negative speed fields give
/// minimization, positive ones maximization.
#[derive(Clone)]
pub struct EikonalProblem {
    pub(crate) n: usize,
    pub(crate) c: FieldRef,
    pub(crate) sigma: FieldRef,
    pub(crate) eta: Option<FieldRef>,
    pub(crate) horizon: f64,
    pub(crate) sense: Sense,
    pub(crate) sigma_condition: Option<SigmaCondition>,
    pub(crate) eta_condition: Option<EtaCondition>,
    pub(crate) tol: ToleranceSpec,
}

impl std::fmt::Debug for EikonalProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EikonalProblem")
            .field("n", &self.n)
            .field("horizon", &self.horizon)
            .field("sense", &self.sense)
            .field("bolza", &self.eta.is_some())
            .finish()
    }
}

impl EikonalProblem {
    /// Terminal-cost-only problem.
    pub fn mayer(
        c: FieldRef,
        sigma: FieldRef,
        horizon: f64,
        sigma_condition: Option<SigmaCondition>,
    ) -> Result<Self> {
        let n = c.dim();
        if sigma.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: sigma.dim(),
            });
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidProblem("horizon must be positive".into()));
        }
        let sense = derive_sense(c.as_ref())?;
        let problem = EikonalProblem {
            n,
            c,
            sigma,
            eta: None,
            horizon,
            sense,
            sigma_condition,
            eta_condition: None,
            tol: ToleranceSpec::default(),
        };
        problem.check_sigma_condition()?;
        Ok(problem)
    }

    /// Problem with a state-dependent running cost, handled through the
    /// terminal-cost transform with one extra state coordinate.
    pub fn bolza(
        c: FieldRef,
        sigma: FieldRef,
        eta: FieldRef,
        horizon: f64,
        eta_condition: EtaCondition,
    ) -> Result<Self> {
        let mut problem = Self::mayer(c, sigma, horizon, None)?;
        if eta.dim() != problem.n {
            return Err(Error::DimensionMismatch {
                expected: problem.n,
                got: eta.dim(),
            });
        }
        problem.eta = Some(eta);
        problem.eta_condition = Some(eta_condition);
        problem.check_eta_condition()?;
        Ok(problem)
    }

    pub fn with_tolerances(mut self, tol: ToleranceSpec) -> Self {
        self.tol = tol;
        self
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn is_bolza(&self) -> bool {
        self.eta.is_some()
    }

    pub fn sigma(&self) -> &dyn Field {
        self.sigma.as_ref()
    }

    pub fn speed(&self) -> &dyn Field {
        self.c.as_ref()
    }

    pub fn running_cost(&self) -> Option<&dyn Field> {
        self.eta.as_deref()
    }

    pub fn tolerances(&self) -> &ToleranceSpec {
        &self.tol
    }

    pub(crate) fn critical_spec(&self) -> Option<(&[f64], f64)> {
        match &self.eta_condition {
            Some(EtaCondition::CriticalPoint { point, tol }) => Some((point, *tol)),
            _ => None,
        }
    }

    fn check_sigma_condition(&self) -> Result<()> {
        let Some(cond) = self.sigma_condition else {
            return Ok(());
        };
        let samples = sample_box(self.n, CHECK_SAMPLES, CHECK_BOX);
        let mut grad = vec![0.0; self.n];
        match cond {
            SigmaCondition::GradNonzero => {
                for x in &samples {
                    self.sigma.eval_grad_into(x, &mut grad);
                    if grad.iter().map(|g| g * g).sum::<f64>().sqrt() <= 1e-12 {
                        return Err(Error::InvalidProblem(format!(
                            "declared nonvanishing terminal gradient, but it vanishes near {x:?}"
                        )));
                    }
                }
            }
            SigmaCondition::CriticalAtOptimum => {
                // A zero gradient at a sampled point must sit at the
                // worst-case optimum seen across the sample set.
                let values: Vec<f64> = samples.iter().map(|x| self.sigma.value(x)).collect();
                let extremum = match self.sense {
                    Sense::Min => values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                    Sense::Max => values.iter().cloned().fold(f64::INFINITY, f64::min),
                };
                for (x, v) in samples.iter().zip(&values) {
                    self.sigma.eval_grad_into(x, &mut grad);
                    if grad.iter().map(|g| g * g).sum::<f64>().sqrt() <= 1e-10
                        && (v - extremum).abs() > 1e-6
                    {
                        return Err(Error::InvalidProblem(
                            "declared critical-at-optimum terminal function fails at a sampled critical point"
                                .into(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    fn check_eta_condition(&self) -> Result<()> {
        let (Some(eta), Some(cond)) = (&self.eta, &self.eta_condition) else {
            return Ok(());
        };
        let samples = sample_box(self.n, CHECK_SAMPLES, CHECK_BOX);
        let mut grad = vec![0.0; self.n];
        match cond {
            EtaCondition::GradNonzero => {
                for x in &samples {
                    eta.eval_grad_into(x, &mut grad);
                    if grad.iter().map(|g| g * g).sum::<f64>().sqrt() <= 1e-12 {
                        return Err(Error::InvalidProblem(format!(
                            "declared nonvanishing running-cost gradient, but it vanishes near {x:?}"
                        )));
                    }
                }
            }
            EtaCondition::CriticalPoint { point, tol } => {
                if point.len() != self.n {
                    return Err(Error::DimensionMismatch {
                        expected: self.n,
                        got: point.len(),
                    });
                }
                if !(*tol > 0.0) {
                    return Err(Error::InvalidProblem(
                        "critical-point tolerance must be positive".into(),
                    ));
                }
                eta.eval_grad_into(point, &mut grad);
                let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                if gnorm > 1e-8 {
                    return Err(Error::InvalidProblem(format!(
                        "running-cost gradient does not vanish at the declared critical point (|grad| = {gnorm:.2e})"
                    )));
                }
                let eta_c = eta.value(point);
                let sigma_c = self.sigma.value(point);
                for x in &samples {
                    let (ev, sv) = (eta.value(x), self.sigma.value(x));
                    let ok = match self.sense {
                        Sense::Min => ev >= eta_c - 1e-9 && sv >= sigma_c - 1e-9,
                        Sense::Max => ev <= eta_c + 1e-9 && sv <= sigma_c + 1e-9,
                    };
                    if !ok {
                        return Err(Error::InvalidProblem(
                            "declared critical point is not a sampled optimum of the running and terminal costs"
                                .into(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

fn derive_sense(c: &dyn Field) -> Result<Sense> {
    if let Some(sign) = c.definite_sign() {
        return Ok(match sign {
            Sign::Negative => Sense::Min,
            Sign::Positive => Sense::Max,
        });
    }
    // No analytic certificate; fall back to sampling.
    let samples = sample_box(c.dim(), CHECK_SAMPLES, CHECK_BOX);
    let first = c.value(&samples[0]);
    if first == 0.0 {
        return Err(Error::InvalidProblem(
            "speed field vanishes at a sampled point".into(),
        ));
    }
    let positive = first > 0.0;
    for x in &samples {
        let v = c.value(x);
        if v == 0.0 || (v > 0.0) != positive {
            return Err(Error::InvalidProblem(
                "speed field changes sign over the sampling box".into(),
            ));
        }
    }
    Ok(if positive { Sense::Max } else { Sense::Min })
}

pub(crate) fn sample_box(n: usize, count: usize, half_width: f64) -> Vec<Vec<f64>> {
    let mut rng = RngSeed::new(CHECK_SEED, 0).rng();
    (0..count)
        .map(|_| {
            (0..n)
                .map(|_| (rng.random::<f64>() * 2.0 - 1.0) * half_width)
                .collect()
        })
        .collect()
}

pub type HamiltonianFn = Arc<dyn Fn(f64, &[f64], &[f64]) -> f64 + Send + Sync>;
pub type HamiltonianGradFn = Arc<dyn Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync>;

/// Smooth-Hamiltonian terminal-value problem: `V_t + H(t, x, D_x V) = 0`
/// with `V(T, .) = sigma`. Convex-in-adjoint Hamiltonians maximize over the
/// initial adjoint, concave ones minimize.
#[derive(Clone)]
pub struct SmoothHamiltonianProblem {
    pub(crate) n: usize,
    pub(crate) hamiltonian: HamiltonianFn,
    pub(crate) dx: HamiltonianGradFn,
    pub(crate) dp: HamiltonianGradFn,
    pub(crate) sigma: FieldRef,
    pub(crate) horizon: f64,
    pub(crate) sense: Sense,
    pub(crate) homogeneous: bool,
    pub(crate) tol: ToleranceSpec,
}

impl std::fmt::Debug for SmoothHamiltonianProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SmoothHamiltonianProblem")
            .field("n", &self.n)
            .field("horizon", &self.horizon)
            .field("sense", &self.sense)
            .field("homogeneous", &self.homogeneous)
            .finish()
    }
}

impl SmoothHamiltonianProblem {
    pub fn new(
        n: usize,
        hamiltonian: HamiltonianFn,
        dx: HamiltonianGradFn,
        dp: HamiltonianGradFn,
        sigma: FieldRef,
        horizon: f64,
        sense: Sense,
        homogeneous: bool,
    ) -> Result<Self> {
        if sigma.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: sigma.dim(),
            });
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidProblem("horizon must be positive".into()));
        }
        let problem = SmoothHamiltonianProblem {
            n,
            hamiltonian,
            dx,
            dp,
            sigma,
            horizon,
            sense,
            homogeneous,
            tol: ToleranceSpec::default(),
        };
        if homogeneous {
            problem.check_homogeneity()?;
        }
        Ok(problem)
    }

    pub fn with_tolerances(mut self, tol: ToleranceSpec) -> Self {
        self.tol = tol;
        self
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn is_homogeneous(&self) -> bool {
        self.homogeneous
    }

    pub fn sigma(&self) -> &dyn Field {
        self.sigma.as_ref()
    }

    /// The adjoint-velocity map of a degree-one homogeneous Hamiltonian must
    /// be invariant under positive scaling of the adjoint.
    fn check_homogeneity(&self) -> Result<()> {
        let samples = sample_box(2 * self.n + 1, 64, 3.0);
        let mut g1 = vec![0.0; self.n];
        let mut g2 = vec![0.0; self.n];
        let mut scaled = vec![0.0; self.n];
        for s in &samples {
            let t = (s[0].abs() / 3.0) * self.horizon;
            let x = &s[1..=self.n];
            let p = &s[self.n + 1..];
            if p.iter().map(|v| v * v).sum::<f64>() < 1e-4 {
                continue;
            }
            (self.dp)(t, x, p, &mut g1);
            for alpha in [0.5, 2.0, 7.0] {
                for (si, pi) in scaled.iter_mut().zip(p) {
                    *si = alpha * pi;
                }
                (self.dp)(t, x, &scaled, &mut g2);
                let dev = g1
                    .iter()
                    .zip(&g2)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                if dev > 1e-10 {
                    return Err(Error::InvalidProblem(format!(
                        "adjoint-velocity map is not scale-invariant (deviation {dev:.2e}); \
                         sphere-reduced search is not justified"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::ScalarField;

    fn gauss_speed(sign: f64) -> FieldRef {
        Arc::new(ScalarField::GaussOffset {
            base: sign,
            amplitude: 3.0 * sign,
            rate: 4.0,
            center: vec![1.0, 1.0],
        })
    }

    #[test]
    fn sense_follows_speed_sign() {
        let sigma: FieldRef = Arc::new(ScalarField::quadratic_diag(&[0.25, 1.0], -0.5));
        let p = EikonalProblem::mayer(gauss_speed(1.0), sigma.clone(), 0.5, None).unwrap();
        assert_eq!(p.sense(), Sense::Max);
        let p = EikonalProblem::mayer(gauss_speed(-1.0), sigma, 0.5, None).unwrap();
        assert_eq!(p.sense(), Sense::Min);
    }

    #[test]
    fn sign_indefinite_speed_rejected() {
        let c: FieldRef = Arc::new(ScalarField::quadratic_diag(&[1.0, 1.0], -0.5));
        let sigma: FieldRef = Arc::new(ScalarField::Constant { dim: 2, value: 0.0 });
        assert!(EikonalProblem::mayer(c, sigma, 0.5, None).is_err());
    }

    #[test]
    fn critical_point_must_be_a_minimum() {
        let c: FieldRef = Arc::new(ScalarField::Constant {
            dim: 1,
            value: -1.0,
        });
        let sigma: FieldRef = Arc::new(ScalarField::Constant { dim: 1, value: 0.0 });
        let eta: FieldRef = Arc::new(ScalarField::NormSquaredHalf { dim: 1 });
        // Correct critical point accepted.
        assert!(EikonalProblem::bolza(
            c.clone(),
            sigma.clone(),
            eta.clone(),
            1.0,
            EtaCondition::CriticalPoint {
                point: vec![0.0],
                tol: DEFAULT_CRITICAL_TOL
            },
        )
        .is_ok());
        // A point that is not critical is rejected.
        assert!(EikonalProblem::bolza(
            c,
            sigma,
            eta,
            1.0,
            EtaCondition::CriticalPoint {
                point: vec![0.7],
                tol: DEFAULT_CRITICAL_TOL
            },
        )
        .is_err());
    }
}

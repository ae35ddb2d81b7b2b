//! Strongly convex subproblem construction and solvers.
//!
//! Every outer iteration each agent minimizes
//!
//! ```text
//! rho * ( f~(x; x_t, xi) + pi~' (x - x_t) ) + (1 - rho) * d' (x - x_t) + G(x)
//! ```
//!
//! over the feasible set, where `f~` is a strongly convex surrogate of the
//! local cost. Two routes are provided: a generic projected proximal-gradient
//! solver for arbitrary `(G, K)`, and a closed-form SPD solve for the
//! linearized least-squares plus ridge case. The closed form is derived from
//! the first-order optimality condition of the objective above and is
//! validated against the generic solver in tests.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::SampleLinearization;
use crate::problem::{FeasibleSet, LocalObjective, Regularizer};

/// Convex model of a local cost around a base point.
pub trait SurrogateTerm {
    fn value(&self, x: &DVector<f64>) -> f64;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;
}

/// Linearization-plus-proximal surrogate:
/// `f(x_t) + g'(x - x_t) + tau/2 ||x - x_t||^2`.
///
/// Strongly convex with modulus `tau`, gradient-consistent at the base
/// point, and Lipschitz in the base point.
#[derive(Debug, Clone)]
pub struct QuadraticSurrogate {
    pub base: DVector<f64>,
    pub base_value: f64,
    pub base_gradient: DVector<f64>,
    pub tau: f64,
}

impl SurrogateTerm for QuadraticSurrogate {
    fn value(&self, x: &DVector<f64>) -> f64 {
        let diff = x - &self.base;
        self.base_value + self.base_gradient.dot(&diff) + 0.5 * self.tau * diff.norm_squared()
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.base_gradient + (x - &self.base) * self.tau
    }
}

/// Squared loss on per-sample linearizations plus a proximal term:
/// `(1/|B|) sum_m (r_m - J_m' x)^2 + tau/2 ||x - x_t||^2`.
#[derive(Debug, Clone)]
pub struct LinearizedLsSurrogate {
    pub base: DVector<f64>,
    pub linearizations: Vec<SampleLinearization>,
    pub tau: f64,
}

impl SurrogateTerm for LinearizedLsSurrogate {
    fn value(&self, x: &DVector<f64>) -> f64 {
        let count = self.linearizations.len().max(1) as f64;
        let loss: f64 = self
            .linearizations
            .iter()
            .map(|lin| {
                let e = lin.residual_target - lin.jacobian.dot(x);
                e * e
            })
            .sum::<f64>()
            / count;
        loss + 0.5 * self.tau * (x - &self.base).norm_squared()
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let count = self.linearizations.len().max(1) as f64;
        let mut acc = (x - &self.base) * self.tau;
        for lin in &self.linearizations {
            let e = lin.jacobian.dot(x) - lin.residual_target;
            acc += &lin.jacobian * (2.0 * e / count);
        }
        acc
    }
}

/// Builds the default surrogate for an arbitrary smooth local cost: its
/// linearization at the base point plus a `tau/2` proximal term.
pub fn default_surrogate_quadratic(
    objective: &dyn LocalObjective,
    base: &DVector<f64>,
    batch: &[usize],
    tau: f64,
) -> Result<QuadraticSurrogate> {
    if tau <= 0.0 {
        return Err(Error::ConfigValue {
            key: "tau".into(),
            reason: "must be positive".into(),
        });
    }
    Ok(QuadraticSurrogate {
        base_value: objective.value(base, batch),
        base_gradient: objective.gradient(base, batch),
        base: base.clone(),
        tau,
    })
}

/// One agent's subproblem for the generic solver.
pub struct SurrogateSpec<'a> {
    pub base_point: &'a DVector<f64>,
    pub surrogate: &'a dyn SurrogateTerm,
    pub pi_tilde: &'a DVector<f64>,
    pub d: &'a DVector<f64>,
    pub rho: f64,
    pub regularizer: &'a Regularizer,
    pub feasible_set: &'a FeasibleSet,
}

impl SurrogateSpec<'_> {
    /// Smooth part of the subproblem objective (everything except `G` and
    /// the feasibility indicator).
    pub fn smooth_value(&self, x: &DVector<f64>) -> f64 {
        let diff = x - self.base_point;
        self.rho * (self.surrogate.value(x) + self.pi_tilde.dot(&diff))
            + (1.0 - self.rho) * self.d.dot(&diff)
    }

    pub fn smooth_gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        self.surrogate.gradient(x) * self.rho
            + self.pi_tilde * self.rho
            + self.d * (1.0 - self.rho)
    }

    /// Full objective value, assuming `x` feasible.
    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        self.smooth_value(x) + self.regularizer.value(x)
    }

    fn prox_project(&self, v: &DVector<f64>, gamma: f64) -> Result<DVector<f64>> {
        crate::problem::composite_backward(self.regularizer, self.feasible_set, v, gamma)
    }

    /// Power-iteration estimate of the curvature bound of the smooth part,
    /// probed with finite differences around the base point.
    fn curvature_estimate(&self) -> f64 {
        let p = self.base_point.len();
        let g0 = self.smooth_gradient(self.base_point);
        let mut rng = ChaCha8Rng::seed_from_u64(0x5ca1ab1e);
        let mut v = DVector::from_fn(p, |_, _| rng.gen_range(-1.0f64..1.0));
        if v.norm() == 0.0 {
            v[0] = 1.0;
        }
        v /= v.norm();
        let eps = 1e-6;
        let mut estimate = 0.0;
        for _ in 0..30 {
            let probe = self.base_point + &v * eps;
            let u = (self.smooth_gradient(&probe) - &g0) / eps;
            let norm = u.norm();
            if norm < 1e-14 {
                return 0.0;
            }
            estimate = norm;
            v = u / norm;
        }
        estimate
    }
}

/// Projected proximal-gradient solver with fixed step `1 / L`, stopping on
/// the fixed-point residual. Returns an error carrying the final residual
/// if the budget is exhausted.
pub fn solve_generic(
    spec: &SurrogateSpec<'_>,
    tolerance: f64,
    max_iterations: usize,
) -> Result<DVector<f64>> {
    if tolerance <= 0.0 {
        return Err(Error::ConfigValue {
            key: "tolerance".into(),
            reason: "must be positive".into(),
        });
    }
    let curvature = spec.curvature_estimate();
    let gamma = if curvature > 1e-12 { 1.0 / curvature } else { 1.0 };
    let mut x = spec.feasible_set.project(spec.base_point);
    let mut residual = f64::INFINITY;
    for _ in 0..max_iterations {
        let grad = spec.smooth_gradient(&x);
        let next = spec.prox_project(&(&x - grad * gamma), gamma)?;
        residual = (&x - &next).norm();
        x = next;
        if residual <= tolerance {
            return Ok(x);
        }
    }
    Err(Error::SolverDiverged {
        residual,
        iterations: max_iterations,
    })
}

/// Assembled SPD system for the linearized least-squares plus ridge case.
#[derive(Debug, Clone)]
pub struct ClosedFormSubproblem {
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
}

/// Assembles `A x = b` from the first-order optimality condition of the
/// subproblem with the linearized squared-loss surrogate and
/// `G = lambda ||x||^2`:
///
/// ```text
/// A = (2 rho / |B|) sum_m J_m J_m' + (rho tau + 2 lambda) I
/// b = (2 rho / |B|) sum_m J_m r_m + rho tau x_t - rho pi~ - (1 - rho) d
/// ```
pub fn assemble_closed_form(
    linearizations: &[SampleLinearization],
    rho: f64,
    tau: f64,
    lambda: f64,
    pi_tilde: &DVector<f64>,
    d: &DVector<f64>,
    base_point: &DVector<f64>,
) -> Result<ClosedFormSubproblem> {
    if linearizations.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::ConfigValue {
            key: "rho".into(),
            reason: format!("must be in (0, 1], got {rho}"),
        });
    }
    if lambda <= 0.0 && tau <= 0.0 {
        return Err(Error::ConfigValue {
            key: "lambda".into(),
            reason: "lambda or tau must be positive for a definite system".into(),
        });
    }
    let p = base_point.len();
    let scale = 2.0 * rho / linearizations.len() as f64;
    let mut matrix = DMatrix::identity(p, p) * (rho * tau + 2.0 * lambda);
    let mut rhs = base_point * (rho * tau) - pi_tilde * rho - d * (1.0 - rho);
    for lin in linearizations {
        if lin.jacobian.len() != p {
            return Err(Error::Dimension {
                expected: p,
                actual: lin.jacobian.len(),
            });
        }
        matrix.ger(scale, &lin.jacobian, &lin.jacobian, 1.0);
        rhs += &lin.jacobian * (scale * lin.residual_target);
    }
    Ok(ClosedFormSubproblem { matrix, rhs })
}

/// Solves the assembled system by Cholesky factorization, with one
/// iterative refinement pass. Factorization failure is an error so callers
/// can fall back to [`solve_generic`].
pub fn solve_closed_form(sub: &ClosedFormSubproblem) -> Result<DVector<f64>> {
    let chol = sub
        .matrix
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Config("closed-form system is not positive definite".into()))?;
    let mut x = chol.solve(&sub.rhs);
    let mut residual = &sub.rhs - &sub.matrix * &x;
    if residual.norm() > 1e-8 * (1.0 + sub.rhs.norm()) {
        x += chol.solve(&residual);
        residual = &sub.rhs - &sub.matrix * &x;
        if residual.norm() > 1e-8 * (1.0 + sub.rhs.norm()) {
            return Err(Error::SolverDiverged {
                residual: residual.norm(),
                iterations: 1,
            });
        }
    }
    Ok(x)
}

//! The distributed outer loop: per-agent state, the four steps of each
//! synchronous round, and trajectory-level metrics.
//!
//! Every round runs, in order:
//!
//! 1. local SCA: each agent solves its strongly convex subproblem and
//!    blends the solution into a candidate `z_i = x_i + alpha (x^_i - x_i)`;
//! 2. agreement and gradient tracking: iterates are mixed through the
//!    doubly stochastic weights, a fresh realization is drawn, and the
//!    tracker `y_i` absorbs the local gradient difference;
//! 3. recursive gradient averaging: `d_i` blends in the tracked full
//!    gradient estimate with weight `rho`.
//!
//! With doubly stochastic weights the tracker average equals the network
//! average gradient at every iteration; that conservation identity is the
//! central testable property of the scheme and is exposed as a metric.

use std::time::Instant;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::graph::WeightMatrix;
use crate::metrics::IterationMetrics;
use crate::problem::{composite_backward, ProblemInstance, Realization};
use crate::sca::{
    assemble_closed_form, default_surrogate_quadratic, solve_closed_form, solve_generic,
    LinearizedLsSurrogate, SurrogateSpec, SurrogateTerm,
};
use crate::schedule::StepSchedule;

/// Per-agent quintuple driving the iteration, plus the last sampled
/// gradient needed by the tracking correction.
#[derive(Debug, Clone)]
pub struct AgentState {
    /// Local estimate `x_i^t`.
    pub x: DVector<f64>,
    /// Gradient tracker `y_i^t`.
    pub y: DVector<f64>,
    /// Estimate of the other agents' gradient sum, `I y_i - grad f_i`.
    pub pi_tilde: DVector<f64>,
    /// Recursive average of the tracked full-gradient estimate.
    pub d: DVector<f64>,
    /// Smoothed candidate from the last SCA step.
    pub z: DVector<f64>,
    /// `grad f_i(x_i^t, xi^t)`.
    pub last_grad: DVector<f64>,
}

/// Which subproblem solver the outer loop uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverChoice {
    /// Closed form when the objective exposes linearizations and the
    /// composite structure allows it; generic otherwise.
    #[default]
    Auto,
    Generic,
    ClosedForm,
}

/// Subproblem configuration shared by all agents.
#[derive(Debug, Clone, Copy)]
pub struct ScaConfig {
    /// Proximal weight of the surrogate.
    pub tau: f64,
    pub solver: SolverChoice,
    pub inner_tolerance: f64,
    pub inner_max_iterations: usize,
}

impl Default for ScaConfig {
    fn default() -> Self {
        Self {
            tau: 1.0,
            solver: SolverChoice::Auto,
            inner_tolerance: 1e-8,
            inner_max_iterations: 10_000,
        }
    }
}

/// Initial iterates: one vector broadcast to every agent, or one per agent.
#[derive(Debug, Clone)]
pub enum InitialIterates {
    Broadcast(DVector<f64>),
    PerAgent(Vec<DVector<f64>>),
}

impl InitialIterates {
    fn resolve(self, agent_count: usize, dimension: usize) -> Result<Vec<DVector<f64>>> {
        let vectors = match self {
            InitialIterates::Broadcast(v) => vec![v; agent_count],
            InitialIterates::PerAgent(vs) => vs,
        };
        if vectors.len() != agent_count {
            return Err(Error::Dimension {
                expected: agent_count,
                actual: vectors.len(),
            });
        }
        for v in &vectors {
            if v.len() != dimension {
                return Err(Error::Dimension {
                    expected: dimension,
                    actual: v.len(),
                });
            }
        }
        Ok(vectors)
    }
}

/// Full network state at one iteration.
#[derive(Debug, Clone)]
pub struct NetworkState {
    pub t: usize,
    pub agents: Vec<AgentState>,
    /// Current realization `xi^t`.
    pub xi: Realization,
    /// Current step sizes `alpha^t` and `rho^t`.
    pub alpha: f64,
    pub rho: f64,
}

impl NetworkState {
    pub fn agent_count(&self) -> usize {
        self.agents.len()
    }

    /// Network mean iterate.
    pub fn mean_x(&self) -> DVector<f64> {
        let p = self.agents[0].x.len();
        let sum = self
            .agents
            .iter()
            .fold(DVector::zeros(p), |acc, a| acc + &a.x);
        sum / self.agents.len() as f64
    }

    /// `max_i ||x_i - mean(x)||`.
    pub fn consensus_error(&self) -> f64 {
        let mean = self.mean_x();
        self.agents
            .iter()
            .map(|a| (&a.x - &mean).norm())
            .fold(0.0, f64::max)
    }

    /// Relative gap between the tracker average and the sampled gradient
    /// average; zero in exact arithmetic for doubly stochastic weights.
    pub fn conservation_residual(&self) -> f64 {
        let p = self.agents[0].x.len();
        let count = self.agents.len() as f64;
        let mean_y = self
            .agents
            .iter()
            .fold(DVector::zeros(p), |acc, a| acc + &a.y)
            / count;
        let mean_grad = self
            .agents
            .iter()
            .fold(DVector::zeros(p), |acc, a| acc + &a.last_grad)
            / count;
        (&mean_y - &mean_grad).norm() / (1.0 + mean_grad.norm())
    }
}

/// Merit function for stationarity of the composite empirical objective:
/// the norm of the displacement of one prox-gradient step with unit step
/// size from `x`. Zero exactly at stationary points.
pub fn stationarity_measure(problem: &ProblemInstance, x: &DVector<f64>) -> Result<f64> {
    let grad = problem.empirical_smooth_gradient(x);
    let step = composite_backward(&problem.regularizer, &problem.feasible_set, &(x - grad), 1.0)?;
    Ok((x - step).norm())
}

/// Sets up the network state: draws `xi^0`, initializes the tracker to the
/// local sampled gradient, and seeds the running averages consistently.
pub fn initialize(
    problem: &mut ProblemInstance,
    schedule: &StepSchedule,
    x0: InitialIterates,
) -> Result<NetworkState> {
    let count = problem.agent_count();
    let dim = problem.dimension();
    let xs = x0.resolve(count, dim)?;
    for x in &xs {
        if !problem.feasible_set.contains(x, 1e-9) {
            return Err(Error::Infeasible("initial iterate outside K".into()));
        }
    }
    let xi = problem.sampler.draw();
    let agents = xs
        .into_iter()
        .enumerate()
        .map(|(i, x)| {
            let grad = problem.agent(i).gradient(&x, &xi.per_agent[i]);
            AgentState {
                pi_tilde: &grad * (count as f64 - 1.0),
                d: &grad * count as f64,
                y: grad.clone(),
                last_grad: grad,
                z: x.clone(),
                x,
            }
        })
        .collect();
    Ok(NetworkState {
        t: 0,
        agents,
        xi,
        alpha: schedule.alpha0,
        rho: schedule.rho0,
    })
}

fn solve_subproblem(
    problem: &ProblemInstance,
    cfg: &ScaConfig,
    agent: usize,
    state: &AgentState,
    batch: &[usize],
    rho: f64,
) -> Result<DVector<f64>> {
    let objective = problem.agent(agent);
    let closed_form_ready = problem.regularizer.ridge_lambda().is_some()
        && problem.feasible_set.is_unconstrained();
    let want_closed = matches!(cfg.solver, SolverChoice::ClosedForm | SolverChoice::Auto);

    if want_closed && closed_form_ready {
        if let Some(lins) = objective.linearize(&state.x, batch) {
            let lins = lins?;
            let lambda = problem.regularizer.ridge_lambda().expect("checked above");
            let sub = assemble_closed_form(
                &lins,
                rho,
                cfg.tau,
                lambda,
                &state.pi_tilde,
                &state.d,
                &state.x,
            )?;
            match solve_closed_form(&sub) {
                Ok(x_hat) => return Ok(x_hat),
                Err(err) => {
                    eprintln!("agent {agent}: closed-form solve failed ({err}), using generic solver");
                    let surrogate = LinearizedLsSurrogate {
                        base: state.x.clone(),
                        linearizations: lins,
                        tau: cfg.tau,
                    };
                    return run_generic(problem, cfg, state, &surrogate, rho);
                }
            }
        } else if cfg.solver == SolverChoice::ClosedForm {
            return Err(Error::Config(
                "closed-form solver requires a linearizable objective".into(),
            ));
        }
    } else if cfg.solver == SolverChoice::ClosedForm {
        return Err(Error::Config(
            "closed-form solver requires a ridge regularizer and unconstrained K".into(),
        ));
    }

    let surrogate = default_surrogate_quadratic(objective, &state.x, batch, cfg.tau)?;
    run_generic(problem, cfg, state, &surrogate, rho)
}

fn run_generic(
    problem: &ProblemInstance,
    cfg: &ScaConfig,
    state: &AgentState,
    surrogate: &dyn SurrogateTerm,
    rho: f64,
) -> Result<DVector<f64>> {
    let spec = SurrogateSpec {
        base_point: &state.x,
        surrogate,
        pi_tilde: &state.pi_tilde,
        d: &state.d,
        rho,
        regularizer: &problem.regularizer,
        feasible_set: &problem.feasible_set,
    };
    solve_generic(&spec, cfg.inner_tolerance, cfg.inner_max_iterations)
}

/// Advances the network by one synchronous round.
pub fn step(
    state: &mut NetworkState,
    problem: &mut ProblemInstance,
    weights: &WeightMatrix,
    schedule: &StepSchedule,
    cfg: &ScaConfig,
) -> Result<()> {
    let count = state.agents.len();
    if weights.agent_count() != count {
        return Err(Error::Dimension {
            expected: count,
            actual: weights.agent_count(),
        });
    }
    let (alpha, rho) = (state.alpha, state.rho);

    // S1: local SCA and smoothing.
    for i in 0..count {
        let x_hat = solve_subproblem(problem, cfg, i, &state.agents[i], &state.xi.per_agent[i], rho)
            .map_err(|e| Error::AgentStep {
                agent: i,
                iteration: state.t,
                source: Box::new(e),
            })?;
        let agent = &mut state.agents[i];
        agent.z = &agent.x + (x_hat - &agent.x) * alpha;
    }

    // S2: agreement, fresh realization, gradient tracking.
    let xi_next = problem.sampler.draw();
    let w = weights.as_matrix();
    let mut next: Vec<(DVector<f64>, DVector<f64>, DVector<f64>)> = Vec::with_capacity(count);
    for i in 0..count {
        let p = state.agents[0].x.len();
        let mut x_new = DVector::zeros(p);
        let mut y_mix = DVector::zeros(p);
        for j in 0..count {
            let wij = w[(i, j)];
            if wij != 0.0 {
                x_new += &state.agents[j].z * wij;
                y_mix += &state.agents[j].y * wij;
            }
        }
        let grad_new = problem.agent(i).gradient(&x_new, &xi_next.per_agent[i]);
        let y_new = y_mix + &grad_new - &state.agents[i].last_grad;
        next.push((x_new, y_new, grad_new));
    }

    // S3: recursive gradient averaging, then commit.
    for (i, (x_new, y_new, grad_new)) in next.into_iter().enumerate() {
        let agent = &mut state.agents[i];
        agent.pi_tilde = &y_new * count as f64 - &grad_new;
        agent.d = &agent.d * (1.0 - rho) + &y_new * (count as f64 * rho);
        agent.x = x_new;
        agent.y = y_new;
        agent.last_grad = grad_new;
    }
    state.xi = xi_next;
    state.alpha = StepSchedule::advance(state.alpha, schedule.eps_alpha);
    state.rho = StepSchedule::advance(state.rho, schedule.eps_rho);
    state.t += 1;
    Ok(())
}

/// Termination rule evaluated on recorded metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    /// Run for the full budget.
    Never,
    /// Stop once both measures drop below their thresholds.
    Thresholds { stationarity: f64, consensus: f64 },
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule::Thresholds {
            stationarity: 1e-6,
            consensus: 1e-6,
        }
    }
}

/// Options for [`run`].
#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub budget: usize,
    pub stop_rule: StopRule,
    /// Expensive metrics (objective, stationarity) are computed every this
    /// many iterations; other rows carry `NaN` there.
    pub metric_period: usize,
    /// Record wall-clock milliseconds per iteration. Off by default so that
    /// repeated seeded runs produce identical metrics byte for byte.
    pub record_timing: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            budget: 1000,
            stop_rule: StopRule::default(),
            metric_period: 1,
            record_timing: false,
        }
    }
}

fn record_metrics(
    state: &NetworkState,
    problem: &ProblemInstance,
    options: &RunOptions,
    elapsed_ms: f64,
) -> Result<IterationMetrics> {
    let full = options.metric_period <= 1 || state.t % options.metric_period == 0;
    let (objective, stationarity) = if full {
        let mean = state.mean_x();
        (
            problem.empirical_objective(&mean),
            stationarity_measure(problem, &mean)?,
        )
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(IterationMetrics {
        iter: state.t,
        objective,
        consensus_err: state.consensus_error(),
        stationarity,
        conservation_residual: state.conservation_residual(),
        alpha: state.alpha,
        rho: state.rho,
        ms: elapsed_ms,
    })
}

fn should_stop(rule: &StopRule, metrics: &IterationMetrics) -> bool {
    match rule {
        StopRule::Never => false,
        StopRule::Thresholds {
            stationarity,
            consensus,
        } => {
            metrics.stationarity.is_finite()
                && metrics.stationarity < *stationarity
                && metrics.consensus_err < *consensus
        }
    }
}

/// Runs the outer loop for up to `budget` iterations, recording metrics at
/// every iteration (including the initial state).
pub fn run(
    state: &mut NetworkState,
    problem: &mut ProblemInstance,
    weights: &WeightMatrix,
    schedule: &StepSchedule,
    cfg: &ScaConfig,
    options: &RunOptions,
) -> Result<Vec<IterationMetrics>> {
    if options.budget == 0 {
        return Err(Error::ConfigValue {
            key: "budget".into(),
            reason: "must be at least 1".into(),
        });
    }
    let mut trajectory = Vec::with_capacity(options.budget + 1);
    let initial = record_metrics(state, problem, options, 0.0)?;
    let stop_now = should_stop(&options.stop_rule, &initial);
    trajectory.push(initial);
    if stop_now {
        return Ok(trajectory);
    }
    for _ in 0..options.budget {
        let started = Instant::now();
        step(state, problem, weights, schedule, cfg)?;
        let elapsed_ms = if options.record_timing {
            started.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        };
        let metrics = record_metrics(state, problem, options, elapsed_ms)?;
        let stop = should_stop(&options.stop_rule, &metrics);
        trajectory.push(metrics);
        if stop {
            break;
        }
    }
    Ok(trajectory)
}

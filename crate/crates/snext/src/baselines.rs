//! Reference algorithms for comparison runs: distributed stochastic
//! gradient descent with the same consensus weights, and the centralized
//! single-node reductions of both methods.
//!
//! All baselines consume the shared minibatch stream in the same pattern
//! as the tracked SCA loop (one draw at initialization, one per step), so
//! runs with equal seeds see identical data and are directly comparable.

use nalgebra::{DMatrix, DVector};

use crate::algorithm::{
    self, initialize, stationarity_measure, InitialIterates, RunOptions, ScaConfig, StopRule,
};
use crate::error::{Error, Result};
use crate::graph::WeightMatrix;
use crate::metrics::IterationMetrics;
use crate::problem::{composite_backward, ProblemInstance, Realization};
use crate::schedule::StepSchedule;

/// Which baseline to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineAlgorithm {
    /// Distributed stochastic gradient with consensus mixing.
    Dsgd,
    /// Centralized stochastic gradient (single node).
    Csgd,
    /// Centralized SCA (single node, same code path as the distributed
    /// method with a one-by-one weight matrix).
    Csca,
}

/// State of a distributed gradient baseline.
#[derive(Debug, Clone)]
pub struct DsgdState {
    pub t: usize,
    pub xs: Vec<DVector<f64>>,
    pub xi: Realization,
    pub alpha: f64,
}

impl DsgdState {
    pub fn mean_x(&self) -> DVector<f64> {
        let p = self.xs[0].len();
        let sum = self.xs.iter().fold(DVector::zeros(p), |acc, x| acc + x);
        sum / self.xs.len() as f64
    }

    pub fn consensus_error(&self) -> f64 {
        let mean = self.mean_x();
        self.xs.iter().map(|x| (x - &mean).norm()).fold(0.0, f64::max)
    }
}

/// Initializes the gradient baseline; draws `xi^0` so the stream position
/// matches the tracked method.
pub fn dsgd_initialize(
    problem: &mut ProblemInstance,
    schedule: &StepSchedule,
    x0: InitialIterates,
) -> Result<DsgdState> {
    let count = problem.agent_count();
    let dim = problem.dimension();
    let xs = match x0 {
        InitialIterates::Broadcast(v) => vec![v; count],
        InitialIterates::PerAgent(vs) => vs,
    };
    if xs.len() != count {
        return Err(Error::Dimension {
            expected: count,
            actual: xs.len(),
        });
    }
    for x in &xs {
        if x.len() != dim {
            return Err(Error::Dimension {
                expected: dim,
                actual: x.len(),
            });
        }
        if !problem.feasible_set.contains(x, 1e-9) {
            return Err(Error::Infeasible("initial iterate outside K".into()));
        }
    }
    let xi = problem.sampler.draw();
    Ok(DsgdState {
        t: 0,
        xs,
        xi,
        alpha: schedule.alpha0,
    })
}

/// One adapt-then-combine round: each agent takes a local gradient step,
/// the results are mixed, and the composite backward step (prox of the
/// regularizer, then projection) is applied.
pub fn dsgd_step(
    state: &mut DsgdState,
    problem: &mut ProblemInstance,
    weights: &WeightMatrix,
    schedule: &StepSchedule,
) -> Result<()> {
    let count = state.xs.len();
    if weights.agent_count() != count {
        return Err(Error::Dimension {
            expected: count,
            actual: weights.agent_count(),
        });
    }
    let alpha = state.alpha;
    let adapted: Vec<DVector<f64>> = (0..count)
        .map(|i| {
            let grad = problem.agent(i).gradient(&state.xs[i], &state.xi.per_agent[i]);
            &state.xs[i] - grad * alpha
        })
        .collect();
    let w = weights.as_matrix();
    let p = state.xs[0].len();
    for i in 0..count {
        let mut mixed = DVector::zeros(p);
        for j in 0..count {
            let wij = w[(i, j)];
            if wij != 0.0 {
                mixed += &adapted[j] * wij;
            }
        }
        state.xs[i] =
            composite_backward(&problem.regularizer, &problem.feasible_set, &mixed, alpha)
                .map_err(|e| Error::AgentStep {
                    agent: i,
                    iteration: state.t,
                    source: Box::new(e),
                })?;
    }
    state.xi = problem.sampler.draw();
    state.alpha = StepSchedule::advance(state.alpha, schedule.eps_alpha);
    state.t += 1;
    Ok(())
}

fn dsgd_metrics(
    state: &DsgdState,
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
        // No gradient tracker, so no conservation identity to report.
        conservation_residual: f64::NAN,
        alpha: state.alpha,
        rho: f64::NAN,
        ms: elapsed_ms,
    })
}

fn dsgd_should_stop(rule: &StopRule, metrics: &IterationMetrics) -> bool {
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

/// Runs the gradient baseline for up to `budget` iterations.
pub fn dsgd_run(
    state: &mut DsgdState,
    problem: &mut ProblemInstance,
    weights: &WeightMatrix,
    schedule: &StepSchedule,
    options: &RunOptions,
) -> Result<Vec<IterationMetrics>> {
    if options.budget == 0 {
        return Err(Error::ConfigValue {
            key: "budget".into(),
            reason: "must be at least 1".into(),
        });
    }
    let mut trajectory = Vec::with_capacity(options.budget + 1);
    let initial = dsgd_metrics(state, problem, options, 0.0)?;
    let stop_now = dsgd_should_stop(&options.stop_rule, &initial);
    trajectory.push(initial);
    if stop_now {
        return Ok(trajectory);
    }
    for _ in 0..options.budget {
        let started = std::time::Instant::now();
        dsgd_step(state, problem, weights, schedule)?;
        let elapsed_ms = if options.record_timing {
            started.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        };
        let metrics = dsgd_metrics(state, problem, options, elapsed_ms)?;
        let stop = dsgd_should_stop(&options.stop_rule, &metrics);
        trajectory.push(metrics);
        if stop {
            break;
        }
    }
    Ok(trajectory)
}

fn single_node_weights() -> WeightMatrix {
    WeightMatrix::from_matrix(DMatrix::identity(1, 1)).expect("1x1 identity is doubly stochastic")
}

fn require_single_agent(problem: &ProblemInstance) -> Result<()> {
    if problem.agent_count() != 1 {
        return Err(Error::Config(
            "centralized baselines require a single-agent problem instance".into(),
        ));
    }
    Ok(())
}

/// Centralized stochastic gradient: the distributed baseline on one node.
pub fn centralized_sgd_run(
    problem: &mut ProblemInstance,
    schedule: &StepSchedule,
    x0: DVector<f64>,
    options: &RunOptions,
) -> Result<Vec<IterationMetrics>> {
    require_single_agent(problem)?;
    let weights = single_node_weights();
    let mut state = dsgd_initialize(problem, schedule, InitialIterates::Broadcast(x0))?;
    dsgd_run(&mut state, problem, &weights, schedule, options)
}

/// Centralized SCA: the tracked method on one node, same code path.
pub fn centralized_sca_run(
    problem: &mut ProblemInstance,
    schedule: &StepSchedule,
    cfg: &ScaConfig,
    x0: DVector<f64>,
    options: &RunOptions,
) -> Result<Vec<IterationMetrics>> {
    require_single_agent(problem)?;
    let weights = single_node_weights();
    let mut state = initialize(problem, schedule, InitialIterates::Broadcast(x0))?;
    algorithm::run(&mut state, problem, &weights, schedule, cfg, options)
}

//! Dispatches a validated configuration to an algorithm and persists the
//! results: a metrics CSV and a plain-text checkpoint of the final mean
//! iterate, both under the configured output directory (overridable with
//! the `SNEXT_OUTPUT_DIR` environment variable).

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};

use crate::algorithm::{self, InitialIterates, RunOptions, ScaConfig, StopRule};
use crate::baselines::{self, BaselineAlgorithm};
use crate::error::Result;
use crate::graph::{metropolis_weights, random_connected_graph, WeightMatrix};
use crate::harness::config::{AlgorithmName, ProblemKind, RunConfig};
use crate::harness::dataset::{load_csv_dataset, Dataset};
use crate::io::write_vector;
use crate::metrics::{write_csv, IterationMetrics};
use crate::nn::MlpArchitecture;
use crate::problem::{
    make_nn_regression_instance, make_quadratic_instance, ProblemInstance, QuadraticOracle,
};

/// Environment variable overriding `run.output`.
pub const OUTPUT_DIR_ENV: &str = "SNEXT_OUTPUT_DIR";

/// Everything a finished run produced.
#[derive(Debug, Clone)]
pub struct ExperimentRecord {
    /// The resolved configuration that was executed.
    pub config: RunConfig,
    pub metrics: Vec<IterationMetrics>,
    /// Final network-mean iterate.
    pub final_iterate: DVector<f64>,
    /// Empirical objective at the final iterate.
    pub train_loss: f64,
    /// Mean squared error on the held-out split (data problems only).
    pub test_loss: Option<f64>,
    pub metrics_path: PathBuf,
    pub checkpoint_path: PathBuf,
}

struct BuiltProblem {
    problem: ProblemInstance,
    x0: DVector<f64>,
    dataset: Option<Dataset>,
    #[allow(dead_code)]
    oracle: Option<QuadraticOracle>,
}

fn build_problem(config: &RunConfig, agent_count: usize) -> Result<BuiltProblem> {
    let p = &config.problem;
    match p.kind {
        ProblemKind::Quadratic => {
            let (problem, oracle) = make_quadratic_instance(
                agent_count,
                p.dimension,
                config.run.seed,
                p.condition_number,
                p.noise_scale,
                p.lambda,
            )?;
            Ok(BuiltProblem {
                x0: DVector::zeros(problem.dimension()),
                problem,
                dataset: None,
                oracle: Some(oracle),
            })
        }
        ProblemKind::NnCsv => {
            let path = p.dataset.as_deref().expect("validated");
            let target = p.target_column.as_deref().expect("validated");
            let dataset = load_csv_dataset(Path::new(path), target, config.run.seed)?;
            let arch = MlpArchitecture::new(dataset.feature_count(), p.hidden.clone())?;
            let problem = make_nn_regression_instance(
                &dataset.train_features,
                &dataset.train_targets,
                agent_count,
                p.batch_size,
                arch.clone(),
                p.lambda,
                config.run.seed,
            )?;
            Ok(BuiltProblem {
                x0: arch.init_weights(config.run.seed.wrapping_add(7)),
                problem,
                dataset: Some(dataset),
                oracle: None,
            })
        }
    }
}

fn build_weights(config: &RunConfig, agent_count: usize) -> Result<WeightMatrix> {
    if agent_count == 1 {
        return WeightMatrix::from_matrix(DMatrix::identity(1, 1));
    }
    let topology = random_connected_graph(
        agent_count,
        config.network.edge_probability,
        config.network.graph_seed,
    )?;
    metropolis_weights(&topology)
}

fn test_mse(arch: &MlpArchitecture, w: &DVector<f64>, dataset: &Dataset) -> Result<f64> {
    let n = dataset.test_features.nrows();
    if n == 0 {
        return Ok(f64::NAN);
    }
    let mut total = 0.0;
    for i in 0..n {
        let x = dataset.test_features.row(i).transpose();
        let g = arch.forward(w, &x)?;
        total += (g - dataset.test_targets[i]).powi(2);
    }
    Ok(total / n as f64)
}

fn output_dir(config: &RunConfig) -> PathBuf {
    match std::env::var(OUTPUT_DIR_ENV) {
        Ok(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => PathBuf::from(&config.run.output),
    }
}

/// Runs the configured experiment and writes
/// `<algorithm>_metrics.csv` and `<algorithm>_checkpoint.txt`.
pub fn run_experiment(config: &RunConfig) -> Result<ExperimentRecord> {
    config.validate()?;
    let name = config.algorithm.name;
    let agent_count = if name.is_centralized() {
        1
    } else {
        config.network.agent_count
    };
    let mut built = build_problem(config, agent_count)?;
    let weights = build_weights(config, agent_count)?;
    let schedule = config.algorithm.schedule()?;
    let sca_cfg = ScaConfig {
        tau: config.algorithm.tau,
        ..ScaConfig::default()
    };
    let options = RunOptions {
        budget: config.run.budget,
        // Fixed iteration grid so paired runs line up row by row.
        stop_rule: StopRule::Never,
        metric_period: config.run.metric_period,
        record_timing: false,
    };

    let x0 = built.x0.clone();
    let (metrics, final_iterate) = match name {
        AlgorithmName::Snext => {
            let mut state = algorithm::initialize(
                &mut built.problem,
                &schedule,
                InitialIterates::Broadcast(x0),
            )?;
            let metrics = algorithm::run(
                &mut state,
                &mut built.problem,
                &weights,
                &schedule,
                &sca_cfg,
                &options,
            )?;
            (metrics, state.mean_x())
        }
        AlgorithmName::Dsgd => {
            let mut state = baselines::dsgd_initialize(
                &mut built.problem,
                &schedule,
                InitialIterates::Broadcast(x0),
            )?;
            let metrics =
                baselines::dsgd_run(&mut state, &mut built.problem, &weights, &schedule, &options)?;
            (metrics, state.mean_x())
        }
        AlgorithmName::Csgd => {
            let mut state = baselines::dsgd_initialize(
                &mut built.problem,
                &schedule,
                InitialIterates::Broadcast(x0),
            )?;
            let metrics =
                baselines::dsgd_run(&mut state, &mut built.problem, &weights, &schedule, &options)?;
            (metrics, state.mean_x())
        }
        AlgorithmName::Csca => {
            let mut state = algorithm::initialize(
                &mut built.problem,
                &schedule,
                InitialIterates::Broadcast(x0),
            )?;
            let metrics = algorithm::run(
                &mut state,
                &mut built.problem,
                &weights,
                &schedule,
                &sca_cfg,
                &options,
            )?;
            (metrics, state.mean_x())
        }
    };

    let train_loss = built.problem.empirical_objective(&final_iterate);
    let test_loss = match (&built.dataset, config.problem.kind) {
        (Some(dataset), ProblemKind::NnCsv) => {
            let arch = MlpArchitecture::new(
                dataset.feature_count(),
                config.problem.hidden.clone(),
            )?;
            Some(test_mse(&arch, &final_iterate, dataset)?)
        }
        _ => None,
    };

    let dir = output_dir(config);
    std::fs::create_dir_all(&dir)?;
    let metrics_path = dir.join(format!("{}_metrics.csv", name.as_str()));
    let checkpoint_path = dir.join(format!("{}_checkpoint.txt", name.as_str()));
    write_csv(&metrics_path, &metrics)?;
    write_vector(&checkpoint_path, &final_iterate)?;

    Ok(ExperimentRecord {
        config: config.clone(),
        metrics,
        final_iterate,
        train_loss,
        test_loss,
        metrics_path,
        checkpoint_path,
    })
}

/// Maps a configured name to the baseline enum, when it is a baseline.
pub fn baseline_of(name: AlgorithmName) -> Option<BaselineAlgorithm> {
    match name {
        AlgorithmName::Snext => None,
        AlgorithmName::Dsgd => Some(BaselineAlgorithm::Dsgd),
        AlgorithmName::Csgd => Some(BaselineAlgorithm::Csgd),
        AlgorithmName::Csca => Some(BaselineAlgorithm::Csca),
    }
}

impl ExperimentRecord {
    /// Metric rows are strictly increasing in the iteration index.
    pub fn iterations_strictly_increasing(&self) -> bool {
        self.metrics.windows(2).all(|w| w[0].iter < w[1].iter)
    }
}

//! Paired-seed comparison of the tracked SCA method against distributed
//! SGD on the same network, data shards and minibatch stream.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use snext::algorithm::{self, InitialIterates, RunOptions, ScaConfig, StopRule};
use snext::baselines::{dsgd_initialize, dsgd_run};
use snext::graph::{metropolis_weights, random_connected_graph};
use snext::metrics::IterationMetrics;
use snext::nn::MlpArchitecture;
use snext::problem::{make_nn_regression_instance, ProblemInstance};
use snext::schedule::StepSchedule;

fn build(seed: u64) -> snext::Result<(ProblemInstance, DVector<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let features = DMatrix::from_fn(200, 5, |_, _| rng.gen_range(-1.0..1.0));
    let targets = DVector::from_fn(200, |i, _| {
        let row = features.row(i);
        let s: f64 = row[2] + row[3];
        row[0] * row[1] - s.tanh()
    });
    let arch = MlpArchitecture::new(5, vec![10, 10])?;
    let problem = make_nn_regression_instance(&features, &targets, 6, 10, arch.clone(), 1e-2, seed)?;
    Ok((problem, arch.init_weights(seed ^ 0xabcd)))
}

fn main() -> snext::Result<()> {
    let seed = 5;
    let schedule = StepSchedule::default();
    let topology = random_connected_graph(6, 0.5, seed)?;
    let weights = metropolis_weights(&topology)?;
    let options = RunOptions {
        budget: 500,
        stop_rule: StopRule::Never,
        metric_period: 100,
        ..RunOptions::default()
    };

    let (mut problem, w0) = build(seed)?;
    let mut state = algorithm::initialize(
        &mut problem,
        &schedule,
        InitialIterates::Broadcast(w0.clone()),
    )?;
    let sca = algorithm::run(
        &mut state,
        &mut problem,
        &weights,
        &schedule,
        &ScaConfig::default(),
        &options,
    )?;

    let (mut problem, w0) = build(seed)?;
    let mut dsgd_state = dsgd_initialize(&mut problem, &schedule, InitialIterates::Broadcast(w0))?;
    let sgd = dsgd_run(&mut dsgd_state, &mut problem, &weights, &schedule, &options)?;

    let recorded = |rows: &[IterationMetrics]| -> Vec<(usize, f64)> {
        rows.iter()
            .filter(|r| r.objective.is_finite())
            .map(|r| (r.iter, r.objective))
            .collect()
    };
    println!("iter   tracked SCA     distributed SGD");
    for ((t, sca_obj), (_, sgd_obj)) in recorded(&sca).into_iter().zip(recorded(&sgd)) {
        println!("{t:<6} {sca_obj:<15.6e} {sgd_obj:.6e}");
    }
    Ok(())
}

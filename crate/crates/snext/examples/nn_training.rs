//! Trains a small tanh network on synthetic regression data, split across
//! six agents, with the closed-form linearized subproblem solver.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use snext::algorithm::{initialize, run, InitialIterates, RunOptions, ScaConfig, StopRule};
use snext::graph::{metropolis_weights, random_connected_graph};
use snext::nn::MlpArchitecture;
use snext::problem::make_nn_regression_instance;
use snext::schedule::StepSchedule;

fn synthetic_regression(n: usize, p: usize, seed: u64) -> (DMatrix<f64>, DVector<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let features = DMatrix::from_fn(n, p, |_, _| rng.gen_range(-1.0..1.0));
    let targets = DVector::from_fn(n, |i, _| {
        let row = features.row(i);
        let s: f64 = 2.0 * row[0];
        s.sin() + row[1] * row[2] - 0.5 * row[p - 1]
    });
    (features, targets)
}

fn main() -> snext::Result<()> {
    let (features, targets) = synthetic_regression(200, 5, 3);
    let arch = MlpArchitecture::new(5, vec![10, 10])?;
    println!("network has {} weights", arch.param_count());

    let mut problem =
        make_nn_regression_instance(&features, &targets, 6, 10, arch.clone(), 1e-2, 3)?;
    let topology = random_connected_graph(6, 0.5, 3)?;
    let weights = metropolis_weights(&topology)?;
    let schedule = StepSchedule::default();
    let w0 = arch.init_weights(17);

    let mut state = initialize(&mut problem, &schedule, InitialIterates::Broadcast(w0))?;
    let options = RunOptions {
        budget: 500,
        stop_rule: StopRule::Never,
        metric_period: 50,
        ..RunOptions::default()
    };
    let trajectory = run(
        &mut state,
        &mut problem,
        &weights,
        &schedule,
        &ScaConfig::default(),
        &options,
    )?;

    println!("iter   objective       consensus_err");
    for row in trajectory.iter().filter(|r| r.objective.is_finite()) {
        println!("{:<6} {:<15.6e} {:.3e}", row.iter, row.objective, row.consensus_err);
    }
    Ok(())
}

//! Acceptance suite: one test per exit criterion, each printing a
//! PASS/FAIL line before asserting. Criterion 7 states conditions that the
//! documented default schedule family cannot satisfy (the step-size ratio
//! tends to a positive constant, not to zero); it is checked exactly as
//! stated and fails honestly.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use snext::algorithm::{
    initialize, run, step, stationarity_measure, InitialIterates, RunOptions, ScaConfig, StopRule,
};
use snext::baselines::{centralized_sca_run, dsgd_initialize, dsgd_run};
use snext::graph::{metropolis_weights, random_connected_graph, WeightMatrix};
use snext::harness::config::parse_config;
use snext::harness::runner::run_experiment;
use snext::nn::MlpArchitecture;
use snext::problem::{
    make_nn_regression_instance, make_quadratic_instance, FeasibleSet, ProblemInstance,
    Regularizer,
};
use snext::sca::{
    assemble_closed_form, default_surrogate_quadratic, solve_closed_form, solve_generic,
    LinearizedLsSurrogate, SurrogateSpec,
};
use snext::schedule::StepSchedule;

fn report(number: usize, name: &str, pass: bool) {
    println!(
        "criterion {number} ({name}): {}",
        if pass { "PASS" } else { "FAIL" }
    );
}

fn network(agents: usize, seed: u64) -> WeightMatrix {
    if agents == 1 {
        return WeightMatrix::from_matrix(DMatrix::identity(1, 1)).unwrap();
    }
    let topology = random_connected_graph(agents, 0.5, seed).unwrap();
    metropolis_weights(&topology).unwrap()
}

fn synthetic_nn_problem(
    samples: usize,
    features: usize,
    hidden: Vec<usize>,
    agents: usize,
    batch: usize,
    seed: u64,
) -> (ProblemInstance, DVector<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(samples, features, |_, _| rng.gen_range(-1.0..1.0));
    let y = DVector::from_fn(samples, |i, _| {
        let row = x.row(i);
        let s: f64 = 2.0 * row[0];
        s.sin() + row[1] * row[features - 1]
    });
    let arch = MlpArchitecture::new(features, hidden).unwrap();
    let problem =
        make_nn_regression_instance(&x, &y, agents, batch, arch.clone(), 1e-2, seed).unwrap();
    let w0 = arch.init_weights(seed ^ 0x5eed);
    (problem, w0)
}

fn max_conservation_over_run(
    mut problem: ProblemInstance,
    x0: DVector<f64>,
    agents: usize,
    iterations: usize,
) -> f64 {
    let weights = network(agents, 3);
    let schedule = StepSchedule::default();
    let cfg = ScaConfig::default();
    let mut state = initialize(&mut problem, &schedule, InitialIterates::Broadcast(x0)).unwrap();
    let mut worst = state.conservation_residual();
    for _ in 0..iterations {
        step(&mut state, &mut problem, &weights, &schedule, &cfg).unwrap();
        worst = worst.max(state.conservation_residual());
    }
    worst
}

#[test]
fn criterion_1_gradient_tracking_conservation() {
    let mut worst: f64 = 0.0;
    for agents in [1usize, 2, 6] {
        let (problem, _) = make_quadratic_instance(agents, 6, 19, 10.0, 0.3, 1e-2).unwrap();
        worst = worst.max(max_conservation_over_run(
            problem,
            DVector::zeros(6),
            agents,
            2000,
        ));
    }
    let (problem, w0) = synthetic_nn_problem(60, 3, vec![4], 6, 4, 23);
    worst = worst.max(max_conservation_over_run(problem, w0, 6, 2000));
    let pass = worst <= 1e-10;
    report(1, "gradient-tracking conservation", pass);
    assert!(pass, "worst relative conservation residual {worst}");
}

#[test]
fn criterion_2_asymptotic_consensus() {
    let (mut problem, _) = make_quadratic_instance(6, 6, 29, 10.0, 0.0, 1e-2).unwrap();
    let weights = network(6, 29);
    let schedule = StepSchedule::default();
    let cfg = ScaConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let starts: Vec<DVector<f64>> = (0..6)
        .map(|_| DVector::from_fn(6, |_, _| rng.gen_range(-2.0..2.0)))
        .collect();
    let mut state =
        initialize(&mut problem, &schedule, InitialIterates::PerAgent(starts)).unwrap();
    let initial = state.consensus_error();
    for _ in 0..2000 {
        step(&mut state, &mut problem, &weights, &schedule, &cfg).unwrap();
    }
    let final_error = state.consensus_error();
    let pass = final_error <= 1e-3 * initial;
    report(2, "asymptotic consensus", pass);
    assert!(pass, "consensus error {initial} -> {final_error}");
}

#[test]
fn criterion_3_convergence_to_stationary_point() {
    let (mut problem, oracle) = make_quadratic_instance(6, 6, 37, 10.0, 0.0, 1e-2).unwrap();
    let x_star = oracle.minimizer();
    let weights = network(6, 37);
    let schedule = StepSchedule::default();
    let mut state = initialize(
        &mut problem,
        &schedule,
        InitialIterates::Broadcast(DVector::zeros(6)),
    )
    .unwrap();
    let options = RunOptions {
        budget: 5000,
        stop_rule: StopRule::Never,
        metric_period: 1000,
        ..RunOptions::default()
    };
    run(
        &mut state,
        &mut problem,
        &weights,
        &schedule,
        &ScaConfig::default(),
        &options,
    )
    .unwrap();
    let mean = state.mean_x();
    let gap = (&mean - &x_star).norm();
    let stat = stationarity_measure(&problem, &mean).unwrap();
    let pass = gap <= 1e-3 && stat <= 1e-4;
    report(3, "convergence to the minimizer", pass);
    assert!(pass, "gap {gap}, stationarity {stat}");
}

#[test]
fn criterion_4_fixed_point_at_stationary_solution() {
    let (mut problem, oracle) = make_quadratic_instance(3, 4, 8, 5.0, 0.0, 1e-2).unwrap();
    let x_star = oracle.minimizer();
    let xi = problem.sampler.draw();
    let full_grad = problem.empirical_smooth_gradient(&x_star);
    let mut worst: f64 = 0.0;
    for i in 0..3 {
        let grad_i = problem.agent(i).full_gradient(&x_star);
        let pi_tilde = &full_grad - &grad_i;
        let surrogate =
            default_surrogate_quadratic(problem.agent(i), &x_star, &xi.per_agent[i], 1.0).unwrap();
        let spec = SurrogateSpec {
            base_point: &x_star,
            surrogate: &surrogate,
            pi_tilde: &pi_tilde,
            d: &full_grad,
            rho: 0.5,
            regularizer: &problem.regularizer,
            feasible_set: &problem.feasible_set,
        };
        let x_hat = solve_generic(&spec, 1e-12, 100_000).unwrap();
        worst = worst.max((x_hat - &x_star).norm());
    }
    let pass = worst <= 1e-6;
    report(4, "fixed point at the stationary solution", pass);
    assert!(pass, "worst subproblem displacement {worst}");
}

#[test]
fn criterion_5_closed_form_matches_generic_solver() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut worst: f64 = 0.0;
    for trial in 0..50 {
        let input_dim = rng.gen_range(2..=4);
        let hidden = rng.gen_range(2..=6);
        let arch = MlpArchitecture::new(input_dim, vec![hidden]).unwrap();
        let p = arch.param_count();
        assert!(p <= 50);
        let w_t = arch.init_weights(trial);
        let batch: Vec<(DVector<f64>, f64)> = (0..rng.gen_range(1..=8))
            .map(|_| {
                (
                    DVector::from_fn(input_dim, |_, _| rng.gen_range(-1.0..1.0)),
                    rng.gen_range(-1.0..1.0),
                )
            })
            .collect();
        let lins = arch.linearize_batch(&w_t, &batch).unwrap();
        let rho = rng.gen_range(0.05..1.0);
        let tau = rng.gen_range(0.5..2.0);
        let lambda = 1e-2;
        let pi_tilde = DVector::from_fn(p, |_, _| rng.gen_range(-1.0..1.0));
        let d = DVector::from_fn(p, |_, _| rng.gen_range(-1.0..1.0));

        let sub = assemble_closed_form(&lins, rho, tau, lambda, &pi_tilde, &d, &w_t).unwrap();
        let direct = solve_closed_form(&sub).unwrap();

        let surrogate = LinearizedLsSurrogate {
            base: w_t.clone(),
            linearizations: lins,
            tau,
        };
        let regularizer = Regularizer::SquaredL2 { lambda };
        let spec = SurrogateSpec {
            base_point: &w_t,
            surrogate: &surrogate,
            pi_tilde: &pi_tilde,
            d: &d,
            rho,
            regularizer: &regularizer,
            feasible_set: &FeasibleSet::All,
        };
        let iterative = solve_generic(&spec, 1e-12, 500_000).unwrap();
        worst = worst.max((direct - iterative).norm());
    }
    let pass = worst <= 1e-5;
    report(5, "closed-form solver vs generic oracle", pass);
    assert!(pass, "worst disagreement {worst}");
}

#[test]
fn criterion_6_jacobian_matches_finite_differences() {
    let arch = MlpArchitecture::new(13, vec![30, 30]).unwrap();
    let p = arch.param_count();
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let mut worst: f64 = 0.0;
    for draw in 0..20 {
        let w = arch.init_weights(draw);
        let x = DVector::from_fn(13, |_, _| rng.gen_range(-1.0..1.0));
        let analytic = arch.weight_jacobian(&w, &x).unwrap();
        let numeric = DVector::from_fn(p, |i, _| {
            let step = 1e-5;
            let mut plus = w.clone();
            let mut minus = w.clone();
            plus[i] += step;
            minus[i] -= step;
            (arch.forward(&plus, &x).unwrap() - arch.forward(&minus, &x).unwrap()) / (2.0 * step)
        });
        let rel = analytic
            .iter()
            .zip(numeric.iter())
            .map(|(a, b)| (a - b).abs() / (1.0 + a.abs().max(b.abs())))
            .fold(0.0, f64::max);
        worst = worst.max(rel);
    }
    let pass = worst < 1e-5;
    report(6, "backpropagation vs finite differences", pass);
    assert!(pass, "worst relative error {worst}");
}

#[test]
fn criterion_7_schedule_conditions() {
    let schedule = StepSchedule::default();
    let horizon = 100_000;
    let mut in_range = true;
    let mut decreasing = true;
    let mut ratio_decreasing = true;
    let mut prev_a = f64::INFINITY;
    let mut prev_r = f64::INFINITY;
    let mut prev_ratio = f64::INFINITY;
    let mut final_ratio = 0.0;
    for (a, r) in schedule.alphas().zip(schedule.rhos()).take(horizon + 1) {
        in_range &= a > 0.0 && a <= 1.0 && r > 0.0 && r <= 1.0;
        decreasing &= a < prev_a && r < prev_r;
        let ratio = a / r;
        ratio_decreasing &= ratio <= prev_ratio;
        prev_a = a;
        prev_r = r;
        prev_ratio = ratio;
        final_ratio = ratio;
    }
    let initial_ratio = schedule.alpha0 / schedule.rho0;
    let ratio_drops_tenfold = final_ratio < initial_ratio * 0.1;
    let pass = in_range && decreasing && ratio_decreasing && ratio_drops_tenfold;
    report(7, "step-size schedule conditions", pass);
    assert!(
        pass,
        "in_range={in_range} decreasing={decreasing} ratio_decreasing={ratio_decreasing} \
         ratio {initial_ratio} -> {final_ratio}; the ratio of this recurrence family tends to \
         eps_rho/eps_alpha = {} > 0, so the vanishing-ratio condition cannot hold \
         with the documented default parameters",
        schedule.eps_rho / schedule.eps_alpha
    );
}

#[test]
fn criterion_8_single_agent_reduction_is_bitwise() {
    let build = || {
        let (problem, _) = make_quadratic_instance(1, 5, 47, 10.0, 0.4, 1e-2).unwrap();
        problem
    };
    let schedule = StepSchedule::default();
    let cfg = ScaConfig::default();
    let options = RunOptions {
        budget: 300,
        stop_rule: StopRule::Never,
        ..RunOptions::default()
    };
    let weights = network(1, 0);

    let mut problem = build();
    let mut state = initialize(
        &mut problem,
        &schedule,
        InitialIterates::Broadcast(DVector::zeros(5)),
    )
    .unwrap();
    let distributed = run(&mut state, &mut problem, &weights, &schedule, &cfg, &options).unwrap();

    let mut problem = build();
    let centralized =
        centralized_sca_run(&mut problem, &schedule, &cfg, DVector::zeros(5), &options).unwrap();

    let pass = distributed.len() == centralized.len()
        && distributed
            .iter()
            .zip(&centralized)
            .all(|(a, b)| a.csv_row() == b.csv_row());
    report(8, "single-agent reduction is bitwise", pass);
    assert!(pass);
}

#[test]
fn criterion_9_faster_than_distributed_sgd() {
    let schedule = StepSchedule::default();
    let options = RunOptions {
        budget: 500,
        stop_rule: StopRule::Never,
        metric_period: 500,
        ..RunOptions::default()
    };
    let mut sca_objectives = Vec::new();
    let mut sgd_objectives = Vec::new();
    for rep in 0..5u64 {
        let seed = 100 + rep;
        let weights = network(6, seed);

        let (mut problem, w0) = synthetic_nn_problem(200, 5, vec![10, 10], 6, 10, seed);
        let mut state = initialize(
            &mut problem,
            &schedule,
            InitialIterates::Broadcast(w0.clone()),
        )
        .unwrap();
        let sca = run(
            &mut state,
            &mut problem,
            &weights,
            &schedule,
            &ScaConfig::default(),
            &options,
        )
        .unwrap();
        sca_objectives.push(sca.last().unwrap().objective);

        let (mut problem, w0) = synthetic_nn_problem(200, 5, vec![10, 10], 6, 10, seed);
        let mut state =
            dsgd_initialize(&mut problem, &schedule, InitialIterates::Broadcast(w0)).unwrap();
        let sgd = dsgd_run(&mut state, &mut problem, &weights, &schedule, &options).unwrap();
        sgd_objectives.push(sgd.last().unwrap().objective);
    }
    let median = |v: &mut Vec<f64>| {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v[v.len() / 2]
    };
    let sca_median = median(&mut sca_objectives);
    let sgd_median = median(&mut sgd_objectives);
    let pass = sca_median <= sgd_median;
    report(9, "faster than distributed SGD at iteration 500", pass);
    assert!(pass, "median objective: tracked SCA {sca_median}, SGD {sgd_median}");
}

#[test]
fn criterion_10_seeded_runs_are_byte_identical() {
    let make = |dir: &std::path::Path| {
        parse_config(&format!(
            r#"
[problem]
dimension = 6
noise_scale = 0.3

[run]
budget = 400
seed = 21
output = "{}"
"#,
            dir.display()
        ))
        .unwrap()
    };
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let rec_a = run_experiment(&make(dir_a.path())).unwrap();
    let rec_b = run_experiment(&make(dir_b.path())).unwrap();
    let bytes_a = std::fs::read(&rec_a.metrics_path).unwrap();
    let bytes_b = std::fs::read(&rec_b.metrics_path).unwrap();
    let pass = bytes_a == bytes_b;
    report(10, "seeded metrics CSVs are byte-identical", pass);
    assert!(pass);
}

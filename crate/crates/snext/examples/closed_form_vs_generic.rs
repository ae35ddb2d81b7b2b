//! Solves one linearized network subproblem twice: via the direct normal
//! equations and via the generic projected proximal-gradient solver, and
//! reports the agreement.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use snext::nn::MlpArchitecture;
use snext::problem::{FeasibleSet, Regularizer};
use snext::sca::{
    assemble_closed_form, solve_closed_form, solve_generic, LinearizedLsSurrogate, SurrogateSpec,
};

fn main() -> snext::Result<()> {
    let arch = MlpArchitecture::new(4, vec![6])?;
    let p = arch.param_count();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let w_t = arch.init_weights(1);
    let batch: Vec<(DVector<f64>, f64)> = (0..6)
        .map(|_| {
            let x = DVector::from_fn(4, |_, _| rng.gen_range(-1.0..1.0));
            let y = rng.gen_range(-1.0..1.0);
            (x, y)
        })
        .collect();
    let lins = arch.linearize_batch(&w_t, &batch)?;

    let (rho, tau, lambda) = (0.7, 1.0, 1e-2);
    let pi_tilde = DVector::from_fn(p, |i, _| ((i as f64) * 0.3).sin());
    let d = DVector::from_fn(p, |i, _| ((i as f64) * 0.17).cos());

    let sub = assemble_closed_form(&lins, rho, tau, lambda, &pi_tilde, &d, &w_t)?;
    let direct = solve_closed_form(&sub)?;

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
    let iterative = solve_generic(&spec, 1e-12, 200_000)?;

    println!("subproblem dimension: {p}");
    println!("direct solution norm:    {:.12}", direct.norm());
    println!("iterative solution norm: {:.12}", iterative.norm());
    println!("disagreement:            {:.3e}", (direct - iterative).norm());
    Ok(())
}

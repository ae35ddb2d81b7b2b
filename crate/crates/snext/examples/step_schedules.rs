//! Prints the coupled diminishing step-size sequences and the numerical
//! report on the convergence-theory conditions they are meant to satisfy.

use snext::schedule::StepSchedule;

fn main() {
    let schedule = StepSchedule::default();
    println!("t        alpha          rho            alpha/rho");
    let mut alphas = schedule.alphas();
    let mut rhos = schedule.rhos();
    for t in 0..=100_000 {
        let a = alphas.next().unwrap();
        let r = rhos.next().unwrap();
        if [0, 1, 10, 100, 1_000, 10_000, 100_000].contains(&t) {
            println!("{t:<8} {a:<14.8} {r:<14.8} {:<14.8}", a / r);
        }
    }

    let report = schedule.validate_theorem_conditions(100_000);
    println!("\ncondition report over 100000 steps:");
    println!("  in (0, 1]:            {}", report.in_range);
    println!("  strictly decreasing:  {}", report.strictly_decreasing);
    println!("  ratio nonincreasing:  {}", report.ratio_nonincreasing);
    println!("  ratio vanishes:       {}", report.ratio_vanishes);
    println!(
        "  ratio {} -> {} (limit eps_rho/eps_alpha = {})",
        report.initial_ratio,
        report.final_ratio,
        schedule.eps_rho / schedule.eps_alpha
    );
}

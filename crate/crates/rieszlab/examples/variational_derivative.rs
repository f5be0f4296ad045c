//! The defect of a ball, its behavior along weight perturbations, and
//! the analytic derivative at t = 0 checked against central differences.

use rieszlab::defect::{
    defect_functional, perturbation_curve, variational_derivative, DEFAULT_FD_STEPS,
};
use rieszlab::error::Result;
use rieszlab::generators::random_cloud;
use rieszlab::kernel::KernelSpec;
use rieszlab::measure::{Ball, Region};

fn main() -> Result<()> {
    let mu = random_cloud(59, 60, 2, 1.0)?;
    let kspec = KernelSpec::new(0.5, 1)?;
    let eps = 1e-3;
    let ball = Ball::new(vec![0.5, 0.5], 0.35)?;
    let delta = Region::Ball(Ball::new(vec![0.6, 0.4], 0.4)?);

    let ones = vec![1.0; mu.len()];
    let f0 = defect_functional(&mu, &ball, &kspec, eps, &ones)?;
    println!("defect of the ball: F = {f0:.8}");

    println!("\nF along (1 + t 1_Delta) mu:");
    let ts = [-0.5, -0.25, 0.0, 0.25, 0.5, 1.0];
    for (t, v) in perturbation_curve(&mu, &ball, &delta, &kspec, eps, &ts)? {
        println!("  t = {t:>5}: {v:.8}");
    }

    let rep = variational_derivative(&mu, &ball, &delta, &kspec, eps, &DEFAULT_FD_STEPS)?;
    println!("\nanalytic g'(0) = {:.12}", rep.analytic);
    println!("step        central difference   error");
    for (h, fd) in &rep.finite_difference {
        println!(
            "{h:<10.2e}  {fd:<19.12}  {:.3e}",
            (fd - rep.analytic).abs()
        );
    }
    match rep.observed_order {
        Some(o) => println!("observed convergence order: {o:.3}"),
        None => println!("differences at rounding level; order not measurable"),
    }
    Ok(())
}

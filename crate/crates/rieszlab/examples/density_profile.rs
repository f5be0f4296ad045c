//! Plain and Poisson densities of balls around an atom, plus the search
//! for a ball whose boundary carries almost no mass.

use rieszlab::error::Result;
use rieszlab::generators::{cantor_measure, CantorSpec};
use rieszlab::kernel::KernelSpec;
use rieszlab::measure::{density, find_thin_ball, poisson_density, Ball};

fn main() -> Result<()> {
    let cspec = CantorSpec {
        s: 0.5,
        generations: 10,
        branching: 2,
        total_mass: 1.0,
    };
    let mu = cantor_measure(&cspec)?;
    let kspec = KernelSpec::new(0.5, 1)?;
    let x = mu.point(0).to_vec();

    println!("radius        theta = mass/r^s   P (Poisson-smoothed)");
    let mut r = mu.resolution();
    while r <= 2.0 {
        let ball = Ball::new(x.clone(), r)?;
        let theta = density(&mu, &ball, &kspec);
        let poisson = poisson_density(&mu, &ball, &kspec, 1e-12)?;
        println!("{r:<12.4e}  {theta:<18.5}  {poisson:.5}");
        r *= 4.0;
    }

    // A ball with an atom-laden sphere is bad for annulus estimates; the
    // search nudges the radius until the boundary shells are light.
    let probe = find_thin_ball(&mu, &x, 0.3, 8.0, 64)?;
    println!(
        "\nthin-ball search at r = 0.3: radius {:.6}, boundary ratio {:.3}, satisfied: {}",
        probe.ball.radius, probe.ratio, probe.satisfied
    );
    Ok(())
}

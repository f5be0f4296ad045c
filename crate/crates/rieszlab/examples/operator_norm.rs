//! Power iteration for the weighted operator norm of the truncated
//! transform, anchored by a configuration whose norm is known on paper.

use rieszlab::error::Result;
use rieszlab::generators::{cantor_measure, random_cloud, CantorSpec};
use rieszlab::kernel::KernelSpec;
use rieszlab::measure::DiscreteMeasure;
use rieszlab::transform::operator_norm;

fn main() -> Result<()> {
    // Two unit atoms a distance 4 apart at s = 1/2: the transform swaps
    // the atoms up to sign and scales by 4^{-1/2}, so the norm is 1/2.
    let kspec = KernelSpec::new(0.5, 1)?;
    let two = DiscreteMeasure::new(vec![vec![0.0], vec![4.0]], vec![1.0, 1.0])?;
    let norm = operator_norm(&two, &kspec, 1.0, 200, 3)?;
    println!("two-atom norm: {norm:.10} (expected 0.5)");

    // On a self-similar measure every construction scale the shrinking
    // cutoff admits contributes a fixed amount of triple energy, so the
    // norm creeps up like the square root of the number of admitted
    // levels. This is the blow-up mechanism read off the operator.
    let cspec = CantorSpec {
        s: 0.5,
        generations: 9,
        branching: 2,
        total_mass: 1.0,
    };
    let mu = cantor_measure(&cspec)?;
    println!("\ncantor, {} atoms: eps vs norm", mu.len());
    for eps in [0.1, 1e-2, 1e-4, 1e-6] {
        let n = operator_norm(&mu, &kspec, eps, 300, 17)?;
        println!("  eps = {eps:<7.0e} norm = {n:.6}");
    }

    // A uniform cloud saturates instead: once eps drops under the
    // typical spacing, nothing new enters the sum.
    let cloud = random_cloud(5, 300, 2, 1.0)?;
    println!("\nuniform cloud, {} atoms: eps vs norm", cloud.len());
    for eps in [0.3, 0.1, 0.03, 0.01] {
        let n = operator_norm(&cloud, &kspec, eps, 300, 17)?;
        println!("  eps = {eps:<7} norm = {n:.6}");
    }
    Ok(())
}

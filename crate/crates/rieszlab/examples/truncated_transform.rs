//! Evaluate the truncated transform as a field on the atoms and at free
//! points, and watch the cutoff dependence.

use rieszlab::error::Result;
use rieszlab::generators::{cantor_measure, CantorSpec};
use rieszlab::kernel::KernelSpec;
use rieszlab::transform::{transform_field, truncated_transform_point, weighted_field_inner};

fn main() -> Result<()> {
    let cspec = CantorSpec {
        s: 0.5,
        generations: 8,
        branching: 2,
        total_mass: 1.0,
    };
    let mu = cantor_measure(&cspec)?;
    let kspec = KernelSpec::new(0.5, 1)?;
    let ones = vec![1.0; mu.len()];

    // The weighted L2 size of the field grows as the cutoff shrinks and
    // more of the singularity is admitted.
    println!("eps        ||R_eps(mu)||_L2(mu)");
    for eps in [0.3, 0.01, 1e-4, 1e-6, 1e-9] {
        let field = transform_field(&mu, &kspec, eps, &ones)?;
        let l2 = weighted_field_inner(&mu, &field, &field).sqrt();
        println!("{eps:<9.1e}  {l2:.6}");
    }

    // Off-support evaluations. The support sits in [0,1], so the value
    // at its mirror points is determined by antisymmetry of the kernel.
    let eps = 1e-6;
    for x in [-1.0, -0.5, 0.5, 1.5, 2.0] {
        let v = truncated_transform_point(&mu, &kspec, eps, &[x], None)?;
        println!("R_eps(mu)({x:>4}) = {:+.6}", v[0]);
    }
    Ok(())
}

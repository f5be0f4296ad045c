//! Time the naive quadratic field evaluation against the treecode and
//! show what the opening angle buys and costs.

use rieszlab::error::Result;
use rieszlab::generators::{cantor_measure, CantorSpec};
use rieszlab::kernel::KernelSpec;
use rieszlab::transform::transform_field;
use rieszlab::tree::tree_transform_field;
use std::time::Instant;

fn main() -> Result<()> {
    let cspec = CantorSpec {
        s: 0.5,
        generations: 13,
        branching: 2,
        total_mass: 1.0,
    };
    let mu = cantor_measure(&cspec)?;
    let kspec = KernelSpec::new(0.5, 1)?;
    let eps = 1e-9;
    println!("{} atoms", mu.len());

    let ones = vec![1.0; mu.len()];
    let t0 = Instant::now();
    let naive = transform_field(&mu, &kspec, eps, &ones)?;
    let naive_ms = t0.elapsed().as_secs_f64() * 1e3;
    println!("naive: {naive_ms:.1} ms");

    let scale = naive
        .values
        .iter()
        .flatten()
        .fold(0.0f64, |m, v| m.max(v.abs()));

    println!("theta_mac   time (ms)   speedup   max relative deviation");
    for theta in [0.6, 0.3, 0.1, 0.02] {
        let t1 = Instant::now();
        let tree = tree_transform_field(&mu, &kspec, eps, theta)?;
        let ms = t1.elapsed().as_secs_f64() * 1e3;
        let dev = naive
            .values
            .iter()
            .flatten()
            .zip(tree.values.iter().flatten())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
            / scale;
        println!(
            "{theta:<10}  {ms:<10.1}  {:<8.1}  {dev:.3e}",
            naive_ms / ms
        );
    }
    Ok(())
}

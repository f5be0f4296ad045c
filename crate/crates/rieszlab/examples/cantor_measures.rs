//! Build self-similar measures and watch their s-density stay flat
//! across scales: the defining property of an AD-regular test measure.

use rieszlab::error::Result;
use rieszlab::generators::{cantor_measure, cell_ball, CantorSpec};
use rieszlab::kernel::KernelSpec;
use rieszlab::measure::density;

fn main() -> Result<()> {
    for (s, branching) in [(0.5, 2u32), (0.75, 2), (0.5, 4)] {
        let spec = CantorSpec {
            s,
            generations: 8,
            branching,
            total_mass: 1.0,
        };
        let mu = cantor_measure(&spec)?;
        println!(
            "s = {s}, branching = {branching}: {} atoms in dimension {}, \
             contraction {:.5}, resolution {:.3e}",
            mu.len(),
            mu.dim(),
            spec.contraction(),
            mu.resolution()
        );

        // Density of the leftmost construction cell at every generation.
        // For a measure of exact dimension s these stay within a bounded
        // band; the kernel spec only supplies the exponent.
        let kspec = KernelSpec::new(s, 1)?;
        print!("  cell density by generation:");
        for g in 0..=spec.generations {
            let ball = cell_ball(&spec, g, 0)?;
            print!(" {:.3}", density(&mu, &ball, &kspec));
        }
        println!();
    }
    Ok(())
}

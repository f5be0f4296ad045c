//! Reference measure families: self-similar Cantor constructions whose
//! limit has exact s-dimensional scaling, uniform segment samplings, and
//! seeded random clouds.

use crate::error::{Error, Result};
use crate::measure::{Ball, DiscreteMeasure};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Largest atom count a generator will materialize unless overridden.
pub const DEFAULT_ATOM_CAP: u64 = 1 << 16;

/// Parameters of a self-similar Cantor measure on `[0,1]^d`.
///
/// The contraction ratio is tied to the kernel exponent by
/// `lambda = branching^(-1/s)`, which makes the limit set s-dimensional:
/// each of the `branching` children carries `1/branching` of the mass at
/// scale `lambda`, so `theta` is constant along the construction.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CantorSpec {
    /// Density exponent in (0,1).
    pub s: f64,
    /// Construction depth; `branching^generations` atoms result.
    pub generations: u32,
    /// 2 for the interval construction, 4 for planar corner squares.
    pub branching: u32,
    /// Mass shared equally by all atoms.
    pub total_mass: f64,
}

impl CantorSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.s > 0.0 && self.s < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "cantor exponent s must lie in (0,1), got {}",
                self.s
            )));
        }
        if self.branching != 2 && self.branching != 4 {
            return Err(Error::InvalidParameter(format!(
                "cantor branching must be 2 (interval) or 4 (planar), got {}",
                self.branching
            )));
        }
        if !(self.total_mass > 0.0) || !self.total_mass.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "cantor total mass must be positive, got {}",
                self.total_mass
            )));
        }
        Ok(())
    }

    /// Contraction ratio `branching^(-1/s)`.
    pub fn contraction(&self) -> f64 {
        (self.branching as f64).powf(-1.0 / self.s)
    }

    pub fn dim(&self) -> usize {
        if self.branching == 2 {
            1
        } else {
            2
        }
    }

    fn atom_count(&self) -> Result<u64> {
        (self.branching as u64)
            .checked_pow(self.generations)
            .ok_or(Error::AtomCapExceeded {
                requested: u64::MAX,
                cap: DEFAULT_ATOM_CAP,
            })
    }
}

/// Walks the digit expansion of `index` in base `branching`, most
/// significant digit first, returning the cell origin and size after
/// `generation` steps from the unit cell.
fn cell_origin(spec: &CantorSpec, generation: u32, index: u64) -> (Vec<f64>, f64) {
    let lambda = spec.contraction();
    let dim = spec.dim();
    let mut origin = vec![0.0; dim];
    let mut size = 1.0f64;
    for level in (0..generation).rev() {
        let digit = (index / (spec.branching as u64).pow(level)) % spec.branching as u64;
        let offset = (1.0 - lambda) * size;
        match spec.branching {
            2 => {
                if digit == 1 {
                    origin[0] += offset;
                }
            }
            _ => {
                if digit & 1 == 1 {
                    origin[0] += offset;
                }
                if digit & 2 == 2 {
                    origin[1] += offset;
                }
            }
        }
        size *= lambda;
    }
    (origin, size)
}

/// Circumscribed ball of one construction cell: centered at the cell
/// center with half the cell diagonal as radius. It contains exactly the
/// atoms descended from that cell, because sibling cells are separated by
/// more than the overhang of the circumscribed ball.
pub fn cell_ball(spec: &CantorSpec, generation: u32, index: u64) -> Result<Ball> {
    spec.validate()?;
    let count = (spec.branching as u64)
        .checked_pow(generation)
        .ok_or_else(|| Error::InvalidParameter("cell generation too deep".into()))?;
    if index >= count {
        return Err(Error::InvalidParameter(format!(
            "cell index {index} out of range for generation {generation} ({count} cells)"
        )));
    }
    let (origin, size) = cell_origin(spec, generation, index);
    let center: Vec<f64> = origin.iter().map(|o| o + 0.5 * size).collect();
    let radius = 0.5 * size * (spec.dim() as f64).sqrt();
    Ball::new(center, radius)
}

/// Materializes the Cantor measure at the requested depth: one atom per
/// generation-`g` cell, placed at the cell center, all weights equal.
pub fn cantor_measure(spec: &CantorSpec) -> Result<DiscreteMeasure> {
    cantor_measure_capped(spec, DEFAULT_ATOM_CAP)
}

/// [`cantor_measure`] with an explicit atom cap.
pub fn cantor_measure_capped(spec: &CantorSpec, cap: u64) -> Result<DiscreteMeasure> {
    spec.validate()?;
    let count = spec.atom_count()?;
    if count > cap {
        return Err(Error::AtomCapExceeded {
            requested: count,
            cap,
        });
    }
    let weight = spec.total_mass / count as f64;
    let mut points = Vec::with_capacity(count as usize);
    for index in 0..count {
        let (origin, size) = cell_origin(spec, spec.generations, index);
        points.push(origin.iter().map(|o| o + 0.5 * size).collect());
    }
    let weights = vec![weight; count as usize];
    DiscreteMeasure::new(points, weights)
}

/// `n` equally weighted atoms at the midpoints `(k + 1/2)/n * length` of a
/// uniform partition of `[0, length]`.
pub fn segment_uniform(n: usize, length: f64) -> Result<DiscreteMeasure> {
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one atom".into()));
    }
    if !(length > 0.0) || !length.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "segment length must be positive, got {length}"
        )));
    }
    let points: Vec<Vec<f64>> = (0..n)
        .map(|k| vec![(k as f64 + 0.5) / n as f64 * length])
        .collect();
    let weights = vec![1.0 / n as f64; n];
    DiscreteMeasure::with_singleton_resolution(points, weights, length)
}

/// `n` equally weighted atoms drawn uniformly from `[0, box_size]^dim`
/// with a seeded generator. Exact coordinate collisions are redrawn, so
/// the result always satisfies the distinctness invariant.
pub fn random_cloud(seed: u64, n: usize, dim: usize, box_size: f64) -> Result<DiscreteMeasure> {
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one atom".into()));
    }
    if dim == 0 {
        return Err(Error::InvalidParameter("dimension must be at least 1".into()));
    }
    if !(box_size > 0.0) || !box_size.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "box size must be positive, got {box_size}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points: Vec<Vec<f64>> = Vec::with_capacity(n);
    while points.len() < n {
        let p: Vec<f64> = (0..dim).map(|_| rng.random_range(0.0..box_size)).collect();
        if points.iter().any(|q| q == &p) {
            continue;
        }
        points.push(p);
    }
    let weights = vec![1.0 / n as f64; n];
    DiscreteMeasure::with_singleton_resolution(points, weights, box_size)
}

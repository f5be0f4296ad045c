//! The multiscale energy growth mechanism: near-maximal density balls,
//! density comparability across scales, dyadic shell energies, and the
//! ratio that falsifies vanishing-transform behavior.
//!
//! The storyline: pick a ball of near-maximal density, walk up a chain of
//! doubled (and boundary-thinned) balls, and watch the symmetrized triple
//! energy accumulate one comparable slice per scale. For measures whose
//! density is genuinely of the kernel's order the cumulative energy grows
//! linearly in the number of scales, which is incompatible with the
//! bounds a vanishing truncated transform would force; the ratio between
//! the local triple energy and the squared dyadically averaged density is
//! the quantity that blows up.

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::measure::{
    atoms_in_ball, ball_mass, density, find_thin_ball, poisson_density, thin_boundary_ratio,
    Ball, DiscreteMeasure, Region,
};
use crate::symmetrization::pairwise_energy;
use crate::vecmath;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Thin-boundary level used for the per-scale radius adjustment.
pub const DEFAULT_THIN_LEVEL: f64 = 8.0;
/// Candidate count for each thin-radius search.
pub const DEFAULT_THIN_SAMPLES: usize = 64;

/// Scans balls centered at atoms over the radius grid and returns the
/// first maximizer of the density `mass / radius^s` together with its
/// density. Grid radii must be at least the measure resolution so the
/// densities compared are resolution-honest.
pub fn max_density_ball(
    mu: &DiscreteMeasure,
    spec: &KernelSpec,
    radii: &[f64],
) -> Result<(Ball, f64)> {
    if radii.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let resolution = mu.resolution();
    for &r in radii {
        if !r.is_finite() || r < resolution {
            return Err(Error::InvalidParameter(format!(
                "grid radius {r} must be finite and at least the resolution {resolution}"
            )));
        }
    }
    let mut best: Option<(usize, f64, f64)> = None;
    for i in 0..mu.len() {
        let center = mu.point(i);
        for &r in radii {
            let mut mass = 0.0;
            for j in 0..mu.len() {
                if vecmath::dist(center, mu.point(j)) <= r {
                    mass += mu.weight(j);
                }
            }
            let theta = mass / r.powf(spec.s);
            if best.map_or(true, |(_, _, t)| theta > t) {
                best = Some((i, r, theta));
            }
        }
    }
    let (i, r, theta) = best.unwrap();
    Ok((Ball::new(mu.point(i).to_vec(), r)?, theta))
}

/// One row of a density comparability scan.
#[derive(Debug, Clone, Serialize)]
pub struct ComparabilityRow {
    pub ball: Ball,
    /// `density(ball) / density(reference)`; absent when the containment
    /// precondition fails for this ball and it was skipped.
    pub ratio: Option<f64>,
}

/// Compares the density of each trial ball `B` against a reference ball
/// `B0`, for trial balls whose `delta`-dilation contains `B0` (checked as
/// `|c0 - c| + r0 <= delta * r`). Violating balls are kept in the output
/// with no ratio. The table is a diagnostic: for compactly supported
/// measures the ratio decays like `r^-s` once the trial radius leaves the
/// support, and that decay is the expected behavior, not a failure.
pub fn density_comparability_scan(
    mu: &DiscreteMeasure,
    spec: &KernelSpec,
    b0: &Ball,
    delta: f64,
    trial_balls: &[Ball],
) -> Result<Vec<ComparabilityRow>> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "dilation factor must be positive and finite, got {delta}"
        )));
    }
    if b0.center.len() != mu.dim() {
        return Err(Error::InvalidParameter(
            "reference ball dimension does not match the measure".into(),
        ));
    }
    if ball_mass(mu, b0) == 0.0 {
        return Err(Error::EmptyBall(
            "the reference density cannot anchor ratios".into(),
        ));
    }
    let theta0 = density(mu, b0, spec);
    let mut rows = Vec::with_capacity(trial_balls.len());
    for ball in trial_balls {
        if ball.center.len() != mu.dim() {
            return Err(Error::InvalidParameter(
                "trial ball dimension does not match the measure".into(),
            ));
        }
        let contained =
            vecmath::dist(&b0.center, &ball.center) + b0.radius <= delta * ball.radius;
        let ratio = contained.then(|| density(mu, ball, spec) / theta0);
        rows.push(ComparabilityRow {
            ball: ball.clone(),
            ratio,
        });
    }
    Ok(rows)
}

/// Energy accumulation along a chain of doubled balls.
#[derive(Debug, Clone, Serialize)]
pub struct EnergyGrowthReport {
    /// Chain radii, level 0 being the base ball as given.
    pub scales: Vec<f64>,
    /// Density of each chain ball.
    pub densities: Vec<f64>,
    /// `e_j`: triple energy between the level-`j` ball and its outermost
    /// shell (level 0: the base ball against itself).
    pub shell_energies: Vec<f64>,
    /// Triple energy of the level-`j` ball against itself, accumulated
    /// shell by shell.
    pub cumulative: Vec<f64>,
    /// Least-squares slope of `cumulative` against the level index.
    pub fit_slope: f64,
    /// Coefficient of determination of that linear fit.
    pub fit_r2: f64,
    /// Whether the thin-radius search succeeded at each level (level 0 is
    /// never adjusted).
    pub thin_adjusted: Vec<bool>,
    /// Set when fewer than two shells beyond the base ball hold atoms;
    /// the slope is then not meaningful.
    pub insufficient_shells: bool,
}

fn linear_fit(ys: &[f64]) -> (f64, f64) {
    let n = ys.len() as f64;
    let mean_x = (ys.len() as f64 - 1.0) / 2.0;
    let mean_y = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (j, &y) in ys.iter().enumerate() {
        let dx = j as f64 - mean_x;
        let dy = y - mean_y;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return (0.0, 1.0);
    }
    let slope = sxy / sxx;
    if syy == 0.0 {
        return (slope, 1.0);
    }
    let ss_res = syy - sxy * sxy / sxx;
    (slope, 1.0 - ss_res / syy)
}

/// Walks the chain `B_0 subset B_1 subset ...` where each radius is the
/// double of the previous one, adjusted upward (never past another
/// doubling) to a boundary-thin radius when the search succeeds. Shells
/// are half-open: level `j > 0` holds the atoms inside `B_j` but outside
/// `B_{j-1}`, so the shells partition the final ball exactly and the
/// cumulative column reproduces the direct ball self-energy to rounding.
pub fn multiscale_energy_profile(
    mu: &DiscreteMeasure,
    spec: &KernelSpec,
    x: &[f64],
    b0: &Ball,
    n_scales: usize,
) -> Result<EnergyGrowthReport> {
    if x.len() != mu.dim() || b0.center.len() != mu.dim() {
        return Err(Error::InvalidParameter(
            "evaluation point and ball must match the measure dimension".into(),
        ));
    }
    if !b0.contains(x) {
        return Err(Error::InvalidParameter(
            "evaluation point must lie in the base ball".into(),
        ));
    }
    if n_scales < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 scales, got {n_scales}"
        )));
    }
    let mut scales = Vec::with_capacity(n_scales + 1);
    let mut thin_adjusted = Vec::with_capacity(n_scales + 1);
    scales.push(b0.radius);
    thin_adjusted.push(false);
    for _ in 1..=n_scales {
        let nominal = 2.0 * scales.last().unwrap();
        let search = find_thin_ball(
            mu,
            &b0.center,
            nominal,
            DEFAULT_THIN_LEVEL,
            DEFAULT_THIN_SAMPLES,
        )?;
        if search.satisfied {
            scales.push(search.ball.radius);
            thin_adjusted.push(true);
        } else {
            scales.push(nominal);
            thin_adjusted.push(false);
        }
    }

    // Partition atoms into shells by the smallest chain ball containing
    // them; atoms beyond the last radius stay out of the profile.
    let mut shells: Vec<Vec<usize>> = vec![Vec::new(); n_scales + 1];
    for i in 0..mu.len() {
        let d = vecmath::dist(&b0.center, mu.point(i));
        if let Some(level) = scales.iter().position(|&r| d <= r) {
            shells[level].push(i);
        }
    }
    let nonempty_outer = shells[1..].iter().filter(|s| !s.is_empty()).count();

    let regions: Vec<Region> = shells
        .iter()
        .map(|s| Region::Indices(s.clone()))
        .collect();
    let mut pair_energy = vec![vec![0.0; n_scales + 1]; n_scales + 1];
    for a in 0..=n_scales {
        for b in 0..=n_scales {
            if shells[a].is_empty() || shells[b].is_empty() {
                continue;
            }
            pair_energy[a][b] = pairwise_energy(mu, spec, x, &regions[a], &regions[b])?;
        }
    }

    let mut shell_energies = Vec::with_capacity(n_scales + 1);
    let mut cumulative = Vec::with_capacity(n_scales + 1);
    let mut densities = Vec::with_capacity(n_scales + 1);
    for j in 0..=n_scales {
        let mut e = 0.0;
        for a in 0..=j {
            e += pair_energy[a][j];
        }
        shell_energies.push(e);
        let mut c = 0.0;
        for a in 0..=j {
            for row in pair_energy.iter().take(j + 1) {
                c += row[a];
            }
        }
        cumulative.push(c);
        let ball_j = Ball::new(b0.center.clone(), scales[j])?;
        densities.push(density(mu, &ball_j, spec));
    }
    let (fit_slope, fit_r2) = linear_fit(&cumulative);
    Ok(EnergyGrowthReport {
        scales,
        densities,
        shell_energies,
        cumulative,
        fit_slope,
        fit_r2,
        thin_adjusted,
        insufficient_shells: nonempty_outer < 2,
    })
}

/// The falsifier ratio and its ingredients.
#[derive(Debug, Clone, Serialize)]
pub struct MainLemmaReport {
    /// Max over the sampled atoms of the local triple energy divided by
    /// the squared dyadically averaged density.
    pub ratio: f64,
    /// Dyadically averaged density of the ball.
    #[serde(rename = "P")]
    pub poisson: f64,
    /// Thin-boundary ratio of the ball (may be infinite, which only
    /// weakens the interpretation, not the arithmetic).
    pub thin_boundary: f64,
    /// True when the thin-boundary ratio is not finite.
    pub thin_warning: bool,
    /// `(atom index, energy / poisson^2)` per sampled atom, ascending by
    /// index.
    pub per_sample: Vec<(usize, f64)>,
}

/// Evaluates `max_x p(x, B, B) / P(B)^2` over up to `x_samples` atoms of
/// `B`, drawn proportionally to weight without replacement (all atoms
/// when the ball holds no more than `x_samples`). Bounded ratios are what
/// vanishing-transform rigidity demands; families whose ratio grows
/// without bound are certified incompatible with it.
pub fn main_lemma_ratio(
    mu: &DiscreteMeasure,
    spec: &KernelSpec,
    ball: &Ball,
    x_samples: usize,
    seed: u64,
) -> Result<MainLemmaReport> {
    if x_samples == 0 {
        return Err(Error::InvalidParameter(
            "need at least one sample point".into(),
        ));
    }
    if ball.center.len() != mu.dim() {
        return Err(Error::InvalidParameter(
            "ball dimension does not match the measure".into(),
        ));
    }
    let inside = atoms_in_ball(mu, ball);
    let mass: f64 = inside.iter().map(|&i| mu.weight(i)).sum();
    if inside.is_empty() || mass == 0.0 {
        return Err(Error::EmptyBall(format!(
            "ball at {:?} radius {}",
            ball.center, ball.radius
        )));
    }
    let poisson = poisson_density(mu, ball, spec, 1e-300)?;
    let thin = thin_boundary_ratio(mu, ball)?;

    let chosen: Vec<usize> = if inside.len() <= x_samples {
        inside.clone()
    } else {
        let mut cumulative = Vec::with_capacity(inside.len());
        let mut running = 0.0;
        for &i in &inside {
            running += mu.weight(i);
            cumulative.push(running);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut taken = vec![false; inside.len()];
        let mut picks = Vec::with_capacity(x_samples);
        for _ in 0..x_samples {
            let mut found = None;
            for _ in 0..64 {
                let u: f64 = rng.random_range(0.0..mass);
                let pos = cumulative
                    .partition_point(|&c| c <= u)
                    .min(inside.len() - 1);
                if !taken[pos] {
                    found = Some(pos);
                    break;
                }
            }
            let pos = found.unwrap_or_else(|| {
                // Weight-ordered fallback when rejection keeps colliding.
                (0..inside.len())
                    .filter(|&p| !taken[p])
                    .max_by(|&a, &b| {
                        mu.weight(inside[a])
                            .partial_cmp(&mu.weight(inside[b]))
                            .unwrap()
                            .then(b.cmp(&a))
                    })
                    .unwrap()
            });
            taken[pos] = true;
            picks.push(inside[pos]);
        }
        picks.sort_unstable();
        picks
    };

    let region = Region::Indices(inside);
    let mut per_sample = Vec::with_capacity(chosen.len());
    let mut ratio = 0.0f64;
    for &a in &chosen {
        let p = pairwise_energy(mu, spec, mu.point(a), &region, &region)?;
        let r = p / (poisson * poisson);
        ratio = ratio.max(r);
        per_sample.push((a, r));
    }
    Ok(MainLemmaReport {
        ratio,
        poisson,
        thin_boundary: thin,
        thin_warning: !thin.is_finite(),
        per_sample,
    })
}

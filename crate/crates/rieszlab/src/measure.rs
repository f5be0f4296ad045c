//! Finitely supported measures and ball-based density machinery.
//!
//! A [`DiscreteMeasure`] is a list of pairwise distinct atoms in `R^d`
//! with nonnegative weights and positive total mass. Its `resolution`,
//! the minimum pairwise atom separation, acts as the smallest honest
//! geometric scale: density scans refuse radii below it.
//!
//! Balls are closed everywhere: an atom at distance exactly `r` from the
//! center belongs to `B(c, r)`. All dilation, shell and annulus logic is
//! built from that single membership rule, so decompositions like
//! `B(c, 2r) = B(c, r) + (B(c, 2r) \ B(c, r))` partition atoms exactly.

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::vecmath;
use serde::{Deserialize, Serialize};

/// Fallback resolution for a single-atom measure, which has no pairwise
/// distance to measure.
pub const SINGLETON_RESOLUTION: f64 = 1.0;

/// A finitely supported nonnegative measure on `R^d`.
#[derive(Debug, Clone)]
pub struct DiscreteMeasure {
    dim: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
    total_mass: f64,
    resolution: f64,
}

impl DiscreteMeasure {
    /// Builds a measure from atom coordinates and weights, validating every
    /// structural invariant and computing the resolution. Single-atom
    /// measures receive [`SINGLETON_RESOLUTION`].
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        Self::with_singleton_resolution(points, weights, SINGLETON_RESOLUTION)
    }

    /// Like [`new`](Self::new) but with an explicit resolution sentinel for
    /// the single-atom case.
    pub fn with_singleton_resolution(
        points: Vec<Vec<f64>>,
        weights: Vec<f64>,
        sentinel: f64,
    ) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidMeasure("no atoms".into()));
        }
        if points.len() != weights.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} atoms but {} weights",
                points.len(),
                weights.len()
            )));
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(Error::InvalidMeasure("atoms must have dimension >= 1".into()));
        }
        let mut coords = Vec::with_capacity(points.len() * dim);
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::InvalidMeasure(format!(
                    "atom {i} has dimension {} but atom 0 has dimension {dim}",
                    p.len()
                )));
            }
            for &c in p {
                if !c.is_finite() {
                    return Err(Error::InvalidMeasure(format!(
                        "atom {i} has non-finite coordinate {c}"
                    )));
                }
                coords.push(c);
            }
        }
        let mut total_mass = 0.0;
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidMeasure(format!(
                    "weight {i} must be finite and nonnegative, got {w}"
                )));
            }
            total_mass += w;
        }
        if total_mass <= 0.0 {
            return Err(Error::InvalidMeasure("total mass must be positive".into()));
        }
        let resolution = if points.len() == 1 {
            if !(sentinel > 0.0) || !sentinel.is_finite() {
                return Err(Error::InvalidMeasure(format!(
                    "single-atom resolution sentinel must be positive, got {sentinel}"
                )));
            }
            sentinel
        } else {
            let r = min_pairwise_distance(&coords, dim, points.len());
            if r == 0.0 {
                return Err(Error::InvalidMeasure(
                    "atoms must be pairwise distinct".into(),
                ));
            }
            r
        };
        Ok(DiscreteMeasure {
            dim,
            coords,
            weights,
            total_mass,
            resolution,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    /// Minimum pairwise atom separation (or the singleton sentinel).
    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.point(i).to_vec()).collect()
    }
}

/// Sweep over atoms sorted by first coordinate; a pair can only improve the
/// running minimum when its first-coordinate gap is below it, so the inner
/// scan stops early. Worst case quadratic, near linear for spread points.
fn min_pairwise_distance(coords: &[f64], dim: usize, n: usize) -> f64 {
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let pa = &coords[a * dim..(a + 1) * dim];
        let pb = &coords[b * dim..(b + 1) * dim];
        pa.partial_cmp(pb).unwrap()
    });
    let mut best = f64::INFINITY;
    for i in 0..n {
        let pi = &coords[order[i] * dim..(order[i] + 1) * dim];
        for &oj in order.iter().skip(i + 1) {
            let pj = &coords[oj * dim..(oj + 1) * dim];
            if pj[0] - pi[0] >= best {
                break;
            }
            let d = vecmath::dist(pi, pj);
            if d < best {
                best = d;
                if best == 0.0 {
                    return 0.0;
                }
            }
        }
    }
    best
}

/// A closed Euclidean ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() || center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter(
                "ball center must be a nonempty finite vector".into(),
            ));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "ball radius must be positive and finite, got {radius}"
            )));
        }
        Ok(Ball { center, radius })
    }

    /// The concentric dilate `k * B`.
    pub fn scaled(&self, k: f64) -> Result<Ball> {
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "ball scale factor must be positive, got {k}"
            )));
        }
        Ball::new(self.center.clone(), self.radius * k)
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        vecmath::dist(&self.center, point) <= self.radius
    }
}

/// A set of atoms, given directly by indices, cut out by a ball, or the
/// whole support.
#[derive(Debug, Clone)]
pub enum Region {
    All,
    Ball(Ball),
    Indices(Vec<usize>),
}

impl Region {
    /// Sorted, deduplicated atom indices selected by this region.
    pub fn resolve(&self, mu: &DiscreteMeasure) -> Result<Vec<usize>> {
        match self {
            Region::All => Ok((0..mu.len()).collect()),
            Region::Ball(b) => {
                if b.center.len() != mu.dim() {
                    return Err(Error::InvalidParameter(format!(
                        "ball dimension {} does not match measure dimension {}",
                        b.center.len(),
                        mu.dim()
                    )));
                }
                Ok(atoms_in_ball(mu, b))
            }
            Region::Indices(idx) => {
                let mut v = idx.clone();
                v.sort_unstable();
                v.dedup();
                if let Some(&bad) = v.iter().find(|&&i| i >= mu.len()) {
                    return Err(Error::InvalidParameter(format!(
                        "atom index {bad} out of range for {} atoms",
                        mu.len()
                    )));
                }
                Ok(v)
            }
        }
    }
}

/// Indices of atoms inside the closed ball, in ascending order.
pub fn atoms_in_ball(mu: &DiscreteMeasure, ball: &Ball) -> Vec<usize> {
    (0..mu.len())
        .filter(|&i| ball.contains(mu.point(i)))
        .collect()
}

/// Total weight carried by the closed ball.
pub fn ball_mass(mu: &DiscreteMeasure, ball: &Ball) -> f64 {
    let mut m = 0.0;
    for i in 0..mu.len() {
        if ball.contains(mu.point(i)) {
            m += mu.weight(i);
        }
    }
    m
}

/// The s-density `theta(B) = mu(B) / r(B)^s`.
pub fn density(mu: &DiscreteMeasure, ball: &Ball, spec: &KernelSpec) -> f64 {
    ball_mass(mu, ball) / ball.radius.powf(spec.s)
}

/// The dyadically averaged density
///
/// ```text
///     P(B) = sum_{k >= 0} theta(2^k B) * 2^-k .
/// ```
///
/// Terms are accumulated until either `2^k B` swallows the whole support,
/// at which point the remaining tail is a geometric series summed in
/// closed form, or the remaining tail bound drops below `tol`.
pub fn poisson_density(
    mu: &DiscreteMeasure,
    ball: &Ball,
    spec: &KernelSpec,
    tol: f64,
) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "poisson density tolerance must be positive, got {tol}"
        )));
    }
    if ball.center.len() != mu.dim() {
        return Err(Error::InvalidParameter(
            "ball dimension does not match measure dimension".into(),
        ));
    }
    let support_radius = (0..mu.len())
        .map(|i| vecmath::dist(&ball.center, mu.point(i)))
        .fold(0.0f64, f64::max);
    // Once 2^k B contains the support, term k equals
    // ||mu|| / r^s * 2^(-k(s+1)); the ratio between consecutive terms is q.
    let q = 2f64.powf(-(spec.s + 1.0));
    let full_scale = mu.total_mass() / ball.radius.powf(spec.s);
    let mut total = 0.0;
    let mut k = 0u32;
    loop {
        let rk = ball.radius * 2f64.powi(k as i32);
        if rk >= support_radius {
            total += full_scale * q.powi(k as i32) / (1.0 - q);
            break;
        }
        let dilated = Ball {
            center: ball.center.clone(),
            radius: rk,
        };
        total += density(mu, &dilated, spec) * 2f64.powi(-(k as i32));
        let tail_bound = full_scale * q.powi(k as i32 + 1) / (1.0 - q);
        if tail_bound < tol {
            break;
        }
        k += 1;
    }
    Ok(total)
}

/// Outcome of a density scan over atom-centered balls.
#[derive(Debug, Clone, Serialize)]
pub struct DensityDiagnostics {
    /// Largest observed `theta`; every scanned ball obeys
    /// `theta <= growth_constant`.
    pub growth_constant: f64,
    /// First ball attaining the maximum, in scan order (atoms ascending,
    /// then the radius grid in the order given).
    pub worst_ball: Ball,
    /// Per atom, the `(radius, theta)` pairs over the grid.
    pub upper_density_profile: Vec<Vec<(f64, f64)>>,
}

/// Scans `theta` over every atom center and every grid radius.
///
/// Radii below the measure's resolution are rejected: below the minimum
/// atom separation the density degenerates to single-atom spikes.
pub fn density_diagnostics(
    mu: &DiscreteMeasure,
    spec: &KernelSpec,
    radii: &[f64],
) -> Result<DensityDiagnostics> {
    if radii.is_empty() {
        return Err(Error::EmptyGrid);
    }
    for &r in radii {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "density scan radius must be positive, got {r}"
            )));
        }
        if r < mu.resolution() {
            return Err(Error::InvalidParameter(format!(
                "density scan radius {r} is below the measure resolution {}",
                mu.resolution()
            )));
        }
    }
    let mut best = f64::NEG_INFINITY;
    let mut worst_ball = None;
    let mut profiles = Vec::with_capacity(mu.len());
    for i in 0..mu.len() {
        let mut row = Vec::with_capacity(radii.len());
        for &r in radii {
            let ball = Ball {
                center: mu.point(i).to_vec(),
                radius: r,
            };
            let theta = density(mu, &ball, spec);
            if theta > best {
                best = theta;
                worst_ball = Some(ball.clone());
            }
            row.push((r, theta));
        }
        profiles.push(row);
    }
    Ok(DensityDiagnostics {
        growth_constant: best,
        worst_ball: worst_ball.expect("nonempty grid and support"),
        upper_density_profile: profiles,
    })
}

/// The boundary-concentration functional
///
/// ```text
///     sup_{lambda > 0}  mu({ y in 2B : dist(y, boundary of B) <= lambda r })
///                       / (lambda * mu(2B)) .
/// ```
///
/// For an atomic measure the supremum is attained at one of the normalized
/// atom offsets `delta_i = |dist(y_i, c) - r| / r`, so the exact value is
/// the maximum of cumulative-mass-up-to-`delta` over `delta * mu(2B)`.
/// An atom carrying mass exactly on the sphere makes the ratio infinite.
pub fn thin_boundary_ratio(mu: &DiscreteMeasure, ball: &Ball) -> Result<f64> {
    let double = ball.scaled(2.0)?;
    let mass2 = ball_mass(mu, &double);
    if mass2 <= 0.0 {
        return Err(Error::EmptyBall(format!(
            "2B around {:?} with radius {}, thin-boundary ratio undefined",
            ball.center,
            2.0 * ball.radius
        )));
    }
    let mut offsets: Vec<(f64, f64)> = (0..mu.len())
        .filter_map(|i| {
            let d = vecmath::dist(&ball.center, mu.point(i));
            if d <= double.radius {
                Some(((d - ball.radius).abs() / ball.radius, mu.weight(i)))
            } else {
                None
            }
        })
        .collect();
    offsets.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut cumulative = 0.0;
    let mut best = 0.0f64;
    let mut i = 0;
    while i < offsets.len() {
        let delta = offsets[i].0;
        while i < offsets.len() && offsets[i].0 == delta {
            cumulative += offsets[i].1;
            i += 1;
        }
        if cumulative == 0.0 {
            continue;
        }
        if delta == 0.0 {
            return Ok(f64::INFINITY);
        }
        let ratio = cumulative / (delta * mass2);
        if ratio > best {
            best = ratio;
        }
    }
    Ok(best)
}

/// Result of a search for a boundary-thin radius in `[r, 2r]`.
#[derive(Debug, Clone, Serialize)]
pub struct ThinBallSearch {
    pub ball: Ball,
    /// Thin-boundary ratio of the returned ball (0 when the doubled ball
    /// carries no mass, making the thinness condition vacuous). Can be
    /// infinite when every candidate fails on an atom-laden sphere.
    pub ratio: f64,
    /// Whether `ratio <= t` was achieved.
    pub satisfied: bool,
}

/// Searches for a radius in `[r, 2r]` whose sphere is boundary-thin at
/// level `t`. Candidates are the midpoints of gaps between consecutive
/// atom distances falling in `[r, 2r]` (with the interval endpoints as
/// outer cut points); when no atom distance lands in the interval a
/// uniform grid of `samples` radii is used instead. Returns the first
/// candidate with ratio at most `t`, otherwise the best candidate found,
/// flagged as unsatisfied. Failure is data, not an error.
pub fn find_thin_ball(
    mu: &DiscreteMeasure,
    center: &[f64],
    r: f64,
    t: f64,
    samples: usize,
) -> Result<ThinBallSearch> {
    if center.len() != mu.dim() {
        return Err(Error::InvalidParameter(
            "center dimension does not match measure dimension".into(),
        ));
    }
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "search radius must be positive, got {r}"
        )));
    }
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "thinness level must be positive, got {t}"
        )));
    }
    if samples == 0 {
        return Err(Error::InvalidParameter(
            "need at least one candidate radius".into(),
        ));
    }
    let mut cuts: Vec<f64> = (0..mu.len())
        .filter_map(|i| {
            let d = vecmath::dist(center, mu.point(i));
            if d >= r && d <= 2.0 * r {
                Some(d)
            } else {
                None
            }
        })
        .collect();
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();
    let candidates: Vec<f64> = if cuts.is_empty() {
        (0..samples)
            .map(|i| r * (1.0 + (i as f64 + 0.5) / samples as f64))
            .collect()
    } else {
        let mut edges = Vec::with_capacity(cuts.len() + 2);
        edges.push(r);
        edges.extend_from_slice(&cuts);
        edges.push(2.0 * r);
        let mut mids: Vec<f64> = edges
            .windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| 0.5 * (w[0] + w[1]))
            .collect();
        if mids.len() > samples {
            let len = mids.len();
            mids = (0..samples).map(|i| mids[i * len / samples]).collect();
        }
        mids
    };
    let mut best: Option<ThinBallSearch> = None;
    for cand in candidates {
        let ball = Ball::new(center.to_vec(), cand)?;
        let ratio = match thin_boundary_ratio(mu, &ball) {
            Ok(v) => v,
            Err(Error::EmptyBall(_)) => 0.0,
            Err(e) => return Err(e),
        };
        if ratio <= t {
            return Ok(ThinBallSearch {
                ball,
                ratio,
                satisfied: true,
            });
        }
        if best.as_ref().map_or(true, |b| ratio < b.ratio) {
            best = Some(ThinBallSearch {
                ball,
                ratio,
                satisfied: false,
            });
        }
    }
    Ok(best.expect("at least one candidate"))
}

/// Smallest ball centered at the coordinate bounding-box midpoint that
/// contains every atom. A single atom gets half the resolution sentinel
/// as radius so the ball stays valid.
pub fn bounding_ball(mu: &DiscreteMeasure) -> Ball {
    let dim = mu.dim();
    let mut lo = mu.point(0).to_vec();
    let mut hi = mu.point(0).to_vec();
    for i in 1..mu.len() {
        let p = mu.point(i);
        for c in 0..dim {
            lo[c] = lo[c].min(p[c]);
            hi[c] = hi[c].max(p[c]);
        }
    }
    let center: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
    let max_dist = (0..mu.len())
        .map(|i| vecmath::dist(&center, mu.point(i)))
        .fold(0.0f64, f64::max);
    let radius = if max_dist > 0.0 {
        max_dist * (1.0 + 1e-12)
    } else {
        0.5 * mu.resolution()
    };
    Ball { center, radius }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_measure(xs: &[f64], ws: &[f64]) -> DiscreteMeasure {
        DiscreteMeasure::new(xs.iter().map(|&x| vec![x]).collect(), ws.to_vec()).unwrap()
    }

    #[test]
    fn construction_validates_invariants() {
        assert!(DiscreteMeasure::new(vec![], vec![]).is_err());
        assert!(DiscreteMeasure::new(vec![vec![0.0]], vec![1.0, 2.0]).is_err());
        assert!(DiscreteMeasure::new(vec![vec![0.0], vec![0.0]], vec![1.0, 1.0]).is_err());
        assert!(DiscreteMeasure::new(vec![vec![0.0]], vec![-1.0]).is_err());
        assert!(DiscreteMeasure::new(vec![vec![0.0], vec![1.0]], vec![0.0, 0.0]).is_err());
        assert!(DiscreteMeasure::new(vec![vec![f64::NAN]], vec![1.0]).is_err());
        assert!(DiscreteMeasure::new(vec![vec![0.0], vec![1.0, 2.0]], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn resolution_is_min_pairwise_distance() {
        let mu = line_measure(&[0.0, 0.25, 1.0], &[1.0, 1.0, 1.0]);
        assert_eq!(mu.resolution(), 0.25);
        let single = DiscreteMeasure::new(vec![vec![3.0]], vec![2.0]).unwrap();
        assert_eq!(single.resolution(), SINGLETON_RESOLUTION);
    }

    #[test]
    fn resolution_sweep_matches_brute_force_in_2d() {
        let pts: Vec<Vec<f64>> = (0..40)
            .map(|i| {
                let x = ((i * 37) % 41) as f64 / 7.0;
                let y = ((i * 17) % 29) as f64 / 5.0;
                vec![x, y]
            })
            .collect();
        let ws = vec![1.0; pts.len()];
        let mu = DiscreteMeasure::new(pts.clone(), ws).unwrap();
        let mut brute = f64::INFINITY;
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                brute = brute.min(vecmath::dist(&pts[i], &pts[j]));
            }
        }
        assert_eq!(mu.resolution(), brute);
    }

    #[test]
    fn closed_ball_membership_and_mass() {
        let mu = line_measure(&[0.0, 1.0, 2.0], &[1.0, 2.0, 4.0]);
        let b = Ball::new(vec![1.0], 1.0).unwrap();
        // Atoms at distance exactly 1 are inside the closed ball.
        assert_eq!(ball_mass(&mu, &b), 7.0);
        let small = Ball::new(vec![1.0], 0.5).unwrap();
        assert_eq!(ball_mass(&mu, &small), 2.0);
        assert_eq!(atoms_in_ball(&mu, &b), vec![0, 1, 2]);
    }

    #[test]
    fn mass_is_monotone_under_concentric_inclusion() {
        let mu = line_measure(&[0.0, 0.4, 1.1, 2.7], &[1.0, 0.5, 2.0, 0.25]);
        let mut last = 0.0;
        for r in [0.2, 0.5, 1.0, 2.0, 4.0] {
            let m = ball_mass(&mu, &Ball::new(vec![0.3], r).unwrap());
            assert!(m >= last);
            last = m;
        }
    }

    #[test]
    fn density_scales_as_r_to_minus_s() {
        // With all atoms inside both balls only the radius power changes.
        let mu = line_measure(&[0.0, 1.0], &[1.0, 1.0]);
        let spec = KernelSpec::new(0.5, 1).unwrap();
        let b1 = Ball::new(vec![0.5], 2.0).unwrap();
        let b2 = Ball::new(vec![0.5], 8.0).unwrap();
        let ratio = density(&mu, &b1, &spec) / density(&mu, &b2, &spec);
        assert!((ratio - 4f64.powf(0.5)).abs() < 1e-12);
    }

    #[test]
    fn poisson_density_closed_form_for_point_mass() {
        // Unit mass at the center of B(0,1), s = 1/2: every dilate holds
        // the whole mass, so P(B) = sum 2^(-1.5 k) = 1 / (1 - 2^(-1.5)).
        let mu = DiscreteMeasure::new(vec![vec![0.0]], vec![1.0]).unwrap();
        let spec = KernelSpec::new(0.5, 1).unwrap();
        let b = Ball::new(vec![0.0], 1.0).unwrap();
        let p = poisson_density(&mu, &b, &spec, 1e-14).unwrap();
        let expected = 1.0 / (1.0 - 2f64.powf(-1.5));
        assert!((p - expected).abs() < 1e-13);
    }

    #[test]
    fn poisson_density_dominates_theta() {
        let mu = line_measure(&[0.0, 0.3, 0.9, 4.0], &[1.0, 2.0, 0.5, 1.5]);
        let spec = KernelSpec::new(0.7, 1).unwrap();
        let b = Ball::new(vec![0.2], 0.5).unwrap();
        let p = poisson_density(&mu, &b, &spec, 1e-12).unwrap();
        let theta = density(&mu, &b, &spec);
        let theta2 = density(&mu, &b.scaled(2.0).unwrap(), &spec);
        assert!(p >= theta - 1e-14);
        assert!(p >= 0.5 * theta2 - 1e-14);
    }

    #[test]
    fn poisson_density_rejects_bad_tolerance() {
        let mu = line_measure(&[0.0, 1.0], &[1.0, 1.0]);
        let spec = KernelSpec::new(0.5, 1).unwrap();
        let b = Ball::new(vec![0.0], 1.0).unwrap();
        assert!(poisson_density(&mu, &b, &spec, 0.0).is_err());
    }

    #[test]
    fn density_diagnostics_finds_the_spike() {
        let mu = line_measure(&[0.0, 0.1, 5.0], &[1.0, 1.0, 0.1]);
        let spec = KernelSpec::new(0.5, 1).unwrap();
        let diag = density_diagnostics(&mu, &spec, &[0.1, 1.0]).unwrap();
        // Radius 0.1 around atom 0 or 1 captures weight 2 over 0.1^0.5.
        let expected = 2.0 / 0.1f64.powf(0.5);
        assert!((diag.growth_constant - expected).abs() < 1e-12);
        assert_eq!(diag.worst_ball.radius, 0.1);
        assert_eq!(diag.upper_density_profile.len(), 3);
        assert_eq!(diag.upper_density_profile[0].len(), 2);
        for row in &diag.upper_density_profile {
            for &(_, theta) in row {
                assert!(theta <= diag.growth_constant + 1e-15);
            }
        }
    }

    #[test]
    fn density_diagnostics_rejects_empty_or_subresolution_grid() {
        let mu = line_measure(&[0.0, 1.0], &[1.0, 1.0]);
        let spec = KernelSpec::new(0.5, 1).unwrap();
        assert!(matches!(
            density_diagnostics(&mu, &spec, &[]),
            Err(Error::EmptyGrid)
        ));
        assert!(density_diagnostics(&mu, &spec, &[0.5]).is_err());
    }

    #[test]
    fn thin_ratio_single_atom_at_center() {
        let mu = DiscreteMeasure::new(vec![vec![0.0]], vec![1.0]).unwrap();
        let b = Ball::new(vec![0.0], 1.0).unwrap();
        // The atom sits at normalized offset 1 from the sphere, carrying
        // the whole mass of 2B, so the supremum is 1, attained at lambda=1.
        assert!((thin_boundary_ratio(&mu, &b).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn thin_ratio_matches_lambda_grid_recount() {
        let mu = line_measure(&[0.05, 0.5, 0.93, 1.4, 1.9], &[1.0, 2.0, 1.5, 0.5, 1.0]);
        let b = Ball::new(vec![0.0], 1.0).unwrap();
        let ratio = thin_boundary_ratio(&mu, &b).unwrap();
        let mass2 = ball_mass(&mu, &b.scaled(2.0).unwrap());
        let mut grid_best = 0.0f64;
        for k in 1..20000 {
            let lambda = k as f64 * 1e-4;
            let near: f64 = (0..mu.len())
                .filter(|&i| {
                    let d = vecmath::dist(&b.center, mu.point(i));
                    d <= 2.0 && (d - 1.0).abs() <= lambda
                })
                .map(|i| mu.weight(i))
                .sum();
            grid_best = grid_best.max(near / (lambda * mass2));
        }
        assert!(ratio >= grid_best - 1e-9);
        assert!(ratio <= grid_best * 1.01);
    }

    #[test]
    fn thin_ratio_atom_on_sphere_is_infinite() {
        let mu = line_measure(&[0.0, 1.0], &[1.0, 1.0]);
        let b = Ball::new(vec![0.0], 1.0).unwrap();
        assert_eq!(thin_boundary_ratio(&mu, &b).unwrap(), f64::INFINITY);
    }

    #[test]
    fn thin_ratio_needs_mass() {
        let mu = line_measure(&[10.0, 11.0], &[1.0, 1.0]);
        let b = Ball::new(vec![0.0], 1.0).unwrap();
        assert!(matches!(
            thin_boundary_ratio(&mu, &b),
            Err(Error::EmptyBall(_))
        ));
    }

    #[test]
    fn find_thin_ball_trivial_case() {
        // Single atom at the center: no atom distance falls in [r, 2r],
        // the uniform fallback grid is used and the first candidate works.
        let mu = DiscreteMeasure::new(vec![vec![0.0, 0.0]], vec![1.0]).unwrap();
        let search = find_thin_ball(&mu, &[0.0, 0.0], 0.5, 10.0, 8).unwrap();
        assert!(search.satisfied);
        assert!(search.ball.radius > 0.5 && search.ball.radius < 1.0);
        let recheck = thin_boundary_ratio(&mu, &search.ball).unwrap();
        assert!(recheck <= 10.0);
        assert_eq!(recheck, search.ratio);
    }

    #[test]
    fn find_thin_ball_avoids_atom_laden_spheres() {
        let xs: Vec<f64> = (0..20).map(|k| 1.0 + 0.05 * k as f64).collect();
        let ws = vec![1.0; xs.len()];
        let mu = line_measure(&xs, &ws);
        let search = find_thin_ball(&mu, &[0.0], 1.0, 25.0, 40).unwrap();
        assert!(search.satisfied, "ratio {} not below 25", search.ratio);
        let recheck = thin_boundary_ratio(&mu, &search.ball).unwrap();
        assert!(recheck <= 25.0);
    }

    #[test]
    fn find_thin_ball_reports_failure_as_data() {
        // A tight shell of mass around distance 1.25 with nothing else
        // in reach: every candidate radius has mass hugging some sphere.
        let xs = vec![1.24999, 1.25, 1.25001];
        let mu = line_measure(&xs, &[1.0, 1.0, 1.0]);
        let search = find_thin_ball(&mu, &[0.0], 1.0, 1e-3, 6).unwrap();
        assert!(!search.satisfied);
        assert!(search.ratio > 1e-3);
    }

    #[test]
    fn bounding_ball_contains_all_atoms() {
        let mu = line_measure(&[-3.0, 0.0, 7.0], &[1.0, 1.0, 1.0]);
        let hull = bounding_ball(&mu);
        for i in 0..mu.len() {
            assert!(hull.contains(mu.point(i)));
        }
        assert_eq!(hull.center, vec![2.0]);
    }

    #[test]
    fn region_resolution() {
        let mu = line_measure(&[0.0, 1.0, 2.0], &[1.0, 1.0, 1.0]);
        assert_eq!(Region::All.resolve(&mu).unwrap(), vec![0, 1, 2]);
        let b = Ball::new(vec![0.0], 1.5).unwrap();
        assert_eq!(Region::Ball(b).resolve(&mu).unwrap(), vec![0, 1]);
        assert_eq!(
            Region::Indices(vec![2, 0, 2]).resolve(&mu).unwrap(),
            vec![0, 2]
        );
        assert!(Region::Indices(vec![5]).resolve(&mu).is_err());
    }
}

//! The permutation-symmetrized kernel form and the finite-sum identities
//! built on it.
//!
//! For three pairwise distinct points the form
//!
//! ```text
//!     p(x1,x2,x3) = 1/2 * sum over the 6 permutations sigma
//!                   of  K(x_{s2} - x_{s1}) . K(x_{s3} - x_{s1})
//! ```
//!
//! collapses, because the dot product is symmetric, to one term per base
//! point: `p = sum over base b of K(u - b) . K(v - b)` with `{u,v}` the
//! two non-base points. For the odd kernels used here `p` is nonnegative
//! and comparable to `max pairwise distance^(-2s)` in every dimension.
//!
//! Two exact regroupings of truncated-transform squares are verified:
//! a pointwise one classifying interaction pairs against the cutoff, and
//! a global one whose self-interaction remainder is exactly the diagonal
//! term (no asymptotic bound, the finite sums match to rounding).

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::measure::{DiscreteMeasure, Region};
use crate::transform::{
    adjoint_point, transform_field, transform_point_coefs, weighted_field_inner,
};
use crate::vecmath;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// The permutation form on three pairwise distinct points.
pub fn permutation_form(spec: &KernelSpec, x1: &[f64], x2: &[f64], x3: &[f64]) -> Result<f64> {
    if x1.len() != x2.len() || x2.len() != x3.len() {
        return Err(Error::InvalidParameter(
            "triple points must share one dimension".into(),
        ));
    }
    let d12 = spec.eval_pair_dot(x1, x2, x3);
    let d21 = spec.eval_pair_dot(x2, x1, x3);
    let d31 = spec.eval_pair_dot(x3, x1, x2);
    match (d12, d21, d31) {
        (Ok(a), Ok(b), Ok(c)) => Ok(a + b + c),
        _ => Err(Error::CoincidentPoints),
    }
}

/// Empirical two-sided comparability constants of
/// `p * (max pairwise distance)^(2s)` over seeded random triples in
/// `[-1,1]^dim`, each dilated by a scale drawn log-uniformly from
/// `scale_range` to exercise the homogeneity numerically.
pub fn comparability_scan(
    spec: &KernelSpec,
    dim: usize,
    trials: u64,
    seed: u64,
    scale_range: (f64, f64),
) -> Result<(f64, f64)> {
    if dim == 0 {
        return Err(Error::InvalidParameter("dimension must be at least 1".into()));
    }
    if trials == 0 {
        return Err(Error::InvalidParameter("need at least one trial".into()));
    }
    let (lo, hi) = scale_range;
    if !(lo > 0.0) || !(hi >= lo) || !hi.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "scale range must satisfy 0 < lo <= hi, got ({lo}, {hi})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_ratio = f64::INFINITY;
    let mut max_ratio = 0.0f64;
    for _ in 0..trials {
        let mut pts = [vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]];
        loop {
            for p in pts.iter_mut() {
                for c in p.iter_mut() {
                    *c = rng.random_range(-1.0..1.0);
                }
            }
            if pts[0] != pts[1] && pts[1] != pts[2] && pts[0] != pts[2] {
                break;
            }
        }
        let scale = if hi > lo {
            (rng.random_range(lo.ln()..hi.ln())).exp()
        } else {
            lo
        };
        for p in pts.iter_mut() {
            for c in p.iter_mut() {
                *c *= scale;
            }
        }
        let p = permutation_form(spec, &pts[0], &pts[1], &pts[2])?;
        let dmax = vecmath::dist(&pts[0], &pts[1])
            .max(vecmath::dist(&pts[1], &pts[2]))
            .max(vecmath::dist(&pts[0], &pts[2]));
        let ratio = p * dmax.powf(2.0 * spec.s);
        min_ratio = min_ratio.min(ratio);
        max_ratio = max_ratio.max(ratio);
    }
    Ok((min_ratio, max_ratio))
}

/// `p_mu(x, E, F) = sum_{y in E, z in F} w_y w_z p(x, y, z)` over triples
/// with `x`, `y`, `z` pairwise distinct; coincident combinations are
/// skipped, not errors, matching the triple-sum domain.
pub fn pairwise_energy(
    mu: &DiscreteMeasure,
    spec: &KernelSpec,
    x: &[f64],
    e: &Region,
    f: &Region,
) -> Result<f64> {
    if x.len() != mu.dim() {
        return Err(Error::InvalidParameter(
            "evaluation point dimension does not match the measure".into(),
        ));
    }
    let e_idx = e.resolve(mu)?;
    let f_idx = f.resolve(mu)?;
    let partials: Vec<Result<f64>> = e_idx
        .par_iter()
        .map(|&iy| {
            let py = mu.point(iy);
            if vecmath::dist(x, py) == 0.0 {
                return Ok(0.0);
            }
            let wy = mu.weight(iy);
            let mut acc = 0.0;
            for &iz in &f_idx {
                if iz == iy {
                    continue;
                }
                let pz = mu.point(iz);
                if vecmath::dist(x, pz) == 0.0 {
                    continue;
                }
                acc += wy * mu.weight(iz) * permutation_form(spec, x, py, pz)?;
            }
            Ok(acc)
        })
        .collect();
    let mut total = 0.0;
    for p in partials {
        total += p?;
    }
    Ok(total)
}

/// How [`total_energy`] is evaluated.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub enum EnergyMode {
    /// Full sum over ordered distinct triples; refuses more than
    /// `atom_cap` atoms.
    Exact { atom_cap: usize },
    /// Unbiased weighted-sampling estimate with `samples` draws.
    MonteCarlo { samples: u64, seed: u64 },
}

/// Default atom cap of the exact cubic sum.
pub const DEFAULT_EXACT_ATOM_CAP: usize = 500;

impl EnergyMode {
    pub fn exact() -> Self {
        EnergyMode::Exact {
            atom_cap: DEFAULT_EXACT_ATOM_CAP,
        }
    }
}

/// A total-energy value with its sampling uncertainty.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergyEstimate {
    pub value: f64,
    /// Zero in exact mode; one standard error of the mean otherwise.
    pub stderr: f64,
    /// Triples evaluated: all ordered distinct triples in exact mode,
    /// the draw count in Monte Carlo mode.
    pub samples: u64,
}

const MC_BLOCK: u64 = 1 << 16;

/// The triple energy `sum over ordered pairwise-distinct index triples of
/// w_i w_j w_k p(x_i, x_j, x_k)`, either exactly (six times the sum over
/// index-increasing triples) or by Monte Carlo with atom indices drawn
/// proportionally to weight. The Monte Carlo path is deterministic for a
/// fixed seed regardless of thread count: draws are partitioned into
/// fixed blocks, each on its own counter-indexed stream, and merged in
/// block order.
pub fn total_energy(
    mu: &DiscreteMeasure,
    spec: &KernelSpec,
    mode: EnergyMode,
) -> Result<EnergyEstimate> {
    match mode {
        EnergyMode::Exact { atom_cap } => {
            let n = mu.len();
            if n > atom_cap {
                return Err(Error::ExactCapExceeded {
                    atoms: n,
                    cap: atom_cap,
                });
            }
            let partials: Vec<Result<f64>> = (0..n)
                .into_par_iter()
                .map(|i| {
                    let mut acc = 0.0;
                    for j in i + 1..n {
                        for k in j + 1..n {
                            acc += mu.weight(i)
                                * mu.weight(j)
                                * mu.weight(k)
                                * permutation_form(spec, mu.point(i), mu.point(j), mu.point(k))?;
                        }
                    }
                    Ok(acc)
                })
                .collect();
            let mut unordered = 0.0;
            for p in partials {
                unordered += p?;
            }
            let ordered_triples = (n as u64).saturating_sub(1) * (n as u64).saturating_sub(2)
                * n as u64;
            Ok(EnergyEstimate {
                value: 6.0 * unordered,
                stderr: 0.0,
                samples: ordered_triples,
            })
        }
        EnergyMode::MonteCarlo { samples, seed } => {
            if samples < 2 {
                return Err(Error::InvalidParameter(
                    "montecarlo needs at least two samples".into(),
                ));
            }
            let n = mu.len();
            let mut cumulative = Vec::with_capacity(n);
            let mut running = 0.0;
            for i in 0..n {
                running += mu.weight(i);
                cumulative.push(running);
            }
            let mass = mu.total_mass();
            let blocks = samples.div_ceil(MC_BLOCK);
            let block_stats: Vec<Result<(f64, f64)>> = (0..blocks)
                .into_par_iter()
                .map(|b| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(b + 1);
                    let count = MC_BLOCK.min(samples - b * MC_BLOCK);
                    let mut sum = 0.0;
                    let mut sumsq = 0.0;
                    for _ in 0..count {
                        let i = draw_index(&cumulative, mass, &mut rng);
                        let j = draw_index(&cumulative, mass, &mut rng);
                        let k = draw_index(&cumulative, mass, &mut rng);
                        let h = if i == j || j == k || i == k {
                            0.0
                        } else {
                            permutation_form(spec, mu.point(i), mu.point(j), mu.point(k))?
                        };
                        sum += h;
                        sumsq += h * h;
                    }
                    Ok((sum, sumsq))
                })
                .collect();
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            for s in block_stats {
                let (a, b) = s?;
                sum += a;
                sumsq += b;
            }
            let m = samples as f64;
            let mean = sum / m;
            let variance = ((sumsq - sum * sum / m) / (m - 1.0)).max(0.0);
            let cube = mass * mass * mass;
            Ok(EnergyEstimate {
                value: cube * mean,
                stderr: cube * (variance / m).sqrt(),
                samples,
            })
        }
    }
}

fn draw_index(cumulative: &[f64], mass: f64, rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random_range(0.0..mass);
    cumulative.partition_point(|&c| c <= u).min(cumulative.len() - 1)
}

/// Terms of the pointwise cutoff regrouping at one evaluation point.
///
/// Ordered atom pairs `(y in E, z in F)` fall into three live classes by
/// their position relative to the cutoff: all three separations beyond
/// `eps` (class S, contributing `p`), `z` within `eps` of the evaluation
/// point (class T1, contributing close-range corrections based at `y`),
/// and `z` within `eps` of `y` (class T2, contributing products based at
/// the evaluation point, including the `y = z` diagonal). The three
/// left-hand terms combine one transform product and two adjoints.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    /// Transform product and the two adjoint compositions at `x`.
    pub lhs_terms: [f64; 3],
    #[serde(rename = "p_mu")]
    pub p_term: f64,
    #[serde(rename = "A_eps")]
    pub a_term: f64,
    #[serde(rename = "B_eps")]
    pub b_term: f64,
    pub residual: f64,
    pub s_pairs: u64,
    pub t1_pairs: u64,
    pub t2_pairs: u64,
    pub discarded_pairs: u64,
}

impl IdentityReport {
    /// Magnitude scale for relative residual judgments.
    pub fn scale(&self) -> f64 {
        self.lhs_terms
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(self.p_term.abs())
            .max(self.a_term.abs())
            .max(self.b_term.abs())
    }

    pub fn relative_residual(&self) -> f64 {
        let s = self.scale();
        if s == 0.0 {
            0.0
        } else {
            self.residual / s
        }
    }
}

/// Verifies the pointwise regrouping
///
/// ```text
///     R(1_E)(x) . R(1_F)(x) + R*(R(1_F) 1_E)(x) + R*(R(1_E) 1_F)(x)
///         = p_term + a_term + b_term
/// ```
///
/// with `a_term = 2 * sum_{T1} w_y w_z K(x-y).K(z-y)` and `b_term =
/// sum_{T2} w_y w_z K(y-x).K(z-x)`. The factor 2 makes the regrouping
/// exact when `E = F`, where the two asymmetric close-range classes are
/// mirror images; for `E != F` the residual records the structural
/// mismatch between the class containing `z` near `x` and its mirror
/// with `y` near `x` (see the module tests), so only the `E = F` case is
/// asserted as an invariant.
pub fn pointwise_identity_check(
    mu: &DiscreteMeasure,
    spec: &KernelSpec,
    eps: f64,
    x: &[f64],
    e: &Region,
    f: &Region,
) -> Result<IdentityReport> {
    if x.len() != mu.dim() {
        return Err(Error::InvalidParameter(
            "evaluation point dimension does not match the measure".into(),
        ));
    }
    let e_idx = e.resolve(mu)?;
    let f_idx = f.resolve(mu)?;
    let chi_e = crate::transform::indicator(mu.len(), &e_idx);
    let chi_f = crate::transform::indicator(mu.len(), &f_idx);

    let rx_e = transform_point_coefs(mu, spec, eps, x, &chi_e, None)?;
    let rx_f = transform_point_coefs(mu, spec, eps, x, &chi_f, None)?;
    let lhs1 = vecmath::dot(&rx_e, &rx_f);

    let field_f = transform_field(mu, spec, eps, &chi_f)?;
    let mut masked_fe = field_f.clone();
    for i in 0..mu.len() {
        if chi_e[i] == 0.0 {
            masked_fe.values[i].iter_mut().for_each(|v| *v = 0.0);
        }
    }
    let lhs2 = adjoint_point(mu, spec, eps, x, &masked_fe)?;

    let field_e = transform_field(mu, spec, eps, &chi_e)?;
    let mut masked_ef = field_e;
    for i in 0..mu.len() {
        if chi_f[i] == 0.0 {
            masked_ef.values[i].iter_mut().for_each(|v| *v = 0.0);
        }
    }
    let lhs3 = adjoint_point(mu, spec, eps, x, &masked_ef)?;

    let mut dist_x = vec![0.0; mu.len()];
    for i in 0..mu.len() {
        let d = vecmath::dist(x, mu.point(i));
        if vecmath::within_4_ulp(d, eps) {
            return Err(Error::TruncationTie { distance: d, eps });
        }
        dist_x[i] = d;
    }

    struct Partial {
        p: f64,
        a: f64,
        b: f64,
        s_pairs: u64,
        t1_pairs: u64,
        t2_pairs: u64,
        discarded: u64,
    }
    let partials: Vec<Result<Partial>> = e_idx
        .par_iter()
        .map(|&iy| {
            let py = mu.point(iy);
            let wy = mu.weight(iy);
            let mut part = Partial {
                p: 0.0,
                a: 0.0,
                b: 0.0,
                s_pairs: 0,
                t1_pairs: 0,
                t2_pairs: 0,
                discarded: 0,
            };
            for &iz in &f_idx {
                let pz = mu.point(iz);
                let dyz = vecmath::dist(py, pz);
                if vecmath::within_4_ulp(dyz, eps) {
                    return Err(Error::TruncationTie { distance: dyz, eps });
                }
                let w = wy * mu.weight(iz);
                let a_cond = dist_x[iy] > eps;
                let b_cond = dist_x[iz] > eps;
                let c_cond = dyz > eps;
                if a_cond && b_cond && c_cond {
                    part.p += w * permutation_form(spec, x, py, pz)?;
                    part.s_pairs += 1;
                } else if a_cond && c_cond {
                    part.a += 2.0 * w * spec.eval_pair_dot(py, x, pz)?;
                    part.t1_pairs += 1;
                } else if a_cond && b_cond {
                    part.b += w * spec.eval_pair_dot(x, py, pz)?;
                    part.t2_pairs += 1;
                } else {
                    part.discarded += 1;
                }
            }
            Ok(part)
        })
        .collect();
    let mut p_term = 0.0;
    let mut a_term = 0.0;
    let mut b_term = 0.0;
    let mut s_pairs = 0;
    let mut t1_pairs = 0;
    let mut t2_pairs = 0;
    let mut discarded = 0;
    for part in partials {
        let part = part?;
        p_term += part.p;
        a_term += part.a;
        b_term += part.b;
        s_pairs += part.s_pairs;
        t1_pairs += part.t1_pairs;
        t2_pairs += part.t2_pairs;
        discarded += part.discarded;
    }
    let residual = ((lhs1 + lhs2 + lhs3) - (p_term + a_term + b_term)).abs();
    Ok(IdentityReport {
        lhs_terms: [lhs1, lhs2, lhs3],
        p_term,
        a_term,
        b_term,
        residual,
        s_pairs,
        t1_pairs,
        t2_pairs,
        discarded_pairs: discarded,
    })
}

/// Terms of the global regrouping of the squared transform.
#[derive(Debug, Clone, Serialize)]
pub struct GlobalIdentityReport {
    /// `sum_i w_i |R_eps(1)(x_i)|^2`.
    pub lhs: f64,
    /// One third of the triple sum over ordered triples with all three
    /// pairwise separations beyond `eps`.
    pub third_of_triple_sum: f64,
    /// `sum_{i != j, |x_i - x_j| > eps} w_i w_j^2 |K(x_j - x_i)|^2`, the
    /// exact self-pairing remainder.
    pub diagonal_term: f64,
    /// Signed difference `lhs - third_of_triple_sum - diagonal_term`.
    pub residual: f64,
}

impl GlobalIdentityReport {
    pub fn scale(&self) -> f64 {
        self.lhs
            .abs()
            .max(self.third_of_triple_sum.abs())
            .max(self.diagonal_term.abs())
    }

    pub fn relative_residual(&self) -> f64 {
        let s = self.scale();
        if s == 0.0 {
            0.0
        } else {
            self.residual.abs() / s
        }
    }
}

/// Splits the weighted square sum of the truncated transform into the
/// symmetrized triple energy and the diagonal term. The regrouping is an
/// exact identity when `eps` is below the measure resolution (then "both
/// separations beyond `eps`" already implies the third one is, too); for
/// larger `eps` the residual reports the near-diagonal remainder of atom
/// pairs closer than the cutoff.
pub fn global_identity_check(
    mu: &DiscreteMeasure,
    spec: &KernelSpec,
    eps: f64,
) -> Result<GlobalIdentityReport> {
    let ones = vec![1.0; mu.len()];
    let field = transform_field(mu, spec, eps, &ones)?;
    let lhs = weighted_field_inner(mu, &field, &field);

    let n = mu.len();
    let diag_partials: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc = 0.0;
            let mut kbuf = vec![0.0; mu.dim()];
            for j in 0..n {
                if j == i {
                    continue;
                }
                let d = vecmath::dist(mu.point(i), mu.point(j));
                if d > eps {
                    kbuf.iter_mut().for_each(|v| *v = 0.0);
                    crate::transform::accumulate_kernel_term(
                        spec,
                        mu.point(i),
                        mu.point(j),
                        d,
                        1.0,
                        &mut kbuf,
                    );
                    acc += mu.weight(i)
                        * mu.weight(j)
                        * mu.weight(j)
                        * vecmath::dot(&kbuf, &kbuf);
                }
            }
            acc
        })
        .collect();
    let diagonal_term: f64 = diag_partials.iter().sum();

    let triple_partials: Vec<Result<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc = 0.0;
            for j in i + 1..n {
                if vecmath::dist(mu.point(i), mu.point(j)) <= eps {
                    continue;
                }
                for k in j + 1..n {
                    if vecmath::dist(mu.point(i), mu.point(k)) <= eps
                        || vecmath::dist(mu.point(j), mu.point(k)) <= eps
                    {
                        continue;
                    }
                    acc += mu.weight(i)
                        * mu.weight(j)
                        * mu.weight(k)
                        * permutation_form(spec, mu.point(i), mu.point(j), mu.point(k))?;
                }
            }
            Ok(acc)
        })
        .collect();
    let mut unordered = 0.0;
    for t in triple_partials {
        unordered += t?;
    }
    // Ordered sum = 6 * unordered; a third of it is 2 * unordered.
    let third_of_triple_sum = 2.0 * unordered;
    let residual = lhs - third_of_triple_sum - diagonal_term;
    Ok(GlobalIdentityReport {
        lhs,
        third_of_triple_sum,
        diagonal_term,
        residual,
    })
}

//! Truncated transforms of a measure and their adjoints.
//!
//! For a cutoff `eps > 0` the truncated transform of `mu` with per-atom
//! coefficients `f` is
//!
//! ```text
//!     R_eps(f)(x) = sum over atoms x_j with |x_j - x| > eps
//!                   of  w_j f_j K(x_j - x) ,
//! ```
//!
//! a d-vector. The truncation is strict, atoms at distance exactly `eps`
//! are a tie: ties within 4 ulp are reported as errors with the advice to
//! nudge `eps`, because silently keeping or dropping such an atom makes
//! the finite-sum identities of the symmetrization module false by an
//! uncontrolled amount. Self-interaction is excluded structurally (the
//! atom at `x` itself sits at distance 0, never above `eps`).
//!
//! The adjoint pairs a vector field back to scalars,
//! `R*(F)(x) = - sum_{|x_k - x| > eps} w_k K(x_k - x) . F_k`, and
//! satisfies the exact finite-sum duality `<R f, G>_mu = <f, R* G>_mu`.

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::measure::{atoms_in_ball, ball_mass, density, Ball, DiscreteMeasure};
use crate::vecmath;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// A d-vector attached to every atom of a measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorField {
    pub values: Vec<Vec<f64>>,
}

impl VectorField {
    pub fn zeros(n: usize, dim: usize) -> Self {
        VectorField {
            values: vec![vec![0.0; dim]; n],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Checks shape against a measure: one finite d-vector per atom.
    pub fn validate(&self, mu: &DiscreteMeasure) -> Result<()> {
        if self.values.len() != mu.len() {
            return Err(Error::InvalidParameter(format!(
                "field has {} entries for {} atoms",
                self.values.len(),
                mu.len()
            )));
        }
        for (i, row) in self.values.iter().enumerate() {
            if row.len() != mu.dim() {
                return Err(Error::InvalidParameter(format!(
                    "field entry {i} has dimension {} for a {}-dimensional measure",
                    row.len(),
                    mu.dim()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "field entry {i} is not finite"
                )));
            }
        }
        Ok(())
    }
}

/// `<f, g>_mu = sum_i w_i f_i g_i` for per-atom scalars.
pub fn weighted_inner(mu: &DiscreteMeasure, f: &[f64], g: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..mu.len() {
        acc += mu.weight(i) * f[i] * g[i];
    }
    acc
}

/// `<F, G>_mu = sum_i w_i F_i . G_i` for per-atom vectors.
pub fn weighted_field_inner(mu: &DiscreteMeasure, f: &VectorField, g: &VectorField) -> f64 {
    let mut acc = 0.0;
    for i in 0..mu.len() {
        acc += mu.weight(i) * vecmath::dot(&f.values[i], &g.values[i]);
    }
    acc
}

/// Indicator coefficients: 1 on the listed atoms, 0 elsewhere.
pub fn indicator(len: usize, indices: &[usize]) -> Vec<f64> {
    let mut f = vec![0.0; len];
    for &i in indices {
        f[i] = 1.0;
    }
    f
}

pub(crate) fn validate_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "truncation radius eps must be positive and finite, got {eps}"
        )));
    }
    Ok(())
}

/// Adds `scale * K(source - target)` onto `row`. Shared by the naive and
/// tree evaluations so that both produce bitwise identical terms.
#[inline]
pub(crate) fn accumulate_kernel_term(
    spec: &KernelSpec,
    target: &[f64],
    source: &[f64],
    separation: f64,
    scale: f64,
    row: &mut [f64],
) {
    let factor = separation.powf(-spec.s) * scale;
    let n = spec.n as i32;
    for c in 0..row.len() {
        row[c] += ((source[c] - target[c]) / separation).powi(n) * factor;
    }
}

/// Core point evaluation with per-atom coefficients and an optional atom
/// mask restricting the sum's domain. Every atom in the domain is checked
/// for a truncation tie before the strict cutoff is applied.
pub fn transform_point_coefs(
    mu: &DiscreteMeasure,
    spec: &KernelSpec,
    eps: f64,
    x: &[f64],
    coefs: &[f64],
    mask: Option<&[usize]>,
) -> Result<Vec<f64>> {
    validate_eps(eps)?;
    if x.len() != mu.dim() {
        return Err(Error::InvalidParameter(
            "evaluation point dimension does not match the measure".into(),
        ));
    }
    if coefs.len() != mu.len() {
        return Err(Error::InvalidParameter(format!(
            "{} coefficients for {} atoms",
            coefs.len(),
            mu.len()
        )));
    }
    let mut row = vec![0.0; mu.dim()];
    let mut visit = |j: usize| -> Result<()> {
        let p = mu.point(j);
        let d = vecmath::dist(p, x);
        if vecmath::within_4_ulp(d, eps) {
            return Err(Error::TruncationTie {
                distance: d,
                eps,
            });
        }
        if d > eps {
            accumulate_kernel_term(spec, x, p, d, mu.weight(j) * coefs[j], &mut row);
        }
        Ok(())
    };
    match mask {
        Some(indices) => {
            for &j in indices {
                if j >= mu.len() {
                    return Err(Error::InvalidParameter(format!(
                        "mask index {j} out of range for {} atoms",
                        mu.len()
                    )));
                }
                visit(j)?;
            }
        }
        None => {
            for j in 0..mu.len() {
                visit(j)?;
            }
        }
    }
    Ok(row)
}

/// The truncated transform of `mu` itself (unit coefficients) at an
/// arbitrary point, optionally restricted to a subset of atoms.
pub fn truncated_transform_point(
    mu: &DiscreteMeasure,
    spec: &KernelSpec,
    eps: f64,
    x: &[f64],
    mask: Option<&[usize]>,
) -> Result<Vec<f64>> {
    let ones = vec![1.0; mu.len()];
    transform_point_coefs(mu, spec, eps, x, &ones, mask)
}

/// Evaluates the transform with coefficients `f` at every atom. Row `i`
/// is `R_eps(f)(x_i)`; parallel over rows, each row summed in ascending
/// atom order so results are identical for any thread count.
pub fn transform_field(
    mu: &DiscreteMeasure,
    spec: &KernelSpec,
    eps: f64,
    f: &[f64],
) -> Result<VectorField> {
    validate_eps(eps)?;
    if f.len() != mu.len() {
        return Err(Error::InvalidParameter(format!(
            "{} coefficients for {} atoms",
            f.len(),
            mu.len()
        )));
    }
    let rows: Vec<Result<Vec<f64>>> = (0..mu.len())
        .into_par_iter()
        .map(|i| transform_point_coefs(mu, spec, eps, mu.point(i), f, None))
        .collect();
    let mut values = Vec::with_capacity(mu.len());
    for row in rows {
        values.push(row?);
    }
    Ok(VectorField { values })
}

/// The adjoint pairing at one point:
/// `-sum_{|x_k - x| > eps} w_k K(x_k - x) . F_k`.
pub fn adjoint_point(
    mu: &DiscreteMeasure,
    spec: &KernelSpec,
    eps: f64,
    x: &[f64],
    field: &VectorField,
) -> Result<f64> {
    validate_eps(eps)?;
    field.validate(mu)?;
    let mut acc = 0.0;
    let mut kbuf = vec![0.0; mu.dim()];
    for k in 0..mu.len() {
        let p = mu.point(k);
        let d = vecmath::dist(p, x);
        if vecmath::within_4_ulp(d, eps) {
            return Err(Error::TruncationTie {
                distance: d,
                eps,
            });
        }
        if d > eps {
            kbuf.iter_mut().for_each(|v| *v = 0.0);
            accumulate_kernel_term(spec, x, p, d, mu.weight(k), &mut kbuf);
            acc += vecmath::dot(&kbuf, &field.values[k]);
        }
    }
    Ok(-acc)
}

/// The adjoint at every atom: scalar `i` is `R*_eps(F)(x_i)`.
pub fn adjoint_apply(
    mu: &DiscreteMeasure,
    spec: &KernelSpec,
    eps: f64,
    field: &VectorField,
) -> Result<Vec<f64>> {
    validate_eps(eps)?;
    field.validate(mu)?;
    let rows: Vec<Result<f64>> = (0..mu.len())
        .into_par_iter()
        .map(|i| adjoint_point(mu, spec, eps, mu.point(i), field))
        .collect();
    let mut out = Vec::with_capacity(mu.len());
    for r in rows {
        out.push(r?);
    }
    Ok(out)
}

/// Operator norm of the truncated transform on the weighted space, via
/// power iteration on the self-adjoint composition `R* R`. The start
/// vector is seeded; a dying iterate is restarted with the next seeded
/// vector and the norm is 0 when every attempt collapses (for instance a
/// single atom, where the transform is identically zero). Returns the
/// square root of the final Rayleigh quotient.
pub fn operator_norm(
    mu: &DiscreteMeasure,
    spec: &KernelSpec,
    eps: f64,
    iterations: usize,
    seed: u64,
) -> Result<f64> {
    validate_eps(eps)?;
    if iterations == 0 {
        return Err(Error::InvalidParameter(
            "power iteration needs at least one step".into(),
        ));
    }
    let n = mu.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _attempt in 0..4 {
        let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let nv2 = weighted_inner(mu, &v, &v);
        if nv2 <= 0.0 {
            continue;
        }
        let inv = nv2.sqrt().recip();
        v.iter_mut().for_each(|c| *c *= inv);
        let mut rayleigh = 0.0;
        let mut died = false;
        for _ in 0..iterations {
            let rv = transform_field(mu, spec, eps, &v)?;
            rayleigh = weighted_field_inner(mu, &rv, &rv);
            let y = adjoint_apply(mu, spec, eps, &rv)?;
            let ny2 = weighted_inner(mu, &y, &y);
            if ny2 <= 0.0 {
                died = rayleigh <= 0.0;
                break;
            }
            let inv = ny2.sqrt().recip();
            v = y;
            v.iter_mut().for_each(|c| *c *= inv);
        }
        if !died {
            return Ok(rayleigh.max(0.0).sqrt());
        }
    }
    Ok(0.0)
}

/// Empirical constants for the two localized bounds around a ball: how
/// large the transform of mass inside `B` gets on the annulus `2B \ B`,
/// and vice versa, both normalized by `sup|a| * theta(2B)`.
#[derive(Debug, Clone, Serialize)]
pub struct AnnulusBoundReport {
    pub theta_2b: f64,
    pub sup_a: f64,
    /// Probe atoms found in the annulus and in the ball.
    pub annulus_atoms: usize,
    pub ball_atoms: usize,
    /// `max_{x in 2B\B} |R_eps(a 1_B)(x)| / (sup_a * theta(2B))`.
    pub ball_to_annulus: f64,
    /// `max_{x in B} |R_eps(a 1_{2B\B})(x)| / (sup_a * theta(2B))`.
    pub annulus_to_ball: f64,
}

/// Evaluates both localized-bound ratios. Errors when `2B` carries no
/// mass (the normalizing density vanishes); a maximum over an empty probe
/// set is 0; an identically zero `a` short-circuits to zero ratios.
pub fn annulus_bound_report(
    mu: &DiscreteMeasure,
    spec: &KernelSpec,
    eps: f64,
    ball: &Ball,
    a: &[f64],
) -> Result<AnnulusBoundReport> {
    validate_eps(eps)?;
    if a.len() != mu.len() {
        return Err(Error::InvalidParameter(format!(
            "{} coefficients for {} atoms",
            a.len(),
            mu.len()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(
            "annulus coefficients must be finite".into(),
        ));
    }
    let double = ball.scaled(2.0)?;
    if ball_mass(mu, &double) <= 0.0 {
        return Err(Error::EmptyBall(
            "2B carries no mass, theta(2B) = 0".into(),
        ));
    }
    let theta_2b = density(mu, &double, spec);
    let sup_a = a.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let inner = atoms_in_ball(mu, ball);
    let in_ball = {
        let mut flags = vec![false; mu.len()];
        for &i in &inner {
            flags[i] = true;
        }
        flags
    };
    let annulus: Vec<usize> = atoms_in_ball(mu, &double)
        .into_iter()
        .filter(|&i| !in_ball[i])
        .collect();
    if sup_a == 0.0 {
        return Ok(AnnulusBoundReport {
            theta_2b,
            sup_a,
            annulus_atoms: annulus.len(),
            ball_atoms: inner.len(),
            ball_to_annulus: 0.0,
            annulus_to_ball: 0.0,
        });
    }
    let norm_at = |targets: &[usize], mask: &[usize]| -> Result<f64> {
        let mut best = 0.0f64;
        for &t in targets {
            let v = transform_point_coefs(mu, spec, eps, mu.point(t), a, Some(mask))?;
            best = best.max(vecmath::norm(&v));
        }
        Ok(best)
    };
    let scale = sup_a * theta_2b;
    let ball_to_annulus = norm_at(&annulus, &inner)? / scale;
    let annulus_to_ball = norm_at(&inner, &annulus)? / scale;
    Ok(AnnulusBoundReport {
        theta_2b,
        sup_a,
        annulus_atoms: annulus.len(),
        ball_atoms: inner.len(),
        ball_to_annulus,
        annulus_to_ball,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_measure(xs: &[f64], ws: &[f64]) -> DiscreteMeasure {
        DiscreteMeasure::new(xs.iter().map(|&x| vec![x]).collect(), ws.to_vec()).unwrap()
    }

    fn spec(s: f64) -> KernelSpec {
        KernelSpec::new(s, 1).unwrap()
    }

    #[test]
    fn point_transform_single_far_atom() {
        // One unit atom at 2, evaluated at 0 with eps = 1:
        // K(2) = 2 / 2^(3/2) = 2^(-1/2).
        let mu = line_measure(&[2.0], &[1.0]);
        let v = truncated_transform_point(&mu, &spec(0.5), 1.0, &[0.0], None).unwrap();
        assert!((v[0] - 2f64.powf(-0.5)).abs() < 1e-15);
    }

    #[test]
    fn strict_cutoff_excludes_near_atoms() {
        let mu = line_measure(&[0.5, 2.0], &[1.0, 1.0]);
        let v = truncated_transform_point(&mu, &spec(0.5), 1.0, &[0.0], None).unwrap();
        assert!((v[0] - 2f64.powf(-0.5)).abs() < 1e-15);
    }

    #[test]
    fn tie_at_eps_is_an_error() {
        let mu = line_measure(&[1.0], &[1.0]);
        let r = truncated_transform_point(&mu, &spec(0.5), 1.0, &[0.0], None);
        assert!(matches!(r, Err(Error::TruncationTie { .. })));
        // Nudging eps clears the tie.
        let v = truncated_transform_point(&mu, &spec(0.5), 0.999, &[0.0], None).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mask_restricts_the_domain() {
        let mu = line_measure(&[2.0, 3.0], &[1.0, 1.0]);
        let s = spec(0.5);
        let full = truncated_transform_point(&mu, &s, 1.0, &[0.0], None).unwrap();
        let only0 = truncated_transform_point(&mu, &s, 1.0, &[0.0], Some(&[0])).unwrap();
        let only1 = truncated_transform_point(&mu, &s, 1.0, &[0.0], Some(&[1])).unwrap();
        assert!((only0[0] + only1[0] - full[0]).abs() < 1e-15);
        assert!((only0[0] - 2f64.powf(-0.5)).abs() < 1e-15);
    }

    #[test]
    fn field_excludes_self_interaction() {
        // Two atoms, eps below their separation: each row sees only the
        // other atom, never itself.
        let mu = line_measure(&[0.0, 1.0], &[1.0, 1.0]);
        let field = transform_field(&mu, &spec(0.5), 0.5, &[1.0, 1.0]).unwrap();
        assert!((field.values[0][0] - 1.0).abs() < 1e-15);
        assert!((field.values[1][0] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn adjoint_duality_is_exact() {
        let mu = crate::generators::random_cloud(11, 40, 2, 1.0).unwrap();
        let s = KernelSpec::new(0.6, 3).unwrap();
        let eps = 0.05;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f: Vec<f64> = (0..mu.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = VectorField {
            values: (0..mu.len())
                .map(|_| (0..2).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect(),
        };
        let rf = transform_field(&mu, &s, eps, &f).unwrap();
        let rstar_g = adjoint_apply(&mu, &s, eps, &g).unwrap();
        let lhs = weighted_field_inner(&mu, &rf, &g);
        let rhs = weighted_inner(&mu, &f, &rstar_g);
        let scale = lhs.abs().max(rhs.abs()).max(1e-300);
        assert!((lhs - rhs).abs() <= 1e-10 * scale);
    }

    #[test]
    fn operator_norm_two_atom_value() {
        // Two atoms at distance 1 with weight 1/2 each: R*R = I/4 on the
        // weighted space, so the norm is exactly 1/2 for any s.
        for s in [0.25, 0.5, 0.8] {
            let mu = line_measure(&[0.0, 1.0], &[0.5, 0.5]);
            let norm = operator_norm(&mu, &spec(s), 0.5, 25, 7).unwrap();
            assert!(
                (norm - 0.5).abs() < 1e-6,
                "norm {norm} for s={s}"
            );
        }
    }

    #[test]
    fn operator_norm_of_a_single_atom_is_zero() {
        let mu = DiscreteMeasure::new(vec![vec![0.0]], vec![1.0]).unwrap();
        let norm = operator_norm(&mu, &spec(0.5), 0.5, 10, 3).unwrap();
        assert_eq!(norm, 0.0);
    }

    #[test]
    fn operator_norm_is_seed_deterministic() {
        let mu = crate::generators::random_cloud(3, 30, 2, 1.0).unwrap();
        let s = spec(0.5);
        let a = operator_norm(&mu, &s, 0.01, 50, 9).unwrap();
        let b = operator_norm(&mu, &s, 0.01, 50, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn annulus_report_hand_value() {
        // Atom 0 inside B(0,1), atom 1 in the annulus at 1.5. The
        // transform of the inner mass at the annulus atom has magnitude
        // 1.5^(-1/2); theta(2B) = 2 / 2^(1/2).
        let mu = line_measure(&[0.0, 1.5], &[1.0, 1.0]);
        let ball = Ball::new(vec![0.0], 1.0).unwrap();
        let rep = annulus_bound_report(&mu, &spec(0.5), 0.01, &ball, &[1.0, 1.0]).unwrap();
        let theta = 2.0 / 2f64.powf(0.5);
        assert!((rep.theta_2b - theta).abs() < 1e-15);
        assert_eq!(rep.annulus_atoms, 1);
        assert_eq!(rep.ball_atoms, 1);
        let expected = 1.5f64.powf(-0.5) / theta;
        assert!((rep.ball_to_annulus - expected).abs() < 1e-14);
        assert!((rep.annulus_to_ball - expected).abs() < 1e-14);
    }

    #[test]
    fn annulus_report_zero_coefficients() {
        let mu = line_measure(&[0.0, 1.5], &[1.0, 1.0]);
        let ball = Ball::new(vec![0.0], 1.0).unwrap();
        let rep = annulus_bound_report(&mu, &spec(0.5), 0.01, &ball, &[0.0, 0.0]).unwrap();
        assert_eq!(rep.ball_to_annulus, 0.0);
        assert_eq!(rep.annulus_to_ball, 0.0);
    }

    #[test]
    fn annulus_report_requires_mass() {
        let mu = line_measure(&[10.0], &[1.0]);
        let ball = Ball::new(vec![0.0], 1.0).unwrap();
        assert!(matches!(
            annulus_bound_report(&mu, &spec(0.5), 0.01, &ball, &[1.0]),
            Err(Error::EmptyBall(_))
        ));
    }
}

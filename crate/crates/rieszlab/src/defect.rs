//! Variational quantities behind the rigidity of measures with vanishing
//! truncated transforms.
//!
//! The central object is the defect of a ball `B`: the weighted variance
//! over atoms of `B` of the transform generated by the exterior part of
//! the measure. Perturbing the measure by `(1 + t 1_Delta)` and tracking
//! the defect gives a curve in `t` whose derivative at zero has a closed
//! form; this module computes the curve, the analytic derivative, and
//! central finite differences side by side.
//!
//! Pairings of the transform against Lipschitz bump functions come in two
//! algebraically equal forms, a direct one and an antisymmetrized one
//! whose summand pairs atom swaps; comparing them (and their behavior
//! under constant shifts of the test function) is a sharp consistency
//! check on the truncation bookkeeping.

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::measure::{atoms_in_ball, Ball, DiscreteMeasure, Region};
use crate::transform::transform_point_coefs;
use crate::vecmath;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// One radial hat bump: `coefficient * max(0, 1 - |x - center| / radius)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HatTerm {
    pub center: Vec<f64>,
    pub radius: f64,
    pub coefficient: f64,
}

/// A finite sum of radial hat bumps, the Lipschitz test functions used
/// in transform pairings. Serializes as the bare term list.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TestFunction {
    terms: Vec<HatTerm>,
}

impl TestFunction {
    pub fn new(terms: Vec<HatTerm>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidParameter(
                "test function needs at least one term".into(),
            ));
        }
        let dim = terms[0].center.len();
        for t in &terms {
            if t.center.len() != dim {
                return Err(Error::InvalidParameter(
                    "test function terms must share one dimension".into(),
                ));
            }
            if !t.center.iter().all(|c| c.is_finite()) {
                return Err(Error::InvalidParameter(
                    "test function center must be finite".into(),
                ));
            }
            if !(t.radius > 0.0) || !t.radius.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "hat radius must be positive and finite, got {}",
                    t.radius
                )));
            }
            if !t.coefficient.is_finite() {
                return Err(Error::InvalidParameter(
                    "hat coefficient must be finite".into(),
                ));
            }
        }
        Ok(TestFunction { terms })
    }

    /// Single bump convenience constructor.
    pub fn hat(center: Vec<f64>, radius: f64, coefficient: f64) -> Result<Self> {
        TestFunction::new(vec![HatTerm {
            center,
            radius,
            coefficient,
        }])
    }

    pub fn dim(&self) -> usize {
        self.terms[0].center.len()
    }

    pub fn terms(&self) -> &[HatTerm] {
        &self.terms
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim());
        self.terms
            .iter()
            .map(|t| {
                let d = vecmath::dist(x, &t.center);
                t.coefficient * (1.0 - d / t.radius).max(0.0)
            })
            .sum()
    }

    /// Upper bound on the Lipschitz constant: sum of |coefficient|/radius.
    pub fn lip_bound(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coefficient.abs() / t.radius)
            .sum()
    }
}

/// Summation route for a transform pairing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairingMode {
    /// `sum_i w_i psi_i R_eps(1)(x_i)`, atom by atom.
    Direct,
    /// `1/2 sum_{i != j} w_i w_j (psi_i - psi_j) K(x_j - x_i)` over pairs
    /// beyond the cutoff; sees the test function only through pairwise
    /// differences, so a constant shift can enter only through the
    /// rounding of the shifted inputs.
    Antisymmetrized,
}

/// A transform pairing value (one component per coordinate direction).
#[derive(Debug, Clone, Serialize)]
pub struct PairingResult {
    pub value: Vec<f64>,
    pub mode: PairingMode,
    /// Weighted mean of the test function over the atoms before any
    /// adjustment.
    pub weighted_mean: f64,
    /// True when the test function failed the mean-zero precondition and
    /// its weighted mean was subtracted before pairing.
    pub mean_adjusted: bool,
}

/// Both pairing routes for raw per-atom test values, with no mean-zero
/// handling: `(direct, antisymmetrized)`. The two agree up to rounding.
/// When a constant is added to `psi_atoms` the antisymmetrized route
/// moves only by the rounding of the shifted inputs (bitwise not at all
/// when the additions happen to be exact), while the direct route leans
/// on the full antisymmetric cancellation across the pair sum.
pub fn pairing_values(
    mu: &DiscreteMeasure,
    spec: &KernelSpec,
    eps: f64,
    psi_atoms: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    if psi_atoms.len() != mu.len() {
        return Err(Error::InvalidParameter(format!(
            "need one test value per atom: got {} for {} atoms",
            psi_atoms.len(),
            mu.len()
        )));
    }
    crate::transform::validate_eps(eps)?;
    let n = mu.len();
    let dim = mu.dim();
    let partials: Vec<Result<(Vec<f64>, Vec<f64>)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = mu.point(i);
            let wi = mu.weight(i);
            let mut direct = vec![0.0; dim];
            let mut antisym = vec![0.0; dim];
            let mut kbuf = vec![0.0; dim];
            for j in 0..n {
                if j == i {
                    continue;
                }
                let d = vecmath::dist(xi, mu.point(j));
                if vecmath::within_4_ulp(d, eps) {
                    return Err(Error::TruncationTie { distance: d, eps });
                }
                if d <= eps {
                    continue;
                }
                kbuf.iter_mut().for_each(|v| *v = 0.0);
                crate::transform::accumulate_kernel_term(
                    spec,
                    xi,
                    mu.point(j),
                    d,
                    1.0,
                    &mut kbuf,
                );
                let w = wi * mu.weight(j);
                for c in 0..dim {
                    direct[c] += w * psi_atoms[i] * kbuf[c];
                    antisym[c] += 0.5 * w * (psi_atoms[i] - psi_atoms[j]) * kbuf[c];
                }
            }
            Ok((direct, antisym))
        })
        .collect();
    let mut direct = vec![0.0; dim];
    let mut antisym = vec![0.0; dim];
    for p in partials {
        let (d, a) = p?;
        for c in 0..dim {
            direct[c] += d[c];
            antisym[c] += a[c];
        }
    }
    Ok((direct, antisym))
}

/// Pairs the truncated transform of the measure against a Lipschitz test
/// function. The pairing is only shift-invariant, hence meaningful as a
/// distributional quantity, for mean-zero test data; when the weighted
/// mean of `psi` exceeds `1e-10 * total mass * max |psi|` it is subtracted
/// first and the result is flagged as adjusted.
pub fn reflectionless_pairing(
    mu: &DiscreteMeasure,
    spec: &KernelSpec,
    eps: f64,
    psi: &TestFunction,
    mode: PairingMode,
) -> Result<PairingResult> {
    if psi.dim() != mu.dim() {
        return Err(Error::InvalidParameter(
            "test function dimension does not match the measure".into(),
        ));
    }
    let mut values: Vec<f64> = (0..mu.len()).map(|i| psi.eval(mu.point(i))).collect();
    let weighted_sum: f64 = (0..mu.len()).map(|i| mu.weight(i) * values[i]).sum();
    let weighted_mean = weighted_sum / mu.total_mass();
    let max_abs = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mean_adjusted = weighted_sum.abs() > 1e-10 * mu.total_mass() * max_abs;
    if mean_adjusted {
        for v in values.iter_mut() {
            *v -= weighted_mean;
        }
    }
    let (direct, antisym) = pairing_values(mu, spec, eps, &values)?;
    let value = match mode {
        PairingMode::Direct => direct,
        PairingMode::Antisymmetrized => antisym,
    };
    Ok(PairingResult {
        value,
        mode,
        weighted_mean,
        mean_adjusted,
    })
}

/// The exterior transform on the atoms of a ball, centered to mean zero.
#[derive(Debug, Clone, Serialize)]
pub struct ExteriorField {
    /// Atom indices inside the ball, ascending.
    pub indices: Vec<usize>,
    /// Centered field `f0(y) = R_eps(1_{B^c} mu)(y) - mean`, one row per
    /// index.
    pub values: Vec<Vec<f64>>,
    /// The weighted mean that was subtracted.
    pub mean: Vec<f64>,
}

/// Computes the exterior transform `R_eps(1_{B^c} mu)` on every atom in
/// `B` and centers it to weighted mean zero over `B`. Exact mean-zeroness
/// of the centered field is what kills the cross term in the defect
/// derivative.
pub fn exterior_field(
    mu: &DiscreteMeasure,
    ball: &Ball,
    spec: &KernelSpec,
    eps: f64,
) -> Result<ExteriorField> {
    let factors = vec![1.0; mu.len()];
    let (indices, raw, mean, _mass) = exterior_field_weighted(mu, ball, spec, eps, &factors)?;
    let values = raw
        .into_iter()
        .map(|row| row.iter().zip(&mean).map(|(v, m)| v - m).collect())
        .collect();
    Ok(ExteriorField {
        indices,
        values,
        mean,
    })
}

/// Shared worker: raw exterior field under per-atom density factors,
/// plus weighted mean and ball mass. Rows are raw (not centered).
fn exterior_field_weighted(
    mu: &DiscreteMeasure,
    ball: &Ball,
    spec: &KernelSpec,
    eps: f64,
    factors: &[f64],
) -> Result<(Vec<usize>, Vec<Vec<f64>>, Vec<f64>, f64)> {
    if factors.len() != mu.len() {
        return Err(Error::InvalidParameter(format!(
            "need one density factor per atom: got {} for {} atoms",
            factors.len(),
            mu.len()
        )));
    }
    if ball.center.len() != mu.dim() {
        return Err(Error::InvalidParameter(
            "ball dimension does not match the measure".into(),
        ));
    }
    for (i, &g) in factors.iter().enumerate() {
        if !g.is_finite() || g < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "density factor {i} must be finite and nonnegative, got {g}"
            )));
        }
    }
    let inside = atoms_in_ball(mu, ball);
    let inside_flags = {
        let mut f = vec![false; mu.len()];
        for &i in &inside {
            f[i] = true;
        }
        f
    };
    let outside: Vec<usize> = (0..mu.len()).filter(|&i| !inside_flags[i]).collect();
    let mass: f64 = inside.iter().map(|&i| factors[i] * mu.weight(i)).sum();
    if inside.is_empty() || mass == 0.0 {
        return Err(Error::EmptyBall(format!(
            "ball at {:?} radius {}",
            ball.center, ball.radius
        )));
    }
    let raw: Vec<Result<Vec<f64>>> = inside
        .par_iter()
        .map(|&iy| transform_point_coefs(mu, spec, eps, mu.point(iy), factors, Some(&outside)))
        .collect();
    let mut rows = Vec::with_capacity(inside.len());
    for r in raw {
        rows.push(r?);
    }
    let mut mean = vec![0.0; mu.dim()];
    for (&iy, row) in inside.iter().zip(&rows) {
        let w = factors[iy] * mu.weight(iy);
        for c in 0..mu.dim() {
            mean[c] += w * row[c];
        }
    }
    for m in mean.iter_mut() {
        *m /= mass;
    }
    Ok((inside, rows, mean, mass))
}

/// The ball defect under per-atom density factors `g`: the weighted
/// variance over atoms of `B`, with weights `g_i w_i`, of the transform
/// generated by the factored measure outside `B`. Factors must be finite
/// and nonnegative; the unperturbed defect is `g = 1` everywhere.
pub fn defect_functional(
    mu: &DiscreteMeasure,
    ball: &Ball,
    spec: &KernelSpec,
    eps: f64,
    g_factors: &[f64],
) -> Result<f64> {
    let (inside, rows, mean, _mass) = exterior_field_weighted(mu, ball, spec, eps, g_factors)?;
    let mut total = 0.0;
    for (&iy, row) in inside.iter().zip(&rows) {
        let w = g_factors[iy] * mu.weight(iy);
        let dev: f64 = row
            .iter()
            .zip(&mean)
            .map(|(v, m)| (v - m) * (v - m))
            .sum();
        total += w * dev;
    }
    Ok(total)
}

fn perturbation_factors(mu: &DiscreteMeasure, delta: &[usize], t: f64) -> Result<Vec<f64>> {
    if !(t > -1.0) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "perturbation parameter must be finite and greater than -1, got {t}"
        )));
    }
    let mut factors = vec![1.0; mu.len()];
    for &i in delta {
        factors[i] = 1.0 + t;
    }
    Ok(factors)
}

/// The defect of `B` under the family `(1 + t 1_Delta) mu`, sampled at
/// the given parameters. Each entry of the result is `(t, defect)`.
pub fn perturbation_curve(
    mu: &DiscreteMeasure,
    ball: &Ball,
    delta: &Region,
    spec: &KernelSpec,
    eps: f64,
    ts: &[f64],
) -> Result<Vec<(f64, f64)>> {
    let delta_idx = delta.resolve(mu)?;
    let mut curve = Vec::with_capacity(ts.len());
    for &t in ts {
        let factors = perturbation_factors(mu, &delta_idx, t)?;
        curve.push((t, defect_functional(mu, ball, spec, eps, &factors)?));
    }
    Ok(curve)
}

/// Analytic defect derivative against central finite differences.
#[derive(Debug, Clone, Serialize)]
pub struct DerivativeReport {
    /// Closed-form derivative of the defect curve at `t = 0`.
    #[serde(rename = "g_prime")]
    pub analytic: f64,
    /// `(step, central difference)` per requested step.
    pub finite_difference: Vec<(f64, f64)>,
    /// Median convergence order of the finite differences toward the
    /// analytic value; absent when the errors are at rounding level
    /// (for instance when the perturbation cannot be seen from the ball
    /// and everything is exactly zero).
    pub observed_order: Option<f64>,
}

/// Differentiates the defect of `B` along `(1 + t 1_Delta) mu` at `t = 0`.
///
/// Writing `f0` for the centered exterior field and `C` for the transform
/// generated by the part of `Delta` outside `B`, the derivative is
///
/// ```text
///     g'(0) = sum_{y in Delta and B} w_y |f0(y)|^2
///           + 2 sum_{y in B} w_y f0(y) . C(y)
/// ```
///
/// The naive differentiation produces four further terms through the
/// moving weighted mean; they cancel against each other because `f0` has
/// exact weighted mean zero over `B`. Central differences of the defect
/// curve converge to this value at second order in the step.
pub fn variational_derivative(
    mu: &DiscreteMeasure,
    ball: &Ball,
    delta: &Region,
    spec: &KernelSpec,
    eps: f64,
    steps: &[f64],
) -> Result<DerivativeReport> {
    let delta_idx = delta.resolve(mu)?;
    let field = exterior_field(mu, ball, spec, eps)?;
    let in_delta = {
        let mut f = vec![false; mu.len()];
        for &i in &delta_idx {
            f[i] = true;
        }
        f
    };
    let in_ball = {
        let mut f = vec![false; mu.len()];
        for &i in &field.indices {
            f[i] = true;
        }
        f
    };
    let delta_outside: Vec<usize> = delta_idx
        .iter()
        .copied()
        .filter(|&i| !in_ball[i])
        .collect();
    let ones = vec![1.0; mu.len()];

    let mut analytic = 0.0;
    for (&iy, f0) in field.indices.iter().zip(&field.values) {
        let w = mu.weight(iy);
        if in_delta[iy] {
            analytic += w * vecmath::dot(f0, f0);
        }
        let c = transform_point_coefs(mu, spec, eps, mu.point(iy), &ones, Some(&delta_outside))?;
        analytic += 2.0 * w * vecmath::dot(f0, &c);
    }

    let mut finite_difference = Vec::with_capacity(steps.len());
    for &h in steps {
        if !(h > 0.0) || !(h < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "finite difference step must lie in (0, 1), got {h}"
            )));
        }
        let plus = defect_functional(
            mu,
            ball,
            spec,
            eps,
            &perturbation_factors(mu, &delta_idx, h)?,
        )?;
        let minus = defect_functional(
            mu,
            ball,
            spec,
            eps,
            &perturbation_factors(mu, &delta_idx, -h)?,
        )?;
        finite_difference.push((h, (plus - minus) / (2.0 * h)));
    }

    let floor = 1e-13 * analytic.abs().max(1e-300);
    let mut orders = Vec::new();
    for k in 0..finite_difference.len().saturating_sub(1) {
        let (h0, v0) = finite_difference[k];
        let (h1, v1) = finite_difference[k + 1];
        let e0 = (v0 - analytic).abs();
        let e1 = (v1 - analytic).abs();
        if e0 > floor && e1 > floor && h0 != h1 {
            orders.push((e0 / e1).ln() / (h0 / h1).ln());
        }
    }
    let observed_order = if orders.is_empty() {
        None
    } else {
        orders.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Some(orders[orders.len() / 2])
    };
    Ok(DerivativeReport {
        analytic,
        finite_difference,
        observed_order,
    })
}

/// Default step ladder for derivative checks: four halvings from 1e-2.
pub const DEFAULT_FD_STEPS: [f64; 4] = [1e-2, 5e-3, 2.5e-3, 1.25e-3];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::random_cloud;

    fn spec(s: f64) -> KernelSpec {
        KernelSpec::new(s, 1).unwrap()
    }

    #[test]
    fn hat_eval_and_lip_bound() {
        let psi = TestFunction::new(vec![
            HatTerm {
                center: vec![0.0],
                radius: 2.0,
                coefficient: 3.0,
            },
            HatTerm {
                center: vec![1.0],
                radius: 0.5,
                coefficient: -1.0,
            },
        ])
        .unwrap();
        assert_eq!(psi.eval(&[0.0]), 3.0);
        assert!((psi.eval(&[1.0]) - (3.0 * 0.5 - 1.0)).abs() < 1e-15);
        assert_eq!(psi.eval(&[5.0]), 0.0);
        assert!((psi.lip_bound() - (1.5 + 2.0)).abs() < 1e-15);
        let json = serde_json::to_string(&psi).unwrap();
        assert!(json.starts_with('['), "serializes as a bare list: {json}");
        let back: TestFunction = serde_json::from_str(&json).unwrap();
        assert_eq!(back.terms().len(), 2);
    }

    #[test]
    fn test_function_validation() {
        assert!(TestFunction::new(vec![]).is_err());
        assert!(TestFunction::hat(vec![0.0], 0.0, 1.0).is_err());
        assert!(TestFunction::hat(vec![0.0], -1.0, 1.0).is_err());
        assert!(TestFunction::hat(vec![f64::NAN], 1.0, 1.0).is_err());
    }

    #[test]
    fn two_atom_pairing_closed_form() {
        // Atoms at 0 and 2 with unit weights, hat centered at 2 with
        // radius 4: psi(0) = 1/2, psi(2) = 1. The antisymmetrized sum is
        // (psi(0) - psi(2)) K(2) = -2^(-s)/2, for every s.
        let mu = DiscreteMeasure::new(vec![vec![0.0], vec![2.0]], vec![1.0, 1.0]).unwrap();
        let psi = TestFunction::hat(vec![2.0], 4.0, 1.0).unwrap();
        for s_val in [0.25, 0.5, 0.75] {
            let s = spec(s_val);
            let values: Vec<f64> = vec![psi.eval(&[0.0]), psi.eval(&[2.0])];
            let (direct, antisym) = pairing_values(&mu, &s, 1.0, &values).unwrap();
            let expected = -(2f64).powf(-s_val) / 2.0;
            assert!((antisym[0] - expected).abs() < 1e-15, "s={s_val}");
            assert!((direct[0] - expected).abs() < 1e-15, "s={s_val}");
        }
    }

    #[test]
    fn pairing_modes_agree_on_random_clouds() {
        let mu = random_cloud(3, 80, 2, 1.0).unwrap();
        let s = spec(0.5);
        let psi = TestFunction::new(vec![
            HatTerm {
                center: vec![0.3, 0.3],
                radius: 0.8,
                coefficient: 1.0,
            },
            HatTerm {
                center: vec![0.7, 0.6],
                radius: 0.5,
                coefficient: -2.0,
            },
        ])
        .unwrap();
        let values: Vec<f64> = (0..mu.len()).map(|i| psi.eval(mu.point(i))).collect();
        for eps in [0.05, 0.2] {
            let (direct, antisym) = pairing_values(&mu, &s, eps, &values).unwrap();
            let scale = direct
                .iter()
                .chain(&antisym)
                .fold(0.0f64, |m, v| m.max(v.abs()));
            for c in 0..2 {
                assert!(
                    (direct[c] - antisym[c]).abs() <= 1e-12 * scale.max(1.0),
                    "eps={eps} component {c}: {} vs {}",
                    direct[c],
                    antisym[c]
                );
            }
        }
    }

    #[test]
    fn antisymmetrized_pairing_ignores_constant_shifts() {
        let mu = random_cloud(11, 40, 2, 1.0).unwrap();
        let s = spec(0.6);

        // Exactly representable data and shift: the shifted differences
        // are bitwise the original ones, so the antisymmetrized values
        // must match bitwise.
        let ints: Vec<f64> = (0..mu.len()).map(|i| (i % 7) as f64).collect();
        let ints_shifted: Vec<f64> = ints.iter().map(|v| v + 1024.0).collect();
        let (_, a0) = pairing_values(&mu, &s, 0.1, &ints).unwrap();
        let (_, a1) = pairing_values(&mu, &s, 0.1, &ints_shifted).unwrap();
        assert_eq!(a0, a1);

        // Generic float shift: the antisymmetrized drift stays at the
        // rounding level of the shifted inputs; the direct route is
        // looser but still bounded by the exact pair cancellation.
        let values: Vec<f64> = (0..mu.len()).map(|i| mu.point(i)[0]).collect();
        let shifted: Vec<f64> = values.iter().map(|v| v + 17.3).collect();
        let (d0, a0) = pairing_values(&mu, &s, 0.1, &values).unwrap();
        let (d1, a1) = pairing_values(&mu, &s, 0.1, &shifted).unwrap();
        for c in 0..2 {
            assert!(
                (a0[c] - a1[c]).abs() <= 1e-12,
                "antisymmetrized drift {}",
                (a0[c] - a1[c]).abs()
            );
            assert!(
                (d0[c] - d1[c]).abs() <= 1e-9,
                "direct drift {}",
                (d0[c] - d1[c]).abs()
            );
        }
    }

    #[test]
    fn pairing_mean_adjustment_flag() {
        let mu = DiscreteMeasure::new(vec![vec![0.0], vec![2.0]], vec![1.0, 1.0]).unwrap();
        let s = spec(0.5);
        let lopsided = TestFunction::hat(vec![2.0], 4.0, 1.0).unwrap();
        let r = reflectionless_pairing(&mu, &s, 1.0, &lopsided, PairingMode::Antisymmetrized)
            .unwrap();
        assert!(r.mean_adjusted);
        assert!((r.weighted_mean - 0.75).abs() < 1e-15);
        // Centering shifts psi by a constant, so the antisymmetrized
        // value is untouched.
        assert!((r.value[0] + (2f64).powf(-0.5) / 2.0).abs() < 1e-15);

        // A balanced combination passes the precondition untouched.
        let balanced = TestFunction::new(vec![
            HatTerm {
                center: vec![0.0],
                radius: 1.0,
                coefficient: 1.0,
            },
            HatTerm {
                center: vec![2.0],
                radius: 1.0,
                coefficient: -1.0,
            },
        ])
        .unwrap();
        let r = reflectionless_pairing(&mu, &s, 1.0, &balanced, PairingMode::Direct).unwrap();
        assert!(!r.mean_adjusted);
        assert_eq!(r.weighted_mean, 0.0);
    }

    #[test]
    fn exterior_field_is_mean_zero_and_matches_hand_sum() {
        // Atoms 0, 1 inside the ball, atom 3 outside with weight 2.
        let mu = DiscreteMeasure::new(
            vec![vec![0.0], vec![1.0], vec![3.0]],
            vec![1.0, 0.5, 2.0],
        )
        .unwrap();
        let s = spec(0.5);
        let ball = Ball::new(vec![0.5], 0.75).unwrap();
        let f = exterior_field(&mu, &ball, &s, 0.25).unwrap();
        assert_eq!(f.indices, vec![0, 1]);
        // Raw values: at 0 the source 3 sits at distance 3, at 1 it sits
        // at distance 2, kernel 1/sqrt(d) each, weight 2.
        let a0 = 2.0 / 3f64.sqrt();
        let a1 = 2.0 / 2f64.sqrt();
        let mean = (1.0 * a0 + 0.5 * a1) / 1.5;
        assert!((f.mean[0] - mean).abs() < 1e-15);
        assert!((f.values[0][0] - (a0 - mean)).abs() < 1e-15);
        assert!((f.values[1][0] - (a1 - mean)).abs() < 1e-15);
        let wsum: f64 = f
            .indices
            .iter()
            .zip(&f.values)
            .map(|(&i, v)| mu.weight(i) * v[0])
            .sum();
        assert!(wsum.abs() < 1e-15);
    }

    #[test]
    fn defect_matches_hand_variance() {
        let mu = DiscreteMeasure::new(
            vec![vec![0.0], vec![1.0], vec![3.0]],
            vec![1.0, 0.5, 2.0],
        )
        .unwrap();
        let s = spec(0.5);
        let ball = Ball::new(vec![0.5], 0.75).unwrap();
        let d = defect_functional(&mu, &ball, &s, 0.25, &[1.0; 3]).unwrap();
        let a0 = 2.0 / 3f64.sqrt();
        let a1 = 2.0 / 2f64.sqrt();
        let mean = (1.0 * a0 + 0.5 * a1) / 1.5;
        let expected = 1.0 * (a0 - mean).powi(2) + 0.5 * (a1 - mean).powi(2);
        assert!((d - expected).abs() < 1e-15);
    }

    #[test]
    fn defect_rejects_bad_factors_and_empty_balls() {
        let mu = DiscreteMeasure::new(vec![vec![0.0], vec![1.0]], vec![1.0, 1.0]).unwrap();
        let s = spec(0.5);
        let ball = Ball::new(vec![0.25], 0.3).unwrap();
        assert!(defect_functional(&mu, &ball, &s, 0.1, &[1.0]).is_err());
        assert!(defect_functional(&mu, &ball, &s, 0.1, &[1.0, -0.5]).is_err());
        let far = Ball::new(vec![10.0], 0.5).unwrap();
        assert!(matches!(
            defect_functional(&mu, &far, &s, 0.1, &[1.0, 1.0]),
            Err(Error::EmptyBall(_))
        ));
        // Factors may zero out the ball; that is an empty ball too.
        assert!(matches!(
            defect_functional(&mu, &ball, &s, 0.1, &[0.0, 1.0]),
            Err(Error::EmptyBall(_))
        ));
    }

    #[test]
    fn curve_rejects_parameters_at_or_below_minus_one() {
        let mu = random_cloud(5, 20, 1, 1.0).unwrap();
        let s = spec(0.5);
        let ball = Ball::new(vec![0.5], 0.3).unwrap();
        let r = perturbation_curve(&mu, &ball, &Region::All, &s, 1e-3, &[-1.0]);
        assert!(r.is_err());
        let r = perturbation_curve(&mu, &ball, &Region::All, &s, 1e-3, &[-1.5]);
        assert!(r.is_err());
    }

    #[test]
    fn curve_matches_closed_cubic_when_delta_covers_ball() {
        // With Delta containing every ball atom the uniform (1+t) factor
        // cancels from the mean, and the curve is exactly
        // (1+t) (v0 + 2 t v1 + t^2 v2) with v0, v1, v2 the variance-form
        // coefficients of the linear-in-t field.
        let mu = random_cloud(29, 50, 2, 1.0).unwrap();
        let s = spec(0.5);
        let ball = Ball::new(vec![0.5, 0.5], 0.3).unwrap();
        let eps = 1e-3;
        let delta_ball = Ball::new(vec![0.45, 0.5], 0.65).unwrap();
        let delta = Region::Ball(delta_ball.clone());
        let delta_idx = delta.resolve(&mu).unwrap();
        let field = exterior_field(&mu, &ball, &s, eps).unwrap();
        let in_ball = {
            let mut f = vec![false; mu.len()];
            for &i in &field.indices {
                f[i] = true;
            }
            f
        };
        let in_delta = {
            let mut f = vec![false; mu.len()];
            for &i in &delta_idx {
                f[i] = true;
            }
            f
        };
        assert!(
            field.indices.iter().all(|&i| in_delta[i]),
            "perturbation must cover the ball for the cubic form"
        );
        assert!(
            (0..mu.len()).any(|i| !in_delta[i]),
            "perturbation must not cover everything"
        );
        let delta_outside: Vec<usize> = delta_idx
            .iter()
            .copied()
            .filter(|&i| !in_ball[i])
            .collect();
        let ones = vec![1.0; mu.len()];
        let mass: f64 = field.indices.iter().map(|&i| mu.weight(i)).sum();
        // Center the perturbation field the same way.
        let c_rows: Vec<Vec<f64>> = field
            .indices
            .iter()
            .map(|&iy| {
                transform_point_coefs(&mu, &s, eps, mu.point(iy), &ones, Some(&delta_outside))
                    .unwrap()
            })
            .collect();
        let mut c_mean = vec![0.0; mu.dim()];
        for (&iy, row) in field.indices.iter().zip(&c_rows) {
            for c in 0..mu.dim() {
                c_mean[c] += mu.weight(iy) * row[c] / mass;
            }
        }
        let mut v0 = 0.0;
        let mut v1 = 0.0;
        let mut v2 = 0.0;
        for ((&iy, f0), c_row) in field.indices.iter().zip(&field.values).zip(&c_rows) {
            let w = mu.weight(iy);
            let c_centered: Vec<f64> =
                c_row.iter().zip(&c_mean).map(|(v, m)| v - m).collect();
            v0 += w * vecmath::dot(f0, f0);
            v1 += w * vecmath::dot(f0, &c_centered);
            v2 += w * vecmath::dot(&c_centered, &c_centered);
        }
        let ts = [-0.5, -0.1, 0.3, 1.0, 2.0];
        let curve = perturbation_curve(&mu, &ball, &delta, &s, eps, &ts).unwrap();
        for (t, g) in curve {
            let closed = (1.0 + t) * (v0 + 2.0 * t * v1 + t * t * v2);
            assert!(
                (g - closed).abs() <= 1e-12 * closed.abs().max(v0),
                "t={t}: curve {g} vs closed form {closed}"
            );
        }
    }

    #[test]
    fn derivative_converges_at_second_order() {
        let mu = random_cloud(59, 60, 2, 1.0).unwrap();
        let s = spec(0.5);
        let ball = Ball::new(vec![0.5, 0.5], 0.35).unwrap();
        let delta = Region::Ball(Ball::new(vec![0.6, 0.4], 0.4).unwrap());
        let rep =
            variational_derivative(&mu, &ball, &delta, &s, 1e-3, &DEFAULT_FD_STEPS).unwrap();
        let order = rep.observed_order.expect("errors above rounding floor");
        assert!(
            (1.7..=2.3).contains(&order),
            "observed order {order}, analytic {}",
            rep.analytic
        );
        let (_, fd_finest) = *rep.finite_difference.last().unwrap();
        assert!(
            (fd_finest - rep.analytic).abs() <= 1e-4 * rep.analytic.abs().max(1.0),
            "fd {fd_finest} vs analytic {}",
            rep.analytic
        );
    }

    #[test]
    fn invisible_perturbations_differentiate_to_exact_zero() {
        // Delta atoms sit outside the ball but within the cutoff of every
        // ball atom, so no sum over the ball ever sees them: the curve is
        // flat and both the analytic value and the differences are
        // bitwise zero.
        let mu = DiscreteMeasure::new(
            vec![vec![0.0, 0.0], vec![0.2, 0.0], vec![0.5, 0.1], vec![5.0, 5.0]],
            vec![1.0, 1.0, 1.0, 1.0],
        )
        .unwrap();
        let s = spec(0.5);
        let ball = Ball::new(vec![0.1, 0.0], 0.25).unwrap();
        let delta = Region::Indices(vec![2]);
        let rep = variational_derivative(&mu, &ball, &delta, &s, 1.0, &DEFAULT_FD_STEPS).unwrap();
        assert_eq!(rep.analytic, 0.0);
        for &(_, fd) in &rep.finite_difference {
            assert_eq!(fd, 0.0);
        }
        assert!(rep.observed_order.is_none());

        let rep =
            variational_derivative(&mu, &ball, &Region::Indices(vec![]), &s, 1.0, &[1e-2])
                .unwrap();
        assert_eq!(rep.analytic, 0.0);
        assert_eq!(rep.finite_difference[0].1, 0.0);
    }
}

//! Small fixed-purpose vector helpers shared by the hot loops. Norms are
//! computed with a max-magnitude rescale so that extreme coordinate scales
//! neither overflow nor underflow.

/// Euclidean norm of `x`, stable under rescaling. Returns 0 for the zero
/// vector.
pub fn norm(x: &[f64]) -> f64 {
    let mut m = 0.0f64;
    for &c in x {
        let a = c.abs();
        if a > m {
            m = a;
        }
    }
    if m == 0.0 {
        return 0.0;
    }
    let mut sum = 0.0;
    for &c in x {
        let u = c / m;
        sum += u * u;
    }
    m * sum.sqrt()
}

/// Euclidean distance between `a` and `b` without allocating the difference.
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut m = 0.0f64;
    for i in 0..a.len() {
        let d = (a[i] - b[i]).abs();
        if d > m {
            m = d;
        }
    }
    if m == 0.0 {
        return 0.0;
    }
    let mut sum = 0.0;
    for i in 0..a.len() {
        let u = (a[i] - b[i]) / m;
        sum += u * u;
    }
    m * sum.sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut sum = 0.0;
    for i in 0..a.len() {
        sum += a[i] * b[i];
    }
    sum
}

/// True when `value` lies within 4 ulp of `reference`. Used to detect
/// truncation ties between atom separations and the cutoff radius.
pub fn within_4_ulp(value: f64, reference: f64) -> bool {
    (value - reference).abs() <= 4.0 * f64::EPSILON * reference.abs()
}

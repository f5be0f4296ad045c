//! The odd-power Riesz-type kernel family. For a parameter pair `(s, n)`
//! with `0 < s < 1` and odd `n >= 1`, the kernel sends a nonzero vector
//! `x` in `R^d` to the d-vector with components
//!
//! ```text
//!     K_i(x) = x_i^n / |x|^(n+s)
//! ```
//!
//! `n = 1` gives `x / |x|^(1+s)`, the gradient-shaped kernel whose pairing
//! with a measure is the s-Riesz transform. The components are evaluated
//! as `(x_i/|x|)^n * |x|^(-s)`: the unit direction carries the integer
//! power (exact negation symmetry, no overflow for extreme scales) and the
//! single fractional power `|x|^(-s)` is the only exp/log-backed operation.

use crate::error::{Error, Result};
use crate::vecmath;
use serde::{Deserialize, Serialize};

/// Kernel parameters: homogeneity degree `s` in (0,1) and odd exponent `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub s: f64,
    pub n: u32,
}

impl KernelSpec {
    pub fn new(s: f64, n: u32) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) || !s.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "kernel exponent s must lie strictly between 0 and 1, got {s}"
            )));
        }
        if n == 0 || n % 2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "kernel power n must be an odd positive integer, got {n}"
            )));
        }
        Ok(KernelSpec { s, n })
    }

    /// Writes `K(x)` into `out`. Errors on the zero vector, where the
    /// kernel has no finite value.
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        debug_assert_eq!(x.len(), out.len());
        let r = vecmath::norm(x);
        if r == 0.0 {
            return Err(Error::ZeroSeparation);
        }
        let scale = r.powf(-self.s);
        let n = self.n as i32;
        for i in 0..x.len() {
            out[i] = (x[i] / r).powi(n) * scale;
        }
        Ok(())
    }

    /// Allocating variant of [`eval_into`](Self::eval_into).
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; x.len()];
        self.eval_into(x, &mut out)?;
        Ok(out)
    }

    /// Dot product `K(a - base) . K(b - base)` without allocating. The
    /// norms are taken first; each component pair is then accumulated
    /// directly. Errors when either difference vanishes.
    pub fn eval_pair_dot(&self, base: &[f64], a: &[f64], b: &[f64]) -> Result<f64> {
        let ra = vecmath::dist(a, base);
        let rb = vecmath::dist(b, base);
        if ra == 0.0 || rb == 0.0 {
            return Err(Error::ZeroSeparation);
        }
        let scale = ra.powf(-self.s) * rb.powf(-self.s);
        let n = self.n as i32;
        let mut acc = 0.0;
        for i in 0..base.len() {
            let ua = (a[i] - base[i]) / ra;
            let ub = (b[i] - base[i]) / rb;
            acc += ua.powi(n) * ub.powi(n);
        }
        Ok(acc * scale)
    }
}

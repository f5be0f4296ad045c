//! Tree-accelerated evaluation of the truncated transform.
//!
//! Atoms are organized in a 2^d-ary box tree. A cell whose every point
//! lies strictly beyond the cutoff and whose angular size `cell_size /
//! dist` is below the opening threshold `theta_mac` is replaced by its
//! monopole: total weight at the weighted centroid. Cells straddling the
//! cutoff sphere are always opened, so the strict-truncation and tie
//! semantics of the naive sum are preserved exactly; leaves are always
//! summed atom by atom.
//!
//! Per target, the error of one accepted monopole is bounded by the cell
//! diameter times the kernel's local Lipschitz constant, giving a
//! componentwise absolute error of order
//! `theta_mac * sum over far cells of w_cell / dist^s`; the constant
//! degrades as `s` approaches 1. Contributions are keyed by the smallest
//! atom index they summarize and added in key order, which makes the
//! result independent of the traversal history and, when every cell is
//! opened (`theta_mac` tiny), bitwise identical to the naive field.

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::measure::DiscreteMeasure;
use crate::transform::{accumulate_kernel_term, VectorField};
use crate::vecmath;
use rayon::prelude::*;

const LEAF_CAP: usize = 8;
const MAX_DEPTH: usize = 64;

struct Node {
    lo: Vec<f64>,
    hi: Vec<f64>,
    weight: f64,
    centroid: Vec<f64>,
    /// Longest box side, the `cell_size` of the opening criterion.
    size: f64,
    /// Smallest atom index under this node; the deterministic sort key.
    first_atom: u32,
    kind: NodeKind,
}

enum NodeKind {
    Leaf(Vec<u32>),
    Internal(Vec<Node>),
}

fn build(mu: &DiscreteMeasure, mut atoms: Vec<u32>, depth: usize) -> Node {
    let dim = mu.dim();
    atoms.sort_unstable();
    let mut lo = mu.point(atoms[0] as usize).to_vec();
    let mut hi = lo.clone();
    let mut weight = 0.0;
    let mut centroid = vec![0.0; dim];
    for &a in &atoms {
        let p = mu.point(a as usize);
        let w = mu.weight(a as usize);
        weight += w;
        for c in 0..dim {
            lo[c] = lo[c].min(p[c]);
            hi[c] = hi[c].max(p[c]);
            centroid[c] += w * p[c];
        }
    }
    if weight > 0.0 {
        for c in 0..dim {
            centroid[c] /= weight;
        }
    } else {
        for c in 0..dim {
            centroid[c] = 0.5 * (lo[c] + hi[c]);
        }
    }
    let size = lo
        .iter()
        .zip(&hi)
        .map(|(a, b)| b - a)
        .fold(0.0f64, f64::max);
    let first_atom = atoms[0];
    if atoms.len() <= LEAF_CAP || depth >= MAX_DEPTH {
        return Node {
            lo,
            hi,
            weight,
            centroid,
            size,
            first_atom,
            kind: NodeKind::Leaf(atoms),
        };
    }
    let mid: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
    let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); 1 << dim];
    for &a in &atoms {
        let p = mu.point(a as usize);
        let mut octant = 0usize;
        for c in 0..dim {
            if p[c] >= mid[c] {
                octant |= 1 << c;
            }
        }
        buckets[octant].push(a);
    }
    // A midpoint split can fail to separate degenerate clusters; fall
    // back to a leaf rather than recurse forever.
    if buckets.iter().filter(|b| !b.is_empty()).count() <= 1 {
        return Node {
            lo,
            hi,
            weight,
            centroid,
            size,
            first_atom,
            kind: NodeKind::Leaf(atoms),
        };
    }
    let children: Vec<Node> = buckets
        .into_iter()
        .filter(|b| !b.is_empty())
        .map(|b| build(mu, b, depth + 1))
        .collect();
    Node {
        lo,
        hi,
        weight,
        centroid,
        size,
        first_atom,
        kind: NodeKind::Internal(children),
    }
}

/// Distance from `x` to the closest point of the box.
fn box_min_dist(lo: &[f64], hi: &[f64], x: &[f64]) -> f64 {
    let mut acc = 0.0;
    for c in 0..x.len() {
        let d = (lo[c] - x[c]).max(0.0).max(x[c] - hi[c]);
        acc += d * d;
    }
    acc.sqrt()
}

/// Distance from `x` to the farthest point of the box.
fn box_max_dist(lo: &[f64], hi: &[f64], x: &[f64]) -> f64 {
    let mut acc = 0.0;
    for c in 0..x.len() {
        let d = (x[c] - lo[c]).abs().max((x[c] - hi[c]).abs());
        acc += d * d;
    }
    acc.sqrt()
}

struct Scratch {
    keys: Vec<u32>,
    data: Vec<f64>,
    order: Vec<u32>,
}

fn visit(
    node: &Node,
    mu: &DiscreteMeasure,
    spec: &KernelSpec,
    eps: f64,
    theta_mac: f64,
    x: &[f64],
    out: &mut Scratch,
) -> Result<()> {
    let dim = x.len();
    let margin = 4.0 * f64::EPSILON * eps;
    let max_dist = box_max_dist(&node.lo, &node.hi, x);
    // Entirely inside the cutoff with room to spare: every atom is
    // excluded and no tie is possible.
    if max_dist < eps && eps - max_dist > margin {
        return Ok(());
    }
    let min_dist = box_min_dist(&node.lo, &node.hi, x);
    let clear_of_cutoff = min_dist > eps && min_dist - eps > margin;
    if let NodeKind::Internal(children) = &node.kind {
        if clear_of_cutoff {
            let d = vecmath::dist(&node.centroid, x);
            if d > 0.0 && node.size / d < theta_mac {
                if node.weight > 0.0 {
                    out.keys.push(node.first_atom);
                    let start = out.data.len();
                    out.data.resize(start + dim, 0.0);
                    accumulate_kernel_term(
                        spec,
                        x,
                        &node.centroid,
                        d,
                        node.weight,
                        &mut out.data[start..],
                    );
                }
                return Ok(());
            }
        }
        for child in children {
            visit(child, mu, spec, eps, theta_mac, x, out)?;
        }
        return Ok(());
    }
    let NodeKind::Leaf(atoms) = &node.kind else {
        unreachable!()
    };
    for &a in atoms {
        let p = mu.point(a as usize);
        let d = vecmath::dist(p, x);
        if vecmath::within_4_ulp(d, eps) {
            return Err(Error::TruncationTie { distance: d, eps });
        }
        if d > eps {
            out.keys.push(a);
            let start = out.data.len();
            out.data.resize(start + dim, 0.0);
            accumulate_kernel_term(spec, x, p, d, mu.weight(a as usize), &mut out.data[start..]);
        }
    }
    Ok(())
}

/// Tree-accelerated counterpart of `transform_field` with unit
/// coefficients: row `i` approximates `R_eps(1)(x_i)` with monopole
/// summaries of far cells. `theta_mac` in (0,1) trades accuracy for
/// speed; driving it toward 0 reproduces the naive field bit for bit.
pub fn tree_transform_field(
    mu: &DiscreteMeasure,
    spec: &KernelSpec,
    eps: f64,
    theta_mac: f64,
) -> Result<VectorField> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "truncation radius eps must be positive and finite, got {eps}"
        )));
    }
    if !(theta_mac > 0.0 && theta_mac < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "opening threshold theta_mac must lie in (0,1), got {theta_mac}"
        )));
    }
    let dim = mu.dim();
    let root = build(mu, (0..mu.len() as u32).collect(), 0);
    let rows: Vec<Result<Vec<f64>>> = (0..mu.len())
        .into_par_iter()
        .map_init(
            || Scratch {
                keys: Vec::new(),
                data: Vec::new(),
                order: Vec::new(),
            },
            |scratch, i| {
                scratch.keys.clear();
                scratch.data.clear();
                visit(&root, mu, spec, eps, theta_mac, mu.point(i), scratch)?;
                scratch.order.clear();
                scratch.order.extend(0..scratch.keys.len() as u32);
                scratch
                    .order
                    .sort_unstable_by_key(|&k| scratch.keys[k as usize]);
                let mut row = vec![0.0; dim];
                for &k in &scratch.order {
                    let base = k as usize * dim;
                    for c in 0..dim {
                        row[c] += scratch.data[base + c];
                    }
                }
                Ok(row)
            },
        )
        .collect();
    let mut values = Vec::with_capacity(mu.len());
    for row in rows {
        values.push(row?);
    }
    Ok(VectorField { values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{cantor_measure, random_cloud, CantorSpec};
    use crate::transform::transform_field;

    fn max_scale_relative_deviation(a: &VectorField, b: &VectorField) -> f64 {
        let scale = b
            .values
            .iter()
            .flatten()
            .fold(0.0f64, |m, &v| m.max(v.abs()));
        let diff = a
            .values
            .iter()
            .zip(&b.values)
            .flat_map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| (x - y).abs()))
            .fold(0.0f64, f64::max);
        diff / scale
    }

    #[test]
    fn tiny_theta_reproduces_naive_bitwise() {
        let mu = random_cloud(21, 300, 2, 1.0).unwrap();
        let spec = KernelSpec::new(0.5, 1).unwrap();
        let eps = 0.03;
        let ones = vec![1.0; mu.len()];
        let naive = transform_field(&mu, &spec, eps, &ones).unwrap();
        let tree = tree_transform_field(&mu, &spec, eps, 1e-9).unwrap();
        assert_eq!(naive, tree);
    }

    #[test]
    fn single_far_atom_is_exact() {
        let mu = DiscreteMeasure::new(vec![vec![0.0], vec![5.0]], vec![1.0, 1.0]).unwrap();
        let spec = KernelSpec::new(0.5, 1).unwrap();
        let naive = transform_field(&mu, &spec, 1.0, &[1.0, 1.0]).unwrap();
        let tree = tree_transform_field(&mu, &spec, 1.0, 0.9).unwrap();
        assert_eq!(naive, tree);
    }

    #[test]
    fn moderate_theta_stays_close_on_cantor() {
        let spec = CantorSpec {
            s: 0.5,
            generations: 8,
            branching: 2,
            total_mass: 1.0,
        };
        let mu = cantor_measure(&spec).unwrap();
        let kspec = KernelSpec::new(0.5, 1).unwrap();
        let eps = 1e-4;
        let ones = vec![1.0; mu.len()];
        let naive = transform_field(&mu, &kspec, eps, &ones).unwrap();
        let tree = tree_transform_field(&mu, &kspec, eps, 0.3).unwrap();
        let dev = max_scale_relative_deviation(&tree, &naive);
        assert!(dev <= 1e-2, "deviation {dev}");
        let tighter = tree_transform_field(&mu, &kspec, eps, 0.05).unwrap();
        let dev_tight = max_scale_relative_deviation(&tighter, &naive);
        assert!(dev_tight <= dev);
    }

    #[test]
    fn straddling_cells_preserve_tie_detection() {
        // Atom 1 sits at distance exactly eps from atom 0; the cell
        // containing it straddles the cutoff sphere and must be opened,
        // surfacing the tie error just like the naive sum.
        let mu = DiscreteMeasure::new(
            vec![vec![0.0], vec![0.25], vec![3.0], vec![3.1]],
            vec![1.0; 4],
        )
        .unwrap();
        let spec = KernelSpec::new(0.5, 1).unwrap();
        let r = tree_transform_field(&mu, &spec, 0.25, 0.5);
        assert!(matches!(r, Err(Error::TruncationTie { .. })));
    }

    #[test]
    fn rejects_bad_theta() {
        let mu = random_cloud(1, 10, 1, 1.0).unwrap();
        let spec = KernelSpec::new(0.5, 1).unwrap();
        assert!(tree_transform_field(&mu, &spec, 0.1, 0.0).is_err());
        assert!(tree_transform_field(&mu, &spec, 0.1, 1.0).is_err());
    }
}

//! Affine parameterization of all martingale measures on a finite tree.
//!
//! At a node with successor prices `s_1..s_m` and price `s_0` the
//! conditional martingale laws are `{q >= 0 : Σ q = 1, Σ q s = s_0}`. We
//! write that affine set as `q = q_p + Σ_j θ_j b_j`, where `q_p` is the
//! Euclidean projection of the physical law onto the constraint plane and
//! `b_j` is a null-space basis obtained from the reduced row echelon form,
//! each vector scaled so that its first non-zero entry equals `-1`. The
//! global parameter is the concatenation of the per-node parameters.

use crate::error::{MirmError, Result};
use crate::finite::market::{price_tol, FiniteTreeMarket};
use crate::risk::InformationTree;

const SNAP: f64 = 1e-14;
/// Slack allowed when checking that a parameter lies in the closed domain.
pub const CLOSURE_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct NodeFamily {
    /// Offset of this node's parameters in the global vector.
    pub offset: usize,
    pub particular: Vec<f64>,
    pub basis: Vec<Vec<f64>>,
}

impl NodeFamily {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Conditional successor probabilities for the global parameter `theta`.
    pub fn probs(&self, theta: &[f64]) -> Vec<f64> {
        let mut q = self.particular.clone();
        for (j, b) in self.basis.iter().enumerate() {
            let t = theta[self.offset + j];
            for (qi, bi) in q.iter_mut().zip(b) {
                *qi += t * bi;
            }
        }
        q
    }
}

#[derive(Debug, Clone)]
pub struct MartingaleMeasureFamily {
    /// Per internal node, level by level (levels `0..depth`).
    nodes: Vec<Vec<NodeFamily>>,
    dim: usize,
    interior: Vec<f64>,
    /// For each global coordinate, the (level, node) that owns it.
    owner: Vec<(usize, usize)>,
}

impl MartingaleMeasureFamily {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// A parameter at which every edge probability is strictly positive.
    pub fn interior_point(&self) -> &[f64] {
        &self.interior
    }

    pub fn node(&self, depth: usize, index: usize) -> &NodeFamily {
        &self.nodes[depth][index]
    }

    fn check_len(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dim {
            return Err(MirmError::Domain(format!(
                "parameter has dimension {}, family has {}",
                theta.len(),
                self.dim
            )));
        }
        Ok(())
    }

    /// Smallest edge probability at `theta`.
    pub fn min_edge_prob(&self, theta: &[f64]) -> f64 {
        self.nodes
            .iter()
            .flatten()
            .flat_map(|n| n.probs(theta))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn in_open_domain(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim && self.min_edge_prob(theta) > 0.0
    }

    /// Accepts points of the closed domain (up to rounding); rejects others.
    pub fn check_closure(&self, theta: &[f64]) -> Result<()> {
        self.check_len(theta)?;
        let m = self.min_edge_prob(theta);
        if m < -CLOSURE_TOL {
            return Err(MirmError::Domain(format!(
                "parameter {theta:?} lies outside the martingale family (edge probability {m})"
            )));
        }
        Ok(())
    }

    /// Interval of admissible values for coordinate `j` with the other
    /// coordinates held at `theta` (closed domain).
    pub fn coordinate_interval(&self, theta: &[f64], j: usize) -> (f64, f64) {
        let (d, i) = self.owner[j];
        let node = &self.nodes[d][i];
        let b = &node.basis[j - node.offset];
        let q = node.probs(theta);
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for (qi, bi) in q.iter().zip(b) {
            let c = qi - theta[j] * bi;
            if *bi > 0.0 {
                lo = lo.max(-c / bi);
            } else if *bi < 0.0 {
                hi = hi.min(-c / bi);
            }
        }
        (lo, hi)
    }

    /// Martingale-measure probabilities of the depth-`level` atoms.
    pub fn atom_probs(&self, theta: &[f64], level: usize) -> Vec<f64> {
        let mut acc = vec![1.0];
        for d in 0..level {
            let mut next = Vec::with_capacity(acc.len() * 2);
            for (i, &w) in acc.iter().enumerate() {
                for q in self.nodes[d][i].probs(theta) {
                    next.push(w * q.max(0.0));
                }
            }
            acc = next;
        }
        acc
    }

    /// Builds the family for an arbitrage-free market.
    pub fn new(market: &FiniteTreeMarket) -> Result<Self> {
        let mut nodes = Vec::new();
        let mut owner = Vec::new();
        let mut interior = Vec::new();
        let mut offset = 0;
        for d in 0..market.depth() {
            let mut level = Vec::with_capacity(market.width(d));
            for i in 0..market.width(d) {
                let parent = market.node(d, i).price;
                let kids = market.children(d, i);
                let prices: Vec<f64> = kids.iter().map(|c| c.price).collect();
                let phys: Vec<f64> = kids.iter().map(|c| c.prob).collect();
                let (particular, basis) = node_parameterization(parent, &prices, &phys)?;
                let inner = interior_law(parent, &prices)?;
                let coords = coordinates(&particular, &basis, &inner);
                for &c in &coords[..basis.len()] {
                    owner.push((d, i));
                    interior.push(c);
                }
                level.push(NodeFamily { offset, particular, basis });
                offset = interior.len();
            }
            nodes.push(level);
        }
        Ok(Self { nodes, dim: offset, interior, owner })
    }

    /// The closed interval of a one-dimensional family.
    pub fn interval_1d(&self) -> Result<(f64, f64)> {
        if self.dim != 1 {
            return Err(MirmError::Domain(format!("family has dimension {}", self.dim)));
        }
        Ok(self.coordinate_interval(&self.interior, 0))
    }
}

fn snap(v: f64) -> f64 {
    if v.abs() < SNAP {
        0.0
    } else {
        v
    }
}

/// Particular solution and null-space basis for one node's constraints.
fn node_parameterization(parent: f64, prices: &[f64], phys: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let m = prices.len();
    // Augmented rows [A | b] for Σq = 1 and Σ q s = s0.
    let mut rows: Vec<Vec<f64>> = vec![
        std::iter::repeat_n(1.0, m).chain([1.0]).collect(),
        prices.iter().copied().chain([parent]).collect(),
    ];
    let pivots = rref(&mut rows, m);
    let rank = pivots.len();
    for r in &rows[rank..] {
        if r[m].abs() > price_tol(parent) {
            return Err(MirmError::Model("inconsistent martingale constraints".into()));
        }
    }
    let rows = &rows[..rank];

    // Projection of the physical law onto {R q = b'}.
    let resid: Vec<f64> = rows
        .iter()
        .map(|r| r[m] - r[..m].iter().zip(phys).map(|(a, p)| a * p).sum::<f64>())
        .collect();
    let gram: Vec<Vec<f64>> = rows
        .iter()
        .map(|a| rows.iter().map(|b| a[..m].iter().zip(&b[..m]).map(|(x, y)| x * y).sum()).collect())
        .collect();
    let lambda = solve_small(&gram, &resid)?;
    let particular: Vec<f64> = (0..m)
        .map(|k| phys[k] + rows.iter().zip(&lambda).map(|(r, l)| r[k] * l).sum::<f64>())
        .collect();

    let mut basis = Vec::new();
    for free in (0..m).filter(|c| !pivots.contains(c)) {
        let mut v = vec![0.0; m];
        v[free] = 1.0;
        for (r, &pc) in rows.iter().zip(&pivots) {
            v[pc] = -r[free];
        }
        let first = *v.iter().find(|x| **x != 0.0).expect("unit entry");
        for x in &mut v {
            *x = snap(-*x / first);
        }
        basis.push(v);
    }
    Ok((particular, basis))
}

/// Reduced row echelon form over the first `cols` columns; returns pivot columns.
fn rref(rows: &mut [Vec<f64>], cols: usize) -> Vec<usize> {
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows.len() {
            break;
        }
        let (best, val) = (r..rows.len())
            .map(|k| (k, rows[k][c].abs()))
            .fold((r, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if val < 1e-12 {
            continue;
        }
        rows.swap(r, best);
        let p = rows[r][c];
        for x in rows[r].iter_mut() {
            *x /= p;
        }
        for k in 0..rows.len() {
            if k != r {
                let f = rows[k][c];
                if f != 0.0 {
                    let pivot_row = rows[r].clone();
                    for (x, y) in rows[k].iter_mut().zip(&pivot_row) {
                        *x = snap(*x - f * y);
                    }
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

fn solve_small(a: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>> {
    match a.len() {
        0 => Ok(vec![]),
        1 => Ok(vec![b[0] / a[0][0]]),
        2 => {
            let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
            if det.abs() < 1e-300 {
                return Err(MirmError::Numerical("singular projection system".into()));
            }
            Ok(vec![
                (b[0] * a[1][1] - a[0][1] * b[1]) / det,
                (a[0][0] * b[1] - a[1][0] * b[0]) / det,
            ])
        }
        _ => unreachable!("at most two constraints per node"),
    }
}

/// A strictly positive martingale law: the average of all two-point laws
/// straddling the parent price, plus point masses on successors that
/// coincide with it.
fn interior_law(parent: f64, prices: &[f64]) -> Result<Vec<f64>> {
    let tol = price_tol(parent);
    let m = prices.len();
    let mut acc = vec![0.0; m];
    let mut count = 0usize;
    for i in 0..m {
        if (prices[i] - parent).abs() <= tol {
            acc[i] += 1.0;
            count += 1;
        }
    }
    for i in (0..m).filter(|&i| prices[i] < parent - tol) {
        for j in (0..m).filter(|&j| prices[j] > parent + tol) {
            let qi = (prices[j] - parent) / (prices[j] - prices[i]);
            acc[i] += qi;
            acc[j] += 1.0 - qi;
            count += 1;
        }
    }
    if count == 0 {
        return Err(MirmError::Model("node admits no martingale law".into()));
    }
    Ok(acc.into_iter().map(|v| v / count as f64).collect())
}

/// Least-squares coordinates of `target - particular` in `basis`.
fn coordinates(particular: &[f64], basis: &[Vec<f64>], target: &[f64]) -> Vec<f64> {
    let k = basis.len();
    if k == 0 {
        return vec![];
    }
    let diff: Vec<f64> = target.iter().zip(particular).map(|(a, b)| a - b).collect();
    // Normal equations; k is small (successors minus two).
    let mut g = vec![vec![0.0; k + 1]; k];
    for a in 0..k {
        for b in 0..k {
            g[a][b] = basis[a].iter().zip(&basis[b]).map(|(x, y)| x * y).sum();
        }
        g[a][k] = basis[a].iter().zip(&diff).map(|(x, y)| x * y).sum();
    }
    for c in 0..k {
        let p = (c..k).max_by(|&x, &y| g[x][c].abs().total_cmp(&g[y][c].abs())).unwrap();
        g.swap(c, p);
        let piv = g[c][c];
        for x in g[c].iter_mut() {
            *x /= piv;
        }
        for r in 0..k {
            if r != c {
                let f = g[r][c];
                let row = g[c].clone();
                for (x, y) in g[r].iter_mut().zip(&row) {
                    *x -= f * y;
                }
            }
        }
    }
    g.into_iter().map(|r| r[k]).collect()
}

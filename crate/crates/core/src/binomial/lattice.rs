use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{MirmError, Result};
use crate::numeric::xlogx_ratio;
use crate::risk::{InformationTree, NodeClaim, TradedTree};

/// Largest horizon the non-recombining enumeration accepts.
pub const MAX_HORIZON: usize = 12;

/// Moves and transition law of one period.
///
/// `joint` is the law of `(ξ, η)` over `[uu, ud, du, dd]` (ξ first).
/// `node_joint`, when present, overrides it node by node: one entry per node
/// at the start of the period, in canonical order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodSpec {
    pub xi_up: f64,
    pub xi_down: f64,
    pub eta_up: f64,
    pub eta_down: f64,
    pub joint: [f64; 4],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_joint: Option<Vec<[f64; 4]>>,
}

/// `{"horizon": N, "periods": [...]}`. A single period entry is reused for
/// every period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorModelSpec {
    pub horizon: usize,
    pub periods: Vec<PeriodSpec>,
}

impl FactorModelSpec {
    /// ξ ∈ {1.2, 0.9}, η ∈ {1.1, 0.95}, ξ-up probability 1/2 with a mild
    /// positive dependence between ξ and η.
    pub fn example(horizon: usize) -> Self {
        Self {
            horizon,
            periods: vec![PeriodSpec {
                xi_up: 1.2,
                xi_down: 0.9,
                eta_up: 1.1,
                eta_down: 0.95,
                joint: [0.3, 0.2, 0.2, 0.3],
                node_joint: None,
            }],
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn period(&self, k: usize) -> &PeriodSpec {
        if self.periods.len() == 1 {
            &self.periods[0]
        } else {
            &self.periods[k]
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.horizon > MAX_HORIZON {
            return Err(MirmError::InvalidInput(format!(
                "horizon must be between 1 and {MAX_HORIZON}, got {}",
                self.horizon
            )));
        }
        if self.periods.len() != 1 && self.periods.len() != self.horizon {
            return Err(MirmError::InvalidInput(format!(
                "expected 1 or {} periods, got {}",
                self.horizon,
                self.periods.len()
            )));
        }
        for k in 0..self.horizon {
            let p = self.period(k);
            if !(p.xi_down > 0.0 && p.xi_down < 1.0 && p.xi_up > 1.0 && p.xi_up.is_finite()) {
                return Err(MirmError::Model(format!(
                    "period {}: need 0 < xi_down < 1 < xi_up (got {}, {})",
                    k + 1,
                    p.xi_down,
                    p.xi_up
                )));
            }
            // eta_up == eta_down is the complete special case
            if !(p.eta_down > 0.0 && p.eta_up >= p.eta_down && p.eta_up.is_finite()) {
                return Err(MirmError::InvalidInput(format!(
                    "period {}: need 0 < eta_down <= eta_up",
                    k + 1
                )));
            }
            check_joint(&p.joint, k)?;
            if let Some(nodes) = &p.node_joint {
                if self.periods.len() == 1 && self.horizon > 1 {
                    return Err(MirmError::InvalidInput(
                        "node_joint needs one period entry per period".into(),
                    ));
                }
                let want = 1usize << (2 * k);
                if nodes.len() != want {
                    return Err(MirmError::InvalidInput(format!(
                        "period {}: node_joint has {} entries, expected {want}",
                        k + 1,
                        nodes.len()
                    )));
                }
                for j in nodes {
                    check_joint(j, k)?;
                }
            }
        }
        Ok(())
    }
}

fn check_joint(j: &[f64; 4], k: usize) -> Result<()> {
    let total: f64 = j.iter().sum();
    if j.iter().any(|p| !(*p >= 0.0)) || (total - 1.0).abs() > 1e-9 {
        return Err(MirmError::InvalidInput(format!(
            "period {}: joint law {j:?} must be nonnegative and sum to 1",
            k + 1
        )));
    }
    let up = j[0] + j[1];
    if !(up > 0.0 && up < 1.0) {
        return Err(MirmError::InvalidInput(format!(
            "period {}: the xi-up probability must lie strictly inside (0, 1)",
            k + 1
        )));
    }
    Ok(())
}

/// Relative entropy of the two-point law `(q, 1-q)` against `(p, 1-p)`.
pub fn binary_entropy(q: f64, p: f64) -> f64 {
    xlogx_ratio(q, p) + xlogx_ratio(1.0 - q, 1.0 - p)
}

/// Minimal martingale law: the ξ-marginal becomes `(q, 1-q)` and the
/// conditional law of η given ξ is kept.
pub fn minimal_law(joint: &[f64; 4], q: f64) -> [f64; 4] {
    let p = joint[0] + joint[1];
    [
        q * joint[0] / p,
        q * joint[1] / p,
        (1.0 - q) * joint[2] / (1.0 - p),
        (1.0 - q) * joint[3] / (1.0 - p),
    ]
}

/// Interior level of the lattice: the law of the next move at every node.
#[derive(Debug, Clone)]
struct Step {
    q: f64,
    xi: [f64; 2],
    eta: [f64; 2],
    phys: Vec<[f64; 4]>,
    /// Entropy of the minimal measure's ξ-marginal, per node.
    h: Vec<f64>,
}

/// Non-recombining quadtree of `(S, Y)`.
///
/// The child of node `i` at depth `t` reached by move `m` is node `4i + m`
/// at depth `t + 1`, with `m = 0, 1, 2, 3` for `uu, ud, du, dd` (ξ first).
#[derive(Debug, Clone)]
pub struct FactorLattice {
    spec: FactorModelSpec,
    s: Vec<Vec<f64>>,
    y: Vec<Vec<f64>>,
    cumh: Vec<Vec<f64>>,
    steps: Vec<Step>,
}

impl FactorLattice {
    pub fn new(spec: &FactorModelSpec) -> Result<Self> {
        spec.validate()?;
        let mut s = vec![vec![1.0]];
        let mut y = vec![vec![1.0]];
        let mut cumh = vec![vec![0.0]];
        let mut steps = Vec::with_capacity(spec.horizon);
        for k in 0..spec.horizon {
            let p = spec.period(k);
            let q = (1.0 - p.xi_down) / (p.xi_up - p.xi_down);
            let width = 1usize << (2 * k);
            let phys: Vec<[f64; 4]> = match &p.node_joint {
                Some(v) => v.clone(),
                None => vec![p.joint; width],
            };
            let h: Vec<f64> = phys.iter().map(|j| binary_entropy(q, j[0] + j[1])).collect();
            let xi = [p.xi_up, p.xi_down];
            let eta = [p.eta_up, p.eta_down];
            let mut ns = Vec::with_capacity(4 * width);
            let mut ny = Vec::with_capacity(4 * width);
            let mut nh = Vec::with_capacity(4 * width);
            for i in 0..width {
                for m in 0..4 {
                    ns.push(s[k][i] * xi[m / 2]);
                    ny.push(y[k][i] * eta[m % 2]);
                    nh.push(cumh[k][i] + h[i]);
                }
            }
            s.push(ns);
            y.push(ny);
            cumh.push(nh);
            steps.push(Step { q, xi, eta, phys, h });
        }
        Ok(Self { spec: spec.clone(), s, y, cumh, steps })
    }

    pub fn spec(&self) -> &FactorModelSpec {
        &self.spec
    }

    pub fn s(&self, depth: usize, index: usize) -> f64 {
        self.s[depth][index]
    }

    pub fn y(&self, depth: usize, index: usize) -> f64 {
        self.y[depth][index]
    }

    /// `Σ_{k ≤ t} h_k` along the path to the node.
    pub fn cumulative_entropy(&self, depth: usize, index: usize) -> f64 {
        self.cumh[depth][index]
    }

    /// Minimal-measure probability of ξ-up in the period after `depth`.
    pub fn q(&self, depth: usize) -> f64 {
        self.steps[depth].q
    }

    /// Entropy increment of the period following the node.
    pub fn h(&self, depth: usize, index: usize) -> f64 {
        self.steps[depth].h[index]
    }

    pub fn xi(&self, depth: usize) -> [f64; 2] {
        self.steps[depth].xi
    }

    pub fn eta(&self, depth: usize) -> [f64; 2] {
        self.steps[depth].eta
    }

    /// Physical law of the move out of a node at depth `< horizon`.
    pub fn physical_law(&self, depth: usize, index: usize) -> [f64; 4] {
        self.steps[depth].phys[index]
    }

    pub fn minimal_law(&self, depth: usize, index: usize) -> [f64; 4] {
        minimal_law(&self.steps[depth].phys[index], self.steps[depth].q)
    }

    /// Claim vector `g(S, Y)` at a depth.
    pub fn claim_from<F: Fn(f64, f64) -> f64>(&self, depth: usize, g: F) -> Result<NodeClaim> {
        NodeClaim::new(depth, self.s[depth].iter().zip(&self.y[depth]).map(|(&s, &y)| g(s, y)).collect())
    }
}

impl InformationTree for FactorLattice {
    fn horizon(&self) -> usize {
        self.spec.horizon
    }

    fn width(&self, depth: usize) -> usize {
        1 << (2 * depth)
    }

    fn parent(&self, _depth: usize, index: usize) -> usize {
        index / 4
    }

    fn ancestor(&self, depth: usize, index: usize, target: usize) -> usize {
        index >> (2 * (depth - target))
    }
}

impl TradedTree for FactorLattice {
    fn price(&self, depth: usize, index: usize) -> f64 {
        self.s[depth][index]
    }
}

/// Payoffs as a list in canonical order, or keyed by base-4 path strings
/// (`"0312"`: one digit per period, `0..3` for `uu, ud, du, dd`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Payoffs {
    List(Vec<f64>),
    ByPath(BTreeMap<String, f64>),
}

/// `{"depth": t, "payoffs": ...}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeClaimFile {
    pub depth: usize,
    pub payoffs: Payoffs,
}

/// Canonical index of a base-4 path string.
pub fn path_index(path: &str) -> Result<usize> {
    path.chars().try_fold(0usize, |acc, c| match c.to_digit(4) {
        Some(d) => Ok(4 * acc + d as usize),
        None => Err(MirmError::InvalidInput(format!("bad path {path:?}: digits must be 0-3"))),
    })
}

pub fn path_string(depth: usize, index: usize) -> String {
    (0..depth).rev().map(|k| char::from(b'0' + ((index >> (2 * k)) & 3) as u8)).collect()
}

impl LatticeClaimFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_claim(&self, lattice: &FactorLattice) -> Result<NodeClaim> {
        if self.depth > lattice.horizon() {
            return Err(MirmError::Structural(format!(
                "claim depth {} exceeds horizon {}",
                self.depth,
                lattice.horizon()
            )));
        }
        let width = lattice.width(self.depth);
        let values = match &self.payoffs {
            Payoffs::List(v) => v.clone(),
            Payoffs::ByPath(m) => {
                let mut v = vec![None; width];
                for (path, &x) in m {
                    if path.len() != self.depth {
                        return Err(MirmError::Structural(format!(
                            "path {path:?} has length {}, claim depth is {}",
                            path.len(),
                            self.depth
                        )));
                    }
                    v[path_index(path)?] = Some(x);
                }
                v.into_iter()
                    .enumerate()
                    .map(|(i, x)| {
                        x.ok_or_else(|| {
                            MirmError::Structural(format!("missing payoff for path {:?}", path_string(self.depth, i)))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?
            }
        };
        let c = NodeClaim::new(self.depth, values)?;
        c.check(lattice)?;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn q_and_h_for_example() {
        let l = FactorLattice::new(&FactorModelSpec::example(3)).unwrap();
        for d in 0..3 {
            assert!((l.q(d) - 1.0 / 3.0).abs() < 1e-15);
            for i in 0..l.width(d) {
                assert!((l.h(d, i) - 0.056633012265132565).abs() < 1e-15);
            }
        }
        let want = (1.0f64 / 3.0) * (2.0f64 / 3.0).ln() + (2.0 / 3.0) * (4.0f64 / 3.0).ln();
        assert!((l.h(0, 0) - want).abs() < 1e-15);
        assert!((l.cumulative_entropy(2, 7) - 2.0 * want).abs() < 1e-15);
    }

    #[test]
    fn node_counts_and_values() {
        let l = FactorLattice::new(&FactorModelSpec::example(3)).unwrap();
        assert_eq!(l.width(3), 64);
        // path "21": ξ down then up, η up then down
        let i = path_index("21").unwrap();
        assert_eq!(i, 9);
        assert!((l.s(2, i) - 0.9 * 1.2).abs() < 1e-15);
        assert!((l.y(2, i) - 1.1 * 0.95).abs() < 1e-15);
        assert_eq!(path_string(2, 9), "21");
    }

    #[test]
    fn zero_entropy_when_physical_is_minimal() {
        let mut spec = FactorModelSpec::example(1);
        spec.periods[0].joint = [0.2, 1.0 / 3.0 - 0.2, 0.4, 2.0 / 3.0 - 0.4];
        let l = FactorLattice::new(&spec).unwrap();
        assert!(l.h(0, 0).abs() < 1e-15);
    }

    #[test]
    fn minimal_law_is_martingale_and_keeps_eta_given_xi() {
        let l = FactorLattice::new(&FactorModelSpec::example(1)).unwrap();
        let q = l.minimal_law(0, 0);
        let p = l.physical_law(0, 0);
        let mean = (q[0] + q[1]) * 1.2 + (q[2] + q[3]) * 0.9;
        assert!((mean - 1.0).abs() < 1e-15);
        assert!((q[0] / (q[0] + q[1]) - p[0] / (p[0] + p[1])).abs() < 1e-15);
        assert!((q[2] / (q[2] + q[3]) - p[2] / (p[2] + p[3])).abs() < 1e-15);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut s = FactorModelSpec::example(2);
        s.periods[0].xi_down = 1.05;
        assert!(matches!(FactorLattice::new(&s), Err(MirmError::Model(_))));
        let mut s = FactorModelSpec::example(2);
        s.periods[0].joint = [0.5, 0.5, 0.0, 0.0];
        assert!(FactorLattice::new(&s).is_err());
        assert!(FactorLattice::new(&FactorModelSpec::example(13)).is_err());
    }

    #[test]
    fn spec_json_round_trip() {
        let text = r#"{"horizon":2,"periods":[
            {"xi_up":1.2,"xi_down":0.9,"eta_up":1.1,"eta_down":0.95,"joint":[0.3,0.2,0.2,0.3]},
            {"xi_up":1.1,"xi_down":0.8,"eta_up":1.1,"eta_down":0.95,"joint":[0.25,0.25,0.25,0.25],
             "node_joint":[[0.1,0.4,0.3,0.2],[0.25,0.25,0.25,0.25],[0.3,0.3,0.2,0.2],[0.4,0.1,0.1,0.4]]}]}"#;
        let spec = FactorModelSpec::from_json(text).unwrap();
        let l = FactorLattice::new(&spec).unwrap();
        assert_eq!(l.physical_law(1, 3), [0.4, 0.1, 0.1, 0.4]);
        assert!((l.q(1) - 2.0 / 3.0).abs() < 1e-15);
        // path-dependent cumulative entropy
        assert_ne!(l.cumulative_entropy(2, 0), l.cumulative_entropy(2, 8));
    }

    #[test]
    fn claim_files_in_both_layouts() {
        let l = FactorLattice::new(&FactorModelSpec::example(2)).unwrap();
        let list = LatticeClaimFile::from_json(r#"{"depth":1,"payoffs":[1,2,3,4]}"#).unwrap();
        let map = LatticeClaimFile::from_json(r#"{"depth":1,"payoffs":{"0":1,"1":2,"2":3,"3":4}}"#).unwrap();
        assert_eq!(list.to_claim(&l).unwrap(), map.to_claim(&l).unwrap());
        let short = LatticeClaimFile::from_json(r#"{"depth":1,"payoffs":{"0":1}}"#).unwrap();
        assert!(matches!(short.to_claim(&l), Err(MirmError::Structural(_))));
        let wrong = LatticeClaimFile::from_json(r#"{"depth":1,"payoffs":[1,2]}"#).unwrap();
        assert!(wrong.to_claim(&l).is_err());
    }
}

use std::collections::HashMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{MirmError, Result};
use crate::risk::{InformationTree, TradedTree};

/// Node identifier as it appears in a market file: a number or a string.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NodeId {
    Num(u64),
    Name(String),
}

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NodeId::Num(n) => write!(f, "{n}"),
            NodeId::Name(s) => f.write_str(s),
        }
    }
}

/// One entry of the market description file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: NodeId,
    #[serde(default)]
    pub parent: Option<NodeId>,
    /// Conditional probability of the edge from the parent; ignored at the root.
    #[serde(default = "one")]
    pub prob: f64,
    pub price: f64,
}

fn one() -> f64 {
    1.0
}

/// `{"nodes":[{"id","parent","prob","price"}, ...]}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketFile {
    pub nodes: Vec<NodeSpec>,
}

#[derive(Debug, Clone)]
pub struct TreeNode {
    pub id: NodeId,
    pub parent: usize,
    /// Conditional physical probability of reaching this node from its parent.
    pub prob: f64,
    pub price: f64,
    pub children: Range<usize>,
    /// Unconditional physical probability of the node.
    pub atom_prob: f64,
}

/// Finite information tree with one risky asset and a riskless asset
/// identically equal to one.
///
/// Nodes are stored level by level; the children of every node occupy a
/// contiguous range of the next level. All leaves sit at the same depth.
#[derive(Debug, Clone)]
pub struct FiniteTreeMarket {
    levels: Vec<Vec<TreeNode>>,
}

const PROB_TOL: f64 = 1e-9;

pub(crate) fn price_tol(s: f64) -> f64 {
    1e-12 * s.abs().max(1.0)
}

impl FiniteTreeMarket {
    pub fn from_file(file: &MarketFile) -> Result<Self> {
        Self::from_nodes(&file.nodes)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: MarketFile = serde_json::from_str(text)?;
        Self::from_file(&file)
    }

    pub fn to_file(&self) -> MarketFile {
        let mut nodes = Vec::new();
        for (d, level) in self.levels.iter().enumerate() {
            for n in level {
                nodes.push(NodeSpec {
                    id: n.id.clone(),
                    parent: (d > 0).then(|| self.levels[d - 1][n.parent].id.clone()),
                    prob: n.prob,
                    price: n.price,
                });
            }
        }
        MarketFile { nodes }
    }

    /// Builds the tree from a flat node list and validates it: one root,
    /// positive conditional probabilities summing to one per parent,
    /// balanced depth, and no arbitrage at any node.
    pub fn from_nodes(specs: &[NodeSpec]) -> Result<Self> {
        let mut index: HashMap<&NodeId, usize> = HashMap::new();
        for (i, s) in specs.iter().enumerate() {
            if index.insert(&s.id, i).is_some() {
                return Err(MirmError::InvalidInput(format!("duplicate node id {}", s.id)));
            }
        }
        let mut kids: Vec<Vec<usize>> = vec![Vec::new(); specs.len()];
        let mut roots = Vec::new();
        for (i, s) in specs.iter().enumerate() {
            match &s.parent {
                None => roots.push(i),
                Some(p) => {
                    let &pi = index.get(p).ok_or_else(|| {
                        MirmError::InvalidInput(format!("node {} has unknown parent {p}", s.id))
                    })?;
                    kids[pi].push(i);
                }
            }
        }
        if roots.len() != 1 {
            return Err(MirmError::InvalidInput(format!(
                "expected exactly one root, found {}",
                roots.len()
            )));
        }
        let mut levels: Vec<Vec<TreeNode>> = Vec::new();
        let root = &specs[roots[0]];
        let mut frontier = vec![roots[0]];
        levels.push(vec![TreeNode {
            id: root.id.clone(),
            parent: 0,
            prob: 1.0,
            price: root.price,
            children: 0..0,
            atom_prob: 1.0,
        }]);
        let mut visited = 1;
        while frontier.iter().any(|&i| !kids[i].is_empty()) {
            let d = levels.len() - 1;
            let mut next = Vec::new();
            let mut next_frontier = Vec::new();
            for (pos, &i) in frontier.iter().enumerate() {
                if kids[i].is_empty() {
                    return Err(MirmError::InvalidInput(format!(
                        "leaf {} at depth {d} but the tree is deeper; all leaves must share one depth",
                        specs[i].id
                    )));
                }
                let start = next.len();
                for &c in &kids[i] {
                    let s = &specs[c];
                    next.push(TreeNode {
                        id: s.id.clone(),
                        parent: pos,
                        prob: s.prob,
                        price: s.price,
                        children: 0..0,
                        atom_prob: levels[d][pos].atom_prob * s.prob,
                    });
                    next_frontier.push(c);
                }
                levels[d][pos].children = start..next.len();
            }
            visited += next.len();
            levels.push(next);
            frontier = next_frontier;
        }
        if visited != specs.len() {
            return Err(MirmError::InvalidInput("node list contains a cycle or orphans".into()));
        }
        let market = Self { levels };
        market.validate()?;
        Ok(market)
    }

    fn validate(&self) -> Result<()> {
        for (d, level) in self.levels.iter().enumerate() {
            for n in level {
                if !n.price.is_finite() {
                    return Err(MirmError::InvalidInput(format!("node {} has a non-finite price", n.id)));
                }
                if d + 1 == self.levels.len() {
                    continue;
                }
                let kids = &self.levels[d + 1][n.children.clone()];
                let total: f64 = kids.iter().map(|c| c.prob).sum();
                if kids.iter().any(|c| !(c.prob > 0.0)) || (total - 1.0).abs() > PROB_TOL {
                    return Err(MirmError::InvalidInput(format!(
                        "edge probabilities below node {} must be positive and sum to 1",
                        n.id
                    )));
                }
                let tol = price_tol(n.price);
                let below = kids.iter().any(|c| c.price < n.price - tol);
                let above = kids.iter().any(|c| c.price > n.price + tol);
                if below != above {
                    return Err(MirmError::Model(format!(
                        "arbitrage at node {}: price {} is not inside the range of its successors",
                        n.id, n.price
                    )));
                }
            }
        }
        Ok(())
    }

    /// The two-period tree of the finite non-compliance example.
    ///
    /// Probabilities 1/3, 1/3, 1/3 at the root and 1/3, 2/3 after the third
    /// node; prices 4 at the root, (6, 4, 2) at depth one, and (3, 1) after
    /// the third node. The first two branches carry no further risk.
    pub fn example() -> Self {
        let n = |id: &str, parent: Option<&str>, prob: f64, price: f64| NodeSpec {
            id: NodeId::Name(id.into()),
            parent: parent.map(|p| NodeId::Name(p.into())),
            prob,
            price,
        };
        let third = 1.0 / 3.0;
        Self::from_nodes(&[
            n("S0", None, 1.0, 4.0),
            n("S1", Some("S0"), third, 6.0),
            n("S2", Some("S0"), third, 4.0),
            n("S3", Some("S0"), third, 2.0),
            n("w1", Some("S1"), 1.0, 6.0),
            n("w2", Some("S2"), 1.0, 4.0),
            n("w3", Some("S3"), third, 3.0),
            n("w4", Some("S3"), 2.0 * third, 1.0),
        ])
        .expect("example market is well formed")
    }

    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, depth: usize) -> &[TreeNode] {
        &self.levels[depth]
    }

    pub fn node(&self, depth: usize, index: usize) -> &TreeNode {
        &self.levels[depth][index]
    }

    pub fn children(&self, depth: usize, index: usize) -> &[TreeNode] {
        &self.levels[depth + 1][self.levels[depth][index].children.clone()]
    }

    /// Physical probabilities of the depth-`depth` atoms.
    pub fn atom_probs(&self, depth: usize) -> Vec<f64> {
        self.levels[depth].iter().map(|n| n.atom_prob).collect()
    }
}

impl InformationTree for FiniteTreeMarket {
    fn horizon(&self) -> usize {
        self.depth()
    }

    fn width(&self, depth: usize) -> usize {
        self.levels[depth].len()
    }

    fn parent(&self, depth: usize, index: usize) -> usize {
        self.levels[depth][index].parent
    }
}

impl TradedTree for FiniteTreeMarket {
    fn price(&self, depth: usize, index: usize) -> f64 {
        self.levels[depth][index].price
    }
}

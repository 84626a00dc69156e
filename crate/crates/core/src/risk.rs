//! Claims, earliest maturity and the axiom-checking harness shared by every
//! node-based risk evaluator.
//!
//! Models expose their information structure through [`InformationTree`]:
//! nodes are indexed per depth and every node knows its parent. A claim that
//! lives on the nodes of some depth is a [`NodeClaim`]; its earliest maturity
//! is the shallowest depth whose partition it is measurable with respect to.

use std::fmt;

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::error::{MirmError, Result};
use crate::forward::PathClaim;
use crate::numeric::item_rng;

/// Filtration of a finite model, realized as a rooted tree indexed by depth.
pub trait InformationTree {
    /// Deepest available time index.
    fn horizon(&self) -> usize;
    /// Number of nodes at `depth`.
    fn width(&self, depth: usize) -> usize;
    /// Index (at `depth - 1`) of the parent of node `index` at `depth >= 1`.
    fn parent(&self, depth: usize, index: usize) -> usize;

    /// Ancestor at `target <= depth` of node `index` at `depth`.
    fn ancestor(&self, depth: usize, index: usize, target: usize) -> usize {
        let mut i = index;
        for d in (target + 1..=depth).rev() {
            i = self.parent(d, i);
        }
        i
    }
}

/// A tree whose nodes carry the price of one traded asset (riskless rate 0).
pub trait TradedTree: InformationTree {
    fn price(&self, depth: usize, index: usize) -> f64;
}

/// Payoff defined node by node at a declared depth.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeClaim {
    depth: usize,
    values: Vec<f64>,
}

impl NodeClaim {
    pub fn new(depth: usize, values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(MirmError::InvalidInput(format!(
                "claim payoffs must be finite (found {v})"
            )));
        }
        Ok(Self { depth, values })
    }

    pub fn constant<T: InformationTree + ?Sized>(tree: &T, depth: usize, value: f64) -> Result<Self> {
        Self::new(depth, vec![value; tree.width(depth)])
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Checks that the claim has one payoff per node of its declared depth.
    pub fn check<T: InformationTree + ?Sized>(&self, tree: &T) -> Result<()> {
        if self.depth > tree.horizon() {
            return Err(MirmError::Structural(format!(
                "claim depth {} exceeds model horizon {}",
                self.depth,
                tree.horizon()
            )));
        }
        let w = tree.width(self.depth);
        if w != self.values.len() {
            return Err(MirmError::Structural(format!(
                "claim has {} payoffs but depth {} has {} nodes",
                self.values.len(),
                self.depth,
                w
            )));
        }
        Ok(())
    }

    /// Re-expresses the claim on the nodes of a deeper (or equal) depth.
    pub fn lift<T: InformationTree + ?Sized>(&self, tree: &T, depth: usize) -> Result<Self> {
        self.check(tree)?;
        if depth < self.depth {
            return self.reduce(tree, depth);
        }
        if depth > tree.horizon() {
            return Err(MirmError::Structural(format!(
                "cannot lift to depth {depth} beyond horizon {}",
                tree.horizon()
            )));
        }
        let values = (0..tree.width(depth))
            .map(|i| self.values[tree.ancestor(depth, i, self.depth)])
            .collect();
        Ok(Self { depth, values })
    }

    /// Restricts the claim to a shallower depth; fails unless the claim is
    /// measurable with respect to that depth's partition.
    pub fn reduce<T: InformationTree + ?Sized>(&self, tree: &T, depth: usize) -> Result<Self> {
        self.check(tree)?;
        if depth >= self.depth {
            return self.lift(tree, depth);
        }
        let mut out: Vec<Option<f64>> = vec![None; tree.width(depth)];
        for (i, &v) in self.values.iter().enumerate() {
            let a = tree.ancestor(self.depth, i, depth);
            match out[a] {
                None => out[a] = Some(v),
                Some(w) if w == v => {}
                Some(_) => {
                    return Err(MirmError::Structural(format!(
                        "claim is not measurable at depth {depth}"
                    )))
                }
            }
        }
        let values = out
            .into_iter()
            .map(|v| v.ok_or_else(|| MirmError::Structural("node without descendants".into())))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { depth, values })
    }

    /// Pointwise combination of two claims at a common depth.
    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.depth != other.depth || self.values.len() != other.values.len() {
            return Err(MirmError::Structural("claims live on different node sets".into()));
        }
        Self::new(
            self.depth,
            self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        )
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.depth, self.values.iter().map(|&v| f(v)).collect())
    }

    fn summary(&self) -> String {
        const SHOWN: usize = 8;
        let head: Vec<String> = self.values.iter().take(SHOWN).map(|v| format!("{v:.6}")).collect();
        let more = if self.values.len() > SHOWN { ", ..." } else { "" };
        format!("depth={} [{}{}]", self.depth, head.join(", "), more)
    }
}

/// A bounded payoff with finite maturity, in one of the representations
/// used across the engines.
#[derive(Clone)]
pub enum Claim {
    /// Node payoff on a finite tree or lattice.
    Nodes(NodeClaim),
    /// Functional of simulated paths with a stated maturity time.
    Path(PathClaim),
}

impl fmt::Debug for Claim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Claim::Nodes(c) => f.debug_tuple("Nodes").field(c).finish(),
            Claim::Path(p) => f.debug_struct("Path").field("maturity", &p.maturity()).finish(),
        }
    }
}

impl Claim {
    /// Earliest maturity as a time: a depth index for node claims, the
    /// declared maturity for path functionals.
    pub fn earliest_maturity(&self, model: Option<&dyn InformationTree>) -> Result<f64> {
        match self {
            Claim::Nodes(c) => {
                let tree = model.ok_or_else(|| {
                    MirmError::Structural("node claim needs the tree it is defined on".into())
                })?;
                Ok(earliest_maturity(c, tree)? as f64)
            }
            Claim::Path(p) => Ok(p.maturity()),
        }
    }
}

/// Smallest depth `t` such that the claim is constant on the subtree below
/// every depth-`t` node.
pub fn earliest_maturity<T: InformationTree + ?Sized>(claim: &NodeClaim, tree: &T) -> Result<usize> {
    claim.check(tree)?;
    'depth: for t in 0..claim.depth {
        let mut seen: Vec<Option<f64>> = vec![None; tree.width(t)];
        for (i, &v) in claim.values.iter().enumerate() {
            let a = tree.ancestor(claim.depth, i, t);
            match seen[a] {
                None => seen[a] = Some(v),
                Some(w) if w == v => {}
                Some(_) => continue 'depth,
            }
        }
        return Ok(t);
    }
    Ok(claim.depth)
}

/// Per-node asset holdings for the periods `(k, k+1]`, `k < horizon`.
#[derive(Debug, Clone)]
pub struct Holdings {
    by_depth: Vec<Vec<f64>>,
}

impl Holdings {
    pub fn new(by_depth: Vec<Vec<f64>>) -> Self {
        Self { by_depth }
    }

    pub fn horizon(&self) -> usize {
        self.by_depth.len()
    }

    /// Cumulative trading gains `Σ α_k (S_{k+1} - S_k)` on the nodes at depth
    /// `self.horizon()`.
    pub fn gains<T: TradedTree + ?Sized>(&self, tree: &T) -> Result<NodeClaim> {
        let t = self.horizon();
        if t > tree.horizon() {
            return Err(MirmError::Structural("strategy runs past the model horizon".into()));
        }
        for (k, h) in self.by_depth.iter().enumerate() {
            if h.len() != tree.width(k) {
                return Err(MirmError::Structural(format!(
                    "holdings at depth {k} have {} entries, expected {}",
                    h.len(),
                    tree.width(k)
                )));
            }
        }
        let mut acc = vec![0.0];
        for k in 0..t {
            acc = (0..tree.width(k + 1))
                .map(|i| {
                    let p = tree.parent(k + 1, i);
                    acc[p] + self.by_depth[k][p] * (tree.price(k + 1, i) - tree.price(k, p))
                })
                .collect();
        }
        NodeClaim::new(t, acc)
    }
}

/// A risk functional bound to a node model.
///
/// `eval(claim, t)` is the value of the claim regarded as a time-`t`
/// position (`t` at least the claim's earliest maturity). Maturity-anchored
/// measures depend on `t`; maturity-independent ones do not.
pub trait RiskEvaluator: Sync {
    type Model: TradedTree + Sync + ?Sized;

    fn model(&self) -> &Self::Model;

    fn eval(&self, claim: &NodeClaim, maturity: usize) -> Result<f64>;
}

/// The four axioms of a maturity-independent convex risk measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axiom {
    AntiPositivity,
    Convexity,
    CashTranslativity,
    ReplicationMaturityIndependence,
}

impl Axiom {
    pub const ALL: [Axiom; 4] = [
        Axiom::AntiPositivity,
        Axiom::Convexity,
        Axiom::CashTranslativity,
        Axiom::ReplicationMaturityIndependence,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Axiom::AntiPositivity => "anti_positivity",
            Axiom::Convexity => "convexity",
            Axiom::CashTranslativity => "cash_translativity",
            Axiom::ReplicationMaturityIndependence => "replication_maturity_independence",
        }
    }
}

impl fmt::Display for Axiom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Axiom {
    type Err = MirmError;

    fn from_str(s: &str) -> Result<Self> {
        Axiom::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| MirmError::InvalidInput(format!("unknown axiom {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub input: String,
    pub violation: f64,
}

/// Outcome of a batch of randomized axiom trials.
///
/// Only the largest violations are kept as witnesses; `max_violation` is the
/// largest of them.
#[derive(Debug, Clone, PartialEq)]
pub struct AxiomReport {
    pub axiom: Axiom,
    pub trials: usize,
    pub max_violation: f64,
    pub witnesses: Vec<Witness>,
}

impl AxiomReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_violation <= tolerance
    }
}

/// An evaluator error raised during a trial, with the input that caused it.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("{axiom} trial {trial} failed on {input}: {source}")]
pub struct AxiomFailure {
    pub axiom: Axiom,
    pub trial: usize,
    pub input: String,
    pub source: MirmError,
}

/// Sampling parameters for [`axiom_check_with`].
#[derive(Debug, Clone)]
pub struct AxiomConfig {
    /// Holdings are drawn uniformly from `[-holding_bound, holding_bound]`.
    pub holding_bound: f64,
    /// Strategies whose gains exceed this bound in absolute value on some
    /// node are rejected and redrawn.
    pub gains_bound: f64,
    /// Cash shifts are drawn uniformly from `[-cash_range, cash_range]`.
    pub cash_range: f64,
    pub max_witnesses: usize,
    pub max_redraws: usize,
}

impl Default for AxiomConfig {
    fn default() -> Self {
        Self {
            holding_bound: 1.0,
            gains_bound: 10.0,
            cash_range: 5.0,
            max_witnesses: 5,
            max_redraws: 100,
        }
    }
}

pub fn axiom_check<E: RiskEvaluator>(
    evaluator: &E,
    axiom: Axiom,
    trials: usize,
    seed: u64,
) -> Result<AxiomReport, AxiomFailure> {
    axiom_check_with(evaluator, axiom, trials, seed, &AxiomConfig::default())
}

/// Runs `trials` independent randomized checks of one axiom.
///
/// Trial `i` draws from its own counter-based stream, so the report does
/// not depend on how trials are scheduled across threads.
pub fn axiom_check_with<E: RiskEvaluator>(
    evaluator: &E,
    axiom: Axiom,
    trials: usize,
    seed: u64,
    config: &AxiomConfig,
) -> Result<AxiomReport, AxiomFailure> {
    if trials == 0 {
        return Err(AxiomFailure {
            axiom,
            trial: 0,
            input: String::new(),
            source: MirmError::InvalidInput("at least one trial is required".into()),
        });
    }
    let outcomes: Vec<Result<Witness, AxiomFailure>> = (0..trials)
        .into_par_iter()
        .map(|trial| run_trial(evaluator, axiom, trial, seed, config))
        .collect();

    let mut witnesses: Vec<Witness> = Vec::with_capacity(trials);
    for o in outcomes {
        witnesses.push(o?);
    }
    witnesses.sort_by(|a, b| b.violation.total_cmp(&a.violation));
    witnesses.truncate(config.max_witnesses.max(1));
    let max_violation = witnesses[0].violation;
    Ok(AxiomReport { axiom, trials, max_violation, witnesses })
}

fn random_claim<T: InformationTree + ?Sized>(
    tree: &T,
    rng: &mut impl Rng,
    depth: usize,
    lo: f64,
    hi: f64,
) -> NodeClaim {
    let values = (0..tree.width(depth)).map(|_| rng.random_range(lo..=hi)).collect();
    NodeClaim { depth, values }
}

fn random_gains<T: TradedTree + ?Sized>(
    tree: &T,
    rng: &mut impl Rng,
    horizon: usize,
    config: &AxiomConfig,
) -> Result<NodeClaim> {
    let b = config.holding_bound;
    for _ in 0..=config.max_redraws {
        let holdings = Holdings::new(
            (0..horizon)
                .map(|k| (0..tree.width(k)).map(|_| rng.random_range(-b..=b)).collect())
                .collect(),
        );
        let g = holdings.gains(tree)?;
        if g.values.iter().all(|v| v.abs() <= config.gains_bound) {
            return Ok(g);
        }
    }
    Err(MirmError::InvalidInput(format!(
        "could not draw a strategy with gains bounded by {}",
        config.gains_bound
    )))
}

fn run_trial<E: RiskEvaluator>(
    evaluator: &E,
    axiom: Axiom,
    trial: usize,
    seed: u64,
    config: &AxiomConfig,
) -> Result<Witness, AxiomFailure> {
    let tree = evaluator.model();
    let horizon = tree.horizon();
    let mut rng = item_rng(seed, trial as u64);
    let mut input: String;
    let fail = |input: &str, source: MirmError| AxiomFailure {
        axiom,
        trial,
        input: input.to_string(),
        source,
    };

    match axiom {
        Axiom::AntiPositivity => {
            let s = rng.random_range(0..=horizon);
            let f = random_claim(tree, &mut rng, s, 0.0, 1.0);
            input = f.summary();
            let r = evaluator.eval(&f, s).map_err(|e| fail(&input, e))?;
            Ok(Witness { input, violation: r.max(0.0) })
        }
        Axiom::Convexity => {
            let s1 = rng.random_range(0..=horizon);
            let s2 = rng.random_range(0..=horizon);
            let d = s1.max(s2);
            let lambda: f64 = rng.random_range(0.0..=1.0);
            let f = random_claim(tree, &mut rng, s1, -1.0, 1.0);
            let g = random_claim(tree, &mut rng, s2, -1.0, 1.0);
            input = format!("lambda={lambda:.6} f={} g={}", f.summary(), g.summary());
            let run = || -> Result<f64> {
                let f = f.lift(tree, d)?;
                let g = g.lift(tree, d)?;
                let mix = f.zip_with(&g, |a, b| lambda * a + (1.0 - lambda) * b)?;
                let lhs = evaluator.eval(&mix, d)?;
                let rhs = lambda * evaluator.eval(&f, d)? + (1.0 - lambda) * evaluator.eval(&g, d)?;
                Ok((lhs - rhs).max(0.0))
            };
            let v = run().map_err(|e| fail(&input, e))?;
            Ok(Witness { input, violation: v })
        }
        Axiom::CashTranslativity => {
            let s = rng.random_range(0..=horizon);
            let m: f64 = rng.random_range(-config.cash_range..=config.cash_range);
            let f = random_claim(tree, &mut rng, s, -1.0, 1.0);
            input = format!("m={m:.6} f={}", f.summary());
            let run = || -> Result<f64> {
                let shifted = f.map(|v| v - m)?;
                Ok((evaluator.eval(&shifted, s)? - evaluator.eval(&f, s)? - m).abs())
            };
            let v = run().map_err(|e| fail(&input, e))?;
            Ok(Witness { input, violation: v })
        }
        Axiom::ReplicationMaturityIndependence => {
            let s = rng.random_range(0..=horizon);
            let f = random_claim(tree, &mut rng, s, -1.0, 1.0);
            input = f.summary();
            let run = |rng: &mut rand_chacha::ChaCha8Rng, input: &mut String| -> Result<f64> {
                let tc = earliest_maturity(&f, tree)?;
                let t = rng.random_range(tc..=horizon);
                let gains = random_gains(tree, rng, t, config)?;
                *input = format!("t_C={tc} t={t} f={} gains={}", f.summary(), gains.summary());
                let hedged = f.lift(tree, t)?.zip_with(&gains, |a, b| a + b)?;
                let anchored = f.reduce(tree, tc)?;
                Ok((evaluator.eval(&hedged, t)? - evaluator.eval(&anchored, tc)?).abs())
            };
            let v = run(&mut rng, &mut input).map_err(|e| fail(&input, e))?;
            Ok(Witness { input, violation: v })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Binary tree of the given depth with prices following a random walk.
    struct Binary {
        depth: usize,
    }

    impl InformationTree for Binary {
        fn horizon(&self) -> usize {
            self.depth
        }
        fn width(&self, depth: usize) -> usize {
            1 << depth
        }
        fn parent(&self, _depth: usize, index: usize) -> usize {
            index / 2
        }
    }

    impl TradedTree for Binary {
        fn price(&self, depth: usize, index: usize) -> f64 {
            let ups = (index as u32).count_ones() as f64;
            10.0 + ups - (depth as f64 - ups)
        }
    }

    #[test]
    fn constant_claim_matures_at_zero() {
        let tree = Binary { depth: 3 };
        let c = NodeClaim::constant(&tree, 3, 5.0).unwrap();
        assert_eq!(earliest_maturity(&c, &tree).unwrap(), 0);
    }

    #[test]
    fn earliest_maturity_detects_depth_one_claim() {
        let tree = Binary { depth: 3 };
        let c = NodeClaim::new(1, vec![0.0, 2.0]).unwrap().lift(&tree, 3).unwrap();
        assert_eq!(earliest_maturity(&c, &tree).unwrap(), 1);
    }

    #[test]
    fn earliest_maturity_rejects_wrong_node_count() {
        let tree = Binary { depth: 2 };
        let c = NodeClaim::new(2, vec![1.0; 3]).unwrap();
        assert!(matches!(earliest_maturity(&c, &tree), Err(MirmError::Structural(_))));
    }

    #[test]
    fn earliest_maturity_is_idempotent_on_reduction() {
        let tree = Binary { depth: 4 };
        let c = NodeClaim::new(2, vec![1.0, -1.0, 0.5, 0.5]).unwrap().lift(&tree, 4).unwrap();
        let t = earliest_maturity(&c, &tree).unwrap();
        let reduced = c.reduce(&tree, t).unwrap();
        assert_eq!(earliest_maturity(&reduced, &tree).unwrap(), t);
    }

    #[test]
    fn path_claims_keep_declared_maturity() {
        let claim = Claim::Path(PathClaim::new(0.75, |_| 0.0));
        assert_eq!(claim.earliest_maturity(None).unwrap(), 0.75);
    }

    #[test]
    fn non_finite_payoffs_are_rejected() {
        assert!(NodeClaim::new(0, vec![f64::NAN]).is_err());
    }

    #[test]
    fn gains_accumulate_along_paths() {
        let tree = Binary { depth: 2 };
        let h = Holdings::new(vec![vec![1.0], vec![2.0, -1.0]]);
        let g = h.gains(&tree).unwrap();
        // prices: depth 1 [9, 11], depth 2 [8, 10, 10, 12]
        assert_eq!(g.values(), &[-3.0, 1.0, 2.0, 0.0]);
    }

    /// Linear pricing under the symmetric measure; satisfies every axiom.
    struct Linear(Binary);

    impl RiskEvaluator for Linear {
        type Model = Binary;
        fn model(&self) -> &Binary {
            &self.0
        }
        fn eval(&self, claim: &NodeClaim, _t: usize) -> Result<f64> {
            let n = claim.values().len() as f64;
            Ok(-claim.values().iter().sum::<f64>() / n)
        }
    }

    #[test]
    fn harness_passes_martingale_pricing() {
        let e = Linear(Binary { depth: 3 });
        for axiom in Axiom::ALL {
            let r = axiom_check(&e, axiom, 50, 7).unwrap();
            assert!(r.max_violation <= 1e-12, "{axiom}: {}", r.max_violation);
            assert_eq!(r.trials, 50);
            assert_eq!(r.max_violation, r.witnesses[0].violation);
        }
    }

    /// Ignores trading gains entirely; replication invariance must fail.
    struct Worst(Binary);

    impl RiskEvaluator for Worst {
        type Model = Binary;
        fn model(&self) -> &Binary {
            &self.0
        }
        fn eval(&self, claim: &NodeClaim, _t: usize) -> Result<f64> {
            Ok(-claim.values().iter().cloned().fold(f64::INFINITY, f64::min))
        }
    }

    #[test]
    fn harness_detects_replication_failure() {
        let e = Worst(Binary { depth: 3 });
        let r = axiom_check(&e, Axiom::ReplicationMaturityIndependence, 50, 1).unwrap();
        assert!(r.max_violation > 0.1);
        let ap = axiom_check(&e, Axiom::AntiPositivity, 50, 1).unwrap();
        assert_eq!(ap.max_violation, 0.0);
    }

    #[test]
    fn harness_is_reproducible() {
        let e = Worst(Binary { depth: 3 });
        let a = axiom_check(&e, Axiom::Convexity, 40, 11).unwrap();
        let b = axiom_check(&e, Axiom::Convexity, 40, 11).unwrap();
        assert_eq!(a, b);
    }

    struct Failing(Binary);

    impl RiskEvaluator for Failing {
        type Model = Binary;
        fn model(&self) -> &Binary {
            &self.0
        }
        fn eval(&self, claim: &NodeClaim, _t: usize) -> Result<f64> {
            if claim.depth() == 2 {
                Err(MirmError::Numerical("boom".into()))
            } else {
                Ok(0.0)
            }
        }
    }

    #[test]
    fn evaluator_failure_records_offending_input() {
        let e = Failing(Binary { depth: 2 });
        let err = axiom_check(&e, Axiom::AntiPositivity, 30, 3).unwrap_err();
        assert!(err.input.starts_with("depth=2"));
        assert!(err.source.is_numerical());
    }

    #[test]
    fn zero_trials_are_rejected() {
        let e = Linear(Binary { depth: 1 });
        assert!(axiom_check(&e, Axiom::Convexity, 0, 0).is_err());
    }
}

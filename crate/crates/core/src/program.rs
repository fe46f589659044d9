//! Executable factories.
//!
//! A factory is either an explicit finite decision tree, whose nodes flip an
//! input coin or a helper coin of known bias and whose leaves carry the output
//! bit, or a procedural sampler that consumes flips from a [`CoinSource`]
//! without an a-priori depth bound (retry loops, races, level mixtures).

use std::fmt;
use std::sync::Arc;

use num::{BigRational, One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::coin::{CoinBank, CoinSource, FlipBudget, Interrupt, KnownCoin, Metered};
use crate::error::{FactoryError, Result};
use crate::faces::{BoundCertificate, FacePartition};
use crate::rational::{check_unit_point, pow, Rational};

/// Default cap on transcript evaluations in [`truncated_bounds`].
pub const DEFAULT_TRANSCRIPT_LIMIT: u64 = 1 << 20;

/// A finite factory tree. The 0-outcome of a flip follows `zero`, the
/// 1-outcome follows `one`.
#[derive(Debug, Clone)]
pub enum FiniteTree {
    Leaf(bool),
    Coin {
        coin: usize,
        zero: Box<FiniteTree>,
        one: Box<FiniteTree>,
    },
    Known {
        coin: KnownCoin,
        zero: Box<FiniteTree>,
        one: Box<FiniteTree>,
    },
}

impl PartialEq for FiniteTree {
    fn eq(&self, other: &Self) -> bool {
        use FiniteTree::*;
        match (self, other) {
            (Leaf(a), Leaf(b)) => a == b,
            (
                Coin { coin, zero, one },
                Coin {
                    coin: c2,
                    zero: z2,
                    one: o2,
                },
            ) => coin == c2 && zero == z2 && one == o2,
            (
                Known { coin, zero, one },
                Known {
                    coin: c2,
                    zero: z2,
                    one: o2,
                },
            ) => coin.bias() == c2.bias() && zero == z2 && one == o2,
            _ => false,
        }
    }
}

impl FiniteTree {
    pub fn leaf(bit: bool) -> Self {
        FiniteTree::Leaf(bit)
    }

    pub fn coin(coin: usize, zero: FiniteTree, one: FiniteTree) -> Self {
        FiniteTree::Coin {
            coin,
            zero: Box::new(zero),
            one: Box::new(one),
        }
    }

    pub fn known(bias: BigRational, zero: FiniteTree, one: FiniteTree) -> Result<Self> {
        Ok(FiniteTree::Known {
            coin: KnownCoin::new(bias)?,
            zero: Box::new(zero),
            one: Box::new(one),
        })
    }

    /// Flip `coins[0]`, `coins[1]`, `coins[2]` and output 1 iff the outcomes
    /// are 1, 1, 0. With a single coin flipped thrice this realises
    /// `p^2 - p^3`.
    pub fn two_heads_then_tail(coins: [usize; 3]) -> Self {
        fn level(coins: &[usize], prefix: &[bool]) -> FiniteTree {
            match coins.split_first() {
                None => FiniteTree::Leaf(prefix == [true, true, false]),
                Some((&c, rest)) => {
                    let mut z = prefix.to_vec();
                    z.push(false);
                    let mut o = prefix.to_vec();
                    o.push(true);
                    FiniteTree::coin(c, level(rest, &z), level(rest, &o))
                }
            }
        }
        level(&coins, &[])
    }

    /// Number of input coins the tree needs (largest index + 1).
    pub fn arity(&self) -> usize {
        match self {
            FiniteTree::Leaf(_) => 0,
            FiniteTree::Coin { coin, zero, one } => (coin + 1).max(zero.arity()).max(one.arity()),
            FiniteTree::Known { zero, one, .. } => zero.arity().max(one.arity()),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            FiniteTree::Leaf(_) => 0,
            FiniteTree::Coin { zero, one, .. } | FiniteTree::Known { zero, one, .. } => {
                1 + zero.depth().max(one.depth())
            }
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            FiniteTree::Leaf(_) => 1,
            FiniteTree::Coin { zero, one, .. } | FiniteTree::Known { zero, one, .. } => {
                1 + zero.node_count() + one.node_count()
            }
        }
    }

    /// The same tree with every leaf label flipped.
    pub fn complement(&self) -> FiniteTree {
        self.map_leaves(&|bit| FiniteTree::Leaf(!bit))
    }

    /// Replaces every 1-leaf by `other`: the conjunction of two independent runs.
    pub fn and_then(&self, other: &FiniteTree) -> FiniteTree {
        self.map_leaves(&|bit| {
            if bit {
                other.clone()
            } else {
                FiniteTree::Leaf(false)
            }
        })
    }

    fn map_leaves(&self, f: &dyn Fn(bool) -> FiniteTree) -> FiniteTree {
        match self {
            FiniteTree::Leaf(b) => f(*b),
            FiniteTree::Coin { coin, zero, one } => FiniteTree::Coin {
                coin: *coin,
                zero: Box::new(zero.map_leaves(f)),
                one: Box::new(one.map_leaves(f)),
            },
            FiniteTree::Known { coin, zero, one } => FiniteTree::Known {
                coin: coin.clone(),
                zero: Box::new(zero.map_leaves(f)),
                one: Box::new(one.map_leaves(f)),
            },
        }
    }

    pub fn execute(&self, src: &mut dyn CoinSource) -> Result<bool, Interrupt> {
        let mut node = self;
        loop {
            node = match node {
                FiniteTree::Leaf(b) => return Ok(*b),
                FiniteTree::Coin { coin, zero, one } => {
                    if src.flip(*coin)? {
                        one
                    } else {
                        zero
                    }
                }
                FiniteTree::Known { coin, zero, one } => {
                    if src.flip_known(coin)? {
                        one
                    } else {
                        zero
                    }
                }
            };
        }
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let repr: TreeRepr =
            serde_json::from_str(json).map_err(|e| FactoryError::Parse(e.to_string()))?;
        repr.into_tree()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&TreeRepr::from_tree(self)).expect("tree serialises")
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum TreeRepr {
    Node { node: NodeRepr },
    Leaf { leaf: u8 },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeRepr {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    coin: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bias: Option<Rational>,
    zero: Box<TreeRepr>,
    one: Box<TreeRepr>,
}

impl TreeRepr {
    fn into_tree(self) -> Result<FiniteTree> {
        match self {
            TreeRepr::Leaf { leaf } => match leaf {
                0 => Ok(FiniteTree::Leaf(false)),
                1 => Ok(FiniteTree::Leaf(true)),
                other => Err(FactoryError::Parse(format!("leaf label must be 0 or 1, got {other}"))),
            },
            TreeRepr::Node { node } => {
                let zero = node.zero.into_tree()?;
                let one = node.one.into_tree()?;
                match (node.coin, node.bias) {
                    (Some(0), None) => Err(FactoryError::Parse("coin indices start at 1".into())),
                    (Some(c), None) => Ok(FiniteTree::coin(c - 1, zero, one)),
                    (None, Some(b)) => FiniteTree::known(b.0, zero, one),
                    _ => Err(FactoryError::Parse(
                        "a node needs exactly one of \"coin\" or \"bias\"".into(),
                    )),
                }
            }
        }
    }

    fn from_tree(tree: &FiniteTree) -> TreeRepr {
        match tree {
            FiniteTree::Leaf(b) => TreeRepr::Leaf { leaf: *b as u8 },
            FiniteTree::Coin { coin, zero, one } => TreeRepr::Node {
                node: NodeRepr {
                    coin: Some(coin + 1),
                    bias: None,
                    zero: Box::new(Self::from_tree(zero)),
                    one: Box::new(Self::from_tree(one)),
                },
            },
            FiniteTree::Known { coin, zero, one } => TreeRepr::Node {
                node: NodeRepr {
                    coin: None,
                    bias: Some(Rational(coin.bias().clone())),
                    zero: Box::new(Self::from_tree(zero)),
                    one: Box::new(Self::from_tree(one)),
                },
            },
        }
    }
}

type Body = dyn Fn(&mut dyn CoinSource) -> Result<bool, Interrupt> + Send + Sync;

/// An opaque sampler. It must draw all of its randomness through the
/// [`CoinSource`] it is handed, so that replaying a transcript replays the run.
#[derive(Clone)]
pub struct Procedure {
    name: Arc<str>,
    arity: usize,
    body: Arc<Body>,
}

impl Procedure {
    pub fn new<F>(name: impl Into<String>, arity: usize, body: F) -> Self
    where
        F: Fn(&mut dyn CoinSource) -> Result<bool, Interrupt> + Send + Sync + 'static,
    {
        Procedure {
            name: Arc::from(name.into()),
            arity,
            body: Arc::new(body),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

impl fmt::Debug for Procedure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Procedure({}, arity {})", self.name, self.arity)
    }
}

#[derive(Debug, Clone)]
pub enum FactoryProgram {
    Tree(FiniteTree),
    Procedural(Procedure),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    One,
    Zero,
    /// The budget ran out after this many draws.
    BudgetExhausted(u64),
}

/// Result of a sampler that returns something other than a bit.
#[derive(Debug, Clone, PartialEq)]
pub enum Draw<T> {
    Value(T),
    BudgetExhausted(u64),
}

impl<T> Draw<T> {
    pub fn value(self) -> Option<T> {
        match self {
            Draw::Value(v) => Some(v),
            Draw::BudgetExhausted(_) => None,
        }
    }
}

impl From<FiniteTree> for FactoryProgram {
    fn from(t: FiniteTree) -> Self {
        FactoryProgram::Tree(t)
    }
}

impl FactoryProgram {
    pub fn procedural<F>(name: impl Into<String>, arity: usize, body: F) -> Self
    where
        F: Fn(&mut dyn CoinSource) -> Result<bool, Interrupt> + Send + Sync + 'static,
    {
        FactoryProgram::Procedural(Procedure::new(name, arity, body))
    }

    pub fn arity(&self) -> usize {
        match self {
            FactoryProgram::Tree(t) => t.arity(),
            FactoryProgram::Procedural(p) => p.arity,
        }
    }

    pub fn as_tree(&self) -> Option<&FiniteTree> {
        match self {
            FactoryProgram::Tree(t) => Some(t),
            FactoryProgram::Procedural(_) => None,
        }
    }

    pub fn name(&self) -> String {
        match self {
            FactoryProgram::Tree(t) => format!("tree({} nodes)", t.node_count()),
            FactoryProgram::Procedural(p) => p.name.to_string(),
        }
    }

    pub fn execute(&self, src: &mut dyn CoinSource) -> Result<bool, Interrupt> {
        match self {
            FactoryProgram::Tree(t) => t.execute(src),
            FactoryProgram::Procedural(p) => (p.body)(src),
        }
    }

    /// Runs the program once against `bank`, charging every draw to `budget`.
    pub fn run(&self, bank: &mut CoinBank, budget: FlipBudget) -> Result<Outcome> {
        if self.arity() > bank.num_coins() {
            return Err(FactoryError::usage(format!(
                "program references coin {} but the bank has {} coins",
                self.arity(),
                bank.num_coins()
            )));
        }
        let mut src = Metered::new(bank, budget);
        match self.execute(&mut src) {
            Ok(true) => Ok(Outcome::One),
            Ok(false) => Ok(Outcome::Zero),
            Err(Interrupt::BudgetExhausted) => Ok(Outcome::BudgetExhausted(src.used())),
            Err(Interrupt::Truncated) => Err(FactoryError::usage(
                "a bank never truncates; the program raised a truncation itself",
            )),
            Err(Interrupt::Failed(e)) => Err(e),
        }
    }
}

fn check_point_for(arity: usize, p: &[BigRational]) -> Result<()> {
    check_unit_point(p)?;
    if arity > p.len() {
        return Err(FactoryError::usage(format!(
            "program references coin {arity} but only {} biases were given",
            p.len()
        )));
    }
    Ok(())
}

/// Exact output probability of a finite tree at `p`.
pub fn exact_eval(tree: &FiniteTree, p: &[BigRational]) -> Result<BigRational> {
    check_point_for(tree.arity(), p)?;
    fn go(t: &FiniteTree, p: &[BigRational]) -> BigRational {
        match t {
            FiniteTree::Leaf(true) => BigRational::one(),
            FiniteTree::Leaf(false) => BigRational::zero(),
            FiniteTree::Coin { coin, zero, one } => {
                let q = &p[*coin];
                q * go(one, p) + (BigRational::one() - q) * go(zero, p)
            }
            FiniteTree::Known { coin, zero, one } => {
                let c = coin.bias();
                c * go(one, p) + (BigRational::one() - c) * go(zero, p)
            }
        }
    }
    Ok(go(tree, p))
}

/// Replays a fixed prefix of outcomes; asks for a branch once it runs out.
struct Replay<'a> {
    script: &'a [bool],
    pos: usize,
    depth: usize,
    p: &'a [BigRational],
    pending: Option<BigRational>,
}

impl Replay<'_> {
    fn next(&mut self, prob_one: &BigRational) -> Result<bool, Interrupt> {
        if let Some(&b) = self.script.get(self.pos) {
            self.pos += 1;
            return Ok(b);
        }
        if self.pos < self.depth {
            self.pending = Some(prob_one.clone());
        }
        Err(Interrupt::Truncated)
    }
}

impl CoinSource for Replay<'_> {
    fn num_coins(&self) -> usize {
        self.p.len()
    }

    fn flip(&mut self, coin: usize) -> Result<bool, Interrupt> {
        let q = self.p.get(coin).ok_or_else(|| {
            Interrupt::Failed(FactoryError::usage(format!("coin index {} out of range", coin + 1)))
        })?;
        let q = q.clone();
        self.next(&q)
    }

    fn flip_known(&mut self, coin: &KnownCoin) -> Result<bool, Interrupt> {
        self.next(coin.bias())
    }
}

/// Exact bounds on the output probability from all transcripts of at most
/// `depth` draws (input flips and helper draws alike).
///
/// `lower` is the mass of transcripts that reach a 1-leaf, `upper` is one
/// minus the mass reaching a 0-leaf; the gap is the probability of needing
/// more than `depth` draws. Zero-probability branches are pruned.
pub fn truncated_bounds(
    program: &FactoryProgram,
    p: &[BigRational],
    depth: usize,
    work_limit: u64,
) -> Result<(BigRational, BigRational)> {
    check_point_for(program.arity(), p)?;
    if depth == 0 {
        return Err(FactoryError::usage("depth must be positive"));
    }
    let mut ones = BigRational::zero();
    let mut zeros = BigRational::zero();
    let mut stack: Vec<(Vec<bool>, BigRational)> = vec![(Vec::new(), BigRational::one())];
    let mut evaluations = 0u64;
    while let Some((script, weight)) = stack.pop() {
        evaluations += 1;
        if evaluations > work_limit {
            return Err(FactoryError::resource(format!(
                "transcript enumeration to depth {depth} exceeds {work_limit} evaluations"
            )));
        }
        let mut replay = Replay {
            script: &script,
            pos: 0,
            depth,
            p,
            pending: None,
        };
        match program.execute(&mut replay) {
            Ok(true) => ones += weight,
            Ok(false) => zeros += weight,
            Err(Interrupt::Truncated) => {
                if let Some(q) = replay.pending.take() {
                    let not_q = BigRational::one() - &q;
                    if not_q.is_positive() {
                        let mut s = script.clone();
                        s.push(false);
                        stack.push((s, &weight * not_q));
                    }
                    if q.is_positive() {
                        let mut s = script;
                        s.push(true);
                        stack.push((s, weight * q));
                    }
                }
            }
            Err(Interrupt::BudgetExhausted) => {}
            Err(Interrupt::Failed(e)) => return Err(e),
        }
    }
    Ok((ones, BigRational::one() - zeros))
}

/// `coeff * prod_i p_i^heads_i (1 - p_i)^tails_i`: the probability of one
/// root-to-leaf path. `heads_i` counts 1-edges taken after flipping coin `i`
/// (each has probability `p_i`), `tails_i` counts 0-edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BernsteinMonomial {
    pub coeff: BigRational,
    pub heads: Vec<u32>,
    pub tails: Vec<u32>,
}

impl BernsteinMonomial {
    pub fn value(&self, p: &[BigRational]) -> BigRational {
        let mut acc = self.coeff.clone();
        for (i, x) in p.iter().enumerate().take(self.heads.len()) {
            acc *= pow(x, self.heads[i]) * pow(&(BigRational::one() - x), self.tails[i]);
        }
        acc
    }

    pub fn degree(&self) -> u32 {
        self.heads
            .iter()
            .zip(&self.tails)
            .map(|(h, t)| (*h).max(*t))
            .max()
            .unwrap_or(0)
    }

    /// Positive somewhere on the open face iff no coin in `A` needs a head and
    /// no coin in `B` needs a tail.
    pub fn reaches(&self, face: &FacePartition) -> bool {
        face.zeros().iter().all(|&i| self.heads.get(i).copied().unwrap_or(0) == 0)
            && face.ones().iter().all(|&i| self.tails.get(i).copied().unwrap_or(0) == 0)
    }
}

/// One monomial per 1-leaf, in left-to-right leaf order.
pub fn leaf_monomials(tree: &FiniteTree) -> Vec<BernsteinMonomial> {
    let n = tree.arity();
    let mut out = Vec::new();
    let mut heads = vec![0u32; n];
    let mut tails = vec![0u32; n];
    fn walk(
        t: &FiniteTree,
        coeff: BigRational,
        heads: &mut Vec<u32>,
        tails: &mut Vec<u32>,
        out: &mut Vec<BernsteinMonomial>,
    ) {
        match t {
            FiniteTree::Leaf(false) => {}
            FiniteTree::Leaf(true) => out.push(BernsteinMonomial {
                coeff,
                heads: heads.clone(),
                tails: tails.clone(),
            }),
            FiniteTree::Coin { coin, zero, one } => {
                tails[*coin] += 1;
                walk(zero, coeff.clone(), heads, tails, out);
                tails[*coin] -= 1;
                heads[*coin] += 1;
                walk(one, coeff, heads, tails, out);
                heads[*coin] -= 1;
            }
            FiniteTree::Known { coin, zero, one } => {
                let c = coin.bias();
                walk(zero, &coeff * (BigRational::one() - c), heads, tails, out);
                walk(one, coeff * c, heads, tails, out);
            }
        }
    }
    walk(tree, BigRational::one(), &mut heads, &mut tails, &mut out);
    out
}

/// A lower-bound certificate `f >= c * face_poly^m` read off a single path
/// to a 1-leaf that stays reachable on `face`. Among such paths the one with
/// the smallest `m` (then the largest `c`) is returned.
pub fn face_certificate(tree: &FiniteTree, face: &FacePartition) -> Option<BoundCertificate> {
    leaf_monomials(tree)
        .into_iter()
        .filter(|m| m.reaches(face))
        .map(|m| BoundCertificate {
            m: m.degree(),
            c: m.coeff,
        })
        .min_by(|a, b| a.m.cmp(&b.m).then_with(|| b.c.cmp(&a.c)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::faces::face_poly;
    use crate::rational::{int, rat};

    fn intro() -> FiniteTree {
        FiniteTree::two_heads_then_tail([0, 0, 0])
    }

    #[test]
    fn intro_tree_values() {
        assert_eq!(exact_eval(&intro(), &[rat(1, 2)]).unwrap(), rat(1, 8));
        assert_eq!(exact_eval(&intro(), &[int(0)]).unwrap(), int(0));
        assert_eq!(exact_eval(&intro(), &[rat(2, 3)]).unwrap(), rat(4, 27));
        assert!(exact_eval(&intro(), &[rat(3, 2)]).is_err());
    }

    #[test]
    fn intro_tree_at_deterministic_biases() {
        for bias in [int(0), int(1)] {
            let mut bank = CoinBank::new(vec![bias], 5).unwrap();
            for _ in 0..200 {
                assert_eq!(FactoryProgram::from(intro()).run(&mut bank, FlipBudget::UNBOUNDED).unwrap(), Outcome::Zero);
            }
        }
    }

    #[test]
    fn run_rejects_missing_coins() {
        let tree = FiniteTree::two_heads_then_tail([0, 1, 2]);
        let mut bank = CoinBank::new(vec![rat(1, 2)], 5).unwrap();
        let prog = FactoryProgram::from(tree);
        assert!(matches!(prog.run(&mut bank, FlipBudget::UNBOUNDED), Err(FactoryError::Usage(_))));
    }

    #[test]
    fn truncation_examples() {
        let prog = FactoryProgram::from(intro());
        let (lo, hi) = truncated_bounds(&prog, &[rat(1, 2)], 3, DEFAULT_TRANSCRIPT_LIMIT).unwrap();
        assert_eq!((lo, hi), (rat(1, 8), rat(1, 8)));
        let (lo, hi) = truncated_bounds(&prog, &[rat(1, 3)], 1, DEFAULT_TRANSCRIPT_LIMIT).unwrap();
        assert_eq!((lo, hi), (int(0), int(1)));
        let err = truncated_bounds(&prog, &[rat(1, 2)], 3, 4).unwrap_err();
        assert!(matches!(err, FactoryError::Resource(_)));
    }

    #[test]
    fn json_round_trip_and_validation() {
        let json = r#"{"node": {"coin": 1, "zero": {"leaf": 0},
                       "one": {"node": {"bias": "1/3", "zero": {"leaf": 1}, "one": {"leaf": 0}}}}}"#;
        let tree = FiniteTree::from_json(json).unwrap();
        assert_eq!(exact_eval(&tree, &[rat(1, 2)]).unwrap(), rat(1, 3));
        assert_eq!(FiniteTree::from_json(&tree.to_json()).unwrap(), tree);
        assert!(FiniteTree::from_json(r#"{"leaf": 2}"#).is_err());
        assert!(FiniteTree::from_json(r#"{"node": {"coin": 0, "zero": {"leaf":0}, "one": {"leaf":1}}}"#).is_err());
        assert!(FiniteTree::from_json(r#"{"node": {"bias": "1", "zero": {"leaf":0}, "one": {"leaf":1}}}"#).is_err());
        assert!(FiniteTree::from_json(
            r#"{"node": {"coin": 1, "bias": "1/2", "zero": {"leaf":0}, "one": {"leaf":1}}}"#
        )
        .is_err());
    }

    #[test]
    fn monomials_of_trivial_trees() {
        let one = leaf_monomials(&FiniteTree::Leaf(true));
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].coeff, int(1));
        assert!(one[0].heads.is_empty());
        assert!(leaf_monomials(&FiniteTree::Leaf(false)).is_empty());
    }

    #[test]
    fn intro_three_coin_monomial() {
        let tree = FiniteTree::two_heads_then_tail([0, 1, 2]);
        let ms = leaf_monomials(&tree);
        assert_eq!(ms.len(), 1);
        assert_eq!(ms[0].coeff, int(1));
        assert_eq!(ms[0].heads, vec![1, 1, 0]);
        assert_eq!(ms[0].tails, vec![0, 0, 1]);
    }

    #[test]
    fn intro_face_certificate_holds_on_grid() {
        let tree = FiniteTree::two_heads_then_tail([0, 1, 2]);
        let face = FacePartition::new(3, vec![2], vec![]).unwrap();
        let cert = face_certificate(&tree, &face).expect("certificate present");
        assert_eq!(cert.m, 1);
        assert_eq!(cert.c, int(1));
        for a in 0..=4 {
            for b in 0..=4 {
                for c in 0..=4 {
                    let p = vec![rat(a, 4), rat(b, 4), rat(c, 4)];
                    let f = exact_eval(&tree, &p).unwrap();
                    let rhs = &cert.c * pow(&face_poly(&face, &p), cert.m);
                    assert!(f >= rhs);
                }
            }
        }
        // a face that needs coin 3 at 1 is unreachable for the only 1-path
        let face = FacePartition::new(3, vec![], vec![2]).unwrap();
        assert!(face_certificate(&tree, &face).is_none());
    }

    #[test]
    fn certificates_of_constant_trees() {
        let face = FacePartition::new(2, vec![0], vec![1]).unwrap();
        assert!(face_certificate(&FiniteTree::Leaf(false), &face).is_none());
        let cert = face_certificate(&FiniteTree::Leaf(true), &face).unwrap();
        assert_eq!((cert.c, cert.m), (int(1), 0));
    }
}

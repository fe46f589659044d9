//! Building factories out of other factories.

use std::sync::{Arc, OnceLock};

use num::{BigRational, One, Signed, Zero};

use crate::coin::{CoinBank, CoinSource, FlipBudget, Interrupt, KnownCoin, Metered};
use crate::error::{FactoryError, Result};
use crate::program::{Draw, FactoryProgram, FiniteTree};
use crate::rational::{fmt_rational, in_unit_interval, rat};

/// A single output bit of probability `c`: a leaf for 0 and 1, otherwise
/// one helper flip.
pub fn const_program(c: &BigRational) -> Result<FactoryProgram> {
    if !in_unit_interval(c) {
        return Err(FactoryError::usage(format!("constant {} is outside [0,1]", fmt_rational(c))));
    }
    let tree = if c.is_zero() {
        FiniteTree::Leaf(false)
    } else if c.is_one() {
        FiniteTree::Leaf(true)
    } else {
        FiniteTree::known(c.clone(), FiniteTree::Leaf(false), FiniteTree::Leaf(true))?
    };
    Ok(tree.into())
}

/// Flip coin `i` (0-based) and return the outcome.
pub fn coin_program(i: usize) -> FactoryProgram {
    FiniteTree::coin(i, FiniteTree::Leaf(false), FiniteTree::Leaf(true)).into()
}

pub fn complement(a: &FactoryProgram) -> FactoryProgram {
    match a {
        FactoryProgram::Tree(t) => t.complement().into(),
        FactoryProgram::Procedural(_) => {
            let inner = a.clone();
            FactoryProgram::procedural(format!("not {}", a.name()), a.arity(), move |src| {
                inner.execute(src).map(|b| !b)
            })
        }
    }
}

/// Conjunction of independent runs.
pub fn product(a: &FactoryProgram, b: &FactoryProgram) -> FactoryProgram {
    match (a, b) {
        (FactoryProgram::Tree(x), FactoryProgram::Tree(y)) => x.and_then(y).into(),
        _ => {
            let (x, y) = (a.clone(), b.clone());
            FactoryProgram::procedural(
                format!("{} * {}", a.name(), b.name()),
                a.arity().max(b.arity()),
                move |src| Ok(x.execute(src)? && y.execute(src)?),
            )
        }
    }
}

type Family = dyn Fn(usize) -> Result<FactoryProgram> + Send + Sync;

/// Weights and programs for a convex combination.
#[derive(Clone)]
pub enum WeightedMixture {
    /// Non-negative weights summing to at most 1; the deficit outputs 0.
    Finite {
        weights: Vec<BigRational>,
        programs: Vec<FactoryProgram>,
    },
    /// Weight `(1/4)(3/4)^(k-1)` on `family(k)`, `k >= 1`.
    Geometric {
        family: Arc<Family>,
        arity: usize,
        level_cap: usize,
    },
}

impl WeightedMixture {
    pub fn geometric<F>(arity: usize, level_cap: usize, family: F) -> Self
    where
        F: Fn(usize) -> Result<FactoryProgram> + Send + Sync + 'static,
    {
        WeightedMixture::Geometric {
            family: Arc::new(family),
            arity,
            level_cap,
        }
    }
}

/// `P[K = k] = (1/4)(3/4)^(k-1)`: count Bernoulli(1/4) draws up to the first 1.
pub fn geometric_index(src: &mut dyn CoinSource, level_cap: usize) -> Result<usize, Interrupt> {
    static QUARTER: OnceLock<KnownCoin> = OnceLock::new();
    let quarter = QUARTER.get_or_init(|| KnownCoin::new(rat(1, 4)).expect("1/4 is a valid bias"));
    let mut k = 1;
    while !src.flip_known(quarter)? {
        k += 1;
        if k > level_cap {
            return Err(Interrupt::Failed(FactoryError::resource(format!(
                "sampled level exceeds the cap of {level_cap}"
            ))));
        }
    }
    Ok(k)
}

/// Conditional biases `w_i / (1 - w_1 - ... - w_{i-1})` for sequential selection.
fn sequential_biases(weights: &[BigRational]) -> Vec<BigRational> {
    let mut rest = BigRational::one();
    weights
        .iter()
        .map(|w| {
            let c = if rest.is_positive() { w / &rest } else { BigRational::zero() };
            rest -= w;
            c
        })
        .collect()
}

pub fn convex_mix(m: &WeightedMixture) -> Result<FactoryProgram> {
    match m {
        WeightedMixture::Finite { weights, programs } => {
            if weights.len() != programs.len() {
                return Err(FactoryError::usage("one weight per program is required"));
            }
            if weights.iter().any(|w| w.is_negative()) {
                return Err(FactoryError::usage("mixture weights must be non-negative"));
            }
            let total: BigRational = weights.iter().sum();
            if total > BigRational::one() {
                return Err(FactoryError::usage(format!(
                    "mixture weights sum to {} > 1",
                    fmt_rational(&total)
                )));
            }
            let biases = sequential_biases(weights);
            if let Some(trees) = programs.iter().map(|p| p.as_tree()).collect::<Option<Vec<_>>>() {
                let mut tree = FiniteTree::Leaf(false);
                for (c, t) in biases.iter().zip(trees).rev() {
                    tree = if c.is_zero() {
                        tree
                    } else if c.is_one() {
                        t.clone()
                    } else {
                        FiniteTree::known(c.clone(), tree, t.clone())?
                    };
                }
                return Ok(tree.into());
            }
            let coins: Vec<Option<KnownCoin>> = biases
                .iter()
                .map(|c| if c.is_zero() || c.is_one() { None } else { KnownCoin::new(c.clone()).ok() })
                .collect();
            let selectors: Vec<(BigRational, Option<KnownCoin>)> = biases.into_iter().zip(coins).collect();
            let programs = programs.clone();
            let arity = programs.iter().map(|p| p.arity()).max().unwrap_or(0);
            Ok(FactoryProgram::procedural("finite mixture", arity, move |src| {
                for ((c, coin), prog) in selectors.iter().zip(&programs) {
                    let chosen = match coin {
                        Some(k) => src.flip_known(k)?,
                        None => c.is_one(),
                    };
                    if chosen {
                        return prog.execute(src);
                    }
                }
                Ok(false)
            }))
        }
        WeightedMixture::Geometric {
            family,
            arity,
            level_cap,
        } => {
            let family = family.clone();
            let cap = *level_cap;
            Ok(FactoryProgram::procedural("geometric mixture", *arity, move |src| {
                let k = geometric_index(src, cap)?;
                family(k)?.execute(src)
            }))
        }
    }
}

/// Uniform index in `0..k` from helper coins of bias `1/k, 1/(k-1), ...`.
pub fn uniform_index(src: &mut dyn CoinSource, coins: &[KnownCoin]) -> Result<usize, Interrupt> {
    for (i, c) in coins.iter().enumerate() {
        if src.flip_known(c)? {
            return Ok(i);
        }
    }
    Ok(coins.len())
}

/// Sequential coins `1/k, 1/(k-1), ..., 1/2` for a uniform choice among `k`.
pub fn uniform_coins(k: usize) -> Vec<KnownCoin> {
    (0..k.saturating_sub(1))
        .map(|i| KnownCoin::new(rat(1, (k - i) as i64)).expect("1/m with m >= 2"))
        .collect()
}

/// Returns index `i` with probability `f_i / sum_j f_j`: pick an index
/// uniformly, run its factory, retry on 0.
#[derive(Clone, Debug)]
pub struct BernoulliRace {
    programs: Arc<Vec<FactoryProgram>>,
    coins: Arc<Vec<KnownCoin>>,
}

pub fn bernoulli_race(programs: Vec<FactoryProgram>) -> Result<BernoulliRace> {
    if programs.is_empty() {
        return Err(FactoryError::usage("a race needs at least one program"));
    }
    let coins = uniform_coins(programs.len());
    Ok(BernoulliRace {
        programs: Arc::new(programs),
        coins: Arc::new(coins),
    })
}

impl BernoulliRace {
    pub fn len(&self) -> usize {
        self.programs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.programs.is_empty()
    }

    pub fn arity(&self) -> usize {
        self.programs.iter().map(|p| p.arity()).max().unwrap_or(0)
    }

    /// The winning index and the number of rounds it took.
    pub fn sample_counted(&self, src: &mut dyn CoinSource) -> Result<(usize, u64), Interrupt> {
        let mut rounds = 0;
        loop {
            rounds += 1;
            let i = uniform_index(src, &self.coins)?;
            if self.programs[i].execute(src)? {
                return Ok((i, rounds));
            }
        }
    }

    pub fn sample(&self, src: &mut dyn CoinSource) -> Result<usize, Interrupt> {
        self.sample_counted(src).map(|(i, _)| i)
    }

    pub fn run(&self, bank: &mut CoinBank, budget: FlipBudget) -> Result<Draw<usize>> {
        if self.arity() > bank.num_coins() {
            return Err(FactoryError::usage("race references more coins than the bank holds"));
        }
        let mut src = Metered::new(bank, budget);
        match self.sample(&mut src) {
            Ok(i) => Ok(Draw::Value(i)),
            Err(Interrupt::BudgetExhausted) => Ok(Draw::BudgetExhausted(src.used())),
            Err(Interrupt::Failed(e)) => Err(e),
            Err(Interrupt::Truncated) => Err(FactoryError::usage("unexpected truncation")),
        }
    }
}

/// `p_i / (p_i + p_j)`: choose one of the two coins uniformly, flip it,
/// output which one it was if it lands 1, otherwise retry.
pub fn ratio_retry(i: usize, j: usize) -> Result<FactoryProgram> {
    if i == j {
        return Err(FactoryError::usage("ratio_retry needs two distinct coins"));
    }
    let half = KnownCoin::new(rat(1, 2))?;
    Ok(FactoryProgram::procedural(
        format!("p{0}/(p{0}+p{1})", i + 1, j + 1),
        i.max(j) + 1,
        move |src| loop {
            let first = src.flip_known(&half)?;
            let coin = if first { i } else { j };
            if src.flip(coin)? {
                return Ok(first);
            }
        },
    ))
}

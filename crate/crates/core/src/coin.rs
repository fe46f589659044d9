//! Coins of unknown bias, helper coins of known bias, and the flip budget.
//!
//! A [`CoinBank`] holds the hidden bias vector and a seeded ChaCha stream.
//! Factories never see the biases: they only talk to a [`CoinSource`], which
//! is either a metered view of a bank or the transcript enumerator used by the
//! exact truncation bounds.

use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};
use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{FactoryError, Result};
use crate::rational::{check_unit_point, fmt_rational};

/// Why a run stopped without producing a value.
#[derive(Debug, Clone, PartialEq)]
pub enum Interrupt {
    /// The flip budget ran out.
    BudgetExhausted,
    /// The source refused to go deeper (transcript enumeration).
    Truncated,
    Failed(FactoryError),
}

impl From<FactoryError> for Interrupt {
    fn from(e: FactoryError) -> Self {
        Interrupt::Failed(e)
    }
}

/// The only interface a factory has to randomness.
pub trait CoinSource {
    fn num_coins(&self) -> usize;

    /// Flips input coin `coin` (0-based).
    fn flip(&mut self, coin: usize) -> Result<bool, Interrupt>;

    /// Flips a helper coin of known bias.
    fn flip_known(&mut self, coin: &KnownCoin) -> Result<bool, Interrupt>;
}

/// Exact Bernoulli draw against a rational bias: compare a uniform 64-bit
/// word with `floor(bias * 2^64)`; on equality, recurse on the fractional
/// remainder, which continues the binary expansion of the uniform variate.
#[derive(Debug, Clone)]
enum Threshold {
    Never,
    Always,
    Cut { word: u64, rest: BigRational },
}

impl Threshold {
    fn new(bias: &BigRational) -> Threshold {
        if !bias.is_positive() {
            return Threshold::Never;
        }
        if bias >= &BigRational::one() {
            return Threshold::Always;
        }
        let scaled = bias * BigRational::from_integer(BigInt::one() << 64);
        let floor = scaled.floor();
        let word = floor.to_integer().to_u64().expect("bias < 1 fits in 64 bits");
        Threshold::Cut {
            word,
            rest: scaled - floor,
        }
    }

    fn draw<R: RngCore>(&self, rng: &mut R) -> bool {
        match self {
            Threshold::Never => false,
            Threshold::Always => true,
            Threshold::Cut { word, rest } => {
                let w = rng.next_u64();
                if w != *word {
                    return w < *word;
                }
                if rest.is_zero() {
                    false
                } else {
                    Threshold::new(rest).draw(rng)
                }
            }
        }
    }
}

/// A helper coin with known bias `c` in the open interval `(0, 1)`.
#[derive(Debug, Clone)]
pub struct KnownCoin {
    bias: BigRational,
    threshold: Threshold,
}

impl KnownCoin {
    pub fn new(bias: BigRational) -> Result<Self> {
        if !bias.is_positive() || bias >= BigRational::one() {
            return Err(FactoryError::usage(format!(
                "known-bias coin needs 0 < c < 1, got {}",
                fmt_rational(&bias)
            )));
        }
        let threshold = Threshold::new(&bias);
        Ok(KnownCoin { bias, threshold })
    }

    pub fn bias(&self) -> &BigRational {
        &self.bias
    }
}

/// Upper limit on the number of draws (input flips plus helper draws) a
/// single run may perform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlipBudget {
    pub max_flips: Option<u64>,
}

impl FlipBudget {
    pub const UNBOUNDED: FlipBudget = FlipBudget { max_flips: None };

    pub fn limited(max_flips: u64) -> Self {
        assert!(max_flips > 0, "a flip budget must be positive");
        FlipBudget {
            max_flips: Some(max_flips),
        }
    }
}

/// The `n` input coins plus the randomness stream used for helper coins.
#[derive(Debug, Clone)]
pub struct CoinBank {
    biases: Vec<BigRational>,
    thresholds: Vec<Threshold>,
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
    flip_counts: Vec<u64>,
    helper_draws: u64,
}

impl CoinBank {
    pub fn new(biases: Vec<BigRational>, seed: u64) -> Result<Self> {
        Self::with_stream(biases, seed, 0)
    }

    /// Bank on ChaCha stream `stream` of `seed`. Distinct streams never
    /// overlap, so trial `i` of a batch can use stream `i + 1`.
    pub fn with_stream(biases: Vec<BigRational>, seed: u64, stream: u64) -> Result<Self> {
        check_unit_point(&biases)?;
        let thresholds = biases.iter().map(Threshold::new).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let n = biases.len();
        Ok(CoinBank {
            biases,
            thresholds,
            seed,
            stream,
            rng,
            flip_counts: vec![0; n],
            helper_draws: 0,
        })
    }

    /// Fresh bank with the same biases on the stream reserved for `trial`.
    pub fn for_trial(&self, seed: u64, trial: u64) -> CoinBank {
        Self::with_stream(self.biases.clone(), seed, trial + 1).expect("biases already validated")
    }

    pub fn num_coins(&self) -> usize {
        self.biases.len()
    }

    /// The hidden biases. Oracles and reports use them; factories must not.
    pub fn biases(&self) -> &[BigRational] {
        &self.biases
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn flip_counts(&self) -> &[u64] {
        &self.flip_counts
    }

    pub fn total_flips(&self) -> u64 {
        self.flip_counts.iter().sum()
    }

    pub fn helper_draws(&self) -> u64 {
        self.helper_draws
    }

    pub fn flip(&mut self, coin: usize) -> Result<bool> {
        let n = self.biases.len();
        let th = self.thresholds.get(coin).ok_or_else(|| {
            FactoryError::usage(format!("coin index {} out of range 1..={n}", coin + 1))
        })?;
        self.flip_counts[coin] += 1;
        Ok(th.draw(&mut self.rng))
    }

    pub fn flip_known(&mut self, coin: &KnownCoin) -> bool {
        self.helper_draws += 1;
        coin.threshold.draw(&mut self.rng)
    }
}

impl CoinSource for CoinBank {
    fn num_coins(&self) -> usize {
        self.biases.len()
    }

    fn flip(&mut self, coin: usize) -> Result<bool, Interrupt> {
        CoinBank::flip(self, coin).map_err(Interrupt::from)
    }

    fn flip_known(&mut self, coin: &KnownCoin) -> Result<bool, Interrupt> {
        Ok(CoinBank::flip_known(self, coin))
    }
}

/// A bank seen through a flip budget.
pub struct Metered<'a> {
    bank: &'a mut CoinBank,
    budget: FlipBudget,
    used: u64,
}

impl<'a> Metered<'a> {
    pub fn new(bank: &'a mut CoinBank, budget: FlipBudget) -> Self {
        Metered {
            bank,
            budget,
            used: 0,
        }
    }

    /// Draws performed so far (input flips plus helper draws).
    pub fn used(&self) -> u64 {
        self.used
    }

    fn charge(&mut self) -> Result<(), Interrupt> {
        if let Some(max) = self.budget.max_flips {
            if self.used >= max {
                return Err(Interrupt::BudgetExhausted);
            }
        }
        self.used += 1;
        Ok(())
    }
}

impl CoinSource for Metered<'_> {
    fn num_coins(&self) -> usize {
        self.bank.num_coins()
    }

    fn flip(&mut self, coin: usize) -> Result<bool, Interrupt> {
        if coin >= self.bank.num_coins() {
            return Err(FactoryError::usage(format!(
                "coin index {} out of range 1..={}",
                coin + 1,
                self.bank.num_coins()
            ))
            .into());
        }
        self.charge()?;
        CoinBank::flip(self.bank, coin).map_err(Interrupt::from)
    }

    fn flip_known(&mut self, coin: &KnownCoin) -> Result<bool, Interrupt> {
        self.charge()?;
        Ok(self.bank.flip_known(coin))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, rat};

    #[test]
    fn deterministic_coins() {
        let mut bank = CoinBank::new(vec![int(1), int(0)], 7).unwrap();
        for _ in 0..1000 {
            assert!(bank.flip(0).unwrap());
            assert!(!bank.flip(1).unwrap());
        }
        assert_eq!(bank.flip_counts(), &[1000, 1000]);
    }

    #[test]
    fn out_of_range_coin_is_usage_error() {
        let mut bank = CoinBank::new(vec![rat(1, 2)], 1).unwrap();
        assert!(matches!(bank.flip(1), Err(FactoryError::Usage(_))));
        assert!(CoinBank::new(vec![rat(3, 2)], 1).is_err());
    }

    #[test]
    fn fair_coin_within_three_sigma() {
        let mut bank = CoinBank::new(vec![rat(1, 2)], 2024).unwrap();
        let n = 100_000;
        let heads = (0..n).filter(|_| bank.flip(0).unwrap()).count() as f64;
        let sigma = 0.5 / (n as f64).sqrt();
        assert!((heads / n as f64 - 0.5).abs() < 3.0 * sigma);
    }

    #[test]
    fn known_coin_rejects_degenerate_biases() {
        assert!(KnownCoin::new(int(0)).is_err());
        assert!(KnownCoin::new(int(1)).is_err());
        assert!(KnownCoin::new(rat(5, 4)).is_err());
        assert_eq!(KnownCoin::new(rat(3, 4)).unwrap().bias(), &rat(3, 4));
    }

    #[test]
    fn known_coin_half_band() {
        let half = KnownCoin::new(rat(1, 2)).unwrap();
        let mut bank = CoinBank::new(vec![], 99).unwrap();
        let n = 100_000;
        let ones = (0..n).filter(|_| bank.flip_known(&half)).count() as f64 / n as f64;
        assert!((0.495..=0.505).contains(&ones), "mean {ones}");
        assert_eq!(bank.helper_draws(), n as u64);
    }

    #[test]
    fn identical_banks_identical_transcripts() {
        let third = KnownCoin::new(rat(1, 3)).unwrap();
        let mut a = CoinBank::new(vec![rat(2, 7)], 11).unwrap();
        let mut b = CoinBank::new(vec![rat(2, 7)], 11).unwrap();
        for i in 0..500 {
            if i % 3 == 0 {
                assert_eq!(a.flip(0).unwrap(), b.flip(0).unwrap());
            } else {
                assert_eq!(a.flip_known(&third), b.flip_known(&third));
            }
        }
        let mut c = a.for_trial(11, 5);
        let mut d = b.for_trial(11, 5);
        let mut e = b.for_trial(11, 6);
        let sc: Vec<bool> = (0..64).map(|_| c.flip_known(&third)).collect();
        let sd: Vec<bool> = (0..64).map(|_| d.flip_known(&third)).collect();
        let se: Vec<bool> = (0..64).map(|_| e.flip_known(&third)).collect();
        assert_eq!(sc, sd);
        assert_ne!(sc, se);
    }

    #[test]
    fn dyadic_bias_boundary_is_exact() {
        // bias 1/2 has word 2^63 and zero remainder: a draw equal to the
        // word must map to 0, since U = 1/2 is not below 1/2.
        let th = Threshold::new(&rat(1, 2));
        match th {
            Threshold::Cut { word, ref rest } => {
                assert_eq!(word, 1u64 << 63);
                assert!(rest.is_zero());
            }
            _ => panic!("expected a cut"),
        }
        let th = Threshold::new(&rat(1, 3));
        match th {
            Threshold::Cut { ref rest, .. } => assert_eq!(rest, &rat(1, 3)),
            _ => panic!("expected a cut"),
        }
    }

    #[test]
    fn budget_stops_runs() {
        let mut bank = CoinBank::new(vec![rat(1, 2)], 3).unwrap();
        let mut src = Metered::new(&mut bank, FlipBudget::limited(5));
        for _ in 0..5 {
            src.flip(0).unwrap();
        }
        assert_eq!(src.flip(0), Err(Interrupt::BudgetExhausted));
        assert_eq!(src.used(), 5);
        assert_eq!(bank.total_flips(), 5);
    }
}

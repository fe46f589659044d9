//! Seeded trial runner, frequency tables against exact oracles, z-scores,
//! Pearson chi-square and flip-count statistics.
//!
//! Trial `i` runs on the bank stream reserved for `i`, so a run is a pure
//! function of `(seed, trials)` no matter how rayon schedules the work.

use std::collections::BTreeMap;

use num::{BigRational, One, Signed, Zero};
use rayon::prelude::*;
use serde_json::{json, Value};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::coin::{CoinBank, FlipBudget};
use crate::error::Result;
use crate::program::{Draw, Outcome};
use crate::rational::{fmt_rational, to_f64};

pub const DEFAULT_ALPHA: f64 = 0.001;

pub const CSV_HEADER: &str = "outcome,count,oracle_num,oracle_den,z,flips_p50,flips_p99";

/// Label of the row counting budget-exhausted trials.
pub const EXHAUSTED: &str = "budget_exhausted";
/// Label of the row counting trials that stopped with an error.
pub const FAILED: &str = "failed";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TrialResult {
    Done(String),
    Exhausted,
    Failed(String),
}

#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub result: TrialResult,
    pub flips: u64,
}

/// Raw per-trial records of one run.
#[derive(Debug, Clone)]
pub struct TrialRun {
    pub sampler: String,
    pub seed: u64,
    pub records: Vec<TrialRecord>,
}

impl TrialRun {
    pub fn trials(&self) -> u64 {
        self.records.len() as u64
    }

    pub fn counts(&self) -> BTreeMap<String, u64> {
        let mut out = BTreeMap::new();
        for r in &self.records {
            if let TrialResult::Done(label) = &r.result {
                *out.entry(label.clone()).or_insert(0) += 1;
            }
        }
        out
    }

    pub fn completed(&self) -> u64 {
        self.records.iter().filter(|r| matches!(r.result, TrialResult::Done(_))).count() as u64
    }

    pub fn exhausted(&self) -> u64 {
        self.records.iter().filter(|r| r.result == TrialResult::Exhausted).count() as u64
    }

    pub fn failed(&self) -> u64 {
        self.records.iter().filter(|r| matches!(r.result, TrialResult::Failed(_))).count() as u64
    }
}

/// Label for a 0/1 factory output.
pub fn bit_label(bit: bool) -> String {
    if bit { "1" } else { "0" }.to_string()
}

/// Adapts a bit-valued run result to a labelled draw.
pub fn outcome_draw(o: Outcome) -> Draw<String> {
    match o {
        Outcome::One => Draw::Value(bit_label(true)),
        Outcome::Zero => Draw::Value(bit_label(false)),
        Outcome::BudgetExhausted(n) => Draw::BudgetExhausted(n),
    }
}

/// Runs `trials` independent trials. Trial `i` gets `template.for_trial(seed, i)`.
/// Budget exhaustion and sampler errors are recorded, not propagated.
pub fn run_trials<F>(
    sampler: &str,
    template: &CoinBank,
    trials: u64,
    seed: u64,
    budget: FlipBudget,
    body: F,
) -> TrialRun
where
    F: Fn(&mut CoinBank, FlipBudget) -> Result<Draw<String>> + Sync,
{
    let records = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut bank = template.for_trial(seed, i);
            let result = match body(&mut bank, budget) {
                Ok(Draw::Value(label)) => TrialResult::Done(label),
                Ok(Draw::BudgetExhausted(_)) => TrialResult::Exhausted,
                Err(e) => TrialResult::Failed(e.to_string()),
            };
            TrialRecord {
                result,
                flips: bank.total_flips() + bank.helper_draws(),
            }
        })
        .collect();
    TrialRun {
        sampler: sampler.to_string(),
        seed,
        records,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Quantiles {
    pub p50: u64,
    pub p90: u64,
    pub p99: u64,
    pub max: u64,
}

impl Quantiles {
    /// Nearest-rank quantiles; all zero for an empty sample.
    pub fn of(values: &[u64]) -> Quantiles {
        if values.is_empty() {
            return Quantiles::default();
        }
        let mut v = values.to_vec();
        v.sort_unstable();
        let rank = |q: f64| v[((q * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1];
        Quantiles {
            p50: rank(0.5),
            p90: rank(0.9),
            p99: rank(0.99),
            max: v[v.len() - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub critical: f64,
    pub pass: bool,
    pub diagnostic: Option<String>,
}

/// Pearson goodness of fit against exact cell probabilities.
///
/// Cells with expected count below 5 are pooled, smallest first. A count in
/// a zero-probability cell fails outright.
pub fn chi_square(counts: &[u64], probs: &[BigRational], alpha: f64) -> ChiSquare {
    let total: u64 = counts.iter().sum();
    for (i, (c, p)) in counts.iter().zip(probs).enumerate() {
        if p.is_zero() && *c > 0 {
            return ChiSquare {
                statistic: f64::INFINITY,
                dof: 0,
                critical: 0.0,
                pass: false,
                diagnostic: Some(format!("cell {} has probability 0 but {c} observations", i + 1)),
            };
        }
    }
    let mut cells: Vec<(f64, f64)> = counts
        .iter()
        .zip(probs)
        .filter(|(_, p)| p.is_positive())
        .map(|(c, p)| (*c as f64, to_f64(p) * total as f64))
        .collect();
    loop {
        cells.sort_by(|a, b| a.1.total_cmp(&b.1));
        if cells.len() < 2 || cells[0].1 >= 5.0 {
            break;
        }
        let (o, e) = cells.remove(0);
        cells[0].0 += o;
        cells[0].1 += e;
    }
    let dof = cells.len().saturating_sub(1);
    if dof == 0 {
        return ChiSquare {
            statistic: 0.0,
            dof,
            critical: 0.0,
            pass: true,
            diagnostic: None,
        };
    }
    let statistic = cells.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let critical = ChiSquared::new(dof as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(1.0 - alpha);
    ChiSquare {
        statistic,
        dof,
        critical,
        pass: statistic <= critical,
        diagnostic: None,
    }
}

/// `(count - N p) / sqrt(N p (1-p))`; a degenerate `p` gives 0 on an exact
/// match and infinity otherwise.
pub fn z_score(count: u64, n: u64, p: &BigRational) -> f64 {
    if p.is_zero() || p.is_one() {
        let expected = if p.is_one() { n } else { 0 };
        return if count == expected { 0.0 } else { f64::INFINITY };
    }
    let pf = to_f64(p);
    let n = n as f64;
    (count as f64 - n * pf) / (n * pf * (1.0 - pf)).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub outcome: String,
    pub count: u64,
    pub oracle: Option<BigRational>,
    pub z: Option<f64>,
    pub flips_p50: u64,
    pub flips_p99: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialReport {
    pub sampler: String,
    pub seed: u64,
    pub trials: u64,
    pub completed: u64,
    pub exhausted: u64,
    pub failed: u64,
    pub first_failure: Option<String>,
    pub rows: Vec<ReportRow>,
    pub chi_square: Option<ChiSquare>,
    pub flips: Quantiles,
}

impl TrialReport {
    /// Tabulates `run`; with an oracle, rows follow the oracle order (unseen
    /// outcomes get count 0) and unexpected outcomes come last.
    pub fn new(run: &TrialRun, oracle: Option<&[(String, BigRational)]>, alpha: f64) -> TrialReport {
        let completed = run.completed();
        let mut by_label: BTreeMap<&str, Vec<u64>> = BTreeMap::new();
        let mut exhausted_flips = Vec::new();
        let mut failed_flips = Vec::new();
        let mut done_flips = Vec::new();
        let mut first_failure = None;
        for r in &run.records {
            match &r.result {
                TrialResult::Done(label) => {
                    by_label.entry(label).or_default().push(r.flips);
                    done_flips.push(r.flips);
                }
                TrialResult::Exhausted => exhausted_flips.push(r.flips),
                TrialResult::Failed(msg) => {
                    failed_flips.push(r.flips);
                    first_failure.get_or_insert_with(|| msg.clone());
                }
            }
        }
        let row = |label: &str, flips: &[u64], oracle: Option<&BigRational>| {
            let q = Quantiles::of(flips);
            let count = flips.len() as u64;
            ReportRow {
                outcome: label.to_string(),
                count,
                oracle: oracle.cloned(),
                z: oracle.map(|p| z_score(count, completed, p)),
                flips_p50: q.p50,
                flips_p99: q.p99,
            }
        };
        let mut rows = Vec::new();
        let mut chi = None;
        match oracle {
            Some(table) => {
                for (label, p) in table {
                    let flips = by_label.remove(label.as_str()).unwrap_or_default();
                    rows.push(row(label, &flips, Some(p)));
                }
                let zero = BigRational::zero();
                for (label, flips) in &by_label {
                    rows.push(row(label, flips, Some(&zero)));
                }
                let counts: Vec<u64> = rows.iter().map(|r| r.count).collect();
                let probs: Vec<BigRational> = rows.iter().map(|r| r.oracle.clone().unwrap_or_default()).collect();
                chi = Some(chi_square(&counts, &probs, alpha));
            }
            None => {
                for (label, flips) in &by_label {
                    rows.push(row(label, flips, None));
                }
            }
        }
        if !exhausted_flips.is_empty() {
            rows.push(row(EXHAUSTED, &exhausted_flips, None));
        }
        if !failed_flips.is_empty() {
            rows.push(row(FAILED, &failed_flips, None));
        }
        TrialReport {
            sampler: run.sampler.clone(),
            seed: run.seed,
            trials: run.trials(),
            completed,
            exhausted: exhausted_flips.len() as u64,
            failed: failed_flips.len() as u64,
            first_failure,
            rows,
            chi_square: chi,
            flips: Quantiles::of(&done_flips),
        }
    }

    pub fn row(&self, outcome: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.outcome == outcome)
    }

    /// Largest `|z|` over the oracle rows.
    pub fn max_abs_z(&self) -> f64 {
        self.rows.iter().filter_map(|r| r.z).map(f64::abs).fold(0.0, f64::max)
    }

    /// Every oracle row within `k` standard deviations.
    pub fn within_sigma(&self, k: f64) -> bool {
        self.max_abs_z() <= k
    }

    pub fn frequency(&self, outcome: &str) -> f64 {
        if self.completed == 0 {
            return 0.0;
        }
        self.row(outcome).map_or(0.0, |r| r.count as f64 / self.completed as f64)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let (num, den) = match &r.oracle {
                Some(p) => (p.numer().to_string(), p.denom().to_string()),
                None => (String::new(), String::new()),
            };
            let z = match r.z {
                Some(z) if z.is_finite() => format!("{z:.4}"),
                Some(_) => "inf".to_string(),
                None => String::new(),
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                csv_field(&r.outcome),
                r.count,
                num,
                den,
                z,
                r.flips_p50,
                r.flips_p99
            ));
        }
        out
    }

    pub fn to_json(&self) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                json!({
                    "outcome": r.outcome,
                    "count": r.count,
                    "oracle": r.oracle.as_ref().map(fmt_rational),
                    "z": r.z.filter(|z| z.is_finite()),
                    "flips_p50": r.flips_p50,
                    "flips_p99": r.flips_p99,
                })
            })
            .collect();
        json!({
            "sampler": self.sampler,
            "seed": self.seed,
            "trials": self.trials,
            "completed": self.completed,
            "budget_exhausted": self.exhausted,
            "failed": self.failed,
            "first_failure": self.first_failure,
            "rows": rows,
            "chi_square": self.chi_square.as_ref().map(|c| json!({
                "statistic": if c.statistic.is_finite() { json!(c.statistic) } else { Value::Null },
                "dof": c.dof,
                "critical": c.critical,
                "pass": c.pass,
                "diagnostic": c.diagnostic,
            })),
            "flips": {
                "p50": self.flips.p50,
                "p90": self.flips.p90,
                "p99": self.flips.p99,
                "max": self.flips.max,
            },
        })
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

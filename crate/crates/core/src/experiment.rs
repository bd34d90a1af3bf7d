//! Random task systems and success-ratio sweeps.
//!
//! Every trial draws its system from a generator seeded by a hash of the
//! master seed, the CPU count, the utilization fraction and the trial index.
//! The seed does not depend on `K` or on the mode, so all strategies in a
//! cell see the same systems and can be compared trial by trial.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::assign::semi_partition;
use crate::model::validate_system;
use crate::{AnalysisConfig, Status, Task, TaskSystem, TestMode, Ticks, DEFAULT_HORIZON_CAP};

pub const PERIOD_MIN: Ticks = 100;
pub const PERIOD_MAX: Ticks = 3000;
pub const CPU_CHOICES: [usize; 6] = [2, 4, 8, 16, 32, 64];
pub const DEFAULT_SEED: u64 = 42;

/// The fractions 0.50, 0.55, ..., 0.95.
pub fn standard_fractions() -> Vec<Ratio<u64>> {
    (10..=19).map(|i| Ratio::new(i, 20)).collect()
}

/// Strategy compared in a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Strategy {
    /// Partitioning only; `K` is forced to 1.
    Ffd,
    Packed,
    Pattern,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Ffd => "FFD",
            Strategy::Packed => "Packed",
            Strategy::Pattern => "Pattern",
        }
    }

    fn mode(self) -> TestMode {
        match self {
            Strategy::Packed => TestMode::Packed,
            // With K = 1 both tests coincide.
            Strategy::Ffd | Strategy::Pattern => TestMode::Pattern,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "ffd" => Ok(Strategy::Ffd),
            "packed" => Ok(Strategy::Packed),
            "pattern" => Ok(Strategy::Pattern),
            _ => Err(format!("unknown mode `{s}` (expected ffd, packed or pattern)")),
        }
    }
}

/// How per-task utilizations are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Generator {
    /// Uniform draws in (0, 1] until the target is reached, last draw truncated.
    #[default]
    Sequential,
    /// UUniFast with `ceil(2 * target)` tasks, redrawn while any share exceeds 1.
    UunifastDiscard,
}

impl FromStr for Generator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "sequential" => Ok(Generator::Sequential),
            "uunifast" | "uunifast-discard" => Ok(Generator::UunifastDiscard),
            _ => Err(format!("unknown generator `{s}` (expected sequential or uunifast)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SweepError {
    #[error("trials must be at least 1")]
    NoTrials,
    #[error("CPU count {0} not in {{2, 4, 8, 16, 32, 64}}")]
    CpuCount(usize),
    #[error("fraction {0} outside [0.50, 0.95]")]
    Fraction(String),
    #[error("K must be at least 1")]
    ZeroK,
    #[error("{0} list is empty")]
    Empty(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepConfig {
    pub cpu_counts: Vec<usize>,
    pub fractions: Vec<Ratio<u64>>,
    pub k_values: Vec<usize>,
    pub modes: Vec<Strategy>,
    pub trials: usize,
    pub seed: u64,
    pub cap: Ticks,
    pub generator: Generator,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            cpu_counts: vec![2, 4],
            fractions: standard_fractions(),
            k_values: vec![2, 4, 8, 20],
            modes: vec![Strategy::Ffd, Strategy::Packed, Strategy::Pattern],
            trials: 100,
            seed: DEFAULT_SEED,
            cap: DEFAULT_HORIZON_CAP,
            generator: Generator::Sequential,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), SweepError> {
        if self.trials == 0 {
            return Err(SweepError::NoTrials);
        }
        if self.cpu_counts.is_empty() {
            return Err(SweepError::Empty("CPU count"));
        }
        if self.fractions.is_empty() {
            return Err(SweepError::Empty("fraction"));
        }
        if self.modes.is_empty() {
            return Err(SweepError::Empty("mode"));
        }
        if self.modes.iter().any(|&s| s != Strategy::Ffd) && self.k_values.is_empty() {
            return Err(SweepError::Empty("K"));
        }
        if let Some(&m) = self.cpu_counts.iter().find(|m| !CPU_CHOICES.contains(m)) {
            return Err(SweepError::CpuCount(m));
        }
        let (lo, hi) = (Ratio::new(1, 2), Ratio::new(19, 20));
        if let Some(f) = self.fractions.iter().find(|&&f| f < lo || f > hi) {
            return Err(SweepError::Fraction(fraction_label(*f)));
        }
        if self.k_values.contains(&0) {
            return Err(SweepError::ZeroK);
        }
        Ok(())
    }

    /// `(strategy, K)` pairs evaluated on every trial, in table order.
    pub fn columns(&self) -> Vec<(Strategy, usize)> {
        let mut cols = Vec::new();
        for &s in &self.modes {
            if s == Strategy::Ffd {
                cols.push((s, 1));
            } else {
                cols.extend(self.k_values.iter().map(|&k| (s, k)));
            }
        }
        cols.dedup();
        cols
    }
}

/// Parses a decimal such as `0.75` into an exact fraction.
pub fn parse_fraction(s: &str) -> Result<Ratio<u64>, String> {
    let bad = || format!("invalid fraction `{s}`");
    let s = s.trim();
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    if (int.is_empty() && frac.is_empty()) || frac.len() > 9 {
        return Err(bad());
    }
    let digits = |p: &str| -> Result<u64, String> {
        if p.is_empty() {
            Ok(0)
        } else if p.bytes().all(|b| b.is_ascii_digit()) {
            p.parse().map_err(|_| bad())
        } else {
            Err(bad())
        }
    };
    let scale = 10u64.pow(frac.len() as u32);
    let numer = digits(int)?.checked_mul(scale).and_then(|v| v.checked_add(digits(frac).ok()?)).ok_or_else(bad)?;
    Ok(Ratio::new(numer, scale))
}

/// Decimal rendering with at least two places, e.g. `0.50`.
pub fn fraction_label(f: Ratio<u64>) -> String {
    let mut s = format!("{:.6}", *f.numer() as f64 / *f.denom() as f64);
    while s.ends_with('0') && s.len() - s.find('.').unwrap_or(0) > 3 {
        s.pop();
    }
    s
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of one trial; independent of `K` and mode so trials are paired.
pub fn trial_seed(seed: u64, m: usize, fraction: Ratio<u64>, trial: usize) -> u64 {
    [m as u64, *fraction.numer(), *fraction.denom(), trial as u64]
        .into_iter()
        .fold(splitmix64(seed), |h, v| splitmix64(h ^ v))
}

fn sequential_utilizations(target: f64, rng: &mut impl Rng) -> Vec<f64> {
    let mut us = Vec::new();
    let mut sum = 0.0;
    loop {
        // (0, 1]
        let u = 1.0 - rng.gen::<f64>();
        if sum + u >= target {
            us.push(target - sum);
            return us;
        }
        us.push(u);
        sum += u;
    }
}

fn uunifast_discard(target: f64, rng: &mut impl Rng) -> Vec<f64> {
    let n = (2.0 * target).ceil().max(1.0) as usize;
    loop {
        let mut us = Vec::with_capacity(n);
        let mut rest = target;
        for i in 1..n {
            let next = rest * rng.gen::<f64>().powf(1.0 / (n - i) as f64);
            us.push(rest - next);
            rest = next;
        }
        us.push(rest);
        if us.iter().all(|&u| u <= 1.0) {
            return us;
        }
    }
}

/// Random implicit-deadline system with total utilization `m * fraction`.
///
/// Periods are uniform in `[100, 3000]` and `C = max(1, round(u * T))`, so the
/// realised total differs from the target by at most `n / 200`.
pub fn generate_task_system(m: usize, fraction: Ratio<u64>, generator: Generator, rng: &mut impl Rng) -> TaskSystem {
    let target = m as f64 * *fraction.numer() as f64 / *fraction.denom() as f64;
    let us = if target <= 0.0 {
        Vec::new()
    } else {
        match generator {
            Generator::Sequential => sequential_utilizations(target, rng),
            Generator::UunifastDiscard => uunifast_discard(target, rng),
        }
    };
    let tasks = us
        .into_iter()
        .enumerate()
        .map(|(i, u)| {
            let period = rng.gen_range(PERIOD_MIN..=PERIOD_MAX);
            let wcet = ((u * period as f64).round() as Ticks).clamp(1, period);
            Task { id: i as u32 + 1, wcet, deadline: period, period }
        })
        .collect();
    TaskSystem { tasks, cpu_count: m }
}

/// System used by trial `trial` of cell `(m, fraction)`.
pub fn trial_system(cfg: &SweepConfig, m: usize, fraction: Ratio<u64>, trial: usize) -> TaskSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(cfg.seed, m, fraction, trial));
    let system = generate_task_system(m, fraction, cfg.generator, &mut rng);
    debug_assert!(system.tasks.is_empty() || validate_system(system.tasks.clone(), m).is_ok());
    system
}

/// Verdict of one strategy on one system.
pub fn evaluate(system: &TaskSystem, strategy: Strategy, k: usize, cap: Ticks) -> Status {
    if system.tasks.is_empty() {
        return Status::Schedulable;
    }
    let k = if strategy == Strategy::Ffd { 1 } else { k };
    let config = AnalysisConfig { k, mode: strategy.mode(), cap };
    semi_partition(system, &config).1.status
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub m: usize,
    pub fraction: String,
    #[serde(rename = "K")]
    pub k: usize,
    pub mode: Strategy,
    pub trials: usize,
    pub successes: usize,
    pub overflows: usize,
    pub ratio: f64,
    /// Per-trial verdicts in trial order.
    #[serde(skip)]
    pub outcomes: Vec<Status>,
}

/// Runs every cell of the sweep. Rows are ordered by `m`, fraction, then the
/// configured modes and `K` values; the result does not depend on the number
/// of worker threads.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>, SweepError> {
    cfg.validate()?;
    let columns = cfg.columns();
    let mut rows = Vec::new();
    for &m in &cfg.cpu_counts {
        for &fraction in &cfg.fractions {
            let per_trial: Vec<Vec<Status>> = (0..cfg.trials)
                .into_par_iter()
                .map(|trial| {
                    let system = trial_system(cfg, m, fraction, trial);
                    columns.iter().map(|&(s, k)| evaluate(&system, s, k, cfg.cap)).collect()
                })
                .collect();
            for (c, &(mode, k)) in columns.iter().enumerate() {
                let outcomes: Vec<Status> = per_trial.iter().map(|v| v[c]).collect();
                let successes = outcomes.iter().filter(|s| s.is_schedulable()).count();
                let overflows = outcomes.iter().filter(|&&s| s == Status::HorizonOverflow).count();
                rows.push(SweepRow {
                    m,
                    fraction: fraction_label(fraction),
                    k,
                    mode,
                    trials: cfg.trials,
                    successes,
                    overflows,
                    ratio: successes as f64 / cfg.trials as f64,
                    outcomes,
                });
            }
        }
    }
    Ok(rows)
}

pub const CSV_HEADER: &str = "m,fraction,K,mode,trials,successes,overflows,ratio";

pub fn write_csv(rows: &[SweepRow], mut out: impl Write) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{:.4}",
            r.m, r.fraction, r.k, r.mode, r.trials, r.successes, r.overflows, r.ratio
        )?;
    }
    Ok(())
}

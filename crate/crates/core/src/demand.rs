//! Demand bound functions and the per-CPU EDF tests.
//!
//! Three demand functions are provided:
//!
//! * [`dbf_classic`] for ordinary sporadic tasks,
//! * [`dbf_packed`] for a multiframe image whose nonzero frames are assumed to
//!   sit at the front of the cycle (only the number of jobs matters),
//! * [`dbf_pattern`] for a multiframe image with its actual 0/C pattern, taking
//!   the worst cyclic alignment of the pattern with the interval start.
//!
//! [`schedulability_test`] sums them over a CPU workload and checks
//! `demand(t) <= t` at every absolute deadline up to a finite horizon. The
//! horizon is the smaller of the hyperperiod and the point past which the
//! linear upper bound `density * t + burst` can no longer exceed `t`.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

use crate::model::{to_big, MultiframeTask, Status, Task, Witness, WorkloadVerdict};
use crate::Tick;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TestMode {
    /// Every multiframe is analysed as its packed form.
    Packed,
    /// Multiframes are analysed with their actual frame pattern.
    Pattern,
}

impl TestMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TestMode::Packed => "packed",
            TestMode::Pattern => "pattern",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DemandError {
    #[error("analysis horizon exceeds the cap of {cap} ticks")]
    HorizonOverflow { cap: String },
}

/// Everything assigned to one CPU.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CpuWorkload<T> {
    pub fixed: Vec<Task<T>>,
    pub multiframes: Vec<MultiframeTask<T>>,
}

impl<T> Default for CpuWorkload<T> {
    fn default() -> Self {
        Self { fixed: Vec::new(), multiframes: Vec::new() }
    }
}

impl<T: Tick> CpuWorkload<T> {
    pub fn new(fixed: Vec<Task<T>>, multiframes: Vec<MultiframeTask<T>>) -> Self {
        Self { fixed, multiframes }
    }

    pub fn is_empty(&self) -> bool {
        self.fixed.is_empty() && self.multiframes.is_empty()
    }

    pub fn with_fixed(&self, task: Task<T>) -> Self {
        let mut w = self.clone();
        w.fixed.push(task);
        w
    }

    pub fn with_multiframe(&self, mf: MultiframeTask<T>) -> Self {
        let mut w = self.clone();
        w.multiframes.push(mf);
        w
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestPointSet<T> {
    pub points: Vec<T>,
    pub horizon: T,
    pub truncated: bool,
}

fn sat_mul<T: Tick>(a: T, b: T) -> T {
    a.checked_mul(&b).unwrap_or_else(T::max_value)
}

fn tick<T: Tick>(n: usize) -> T {
    T::from(n).expect("count fits in tick type")
}

/// Jobs of a synchronous sporadic stream with deadline `deadline` and period
/// `period` whose deadlines fall in `[0, window]`.
fn jobs_due<T: Tick>(window: T, deadline: T, period: T) -> T {
    if window < deadline {
        T::zero()
    } else {
        (window - deadline) / period + T::one()
    }
}

/// Classical demand bound function: `max(0, floor((t - D) / T) + 1) * C`.
pub fn dbf_classic<T: Tick>(task: &Task<T>, time: T) -> T {
    sat_mul(jobs_due(time, task.deadline, task.period), task.wcet)
}

fn super_period<T: Tick>(k: usize, period: T) -> Option<T> {
    T::from(k).and_then(|k| k.checked_mul(&period))
}

/// Number of whole super-periods `K * T` contained in `time`.
pub fn interval_count_s<T: Tick>(time: T, k: usize, period: T) -> T {
    match super_period(k, period) {
        Some(p) => time / p,
        None => T::zero(),
    }
}

/// Jobs with a deadline inside the residual window `[s*K*T, time]`, clamped
/// below at zero.
pub fn job_count_a<T: Tick>(time: T, k: usize, period: T, deadline: T) -> T {
    let residual = match super_period(k, period) {
        Some(p) => time % p,
        None => time,
    };
    jobs_due(residual, deadline, period)
}

/// Same quantity as [`job_count_a`]; the pattern demand uses it as the length
/// of the cyclic frame window. Never exceeds `K` when `D <= T`.
pub fn nb_jobs<T: Tick>(time: T, k: usize, period: T, deadline: T) -> T {
    job_count_a(time, k, period, deadline)
}

/// Demand of a multiframe image under the packed assumption:
/// `s * l * C + min(l, a) * C`.
pub fn dbf_packed<T: Tick>(mf: &MultiframeTask<T>, time: T) -> T {
    let k = mf.k();
    let ones = mf.nonzero_count();
    let s = interval_count_s(time, k, mf.period);
    let a = job_count_a(time, k, mf.period, mf.deadline);
    let residual = a.min(tick(ones));
    sat_mul(s, sat_mul(tick(ones), mf.wcet)).saturating_add(sat_mul(residual, mf.wcet))
}

fn ring_prefix<T: Tick>(frames: &[T]) -> Vec<T> {
    let mut prefix = Vec::with_capacity(2 * frames.len() + 1);
    prefix.push(T::zero());
    for f in frames.iter().chain(frames.iter()) {
        let last = *prefix.last().unwrap();
        prefix.push(last.saturating_add(*f));
    }
    prefix
}

/// Largest sum of `len` cyclically consecutive frames, over all `K` start
/// offsets. `len` is clamped to `K`.
pub fn window_max<T: Tick>(frames: &[T], len: usize) -> T {
    let prefix = ring_prefix(frames);
    window_max_from_prefix(&prefix, frames.len(), len)
}

fn window_max_from_prefix<T: Tick>(prefix: &[T], k: usize, len: usize) -> T {
    let len = len.min(k);
    (0..k).map(|c| prefix[c + len] - prefix[c]).max().unwrap_or_else(T::zero)
}

/// Demand of a multiframe image taking its frame pattern into account:
/// `s * l * C + max_c sum_{j=c}^{c+nb-1} frames[j mod K]`.
pub fn dbf_pattern<T: Tick>(mf: &MultiframeTask<T>, time: T) -> T {
    let k = mf.k();
    let s = interval_count_s(time, k, mf.period);
    let nb = nb_jobs(time, k, mf.period, mf.deadline).to_usize().unwrap_or(usize::MAX);
    let full = sat_mul(tick(mf.nonzero_count()), mf.wcet);
    sat_mul(s, full).saturating_add(window_max(&mf.frames, nb))
}

/// One demand contributor in normalised form: `K` frames of a stream with
/// deadline `D` and period `T`, where a fixed task is the `K = 1` case.
#[derive(Debug, Clone)]
struct Term<T> {
    deadline: T,
    period: T,
    k: usize,
    ones: usize,
    super_period: Option<T>,
    per_super: T,
    /// `window[n]` = worst demand of `n` consecutive jobs, `n` in `0..=K`.
    window: Vec<T>,
}

impl<T: Tick> Term<T> {
    fn fixed(task: &Task<T>) -> Self {
        Self {
            deadline: task.deadline,
            period: task.period,
            k: 1,
            ones: 1,
            super_period: Some(task.period),
            per_super: task.wcet,
            window: vec![T::zero(), task.wcet],
        }
    }

    fn multiframe(mf: &MultiframeTask<T>, mode: TestMode) -> Self {
        let k = mf.k();
        let ones = mf.nonzero_count();
        let window = match mode {
            TestMode::Packed => (0..=k).map(|n| sat_mul(tick(n.min(ones)), mf.wcet)).collect(),
            TestMode::Pattern => {
                let prefix = ring_prefix(&mf.frames);
                (0..=k).map(|n| window_max_from_prefix(&prefix, k, n)).collect()
            }
        };
        Self {
            deadline: mf.deadline,
            period: mf.period,
            k,
            ones,
            super_period: mf.super_period(),
            per_super: sat_mul(tick(ones), mf.wcet),
            window,
        }
    }

    fn demand(&self, time: T) -> T {
        let (s, residual) = match self.super_period {
            Some(p) => (time / p, time % p),
            None => (T::zero(), time),
        };
        let nb = jobs_due(residual, self.deadline, self.period).to_usize().unwrap_or(usize::MAX).min(self.k);
        sat_mul(s, self.per_super).saturating_add(self.window[nb])
    }

    fn last_deadline_at_or_before(&self, time: T) -> Option<T> {
        if time < self.deadline {
            None
        } else {
            Some((time - self.deadline) / self.period * self.period + self.deadline)
        }
    }

    fn last_deadline_before(&self, time: T) -> Option<T> {
        if time.is_zero() {
            None
        } else {
            self.last_deadline_at_or_before(time - T::one())
        }
    }

    /// `l * C / (K * T)`.
    fn density(&self) -> BigRational {
        BigRational::new(to_big(self.per_super), BigInt::from(self.k) * to_big(self.period))
    }

    /// Smallest `b` with `demand(t) <= density * t + b` for all `t`, attained
    /// at the deadline of the last active job of the first super-period.
    fn burst(&self) -> BigRational {
        if self.ones == 0 {
            return BigRational::zero();
        }
        let k = BigInt::from(self.k);
        let period = to_big(self.period);
        let span = &k * &period;
        let last = BigInt::from(self.ones - 1) * &period + to_big(self.deadline);
        BigRational::new(to_big(self.per_super) * (&span - last), span)
    }
}

fn compile<T: Tick>(w: &CpuWorkload<T>, mode: TestMode) -> Vec<Term<T>> {
    w.fixed
        .iter()
        .map(Term::fixed)
        .chain(w.multiframes.iter().filter(|mf| mf.nonzero_count() > 0).map(|mf| Term::multiframe(mf, mode)))
        .collect()
}

fn total_demand<T: Tick>(terms: &[Term<T>], time: T) -> T {
    terms.iter().fold(T::zero(), |acc, term| acc.saturating_add(term.demand(time)))
}

/// Demand of a whole workload at `time` under the given mode.
pub fn workload_demand<T: Tick>(w: &CpuWorkload<T>, mode: TestMode, time: T) -> T {
    let fixed = w.fixed.iter().fold(T::zero(), |acc, t| acc.saturating_add(dbf_classic(t, time)));
    w.multiframes.iter().fold(fixed, |acc, mf| {
        acc.saturating_add(match mode {
            TestMode::Packed => dbf_packed(mf, time),
            TestMode::Pattern => dbf_pattern(mf, time),
        })
    })
}

/// Long-run demand per tick: `sum C/T + sum l*C/(K*T)`.
pub fn workload_density<T: Tick>(w: &CpuWorkload<T>) -> BigRational {
    density(&compile(w, TestMode::Packed))
}

fn density<T: Tick>(terms: &[Term<T>]) -> BigRational {
    terms.iter().fold(BigRational::zero(), |acc, t| acc + t.density())
}

fn lcm_of<T: Tick>(periods: impl IntoIterator<Item = Option<T>>) -> Option<T> {
    let mut acc = T::one();
    let mut any = false;
    for p in periods {
        let p = p?;
        any = true;
        let g = acc.gcd(&p);
        acc = (acc / g).checked_mul(&p)?;
    }
    Some(if any { acc } else { T::zero() })
}

/// Merges the deadline lattices `D + q*T` of several streams into one
/// strictly increasing sequence bounded by `limit`.
struct DeadlineMerge<T> {
    heap: BinaryHeap<Reverse<(T, usize)>>,
    streams: Vec<(T, T)>,
    limit: T,
    last: Option<T>,
}

impl<T: Tick> DeadlineMerge<T> {
    fn new(streams: Vec<(T, T)>, limit: T) -> Self {
        let heap =
            streams.iter().enumerate().filter(|(_, (d, _))| *d <= limit).map(|(i, (d, _))| Reverse((*d, i))).collect();
        Self { heap, streams, limit, last: None }
    }
}

impl<T: Tick> Iterator for DeadlineMerge<T> {
    type Item = T;

    fn next(&mut self) -> Option<T> {
        loop {
            let Reverse((t, i)) = self.heap.pop()?;
            if let Some(next) = t.checked_add(&self.streams[i].1) {
                if next <= self.limit {
                    self.heap.push(Reverse((next, i)));
                }
            }
            if self.last != Some(t) {
                self.last = Some(t);
                return Some(t);
            }
        }
    }
}

/// `lcm` of member periods (super-periods for multiframes); `None` on
/// overflow, zero for an empty workload.
pub fn hyperperiod<T: Tick>(w: &CpuWorkload<T>) -> Option<T> {
    lcm_of(w.fixed.iter().map(|t| Some(t.period)).chain(w.multiframes.iter().map(|mf| mf.super_period())))
}

/// Absolute deadlines of every member up to the hyperperiod, or up to `cap`
/// (flagged as truncated) when the hyperperiod is larger.
pub fn test_points<T: Tick>(w: &CpuWorkload<T>, cap: T) -> TestPointSet<T> {
    let (horizon, truncated) = match hyperperiod(w) {
        Some(h) if h <= cap => (h, false),
        _ => (cap, true),
    };
    let streams = w
        .fixed
        .iter()
        .map(|t| (t.deadline, t.period))
        .chain(w.multiframes.iter().map(|mf| (mf.deadline, mf.period)))
        .collect();
    let points = DeadlineMerge::new(streams, horizon).collect();
    TestPointSet { points, horizon, truncated }
}

/// `sup_t DBF(t) / t` over the deadlines up to the hyperperiod of a set of
/// non-migrating tasks.
pub fn load<T: Tick>(fixed: &[Task<T>], cap: T) -> Result<Ratio<T>, DemandError> {
    let w = CpuWorkload { fixed: fixed.to_vec(), multiframes: Vec::new() };
    let set = test_points(&w, cap);
    if set.truncated {
        return Err(DemandError::HorizonOverflow { cap: cap.to_string() });
    }
    let terms = compile(&w, TestMode::Packed);
    Ok(set.points.iter().map(|&t| Ratio::new(total_demand(&terms, t), t)).max().unwrap_or_else(Ratio::zero))
}

/// Horizon that has to be checked, or `None` when it does not fit in `T`.
fn required_horizon<T: Tick>(terms: &[Term<T>], density: &BigRational, hyper: Option<T>) -> Option<T> {
    let one = BigRational::one();
    if *density < one {
        let burst = terms.iter().fold(BigRational::zero(), |acc, t| acc + t.burst());
        let bound = (burst / (one - density)).floor().to_integer();
        match bound.to_u128().and_then(T::from) {
            Some(b) => Some(hyper.map_or(b, |h| h.min(b))),
            None => hyper,
        }
    } else {
        hyper
    }
}

/// Backward scan over deadlines: each evaluation either proves every deadline
/// in `(demand(t), t]` safe and jumps to `demand(t)`, or steps to the previous
/// deadline. Returns a violating deadline, if any.
fn find_violation<T: Tick>(terms: &[Term<T>], horizon: T) -> Option<T> {
    let last = |t: T| terms.iter().filter_map(|term| term.last_deadline_at_or_before(t)).max();
    let before = |t: T| terms.iter().filter_map(|term| term.last_deadline_before(t)).max();
    let d_min = terms.iter().map(|t| t.deadline).min()?;
    let mut t = last(horizon)?;
    loop {
        let h = total_demand(terms, t);
        if h > t {
            return Some(t);
        }
        if h <= d_min {
            return None;
        }
        t = if h < t { last(h)? } else { before(t)? };
    }
}

fn first_violation<T: Tick>(terms: &[Term<T>], upto: T) -> Option<(T, T)> {
    let streams = terms.iter().map(|t| (t.deadline, t.period)).collect();
    DeadlineMerge::new(streams, upto).map(|t| (t, total_demand(terms, t))).find(|&(t, demand)| demand > t)
}

fn evaluate<T: Tick>(w: &CpuWorkload<T>, mode: TestMode, cap: T, want_witness: bool) -> WorkloadVerdict<T> {
    let terms = compile(w, mode);
    let density = density(&terms);
    let hyperperiod = lcm_of(terms.iter().map(|t| t.super_period));
    if density > BigRational::one() {
        return WorkloadVerdict {
            status: Status::NotSchedulable,
            witness: Some(Witness::Density(density.clone())),
            density,
            horizon: T::zero(),
            hyperperiod,
            truncated: false,
        };
    }
    let horizon = match required_horizon(&terms, &density, hyperperiod) {
        Some(h) if h <= cap => h,
        _ => {
            return WorkloadVerdict {
                status: Status::HorizonOverflow,
                density,
                horizon: cap,
                hyperperiod,
                truncated: true,
                witness: None,
            }
        }
    };
    let violation = find_violation(&terms, horizon);
    let witness = violation.map(|v| {
        let (time, demand) = if want_witness {
            first_violation(&terms, v).expect("a violating deadline exists up to v")
        } else {
            (v, total_demand(&terms, v))
        };
        Witness::Violation { time, demand }
    });
    WorkloadVerdict {
        status: if witness.is_some() { Status::NotSchedulable } else { Status::Schedulable },
        density,
        horizon,
        hyperperiod,
        truncated: false,
        witness,
    }
}

/// Sufficient EDF test for one CPU: density precheck, then `demand(t) <= t`
/// at every deadline up to the required horizon. On failure the witness is
/// the earliest violating deadline.
pub fn schedulability_test<T: Tick>(w: &CpuWorkload<T>, mode: TestMode, cap: T) -> WorkloadVerdict<T> {
    evaluate(w, mode, cap, true)
}

/// Same decision as [`schedulability_test`] without locating the earliest
/// violation. Horizon overflow counts as failure.
pub fn passes<T: Tick>(w: &CpuWorkload<T>, mode: TestMode, cap: T) -> bool {
    evaluate(w, mode, cap, false).status.is_schedulable()
}

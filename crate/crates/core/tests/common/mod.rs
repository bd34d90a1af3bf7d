//! Independent oracles and random inputs shared by the integration tests.
//!
//! The oracles enumerate jobs directly and never call the closed forms under
//! test.

#![allow(dead_code)]

use num_integer::Integer;
use rand::Rng;
use semipart::{CpuWorkload, MultiframeTask, Task};

pub fn task(id: u32, c: u64, d: u64, t: u64) -> Task {
    Task { id, wcet: c, deadline: d, period: t }
}

/// Jobs of a stream released at `0, T, 2T, ...` whose deadline is at or
/// before `t`.
fn jobs_due(deadline: u64, period: u64, t: u64) -> u64 {
    let mut n = 0;
    while n * period + deadline <= t {
        n += 1;
    }
    n
}

/// Demand in `[0, t]` of a frame ring, maximised over every starting frame.
pub fn brute_ring_demand(frames: &[u64], deadline: u64, period: u64, t: u64) -> u64 {
    let k = frames.len();
    let n = jobs_due(deadline, period, t) as usize;
    (0..k).map(|start| (0..n).map(|j| frames[(start + j) % k]).sum::<u64>()).max().unwrap_or(0)
}

/// Same as [`brute_ring_demand`] but folds whole cycles, for long horizons.
pub fn brute_ring_demand_fast(frames: &[u64], deadline: u64, period: u64, t: u64) -> u64 {
    let k = frames.len();
    if t < deadline {
        return 0;
    }
    let n = ((t - deadline) / period + 1) as usize;
    let (cycles, rest) = (n / k, n % k);
    let total: u64 = frames.iter().sum();
    let tail = (0..k).map(|start| (0..rest).map(|j| frames[(start + j) % k]).sum::<u64>()).max().unwrap_or(0);
    cycles as u64 * total + tail
}

pub fn brute_workload_demand(w: &CpuWorkload, t: u64) -> u64 {
    let fixed: u64 = w.fixed.iter().map(|x| brute_ring_demand_fast(&[x.wcet], x.deadline, x.period, t)).sum();
    let mf: u64 = w.multiframes.iter().map(|m| brute_ring_demand_fast(&m.frames, m.deadline, m.period, t)).sum();
    fixed + mf
}

/// Packed demand enumerated directly: the `l` busy frames first.
pub fn brute_packed_demand(mf: &MultiframeTask, t: u64) -> u64 {
    let l = mf.frames.iter().filter(|&&f| f > 0).count();
    let frames: Vec<u64> = (0..mf.frames.len()).map(|i| if i < l { mf.wcet } else { 0 }).collect();
    brute_ring_demand(&frames, mf.deadline, mf.period, t)
}

pub fn hyperperiod(w: &CpuWorkload) -> u64 {
    w.fixed
        .iter()
        .map(|t| t.period)
        .chain(w.multiframes.iter().map(|m| m.period * m.frames.len() as u64))
        .fold(1, |acc, p| acc.lcm(&p))
}

/// Exhaustive processor-demand check: long-run demand at most one and no
/// deadline up to the hyperperiod with demand above its length.
pub fn exhaustive_schedulable(w: &CpuWorkload) -> bool {
    let h = hyperperiod(w);
    let per_h: u64 = w.fixed.iter().map(|t| t.wcet * (h / t.period)).sum::<u64>()
        + w.multiframes
            .iter()
            .map(|m| m.frames.iter().sum::<u64>() * (h / (m.period * m.frames.len() as u64)))
            .sum::<u64>();
    if per_h > h {
        return false;
    }
    (1..=h).all(|t| brute_workload_demand(w, t) <= t)
}

pub fn random_task(rng: &mut impl Rng, id: u32, max_c: u64, max_t: u64) -> Task {
    let period = rng.gen_range(1..=max_t);
    let deadline = rng.gen_range(1..=period);
    let wcet = rng.gen_range(1..=max_c.min(deadline));
    task(id, wcet, deadline, period)
}

pub fn random_mask(rng: &mut impl Rng, k: usize) -> Vec<bool> {
    loop {
        let mask: Vec<bool> = (0..k).map(|_| rng.gen_bool(0.5)).collect();
        if mask.contains(&true) {
            return mask;
        }
    }
}

pub fn random_multiframe(rng: &mut impl Rng, id: u32, max_k: usize, max_c: u64, max_t: u64) -> MultiframeTask {
    let t = random_task(rng, id, max_c, max_t);
    let k = rng.gen_range(1..=max_k);
    MultiframeTask::from_mask(&t, &random_mask(rng, k))
}

/// Small workload with up to three fixed tasks and up to three multiframes.
pub fn random_workload(rng: &mut impl Rng, max_k: usize, max_c: u64, max_t: u64) -> CpuWorkload {
    let fixed = (0..rng.gen_range(0..=3)).map(|i| random_task(rng, i + 1, max_c, max_t)).collect();
    let mfs = (0..rng.gen_range(1..=3)).map(|i| random_multiframe(rng, 10 + i, max_k, max_c, max_t)).collect();
    CpuWorkload::new(fixed, mfs)
}

/// Light fixed tasks next to one or two heavy images laid out with the
/// regular pattern, where the packed assumption is most pessimistic.
pub fn random_split_workload(rng: &mut impl Rng) -> CpuWorkload {
    let fixed = (0..rng.gen_range(1..=2)).map(|i| random_task(rng, i + 1, 10, 40)).collect();
    let mfs = (0..rng.gen_range(1..=2))
        .map(|i| {
            let period = rng.gen_range(4..=30);
            let deadline = rng.gen_range(period / 2..=period);
            let wcet = rng.gen_range(deadline / 2..=deadline);
            let k = rng.gen_range(2..=12);
            let jobs = rng.gen_range(1..k);
            let bits = semipart::assign::regular_pattern(k, jobs).expect("jobs < k");
            MultiframeTask::from_mask(&task(10 + i, wcet, deadline, period), bits.bits())
        })
        .collect();
    CpuWorkload::new(fixed, mfs)
}

//! The assigning phase.
//!
//! Tasks are taken in decreasing utilization order (ties by ascending id).
//! Each one first tries first-fit on the CPUs in index order. A task that fits
//! nowhere becomes a migrating task: its jobs are split over the CPUs, `K`
//! consecutive jobs at a time, and each CPU that receives jobs gets a
//! multiframe image of the task.
//!
//! Two job-splitting strategies exist:
//!
//! * [`most_regular_assign`] spreads a known per-CPU job count as evenly as
//!   possible over the cycle ([`regular_pattern`] + [`flatten_sequence`]).
//! * [`alternative_assign`] decides the counts CPU by CPU, trying the largest
//!   number of remaining jobs first and building each candidate image over the
//!   frame positions the previous CPUs left free ([`merge_frames`]).
//!
//! In [`TestMode::Packed`] only the per-CPU job counts matter to the test, so
//! [`packed_count_assign`] searches counts with packed candidates and then lays
//! the jobs out with the most-regular pattern.

use std::cmp::Reverse;

use thiserror::Error;

use crate::demand::{passes, schedulability_test, CpuWorkload, TestMode};
use crate::model::{utilization, AssignmentPlan, MultiframeTask, Status, Task, TaskId, TaskSystem, Verdict};
use crate::Tick;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AssignError {
    #[error("job count {count} exceeds frame count {frames}")]
    CountExceedsFrames { count: usize, frames: usize },
    #[error("patterns hold {got} jobs, expected {expected}")]
    CountSum { expected: usize, got: usize },
    #[error("pattern has {got} frames, expected {expected}")]
    PatternLength { expected: usize, got: usize },
    #[error("{free} free frame positions but the temporary pattern has {temp} frames")]
    FreeSlotMismatch { free: usize, temp: usize },
}

/// 0/1 job-assignment pattern over a cycle of frames.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitPattern {
    bits: Vec<bool>,
    ones: usize,
}

impl BitPattern {
    pub fn new(bits: Vec<bool>) -> Self {
        let ones = bits.iter().filter(|&&b| b).count();
        Self { bits, ones }
    }

    /// `ones` leading ones followed by zeros.
    pub fn packed(len: usize, ones: usize) -> Self {
        Self::new((0..len).map(|p| p < ones).collect())
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn ones(&self) -> usize {
        self.ones
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn to_digits(&self) -> String {
        self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }
}

fn ceil_div(a: usize, b: usize) -> usize {
    a.div_ceil(b)
}

/// Most regular spreading of `count` jobs over `frames` positions:
/// position `l` is set iff `ceil((l+1)*count/frames) - ceil(l*count/frames) = 1`.
pub fn regular_pattern(frames: usize, count: usize) -> Result<BitPattern, AssignError> {
    if count > frames {
        return Err(AssignError::CountExceedsFrames { count, frames });
    }
    let bits = (0..frames).map(|l| ceil_div((l + 1) * count, frames) - ceil_div(l * count, frames) == 1).collect();
    Ok(BitPattern::new(bits))
}

/// Reads per-CPU sub-sequences position-major, then in CPU order, skipping
/// positions where no CPU has a job. Entry `q` of the result is the CPU of
/// job `q` within each cycle of `k` jobs.
pub fn flatten_sequence(patterns: &[BitPattern], k: usize) -> Result<Vec<usize>, AssignError> {
    if let Some(p) = patterns.iter().find(|p| p.len() != k) {
        return Err(AssignError::PatternLength { expected: k, got: p.len() });
    }
    let total: usize = patterns.iter().map(BitPattern::ones).sum();
    if total != k {
        return Err(AssignError::CountSum { expected: k, got: total });
    }
    Ok((0..k).flat_map(|l| patterns.iter().enumerate().filter(move |(_, p)| p.bits[l]).map(|(cpu, _)| cpu)).collect())
}

/// Job split of one migrating task.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MigratingAssignment<T> {
    /// Jobs per CPU among `K` consecutive jobs (one `A` row).
    pub row: Vec<usize>,
    /// `(cpu, image)` for every CPU with a nonzero count, ascending CPU.
    pub multiframes: Vec<(usize, MultiframeTask<T>)>,
    /// CPU of each job position in the cycle.
    pub sequence: Vec<usize>,
}

impl<T: Tick> MigratingAssignment<T> {
    fn from_sequence(task: &Task<T>, cpu_count: usize, sequence: Vec<usize>) -> Self {
        let mut row = vec![0; cpu_count];
        for &cpu in &sequence {
            row[cpu] += 1;
        }
        let multiframes = (0..cpu_count)
            .filter(|&cpu| row[cpu] > 0)
            .map(|cpu| {
                let mask: Vec<bool> = sequence.iter().map(|&c| c == cpu).collect();
                (cpu, MultiframeTask::from_mask(task, &mask))
            })
            .collect();
        Self { row, multiframes, sequence }
    }

    /// CPU holding every job, when the split degenerated to one CPU.
    pub fn single_cpu(&self) -> Option<usize> {
        match self.multiframes.as_slice() {
            [(cpu, _)] => Some(*cpu),
            _ => None,
        }
    }
}

/// Lays out known per-CPU job counts with the most regular pattern.
pub fn most_regular_assign<T: Tick>(
    task: &Task<T>,
    k: usize,
    counts: &[usize],
) -> Result<MigratingAssignment<T>, AssignError> {
    let total: usize = counts.iter().sum();
    if total != k {
        return Err(AssignError::CountSum { expected: k, got: total });
    }
    let patterns = counts.iter().map(|&c| regular_pattern(k, c)).collect::<Result<Vec<_>, _>>()?;
    let sequence = flatten_sequence(&patterns, k)?;
    Ok(MigratingAssignment::from_sequence(task, counts.len(), sequence))
}

/// Builds the image for the next CPU: positions taken by any earlier image
/// stay zero, and the `q`-th free position takes the `q`-th entry of `temp`.
pub fn merge_frames<T: Tick>(
    task: &Task<T>,
    prior: &[MultiframeTask<T>],
    temp: &BitPattern,
    k: usize,
) -> Result<MultiframeTask<T>, AssignError> {
    let free: Vec<usize> = (0..k).filter(|&p| prior.iter().all(|mf| !mf.is_active(p))).collect();
    if free.len() != temp.len() {
        return Err(AssignError::FreeSlotMismatch { free: free.len(), temp: temp.len() });
    }
    let mut mask = vec![false; k];
    for (&pos, &bit) in free.iter().zip(temp.bits()) {
        mask[pos] = bit;
    }
    Ok(MultiframeTask::from_mask(task, &mask))
}

/// Decides the job counts CPU by CPU. For each CPU in index order, tries
/// `j = remaining, ..., 1` jobs with the candidate image
/// `merge_frames(prior, regular_pattern(remaining, j))` and keeps the first
/// one `probe(cpu, image)` accepts. Returns `None` when CPUs run out with jobs
/// left over.
pub fn alternative_assign<T: Tick>(
    task: &Task<T>,
    k: usize,
    cpu_count: usize,
    mut probe: impl FnMut(usize, &MultiframeTask<T>) -> bool,
) -> Option<MigratingAssignment<T>> {
    let mut remaining = k;
    let mut images: Vec<MultiframeTask<T>> = Vec::new();
    let mut sequence = vec![usize::MAX; k];
    for cpu in 0..cpu_count {
        if remaining == 0 {
            break;
        }
        for jobs in (1..=remaining).rev() {
            let temp = regular_pattern(remaining, jobs).expect("jobs <= remaining");
            let candidate = merge_frames(task, &images, &temp, k).expect("free slots match remaining jobs");
            if probe(cpu, &candidate) {
                for p in (0..k).filter(|&p| candidate.is_active(p)) {
                    sequence[p] = cpu;
                }
                images.push(candidate);
                remaining -= jobs;
                break;
            }
        }
    }
    (remaining == 0).then(|| MigratingAssignment::from_sequence(task, cpu_count, sequence))
}

/// Count search for the packed test: same descent as [`alternative_assign`],
/// but candidates are packed images, and the final layout is the most
/// regular pattern of the counts found.
pub fn packed_count_assign<T: Tick>(
    task: &Task<T>,
    k: usize,
    cpu_count: usize,
    mut probe: impl FnMut(usize, &MultiframeTask<T>) -> bool,
) -> Option<MigratingAssignment<T>> {
    let mut remaining = k;
    let mut counts = vec![0; cpu_count];
    for (cpu, count) in counts.iter_mut().enumerate() {
        if remaining == 0 {
            break;
        }
        if let Some(jobs) = (1..=remaining).rev().find(|&jobs| {
            let candidate = MultiframeTask::from_mask(task, BitPattern::packed(k, jobs).bits());
            probe(cpu, &candidate)
        }) {
            *count = jobs;
            remaining -= jobs;
        }
    }
    if remaining > 0 {
        return None;
    }
    Some(most_regular_assign(task, k, &counts).expect("counts sum to K"))
}

/// Knobs shared by every probe of one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnalysisConfig<T> {
    pub k: usize,
    pub mode: TestMode,
    pub cap: T,
}

/// Decreasing utilization, ties by ascending id.
pub fn ffd_order<T: Tick>(system: &TaskSystem<T>) -> Vec<Task<T>> {
    let mut order = system.tasks.clone();
    order.sort_by_key(|t| (Reverse(utilization(t)), t.id));
    order
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FfdOutcome<T> {
    pub plan: AssignmentPlan<T>,
    pub leftovers: Vec<TaskId>,
}

/// Pure first-fit decreasing: no migration is attempted, tasks that fit on
/// no CPU are reported as leftovers.
pub fn ffd_assign<T: Tick>(system: &TaskSystem<T>, mode: TestMode, cap: T) -> FfdOutcome<T> {
    let m = system.cpu_count;
    let mut plan = AssignmentPlan::new(1, m);
    let mut workloads = vec![CpuWorkload::default(); m];
    let mut leftovers = Vec::new();
    for task in ffd_order(system) {
        match (0..m).find(|&cpu| passes(&workloads[cpu].with_fixed(task), mode, cap)) {
            Some(cpu) => {
                workloads[cpu].fixed.push(task);
                plan.fixed.insert(task.id, cpu);
            }
            None => leftovers.push(task.id),
        }
    }
    FfdOutcome { plan, leftovers }
}

/// End-to-end semi-partitioning: first-fit for each task, job splitting when
/// first-fit fails, and stop at the first task that cannot be placed.
///
/// On success the verdict replays the test on every realised CPU workload.
/// On failure `unassigned` names the task and each CPU entry is the verdict of
/// placing that task whole on the CPU.
pub fn semi_partition<T: Tick>(system: &TaskSystem<T>, config: &AnalysisConfig<T>) -> (AssignmentPlan<T>, Verdict<T>) {
    let AnalysisConfig { k, mode, cap } = *config;
    let m = system.cpu_count;
    let mut plan = AssignmentPlan::new(k, m);
    let mut workloads: Vec<CpuWorkload<T>> = vec![CpuWorkload::default(); m];

    for task in ffd_order(system) {
        if let Some(cpu) = (0..m).find(|&cpu| passes(&workloads[cpu].with_fixed(task), mode, cap)) {
            workloads[cpu].fixed.push(task);
            plan.fixed.insert(task.id, cpu);
            continue;
        }
        let split = if k > 1 {
            let probe =
                |cpu: usize, mf: &MultiframeTask<T>| passes(&workloads[cpu].with_multiframe(mf.clone()), mode, cap);
            match mode {
                TestMode::Pattern => alternative_assign(&task, k, m, probe),
                TestMode::Packed => packed_count_assign(&task, k, m, probe),
            }
        } else {
            None
        };
        match split {
            Some(split) => {
                if let Some(cpu) = split.single_cpu() {
                    workloads[cpu].fixed.push(task);
                    plan.fixed.insert(task.id, cpu);
                    continue;
                }
                for (cpu, mf) in &split.multiframes {
                    workloads[*cpu].multiframes.push(mf.clone());
                    plan.per_cpu[*cpu].push(mf.clone());
                }
                plan.rows.insert(task.id, split.row);
                plan.sequences.insert(task.id, split.sequence);
            }
            None => {
                let per_cpu: Vec<_> =
                    workloads.iter().map(|w| schedulability_test(&w.with_fixed(task), mode, cap)).collect();
                let status = if per_cpu.iter().any(|v| v.status == Status::HorizonOverflow) {
                    Status::HorizonOverflow
                } else {
                    Status::NotSchedulable
                };
                return (plan, Verdict { status, per_cpu, unassigned: Some(task.id) });
            }
        }
    }

    let per_cpu: Vec<_> = workloads.iter().map(|w| schedulability_test(w, mode, cap)).collect();
    let status = if per_cpu.iter().all(|v| v.status.is_schedulable()) {
        Status::Schedulable
    } else if per_cpu.iter().any(|v| v.status == Status::HorizonOverflow) {
        Status::HorizonOverflow
    } else {
        Status::NotSchedulable
    };
    (plan, Verdict { status, per_cpu, unassigned: None })
}

//! Tasks, platforms, multiframe images and assignment plans.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::Zero;
use thiserror::Error;

use crate::demand::CpuWorkload;
use crate::Tick;

pub type TaskId = u32;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("task system is empty")]
    Empty,
    #[error("platform needs at least one CPU")]
    NoCpus,
    #[error("task {task}: {field} must be positive")]
    NonPositive { task: TaskId, field: &'static str },
    #[error("task {task}: C exceeds D ({wcet} > {deadline})")]
    WcetExceedsDeadline { task: TaskId, wcet: String, deadline: String },
    #[error("task {task}: D exceeds T ({deadline} > {period})")]
    DeadlineExceedsPeriod { task: TaskId, deadline: String, period: String },
    #[error("task {0}: duplicate id")]
    DuplicateId(TaskId),
    #[error("plan: {0}")]
    Plan(String),
}

/// Sporadic constrained-deadline task, all parameters in ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Task<T> {
    pub id: TaskId,
    pub wcet: T,
    pub deadline: T,
    pub period: T,
}

impl<T: Tick> Task<T> {
    pub fn new(id: TaskId, wcet: T, deadline: T, period: T) -> Result<Self, ModelError> {
        let task = Self { id, wcet, deadline, period };
        task.validate()?;
        Ok(task)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (field, value) in [("C", self.wcet), ("D", self.deadline), ("T", self.period)] {
            if value.is_zero() {
                return Err(ModelError::NonPositive { task: self.id, field });
            }
        }
        if self.wcet > self.deadline {
            return Err(ModelError::WcetExceedsDeadline {
                task: self.id,
                wcet: self.wcet.to_string(),
                deadline: self.deadline.to_string(),
            });
        }
        if self.deadline > self.period {
            return Err(ModelError::DeadlineExceedsPeriod {
                task: self.id,
                deadline: self.deadline.to_string(),
                period: self.period.to_string(),
            });
        }
        Ok(())
    }

    pub fn utilization(&self) -> Ratio<T> {
        utilization(self)
    }
}

/// Exact `C / T`.
pub fn utilization<T: Tick>(task: &Task<T>) -> Ratio<T> {
    Ratio::new(task.wcet, task.period)
}

/// Exact sum of utilizations. Computed over big integers: the common
/// denominator of a few dozen random periods does not fit in 64 bits.
pub fn total_utilization<T: Tick>(tasks: &[Task<T>]) -> BigRational {
    tasks.iter().fold(BigRational::zero(), |acc, t| acc + BigRational::new(to_big(t.wcet), to_big(t.period)))
}

pub(crate) fn to_big<T: Tick>(value: T) -> BigInt {
    BigInt::from(value.to_u128().expect("unsigned tick fits in u128"))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskSystem<T> {
    pub tasks: Vec<Task<T>>,
    pub cpu_count: usize,
}

impl<T: Tick> TaskSystem<T> {
    pub fn task(&self, id: TaskId) -> Option<&Task<T>> {
        self.tasks.iter().find(|t| t.id == id)
    }

    pub fn total_utilization(&self) -> BigRational {
        total_utilization(&self.tasks)
    }

    pub fn max_utilization(&self) -> Option<Ratio<T>> {
        self.tasks.iter().map(utilization).max()
    }
}

/// Checks every task and the platform, returning the validated system.
pub fn validate_system<T: Tick>(raw: Vec<Task<T>>, cpu_count: usize) -> Result<TaskSystem<T>, ModelError> {
    if raw.is_empty() {
        return Err(ModelError::Empty);
    }
    if cpu_count == 0 {
        return Err(ModelError::NoCpus);
    }
    let mut seen = BTreeSet::new();
    for task in &raw {
        task.validate()?;
        if !seen.insert(task.id) {
            return Err(ModelError::DuplicateId(task.id));
        }
    }
    Ok(TaskSystem { tasks: raw, cpu_count })
}

/// Per-CPU image of a migrating task: frame `p` is `C` when job `p` (mod K)
/// runs on this CPU and `0` otherwise.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiframeTask<T> {
    pub source: TaskId,
    pub wcet: T,
    pub frames: Vec<T>,
    pub deadline: T,
    pub period: T,
}

impl<T: Tick> MultiframeTask<T> {
    /// Builds the image from a 0/1 mask over the `K` frame positions.
    pub fn from_mask(task: &Task<T>, mask: &[bool]) -> Self {
        let frames = mask.iter().map(|&on| if on { task.wcet } else { T::zero() }).collect();
        Self { source: task.id, wcet: task.wcet, frames, deadline: task.deadline, period: task.period }
    }

    /// Frame count `K`.
    pub fn k(&self) -> usize {
        self.frames.len()
    }

    /// Number of nonzero frames.
    pub fn nonzero_count(&self) -> usize {
        self.frames.iter().filter(|f| !f.is_zero()).count()
    }

    pub fn is_active(&self, position: usize) -> bool {
        !self.frames[position].is_zero()
    }

    pub fn mask(&self) -> Vec<bool> {
        self.frames.iter().map(|f| !f.is_zero()).collect()
    }

    /// `K * T`, or `None` when it does not fit in `T`.
    pub fn super_period(&self) -> Option<T> {
        T::from(self.k()).and_then(|k| k.checked_mul(&self.period))
    }

    pub fn packed(&self) -> Self {
        packed_form(self)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.frames.is_empty() {
            return Err(ModelError::Plan(format!("multiframe of task {} has no frames", self.source)));
        }
        if self.frames.iter().any(|f| !f.is_zero() && *f != self.wcet) {
            return Err(ModelError::Plan(format!(
                "multiframe of task {} has a frame different from 0 and C",
                self.source
            )));
        }
        Ok(())
    }
}

/// Moves every nonzero frame to the front, keeping `K`, `D`, `T` and the
/// nonzero count.
pub fn packed_form<T: Tick>(mf: &MultiframeTask<T>) -> MultiframeTask<T> {
    let ones = mf.nonzero_count();
    let frames = (0..mf.k()).map(|p| if p < ones { mf.wcet } else { T::zero() }).collect();
    MultiframeTask { frames, ..mf.clone() }
}

/// Result of the assigning phase.
///
/// Non-migrating tasks live only in `fixed`. Migrating tasks have an `A` row
/// in `rows`, a cyclic sequence in `sequences`, and one multiframe image on
/// each CPU that receives at least one of their jobs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssignmentPlan<T> {
    pub k: usize,
    pub cpu_count: usize,
    pub fixed: BTreeMap<TaskId, usize>,
    pub rows: BTreeMap<TaskId, Vec<usize>>,
    pub per_cpu: Vec<Vec<MultiframeTask<T>>>,
    pub sequences: BTreeMap<TaskId, Vec<usize>>,
}

impl<T: Tick> AssignmentPlan<T> {
    pub fn new(k: usize, cpu_count: usize) -> Self {
        Self {
            k,
            cpu_count,
            fixed: BTreeMap::new(),
            rows: BTreeMap::new(),
            per_cpu: vec![Vec::new(); cpu_count],
            sequences: BTreeMap::new(),
        }
    }

    pub fn is_migrating(&self, id: TaskId) -> bool {
        self.sequences.contains_key(&id)
    }

    pub fn covers(&self, id: TaskId) -> bool {
        self.fixed.contains_key(&id) || self.sequences.contains_key(&id)
    }

    /// CPU that receives job `job` (0-based) of task `id`.
    pub fn cpu_of_job(&self, id: TaskId, job: u64) -> Option<usize> {
        if let Some(&cpu) = self.fixed.get(&id) {
            return Some(cpu);
        }
        let seq = self.sequences.get(&id)?;
        seq.get((job % seq.len() as u64) as usize).copied()
    }

    /// Full `n x m` matrix in system order; fixed tasks have `K` on their CPU.
    pub fn matrix(&self, system: &TaskSystem<T>) -> Vec<Vec<usize>> {
        system
            .tasks
            .iter()
            .map(|t| {
                if let Some(row) = self.rows.get(&t.id) {
                    row.clone()
                } else {
                    let mut row = vec![0; self.cpu_count];
                    if let Some(&cpu) = self.fixed.get(&t.id) {
                        row[cpu] = self.k;
                    }
                    row
                }
            })
            .collect()
    }

    pub fn workload(&self, system: &TaskSystem<T>, cpu: usize) -> CpuWorkload<T> {
        let fixed = system.tasks.iter().filter(|t| self.fixed.get(&t.id) == Some(&cpu)).copied().collect();
        CpuWorkload { fixed, multiframes: self.per_cpu[cpu].clone() }
    }

    pub fn workloads(&self, system: &TaskSystem<T>) -> Vec<CpuWorkload<T>> {
        (0..self.cpu_count).map(|cpu| self.workload(system, cpu)).collect()
    }

    /// Checks the structural invariants of a migrating task's row, sequence
    /// and images, and that fixed tasks appear in no image.
    pub fn check_invariants(&self) -> Result<(), ModelError> {
        let err = |msg: String| Err(ModelError::Plan(msg));
        if self.per_cpu.len() != self.cpu_count {
            return err(format!("{} CPU image lists for {} CPUs", self.per_cpu.len(), self.cpu_count));
        }
        for (&id, &cpu) in &self.fixed {
            if cpu >= self.cpu_count {
                return err(format!("task {id} fixed on unknown CPU {cpu}"));
            }
            if self.sequences.contains_key(&id) {
                return err(format!("task {id} is both fixed and migrating"));
            }
        }
        for (&id, seq) in &self.sequences {
            if seq.len() != self.k {
                return err(format!("task {id}: sequence length {} != K = {}", seq.len(), self.k));
            }
            let row = match self.rows.get(&id) {
                Some(row) => row,
                None => return err(format!("task {id}: sequence without A row")),
            };
            if row.len() != self.cpu_count || row.iter().sum::<usize>() != self.k {
                return err(format!("task {id}: A row {row:?} does not sum to K = {}", self.k));
            }
            let mut hits = vec![0usize; self.k];
            for (cpu, images) in self.per_cpu.iter().enumerate() {
                let mut count = 0;
                for mf in images.iter().filter(|mf| mf.source == id) {
                    mf.validate()?;
                    if mf.k() != self.k {
                        return err(format!("task {id}: image on CPU {cpu} has {} frames", mf.k()));
                    }
                    for p in 0..self.k {
                        if mf.is_active(p) {
                            hits[p] += 1;
                            count += 1;
                            if seq[p] != cpu {
                                return err(format!(
                                    "task {id}: frame {p} active on CPU {cpu} but sequence says {}",
                                    seq[p]
                                ));
                            }
                        }
                    }
                }
                if count != row[cpu] {
                    return err(format!("task {id}: CPU {cpu} image has {count} jobs, A row says {}", row[cpu]));
                }
            }
            if let Some(p) = hits.iter().position(|&h| h != 1) {
                return err(format!("task {id}: frame {p} covered {} times", hits[p]));
            }
        }
        for images in &self.per_cpu {
            for mf in images {
                if !self.sequences.contains_key(&mf.source) {
                    return err(format!("image of non-migrating task {}", mf.source));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Schedulable,
    NotSchedulable,
    HorizonOverflow,
}

impl Status {
    pub fn is_schedulable(self) -> bool {
        self == Status::Schedulable
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Status::Schedulable => "schedulable",
            Status::NotSchedulable => "not-schedulable",
            Status::HorizonOverflow => "horizon-overflow",
        }
    }
}

/// Why a workload was rejected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Witness<T> {
    /// Long-run density above one.
    Density(BigRational),
    /// First checked time point whose demand exceeds its length.
    Violation { time: T, demand: T },
}

/// Outcome of checking a single CPU workload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkloadVerdict<T> {
    pub status: Status,
    /// Long-run demand per tick of the workload.
    pub density: BigRational,
    /// Largest time point that had to be checked.
    pub horizon: T,
    /// `lcm` of member periods (super-periods for multiframes), if it fits.
    pub hyperperiod: Option<T>,
    pub truncated: bool,
    pub witness: Option<Witness<T>>,
}

/// System-level verdict: one entry per CPU, indexed by CPU.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict<T> {
    pub status: Status,
    pub per_cpu: Vec<WorkloadVerdict<T>>,
    /// Task that could not be assigned, when the run stopped early.
    pub unassigned: Option<TaskId>,
}

impl<T: Tick> Verdict<T> {
    pub fn is_schedulable(&self) -> bool {
        self.status.is_schedulable()
    }

    /// Longest per-CPU hyperperiod, saturating to `cap` when any is unknown
    /// or larger.
    pub fn analysis_horizon(&self, cap: T) -> T {
        self.per_cpu.iter().map(|v| v.hyperperiod.map_or(cap, |h| h.min(cap))).max().unwrap_or_else(T::zero)
    }
}

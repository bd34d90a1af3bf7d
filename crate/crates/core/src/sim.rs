//! Discrete-event simulation of per-CPU preemptive EDF under a job-to-CPU
//! assignment plan.
//!
//! Every job is bound to one CPU at release: fixed tasks always release on
//! their CPU, migrating tasks follow their cyclic sequence. Jobs run for their
//! full WCET. The simulator can only falsify an analysis verdict, it never
//! proves one.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::TaskId;
use crate::{AssignmentPlan, TaskSystem, Ticks};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReleaseModel {
    /// First release at 0, then exactly every `T`.
    SynchronousPeriodic,
    /// First release in `[0, max_jitter]`, then `T + [0, max_jitter]` apart.
    SporadicSeeded { seed: u64, max_jitter: Ticks },
}

#[derive(Debug, Clone)]
pub struct SimConfig<'a> {
    pub system: &'a TaskSystem,
    pub plan: &'a AssignmentPlan,
    pub horizon: Ticks,
    pub release_model: ReleaseModel,
    pub record_trace: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("horizon must be positive")]
    ZeroHorizon,
    #[error("task {0} is not covered by the plan")]
    Uncovered(TaskId),
    #[error("plan references unknown task {0}")]
    UnknownTask(TaskId),
    #[error("plan references CPU {cpu} but the platform has {count}")]
    UnknownCpu { cpu: usize, count: usize },
    #[error("plan is for {plan} CPUs but the system has {system}")]
    CpuCountMismatch { plan: usize, system: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeadlineMiss {
    pub task: TaskId,
    pub job: u64,
    pub cpu: usize,
    pub deadline: Ticks,
    /// `None` when the job was still unfinished at the horizon.
    pub completion: Option<Ticks>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Release,
    Start,
    Preempt,
    Complete,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventKind::Release => "release",
            EventKind::Start => "start",
            EventKind::Preempt => "preempt",
            EventKind::Complete => "complete",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceEvent {
    pub time: Ticks,
    pub kind: EventKind,
    pub task: TaskId,
    pub job: u64,
    pub cpu: usize,
}

impl fmt::Display for TraceEvent {
    /// `time event task job cpu`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} {} {}", self.time, self.kind, self.task, self.job, self.cpu)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SimReport {
    pub misses: Vec<DeadlineMiss>,
    pub migrations: u64,
    pub preemptions: u64,
    pub released: u64,
    pub completed: u64,
    pub trace: Option<Vec<TraceEvent>>,
}

impl SimReport {
    pub fn first_miss(&self) -> Option<&DeadlineMiss> {
        self.misses.iter().min_by_key(|m| (m.deadline, m.task, m.job))
    }
}

/// EDF priority: earlier deadline first, then task id, then job index.
type JobKey = (Ticks, TaskId, u64);

#[derive(Debug, Clone, Copy)]
struct Job {
    key: JobKey,
    remaining: Ticks,
}

#[derive(Debug, Default)]
struct Cpu {
    ready: BinaryHeap<Reverse<(JobKey, Ticks)>>,
    running: Option<Job>,
}

struct Stream {
    id: TaskId,
    wcet: Ticks,
    deadline: Ticks,
    period: Ticks,
    next_job: u64,
    last_cpu: Option<usize>,
}

fn check_plan(system: &TaskSystem, plan: &AssignmentPlan) -> Result<(), SimError> {
    if plan.cpu_count != system.cpu_count {
        return Err(SimError::CpuCountMismatch { plan: plan.cpu_count, system: system.cpu_count });
    }
    let bad_cpu = |cpu: usize| SimError::UnknownCpu { cpu, count: system.cpu_count };
    for (&id, &cpu) in &plan.fixed {
        system.task(id).ok_or(SimError::UnknownTask(id))?;
        if cpu >= system.cpu_count {
            return Err(bad_cpu(cpu));
        }
    }
    for (&id, seq) in &plan.sequences {
        system.task(id).ok_or(SimError::UnknownTask(id))?;
        if let Some(&cpu) = seq.iter().find(|&&c| c >= system.cpu_count) {
            return Err(bad_cpu(cpu));
        }
    }
    if let Some(t) = system.tasks.iter().find(|t| !plan.covers(t.id)) {
        return Err(SimError::Uncovered(t.id));
    }
    Ok(())
}

/// Runs the plan from time 0 to `horizon`. Releases happen strictly before
/// the horizon; a job whose deadline is at or before the horizon and that has
/// not completed by then counts as a miss.
pub fn run_simulation(cfg: &SimConfig<'_>) -> Result<SimReport, SimError> {
    if cfg.horizon == 0 {
        return Err(SimError::ZeroHorizon);
    }
    check_plan(cfg.system, cfg.plan)?;

    let mut rng = match cfg.release_model {
        ReleaseModel::SporadicSeeded { seed, .. } => Some(ChaCha8Rng::seed_from_u64(seed)),
        ReleaseModel::SynchronousPeriodic => None,
    };
    let max_jitter = match cfg.release_model {
        ReleaseModel::SporadicSeeded { max_jitter, .. } => max_jitter,
        ReleaseModel::SynchronousPeriodic => 0,
    };
    let mut jitter = move || rng.as_mut().map_or(0, |r| r.gen_range(0..=max_jitter));

    let mut streams: Vec<Stream> = cfg
        .system
        .tasks
        .iter()
        .map(|t| Stream { id: t.id, wcet: t.wcet, deadline: t.deadline, period: t.period, next_job: 0, last_cpu: None })
        .collect();
    let mut releases: BinaryHeap<Reverse<(Ticks, usize)>> =
        (0..streams.len()).map(|i| Reverse((jitter(), i))).collect();
    let mut cpus: Vec<Cpu> = (0..cfg.system.cpu_count).map(|_| Cpu::default()).collect();
    let mut report = SimReport::default();
    let mut trace = cfg.record_trace.then(Vec::new);
    let log = |trace: &mut Option<Vec<TraceEvent>>, time, kind, key: JobKey, cpu| {
        if let Some(t) = trace.as_mut() {
            t.push(TraceEvent { time, kind, task: key.1, job: key.2, cpu });
        }
    };

    let mut now: Ticks = 0;
    loop {
        let next_release = releases.peek().map(|Reverse((t, _))| *t).filter(|&t| t < cfg.horizon);
        let next_completion = cpus.iter().filter_map(|c| c.running.map(|j| now + j.remaining)).min();
        let next = match (next_release, next_completion) {
            (Some(a), Some(b)) => a.min(b),
            (Some(a), None) => a,
            (None, Some(b)) => b,
            (None, None) => break,
        };
        if next > cfg.horizon {
            let elapsed = cfg.horizon - now;
            for job in cpus.iter_mut().filter_map(|c| c.running.as_mut()) {
                job.remaining -= elapsed;
            }
            now = cfg.horizon;
            break;
        }
        let elapsed = next - now;
        now = next;

        // completions free their CPU before releases at the same instant
        for (idx, cpu) in cpus.iter_mut().enumerate() {
            let Some(job) = cpu.running.as_mut() else { continue };
            job.remaining -= elapsed;
            if job.remaining == 0 {
                let key = job.key;
                cpu.running = None;
                report.completed += 1;
                log(&mut trace, now, EventKind::Complete, key, idx);
                if now > key.0 {
                    report.misses.push(DeadlineMiss {
                        task: key.1,
                        job: key.2,
                        cpu: idx,
                        deadline: key.0,
                        completion: Some(now),
                    });
                }
            }
        }

        while let Some(&Reverse((time, i))) = releases.peek() {
            if time != now {
                break;
            }
            releases.pop();
            let s = &mut streams[i];
            let job = s.next_job;
            let cpu = cfg.plan.cpu_of_job(s.id, job).expect("plan checked");
            if s.last_cpu.is_some_and(|c| c != cpu) {
                report.migrations += 1;
            }
            s.last_cpu = Some(cpu);
            s.next_job += 1;
            let key = (now + s.deadline, s.id, job);
            cpus[cpu].ready.push(Reverse((key, s.wcet)));
            report.released += 1;
            log(&mut trace, now, EventKind::Release, key, cpu);
            let next = now + s.period + jitter();
            if next < cfg.horizon {
                releases.push(Reverse((next, i)));
            }
        }

        for (idx, cpu) in cpus.iter_mut().enumerate() {
            let Some(&Reverse((best, _))) = cpu.ready.peek() else { continue };
            match cpu.running {
                Some(job) if job.key <= best => {}
                running => {
                    if let Some(job) = running {
                        report.preemptions += 1;
                        log(&mut trace, now, EventKind::Preempt, job.key, idx);
                        cpu.ready.push(Reverse((job.key, job.remaining)));
                    }
                    let Reverse((key, remaining)) = cpu.ready.pop().expect("peeked");
                    cpu.running = Some(Job { key, remaining });
                    log(&mut trace, now, EventKind::Start, key, idx);
                }
            }
        }
    }

    for (idx, cpu) in cpus.iter().enumerate() {
        let pending = cpu.running.map(|j| j.key).into_iter().chain(cpu.ready.iter().map(|Reverse((k, _))| *k));
        for key in pending.filter(|k| k.0 <= now) {
            report.misses.push(DeadlineMiss { task: key.1, job: key.2, cpu: idx, deadline: key.0, completion: None });
        }
    }
    report.misses.sort_by_key(|m| (m.deadline, m.task, m.job));
    report.trace = trace;
    Ok(report)
}

/// Migrations per task implied by a plan over `jobs` consecutive jobs.
pub fn planned_migrations(plan: &AssignmentPlan, jobs: u64) -> BTreeMap<TaskId, u64> {
    plan.sequences
        .keys()
        .map(|&id| {
            let changes = (1..jobs).filter(|&q| plan.cpu_of_job(id, q) != plan.cpu_of_job(id, q - 1)).count();
            (id, changes as u64)
        })
        .collect()
}

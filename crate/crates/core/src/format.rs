//! Task-system and plan files.
//!
//! A task-system file is a JSON object:
//!
//! ```json
//! { "cpus": 2, "K": 8, "tasks": [ { "id": 1, "C": 2, "D": 5, "T": 5 } ] }
//! ```
//!
//! A plan file is the same document with an extra `plan` member holding the
//! fixed placements and, for each migrating task, its `A` row and its cyclic
//! job-to-CPU sequence. CPU indices in files are 0-based. Unknown members are
//! reported as warnings; missing members are errors.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::model::{validate_system, ModelError, TaskId};
use crate::{AssignmentPlan, MultiframeTask, Task, TaskSystem, Ticks};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("malformed document: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("K must be at least 1")]
    ZeroK,
    #[error("plan: {0}")]
    Plan(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub id: TaskId,
    #[serde(rename = "C")]
    pub wcet: Ticks,
    #[serde(rename = "D")]
    pub deadline: Ticks,
    #[serde(rename = "T")]
    pub period: Ticks,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedRecord {
    pub task: TaskId,
    pub cpu: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MigratingRecord {
    pub task: TaskId,
    pub row: Vec<usize>,
    pub sequence: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanRecord {
    pub fixed: Vec<FixedRecord>,
    pub migrating: Vec<MigratingRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemDocument {
    pub cpus: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub tasks: Vec<TaskRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<PlanRecord>,
}

#[derive(Debug, Clone)]
pub struct Loaded {
    pub system: TaskSystem,
    pub k: usize,
    pub plan: Option<AssignmentPlan>,
    pub warnings: Vec<String>,
}

fn unknown_keys(value: &Value, known: &[&str], path: &str, warnings: &mut Vec<String>) {
    if let Value::Object(map) = value {
        for key in map.keys().filter(|k| !known.contains(&k.as_str())) {
            warnings.push(format!("ignoring unknown field `{path}{key}`"));
        }
    }
}

fn each<'a>(value: &'a Value, key: &str) -> impl Iterator<Item = (usize, &'a Value)> {
    value.get(key).and_then(Value::as_array).into_iter().flatten().enumerate()
}

/// Parses a document, collecting warnings for members it does not know.
pub fn parse_document(text: &str) -> Result<(SystemDocument, Vec<String>), FormatError> {
    let value: Value = serde_json::from_str(text)?;
    let mut warnings = Vec::new();
    unknown_keys(&value, &["cpus", "K", "tasks", "plan"], "", &mut warnings);
    for (i, task) in each(&value, "tasks") {
        unknown_keys(task, &["id", "C", "D", "T"], &format!("tasks[{i}]."), &mut warnings);
    }
    if let Some(plan) = value.get("plan") {
        unknown_keys(plan, &["fixed", "migrating"], "plan.", &mut warnings);
        for (i, f) in each(plan, "fixed") {
            unknown_keys(f, &["task", "cpu"], &format!("plan.fixed[{i}]."), &mut warnings);
        }
        for (i, f) in each(plan, "migrating") {
            unknown_keys(f, &["task", "row", "sequence"], &format!("plan.migrating[{i}]."), &mut warnings);
        }
    }
    let doc = serde_json::from_value(value)?;
    Ok((doc, warnings))
}

fn plan_from_record(system: &TaskSystem, k: usize, record: &PlanRecord) -> Result<AssignmentPlan, FormatError> {
    let m = system.cpu_count;
    let lookup = |id: TaskId| -> Result<&Task, FormatError> {
        system.task(id).ok_or_else(|| FormatError::Plan(format!("unknown task {id}")))
    };
    let mut plan = AssignmentPlan::new(k, m);
    for f in &record.fixed {
        lookup(f.task)?;
        if f.cpu >= m {
            return Err(FormatError::Plan(format!("task {} on CPU {} of {m}", f.task, f.cpu)));
        }
        if plan.fixed.insert(f.task, f.cpu).is_some() {
            return Err(FormatError::Plan(format!("task {} placed twice", f.task)));
        }
    }
    for mig in &record.migrating {
        let task = lookup(mig.task)?;
        if mig.sequence.len() != k {
            return Err(FormatError::Plan(format!(
                "task {}: sequence length {} != K = {k}",
                mig.task,
                mig.sequence.len()
            )));
        }
        if let Some(&cpu) = mig.sequence.iter().find(|&&c| c >= m) {
            return Err(FormatError::Plan(format!("task {}: CPU {cpu} of {m}", mig.task)));
        }
        for cpu in 0..m {
            let mask: Vec<bool> = mig.sequence.iter().map(|&c| c == cpu).collect();
            if mask.contains(&true) {
                plan.per_cpu[cpu].push(MultiframeTask::from_mask(task, &mask));
            }
        }
        if plan.sequences.insert(mig.task, mig.sequence.clone()).is_some() {
            return Err(FormatError::Plan(format!("task {} listed twice", mig.task)));
        }
        plan.rows.insert(mig.task, mig.row.clone());
    }
    plan.check_invariants()?;
    if let Some(t) = system.tasks.iter().find(|t| !plan.covers(t.id)) {
        return Err(FormatError::Plan(format!("task {} is not placed", t.id)));
    }
    Ok(plan)
}

/// Parses and validates a task-system or plan file.
pub fn load_str(text: &str) -> Result<Loaded, FormatError> {
    let (doc, warnings) = parse_document(text)?;
    if doc.k == 0 {
        return Err(FormatError::ZeroK);
    }
    let tasks =
        doc.tasks.iter().map(|r| Task { id: r.id, wcet: r.wcet, deadline: r.deadline, period: r.period }).collect();
    let system = validate_system(tasks, doc.cpus)?;
    let plan = doc.plan.as_ref().map(|p| plan_from_record(&system, doc.k, p)).transpose()?;
    Ok(Loaded { system, k: doc.k, plan, warnings })
}

pub fn document(system: &TaskSystem, k: usize, plan: Option<&AssignmentPlan>) -> SystemDocument {
    SystemDocument {
        cpus: system.cpu_count,
        k,
        tasks: system
            .tasks
            .iter()
            .map(|t| TaskRecord { id: t.id, wcet: t.wcet, deadline: t.deadline, period: t.period })
            .collect(),
        plan: plan.map(|p| PlanRecord {
            fixed: p.fixed.iter().map(|(&task, &cpu)| FixedRecord { task, cpu }).collect(),
            migrating: p
                .sequences
                .iter()
                .map(|(&task, seq)| MigratingRecord { task, row: p.rows[&task].clone(), sequence: seq.clone() })
                .collect(),
        }),
    }
}

pub fn to_json(doc: &SystemDocument) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("document serializes");
    s.push('\n');
    s
}

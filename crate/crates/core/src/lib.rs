//! Semi-partitioned EDF scheduling with restricted migrations.
//!
//! Non-migrating tasks are placed with first-fit decreasing; a task that fits
//! on no single CPU has its jobs spread over several CPUs by a cyclic
//! job-to-CPU sequence of length `K`. On each CPU the migrating task is seen
//! as a multiframe task whose frames are either `0` or `C`, and each CPU is
//! then checked on its own with an extended demand bound function.
//!
//! The analysis is generic over the integer tick type (any unsigned primitive
//! integer); [`Ticks`] and the aliases below fix it to `u64`, which is what the
//! simulator, the experiment harness and the CLI use.

pub mod assign;
pub mod cli;
pub mod demand;
pub mod experiment;
pub mod format;
pub mod model;
pub mod sim;

use std::fmt::{Debug, Display};
use std::hash::Hash;

use num_integer::Integer;
use num_traits::{PrimInt, Unsigned};

/// Integer time unit used by every analysis routine.
pub trait Tick: PrimInt + Unsigned + Integer + Hash + Debug + Display + Default + Send + Sync + 'static {}

impl<T> Tick for T where T: PrimInt + Unsigned + Integer + Hash + Debug + Display + Default + Send + Sync + 'static {}

/// Concrete tick type.
pub type Ticks = u64;

/// Default cap on the analysis horizon.
pub const DEFAULT_HORIZON_CAP: Ticks = 100_000_000;

pub type Task = model::Task<Ticks>;
pub type TaskSystem = model::TaskSystem<Ticks>;
pub type MultiframeTask = model::MultiframeTask<Ticks>;
pub type AssignmentPlan = model::AssignmentPlan<Ticks>;
pub type Verdict = model::Verdict<Ticks>;
pub type WorkloadVerdict = model::WorkloadVerdict<Ticks>;
pub type CpuWorkload = demand::CpuWorkload<Ticks>;
pub type AnalysisConfig = assign::AnalysisConfig<Ticks>;

pub use demand::TestMode;
pub use model::{Status, TaskId};

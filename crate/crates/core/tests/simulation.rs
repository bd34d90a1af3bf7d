//! The simulator as a falsifier: systems the analysis accepts must not miss
//! deadlines, and an overloaded system must.

mod common;

use num_rational::Ratio;
use semipart::assign::semi_partition;
use semipart::experiment::{trial_system, SweepConfig};
use semipart::model::validate_system;
use semipart::sim::{planned_migrations, run_simulation, ReleaseModel, SimConfig};
use semipart::{AnalysisConfig, AssignmentPlan, TaskSystem, TestMode};

fn simulate(
    sys: &TaskSystem,
    plan: &AssignmentPlan,
    horizon: u64,
    release_model: ReleaseModel,
) -> semipart::sim::SimReport {
    let cfg = SimConfig { system: sys, plan, horizon, release_model, record_trace: false };
    run_simulation(&cfg).unwrap()
}

#[test]
fn accepted_heavy_systems_do_not_miss() {
    let cfg = SweepConfig { seed: 99, ..SweepConfig::default() };
    let mut migrating = 0;
    for (m, f) in [(2, Ratio::new(9, 10)), (2, Ratio::new(19, 20)), (4, Ratio::new(19, 20))] {
        for trial in 0..25 {
            let sys = trial_system(&cfg, m, f, trial);
            for mode in [TestMode::Packed, TestMode::Pattern] {
                let (plan, verdict) = semi_partition(&sys, &AnalysisConfig { k: 8, mode, cap: 100_000_000 });
                if !verdict.is_schedulable() {
                    continue;
                }
                migrating += !plan.sequences.is_empty() as usize;
                let horizon = verdict.analysis_horizon(100_000_000).saturating_mul(2).min(300_000);
                for release in [
                    ReleaseModel::SynchronousPeriodic,
                    ReleaseModel::SporadicSeeded { seed: trial as u64, max_jitter: 50 },
                ] {
                    let report = simulate(&sys, &plan, horizon, release);
                    assert!(
                        report.misses.is_empty(),
                        "m={m} trial {trial} {mode:?} {release:?}: {:?}",
                        report.first_miss()
                    );
                }
            }
        }
    }
    assert!(migrating >= 10, "only {migrating} accepted plans used migration");
}

#[test]
fn migrations_follow_the_plan() {
    let sys =
        validate_system(vec![common::task(1, 6, 10, 10), common::task(2, 6, 10, 10), common::task(3, 3, 5, 5)], 2)
            .unwrap();
    let (plan, verdict) = semi_partition(&sys, &AnalysisConfig { k: 2, mode: TestMode::Pattern, cap: 1000 });
    assert!(verdict.is_schedulable());
    let report = simulate(&sys, &plan, 100, ReleaseModel::SynchronousPeriodic);
    assert!(report.misses.is_empty());
    // 20 jobs of task 3 alternate between the CPUs.
    assert_eq!(planned_migrations(&plan, 20)[&3], 19);
    assert_eq!(report.migrations, 19);
}

#[test]
fn overload_is_caught() {
    let sys = validate_system(vec![common::task(1, 3, 5, 5), common::task(2, 3, 5, 5)], 1).unwrap();
    let mut plan = AssignmentPlan::new(1, 1);
    plan.fixed.insert(1, 0);
    plan.fixed.insert(2, 0);
    let report = simulate(&sys, &plan, 10, ReleaseModel::SynchronousPeriodic);
    let first = report.first_miss().unwrap();
    assert_eq!((first.task, first.deadline), (2, 5));
}

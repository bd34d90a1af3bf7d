//! Fixed examples: the 3-CPU, K = 11 assignment and the end-to-end runs
//! that reproduce it.

mod common;

use common::task;
use semipart::assign::{
    alternative_assign, flatten_sequence, merge_frames, most_regular_assign, regular_pattern, semi_partition,
};
use semipart::model::validate_system;
use semipart::{AnalysisConfig, MultiframeTask, TestMode};

const C: u64 = 33;

fn frames(digits: &str) -> Vec<u64> {
    digits.bytes().map(|b| if b == b'1' { C } else { 0 }).collect()
}

#[test]
fn regular_patterns_for_eleven_jobs() {
    assert_eq!(regular_pattern(11, 4).unwrap().to_digits(), "10100100100");
    assert_eq!(regular_pattern(11, 2).unwrap().to_digits(), "10000100000");
    assert_eq!(regular_pattern(11, 5).unwrap().to_digits(), "10101010100");
}

#[test]
fn flattened_sequence_for_counts_4_2_5() {
    let patterns: Vec<_> = [4, 2, 5].iter().map(|&c| regular_pattern(11, c).unwrap()).collect();
    assert_eq!(flatten_sequence(&patterns, 11).unwrap(), vec![0, 1, 2, 0, 2, 2, 0, 1, 2, 0, 2]);
    let t = task(1, C, 100, 100);
    let split = most_regular_assign(&t, 11, &[4, 2, 5]).unwrap();
    assert_eq!(split.row, vec![4, 2, 5]);
    assert_eq!(split.multiframes[0].1.frames, frames("10010010010"));
}

#[test]
fn merged_images_for_counts_4_2_5() {
    let t = task(1, C, 100, 100);
    let first = MultiframeTask::from_mask(&t, regular_pattern(11, 4).unwrap().bits());
    assert_eq!(first.frames, frames("10100100100"));
    let temp2 = regular_pattern(7, 2).unwrap();
    assert_eq!(temp2.to_digits(), "1001000");
    let second = merge_frames(&t, std::slice::from_ref(&first), &temp2, 11).unwrap();
    assert_eq!(second.frames, frames("01000010000"));
    let temp3 = regular_pattern(5, 5).unwrap();
    assert_eq!(temp3.to_digits(), "11111");
    let third = merge_frames(&t, &[first, second], &temp3, 11).unwrap();
    assert_eq!(third.frames, frames("00011001011"));
}

#[test]
fn alternative_assign_with_capacity_4_2_5() {
    let t = task(1, C, 100, 100);
    let capacity = [4, 2, 5];
    let split = alternative_assign(&t, 11, 3, |cpu, mf| mf.nonzero_count() <= capacity[cpu]).unwrap();
    assert_eq!(split.row, vec![4, 2, 5]);
    let images: Vec<_> = split.multiframes.iter().map(|(_, mf)| mf.frames.clone()).collect();
    assert_eq!(images, vec![frames("10100100100"), frames("01000010000"), frames("00011001011")]);
    assert_eq!(split.sequence, vec![0, 1, 0, 2, 2, 0, 1, 2, 0, 2, 2]);
}

/// Five fixed tasks leave room for exactly 4, 2 and 5 of the eleven jobs of a
/// light migrating task.
fn three_cpu_system() -> semipart::TaskSystem {
    validate_system(
        vec![
            task(1, 968, 1100, 1100),
            task(2, 550, 1100, 1100),
            task(3, 473, 1100, 1100),
            task(4, 440, 1100, 1100),
            task(5, 440, 1100, 1100),
            task(6, C, 100, 100),
        ],
        3,
    )
    .unwrap()
}

#[test]
fn end_to_end_packed_gives_most_regular_sequence() {
    let sys = three_cpu_system();
    let (plan, verdict) = semi_partition(&sys, &AnalysisConfig { k: 11, mode: TestMode::Packed, cap: 1_000_000 });
    assert!(verdict.is_schedulable());
    assert_eq!(plan.rows[&6], vec![4, 2, 5]);
    assert_eq!(plan.sequences[&6], vec![0, 1, 2, 0, 2, 2, 0, 1, 2, 0, 2]);
    assert_eq!(plan.fixed.len(), 5);
}

#[test]
fn end_to_end_pattern_gives_merged_images() {
    let sys = three_cpu_system();
    let (plan, verdict) = semi_partition(&sys, &AnalysisConfig { k: 11, mode: TestMode::Pattern, cap: 1_000_000 });
    assert!(verdict.is_schedulable());
    assert_eq!(plan.rows[&6], vec![4, 2, 5]);
    let images: Vec<_> = plan.per_cpu.iter().map(|v| v[0].frames.clone()).collect();
    assert_eq!(images, vec![frames("10100100100"), frames("01000010000"), frames("00011001011")]);
    plan.check_invariants().unwrap();
}

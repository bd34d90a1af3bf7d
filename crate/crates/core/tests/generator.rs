//! Statistical and reproducibility checks of the task-system generator and
//! the sweep.

use num_rational::Ratio;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use semipart::experiment::{generate_task_system, run_sweep, trial_seed, write_csv, Generator, Strategy, SweepConfig};

fn realized(sys: &semipart::TaskSystem) -> f64 {
    sys.tasks.iter().map(|t| t.wcet as f64 / t.period as f64).sum()
}

#[test]
fn mean_utilization_hits_target() {
    let f = Ratio::new(3, 4);
    for generator in [Generator::Sequential, Generator::UunifastDiscard] {
        let mut sum = 0.0;
        for i in 0..1000 {
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(7, 4, f, i));
            let sys = generate_task_system(4, f, generator, &mut rng);
            let u = realized(&sys);
            assert!((u - 3.0).abs() <= sys.tasks.len() as f64 / 200.0 + 1e-9, "{u}");
            assert!(sys.tasks.iter().all(|t| (100..=3000).contains(&t.period) && t.deadline == t.period));
            sum += u / 4.0;
        }
        let mean = sum / 1000.0;
        assert!((mean - 0.75).abs() <= 0.01, "{generator:?}: mean {mean}");
    }
}

#[test]
fn sweep_output_is_reproducible() {
    let cfg = SweepConfig {
        cpu_counts: vec![2],
        fractions: vec![Ratio::new(19, 20)],
        k_values: vec![2, 4],
        trials: 20,
        ..SweepConfig::default()
    };
    let table = |cfg: &SweepConfig| {
        let mut out = Vec::new();
        write_csv(&run_sweep(cfg).unwrap(), &mut out).unwrap();
        String::from_utf8(out).unwrap()
    };
    let a = table(&cfg);
    assert_eq!(a, table(&cfg));
    assert_eq!(a.lines().count(), 1 + 5);
    let other = SweepConfig { seed: cfg.seed + 1, ..cfg.clone() };
    assert_ne!(a, table(&other));
}

#[test]
fn modes_are_paired_trial_by_trial() {
    let cfg = SweepConfig {
        cpu_counts: vec![4],
        fractions: vec![Ratio::new(9, 10), Ratio::new(19, 20)],
        k_values: vec![2, 8],
        trials: 40,
        ..SweepConfig::default()
    };
    let rows = run_sweep(&cfg).unwrap();
    for cell in rows.chunks(5) {
        let get = |mode, k| cell.iter().find(|r| r.mode == mode && r.k == k).unwrap();
        let ffd = get(Strategy::Ffd, 1);
        for k in [2, 8] {
            let (packed, pattern) = (get(Strategy::Packed, k), get(Strategy::Pattern, k));
            for t in 0..cfg.trials {
                let (f, pk, pt) = (ffd.outcomes[t], packed.outcomes[t], pattern.outcomes[t]);
                // Packed success does not imply Pattern success: the pattern
                // search may take more jobs on an early CPU and leave too
                // little room for a later task.
                assert!(!f.is_schedulable() || (pk.is_schedulable() && pt.is_schedulable()));
            }
        }
        assert_eq!(get(Strategy::Packed, 2).outcomes, get(Strategy::Pattern, 2).outcomes);
    }
}

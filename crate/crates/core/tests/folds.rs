mod support;

use proptest::prelude::*;

use pinwheel::folds::{cfold, cfold_improved, lift_schedule, pfold, pfold_to_single, FoldTrace};
use pinwheel::instances::{count_in_range, density};
use pinwheel::ratio::{frac, int, Ratio};
use pinwheel::schedule::verify_covering;
use pinwheel::solvers::{decide, SolverConfig};
use pinwheel::{Kind, TaskPeriods};

/// Density before and after each level of an improved fold, by replaying
/// the steps directly on a plain vector.
fn level_losses(t: &FoldTrace) -> Vec<(Ratio, usize, Ratio)> {
    let mut work: Vec<Ratio> = t.input.periods().to_vec();
    let sum = |w: &[Ratio]| w.iter().fold(int(0), |acc, x| acc + x.recip());
    let mut out = Vec::new();
    for (lvl, steps) in t.levels.iter().zip(t.level_steps()) {
        let before = sum(&work);
        for s in steps {
            for r in s.removed() {
                let pos = work.iter().position(|x| *x == r).expect("removed value present");
                work.swap_remove(pos);
            }
            work.push(s.added());
        }
        out.push((lvl.theta.clone(), lvl.n, before - sum(&work)));
    }
    out
}

fn instance() -> impl Strategy<Value = Vec<u64>> {
    prop::collection::vec(1u64..=64, 0..=12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn cfold_caps_and_loses_at_most_two_over_theta(p in instance(), e in 1u32..=5) {
        let theta = 1i64 << e;
        let a = TaskPeriods::covering(&p);
        let t = cfold(&a, &int(theta)).unwrap();
        prop_assert!(TaskPeriods::max(&t.output).is_none_or(|m| *m <= int(theta)));
        prop_assert!(density(&a) - density(&t.output) <= frac(2, theta));
        prop_assert_eq!(t.replay().unwrap(), t.output);
    }

    #[test]
    fn pfold_caps_and_replays(p in instance(), e in 1u32..=5) {
        let theta = int(1i64 << e);
        let a = TaskPeriods::packing(&p);
        let t = pfold(&a, &theta).unwrap();
        prop_assert!(TaskPeriods::max(&t.output).is_none_or(|m| *m <= theta));
        // Folding packing instances never lowers density.
        prop_assert!(density(&t.output) >= density(&a));
        prop_assert_eq!(t.replay().unwrap(), t.output);
    }

    #[test]
    fn improved_fold_level_losses(p in instance(), e in 2u32..=5) {
        let theta = int(1i64 << e);
        let a = TaskPeriods::covering(&p);
        let t = cfold_improved(&a, &theta).unwrap();
        prop_assert!(TaskPeriods::max(&t.output).is_none_or(|m| *m <= theta));
        prop_assert_eq!(t.replay().unwrap(), t.output.clone());
        for (th, n, loss) in level_losses(&t) {
            if n >= 2 {
                prop_assert!(loss <= frac(3, 4) / &th, "level {} n {} loss {}", th, n, loss);
            }
            if n % 2 == 0 {
                prop_assert!(loss <= frac(1, 2) / &th, "level {} n {} loss {}", th, n, loss);
            }
        }
    }
}

#[test]
fn level_counts_match_ranges() {
    let a = TaskPeriods::covering(&[3, 17, 18, 20, 33, 40, 64]);
    let t = cfold_improved(&a, &int(4)).unwrap();
    // The first level sees the input untouched.
    let first = &t.levels[0];
    assert_eq!(first.n, count_in_range(&a, &first.theta));
}

#[test]
fn pfold_to_single_examples() {
    assert_eq!(pfold_to_single(&TaskPeriods::packing(&[8])).unwrap().0, int(8));
    assert_eq!(pfold_to_single(&TaskPeriods::packing(&[8, 8])).unwrap().0, int(4));
    // Step replay: (8,8) -> 4 gives (4,4); (4,4) -> 2.
    assert_eq!(pfold_to_single(&TaskPeriods::packing(&[4, 8, 8])).unwrap().0, int(2));
}

/// Small covering instances: if the ceiling of the folded instance has a
/// schedule, the input has one too, and lifting produces it.
#[test]
fn covering_fold_preserves_unschedulability() {
    let cfg = SolverConfig::default();
    let mut lifted = 0;
    for x in 1..=9u64 {
        for y in x..=9 {
            for z in y..=9 {
                let a = TaskPeriods::covering(&[x, y, z]);
                for theta in [2, 4] {
                    let t = cfold(&a, &int(theta)).unwrap();
                    let ceil = TaskPeriods::new(Kind::Covering, t.output.periods().iter().map(Ratio::ceil)).unwrap();
                    let Some(s) = decide(&ceil, &cfg).unwrap().outcome.schedule().cloned() else { continue };
                    assert!(support::covers(&[x, y, z]), "{a} at {theta}");
                    let l = lift_schedule(&t, &s).unwrap();
                    assert!(verify_covering(&a, &l).unwrap());
                    lifted += 1;
                }
            }
        }
    }
    assert!(lifted > 0);
}

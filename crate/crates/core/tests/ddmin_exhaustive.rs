mod common;

use ducut_core::reducer::{ddmin, Partition};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mask(s: &[u32]) -> u32 {
    s.iter().fold(0, |m, &u| m | (1 << u))
}

/// A random predicate over subsets of `0..n`: either monotone (a random
/// family of required sets, any of which suffices) or an arbitrary truth
/// table. Keeping everything always passes.
fn predicate(rng: &mut ChaCha8Rng, n: u32) -> Box<dyn Fn(u32) -> bool> {
    let full = (1u32 << n) - 1;
    if rng.gen_bool(0.5) {
        let needs: Vec<u32> = (0..rng.gen_range(1..4))
            .map(|_| rng.gen::<u32>() & full & rng.gen::<u32>())
            .collect();
        Box::new(move |s| needs.iter().any(|&r| r & !s == 0))
    } else {
        let density = rng.gen_range(0.05..0.6);
        let table: Vec<bool> = (0..=full).map(|s| s == full || rng.gen_bool(density)).collect();
        Box::new(move |s| table[s as usize])
    }
}

#[test]
fn two_hundred_random_predicates() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..200 {
        let n = rng.gen_range(0..=12);
        let test = predicate(&mut rng, n);
        let units: Vec<u32> = (0..n).collect();
        let out = ddmin(&units, |s| test(mask(s))).unwrap();
        let m = mask(&out);
        let minimal = common::one_minimal_sets(n, &*test);
        assert!(minimal.contains(&m), "case {case}: {out:?} is not 1-minimal");
        assert!(out.windows(2).all(|w| w[0] < w[1]), "order kept");
    }
}

proptest! {
    #[test]
    fn partitions_cover_units_once(len in 0usize..40, n in 1usize..50) {
        let units: Vec<usize> = (0..len).collect();
        let p = Partition::new(units.clone(), n);
        let parts = p.parts();
        prop_assert_eq!(parts.concat(), units.clone());
        prop_assert!(parts.iter().all(|x| !x.is_empty()) || len == 0);
        for (part, comp) in parts.iter().zip(p.complements()) {
            let mut joined: Vec<usize> = comp.iter().chain(part).copied().collect();
            joined.sort();
            prop_assert_eq!(&joined, &units);
        }
    }

    #[test]
    fn result_passes_and_is_one_minimal(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(0..=10);
        let test = predicate(&mut rng, n);
        let units: Vec<u32> = (0..n).collect();
        let out = ddmin(&units, |s| test(mask(s))).unwrap();
        prop_assert!(common::is_one_minimal(mask(&out), &*test));
    }
}

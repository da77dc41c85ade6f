mod common;

use std::collections::HashMap;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use permsys::orbit::{cycle_structure_from, full_cycle_structure, period_of_seed, PeriodOutcome};
use permsys::system::PermutationRefusal;
use permsys::{make_nonresidue_system, Generator, NonresidueFamily, PrimeField, TriangularSystem};

use common::{random_seed, random_valid_system};

const PRIMES: [u64; 5] = [3, 5, 7, 11, 13];

fn system_from(seed: u64) -> TriangularSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = PRIMES[(seed % 5) as usize];
    let m = 1 + (seed / 5 % 2) as usize;
    random_valid_system(&mut rng, p, m, 2)
}

/// Period and preperiod by remembering every visited state.
fn naive_period(sys: &TriangularSystem, seed: &[u64]) -> (u64, u64) {
    let mut seen = HashMap::new();
    let mut x = seed.to_vec();
    let mut n = 0;
    loop {
        if let Some(&first) = seen.get(&x) {
            return (n - first, first);
        }
        seen.insert(x.clone(), n);
        x = sys.apply(&x).unwrap();
        n += 1;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn brent_agrees_with_memory(seed in any::<u64>()) {
        let sys = system_from(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        for _ in 0..4 {
            let v = random_seed(&mut rng, &sys);
            let (period, preperiod) = naive_period(&sys, &v);
            match period_of_seed(&sys, &v, 1 << 20).unwrap() {
                PeriodOutcome::Found(sp) => {
                    prop_assert_eq!(sp.period, period);
                    prop_assert_eq!(sp.preperiod, preperiod);
                }
                other => prop_assert!(false, "budget hit: {:?}", other),
            }
        }
    }

    #[test]
    fn permutations_have_no_tails(seed in any::<u64>()) {
        let sys = system_from(seed);
        let cs = full_cycle_structure(&sys, 1 << 20).unwrap();
        prop_assert_eq!(cs.cyclic_states() + cs.transient_states, cs.total_states);
        match sys.check_permutation(1 << 20) {
            Ok(_) => {
                prop_assert!(cs.bijective());
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 2);
                let v = random_seed(&mut rng, &sys);
                match period_of_seed(&sys, &v, 1 << 20).unwrap() {
                    PeriodOutcome::Found(sp) => prop_assert_eq!(sp.preperiod, 0),
                    other => prop_assert!(false, "budget hit: {:?}", other),
                }
            }
            Err(PermutationRefusal::HasZero { .. }) => prop_assert!(!cs.bijective()),
            Err(other) => prop_assert!(false, "unexpected refusal {}", other),
        }
    }

    #[test]
    fn cycle_structure_ignores_start_order(seed in any::<u64>()) {
        let sys = system_from(seed);
        let total = sys.field().modulus().pow(sys.nvars() as u32);
        let mut order: Vec<u64> = (0..total).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 3));
        let a = full_cycle_structure(&sys, 1 << 20).unwrap();
        let b = cycle_structure_from(&sys, 1 << 20, order).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn system_file_round_trip(seed in any::<u64>()) {
        let sys = system_from(seed);
        let text = sys.to_json();
        let back = TriangularSystem::from_json(&text).unwrap();
        prop_assert_eq!(back.to_json(), text);
        prop_assert_eq!(back.polys(), sys.polys());
        prop_assert_eq!(back.validate_structure(), sys.validate_structure());
    }

    #[test]
    fn generator_follows_the_map(seed in any::<u64>(), steps in 0usize..40) {
        let sys = system_from(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 4);
        let v = random_seed(&mut rng, &sys);
        let mut gen = Generator::new(&sys, &v).unwrap();
        let mut x = v.clone();
        for _ in 0..steps {
            gen.step();
            x = sys.apply(&x).unwrap();
        }
        prop_assert_eq!(gen.state(), x.as_slice());
    }

    #[test]
    fn nonresidue_systems_certified(p_idx in 0usize..5, m in 1usize..=3, full: bool, b in any::<u64>()) {
        let p = PRIMES[p_idx];
        let fam = if full { NonresidueFamily::FullProduct } else { NonresidueFamily::Chain };
        let f = PrimeField::new(p).unwrap();
        let sys = make_nonresidue_system(f, m, fam, &vec![b % p; m], 1, b % p).unwrap();
        prop_assert!(sys.validate_structure().is_empty());
        prop_assert!(sys.check_permutation(1).is_ok());
        prop_assert!(sys.check_permutation_exhaustive(1 << 20).is_ok());
    }
}

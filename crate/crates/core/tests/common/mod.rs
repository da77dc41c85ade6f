#![allow(dead_code)]

use permsys::{PrimeField, SparsePoly, TriangularSystem};
use rand::Rng;

/// A structurally valid system with per-variable leading degrees in `0..=max_deg`
/// and a couple of random lower terms in each `g_i` and `h_i`.
pub fn random_valid_system<R: Rng>(
    rng: &mut R,
    p: u64,
    m: usize,
    max_deg: u32,
) -> TriangularSystem {
    let field = PrimeField::new(p).unwrap();
    let n = m + 1;
    let mut g = Vec::with_capacity(m);
    let mut h = Vec::with_capacity(m);
    for i in 0..m {
        let mut lead = vec![0u32; n];
        for e in lead.iter_mut().skip(i + 1) {
            *e = rng.gen_range(0..=max_deg);
        }
        let below =
            |rng: &mut R| -> Vec<u32> { lead.iter().map(|&e| rng.gen_range(0..=e)).collect() };
        let mut g_terms: Vec<(Vec<u32>, i64)> = vec![(lead.clone(), 1)];
        for _ in 0..rng.gen_range(0..=2) {
            let e = below(rng);
            if e != lead {
                g_terms.push((e, rng.gen_range(1..p as i64)));
            }
        }
        let h_terms: Vec<(Vec<u32>, i64)> = (0..rng.gen_range(0..=2))
            .map(|_| (below(rng), rng.gen_range(0..p as i64)))
            .collect();
        g.push(SparsePoly::from_terms(field, n, g_terms).unwrap());
        h.push(SparsePoly::from_terms(field, n, h_terms).unwrap());
    }
    let a = rng.gen_range(1..p);
    let b = rng.gen_range(0..p);
    TriangularSystem::new(field, g, h, a, b).expect("generated system is valid")
}

pub fn random_seed<R: Rng>(rng: &mut R, sys: &TriangularSystem) -> Vec<u64> {
    let p = sys.field().modulus();
    (0..sys.nvars()).map(|_| rng.gen_range(0..p)).collect()
}

use std::collections::BTreeSet;

use geofence_core::minimize::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn check(on: &BTreeSet<u64>, width: u32) {
    let codes: Vec<u64> = on.iter().copied().collect();
    let cover = minimize_codes(&codes, width).unwrap();
    assert_eq!(&cover.expand(), on);
    assert!(cover.len() <= on.len());
    assert!(cover.non_wildcards() <= u64::from(width) * on.len() as u64);
    for cube in cover.cubes() {
        assert!(is_prime(cube, on, width), "{:?} in {on:?}", cube.to_pattern(width));
    }
}

#[test]
fn every_subset_of_three_bits() {
    for mask in 1u32..256 {
        let on: BTreeSet<u64> = (0..8).filter(|i| mask >> i & 1 == 1).collect();
        check(&on, 3);
    }
}

#[test]
fn isolated_minterms_keep_full_width() {
    // No two members within Hamming distance 1: nothing merges.
    let on: BTreeSet<u64> = [0b0000, 0b0011, 0b0101, 0b0110, 0b1001, 0b1010, 0b1100, 0b1111].into();
    let cover = minimize_codes(&on.iter().copied().collect::<Vec<_>>(), 4).unwrap();
    assert_eq!(cover.non_wildcards(), 4 * 8);
}

#[test]
fn random_sets_at_width_ten() {
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    for _ in 0..200 {
        let density: f64 = rng.random_range(0.01..0.99);
        let mut on: BTreeSet<u64> = (0..1024).filter(|_| rng.random_bool(density)).collect();
        on.insert(rng.random_range(0..1024));
        check(&on, 10);
    }
}

#[test]
fn literal_raising_fallback_is_exact_and_prime() {
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    for _ in 0..50 {
        let on: BTreeSet<u64> = (0..4096).filter(|_| rng.random_bool(0.6)).collect();
        let codes: Vec<u64> = on.iter().copied().collect();
        assert!(qm_primes(&codes, 12, 1000).is_none());
        let primes = raised_primes(&codes, 12);
        let covered: BTreeSet<u64> = primes.iter().flat_map(|p| p.minterms()).collect();
        assert_eq!(covered, on);
        assert!(primes.iter().all(|p| is_prime(p, &on, 12)));
    }
}

#[test]
fn large_zone_uses_fallback_and_stays_exact() {
    // A dense random set at width 16 generates far more implicants than the cap.
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let on: BTreeSet<u64> = (0..1 << 16).filter(|_| rng.random_bool(0.7)).collect();
    check(&on, 16);
}

#[test]
fn cost_examples() {
    let two: Vec<_> = ["00*110", "00111*"].iter().map(|p| p.parse().unwrap()).collect();
    assert_eq!(cover_cost(&two), (10, 22));
    let one: Vec<_> = vec!["00*11*".parse().unwrap()];
    assert_eq!(cover_cost(&one), (4, 9));
    let star: Vec<_> = vec!["******".parse().unwrap()];
    assert_eq!(cover_cost(&star), (0, 1));
}

#[test]
fn output_order_is_stars_then_lexicographic() {
    let on: Vec<u64> = vec![0b000, 0b001, 0b010, 0b011, 0b101, 0b111];
    let cover = minimize_codes(&on, 3).unwrap();
    let patterns: Vec<String> = cover.patterns().iter().map(|p| p.to_string()).collect();
    assert_eq!(patterns, ["**1", "0**"]);
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use racovert_core::adversary::{
    estimate, measure_disruption, preimage_attack, Codebook, DecodeResult, PreimageOutcome, Structure,
};
use racovert_core::analytics::{pc_exact, pd_elisha};
use racovert_core::bitcore::weight_masks;
use racovert_core::bitcore::BitString;
use racovert_core::schemes::{DigestBackend, ObfuscatedBroadcast, Randomness, Scheme, SchemeConfig};
use racovert_core::sim::estimate_pc_montecarlo;

fn three_sigma(p: f64, n: u64) -> f64 {
    3.0 * (p * (1.0 - p) / n as f64).sqrt()
}

#[test]
fn broadcasts_survive_the_wire() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for cfg in [
        SchemeConfig::plain(20),
        SchemeConfig::k_errors(20, 1),
        SchemeConfig::k_erasures(20, 3),
        SchemeConfig::elisha(20, 24, 4, 16, DigestBackend::TruncatedCryptoHash),
    ] {
        let scheme = Scheme::new(cfg).unwrap();
        let book = Codebook::build(20, 3, Structure::MinDistance(3), &mut rng).unwrap();
        for w in book.words().unwrap() {
            let y = scheme.obfuscate(w, &mut rng).unwrap();
            let back = ObfuscatedBroadcast::from_bytes(&y.to_bytes().unwrap(), &cfg).unwrap();
            assert_eq!(back, y);
            assert_eq!(
                estimate(&back, &book, &scheme).unwrap().result,
                estimate(&y, &book, &scheme).unwrap().result
            );
        }
    }
}

#[test]
fn salting_defeats_the_preimage_table() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let book = Codebook::build(16, 4, Structure::Random, &mut rng).unwrap();

    let unsalted = Scheme::new(SchemeConfig::elisha(16, 16, 0, 0, DigestBackend::TruncatedCryptoHash)).unwrap();
    let PreimageOutcome::Table(table) = preimage_attack(&book, &unsalted).unwrap() else {
        panic!("unsalted table must be buildable");
    };
    let trials = 10_000;
    let mut hits = 0;
    for _ in 0..trials {
        let w = book.word(rng.random_range(0..book.len())).unwrap();
        let y = unsalted.obfuscate(&w, &mut rng).unwrap();
        hits += (table.lookup(&y).result == DecodeResult::Decoded(w)) as u64;
    }
    assert_eq!(hits, trials);

    let salted = Scheme::new(SchemeConfig::elisha(16, 16, 4, 64, DigestBackend::TruncatedCryptoHash)).unwrap();
    assert!(matches!(preimage_attack(&book, &salted).unwrap(), PreimageOutcome::Infeasible { .. }));
    let trials = 100_000;
    let rep = measure_disruption(&book, &salted, trials, &mut rng).unwrap();
    let expected = 1.0 - pd_elisha(16, 4, 4).unwrap().p_d;
    assert!((rep.success_rate - expected).abs() <= three_sigma(expected, trials));
}

#[test]
fn kerrors_distance_regimes() {
    // Exhaustive over masks and codewords at N = 10, K = 2.
    let (n, k) = (10, 2);
    let scheme = Scheme::new(SchemeConfig::k_errors(n, k)).unwrap();
    let success = |d: usize, seed: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let book = Codebook::build(n, 2, Structure::MinDistance(d), &mut rng).unwrap();
        let (mut ok, mut total) = (0u64, 0u64);
        for mask in weight_masks(n, k).unwrap() {
            let r = Randomness { mask, salt: BitString::zeros(0).unwrap() };
            for w in book.words().unwrap() {
                let y = scheme.obfuscate_with(w, &r).unwrap();
                ok += (estimate(&y, &book, &scheme).unwrap().result == DecodeResult::Decoded(*w)) as u64;
                total += 1;
            }
        }
        ok as f64 / total as f64
    };
    assert_eq!(success(2 * k + 1, 3), 1.0);
    let weak = success(k + 1, 4);
    assert!(weak <= 1.0);
}

#[test]
fn montecarlo_agrees_with_exhaustive_pc() {
    let cfg = SchemeConfig::elisha(8, 10, 3, 2, DigestBackend::TruncatedCryptoHash);
    let exact = pc_exact(&cfg).unwrap().p_c;
    let trials = 400_000;
    let mc = estimate_pc_montecarlo(&cfg, trials, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    assert!((mc.p_c - exact).abs() <= three_sigma(exact, trials), "{} vs {exact}", mc.p_c);
}

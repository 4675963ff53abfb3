//! The CRF dynamic programs against exhaustive enumeration.

mod common;

use common::{all_paths, brute_force_crf, path_score, random_matrix};
use crosswise::crf::{log_partition, marginals, nll, sequence_score, viterbi};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn partition_and_viterbi_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let t = rng.gen_range(1..=5);
        let em = random_matrix(&mut rng, t, 4, 3.0);
        let tr = random_matrix(&mut rng, 5, 4, 3.0);
        let (log_z, best, best_score) = brute_force_crf(&em, &tr);
        assert!((log_partition(&em, &tr).unwrap() - log_z).abs() < 1e-9);
        let (path, score) = viterbi(&em, &tr).unwrap();
        assert_eq!(path, best);
        assert!((score - best_score).abs() < 1e-9);
    }
}

#[test]
fn viterbi_ties_resolve_to_lexicographic_first() {
    // integer scores make exact ties common
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut ties = 0;
    for _ in 0..300 {
        let t = rng.gen_range(1..=4);
        let em = crosswise::autodiff::Matrix::from_vec(
            t,
            4,
            (0..t * 4).map(|_| rng.gen_range(0..2) as f64).collect(),
        );
        let tr = crosswise::autodiff::Matrix::from_vec(
            5,
            4,
            (0..20).map(|_| rng.gen_range(0..2) as f64).collect(),
        );
        let (_, best, best_score) = brute_force_crf(&em, &tr);
        let n_best = all_paths(t, 4)
            .iter()
            .filter(|p| path_score(&em, &tr, p) == best_score)
            .count();
        if n_best > 1 {
            ties += 1;
        }
        assert_eq!(viterbi(&em, &tr).unwrap().0, best);
    }
    assert!(ties > 50, "fixture should produce ties, got {ties}");
}

#[test]
fn sequence_score_and_nll_agree_with_definition() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let t = rng.gen_range(1..=5);
        let em = random_matrix(&mut rng, t, 4, 2.0);
        let tr = random_matrix(&mut rng, 5, 4, 2.0);
        let labels: Vec<usize> = (0..t).map(|_| rng.gen_range(0..4)).collect();
        let s = path_score(&em, &tr, &labels);
        assert!((sequence_score(&em, &tr, &labels).unwrap() - s).abs() < 1e-12);
        let (log_z, _, _) = brute_force_crf(&em, &tr);
        assert!((nll(&em, &tr, &labels).unwrap() - (log_z - s)).abs() < 1e-9);
    }
}

#[test]
fn marginals_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..30 {
        let t = rng.gen_range(1..=4);
        let em = random_matrix(&mut rng, t, 4, 2.0);
        let tr = random_matrix(&mut rng, 5, 4, 2.0);
        let (log_z, _, _) = brute_force_crf(&em, &tr);
        let mut unary = vec![vec![0.0; 4]; t];
        let mut pair = vec![vec![0.0; 4]; 5];
        for p in all_paths(t, 4) {
            let w = (path_score(&em, &tr, &p) - log_z).exp();
            for (i, &y) in p.iter().enumerate() {
                unary[i][y] += w;
            }
            pair[4][p[0]] += w;
            for i in 1..t {
                pair[p[i - 1]][p[i]] += w;
            }
        }
        let (u, pr) = marginals(&em, &tr).unwrap();
        for i in 0..t {
            for y in 0..4 {
                assert!((u.get(i, y) - unary[i][y]).abs() < 1e-9);
            }
        }
        for a in 0..5 {
            for b in 0..4 {
                assert!((pr.get(a, b) - pair[a][b]).abs() < 1e-9);
            }
        }
    }
}

mod common;

use bilstm_crf_ner::crf::{crf_gradients, log_likelihood, log_partition, sequence_score, viterbi_decode, TransitionMatrix};
use bilstm_crf_ner::numerics::{grad_check, Matrix, Vector};
use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_instance(rng: &mut ChaCha8Rng, integer: bool) -> (Matrix, TransitionMatrix) {
    let t = rng.random_range(1..=6);
    let k = rng.random_range(1..=5);
    let mut draw = |rows, cols| {
        if integer {
            let data = (0..rows * cols).map(|_| rng.random_range(-2..=2) as f64).collect();
            Matrix::from_vec(rows, cols, data).unwrap()
        } else {
            random_matrix(rng, rows, cols, 3.0)
        }
    };
    let e = draw(t, k);
    let a = TransitionMatrix::from_matrix(draw(k + 1, k)).unwrap();
    (e, a)
}

fn effective(a: &TransitionMatrix) -> Vec<Vec<f64>> {
    let k = a.num_tags();
    (0..=k).map(|i| (0..k).map(|j| a.get(i, j)).collect()).collect()
}

#[test]
fn log_partition_and_viterbi_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut ties = 0;
    for n in 0..1500 {
        let (e, a) = random_instance(&mut rng, n % 2 == 1);
        let (er, ar) = (to_rows(&e), effective(&a));
        let z = log_partition(&e, &a).unwrap();
        assert!((z - brute_log_partition(&er, &ar)).abs() < 1e-8, "instance {n}");
        let (path, score) = viterbi_decode(&e, &a).unwrap();
        let (bpath, bscore) = brute_viterbi(&er, &ar);
        assert!((score - bscore).abs() < 1e-10, "instance {n}");
        assert_eq!(path, bpath, "instance {n}");
        assert!((sequence_score(&e, &a, &path).unwrap() - score).abs() < 1e-10);
        let optimal = all_sequences(er.len(), er[0].len())
            .iter()
            .filter(|y| brute_score(&er, &ar, y) == bscore)
            .count();
        if optimal > 1 {
            ties += 1;
        }
    }
    assert!(ties > 100, "integer instances should exercise ties, saw {ties}");
}

#[test]
fn masked_transitions_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for n in 0..300 {
        let (e, a) = random_instance(&mut rng, false);
        let k = a.num_tags();
        // Tag 0 stays reachable from everywhere so some path is always allowed.
        let allowed: Vec<bool> = (0..(k + 1) * k).map(|i| i % k == 0 || rng.random_bool(0.6)).collect();
        let a = a.with_mask(|from, to| allowed[from.unwrap_or(k) * k + to]);
        let (er, ar) = (to_rows(&e), effective(&a));
        assert!((log_partition(&e, &a).unwrap() - brute_log_partition(&er, &ar)).abs() < 1e-8, "instance {n}");
        let (path, score) = viterbi_decode(&e, &a).unwrap();
        let (bpath, bscore) = brute_viterbi(&er, &ar);
        assert!((score - bscore).abs() < 1e-10);
        assert_eq!(path, bpath);
    }
}

#[test]
fn likelihoods_form_a_distribution() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..50 {
        let (e, a) = random_instance(&mut rng, false);
        let total: f64 = all_sequences(e.rows(), e.cols())
            .iter()
            .map(|y| log_likelihood(&e, &a, y).unwrap().exp())
            .sum();
        assert!((total - 1.0).abs() < 1e-10);
    }
}

#[test]
fn crf_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..100 {
        let (e, a) = random_instance(&mut rng, false);
        let y: Vec<usize> = (0..e.rows()).map(|_| rng.random_range(0..e.cols())).collect();
        let g = crf_gradients(&e, &a, &y).unwrap();
        assert!((g.log_likelihood - log_likelihood(&e, &a, &y).unwrap()).abs() < 1e-12);

        let (rows, cols) = (e.rows(), e.cols());
        let f = |p: &Vector| log_likelihood(&Matrix::from_vec(rows, cols, p.as_slice().to_vec()).unwrap(), &a, &y).unwrap();
        let err = grad_check(f, &Vector::from(e.as_slice().to_vec()), &Vector::from(g.d_emissions.as_slice().to_vec()), 1e-5).unwrap();
        assert!(err < 1e-6, "emissions: {err}");

        let f = |p: &Vector| {
            let m = Matrix::from_vec(cols + 1, cols, p.as_slice().to_vec()).unwrap();
            log_likelihood(&e, &TransitionMatrix::from_matrix(m).unwrap(), &y).unwrap()
        };
        let err = grad_check(f, &Vector::from(a.params().as_slice().to_vec()), &Vector::from(g.d_transitions.as_slice().to_vec()), 1e-5).unwrap();
        assert!(err < 1e-6, "transitions: {err}");
    }
}

#[test]
fn large_emissions_stay_finite_and_decode_shift_invariantly() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..200 {
        let (e, a) = random_instance(&mut rng, false);
        let mut big = e.clone();
        big.as_mut_slice().iter_mut().for_each(|v| *v *= 1e4);
        assert!(log_partition(&big, &a).unwrap().is_finite());
        assert!(viterbi_decode(&big, &a).unwrap().1.is_finite());

        let mut shifted = e.clone();
        shifted.as_mut_slice().iter_mut().for_each(|v| *v += 1234.5);
        assert_eq!(viterbi_decode(&shifted, &a).unwrap().0, viterbi_decode(&e, &a).unwrap().0);
        let dz = log_partition(&shifted, &a).unwrap() - log_partition(&e, &a).unwrap();
        assert!((dz - 1234.5 * e.rows() as f64).abs() < 1e-8);
    }
}

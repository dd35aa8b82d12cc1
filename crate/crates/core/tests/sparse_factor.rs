use ngfield::dense;
use ngfield::sparse::{CholFactor, SparseSym};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random sparse SPD matrix: a random graph Laplacian-like structure plus a
/// dominant diagonal.
fn random_spd(n: usize, density: f64, seed: u64) -> SparseSym<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trip = Vec::new();
    let mut diag = vec![0.5; n];
    for j in 0..n {
        for i in 0..j {
            if rng.random::<f64>() < density {
                let v: f64 = rng.random_range(-1.0..1.0);
                trip.push((i, j, v));
                diag[i] += v.abs();
                diag[j] += v.abs();
            }
        }
    }
    for (i, d) in diag.into_iter().enumerate() {
        trip.push((i, i, d));
    }
    SparseSym::from_triplets(n, trip).unwrap()
}

fn dense_inverse(m: &SparseSym<f64>) -> Vec<Vec<f64>> {
    dense::inverse_spd(&m.to_dense()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn solve_and_log_det_match_dense(n in 2usize..160, density in 0.01f64..0.1, seed in any::<u64>()) {
        let m = random_spd(n, density, seed);
        let f = CholFactor::new(&m).unwrap();
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let x = f.solve(&b).unwrap();
        let r = m.mul_vec(&x).unwrap();
        for i in 0..n {
            prop_assert!((r[i] - b[i]).abs() < 1e-10);
        }
        let ld = dense::log_det_spd(&m.to_dense()).unwrap();
        prop_assert!((f.log_det() - ld).abs() < 1e-9 * ld.abs().max(1.0));
    }

    #[test]
    fn selected_inverse_matches_dense(n in 2usize..160, density in 0.01f64..0.1, seed in any::<u64>()) {
        let m = random_spd(n, density, seed);
        let s = CholFactor::new(&m).unwrap().selected_inverse();
        let inv = dense_inverse(&m);
        for (r, c, v) in s.iter_upper() {
            prop_assert!((v - inv[r][c]).abs() < 1e-10);
        }
        for (r, c, _) in m.iter_upper() {
            prop_assert!(s.position(r, c).is_some());
        }
    }

    #[test]
    fn refactor_agrees_with_fresh_factor(n in 65usize..120, seed in any::<u64>()) {
        let m = random_spd(n, 0.05, seed);
        let mut f = CholFactor::new(&m).unwrap();
        let shifted = m.scaled(2.0);
        f.refactor(&shifted).unwrap();
        let g = CholFactor::new(&shifted).unwrap();
        prop_assert!((f.log_det() - g.log_det()).abs() < 1e-9);
    }
}

#[test]
fn gaussian_samples_have_target_covariance() {
    let m = random_spd(5, 0.6, 4);
    let f = CholFactor::new(&m).unwrap();
    let inv = dense_inverse(&m);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let k = 200_000;
    let mut acc = vec![vec![0.0; 5]; 5];
    for _ in 0..k {
        let x = f.sample_gaussian(&[0.0; 5], &mut rng).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                acc[i][j] += x[i] * x[j] / k as f64;
            }
        }
    }
    for i in 0..5 {
        for j in 0..5 {
            let tol = 0.02 * (inv[i][i] * inv[j][j]).sqrt();
            assert!((acc[i][j] - inv[i][j]).abs() < tol, "{i} {j}");
        }
    }
}

use ngfield::dense::Matrix;
use ngfield::gig::gig_moment;
use ngfield::mesh::{build_k, build_mesh_1d, FemOperators, ObservationMatrix};
use ngfield::model::{
    prior_mean_v, prior_variance_params, sample_prior_v, simulate_latent, simulate_observations, Driver, ModelParams,
    NoiseSpec, VarianceLaw,
};
use ngfield::sparse::CholFactor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn params(driver: Driver<f64>, gamma: f64, mu: f64) -> ModelParams<f64> {
    ModelParams {
        kappa: 1.2,
        alpha: 2,
        beta: vec![0.0],
        sigma_eps: 0.1,
        noise: NoiseSpec { driver, gamma: vec![gamma], mu: vec![mu], sigma: 1.0 },
    }
}

#[test]
fn gaussian_latent_covariance_matches_closed_form() {
    let mesh = build_mesh_1d(0.0, 4.0, 9).unwrap();
    let ops = FemOperators::assemble(&mesh).unwrap();
    let n = ops.n();
    let ones = Matrix::ones(n);
    let mut p = params(Driver::Gaussian, 0.0, 0.0);
    p.noise = NoiseSpec::gaussian(0.7);
    let k = build_k(&ops, p.kappa).unwrap();
    let f = CholFactor::new(&k).unwrap();
    // φ² K⁻¹ diag(h) K⁻¹
    let mut kinv = vec![vec![0.0; n]; n];
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let col = f.solve(&e).unwrap();
        for i in 0..n {
            kinv[i][j] = col[i];
        }
    }
    let cov = |i: usize, j: usize| 0.49 * (0..n).map(|l| kinv[i][l] * ops.h[l] * kinv[l][j]).sum::<f64>();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let draws = 10_000;
    let (a, b) = (3, 5);
    let (mut saa, mut sab) = (0.0, 0.0);
    for _ in 0..draws {
        let s = simulate_latent(&p, &ops, &ones, &ones, &mut rng).unwrap();
        saa += s.w[a] * s.w[a];
        sab += s.w[a] * s.w[b];
    }
    assert!((saa / draws as f64 / cov(a, a) - 1.0).abs() < 0.05);
    assert!((sab / draws as f64 / cov(a, b) - 1.0).abs() < 0.05);
}

#[test]
fn nig_skewness_follows_skew_sign() {
    let mesh = build_mesh_1d(0.0, 2.0, 5).unwrap();
    let ops = FemOperators::assemble(&mesh).unwrap();
    let ones = Matrix::ones(5);
    for mu in [-1.5, 1.5] {
        let p = params(Driver::Nig { nu: 1.0 }, -mu * 0.4, mu);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let xs: Vec<f64> = (0..10_000).map(|_| simulate_latent(&p, &ops, &ones, &ones, &mut rng).unwrap().w[2]).collect();
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        let m2 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64;
        let m3 = xs.iter().map(|x| (x - m).powi(3)).sum::<f64>() / xs.len() as f64;
        assert_eq!((m3 / m2.powf(1.5)).signum(), mu.signum());
    }
}

#[test]
fn prior_variance_means() {
    let h = [0.5, 0.25, 1.0];
    let gal = NoiseSpec { driver: Driver::Gal { tau: 3.0 }, gamma: vec![0.0], mu: vec![0.0], sigma: 1.0 };
    let nig = NoiseSpec { driver: Driver::Nig { nu: 2.0 }, ..gal.clone() };
    for noise in [gal, nig] {
        let means = prior_mean_v(&noise, &h).unwrap();
        let laws = match prior_variance_params(&noise, &h).unwrap() {
            VarianceLaw::Gig(l) => l,
            VarianceLaw::Fixed(_) => unreachable!(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let draws = 40_000;
        let mut sum = [0.0; 3];
        let mut sq = [0.0; 3];
        for _ in 0..draws {
            let v = sample_prior_v(&noise, &h, &mut rng).unwrap();
            for i in 0..3 {
                sum[i] += v[i];
                sq[i] += v[i] * v[i];
            }
        }
        for i in 0..3 {
            let m = sum[i] / draws as f64;
            let sd = (sq[i] / draws as f64 - m * m).sqrt();
            assert!((m - means[i]).abs() < 3.0 * sd / (draws as f64).sqrt());
            assert!((means[i] - gig_moment(laws[i], 1.0).unwrap()).abs() < 1e-14);
        }
        if let Driver::Gal { tau } = noise.driver {
            for i in 0..3 {
                assert!((means[i] - tau * h[i]).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn simulation_replays_bit_for_bit() {
    let mesh = build_mesh_1d(0.0, 2.0, 7).unwrap();
    let ops = FemOperators::assemble(&mesh).unwrap();
    let ones = Matrix::ones(7);
    let p = params(Driver::Gal { tau: 2.0 }, 0.1, 0.4);
    let a = simulate_latent(&p, &ops, &ones, &ones, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    let b = simulate_latent(&p, &ops, &ones, &ones, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn measurement_noise_variance() {
    let mesh = build_mesh_1d(0.0, 1.0, 2).unwrap();
    let locs: Vec<[f64; 2]> = (0..100_000).map(|i| [(i % 100) as f64 / 99.0, 0.0]).collect();
    let a = ObservationMatrix::build(&mesh, &locs).unwrap();
    let mut p = params(Driver::Gaussian, 0.0, 0.0);
    p.sigma_eps = 0.3;
    p.beta = vec![2.0];
    let w = [1.0, -1.0];
    let y = simulate_observations(&p, &a, &Matrix::ones(locs.len()), &w, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
    let aw = a.mul_vec(&w);
    let r: Vec<f64> = y.iter().zip(&aw).map(|(y, x)| y - 2.0 - x).collect();
    let var = r.iter().map(|x| x * x).sum::<f64>() / r.len() as f64;
    assert!((var / 0.09 - 1.0).abs() < 0.03);
}

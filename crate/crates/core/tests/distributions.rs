use ldm_core::distributions::{transform_for, DistKind, Support, Transform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn density(d: DistKind, p: &[f64], x: f64) -> f64 {
    d.log_prob(p, x).unwrap().exp()
}

/// Midpoint rule on [a, b] with `n` cells.
fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    (0..n).map(|i| f(a + (i as f64 + 0.5) * h)).sum::<f64>() * h
}

#[test]
fn continuous_densities_integrate_to_one() {
    let cases: Vec<(DistKind, Vec<f64>, f64, f64)> = vec![
        (DistKind::Normal, vec![0.0, 1.0], -12.0, 12.0),
        (DistKind::Normal, vec![3.0, 0.2], 0.0, 6.0),
        (DistKind::Normal, vec![-5.0, 4.0], -60.0, 50.0),
        (DistKind::Exponential, vec![1.0], 0.0, 50.0),
        (DistKind::Exponential, vec![0.2], 0.0, 250.0),
        (DistKind::Exponential, vec![5.0], 0.0, 10.0),
        (DistKind::HalfNormal, vec![1.0], 0.0, 12.0),
        (DistKind::HalfNormal, vec![10.0], 0.0, 120.0),
        (DistKind::HalfNormal, vec![0.3], 0.0, 4.0),
        (DistKind::Gamma, vec![2.0, 1.0], 0.0, 60.0),
        (DistKind::Gamma, vec![5.0, 2.0], 0.0, 40.0),
        (DistKind::Gamma, vec![1.5, 0.5], 0.0, 120.0),
        (DistKind::Beta, vec![2.0, 3.0], 0.0, 1.0),
        (DistKind::Beta, vec![1.5, 1.5], 0.0, 1.0),
        (DistKind::Beta, vec![5.0, 2.0], 0.0, 1.0),
        (DistKind::StudentT, vec![3.0, 0.0, 1.0], -2000.0, 2000.0),
        (DistKind::StudentT, vec![10.0, 1.0, 2.0], -400.0, 400.0),
        (DistKind::StudentT, vec![30.0, -1.0, 0.5], -60.0, 60.0),
    ];
    for (d, p, a, b) in cases {
        let z = integrate(|x| density(d, &p, x), a, b, 2_000_000);
        assert!((0.999..=1.001).contains(&z), "{d:?}{p:?}: {z}");
    }
}

#[test]
fn discrete_masses_sum_to_one() {
    let cases: Vec<(DistKind, Vec<f64>, u32)> = vec![
        (DistKind::Bernoulli, vec![0.3], 1),
        (DistKind::BernoulliLogits, vec![-1.2], 1),
        (DistKind::Binomial, vec![10.0, 0.3], 10),
        (DistKind::BinomialLogits, vec![25.0, 0.7], 25),
        (DistKind::Poisson, vec![3.5], 60),
        (DistKind::Poisson, vec![0.1], 30),
        (DistKind::ZeroInflatedPoisson, vec![0.5, 1.0], 40),
        (DistKind::ZeroInflatedPoisson, vec![0.18, 2.7], 50),
        (DistKind::ZeroInflatedPoisson, vec![0.9, 12.0], 80),
    ];
    for (d, p, k) in cases {
        let s: f64 = (0..=k).map(|x| density(d, &p, x as f64)).sum();
        assert!((0.999..=1.0 + 1e-12).contains(&s), "{d:?}{p:?}: {s}");
    }
}

#[test]
fn draws_match_analytic_moments() {
    let e = 1.0 / (1.0 + (-0.8f64).exp());
    let cases: Vec<(DistKind, Vec<f64>, f64, f64)> = vec![
        (DistKind::Normal, vec![1.0, 2.0], 1.0, 4.0),
        (DistKind::Exponential, vec![2.0], 0.5, 0.25),
        (
            DistKind::HalfNormal,
            vec![1.5],
            1.5 * (2.0 / std::f64::consts::PI).sqrt(),
            2.25 * (1.0 - 2.0 / std::f64::consts::PI),
        ),
        (DistKind::Gamma, vec![3.0, 2.0], 1.5, 0.75),
        (DistKind::Beta, vec![2.0, 3.0], 0.4, 0.04),
        (DistKind::StudentT, vec![10.0, 0.5, 1.0], 0.5, 1.25),
        (DistKind::Bernoulli, vec![0.3], 0.3, 0.21),
        (DistKind::BernoulliLogits, vec![0.8], e, e * (1.0 - e)),
        (DistKind::Binomial, vec![10.0, 0.3], 3.0, 2.1),
        (DistKind::BinomialLogits, vec![6.0, 0.8], 6.0 * e, 6.0 * e * (1.0 - e)),
        (DistKind::Poisson, vec![3.5], 3.5, 3.5),
        (DistKind::ZeroInflatedPoisson, vec![0.3, 2.5], 1.75, 0.7 * 2.5 * (1.0 + 0.3 * 2.5)),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let n = 100_000;
    for (d, p, mean, var) in cases {
        let xs: Vec<f64> = (0..n).map(|_| d.draw(&p, &mut rng).unwrap()).collect();
        let m = xs.iter().sum::<f64>() / n as f64;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n as f64;
        let se_mean = (v / n as f64).sqrt();
        let se_var = ((m4 - v * v) / n as f64).sqrt();
        assert!((m - mean).abs() < 4.0 * se_mean, "{d:?} mean {m} vs {mean}");
        assert!((v - var).abs() < 4.0 * se_var, "{d:?} var {v} vs {var}");
        let support = d.support();
        assert!(xs.iter().all(|&x| match support {
            Support::Real => x.is_finite(),
            Support::Positive => x > 0.0,
            Support::UnitInterval => x > 0.0 && x < 1.0,
            _ => x >= 0.0 && x.fract() == 0.0,
        }));
    }
}

#[test]
fn exponential_mean_within_three_standard_errors() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 100_000;
    let m = (0..n).map(|_| DistKind::Exponential.draw(&[2.0], &mut rng).unwrap()).sum::<f64>() / n as f64;
    assert!((m - 0.5).abs() < 3.0 * 0.5 / (n as f64).sqrt());
}

#[test]
fn single_trial_binomial_logits_frequency() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 100_000;
    let k = (0..n).filter(|_| DistKind::BinomialLogits.draw(&[1.0, 0.0], &mut rng).unwrap() == 1.0).count();
    let f = k as f64 / n as f64;
    assert!((f - 0.5).abs() < 4.0 * (0.25 / n as f64).sqrt(), "{f}");
}

#[test]
fn jacobians_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for support in [Support::Real, Support::Positive, Support::UnitInterval] {
        let t = transform_for(support).unwrap();
        for _ in 0..20 {
            let u: f64 = rng.random_range(-4.0..4.0);
            let h = 1e-6;
            let slope = (t.forward(u + h) - t.forward(u - h)) / (2.0 * h);
            assert!((t.log_abs_det_jacobian(u) - slope.abs().ln()).abs() < 1e-5, "{t:?} at {u}");
            assert!((t.derivative(u) / slope - 1.0).abs() < 1e-6);
            let dl = (t.log_abs_det_jacobian(u + h) - t.log_abs_det_jacobian(u - h)) / (2.0 * h);
            assert!((t.d_log_abs_det_jacobian(u) - dl).abs() < 1e-6);
            let x = t.forward(u);
            assert!((t.inverse(x) - u).abs() < 1e-9 * u.abs().max(1.0));
        }
    }
    assert_eq!(transform_for(Support::Positive).unwrap(), Transform::Exp);
}

#[test]
fn partials_match_finite_differences() {
    let cases: Vec<(DistKind, Vec<f64>, f64, bool)> = vec![
        (DistKind::Normal, vec![0.3, 1.7], -0.4, true),
        (DistKind::Exponential, vec![1.3], 0.8, true),
        (DistKind::HalfNormal, vec![2.0], 1.1, true),
        (DistKind::Gamma, vec![2.5, 1.5], 1.2, true),
        (DistKind::Beta, vec![2.0, 3.5], 0.3, true),
        (DistKind::StudentT, vec![4.0, 0.5, 1.5], 2.0, true),
        (DistKind::Bernoulli, vec![0.3], 1.0, false),
        (DistKind::BernoulliLogits, vec![0.4], 0.0, false),
        (DistKind::Binomial, vec![10.0, 0.3], 4.0, false),
        (DistKind::BinomialLogits, vec![10.0, -0.6], 2.0, false),
        (DistKind::Poisson, vec![2.5], 3.0, false),
        (DistKind::ZeroInflatedPoisson, vec![0.3, 2.5], 0.0, false),
        (DistKind::ZeroInflatedPoisson, vec![0.3, 2.5], 2.0, false),
    ];
    let h = 1e-6;
    for (d, p, x, continuous) in cases {
        let mut dp = vec![0.0; p.len()];
        let (_, dx) = d.log_prob_grad(&p, x, &mut dp).unwrap();
        if continuous {
            let fd = (d.log_prob(&p, x + h).unwrap() - d.log_prob(&p, x - h).unwrap()) / (2.0 * h);
            assert!((dx - fd).abs() < 1e-5 * fd.abs().max(1.0), "{d:?} dx {dx} vs {fd}");
        }
        for k in 0..p.len() {
            // Trial counts are constants.
            if matches!(d, DistKind::Binomial | DistKind::BinomialLogits) && k == 0 {
                continue;
            }
            let (mut lo, mut hi) = (p.clone(), p.clone());
            lo[k] -= h;
            hi[k] += h;
            let fd = (d.log_prob(&hi, x).unwrap() - d.log_prob(&lo, x).unwrap()) / (2.0 * h);
            assert!((dp[k] - fd).abs() < 1e-5 * fd.abs().max(1.0), "{d:?} d/dp{k} {} vs {fd}", dp[k]);
        }
    }
}

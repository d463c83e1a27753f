mod common;

use common::{normal_cdf, normal_pdf, permutations, simpson, Fixture};
use proptest::prelude::*;
use smoothent::bounds::{chi2_bounded_constant, chi2_constant, BoundQuery};
use smoothent::distances::{
    assignment, chi2_mc, chi2_mutual_information, chi2_quad, convergence_experiment, fit_power_law, fit_rate, kl_mc,
    kl_quad, tv_mc, tv_quad, w1_empirical, w2sq_empirical, ConvergenceBudget, IntegrationMethod, Truth,
};
use smoothent::{DiscreteDistribution, DistanceKind, Error, GaussianMixture, SampleMatrix};

fn gauss(c: &[f64], sigma: f64) -> GaussianMixture {
    GaussianMixture::uniform(c.to_vec(), c.len(), sigma).unwrap()
}

fn cloud(rows: &[f64], d: usize) -> SampleMatrix {
    SampleMatrix::new(rows.to_vec(), d, 0).unwrap()
}

/// `int E_P[phi(z - S)^2] / q(z) dz - 1` by Simpson, with plain sums.
fn chi2_mi_oracle(atoms: &[f64], probs: &[f64], sigma: f64) -> f64 {
    let lo = atoms.iter().cloned().fold(f64::INFINITY, f64::min) - 12.0 * sigma;
    let hi = atoms.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 12.0 * sigma;
    simpson(
        |z| {
            let q: f64 = atoms.iter().zip(probs).map(|(a, p)| p * normal_pdf(z - a, sigma)).sum();
            let m2: f64 = atoms.iter().zip(probs).map(|(a, p)| p * normal_pdf(z - a, sigma).powi(2)).sum();
            if q > 0.0 {
                m2 / q
            } else {
                0.0
            }
        },
        lo,
        hi,
        20_000,
    ) - 1.0
}

#[test]
fn tv_identical_and_disjoint() {
    let a = gauss(&[0.0], 1.0);
    let r = tv_mc(&a, &a, 1000, 1).unwrap();
    assert_eq!(r.value, 0.0);
    let b = gauss(&[1e6], 1.0);
    let r = tv_mc(&a, &b, 1000, 1).unwrap();
    assert!((r.value - 1.0).abs() < 1e-6);
    assert!(matches!(tv_mc(&a, &b, 1, 1), Err(Error::InvalidArgument(_))));
}

#[test]
fn tv_between_unit_gaussians() {
    let want = 2.0 * normal_cdf(0.5) - 1.0;
    assert!((want - 0.382_924_922_548_026).abs() < 1e-12);
    let (a, b) = (gauss(&[0.0], 1.0), gauss(&[1.0], 1.0));
    let r = tv_mc(&a, &b, 200_000, 7).unwrap();
    assert!((r.value - want).abs() <= 3.0 * r.std_error, "{} vs {want}", r.value);
    assert!(r.value >= 0.0 && r.value <= 1.0);
    let q = tv_quad(&a, &b).unwrap();
    assert!((q.value - want).abs() < 1e-8);
}

#[test]
fn kl_closed_forms() {
    let a = gauss(&[0.0], 1.0);
    assert!(kl_mc(&a, &a, 1000, 1).unwrap().value.abs() < 1e-15);
    let b = gauss(&[1.0], 1.0);
    let r = kl_mc(&a, &b, 100_000, 2).unwrap();
    assert!((r.value - 0.5).abs() <= 3.0 * r.std_error, "{}", r.value);
    assert!((kl_quad(&a, &b).unwrap().value - 0.5).abs() < 1e-8);
    let (a2, b2) = (gauss(&[0.0, 0.0], 1.0), gauss(&[1.0, 1.0], 1.0));
    let r = kl_mc(&a2, &b2, 100_000, 3).unwrap();
    assert!((r.value - 1.0).abs() <= 3.0 * r.std_error, "{}", r.value);
}

#[test]
fn chi2_closed_form() {
    let (a, b) = (gauss(&[0.0], 1.0), gauss(&[0.3], 1.0));
    let want = 0.09f64.exp() - 1.0;
    let r = chi2_mc(&b, &a, 100_000, 4).unwrap();
    assert!((r.value - want).abs() <= 3.0 * r.std_error, "{} vs {want}", r.value);
    assert!(!r.heavy_tail);
    assert!((chi2_quad(&b, &a).unwrap().value - want).abs() < 1e-8);
    assert_eq!(chi2_mc(&a, &a, 1000, 1).unwrap().value, 0.0);
}

#[test]
fn chi2_far_apart_is_flagged() {
    let (a, b) = (gauss(&[0.0], 1.0), gauss(&[10.0], 1.0));
    let r = chi2_mc(&b, &a, 20_000, 5).unwrap();
    assert!(r.heavy_tail);
}

#[test]
fn chi2_mi_of_a_point_mass_is_zero() {
    let p = DiscreteDistribution::dirac(1).unwrap();
    let r = chi2_mutual_information(&p, 1.0, IntegrationMethod::Quadrature1d, 0, 0).unwrap();
    assert!(r.value.abs() < 1e-8);
}

#[test]
fn chi2_mi_two_atoms() {
    let p = DiscreteDistribution::uniform(vec![0.0, 0.3], 1).unwrap();
    let oracle = chi2_mi_oracle(&[0.0, 0.3], &[0.5, 0.5], 1.0);
    let q = chi2_mutual_information(&p, 1.0, IntegrationMethod::Quadrature1d, 0, 0).unwrap();
    assert!((q.value - oracle).abs() < 1e-8, "{} vs {oracle}", q.value);
    let bound = chi2_bounded_constant(&BoundQuery::new().diameter(0.3).sigma(1.0)).unwrap();
    assert!(q.value <= bound);
    let mc = chi2_mutual_information(&p, 1.0, IntegrationMethod::Mc, 200_000, 8).unwrap();
    assert!((mc.value - oracle).abs() <= 3.0 * mc.std_error, "{} vs {oracle}", mc.value);
    let p2 = DiscreteDistribution::uniform(vec![0.0, 0.0, 1.0, 1.0], 2).unwrap();
    assert!(chi2_mutual_information(&p2, 1.0, IntegrationMethod::Quadrature1d, 0, 0).is_err());
}

#[test]
fn chi2_mi_below_subgaussian_bound() {
    // grid approximation of a Gaussian truncated to [-0.4, 0.4]: bounded by
    // 0.4 and centered, hence 0.4-subgaussian
    let k = 41;
    let atoms: Vec<f64> = (0..k).map(|i| -0.4 + 0.8 * i as f64 / (k - 1) as f64).collect();
    let raw: Vec<f64> = atoms.iter().map(|a| normal_pdf(*a, 0.3)).collect();
    let total: f64 = raw.iter().sum();
    let probs: Vec<f64> = raw.iter().map(|x| x / total).collect();
    let p = DiscreteDistribution::new(atoms.clone(), 1, probs.clone()).unwrap();
    let v = chi2_mutual_information(&p, 1.0, IntegrationMethod::Quadrature1d, 0, 0).unwrap().value;
    assert!((v - chi2_mi_oracle(&atoms, &probs, 1.0)).abs() < 1e-7);
    let bound = chi2_constant(&BoundQuery::new().d(1).sigma(1.0).k_subg(0.4)).unwrap();
    assert!(v <= bound, "{v} > {bound}");
}

#[test]
fn ot_small_examples() {
    let a = cloud(&[0.3, -1.0, 2.0], 1);
    assert_eq!(w1_empirical(&a, &a, false).unwrap().value, 0.0);
    assert_eq!(w2sq_empirical(&a, &a, false).unwrap().value, 0.0);
    assert_eq!(w1_empirical(&cloud(&[0.0], 1), &cloud(&[3.0], 1), false).unwrap().value, 3.0);
    assert_eq!(w2sq_empirical(&cloud(&[0.0], 1), &cloud(&[3.0], 1), false).unwrap().value, 9.0);
    let w = w1_empirical(&cloud(&[0.0, 1.0], 1), &cloud(&[0.5, 2.0], 1), false).unwrap();
    assert!((w.value - 0.75).abs() < 1e-15);
    let w = w2sq_empirical(&cloud(&[0.0, 0.0, 1.0, 0.0], 2), &cloud(&[0.0, 1.0, 1.0, 1.0], 2), false).unwrap();
    assert!((w.value - 1.0).abs() < 1e-15);
}

#[test]
fn ot_size_guard() {
    let a = SampleMatrix::new(vec![0.0; 2 * 4097], 2, 0).unwrap();
    assert!(matches!(w1_empirical(&a, &a, false), Err(Error::Refused(_))));
    let b = SampleMatrix::new(vec![0.0; 2 * 3], 2, 0).unwrap();
    assert!(w1_empirical(&a, &b, true).is_err());
}

fn brute_force_ot(a: &[f64], b: &[f64], d: usize, squared: bool) -> f64 {
    let m = a.len() / d;
    let cost = |i: usize, j: usize| {
        let s: f64 = a[i * d..(i + 1) * d].iter().zip(&b[j * d..(j + 1) * d]).map(|(x, y)| (x - y) * (x - y)).sum();
        if squared {
            s
        } else {
            s.sqrt()
        }
    };
    permutations(m)
        .iter()
        .map(|p| p.iter().enumerate().map(|(i, &j)| cost(i, j)).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
        / m as f64
}

#[test]
fn rate_fit_examples() {
    let ns = [10.0, 100.0, 1000.0, 10_000.0];
    let vals: Vec<f64> = ns.iter().map(|n: &f64| 3.0 * n.powf(-0.5)).collect();
    let f = fit_power_law(&ns, &vals).unwrap();
    assert!((f.slope + 0.5).abs() < 1e-12);
    assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
    assert!((f.r_squared - 1.0).abs() < 1e-12);
    let f = fit_power_law(&ns, &[2.0; 4]).unwrap();
    assert!(f.slope.abs() < 1e-15);
    assert!(fit_rate(&[(0.0, 0.0), (1.0, 1.0)]).is_err());
}

#[test]
fn expected_chi2_is_mutual_information_over_n() {
    let p = DiscreteDistribution::uniform(vec![0.0, 0.3], 1).unwrap();
    let i_chi2 = chi2_mi_oracle(&[0.0, 0.3], &[0.5, 0.5], 1.0);
    let res = convergence_experiment(
        Truth::Discrete(&p),
        1.0,
        DistanceKind::Chi2,
        &[10, 100, 1000],
        100,
        &ConvergenceBudget::default(),
        12,
    )
    .unwrap();
    assert!((res.fit.slope + 1.0).abs() <= 0.15, "slope {}", res.fit.slope);
    for row in &res.rows {
        let scaled = row.mean * row.n as f64;
        assert!((scaled / i_chi2 - 1.0).abs() < 0.1, "n={} n*chi2={scaled} vs {i_chi2}", row.n);
    }
}

#[test]
fn tv_and_kl_experiment_slopes() {
    let p = DiscreteDistribution::uniform(vec![0.0, 0.3], 1).unwrap();
    let grid = [10, 100, 1000];
    let b = ConvergenceBudget::default();
    let tv = convergence_experiment(Truth::Discrete(&p), 1.0, DistanceKind::Tv, &grid, 50, &b, 3).unwrap();
    assert!((tv.fit.slope + 0.5).abs() <= 0.15, "tv slope {}", tv.fit.slope);
    let kl = convergence_experiment(Truth::Discrete(&p), 1.0, DistanceKind::Kl, &grid, 50, &b, 4).unwrap();
    assert!((kl.fit.slope + 1.0).abs() <= 0.2, "kl slope {}", kl.fit.slope);
}

#[test]
fn w2sq_experiment_decays() {
    let p = DiscreteDistribution::uniform(vec![-1.0, 1.0], 1).unwrap();
    let b = ConvergenceBudget { ot_points: 512, ..Default::default() };
    let r = convergence_experiment(Truth::Discrete(&p), 0.5, DistanceKind::W2sq, &[10, 100, 1000], 20, &b, 6).unwrap();
    // fixed-cloud OT bias flattens the curve; only the direction is checked
    assert!(r.fit.slope < -0.2, "slope {}", r.fit.slope);
}

#[test]
fn experiment_rejects_bad_grids() {
    let p = DiscreteDistribution::dirac(1).unwrap();
    let b = ConvergenceBudget::default();
    assert!(convergence_experiment(Truth::Discrete(&p), 1.0, DistanceKind::Tv, &[10, 100], 5, &b, 0).is_err());
    assert!(convergence_experiment(Truth::Discrete(&p), 1.0, DistanceKind::Tv, &[10, 10, 100], 5, &b, 0).is_err());
}

#[test]
fn experiment_is_deterministic() {
    let p = DiscreteDistribution::uniform(vec![0.0, 1.0], 1).unwrap();
    let b = ConvergenceBudget::default();
    let run = || convergence_experiment(Truth::Discrete(&p), 1.0, DistanceKind::Tv, &[5, 20, 80], 10, &b, 9).unwrap();
    assert_eq!(run(), run());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn assignment_matches_brute_force(m in 1usize..=6, seed in 0u64..10_000) {
        let mut fx = Fixture::new(seed);
        let a: Vec<f64> = (0..2 * m).map(|_| fx.range(-1.0, 1.0)).collect();
        let b: Vec<f64> = (0..2 * m).map(|_| fx.range(-1.0, 1.0)).collect();
        let got = w1_empirical(&cloud(&a, 2), &cloud(&b, 2), false).unwrap().value;
        prop_assert!((got - brute_force_ot(&a, &b, 2, false)).abs() < 1e-12);
        let got = w2sq_empirical(&cloud(&a, 2), &cloud(&b, 2), false).unwrap().value;
        prop_assert!((got - brute_force_ot(&a, &b, 2, true)).abs() < 1e-12);
        let a1: Vec<f64> = a[..m].to_vec();
        let b1: Vec<f64> = b[..m].to_vec();
        let got = w1_empirical(&cloud(&a1, 1), &cloud(&b1, 1), false).unwrap().value;
        prop_assert!((got - brute_force_ot(&a1, &b1, 1, false)).abs() < 1e-12);
    }

    #[test]
    fn assignment_is_a_permutation(m in 1usize..40, seed in 0u64..1000) {
        let mut fx = Fixture::new(seed);
        let cost: Vec<f64> = (0..m * m).map(|_| fx.uniform()).collect();
        let mut col = assignment(&cost, m);
        col.sort_unstable();
        prop_assert_eq!(col, (0..m).collect::<Vec<_>>());
    }

    #[test]
    fn w1_triangle_inequality(seed in 0u64..1000, m in 2usize..30) {
        let mut fx = Fixture::new(seed);
        let mut mk = || cloud(&(0..3 * m).map(|_| fx.range(-2.0, 2.0)).collect::<Vec<_>>(), 3);
        let (x, y, z) = (mk(), mk(), mk());
        let xy = w1_empirical(&x, &y, false).unwrap().value;
        let yz = w1_empirical(&y, &z, false).unwrap().value;
        let xz = w1_empirical(&x, &z, false).unwrap().value;
        prop_assert!(xz <= xy + yz + 1e-12);
    }

    #[test]
    fn tv_stays_in_unit_interval(c1 in -3.0f64..3.0, c2 in -3.0f64..3.0, s in 0.1f64..2.0, seed in 0u64..100) {
        let (a, b) = (gauss(&[c1], s), gauss(&[c2], s));
        let r = tv_mc(&a, &b, 500, seed).unwrap();
        prop_assert!(r.value >= 0.0 && r.value <= 1.0);
        let want = 2.0 * normal_cdf((c1 - c2).abs() / (2.0 * s)) - 1.0;
        prop_assert!((tv_quad(&a, &b).unwrap().value - want).abs() < 1e-7);
    }
}

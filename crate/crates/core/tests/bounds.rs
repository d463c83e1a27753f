mod common;

use common::{normal_cdf, ols_slope};
use proptest::prelude::*;
use smoothent::bounds::*;
use smoothent::Error;

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b.abs().max(1e-300)
}

fn q(d: usize, sigma: f64, k: f64) -> BoundQuery {
    BoundQuery::new().d(d).sigma(sigma).k_subg(k)
}

#[test]
fn w1_constant_examples() {
    let v = w1_constant(&q(1, 1.0, 0.0)).unwrap();
    assert!(close(v, 2f64.powf(-0.25) * 0.1875f64.exp(), 1e-14));
    assert!((v - 1.014).abs() < 5e-4);
    let v = w1_constant(&q(2, 1.0, 1.0)).unwrap();
    assert!((v - 8.482).abs() < 5e-3, "{v}");
}

#[test]
fn tv_constant_examples() {
    let v = tv_constant(&q(2, 1.0, 1.0)).unwrap();
    assert!((v - 2.484).abs() < 5e-3, "{v}");
    let one = tv_constant(&q(1, 1.0, 0.0)).unwrap();
    let forty = tv_constant(&q(40, 1.0, 0.0)).unwrap();
    assert!(close(forty, one.powi(40), 1e-12));
    assert!(matches!(tv_constant(&q(0, 1.0, 0.0)), Err(Error::Domain(_))));
}

#[test]
fn chi2_constant_examples() {
    assert_eq!(chi2_constant(&q(3, 1.0, 0.0)).unwrap(), 1.0);
    let v = chi2_constant(&q(1, 1.0, 0.25)).unwrap();
    assert!(close(v, 0.145_833_333_333_333_3f64.exp(), 1e-14));
    assert!((v - 1.157).abs() < 1e-3);
    match chi2_constant(&q(1, 1.0, 0.5)) {
        Err(Error::Domain(msg)) => assert!(msg.contains("sigma/2") || msg.contains("0.5"), "{msg}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn chi2_bounded_constant_examples() {
    let b = |dd: f64, s: f64| chi2_bounded_constant(&BoundQuery::new().diameter(dd).sigma(s)).unwrap();
    assert_eq!(b(0.0, 1.0), 1.0);
    assert!(close(b(0.7, 0.7), std::f64::consts::E, 1e-15));
    assert!(close(b(1.0, 0.5), 4f64.exp(), 1e-15));
}

#[test]
fn plugin_constants() {
    let v = plugin_risk_constant_bounded(&BoundQuery::new().d(1).sigma(1.0)).unwrap();
    assert!(close(v, 2.0 * 4.25f64.sqrt() * 2f64.exp(), 1e-14));
    assert!((v - 30.47).abs() < 0.01);
    for d in 1..6 {
        let big = plugin_risk_constant_bounded(&BoundQuery::new().d(d).sigma(1e4)).unwrap();
        let limit = ((d * (d + 2)) as f64).sqrt();
        assert!(close(big, limit, 1e-6), "d={d}: {big} vs {limit}");
    }
    let v = plugin_risk_constant_subg(&q(1, 1.0, 0.0)).unwrap();
    let want = (48.0 * std::f64::consts::FRAC_1_SQRT_2 * 0.375f64.exp()).sqrt();
    assert!(close(v, want, 1e-14));
    assert!((v - 7.03).abs() < 0.005);
}

#[test]
fn binary_entropy_values() {
    assert_eq!(binary_entropy(0.0), 0.0);
    assert_eq!(binary_entropy(1.0), 0.0);
    assert!(close(binary_entropy(0.5), std::f64::consts::LN_2, 1e-15));
    assert!((binary_entropy(0.01) - 0.056).abs() < 5e-4);
}

#[test]
fn q_function_values() {
    assert_eq!(q_function(0.0), 0.5);
    assert!((q_function(1.959_964) - 0.025).abs() < 1e-8);
    let x = q_inverse(5.0225e-4).unwrap();
    assert!((x - 3.289_263_317_65).abs() < 1e-9, "{x}");
    assert!(q_inverse(0.5).is_err());
    assert!(q_inverse(0.5 - 1e-12).unwrap() < 1e-10);
    assert!(q_inverse(0.0).is_err());
}

#[test]
fn k_star_values() {
    assert_eq!(k_star(10, 0.1, 0.01).unwrap(), 3);
    assert_eq!(k_star(20, 0.1, 0.01).unwrap(), 2);
    assert_eq!(k_star(1, 0.1, 0.5).unwrap(), 14);
    assert!(matches!(k_star(10, 0.1, 1.0), Err(Error::Domain(_))));
    assert!(matches!(k_star(10, 0.1, 1e-9), Err(Error::Domain(_))));
    // the quoted ranges: 3 up to d = 11, 2 from 12 on
    for d in 1..=11 {
        assert_eq!(k_star(d, 0.1, 0.01).unwrap(), 3, "d={d}");
    }
    for d in [12, 50, 500, 10_000] {
        assert_eq!(k_star(d, 0.1, 0.01).unwrap(), 2, "d={d}");
    }
}

#[test]
fn bias_lower_bound_values() {
    let v = bias_lower_bound(10, 0.1, 0.01, 1).unwrap();
    assert!((v - (9.9 * 3f64.ln() - binary_entropy(0.01))).abs() < 1e-12);
    assert!((v - 10.821).abs() < 1e-3);
    // n = k*^(d(1-eps)) leaves only -H_b(eps)
    let d = 4;
    let k = k_star(d, 0.1, 0.5).unwrap();
    let n = (k * k) as usize;
    let v = bias_lower_bound(d, 0.1, 0.5, n).unwrap();
    assert!((v + binary_entropy(0.5)).abs() < 1e-12, "{v}");
    // for d >= 12 the bound is informative only while n < 2^(0.99 d)
    let d = 20;
    let threshold = 2f64.powf(0.99 * d as f64) * (-binary_entropy(0.01)).exp();
    assert!(bias_lower_bound(d, 0.1, 0.01, threshold.floor() as usize).unwrap() > 0.0);
    assert!(bias_lower_bound(d, 0.1, 0.01, threshold.ceil() as usize + 1).unwrap() < 0.0);
}

#[test]
fn evaluate_by_name_and_missing_fields() {
    let full = BoundQuery::new().d(2).sigma(0.1).k_subg(0.02).diameter(1.0).n(10).eps(0.01).moment_m(1.0);
    for name in BOUND_NAMES {
        assert!(evaluate(name, &full).unwrap().is_finite(), "{name}");
    }
    assert!(evaluate("nope", &full).is_err());
    match evaluate("w1", &BoundQuery::new().d(1).sigma(1.0)) {
        Err(Error::InvalidArgument(msg)) => assert!(msg.contains("k_subg"), "{msg}"),
        other => panic!("{other:?}"),
    }
    assert_eq!(table(&full).len(), BOUND_NAMES.len());
}

#[test]
fn counterexample_construction() {
    let ce = build_counterexample(&CounterexampleSpec::default()).unwrap();
    assert_eq!(ce.atoms[0], 0.0);
    assert_eq!(ce.atoms[1], 1.0);
    assert!((ce.atoms[2] - 3.414_213_562_373_095).abs() < 1e-12);
    let p = ce.probs();
    assert!((p[1] - 0.439_391_289_467_722_4).abs() < 1e-14);
    assert!((p[1] - 2.0 * (0.25 / std::f64::consts::PI).sqrt() * (-0.25f64).exp()).abs() < 1e-15);
    assert!(p[0] > 0.0);
    assert!(p.iter().all(|&x| x >= 0.0));
    assert!(ce.atoms.windows(2).all(|w| w[1] - w[0] >= 1.0));
    // weights do not depend on where the support is cut
    let short = build_counterexample(&CounterexampleSpec { k_atoms: 3, ..Default::default() }).unwrap();
    assert_eq!(short.log_probs[..4], ce.log_probs[..4]);
}

#[test]
fn divergence_diagnostic_grows_like_log_k() {
    let sums = divergence_diagnostic(&CounterexampleSpec::default(), 50).unwrap();
    assert!(sums[0] > 0.0);
    assert!(sums.windows(2).all(|w| w[1] > w[0]));
    let ks: Vec<f64> = (10..=50).map(|k| (k as f64).ln()).collect();
    let slope = ols_slope(&ks, &sums[9..]);
    assert!(slope > 0.5, "slope {slope}");
}

#[test]
fn first_window_matches_direct_integration() {
    // at r_1 = 1 the window integrand is a plain ratio of sums; integrate it
    // by Simpson over the atoms that matter
    let ce = build_counterexample(&CounterexampleSpec { k_atoms: 12, ..Default::default() }).unwrap();
    let p = ce.probs();
    let phi = |x: f64, s: f64| (-0.5 * x * x / (s * s)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt());
    let f = |z: f64| {
        let num: f64 = ce.atoms.iter().zip(&p).map(|(a, w)| w * phi(z - a, std::f64::consts::FRAC_1_SQRT_2)).sum();
        let den: f64 = ce.atoms.iter().zip(&p).map(|(a, w)| w * phi(z - a, 1.0)).sum();
        num / den
    };
    let oracle = common::simpson(f, 0.99, 1.01, 200);
    let got = divergence_diagnostic(&CounterexampleSpec::default(), 1).unwrap()[0];
    assert!((got - oracle).abs() < 1e-10 * oracle, "{got} vs {oracle}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn constants_match_arithmetic(d in 1usize..12, sigma in 0.2f64..3.0, kf in 0.0f64..0.49) {
        let k = kf * sigma;
        let (df, r) = (d as f64, std::f64::consts::FRAC_1_SQRT_2 + k / sigma);
        let w1 = sigma * (2.0 * df).sqrt() * r.powf(df / 2.0 + 1.0) * (3.0 * df / 16.0).exp();
        prop_assert!(close(w1_constant(&q(d, sigma, k)).unwrap(), w1, 1e-10));
        let tv = r.powf(df / 2.0) * (3.0 * df / 16.0).exp();
        prop_assert!(close(tv_constant(&q(d, sigma, k)).unwrap(), tv, 1e-10));
        let (s2, k2) = (sigma * sigma, k * k);
        let chi = (2.0 * df * k2 / s2 * (s2 - 2.0 * k2) / (s2 - 4.0 * k2)).exp();
        prop_assert!(close(chi2_constant(&q(d, sigma, k)).unwrap(), chi, 1e-10));
        let bdd = 2.0 * ((s2 * df * (2.0 + df) * (2.0 + s2) + 8.0 * df * df) / (4.0 * s2 * s2)).sqrt() * (2.0 * df / s2).exp();
        prop_assert!(close(plugin_risk_constant_bounded(&BoundQuery::new().d(d).sigma(sigma)).unwrap(), bdd, 1e-10));
        let t = k + sigma * std::f64::consts::FRAC_1_SQRT_2;
        let lead = 64.0 * (2.0 * df * df * k2 * k2 + df * (df + 2.0) * t.powi(4)) / (s2 * s2);
        let subg = (lead * (r * 0.375f64.exp()).powf(df)).sqrt();
        prop_assert!(close(plugin_risk_constant_subg(&q(d, sigma, k)).unwrap(), subg, 1e-10));
    }

    #[test]
    fn constants_increase_with_k(d in 1usize..8, sigma in 0.2f64..3.0, a in 0.0f64..0.45, b in 0.0f64..0.45) {
        let (lo, hi) = if a < b { (a * sigma, b * sigma) } else { (b * sigma, a * sigma) };
        prop_assert!(w1_constant(&q(d, sigma, lo)).unwrap() <= w1_constant(&q(d, sigma, hi)).unwrap());
        prop_assert!(tv_constant(&q(d, sigma, lo)).unwrap() <= tv_constant(&q(d, sigma, hi)).unwrap());
        prop_assert!(chi2_constant(&q(d, sigma, lo)).unwrap() <= chi2_constant(&q(d, sigma, hi)).unwrap());
        prop_assert!(plugin_risk_constant_subg(&q(d, sigma, lo)).unwrap() <= plugin_risk_constant_subg(&q(d, sigma, hi)).unwrap());
        let bd = |dd| plugin_risk_constant_bounded(&BoundQuery::new().d(dd).sigma(sigma)).unwrap();
        prop_assert!(bd(d) < bd(d + 1));
    }

    #[test]
    fn q_inverse_round_trip(x in 0.0f64..8.0) {
        let y = 0.5 * libm::erfc(x / std::f64::consts::SQRT_2);
        prop_assert!((q_function(x) - y).abs() <= 1e-15 + 1e-13 * y);
        prop_assert!((1.0 - normal_cdf(x) - y).abs() < 1e-15);
        prop_assume!(x > 1e-6);
        prop_assert!((q_inverse(q_function(x)).unwrap() - x).abs() < 1e-9);
    }
}

mod common;

use common::{normal_pdf, simpson};
use smoothent::channel::{bpsk_modulate, channel_mi, rm_generate, sample_codewords, ChannelMode};
use smoothent::{Error, McBudget};

/// Every codeword of the code, by enumerating all messages.
fn codewords(r: usize, m: usize) -> Vec<u64> {
    let c = rm_generate(r, m).unwrap();
    (0..1u64 << c.k()).map(|msg| c.encode(msg)).collect()
}

/// `I(X; X + Z)` for equiprobable `X = +-1`, by Simpson.
fn bpsk_mi(sigma: f64) -> f64 {
    let f = |y: f64| {
        let p = 0.5 * (normal_pdf(y - 1.0, sigma) + normal_pdf(y + 1.0, sigma));
        let c = normal_pdf(y - 1.0, sigma);
        if c > 0.0 && p > 0.0 {
            c * (c / p).ln()
        } else {
            0.0
        }
    };
    simpson(f, 1.0 - 14.0 * sigma, 1.0 + 14.0 * sigma, 20_000)
}

#[test]
fn repetition_code() {
    let c = rm_generate(0, 3).unwrap();
    assert_eq!(c.k(), 1);
    assert_eq!(codewords(0, 3), vec![0, 0xFF]);
}

#[test]
fn first_order_weight_distribution() {
    let words = codewords(1, 3);
    assert_eq!(words.len(), 16);
    let mut sorted = words.clone();
    sorted.sort_unstable();
    sorted.dedup();
    assert_eq!(sorted.len(), 16);
    for w in words {
        let wt = w.count_ones();
        assert!(wt == 0 || wt == 4 || wt == 8, "weight {wt}");
        if wt == 8 {
            assert_eq!(w, 0xFF);
        }
    }
}

#[test]
fn code_sizes() {
    assert_eq!(rm_generate(4, 4).unwrap().k(), 16);
    assert_eq!(rm_generate(2, 4).unwrap().k(), 11);
    assert_eq!(rm_generate(3, 5).unwrap().k(), 26);
    assert!(matches!(rm_generate(4, 3), Err(Error::InvalidArgument(_))));
    for (r, m) in [(0, 0), (1, 2), (2, 4), (3, 5)] {
        let c = rm_generate(r, m).unwrap();
        assert_eq!(c.rank(), c.k());
        assert_eq!(c.length(), 1 << m);
    }
}

#[test]
fn codes_are_linear() {
    for (r, m) in [(1, 3), (2, 4)] {
        let words = codewords(r, m);
        let set: std::collections::HashSet<u64> = words.iter().copied().collect();
        for &a in words.iter().step_by(7) {
            for &b in &words {
                assert!(set.contains(&(a ^ b)));
            }
        }
    }
}

#[test]
fn bpsk_mapping() {
    let code = rm_generate(1, 3).unwrap();
    let book = bpsk_modulate(&code);
    assert_eq!(book.size(), 16);
    assert_eq!(book.point(0), vec![-1.0; 8]);
    let pts = book.points(false).unwrap();
    for row in pts.chunks(8) {
        assert!(row.iter().all(|&v| v == 1.0 || v == -1.0));
        assert_eq!(row.iter().map(|v| v * v).sum::<f64>(), 8.0);
    }
}

#[test]
fn codeword_sampling_is_seeded() {
    let book = bpsk_modulate(&rm_generate(2, 4).unwrap());
    let a = sample_codewords(&book, 50, 3).unwrap();
    let b = sample_codewords(&book, 50, 3).unwrap();
    assert_eq!(a.data(), b.data());
}

#[test]
fn noise_swamps_constellation() {
    let book = bpsk_modulate(&rm_generate(1, 3).unwrap());
    let r = channel_mi(&book, 50.0, 16, &McBudget::new(20_000), ChannelMode::Exact, false, 1).unwrap();
    assert!(r.value.abs() < 0.05, "{}", r.value);
}

#[test]
fn separated_codewords_give_log_codebook_size() {
    let book = bpsk_modulate(&rm_generate(1, 3).unwrap());
    let r = channel_mi(&book, 0.05, 16, &McBudget::new(2000), ChannelMode::Exact, false, 2).unwrap();
    assert!((r.value - 16f64.ln()).abs() < 0.05, "{}", r.value);
}

#[test]
fn full_hypercube_factorizes() {
    // RM(m, m) is every binary word, so the channel splits into 2^m BPSK uses
    for sigma in [0.5, 1.0, 2.0] {
        let book = bpsk_modulate(&rm_generate(3, 3).unwrap());
        let r = channel_mi(&book, sigma, 256, &McBudget::new(400), ChannelMode::Exact, false, 5).unwrap();
        let want = 8.0 * bpsk_mi(sigma);
        assert!((r.value - want).abs() <= 4.0 * r.std_error, "sigma {sigma}: {} vs {want} (se {})", r.value, r.std_error);
    }
}

#[test]
fn exhaustive_plugin_agrees_with_exact() {
    let book = bpsk_modulate(&rm_generate(1, 3).unwrap());
    for sigma in [0.5, 1.0, 2.0] {
        let a = channel_mi(&book, sigma, 16, &McBudget::new(5000), ChannelMode::PluginExhaustive, false, 7).unwrap();
        let b = channel_mi(&book, sigma, 16, &McBudget::new(5000), ChannelMode::Exact, false, 8).unwrap();
        let tol = 3.0 * (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
        assert!((a.value - b.value).abs() <= tol, "sigma {sigma}: {} vs {}", a.value, b.value);
    }
}

#[test]
fn mi_is_within_capacity() {
    let book = bpsk_modulate(&rm_generate(2, 4).unwrap());
    for sigma in [0.3, 1.0, 3.0] {
        let r = channel_mi(&book, sigma, 300, &McBudget::new(50), ChannelMode::Plugin, false, 3).unwrap();
        assert!(r.value >= -3.0 * r.std_error);
        assert!(r.value <= 11.0 * std::f64::consts::LN_2 + 3.0 * r.std_error);
    }
}

#[test]
fn large_exact_codebooks_need_force() {
    let book = bpsk_modulate(&rm_generate(3, 5).unwrap());
    let r = channel_mi(&book, 1.0, 10, &McBudget::new(1), ChannelMode::Exact, false, 0);
    assert!(matches!(r, Err(Error::Refused(_))));
    let small = bpsk_modulate(&rm_generate(1, 3).unwrap());
    assert!(channel_mi(&small, 1.0, 17, &McBudget::new(1), ChannelMode::Plugin, false, 0).is_err());
}

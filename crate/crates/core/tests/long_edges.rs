use chemdist::geometry::Window;
use chemdist::long_edges::{
    bracket_integral, detect_long_edge, estimate_p_long_edge, estimate_p_long_edge_with, kernel_zeta,
    write_long_edge_csv, zeta, LongEdgeMethod, Zeta,
};
use chemdist::models::{ConnectionKernel, ModelSpec, Pad};
use chemdist::rng::CounterRng;
use chemdist::stats::fit_exponent;
use proptest::prelude::*;

fn in_region(delta: f64, gamma: f64, gamma_prime: f64) -> bool {
    delta > 2.0 && gamma < 1.0 - 1.0 / delta && gamma_prime < 1.0 - gamma
}

proptest! {
    #[test]
    fn zeta_negative_exactly_in_region(delta in 1.0001f64..12.0, gamma in 0.0f64..0.999, t in 0.0f64..1.0) {
        let gamma_prime = t * (2.0 - gamma) * 0.999;
        let margin = 1e-6;
        prop_assume!((delta - 2.0).abs() > margin);
        prop_assume!((gamma - (1.0 - 1.0 / delta)).abs() > margin);
        prop_assume!((gamma_prime - (1.0 - gamma)).abs() > margin);
        let z = zeta(delta, gamma, gamma_prime).unwrap();
        prop_assert_eq!(z.is_negative(), in_region(delta, gamma, gamma_prime), "{:?}", z);
    }

    #[test]
    fn long_edge_event_monotone(seed in 0u64..1000, n1 in 0.5f64..6.0, dn in 0.0f64..4.0) {
        let g = ModelSpec::soft_boolean(2, 0.4, 2.5, 24.0).with_pad(Pad::Fixed(0.0)).realize(seed).unwrap();
        let a = detect_long_edge(&g, 20.0, n1).unwrap();
        let b = detect_long_edge(&g, 20.0, n1 + dn).unwrap();
        prop_assert!(a.present || !b.present);
        let small = detect_long_edge(&g, 12.0, n1).unwrap();
        prop_assert!(a.present || !small.present);
        prop_assert!(small.longest <= a.longest);
    }
}

#[test]
fn boolean_zeta_on_indicator_kernel() {
    let k = ConnectionKernel::new(0.5, 0.0, f64::INFINITY).unwrap();
    assert_eq!(kernel_zeta(&k).unwrap(), Zeta::Value(-1.0));
}

#[test]
fn bracket_slope_polynomial_kernel() {
    let k = ConnectionKernel::new(0.5, 0.0, 3.0).unwrap();
    let pts: Vec<(f64, f64)> = (2..=5)
        .map(|e| {
            let r = 10f64.powi(e);
            (r, bracket_integral(&k, r, 2).unwrap())
        })
        .collect();
    let fit = fit_exponent(&pts).unwrap();
    assert!((fit.slope + 2.0 / 3.0).abs() < 0.05, "slope {}", fit.slope);
}

#[test]
fn bracket_indicator_hand_integration() {
    // γ = 1/2, γ' = 0: the kernel needs min mark <= r^{-4}, which is the
    // lower limit itself, so the integral vanishes
    let b = ConnectionKernel::new(0.5, 0.0, f64::INFINITY).unwrap();
    for r in [1e2, 1e3, 1e4] {
        assert!(bracket_integral(&b, r, 2).unwrap().abs() < 1e-12);
    }
    // γ = 1/2, γ' = 0.3, d = 2: ζ = -0.4, ℓ = r^{-2.8}. With a = r^{-2.5},
    // b = r^{-2}, the region {u^{1/2} v^{0.3} r^2 <= 1} splits at v = a:
    // I/2 = (a-ℓ)^2/2 + r^{-4}(b^{0.4} - a^{0.4})/0.4 - ℓ(b - a).
    let k = ConnectionKernel::new(0.5, 0.3, f64::INFINITY).unwrap();
    for r in [1e2f64, 1e3, 1e4, 1e5] {
        let (l, a, bb) = (r.powf(-2.8), r.powf(-2.5), r.powf(-2.0));
        let half = (a - l).powi(2) / 2.0 + r.powi(-4) * (bb.powf(0.4) - a.powf(0.4)) / 0.4 - l * (bb - a);
        let want = r.powi(4) * 2.0 * half;
        let got = bracket_integral(&k, r, 2).unwrap();
        assert!((got - want).abs() < 1e-4 * want, "r={r}: {got} vs {want}");
    }
}

#[test]
fn bracket_scaled_value_settles() {
    // B(r) r^{-dζ} converges; successive changes shrink and stay small
    for (delta, g, gp) in [(3.0, 0.5, 0.0), (4.0, 0.3, 0.2)] {
        let k = ConnectionKernel::new(g, gp, delta).unwrap();
        let z = kernel_zeta(&k).unwrap().value().unwrap();
        let s: Vec<f64> = (2..=6)
            .map(|e| {
                let r = 10f64.powi(e);
                bracket_integral(&k, r, 2).unwrap() * r.powf(-2.0 * z)
            })
            .collect();
        let steps: Vec<f64> = s.windows(2).map(|w| (w[1] - w[0]).abs() / w[1]).collect();
        for w in steps.windows(2) {
            assert!(w[1] <= w[0] + 1e-6, "{s:?}");
        }
        assert!(steps[0] < 0.1, "{s:?}");
    }
}

#[test]
fn bracket_rejects_bad_input() {
    let k = ConnectionKernel::new(0.5, 0.0, 3.0).unwrap();
    assert!(bracket_integral(&k, 1.0, 2).is_err());
    let undefined = ConnectionKernel::new(0.0, 1.2, 3.0).unwrap();
    assert!(bracket_integral(&undefined, 10.0, 2).is_err());
}

#[test]
fn edgefree_and_gilbert_estimates_vanish() {
    let none = ModelSpec::soft_boolean(2, 0.3, 3.0, 10.0).with_amplitude(0.0).with_pad(Pad::Fixed(0.0));
    let e = estimate_p_long_edge(&none, 10.0, 1.0, 200, 1).unwrap();
    assert_eq!(e.proportion.successes, 0);
    assert!(e.upper_bound() > 0.0 && e.upper_bound() < 0.02);
    let g = ModelSpec::gilbert(2, 10.0).with_pad(Pad::Fixed(0.0));
    let e = estimate_p_long_edge(&g, 10.0, 1.5, 200, 1).unwrap();
    assert_eq!(e.proportion.estimate, 0.0);
    assert!(estimate_p_long_edge(&g, 10.0, 1.5, 0, 1).is_err());
}

#[test]
fn lazy_sampler_matches_full_graphs() {
    let spec = ModelSpec::boolean(2, 0.5, 8.0).with_pad(Pad::Fixed(0.0));
    for n in [3.0, 6.0] {
        let lazy = estimate_p_long_edge_with(&spec, 8.0, n, 20_000, 5, LongEdgeMethod::Lazy).unwrap();
        let full = estimate_p_long_edge_with(&spec, 8.0, n, 20_000, 6, LongEdgeMethod::Generic).unwrap();
        let (a, b) = (lazy.proportion, full.proportion);
        let z = (a.estimate - b.estimate) / (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
        assert!(z.abs() < 4.0, "n={n}: lazy {} vs full {}", a.estimate, b.estimate);
        assert!(a.successes > 50);
    }
    // partial amplitude goes through the same coin
    let soft = ModelSpec::wdrcm(2, 0.4, 0.2, f64::INFINITY, 8.0)
        .with_amplitude(0.5)
        .with_pad(Pad::Fixed(0.0));
    let lazy = estimate_p_long_edge_with(&soft, 8.0, 4.0, 20_000, 7, LongEdgeMethod::Lazy).unwrap();
    let full = estimate_p_long_edge_with(&soft, 8.0, 4.0, 20_000, 8, LongEdgeMethod::Generic).unwrap();
    let (a, b) = (lazy.proportion, full.proportion);
    let z = (a.estimate - b.estimate) / (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
    assert!(z.abs() < 4.0, "lazy {} vs full {}", a.estimate, b.estimate);
}

#[test]
fn estimates_are_reproducible_and_written() {
    let spec = ModelSpec::boolean(2, 0.5, 16.0).with_pad(Pad::Fixed(0.0));
    let a = estimate_p_long_edge(&spec, 16.0, 16.0, 5000, 3).unwrap();
    let b = estimate_p_long_edge(&spec, 16.0, 16.0, 5000, 3).unwrap();
    assert_eq!(a, b);
    let mut buf = Vec::new();
    write_long_edge_csv(&[a], &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("m,n,replicates,successes,estimate,ci_lo,ci_hi,seed\n"));
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn noisy_synthetic_slope_recovered() {
    let mut rng = CounterRng::new(99);
    let pts: Vec<(f64, f64)> = (0..12)
        .map(|i| {
            let m = 4.0 * 1.5f64.powi(i);
            // multiplicative noise of about 5%
            let noise = 1.0 + 0.1 * (rng.unit() - 0.5);
            (m, 3.0 * m.powf(-1.5) * noise)
        })
        .collect();
    let f = fit_exponent(&pts).unwrap();
    assert!((f.slope + 1.5).abs() < 2.0 * f.stderr.max(1e-3), "{} ± {}", f.slope, f.stderr);
}

#[test]
fn window_too_small_for_box() {
    let spec = ModelSpec::boolean(2, 0.5, 16.0);
    assert!(estimate_p_long_edge(&spec, 32.0, 4.0, 100, 1).is_err());
    let w = Window::new(2, 4.0, 0.0).unwrap();
    let g = spec.realize_in(&w, 1).unwrap();
    assert!(detect_long_edge(&g, 8.0, 1.0).is_err());
}

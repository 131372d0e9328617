use std::f64::consts::PI;

use twoband::correlations::{
    empirical_four_point, empirical_two_point, golden_rule_rates, kernel_h, memory_integral, transition_integral, two_point_single,
    Kernel, KernelIntegrals, KernelKind, MemoryIntegral, Transition,
};
use twoband::model::{build_model, ModelParams};
use twoband::{Error, C64};

const DE: f64 = 0.5;

fn params(n1: usize, n2: usize, lambda: f64) -> ModelParams {
    ModelParams::new(n1, n2, DE, lambda).unwrap()
}

#[test]
fn two_point_matches_continuum_kernel() {
    let (n, m) = (200, 100);
    let p = params(n, n, 5e-4);
    let rates = golden_rule_rates(&p);
    let kernel = Kernel::new(KernelKind::Sinc2, DE).unwrap();
    let taus: Vec<f64> = (0..=40).map(|k| k as f64 * 0.25 / DE).collect();
    let seeds: Vec<u64> = (1..=m).collect();
    let f2 = empirical_two_point(&p, &seeds, &taus).unwrap();
    let scale = rates.gamma2 * kernel.h(0.0);
    let tol = 5.0 * scale / ((m * n as u64) as f64).sqrt();
    for (tau, v) in taus.iter().zip(&f2) {
        let oracle = rates.gamma2 * kernel.h(*tau);
        assert!((v - oracle).norm() <= tol, "tau {tau}: {v} vs {oracle}");
    }

    // per-seed spread at tau = 0, where f2 = lambda^2 N2 <|c|^2>
    let lambda2n = p.coupling * p.coupling * n as f64;
    assert!((scale - lambda2n).abs() < 1e-15);
    let per: Vec<f64> = seeds.iter().map(|&s| two_point_single(&build_model(p, s).unwrap(), 0.0).re).collect();
    let mean = per.iter().sum::<f64>() / m as f64;
    let sd = (per.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64).sqrt();
    assert!((mean - lambda2n).abs() <= 3.0 * sd / (m as f64).sqrt());
    assert!((mean - f2[0].re).abs() < 1e-15 * lambda2n * 100.0);
}

#[test]
fn two_point_is_hermitian_and_vanishes_without_coupling() {
    let m = build_model(params(30, 40, 0.01), 9).unwrap();
    for tau in [0.3, 2.0, 17.0, 140.0] {
        let (a, b) = (two_point_single(&m, tau), two_point_single(&m, -tau));
        assert!((a - b.conj()).norm() < 1e-12);
    }
    let zero = empirical_two_point(&params(5, 5, 0.0), &[1], &[0.0, 1.0, 3.0]).unwrap();
    assert!(zero.iter().all(|z| *z == C64::new(0.0, 0.0)));
    assert!(matches!(empirical_two_point(&params(5, 5, 0.1), &[], &[0.0]), Err(Error::Config(_))));
}

/// Separations of `2 pi k / de` with `k` coprime to both band sizes make all
/// off-peak pair contractions vanish exactly, so the Wick oracle is the
/// coincident contraction alone.
fn sep(k: f64) -> f64 {
    2.0 * PI * k / DE
}

#[test]
fn four_point_two_peak_structure() {
    let (n1, n2) = (32, 64);
    let lambda = 0.05;
    let p = params(n1, n2, lambda);
    let seeds: Vec<u64> = (1..=16).collect();
    let l4 = lambda.powi(4);
    let peak1 = empirical_four_point(&p, &seeds, [0.0, 0.0, sep(5.0), sep(5.0)]).unwrap();
    let peak2 = empirical_four_point(&p, &seeds, [sep(5.0), 0.0, 0.0, sep(5.0)]).unwrap();
    let oracle1 = l4 * (n2 * n2) as f64;
    let oracle2 = l4 * (n1 * n2) as f64;
    assert!((peak1 - oracle1).norm() <= 0.1 * oracle1, "peak 1 {peak1} vs {oracle1}");
    assert!((peak2 - oracle2).norm() <= 0.1 * oracle2, "peak 2 {peak2} vs {oracle2}");
    let ratio = peak2.re / peak1.re;
    let expected = n1 as f64 / n2 as f64;
    assert!((ratio - expected).abs() <= 0.1 * expected, "ratio {ratio}");

    let far = empirical_four_point(&p, &seeds, [0.0, sep(3.0), sep(7.0), sep(12.0)]).unwrap();
    assert!(far.norm() <= 0.05 * oracle1, "separated value {far}");
}

#[test]
fn four_point_rejects_large_bands() {
    assert!(matches!(empirical_four_point(&params(65, 4, 0.1), &[1], [0.0; 4]), Err(Error::Config(_))));
}

#[test]
fn transition_slope_is_golden_rule() {
    // coprime band sizes keep every transition frequency nonzero
    let (n1, n2) = (63, 64);
    let p = params(n1, n2, 0.01);
    let rates = golden_rule_rates(&p);
    let (t1, t2) = (50.0 / DE, 100.0 / DE);
    let seeds = 1..=8u64;
    for (tr, nb_gamma) in [
        (Transition::new(1, 0, 0, 1).unwrap(), n2 as f64 * rates.gamma1),
        (Transition::new(0, 1, 1, 0).unwrap(), n1 as f64 * rates.gamma2),
    ] {
        let slope: f64 = seeds
            .clone()
            .map(|s| (transition_integral(&p, s, tr, t2).unwrap() - transition_integral(&p, s, tr, t1).unwrap()) / (t2 - t1))
            .sum::<f64>()
            / 8.0;
        assert!((slope / nb_gamma - 1.0).abs() <= 0.1, "{tr:?}: slope {slope} vs {nb_gamma}");
    }
    let tr = Transition::new(1, 0, 0, 1).unwrap();
    assert_eq!(transition_integral(&p, 1, tr, 0.0).unwrap(), 0.0);
    let same = Transition::new(1, 1, 0, 1).unwrap();
    assert_eq!(transition_integral(&p, 1, same, 30.0).unwrap(), 0.0);
    assert!(matches!(transition_integral(&p, 1, tr, -1.0), Err(Error::Domain(_))));
    assert!(Transition::new(2, 0, 0, 1).is_err());
}

#[test]
fn kernel_values_and_zeros() {
    let sinc = Kernel::new(KernelKind::Sinc2, DE).unwrap();
    let expo = Kernel::new(KernelKind::Exponential, DE).unwrap();
    assert!((kernel_h(&sinc, 0.0) - 0.0795775).abs() < 1e-7);
    assert_eq!(kernel_h(&expo, 0.0), 0.25);
    for k in 1..=5 {
        assert!(kernel_h(&sinc, sep(k as f64)) < 1e-30);
    }
    for tau in [0.1, 3.0, 40.0] {
        assert_eq!(sinc.h(tau), sinc.h(-tau));
        assert_eq!(expo.h(tau), expo.h(-tau));
        assert!(sinc.h(tau) >= 0.0);
    }
    assert!(Kernel::new(KernelKind::Sinc2, 0.0).is_err());
}

#[test]
fn kernels_integrate_to_one_half() {
    let expo = KernelIntegrals::new(Kernel::new(KernelKind::Exponential, DE).unwrap(), 400.0 / DE);
    assert!((expo.integral(200.0 / DE) - 0.5).abs() < 1e-6);
    assert!((expo.integral(40.0 / DE) - 0.5).abs() < 1e-6);
    for t in [0.3, 2.0, 9.0] {
        let closed = 0.5 * (1.0 - (-DE * t).exp());
        assert!((expo.integral(t) - closed).abs() < 1e-14);
    }

    // sinc^2 tail: 1/2 - I(T) = 1/(2 pi x) + O(1/x^2), x = de T / 2
    let sinc = KernelIntegrals::new(Kernel::new(KernelKind::Sinc2, DE).unwrap(), 4000.0 / DE);
    for x in [100.0, 500.0, 2000.0] {
        let deficit = 0.5 - sinc.integral(2.0 * x / DE);
        assert!((deficit - 1.0 / (2.0 * PI * x)).abs() <= 1.0 / (2.0 * PI * x * x), "x = {x}");
    }
    let x: f64 = 2000.0;
    let corrected = sinc.integral(2.0 * x / DE) + 1.0 / (2.0 * PI * x);
    assert!((corrected - 0.5).abs() < 1e-6);
}

#[test]
fn memory_integral_closed_form_and_slope() {
    let rates = golden_rule_rates(&params(500, 500, 5e-4));
    let sum = rates.total();
    let expo = Kernel::new(KernelKind::Exponential, DE).unwrap();
    assert_eq!(memory_integral(&expo, &rates, 0.0).unwrap(), 0.0);
    let mi = MemoryIntegral::new(expo, &rates, 2000.0);
    for t in [0.01, 0.5, 3.0, 17.0, 250.0, 1600.0] {
        let closed = sum * (t - (1.0 - (-DE * t).exp()) / DE);
        let g = mi.gamma(t).unwrap();
        assert!(((g - closed) / closed).abs() < 1e-8, "t {t}: {g} vs {closed}");
    }
    assert!(matches!(mi.gamma(-1.0), Err(Error::Domain(_))));

    let sinc = MemoryIntegral::new(Kernel::new(KernelKind::Sinc2, DE).unwrap(), &rates, 200.0 / DE);
    let t = 100.0 / DE;
    assert!((sinc.rate_factor(t) - 1.0).abs() < 0.01);
    let h = 1e-3 / DE;
    let slope = (sinc.gamma(t + h).unwrap() - sinc.gamma(t - h).unwrap()) / (2.0 * h);
    assert!((slope / sum - 1.0).abs() < 0.01);
}

#[test]
fn golden_rule_values() {
    let r = golden_rule_rates(&params(500, 500, 5e-4));
    assert!((r.gamma2 - 1.5708e-3).abs() < 1e-7);
    assert!((r.gamma2 / DE - 3.1e-3).abs() < 1e-4);
    assert_eq!(r.gamma1, r.gamma2);
    let asym = golden_rule_rates(&params(100, 300, 1e-3));
    assert!((asym.gamma1 - 2.0 * PI * 1e-6 * 100.0 / DE).abs() < 1e-18);
    assert!((asym.gamma2 / asym.gamma1 - 3.0).abs() < 1e-12);
}

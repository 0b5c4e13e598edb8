//! Randomized checks of the time-frequency transforms and the filter bank.

use proptest::prelude::*;
use scatterkit::filterbank::{build_bank, raw_morlet, zero_mean_correct, BankConfig};
use scatterkit::timefreq::{
    cwt, gaussian_reference_product, measure_spread, windowed_fourier, UNCERTAINTY_SLACK,
};
use scatterkit::{dft_forward, synth, Complex64, Signal};

fn real_signal(n: usize) -> impl Strategy<Value = Signal> {
    prop::collection::vec(-1.0f64..1.0, n).prop_map(|v| Signal::from_real_1d(&v).unwrap())
}

fn complex_signal(n: usize) -> impl Strategy<Value = Signal> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n).prop_map(|v| {
        Signal::from_complex_1d(v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect()).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn full_rectangular_window_frame_zero_is_dft(x in (1usize..200).prop_flat_map(complex_signal)) {
        let w = Signal::from_real_1d(&vec![1.0; x.len()]).unwrap();
        let map = windowed_fourier(&x, &w, 1).unwrap();
        let spectrum = dft_forward(&x);
        prop_assert_eq!(map.frame(0), spectrum.values());
    }

    #[test]
    fn cwt_is_linear(
        (x, y) in (16usize..128).prop_flat_map(|n| (real_signal(n), real_signal(n))),
        a in -2.0f64..2.0,
        b in -2.0f64..2.0,
    ) {
        let n = x.len();
        let mother = zero_mean_correct(&raw_morlet(&BankConfig::new_1d(3, n), 1.0, 0.0).unwrap());
        let scales = [1.0, 1.5, 2.0, 4.0];
        let mix = x.scale(a).add(&y.scale(b)).unwrap();
        let m = cwt(&mix, &mother, &scales, 1.0).unwrap();
        let mx = cwt(&x, &mother, &scales, 1.0).unwrap();
        let my = cwt(&y, &mother, &scales, 1.0).unwrap();
        for r in 0..scales.len() {
            for ((u, v), w) in m.row(r).iter().zip(mx.row(r)).zip(my.row(r)) {
                prop_assert!((u - (v * a + w * b)).norm() <= 1e-10);
            }
        }
    }

    #[test]
    fn spread_ignores_circular_shifts(x in (8usize..256).prop_flat_map(complex_signal), shift in 0isize..300) {
        let base = measure_spread(&x).unwrap().product;
        let moved = measure_spread(&x.circular_shift(&[shift]).unwrap()).unwrap().product;
        prop_assert!((moved - base).abs() <= 1e-8 * base, "{moved} vs {base}");
    }

    #[test]
    fn spread_family_respects_the_gaussian_bound(seed in any::<u64>()) {
        let floor = gaussian_reference_product() * (1.0 - UNCERTAINTY_SLACK);
        for s in synth::spread_family(512, 8, &mut synth::rng(seed)) {
            let p = measure_spread(&s).unwrap().product;
            prop_assert!(p >= floor, "{p} below {floor}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn banks_are_framed_and_reproducible(j in 1usize..=4, k in 1usize..=8, log_n in 4u32..=6) {
        let n = 1usize << log_n;
        prop_assume!(1usize << j < n);
        let cfg = BankConfig::new_2d(j, n, n).with_k(k);
        let a = build_bank(&cfg).unwrap();
        let (lo, hi) = a.frame_bounds();
        prop_assert!(lo > 0.0 && hi <= 1.0 + 1e-6, "{lo} {hi}");
        prop_assert_eq!(&a, &build_bank(&cfg).unwrap());
    }

    #[test]
    fn l1_norm_is_flat_across_resolved_scales(j in 3usize..=4, k in 1usize..=4) {
        let bank = build_bank(&BankConfig::new_2d(j, 64, 64).with_k(k)).unwrap();
        let norm = |s: usize| bank.psi(s, 1).map(|p| scatterkit::dft_inverse(p).norm_l1()).unwrap();
        let base = norm(1);
        for s in 2..j {
            prop_assert!((norm(s) / base - 1.0).abs() <= 0.02, "scale {s}: {} vs {base}", norm(s));
        }
    }
}

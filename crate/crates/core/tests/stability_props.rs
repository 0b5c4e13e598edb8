use proptest::prelude::*;
use scatterkit::filterbank::{build_bank, BankConfig};
use scatterkit::stability::{diffeo_norm, lipschitz_ratio, translate, warp, Deformation, FeatureMap};
use scatterkit::{synth, Complex64, Shape, Signal};

fn image(n: usize) -> impl Strategy<Value = Signal> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n * n).prop_map(move |v| {
        let vals = v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect();
        Signal::new(Shape::D2(n, n), vals).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn zero_field_is_identity(x in (1usize..24).prop_flat_map(image)) {
        let g = Deformation::zero(x.shape());
        let w = warp(&x, &g).unwrap();
        prop_assert_eq!(w.values(), x.values());
    }

    #[test]
    fn integer_translation_warp_is_a_shift(x in image(12), dy in -20i32..20, dx in -20i32..20) {
        let g = Deformation::translation(x.shape(), &[dy as f64, dx as f64]).unwrap();
        let expected = translate(&x, &[dy as isize, dx as isize]).unwrap();
        let w = warp(&x, &g).unwrap();
        prop_assert_eq!(w.values(), expected.values());
    }

    #[test]
    fn translate_preserves_energy(x in image(12), dy in -30isize..30, dx in -30isize..30) {
        let y = translate(&x, &[dy, dx]).unwrap();
        let mut a: Vec<f64> = x.values().iter().map(|v| v.norm_sqr()).collect();
        let mut b: Vec<f64> = y.values().iter().map(|v| v.norm_sqr()).collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn diffeo_norm_is_homogeneous(seed in any::<u64>(), grad in 0.001f64..0.2, t in 0.0f64..4.0, j in 0usize..5) {
        let g = Deformation::random_smooth(Shape::D2(16, 16), grad, 3.0, &mut synth::rng(seed)).unwrap();
        prop_assume!(t * grad < 0.9);
        let gt = g.scaled(t).unwrap();
        let (a, b) = (diffeo_norm(&gt, j), t * diffeo_norm(&g, j));
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b), "{a} vs {b}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn small_warps_nearly_preserve_smooth_norms(seed in any::<u64>(), grad in 0.001f64..0.02) {
        let x = synth::smooth_image(32, &mut synth::rng(seed));
        let g = Deformation::random_smooth(x.shape(), grad, 4.0, &mut synth::rng(seed ^ 0x5eed)).unwrap();
        let ratio = warp(&x, &g).unwrap().norm_l2() / x.norm_l2();
        prop_assert!((ratio - 1.0).abs() <= 0.05, "{ratio}");
    }

    #[test]
    fn raw_pixels_beat_scattering_in_instability_on_noise(seed in any::<u64>(), horizontal in any::<bool>()) {
        let bank = build_bank(&BankConfig::new_2d(4, 32, 32)).unwrap();
        let x = synth::white_noise(Shape::D2(32, 32), &mut synth::rng(seed));
        let v = if horizontal { [0.0, 1.0] } else { [1.0, 0.0] };
        let g = Deformation::translation(x.shape(), &v).unwrap();
        let raw = lipschitz_ratio(FeatureMap::Raw, &x, &g, &bank).unwrap().ratio;
        let sc = lipschitz_ratio(FeatureMap::ScatterM2, &x, &g, &bank).unwrap().ratio;
        prop_assert!(raw > sc, "{raw} vs {sc}");
    }
}

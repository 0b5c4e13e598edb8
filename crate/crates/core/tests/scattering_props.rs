use proptest::prelude::*;
use scatterkit::filterbank::{build_bank, BankConfig, FilterBank};
use scatterkit::scattering::{first_order_map, scatter, ScatterConfig, ScatteringCoefficients};
use scatterkit::{synth, Shape, Signal};

const N: usize = 16;

fn bank(j: usize) -> FilterBank {
    build_bank(&BankConfig::new_2d(j, N, N).with_k(4)).unwrap()
}

fn image() -> impl Strategy<Value = Signal> {
    prop::collection::vec(-1.0f64..1.0, N * N).prop_map(|v| Signal::from_real(Shape::D2(N, N), &v).unwrap())
}

fn run(x: &Signal, b: &FilterBank, m: usize) -> ScatteringCoefficients {
    scatter(x, &ScatterConfig::new(b.config().clone()).with_max_order(m), b).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn non_expansive(x in image(), y in image(), j in 1usize..=3) {
        let b = bank(j);
        let (sx, sy) = (run(&x, &b, j.min(2)), run(&y, &b, j.min(2)));
        let d = sx.distance(&sy).unwrap();
        let input = x.sub(&y).unwrap().norm_l2();
        prop_assert!(d <= input * (1.0 + 1e-9), "{d} > {input}");
    }

    #[test]
    fn order_one_tree_is_the_first_order_map(x in image(), j in 1usize..=3) {
        let b = bank(j);
        let a = run(&x, &b, 1);
        let f = first_order_map(&x, &b).unwrap();
        prop_assert_eq!(a.feature_vector(), f.feature_vector());
    }

    /// Shifting the input by the decimation step shifts each order-0 and
    /// order-1 output by one sample.
    #[test]
    fn covariant_under_decimation_step_shifts(x in image(), j in 1usize..=2, sy in -2isize..3, sx in -2isize..3) {
        let b = bank(j);
        let step = 1isize << j;
        let moved = x.circular_shift(&[sy * step, sx * step]).unwrap();
        let (a, c) = (run(&x, &b, 1), run(&moved, &b, 1));
        for (p, e) in a.entries() {
            let expected = e.circular_shift(&[sy, sx]).unwrap();
            let got = c.get(p).unwrap();
            let err = got.sub(&expected).unwrap().norm_l2();
            prop_assert!(err <= 1e-10 * expected.norm_l2().max(1e-300), "{p}: {err}");
        }
    }

    #[test]
    fn outputs_are_real_and_nonnegative_past_order_zero(x in image()) {
        let s = run(&x, &bank(2), 2);
        for (p, e) in s.entries() {
            prop_assert!(e.values().iter().all(|v| v.im == 0.0));
            if p.order() > 0 {
                prop_assert!(e.values().iter().all(|v| v.re >= 0.0));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn texture_energy_decays_with_order(seed in any::<u64>()) {
        let b = build_bank(&BankConfig::new_2d(3, 32, 32)).unwrap();
        let x = synth::texture(32, &mut synth::rng(seed));
        let s = scatter(&x, &ScatterConfig::new(b.config().clone()), &b).unwrap();
        let e: Vec<f64> = (0..=2).map(|q| s.order_energy(q)).collect();
        prop_assert!(e[0] >= e[1] && e[1] >= e[2], "{e:?}");
        prop_assert!(s.total_energy() <= x.energy() * (1.0 + 1e-9));
    }
}

#[test]
fn zero_maps_to_zero() {
    let b = bank(2);
    let z = Signal::zeros(Shape::D2(N, N)).unwrap();
    assert!(run(&z, &b, 2).feature_vector().iter().all(|&v| v == 0.0));
}

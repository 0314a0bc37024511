use ndarray::Array2;
use phaseret::autonet::{AdamConfig, AdamState, LayerSpec, Mode, NetworkModel};
use phaseret::evalreg::{evaluate, register};
use phaseret::measurement::{zero_pad, MeasurementOperator};
use phaseret::numerics::{
    circular_cross_correlate, circular_cross_correlate_direct, circular_shift, dft2, idft2,
    point_reflect, RandomStream, Tensor,
};
use proptest::prelude::*;

fn image(h: usize, w: usize, seed: u64) -> Tensor {
    let mut s = RandomStream::new(seed, 0);
    Tensor::from_fn2(h, w, |_, _| s.uniform()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn parseval_and_round_trip(h in 1usize..12, w in 1usize..12, seed in any::<u64>()) {
        let x = image(h, w, seed);
        let f = dft2(&x).unwrap();
        prop_assert!((f.norm() - x.norm()).abs() <= 1e-9 * x.norm().max(1.0));
        let back = idft2(&f).unwrap();
        for (a, b) in back.data().iter().zip(x.data()) {
            prop_assert!((a.re - b).abs() <= 1e-9 && a.im.abs() <= 1e-9);
        }
    }

    #[test]
    fn magnitudes_ignore_shift_and_rotation(h in 1usize..10, w in 1usize..10, s in 0usize..10, t in 0usize..10, seed in any::<u64>()) {
        let op = MeasurementOperator::fourier2d(h, w).unwrap();
        let x = image(h, w, seed);
        let y = op.apply(&x).unwrap();
        let moved = point_reflect(&circular_shift(&x, s % h, t % w).unwrap()).unwrap();
        let y2 = op.apply(&moved).unwrap();
        prop_assert!(y.distance(&y2).unwrap() <= 1e-9);
    }

    #[test]
    fn gaussian_magnitudes_ignore_global_sign(m in 1usize..20, n in 1usize..20, seed in any::<u64>()) {
        let op = MeasurementOperator::gaussian(m, n, seed).unwrap();
        let x = Tensor::new(&[n], image(1, n, seed).into_data()).unwrap();
        let neg = x.map(|v| -v).unwrap();
        prop_assert_eq!(op.apply(&x).unwrap(), op.apply(&neg).unwrap());
    }

    #[test]
    fn zero_padding_preserves_energy(h in 1usize..8, w in 1usize..8, f in 1usize..4, seed in any::<u64>()) {
        let x = image(h, w, seed);
        let p = zero_pad(&x, f).unwrap();
        prop_assert_eq!(p.shape(), &[f * h, f * w][..]);
        prop_assert!((p.norm() - x.norm()).abs() <= 1e-12);
    }

    #[test]
    fn correlation_routes_agree(h in 1usize..9, w in 1usize..9, seed in any::<u64>()) {
        let a = image(h, w, seed);
        let b = image(h, w, seed ^ 0x55);
        let fast = circular_cross_correlate(&a, &b).unwrap();
        let slow = circular_cross_correlate_direct(&a, &b).unwrap();
        prop_assert!(fast.distance(&slow).unwrap() <= 1e-7);
    }

    #[test]
    fn registration_undoes_transforms(h in 2usize..9, w in 2usize..9, s in 0usize..9, t in 0usize..9, rot in any::<bool>(), seed in any::<u64>()) {
        let x = image(h, w, seed);
        let mut c = circular_shift(&x, s % h, t % w).unwrap();
        if rot {
            c = point_reflect(&c).unwrap();
        }
        let r = register(&x, &c).unwrap();
        prop_assert!(evaluate(&x, &c).unwrap().mse <= 1e-12);
        prop_assert!(r.aligned.distance(&x).unwrap() <= 1e-6);
    }

    #[test]
    fn eval_forward_is_row_independent(rows in 1usize..6, seed in any::<u64>()) {
        let specs = vec![
            LayerSpec::dense(5, 7),
            LayerSpec::batchnorm(7),
            LayerSpec::leaky_relu(0.2),
            LayerSpec::dense(7, 3),
            LayerSpec::Sigmoid,
        ];
        let net = NetworkModel::<f64>::init(&specs, &mut RandomStream::new(seed, 1)).unwrap();
        let mut s = RandomStream::new(seed, 2);
        let x = Array2::from_shape_simple_fn((rows, 5), || s.standard_normal());
        let all = net.predict(&x).unwrap();
        for r in 0..rows {
            let one = net.predict(&x.slice(ndarray::s![r..r + 1, ..]).to_owned()).unwrap();
            prop_assert_eq!(one.row(0), all.row(r));
        }
        prop_assert!(all.iter().all(|v| *v > 0.0 && *v < 1.0));
    }
}

#[test]
fn adam_descends_a_quadratic() {
    let mut p = vec![3.0f64, -2.0, 0.5];
    let mut adam = AdamState::new(AdamConfig::with_lr(0.05), &[3]);
    for _ in 0..2000 {
        let g: Vec<f64> = p.iter().map(|v| 2.0 * v).collect();
        adam.step(&mut [&mut p], &[&g]).unwrap();
    }
    assert!(p.iter().all(|v| v.abs() < 1e-3), "{p:?}");
}

#[test]
fn train_mode_updates_running_statistics_only_in_train() {
    let specs = vec![LayerSpec::dense(2, 2), LayerSpec::batchnorm(2)];
    let mut net = NetworkModel::<f64>::init(&specs, &mut RandomStream::new(0, 0)).unwrap();
    let before = net.params().to_vec();
    let x = Array2::from_shape_vec((3, 2), vec![1.0, 2.0, 3.0, 5.0, -1.0, 0.0]).unwrap();
    net.forward(&x, Mode::Eval).unwrap();
    assert_eq!(net.params(), &before[..]);
    net.forward(&x, Mode::Train).unwrap();
    assert_ne!(net.params(), &before[..]);
}

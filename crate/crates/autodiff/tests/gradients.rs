#[path = "support/op_cases.rs"]
mod op_cases;

use op_cases::{cases, rand_t, weighted};
use srr_autodiff::nn::{avg_pool, conv, leaky_relu};
use srr_autodiff::{check_gradients, grad, AdError, AdResult, Tape, Tensor, Var};

#[test]
fn every_op_matches_finite_differences() {
    for (name, f, inputs) in cases() {
        let r = check_gradients(&f, &inputs, 1e-5, None).unwrap();
        assert!(r.max_rel_err < 1e-8, "{name}: rel err {:e}", r.max_rel_err);
    }
}

#[test]
fn every_op_supports_double_backward() {
    // h(v) = Σ_k ‖∂f/∂v_k‖² is differentiable only if every VJP is.
    for (name, f, inputs) in cases() {
        let h = |t: &Tape, v: &[Var]| -> AdResult<Var> {
            let y = f(t, v)?;
            let gs = grad(&y, &v.iter().collect::<Vec<_>>())?;
            let mut acc = gs[0].sum_squares();
            for g in &gs[1..] {
                acc = acc.add(&g.sum_squares())?;
            }
            Ok(acc)
        };
        let r = check_gradients(h, &inputs, 1e-5, None).unwrap();
        assert!(r.max_rel_err < 1e-6, "{name}: second-order rel err {:e}", r.max_rel_err);
    }
}

#[test]
fn half_squared_norm_chain() {
    let tape = Tape::new();
    let w = tape.param(rand_t(&[5], 40));
    let f = w.sum_squares().scale(0.5);
    let g = grad(&f, &[&w]).unwrap().remove(0);
    assert_eq!(g.value(), w.value());
    let gg = g.sum_squares();
    let h = grad(&gg, &[&w]).unwrap().remove(0);
    for (a, b) in h.value().data().iter().zip(w.value().data()) {
        assert!((a - 2.0 * b).abs() < 1e-15);
    }
}

#[test]
fn quadratic_form_second_order() {
    let a = rand_t(&[3, 3], 41);
    let mut q = Tensor::zeros(&[3, 3]);
    for i in 0..3 {
        for j in 0..3 {
            q.data_mut()[i * 3 + j] = a.data()[i * 3 + j] + a.data()[j * 3 + i];
        }
    }
    let qm = |x: &[f64]| -> Vec<f64> { (0..3).map(|i| (0..3).map(|j| q.data()[i * 3 + j] * x[j]).sum()).collect() };
    let w0 = rand_t(&[3], 42);
    let tape = Tape::new();
    let w = tape.param(w0.clone());
    let qv = tape.constant(q.clone());
    let f = w.mul(&qv.matvec(&w).unwrap()).unwrap().sum();
    let g = grad(&f, &[&w]).unwrap().remove(0);
    let two_qw: Vec<f64> = qm(w0.data()).iter().map(|v| 2.0 * v).collect();
    for (x, y) in g.value().data().iter().zip(&two_qw) {
        assert!((x - y).abs() < 1e-12);
    }
    let half = g.sum_squares().scale(0.5);
    let h = grad(&half, &[&w]).unwrap().remove(0);
    let four_qqw: Vec<f64> = qm(&qm(w0.data())).iter().map(|v| 4.0 * v).collect();
    for (x, y) in h.value().data().iter().zip(&four_qqw) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn diamond_fan_out_accumulates() {
    let tape = Tape::new();
    let x = tape.param(Tensor::new(&[2], vec![1.5, -2.0]).unwrap());
    let u = x.square();
    let v = x.scale(3.0);
    let z = u.mul(&v).unwrap().sum();
    let g = grad(&z, &[&x]).unwrap().remove(0);
    assert_eq!(g.value().data(), &[9.0 * 1.5 * 1.5, 9.0 * 4.0]);
}

#[test]
fn gradients_are_bitwise_deterministic() {
    let run = || {
        let tape = Tape::new();
        let x = tape.param(rand_t(&[2, 8, 8], 50));
        let w = tape.param(rand_t(&[4, 2, 3, 3], 51));
        let y = leaky_relu(&x.conv(&w).unwrap(), 0.01).unwrap().sum_squares();
        grad(&y, &[&x, &w]).unwrap().into_iter().map(|g| g.value().clone()).collect::<Vec<_>>()
    };
    let (a, b) = (run(), run());
    for (p, q) in a.iter().zip(&b) {
        let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(p), bits(q));
    }
}

#[test]
fn backward_errors() {
    let tape = Tape::new();
    let x = tape.param(rand_t(&[3], 1));
    assert!(matches!(grad(&x, &[&x]), Err(AdError::NonScalarRoot(_))));
    let other = Tape::new().param(rand_t(&[1], 2));
    assert!(matches!(grad(&x.sum(), &[&other]), Err(AdError::ForeignTape)));
    let ng = Tape::no_grad();
    let y = ng.param(rand_t(&[3], 1));
    assert!(matches!(grad(&y.sum(), &[&y]), Err(AdError::NotRecording)));
    assert!(ng.is_empty());
}

#[test]
fn unrelated_inputs_get_zero_gradient() {
    let tape = Tape::new();
    let x = tape.param(rand_t(&[3], 1));
    let y = tape.param(rand_t(&[2], 2));
    let g = grad(&x.sum(), &[&y]).unwrap().remove(0);
    assert_eq!(g.value().data(), &[0.0, 0.0]);
}

#[test]
fn conv_gradient_meets_layer_tolerance() {
    let f = |_: &Tape, v: &[Var]| weighted(&conv(&v[0], &v[1], Some(&v[2]))?, 60);
    let inputs = vec![rand_t(&[2, 8, 8], 61), rand_t(&[3, 2, 3, 3], 62), rand_t(&[3], 63)];
    let r = check_gradients(f, &inputs, 1e-5, None).unwrap();
    assert!(r.max_rel_err < 1e-6);
}

mod properties {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn conv_stack_matches_finite_differences_on_random_shapes(
            seed in 0u64..10_000,
            cin in 1usize..3,
            cout in 1usize..3,
            h in 3usize..7,
            w in 3usize..7,
            k in prop_oneof![Just(1usize), Just(3usize)],
        ) {
            let inputs = vec![rand_t(&[cin, h, w], seed), rand_t(&[cout, cin, k, k], seed + 1), rand_t(&[cout], seed + 2)];
            let report = check_gradients(
                |_, v| weighted(&avg_pool(&conv(&v[0], &v[1], Some(&v[2]))?, 2)?, seed + 3),
                &inputs,
                1e-6,
                None,
            )
            .unwrap();
            prop_assert!(report.max_rel_err < 1e-6, "{:?}", report);
        }

        #[test]
        fn fan_out_sums_gradients(x in -3.0f64..3.0, a in -2.0f64..2.0, b in -2.0f64..2.0) {
            // f = (a x) * (b x) + a x, so df/dx = 2 a b x + a.
            let tape = Tape::new();
            let xv = tape.param(Tensor::scalar(x));
            let left = xv.scale(a);
            let f = left.mul(&xv.scale(b)).unwrap().add(&left).unwrap();
            let g = grad(&f, &[&xv]).unwrap()[0].item();
            prop_assert!((g - (2.0 * a * b * x + a)).abs() <= 1e-12 * (1.0 + g.abs()));
        }

        #[test]
        fn repeated_taping_is_bitwise_identical(seed in 0u64..10_000) {
            let run = || {
                let tape = Tape::new();
                let x = tape.param(rand_t(&[2, 5, 5], seed));
                let wt = tape.param(rand_t(&[3, 2, 3, 3], seed + 1));
                let y = leaky_relu(&conv(&x, &wt, None).unwrap(), 0.01).unwrap();
                let l = weighted(&y, seed + 2).unwrap();
                grad(&l, &[&x, &wt]).unwrap().iter().map(|g| g.value().data().to_vec()).collect::<Vec<_>>()
            };
            let (a, b) = (run(), run());
            prop_assert!(a.iter().flatten().zip(b.iter().flatten()).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
    }
}

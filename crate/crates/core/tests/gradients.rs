//! Analytic back-propagation against central finite differences.

use jcas_core::agents::{mask_log_likelihood, mask_log_likelihood_grad};
use jcas_core::nn::{Activation, DenseNet};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EPS: f64 = 1e-6;

/// Relative error with a small denominator floor, so gradients that are zero
/// up to rounding compare absolutely.
fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn random_net(rng: &mut ChaCha8Rng) -> DenseNet {
    let depth = rng.random_range(1..=3);
    let mut sizes = vec![rng.random_range(1..=6)];
    let mut acts = Vec::new();
    let all = [Activation::Relu, Activation::TanhScaled, Activation::Sigmoid, Activation::Linear];
    for _ in 0..depth {
        sizes.push(rng.random_range(1..=6));
        acts.push(all[rng.random_range(0..all.len())]);
    }
    DenseNet::new(&sizes, &acts, rng.random_range(0.5..4.0), rng).unwrap()
}

/// Largest relative error over all parameters and inputs for the loss
/// `Σ c ⊙ net(x)`.
fn max_gradient_error(net: &mut DenseNet, rng: &mut ChaCha8Rng) -> f64 {
    let batch = rng.random_range(1..=3);
    let x: Vec<f64> = (0..batch * net.input_dim()).map(|_| rng.random_range(-2.0..2.0)).collect();
    let c: Vec<f64> = (0..batch * net.output_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let loss = |n: &DenseNet, x: &[f64]| -> f64 {
        n.predict(x, batch).unwrap().iter().zip(&c).map(|(y, k)| y * k).sum()
    };
    net.forward_batch(&x, batch).unwrap();
    let back = net.backward(&c).unwrap();
    let mut worst = 0.0f64;

    let params = net.flat_params();
    for (i, g) in back.params.flat().into_iter().enumerate() {
        let mut p = params.clone();
        p[i] += EPS;
        net.set_flat_params(&p).unwrap();
        let up = loss(net, &x);
        p[i] -= 2.0 * EPS;
        net.set_flat_params(&p).unwrap();
        let down = loss(net, &x);
        worst = worst.max(rel_err(g, (up - down) / (2.0 * EPS)));
    }
    net.set_flat_params(&params).unwrap();

    for (i, &g) in back.input.iter().enumerate() {
        let mut xp = x.clone();
        xp[i] += EPS;
        let up = loss(net, &xp);
        xp[i] -= 2.0 * EPS;
        let down = loss(net, &xp);
        worst = worst.max(rel_err(g, (up - down) / (2.0 * EPS)));
    }
    worst
}

#[test]
fn hundred_random_nets_match_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for k in 0..100 {
        let mut net = random_net(&mut rng);
        let err = max_gradient_error(&mut net, &mut rng);
        assert!(err < 1e-4, "net {k} ({:?}): relative error {err}", net.layer_sizes());
    }
}

#[test]
fn hand_computed_two_layer_net() {
    // x -> relu(2x + 1) -> 3h - 1, at x = 0.5: h = 2, y = 5, dy/dx = 6.
    let mut net = DenseNet::from_parts(
        &[1, 1, 1],
        &[Activation::Relu, Activation::Linear],
        1.0,
        vec![(vec![2.0], vec![1.0]), (vec![3.0], vec![-1.0])],
    )
    .unwrap();
    assert_eq!(net.forward(&[0.5]).unwrap(), vec![5.0]);
    let b = net.backward(&[1.0]).unwrap();
    assert_eq!(b.input, vec![6.0]);
    // Order: w1, b1, w2, b2.
    assert_eq!(b.params.flat(), vec![1.5, 3.0, 2.0, 1.0]);
}

#[test]
fn hand_computed_scaled_tanh() {
    // y = π tanh(z), dy/dz = π (1 - tanh²z); at z = 0 that is π.
    let mut net = DenseNet::from_parts(&[1, 1], &[Activation::TanhScaled], std::f64::consts::PI, vec![(vec![1.0], vec![0.0])]).unwrap();
    assert_eq!(net.forward(&[0.0]).unwrap(), vec![0.0]);
    let b = net.backward(&[1.0]).unwrap();
    assert!((b.input[0] - std::f64::consts::PI).abs() < 1e-15);
}

#[test]
fn batch_gradient_is_sum_of_rows() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut net = DenseNet::mlp(3, &[4], 2, Activation::Sigmoid, 1.0, &mut rng).unwrap();
    let x = [0.1, -0.4, 0.9, 1.2, 0.3, -0.7];
    let up = [0.5, -1.0, 2.0, 0.25];
    net.forward_batch(&x, 2).unwrap();
    let both = net.backward(&up).unwrap().params.flat();
    net.forward(&x[..3]).unwrap();
    let first = net.backward(&up[..2]).unwrap().params.flat();
    net.forward(&x[3..]).unwrap();
    let second = net.backward(&up[2..]).unwrap().params.flat();
    for ((b, f), s) in both.iter().zip(&first).zip(&second) {
        assert!((b - f - s).abs() < 1e-12);
    }
}

proptest! {
    #[test]
    fn log_likelihood_gradient_matches_differences(
        raw in prop::collection::vec((0.01f64..0.99, any::<bool>()), 1..12)
    ) {
        let (probs, bits): (Vec<f64>, Vec<bool>) = raw.into_iter().unzip();
        let grad = mask_log_likelihood_grad(&probs, &bits);
        for i in 0..probs.len() {
            let mut up = probs.clone();
            up[i] += EPS;
            let mut down = probs.clone();
            down[i] -= EPS;
            let fd = (mask_log_likelihood(&up, &bits) - mask_log_likelihood(&down, &bits)) / (2.0 * EPS);
            prop_assert!(rel_err(grad[i], fd) < 1e-5, "{} vs {}", grad[i], fd);
        }
    }

    #[test]
    fn log_likelihood_is_nonpositive(
        raw in prop::collection::vec((0.0f64..=1.0, any::<bool>()), 1..12)
    ) {
        let (probs, bits): (Vec<f64>, Vec<bool>) = raw.into_iter().unzip();
        let ll = mask_log_likelihood(&probs, &bits);
        prop_assert!(ll.is_finite() && ll <= 0.0);
    }
}

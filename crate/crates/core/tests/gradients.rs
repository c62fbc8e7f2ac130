use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use splitfed::nn::{backward, forward, grad_check, LayerKind, LayerParams};
use splitfed::seed::rng;
use splitfed::Tensor;

fn random_tensor(shape: &[usize], r: &mut impl Rng) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| StandardNormal.sample(r)).collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

fn random_layer(kind: LayerKind, cin: usize, cout: usize, r: &mut impl Rng) -> LayerParams {
    let mut p = LayerParams::zeros(kind, cin, cout);
    for v in p.weights.data_mut().iter_mut().chain(p.bias.data_mut()) {
        let z: f64 = StandardNormal.sample(r);
        *v = 0.5 * z;
    }
    p
}

/// `Σ probe ⊙ f(x)`, a scalar whose gradient at the output is `probe`.
fn probe_loss(layers: &[LayerParams], x: &Tensor, probe: &Tensor) -> f64 {
    let (y, _) = forward(layers, x).unwrap();
    y.data().iter().zip(probe.data()).map(|(a, b)| a * b).sum()
}

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

/// Worst relative error over every parameter and every input entry.
fn check_layers(layers: &[LayerParams], x: &Tensor, seed: u64) -> f64 {
    let mut r = rng(seed);
    let (y, cache) = forward(layers, x).unwrap();
    let probe = random_tensor(y.shape(), &mut r);
    let (grads, gin) = backward(layers, &cache, &probe).unwrap();
    let eps = 1e-6;
    let mut worst = 0.0f64;

    let mut params = layers.to_vec();
    for li in 0..layers.len() {
        for i in 0..layers[li].weights.len() {
            let orig = params[li].weights.data()[i];
            params[li].weights.data_mut()[i] = orig + eps;
            let plus = probe_loss(&params, x, &probe);
            params[li].weights.data_mut()[i] = orig - eps;
            let minus = probe_loss(&params, x, &probe);
            params[li].weights.data_mut()[i] = orig;
            worst = worst.max(rel_err(grads[li].weights.data()[i], (plus - minus) / (2.0 * eps)));
        }
        for i in 0..layers[li].bias.len() {
            let orig = params[li].bias.data()[i];
            params[li].bias.data_mut()[i] = orig + eps;
            let plus = probe_loss(&params, x, &probe);
            params[li].bias.data_mut()[i] = orig - eps;
            let minus = probe_loss(&params, x, &probe);
            params[li].bias.data_mut()[i] = orig;
            worst = worst.max(rel_err(grads[li].bias.data()[i], (plus - minus) / (2.0 * eps)));
        }
    }

    let mut xp = x.clone();
    for i in 0..x.len() {
        let orig = xp.data()[i];
        xp.data_mut()[i] = orig + eps;
        let plus = probe_loss(layers, &xp, &probe);
        xp.data_mut()[i] = orig - eps;
        let minus = probe_loss(layers, &xp, &probe);
        xp.data_mut()[i] = orig;
        worst = worst.max(rel_err(gin.data()[i], (plus - minus) / (2.0 * eps)));
    }
    worst
}

#[test]
fn conv3x3_layer_gradients() {
    let mut r = rng(1);
    let layer = random_layer(LayerKind::Conv3x3, 2, 3, &mut r);
    let x = random_tensor(&[2, 2, 5, 5], &mut r);
    let err = check_layers(&[layer], &x, 2);
    assert!(err < 1e-4, "conv relative error {err}");
}

#[test]
fn downsample_layer_gradients_odd_and_even_sizes() {
    let mut r = rng(3);
    for size in [5, 6] {
        let layer = random_layer(LayerKind::Downsample, 2, 3, &mut r);
        let x = random_tensor(&[2, 2, size, size], &mut r);
        let err = check_layers(&[layer], &x, 4);
        assert!(err < 1e-4, "downsample {size}×{size} relative error {err}");
    }
}

#[test]
fn dense_layer_gradients() {
    let mut r = rng(5);
    let layer = random_layer(LayerKind::Dense, 3, 4, &mut r);
    let x = random_tensor(&[3, 3, 2, 2], &mut r);
    let err = check_layers(&[layer], &x, 6);
    assert!(err < 1e-4, "dense relative error {err}");
}

fn two_group_net(r: &mut impl Rng) -> Vec<LayerParams> {
    vec![
        random_layer(LayerKind::Conv3x3, 2, 3, r),
        random_layer(LayerKind::Conv3x3, 3, 3, r),
        random_layer(LayerKind::Downsample, 3, 4, r),
        random_layer(LayerKind::Conv3x3, 4, 4, r),
        random_layer(LayerKind::Dense, 4, 3, r),
    ]
}

#[test]
fn two_group_network_chain() {
    let mut r = rng(7);
    let net = two_group_net(&mut r);
    let x = random_tensor(&[2, 2, 6, 6], &mut r);
    let err = check_layers(&net, &x, 8);
    assert!(err < 1e-4, "network relative error {err}");
}

#[test]
fn cross_entropy_grad_check_on_two_group_net() {
    let mut r = rng(9);
    let net = two_group_net(&mut r);
    let x = random_tensor(&[3, 2, 6, 6], &mut r);
    let err = grad_check(&net, &x, &[0, 2, 1], 1e-6).unwrap();
    assert!(err < 1e-4, "cross-entropy relative error {err}");
}

use approx::assert_abs_diff_eq;
use pmat_core::nn::{
    bce_loss, train, CellActivation, LayerSpec, Network, NetworkSpec, SampleSet, Tensor, TrainConfig, TrainedNet,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-4;
const TOL: f64 = 1e-4;

fn spec(input_shape: Vec<usize>, layers: Vec<LayerSpec>) -> NetworkSpec {
    NetworkSpec {
        name: "test".into(),
        input_shape,
        layers,
    }
}

fn random_batch(rng: &mut ChaCha8Rng, batch: usize, shape: &[usize]) -> (Tensor, Vec<f64>) {
    let n: usize = shape.iter().product();
    let data = (0..batch * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut full = vec![batch];
    full.extend_from_slice(shape);
    let labels = (0..batch).map(|i| (i % 2) as f64).collect();
    (Tensor::new(full, data).unwrap(), labels)
}

fn train_loss(net: &Network, x: &Tensor, y: &[f64]) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (out, _) = net.forward_train(x, &mut rng).unwrap();
    bce_loss(out.data(), y)
}

/// Central-difference check of every parameter; returns the worst relative error.
fn worst_gradient_error(spec: NetworkSpec, batch: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Network::new(spec.clone(), &mut rng).unwrap();
    for p in net.params_mut() {
        *p += rng.gen_range(-0.3..0.3);
    }
    let (x, y) = random_batch(&mut rng, batch, &spec.input_shape);
    let (_, analytic, _) = net.loss_and_grad(&x, &y, &mut ChaCha8Rng::seed_from_u64(99)).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..analytic.len() {
        let orig = net.params()[i];
        net.params_mut()[i] = orig + H;
        let up = train_loss(&net, &x, &y);
        net.params_mut()[i] = orig - H;
        let down = train_loss(&net, &x, &y);
        net.params_mut()[i] = orig;
        let numeric = (up - down) / (2.0 * H);
        let a = analytic[i];
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(err);
    }
    worst
}

fn head(features: usize) -> Vec<LayerSpec> {
    vec![
        LayerSpec::Dense {
            inputs: features,
            units: 1,
        },
        LayerSpec::Sigmoid,
    ]
}

#[test]
fn dense_block_gradients() {
    let mut layers = vec![
        LayerSpec::Dense { inputs: 5, units: 4 },
        LayerSpec::Relu,
        LayerSpec::BatchNorm { features: 4 },
        LayerSpec::Dropout { rate: 0.1 },
    ];
    layers.extend(head(4));
    let worst = worst_gradient_error(spec(vec![5], layers), 6, 1);
    assert!(worst < TOL, "worst relative error {worst}");
}

#[test]
fn conv_block_gradients() {
    let mut layers = vec![
        LayerSpec::Conv1d {
            in_channels: 3,
            filters: 4,
            kernel: 3,
        },
        LayerSpec::Relu,
        LayerSpec::BatchNorm { features: 4 },
        LayerSpec::Dropout { rate: 0.1 },
        LayerSpec::Conv1d {
            in_channels: 4,
            filters: 2,
            kernel: 5,
        },
        LayerSpec::Relu,
        LayerSpec::BatchNorm { features: 2 },
        LayerSpec::GlobalAvgPool,
    ];
    layers.extend(head(2));
    let worst = worst_gradient_error(spec(vec![9, 3], layers), 3, 2);
    assert!(worst < TOL, "worst relative error {worst}");
}

fn lstm_layers(activation: CellActivation) -> Vec<LayerSpec> {
    let mut layers = vec![
        LayerSpec::Lstm {
            inputs: 3,
            units: 4,
            return_sequences: true,
            activation,
        },
        LayerSpec::BatchNorm { features: 4 },
        LayerSpec::Dropout { rate: 0.1 },
        LayerSpec::Lstm {
            inputs: 4,
            units: 3,
            return_sequences: false,
            activation,
        },
        LayerSpec::BatchNorm { features: 3 },
    ];
    layers.extend(head(3));
    layers
}

#[test]
fn lstm_relu_gradients() {
    let worst = worst_gradient_error(spec(vec![5, 3], lstm_layers(CellActivation::Relu)), 3, 3);
    assert!(worst < TOL, "worst relative error {worst}");
}

#[test]
fn lstm_tanh_gradients() {
    let worst = worst_gradient_error(spec(vec![5, 3], lstm_layers(CellActivation::Tanh)), 3, 4);
    assert!(worst < TOL, "worst relative error {worst}");
}

#[test]
fn gradient_checks_hold_across_seeds() {
    for seed in 10..16 {
        let mut layers = vec![
            LayerSpec::Dense { inputs: 3, units: 3 },
            LayerSpec::Relu,
            LayerSpec::BatchNorm { features: 3 },
        ];
        layers.extend(head(3));
        let worst = worst_gradient_error(spec(vec![3], layers), 4, seed);
        assert!(worst < TOL, "seed {seed}: worst relative error {worst}");
    }
}

#[test]
fn logistic_gradient_is_residual_times_input() {
    let mut net = Network::zeroed(spec(vec![3], head(3))).unwrap();
    net.params_mut().copy_from_slice(&[0.4, -0.2, 0.1, 0.05]);
    let input = [1.0, 2.0, -0.5];
    let x = Tensor::new(vec![1, 3], input.to_vec()).unwrap();
    let (_, grads, _) = net
        .loss_and_grad(&x, &[1.0], &mut ChaCha8Rng::seed_from_u64(0))
        .unwrap();
    let z: f64 = 0.4 - 0.4 - 0.05 + 0.05;
    let p = 1.0 / (1.0 + (-z).exp());
    for i in 0..3 {
        assert_abs_diff_eq!(grads[i], (p - 1.0) * input[i], epsilon = 1e-12);
    }
    assert_abs_diff_eq!(grads[3], p - 1.0, epsilon = 1e-12);
}

#[test]
fn balanced_data_at_zero_weights_has_zero_bias_gradient() {
    let net = Network::zeroed(spec(vec![2], head(2))).unwrap();
    let x = Tensor::new(vec![4, 2], vec![1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0]).unwrap();
    let (_, grads, _) = net
        .loss_and_grad(&x, &[1.0, 0.0, 1.0, 0.0], &mut ChaCha8Rng::seed_from_u64(0))
        .unwrap();
    assert_abs_diff_eq!(grads[2], 0.0, epsilon = 1e-15);
}

#[test]
fn zero_output_layer_gives_one_half() {
    let mut layers = vec![LayerSpec::Dense { inputs: 4, units: 3 }, LayerSpec::Relu];
    layers.extend(head(3));
    let mut net = Network::new(spec(vec![4], layers), &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    net.layer_params_mut(2).fill(0.0);
    let (x, _) = random_batch(&mut ChaCha8Rng::seed_from_u64(6), 7, &[4]);
    for p in net.predict_proba(&x).unwrap() {
        assert_eq!(p, 0.5);
    }
}

#[test]
fn centre_tap_convolution_is_identity() {
    let layers = vec![LayerSpec::Conv1d {
        in_channels: 2,
        filters: 1,
        kernel: 7,
    }];
    let mut net = Network::zeroed(spec(vec![10, 2], layers)).unwrap();
    // W[k][c][f]: centre tap k = 3, channel 1.
    net.params_mut()[3 * 2 + 1] = 1.0;
    let (x, _) = random_batch(&mut ChaCha8Rng::seed_from_u64(7), 2, &[10, 2]);
    let y = net.infer(&x).unwrap();
    assert_eq!(y.shape(), &[2, 10, 1]);
    for b in 0..2 {
        for t in 0..10 {
            assert_eq!(y.data()[b * 10 + t], x.data()[(b * 10 + t) * 2 + 1]);
        }
    }
}

#[test]
fn global_pool_of_constant_channels() {
    let net = Network::zeroed(spec(vec![500, 4], vec![LayerSpec::GlobalAvgPool])).unwrap();
    let data: Vec<f64> = (0..500).flat_map(|_| [1.0, 2.0, 3.0, 4.0]).collect();
    let y = net.infer(&Tensor::new(vec![1, 500, 4], data).unwrap()).unwrap();
    for (got, want) in y.data().iter().zip([1.0, 2.0, 3.0, 4.0]) {
        assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
    }
}

#[test]
fn shape_mismatch_is_rejected() {
    let net = Network::zeroed(spec(vec![3], head(3))).unwrap();
    assert!(net.infer(&Tensor::zeros(vec![2, 4])).is_err());
    let bad = spec(vec![3], vec![LayerSpec::Dense { inputs: 4, units: 1 }]);
    assert!(Network::zeroed(bad).is_err());
    let even = spec(
        vec![5, 2],
        vec![LayerSpec::Conv1d {
            in_channels: 2,
            filters: 1,
            kernel: 4,
        }],
    );
    assert!(Network::zeroed(even).is_err());
}

fn mixed_net() -> Network {
    let mut layers = vec![
        LayerSpec::Conv1d {
            in_channels: 2,
            filters: 3,
            kernel: 3,
        },
        LayerSpec::Relu,
        LayerSpec::BatchNorm { features: 3 },
        LayerSpec::Dropout { rate: 0.1 },
        LayerSpec::GlobalAvgPool,
    ];
    layers.extend(head(3));
    let mut net = Network::new(spec(vec![6, 2], layers), &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for s in net.state_mut() {
        *s += rng.gen_range(0.0..0.5);
    }
    net
}

#[test]
fn inference_is_independent_of_batching() {
    let net = mixed_net();
    let (x, _) = random_batch(&mut ChaCha8Rng::seed_from_u64(10), 5, &[6, 2]);
    let together = net.predict_proba(&x).unwrap();
    for i in 0..5 {
        let single = Tensor::new(vec![1, 6, 2], x.data()[i * 12..(i + 1) * 12].to_vec()).unwrap();
        assert_eq!(net.predict_proba(&single).unwrap()[0], together[i]);
    }
    let before = net.clone();
    net.predict_proba(&x).unwrap();
    assert_eq!(before, net);
}

#[test]
fn training_forward_leaves_running_stats_until_applied() {
    let mut net = mixed_net();
    let (x, _) = random_batch(&mut ChaCha8Rng::seed_from_u64(11), 4, &[6, 2]);
    let state = net.state().to_vec();
    let (_, tape) = net.forward_train(&x, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    assert_eq!(net.state(), &state[..]);
    net.apply_batch_stats(&tape);
    assert_ne!(net.state(), &state[..]);
}

fn separable_sets() -> (SampleSet, SampleSet) {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut fit = SampleSet::new(vec![2]);
    let mut val = SampleSet::new(vec![2]);
    for i in 0..48 {
        let label = (i % 2) as f64;
        let centre = if label > 0.5 { 1.5 } else { -1.5 };
        let point = [centre + rng.gen_range(-0.8..0.8), centre + rng.gen_range(-0.8..0.8)];
        if i < 40 {
            fit.push(&point, label).unwrap();
        } else {
            val.push(&point, label).unwrap();
        }
    }
    (fit, val)
}

fn f11_like() -> NetworkSpec {
    let mut layers = vec![
        LayerSpec::Dense { inputs: 2, units: 100 },
        LayerSpec::Relu,
        LayerSpec::BatchNorm { features: 100 },
        LayerSpec::Dropout { rate: 0.1 },
    ];
    layers.extend(head(100));
    spec(vec![2], layers)
}

#[test]
fn separable_toy_set_is_learned() {
    let (fit, val) = separable_sets();
    let config = TrainConfig {
        seed: 3,
        max_epochs: 60,
        ..TrainConfig::default()
    };
    let trained = train(&f11_like(), &fit, &val, &config).unwrap();
    let (x, y) = fit.all();
    let probs = trained.network.predict_proba(&x).unwrap();
    let correct = probs
        .iter()
        .zip(&y)
        .filter(|(p, y)| (**p >= 0.5) == (**y > 0.5))
        .count();
    assert_eq!(correct, fit.len());
    assert!(trained.best_epoch <= trained.epochs_run);
}

#[test]
fn training_is_deterministic_and_round_trips() {
    let (fit, val) = separable_sets();
    let config = TrainConfig {
        seed: 4,
        max_epochs: 8,
        ..TrainConfig::default()
    };
    let a = train(&f11_like(), &fit, &val, &config).unwrap();
    let b = train(&f11_like(), &fit, &val, &config).unwrap();
    assert_eq!(a, b);

    let mut bytes = Vec::new();
    a.write_to(&mut bytes).unwrap();
    let back = TrainedNet::read_from(&bytes[..]).unwrap();
    assert_eq!(a, back);
    let header_end = bytes.iter().position(|&b| b == b'\n').unwrap();
    let payload = a.network.params().len() + a.network.state().len();
    assert_eq!(bytes.len() - header_end - 1, payload * 8);

    bytes.pop();
    assert!(TrainedNet::read_from(&bytes[..]).is_err());
}

#[test]
fn restored_weights_reproduce_recorded_loss() {
    let (fit, val) = separable_sets();
    let config = TrainConfig {
        seed: 5,
        max_epochs: 15,
        patience: 3,
        ..TrainConfig::default()
    };
    let trained = train(&f11_like(), &fit, &val, &config).unwrap();
    let loss = pmat_core::nn::evaluate_loss(&trained.network, &val).unwrap();
    assert_eq!(loss, trained.validation_loss);
}

#[test]
fn empty_portions_are_rejected() {
    let (fit, _) = separable_sets();
    let empty = SampleSet::new(vec![2]);
    let config = TrainConfig::default();
    assert!(train(&f11_like(), &fit, &empty, &config).is_err());
    assert!(train(&f11_like(), &empty, &fit, &config).is_err());
}

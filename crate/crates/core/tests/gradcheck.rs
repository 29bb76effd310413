use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tailminer::cli::gradcheck_suite;
use tailminer::nn::{
    build_mlp, compare_gradients, gradient_check, Activation, FocalLossConfig, Loss, Sample,
};

const EPS: f64 = 1e-6;
const TOL: f64 = 1e-4;

#[test]
fn analytic_gradients_match_central_differences() {
    let start = Instant::now();
    let worst = gradcheck_suite(12, EPS, 7).unwrap();
    assert_eq!(worst.len(), 3);
    for (name, err) in worst {
        assert!(err < TOL, "{name}: {err:e}");
    }
    assert!(start.elapsed().as_secs_f64() < 10.0);
}

#[test]
fn gradient_check_holds_across_seeds() {
    for seed in 0..5 {
        for (name, err) in gradcheck_suite(10, EPS, seed).unwrap() {
            assert!(err < TOL, "seed {seed} {name}: {err:e}");
        }
    }
}

#[test]
fn flipped_gradient_is_caught() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let net = build_mlp(4, &[5, 4], 3, Activation::Identity, &mut rng);
    let batch: Vec<Sample> = (0..4)
        .map(|i| Sample::class((0..4).map(|_| rng.random_range(-1.0..1.0)).collect(), i % 3))
        .collect();
    let focal = Loss::Focal(FocalLossConfig::new(2.0, vec![1.0, 0.5, 0.25]).unwrap());
    for loss in [Loss::CrossEntropy, focal] {
        assert!(gradient_check(&net, &batch, &loss, EPS).unwrap() < TOL);
        let (_, mut grads) = net.gradients(&batch, &loss).unwrap();
        let last = grads.layers.last_mut().unwrap();
        last.biases[0] = -last.biases[0];
        let err = compare_gradients(&net, &batch, &loss, EPS, &grads).unwrap();
        assert!(err > 0.5, "sign flip went unnoticed: {err:e}");
    }
}

#[test]
fn scaled_mse_gradient_is_caught() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let net = build_mlp(3, &[4], 3, Activation::Identity, &mut rng);
    let batch = vec![Sample::values(vec![0.3, -0.2, 0.9], vec![0.1, 0.2, -0.4])];
    let (_, mut grads) = net.gradients(&batch, &Loss::Mse).unwrap();
    for g in &mut grads.layers {
        g.weights.iter_mut().for_each(|w| *w *= 0.5);
    }
    assert!(compare_gradients(&net, &batch, &Loss::Mse, EPS, &grads).unwrap() > 0.1);
}

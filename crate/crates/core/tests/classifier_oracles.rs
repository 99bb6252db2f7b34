//! Classifier checks: finite-difference gradients, small fitting tasks, the
//! counting baseline against a sampling oracle, and AUC against brute force.

use mshedge_core::classifiers::cnn::loss_and_grad;
use mshedge_core::classifiers::{
    cnn_forward, cnn_train, multinomial_mle, roc_auc_binary, roc_auc_ovr, CnnModel, LogisticConfig,
    LogisticModel, ProbVector, TrainConfig, TrainingSet,
};
use mshedge_core::dataset::FeatureTensor;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_tensor(rng: &mut ChaCha8Rng) -> FeatureTensor {
    let channels = (0..60).map(|_| rng.random_range(0.3..1.7)).collect();
    FeatureTensor::from_parts(channels, vec![1.0; 30], 30).unwrap()
}

/// Largest relative gap between backprop and central differences over all parameters.
fn max_gradient_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = CnnModel::init(seed);
    // nonzero biases so no pre-activation sits exactly on a ReLU kink
    for p in model.params.iter_mut() {
        if *p == 0.0 {
            *p = rng.random_range(-0.1..0.1);
        }
    }
    let xs: Vec<FeatureTensor> = (0..4).map(|_| random_tensor(&mut rng)).collect();
    let refs: Vec<&FeatureTensor> = xs.iter().collect();
    let ys: Vec<usize> = (0..4).map(|_| rng.random_range(0..8)).collect();
    let (_, grad) = loss_and_grad(&model, &refs, &ys).unwrap();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for k in 0..model.params.len() {
        let orig = model.params[k];
        model.params[k] = orig + h;
        let (up, _) = loss_and_grad(&model, &refs, &ys).unwrap();
        model.params[k] = orig - h;
        let (dn, _) = loss_and_grad(&model, &refs, &ys).unwrap();
        model.params[k] = orig;
        let fd = (up - dn) / (2.0 * h);
        let rel = (grad[k] - fd).abs() / grad[k].abs().max(fd.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    worst
}

#[test]
fn backprop_matches_finite_differences() {
    for seed in 0..5 {
        let err = max_gradient_error(seed);
        assert!(err <= 1e-4, "seed {seed}: max relative error {err:e}");
    }
}

#[test]
fn memorizes_a_single_sample() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let x = random_tensor(&mut rng);
    let set = TrainingSet { x: vec![&x; 50], y: vec![5; 50] };
    let cfg = TrainConfig { epochs: 200, init_seed: 1, ..Default::default() };
    let (model, report) = cnn_train(&set, &cfg).unwrap();
    let last = *report.epoch_losses.last().unwrap();
    assert!(last <= 0.01, "final loss {last}");
    assert_eq!(cnn_forward(&model, &x).unwrap().argmax(), 5);
}

#[test]
fn separates_two_linearly_separable_classes() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 0..64 {
        let label = i % 2;
        let trend = if label == 0 { -0.01 } else { 0.01 };
        let mut ch = vec![0.0; 60];
        for t in 0..30 {
            ch[t] = 1.0 + trend * t as f64 + rng.random_range(-0.002..0.002);
            ch[30 + t] = 1.0 + 3.0 * trend * t as f64;
        }
        xs.push(FeatureTensor::from_parts(ch, vec![1.0; 30], 30).unwrap());
        ys.push(if label == 0 { 1 } else { 6 });
    }
    let set = TrainingSet { x: xs.iter().collect(), y: ys.clone() };
    let (model, _) = cnn_train(&set, &TrainConfig { epochs: 60, init_seed: 2, ..Default::default() }).unwrap();
    let correct = xs
        .iter()
        .zip(&ys)
        .filter(|(x, y)| cnn_forward(&model, x).unwrap().argmax() == **y)
        .count();
    assert_eq!(correct, xs.len());
}

#[test]
fn training_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let xs: Vec<FeatureTensor> = (0..40).map(|_| random_tensor(&mut rng)).collect();
    let ys: Vec<usize> = (0..40).map(|i| i % 3).collect();
    let set = TrainingSet { x: xs.iter().collect(), y: ys };
    let cfg = TrainConfig { epochs: 5, init_seed: 9, ..Default::default() };
    let (a, ra) = cnn_train(&set, &cfg).unwrap();
    let (b, rb) = cnn_train(&set, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(ra, rb);
}

#[test]
fn multinomial_mle_recovers_sampling_probabilities() {
    let truth = [0.05, 0.1, 0.15, 0.2, 0.25, 0.1, 0.1, 0.05];
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let n = 10_000;
    let labels: Vec<usize> = (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (k, p) in truth.iter().enumerate() {
                acc += p;
                if u < acc {
                    return k;
                }
            }
            7
        })
        .collect();
    let est = multinomial_mle(&labels).unwrap();
    for k in 0..8 {
        let se = (truth[k] * (1.0 - truth[k]) / n as f64).sqrt();
        assert!((est.0[k] - truth[k]).abs() < 3.0 * se, "bin {k}: {} vs {}", est.0[k], truth[k]);
    }
}

fn permuted(p: &ProbVector, perm: &[usize; 8]) -> [f64; 8] {
    let mut out = [0.0; 8];
    for k in 0..8 {
        out[perm[k]] = p.0[k];
    }
    out
}

#[test]
fn baselines_are_label_permutation_equivariant() {
    let perm = [3, 0, 7, 1, 6, 2, 5, 4];
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let xs: Vec<FeatureTensor> = (0..30).map(|_| random_tensor(&mut rng)).collect();
    let ys: Vec<usize> = (0..30).map(|i| [0, 2, 2, 5, 7][i % 5]).collect();
    let ys_perm: Vec<usize> = ys.iter().map(|&y| perm[y]).collect();

    let base = multinomial_mle(&ys).unwrap();
    let moved = multinomial_mle(&ys_perm).unwrap();
    assert_eq!(permuted(&base, &perm), moved.0);

    let cfg = LogisticConfig { iterations: 50, ..Default::default() };
    let a = LogisticModel::train(&TrainingSet { x: xs.iter().collect(), y: ys }, &cfg).unwrap();
    let b = LogisticModel::train(&TrainingSet { x: xs.iter().collect(), y: ys_perm }, &cfg).unwrap();
    for x in &xs {
        let pa = permuted(&a.predict(x).unwrap(), &perm);
        let pb = b.predict(x).unwrap();
        for k in 0..8 {
            assert!((pa[k] - pb.0[k]).abs() < 1e-12);
        }
    }
}

fn brute_force_auc(scores: &[f64], positive: &[bool]) -> f64 {
    let mut credit = 0.0;
    let mut pairs = 0.0;
    for (i, &pi) in positive.iter().enumerate() {
        if !pi {
            continue;
        }
        for (j, &pj) in positive.iter().enumerate() {
            if pj {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                credit += 1.0;
            } else if scores[i] == scores[j] {
                credit += 0.5;
            }
        }
    }
    credit / pairs
}

proptest! {
    #[test]
    fn rank_auc_equals_pair_counting(
        data in prop::collection::vec((0u8..6, any::<bool>()), 2..60)
    ) {
        let scores: Vec<f64> = data.iter().map(|(s, _)| *s as f64 / 5.0).collect();
        let positive: Vec<bool> = data.iter().map(|(_, p)| *p).collect();
        let n_pos = positive.iter().filter(|&&p| p).count();
        prop_assume!(n_pos > 0 && n_pos < positive.len());
        let fast = roc_auc_binary(&scores, &positive).unwrap();
        prop_assert!((fast - brute_force_auc(&scores, &positive)).abs() < 1e-12);
    }

    #[test]
    fn macro_auc_stays_in_unit_interval(
        labels in prop::collection::vec(0usize..8, 4..40),
        seed in any::<u64>()
    ) {
        let distinct = labels.iter().collect::<std::collections::BTreeSet<_>>().len();
        prop_assume!(distinct >= 2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scores: Vec<ProbVector> = labels
            .iter()
            .map(|_| {
                let raw: Vec<f64> = (0..8).map(|_| rng.random_range(-2.0..2.0)).collect();
                ProbVector::softmax(&raw)
            })
            .collect();
        let rep = roc_auc_ovr(&scores, &labels).unwrap();
        prop_assert!((0.0..=1.0).contains(&rep.macro_auc));
    }
}

//! Training loop contracts: determinism, progress, optimizer identity, frozen teachers,
//! and encoder output invariants.

use gsalign::alignment::{
    build_training_set, AdamConfig, AdamW, TrainConfig, Trainer, TrainingObject,
};
use gsalign::assets::{gen_synthetic_triplets, FixtureSpec, SyntheticSet};
use gsalign::encoder::{
    encode_tokens, EncoderConfig, EncoderParams, GaussianEncoder, Mode, ModelConfig, Preset,
};
use gsalign::params::ParamSet;
use gsalign::rng;
use gsalign::tokenizer::{OrderingStrategy, TokenSequence, TokenizerConfig};
use ndarray::Array2;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};

const CLIP: usize = 16;

fn model_config() -> ModelConfig {
    let encoder = EncoderConfig::preset(Preset::Nano, CLIP);
    ModelConfig {
        tokenizer: TokenizerConfig {
            num_patches: 8,
            neighbors: 8,
            token_dim: encoder.width,
            points: 64,
            point_hidden: 16,
            conv_channels: 16,
            ..Default::default()
        },
        encoder,
    }
}

fn fixture(noise: f64) -> SyntheticSet {
    gen_synthetic_triplets(&FixtureSpec {
        classes: 4,
        per_class: 4,
        views: 3,
        dim: CLIP,
        noise,
        points: 64,
        ..Default::default()
    })
    .unwrap()
}

fn objects(set: &SyntheticSet) -> Vec<TrainingObject<f64>> {
    build_training_set(
        &set.manifest,
        &set.embeddings,
        &set.clouds,
        &model_config().tokenizer,
    )
    .unwrap()
}

fn trainer(steps: usize, seed: u64) -> Trainer<f64> {
    let model = GaussianEncoder::<f64>::new(model_config(), seed).unwrap();
    let config = TrainConfig {
        epochs: 10_000,
        batch_size: 8,
        views: 2,
        seed,
        max_steps: Some(steps),
        ..Default::default()
    };
    Trainer::new(model, config).unwrap()
}

#[test]
fn identical_runs_are_bit_identical() {
    let objs = objects(&fixture(0.1));
    let mut a = trainer(12, 3);
    let mut b = trainer(12, 3);
    let la = a.run(&objs, |_| {}).unwrap();
    let lb = b.run(&objs, |_| {}).unwrap();
    assert_eq!(la.len(), 12);
    let bits = |l: &[gsalign::alignment::StepRecord]| {
        l.iter()
            .map(|r| (r.total.to_bits(), r.tau.to_bits()))
            .collect::<Vec<_>>()
    };
    assert_eq!(bits(&la), bits(&lb));
    assert_eq!(a.model.params, b.model.params);
    assert_eq!(a.model.bn, b.model.bn);
    assert_eq!(a.optimizer, b.optimizer);

    let mut c = trainer(12, 4);
    let lc = c.run(&objs, |_| {}).unwrap();
    assert_ne!(bits(&la), bits(&lc));
}

#[test]
fn loss_falls_on_noise_free_fixtures() {
    let objs = objects(&fixture(0.0));
    let mut t = trainer(200, 1);
    let log = t.run(&objs, |_| {}).unwrap();
    assert_eq!(log.len(), 200);
    assert!(
        log[199].total < log[0].total,
        "{} vs {}",
        log[199].total,
        log[0].total
    );
    assert!(log
        .iter()
        .all(|r| r.total.is_finite() && r.total == r.l_text + r.l_img));
    assert!(log.windows(2).all(|w| w[1].step == w[0].step + 1));
}

#[test]
fn zero_gradient_only_decays_weights() {
    let model = GaussianEncoder::<f64>::new(model_config(), 2).unwrap();
    let config = AdamConfig::default();
    let mut params = model.params.clone();
    let mut opt = AdamW::new(config, &params.params());
    let zero = params.zeros_like();
    opt.update(params.params_mut(), &zero.params()).unwrap();
    for (before, after) in model.params.params().iter().zip(params.params()) {
        let factor = if after.kind.decays() {
            1.0 - config.lr(after.group) * config.weight_decay
        } else {
            1.0
        };
        for (x, y) in before.value.iter().zip(after.value.iter()) {
            assert!((x * factor - y).abs() <= 1e-15 * x.abs(), "{}", after.name);
            if factor == 1.0 {
                assert_eq!(x, y, "{}", after.name);
            }
        }
    }
}

fn checksum(objs: &[TrainingObject<f64>]) -> Vec<u64> {
    objs.iter()
        .flat_map(|o| o.text.iter().chain(o.views.iter()).map(|v| v.to_bits()))
        .collect()
}

#[test]
fn teacher_embeddings_are_never_mutated() {
    let set = fixture(0.1);
    let table_bytes = set.embeddings.to_bytes();
    let objs = objects(&set);
    let before = checksum(&objs);
    let mut t = trainer(6, 5);
    t.run(&objs, |_| {}).unwrap();
    assert_eq!(checksum(&objs), before);
    assert_eq!(set.embeddings.to_bytes(), table_bytes);
}

#[test]
fn training_rejects_degenerate_batches() {
    let objs = objects(&fixture(0.1));
    let mut t = trainer(1, 0);
    assert!(t.train_step(&objs, &[0], 1).is_err());
    assert!(t.train_step(&objs, &[0, 0], 1).is_err());
    assert!(t.train_step(&objs, &[0, 99], 1).is_err());
    assert_eq!(t.step, 0);
    let bad = TrainConfig {
        batch_size: 1,
        ..Default::default()
    };
    assert!(Trainer::new(GaussianEncoder::<f64>::new(model_config(), 0).unwrap(), bad).is_err());
}

#[test]
fn trainer_state_round_trips() {
    let objs = objects(&fixture(0.1));
    let mut a = trainer(4, 6);
    a.run(&objs, |_| {}).unwrap();
    let state = a.state_tensors();
    let mut b = trainer(4, 6);
    b.restore_state(&state).unwrap();
    assert_eq!(b.step, 4);
    assert_eq!(b.log_tau[()], a.log_tau[()] as f32 as f64);
    assert_eq!(b.optimizer.step, a.optimizer.step);
}

#[test]
fn eval_mode_is_pure_and_unit_norm() {
    let set = fixture(0.1);
    let m = GaussianEncoder::<f64>::new(model_config(), 8).unwrap();
    for cloud in &set.clouds[..4] {
        let p = m.prepare(cloud).unwrap();
        let (a, _) = m.forward(&p, Mode::Eval).unwrap();
        let (b, _) = m.forward(&p, Mode::Eval).unwrap();
        assert_eq!(a, b);
        assert!((a.norm() - 1.0).abs() <= 1e-6);
    }
}

fn random_sequence(
    seed: u64,
    g: usize,
    width: usize,
    orderings: &[OrderingStrategy],
) -> TokenSequence<f64> {
    let mut r = rng::stream(seed, "tokens");
    let tokens: Array2<f64> =
        Array2::from_shape_simple_fn((g, width), || StandardNormal.sample(&mut r));
    let permutations = orderings
        .iter()
        .map(|_| {
            let mut p: Vec<usize> = (0..g).collect();
            p.shuffle(&mut r);
            p
        })
        .collect();
    TokenSequence {
        tokens,
        orderings: orderings.to_vec(),
        permutations,
    }
}

fn small_encoder() -> EncoderConfig {
    EncoderConfig {
        depth: 2,
        width: 8,
        heads: 2,
        clip_dim: 6,
    }
}

proptest! {
    #[test]
    fn output_is_unit_norm_for_any_parameters(seed in any::<u64>(), scale in 0.01f64..20.0, g in 1usize..9) {
        let config = small_encoder();
        let orderings = OrderingStrategy::ALL;
        let mut params = EncoderParams::<f64>::init(&config, &orderings, g, &mut rng::stream(seed, "init"));
        for mut p in params.params_mut() {
            p.value.mapv_inplace(|v| v * scale);
        }
        let seq = random_sequence(seed, g, 8, &orderings);
        let (e, _) = encode_tokens(&seq, &params, &config).unwrap();
        prop_assert!((e.norm() - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn positions_follow_serialized_slots(seed in any::<u64>(), g in 2usize..9) {
        let config = small_encoder();
        let orderings = [OrderingStrategy::ZOrder, OrderingStrategy::Xyz];
        let params = EncoderParams::<f64>::init(&config, &orderings, g, &mut rng::stream(seed, "init"));
        let seq = random_sequence(seed, g, 8, &orderings);
        let (a, _) = encode_tokens(&seq, &params, &config).unwrap();

        let mut shuffle: Vec<usize> = (0..g).collect();
        shuffle.shuffle(&mut rng::stream(seed, "shuffle"));
        let mut tokens = seq.tokens.clone();
        for (new, &old) in shuffle.iter().enumerate() {
            tokens.row_mut(new).assign(&seq.tokens.row(old));
        }
        let mut inverse = vec![0; g];
        for (new, &old) in shuffle.iter().enumerate() {
            inverse[old] = new;
        }
        let permutations = seq.permutations.iter().map(|p| p.iter().map(|&old| inverse[old]).collect()).collect();
        let moved = TokenSequence { tokens, orderings: seq.orderings.clone(), permutations };
        let (b, _) = encode_tokens(&moved, &params, &config).unwrap();
        for (x, y) in a.vector.iter().zip(b.vector.iter()) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }
}

//! Small models shared by the integration tests.
#![allow(dead_code)]

use deceptgan::autodiff::{Activation, NumArray, ParamSet};
use deceptgan::discriminator::{Discriminator, DiscriminatorConfig, KernelSpec, Role};
use deceptgan::generator::{Generator, GeneratorConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Replaces every parameter with uniform draws from `[-bound, bound]`.
pub fn randomize(params: &mut ParamSet, bound: f64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<_> = params.ids().collect();
    for id in ids {
        let shape = params.get(id).shape().to_vec();
        *params.get_mut(id) = NumArray::uniform(&shape, bound, &mut rng);
    }
}

/// Generator over `chi` emittable tokens (ids `1..=chi`, END included but
/// not terminating) with random O(1) weights.
pub fn toy_generator(chi: usize, seq_len: usize, seed: u64) -> Generator {
    let config = GeneratorConfig {
        vocab_size: chi + 1,
        embed_dim: 2,
        hidden: 3,
        seq_len,
        end_terminates: false,
        train_embeddings: false,
    };
    let mut g = Generator::zeros(config, NumArray::zeros(&[chi + 1, 2])).unwrap();
    randomize(g.params_mut(), 1.0, seed);
    g
}

pub fn toy_disc_config(vocab_size: usize, seq_len: usize) -> DiscriminatorConfig {
    DiscriminatorConfig {
        vocab_size,
        embed_dim: 2,
        seq_len,
        kernels: vec![KernelSpec { window: 1, filters: 2 }],
        conv_activation: Activation::Tanh,
        highway_activation: Activation::Tanh,
        dropout: 0.0,
        train_embeddings: true,
    }
}

/// Discriminator with random O(1) weights.
pub fn toy_discriminator(vocab_size: usize, seq_len: usize, role: Role, seed: u64) -> Discriminator {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = toy_disc_config(vocab_size, seq_len);
    let mut d = Discriminator::new(cfg, role, NumArray::zeros(&[vocab_size, 2]), &mut rng).unwrap();
    randomize(d.params_mut(), 1.0, seed + 1);
    d
}

/// Mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// The desk-scale split: 500 sequences per class from the pinned pair for
/// training (sample seed 7) and as many again for held-out evaluation
/// (sample seed 8). Returns the split and the model vocabulary size.
pub fn desk_split() -> (deceptgan::corpus::Fold<deceptgan::corpus::TokenSequence>, usize) {
    use deceptgan::corpus::{Fold, Vocabulary};
    use deceptgan::synth::{sample_corpus, SourcePair};
    let pair = SourcePair::desk();
    let len = pair.seq_len();
    let split = Fold {
        train: sample_corpus(&pair, 500, 7, len).unwrap(),
        test: sample_corpus(&pair, 500, 8, len).unwrap(),
    };
    (split, pair.vocab_size() + Vocabulary::NUM_SPECIAL)
}

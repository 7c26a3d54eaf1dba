//! Monte Carlo completions and action values against enumeration.

mod common;

use std::collections::BTreeMap;

use common::{mean_se, toy_discriminator, toy_generator};
use deceptgan::corpus::TokenSequence;
use deceptgan::discriminator::Role;
use deceptgan::generator::Generator;
use deceptgan::rollout::{action_value, episode_profile, mc_search, DiscriminatorReward, RolloutPolicy, Schedule};
use deceptgan::synth::{enumerate_completions, exact_action_value};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn peaked(chi: usize, len: usize, favourite: usize) -> Generator {
    let mut g = toy_generator(chi, len, 4);
    let bias = g.params_mut().get_mut(Generator::output_bias_id());
    for (k, b) in bias.data_mut().iter_mut().enumerate() {
        *b = if k + 1 == favourite { 40.0 } else { -40.0 };
    }
    g
}

#[test]
fn snapshots_are_isolated_from_later_updates() {
    let mut g = toy_generator(3, 4, 1);
    let policy = RolloutPolicy::snapshot(&g, 7);
    let again = RolloutPolicy::snapshot(policy.generator(), 8);
    g.params_mut().get_mut(Generator::output_bias_id()).data_mut().fill(5.0);
    assert_ne!(policy.generator().params(), g.params());
    assert_eq!(policy.generator().params(), again.generator().params());
    assert_eq!((policy.version(), again.version()), (7, 8));
}

#[test]
fn same_seed_gives_identical_completions() {
    let g = toy_generator(3, 5, 2);
    let (a, b) = (RolloutPolicy::snapshot(&g, 0), RolloutPolicy::snapshot(&g, 1));
    let (mut r1, mut r2) = (ChaCha8Rng::seed_from_u64(3), ChaCha8Rng::seed_from_u64(3));
    for _ in 0..100 {
        let x = mc_search(&[1, 3], &a, 100, &mut r1).unwrap();
        let y = mc_search(&[1, 3], &b, 100, &mut r2).unwrap();
        assert_eq!(x, y);
    }
}

#[test]
fn peaked_policy_completes_deterministically() {
    let policy = RolloutPolicy::snapshot(&peaked(3, 5, 2), 0);
    let out = mc_search(&[3], &policy, 50, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    for s in &out {
        assert_eq!(s.ids(), &[3, 2, 2, 2, 2]);
    }
}

#[test]
fn suffix_frequencies_match_enumeration() {
    let g = toy_generator(2, 3, 6);
    let policy = RolloutPolicy::snapshot(&g, 0);
    let n = 10_000;
    let out = mc_search(&[2], &policy, n, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let mut counts: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
    for s in &out {
        assert_eq!(s.ids()[0], 2);
        *counts.entry(s.ids().to_vec()).or_default() += 1;
    }
    let exact = enumerate_completions(&g, &[2]).unwrap();
    assert_eq!(exact.len(), 4);
    let total: f64 = exact.iter().map(|(_, p)| p).sum();
    assert!((total - 1.0).abs() < 1e-12);
    for (s, p) in exact {
        let freq = *counts.get(s.ids()).unwrap_or(&0) as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((freq - p).abs() <= 3.0 * se, "{:?}: {freq} vs {p}", s.ids());
    }
}

#[test]
fn zero_heads_give_unit_action_values() {
    let g = toy_generator(3, 4, 1);
    let policy = RolloutPolicy::snapshot(&g, 0);
    let (mut d, mut dp) = (toy_discriminator(4, 4, Role::D, 1), toy_discriminator(4, 4, Role::DPrime, 2));
    d.zero_head();
    dp.zero_head();
    let r = DiscriminatorReward {
        d: &d,
        d_prime: Some(&dp),
    };
    let reward = |s: &TokenSequence| r.reward(s);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert_eq!(action_value(&[1, 2, 3, 1], &reward, &policy, 16, &mut rng).unwrap(), 1.0);
    assert_eq!(action_value(&[1, 2], &reward, &policy, 16, &mut rng).unwrap(), 1.0);
}

#[test]
fn deterministic_policy_estimate_does_not_depend_on_rollout_count() {
    let policy = RolloutPolicy::snapshot(&peaked(3, 5, 1), 0);
    let d = toy_discriminator(4, 5, Role::D, 9);
    let r = DiscriminatorReward { d: &d, d_prime: None };
    let reward = |s: &TokenSequence| r.reward(s);
    let expected = d.score(&TokenSequence::from_generated(vec![2, 3, 1, 1, 1])).unwrap();
    for n in [1, 5, 50] {
        let v = action_value(&[2, 3], &reward, &policy, n, &mut ChaCha8Rng::seed_from_u64(n as u64)).unwrap();
        assert!((v - expected).abs() < 1e-12, "n={n}: {v} vs {expected}");
    }
}

#[test]
fn large_sample_estimate_is_within_one_hundredth() {
    let g = toy_generator(2, 2, 12);
    let policy = RolloutPolicy::snapshot(&g, 0);
    let (d, dp) = (toy_discriminator(3, 2, Role::D, 3), toy_discriminator(3, 2, Role::DPrime, 4));
    let r = DiscriminatorReward {
        d: &d,
        d_prime: Some(&dp),
    };
    let reward = |s: &TokenSequence| r.reward(s);
    for first in [1, 2] {
        let exact = exact_action_value(&[first], &g, reward).unwrap();
        let est = action_value(&[first], &reward, &policy, 50_000, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert!((est - exact).abs() < 0.01, "{est} vs {exact}");
    }
}

#[test]
fn estimator_variance_scales_inversely_with_rollouts() {
    let g = toy_generator(3, 4, 13);
    let policy = RolloutPolicy::snapshot(&g, 0);
    let d = toy_discriminator(4, 4, Role::D, 21);
    let r = DiscriminatorReward { d: &d, d_prime: None };
    let reward = |s: &TokenSequence| r.reward(s);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let var = |n: usize, rng: &mut ChaCha8Rng| {
        let xs: Vec<f64> = (0..200).map(|_| action_value(&[1], &reward, &policy, n, rng).unwrap()).collect();
        let (_, se) = mean_se(&xs);
        se * se * xs.len() as f64
    };
    let ratio = var(4, &mut rng) / var(64, &mut rng);
    assert!((8.0..=32.0).contains(&ratio), "variance ratio {ratio}");
}

#[test]
fn profile_is_identical_under_both_schedules() {
    let g = toy_generator(3, 6, 3);
    let policy = RolloutPolicy::snapshot(&g, 2);
    let (d, dp) = (toy_discriminator(4, 6, Role::D, 3), toy_discriminator(4, 6, Role::DPrime, 4));
    let r = DiscriminatorReward {
        d: &d,
        d_prime: Some(&dp),
    };
    let reward = |s: &TokenSequence| r.reward(s);
    let seq = TokenSequence::from_generated(vec![1, 2, 3, 3, 2, 1]);
    let a = episode_profile(&seq, &reward, &policy, 32, &mut ChaCha8Rng::seed_from_u64(1), Schedule::Sequential).unwrap();
    let b = episode_profile(&seq, &reward, &policy, 32, &mut ChaCha8Rng::seed_from_u64(1), Schedule::Parallel).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.policy_version, 2);
    assert_eq!(a.values.last().copied().unwrap(), reward(&seq).unwrap());
}

#[test]
fn bad_prefixes_are_rejected() {
    let policy = RolloutPolicy::snapshot(&toy_generator(3, 4, 1), 0);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(mc_search(&[], &policy, 4, &mut rng).is_err());
    assert!(mc_search(&[1, 1, 1, 1, 1], &policy, 4, &mut rng).is_err());
    assert!(mc_search(&[1], &policy, 0, &mut rng).is_err());
    assert!(mc_search(&[9], &policy, 4, &mut rng).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn completions_keep_the_prefix_and_values_stay_in_range(
        seed in 0u64..10_000,
        prefix in prop::collection::vec(1usize..4, 1..5),
    ) {
        let len = 5;
        let policy = RolloutPolicy::snapshot(&toy_generator(3, len, seed), 0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for s in mc_search(&prefix, &policy, 8, &mut rng).unwrap() {
            prop_assert_eq!(s.len(), len);
            prop_assert_eq!(&s.ids()[..prefix.len()], &prefix[..]);
            prop_assert!(s.ids().iter().all(|&t| (1..4).contains(&t)));
        }
        let (d, dp) = (toy_discriminator(4, len, Role::D, seed), toy_discriminator(4, len, Role::DPrime, seed + 1));
        let r = DiscriminatorReward { d: &d, d_prime: Some(&dp) };
        let reward = |s: &TokenSequence| r.reward(s);
        let v = action_value(&prefix, &reward, &policy, 8, &mut rng).unwrap();
        prop_assert!(v > 0.0 && v < r.upper_bound());
    }
}

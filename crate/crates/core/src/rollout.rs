//! Monte Carlo completion of partial sequences with a frozen copy of the
//! generator, and per-position action-value estimates built from them.
//!
//! Seeding: every call draws one base seed from the caller's rng; rollout
//! `i` then runs on stream `i` of a ChaCha generator keyed by that base.
//! Results therefore do not depend on whether rollouts run in parallel.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::corpus::TokenSequence;
use crate::discriminator::Discriminator;
use crate::error::{Error, Result};
use crate::generator::{Episode, Generator};

/// Immutable snapshot of the generator used for completions.
#[derive(Clone, Debug)]
pub struct RolloutPolicy {
    generator: Arc<Generator>,
    version: u64,
}

impl RolloutPolicy {
    /// Deep copy of `generator`; later updates to it are not seen here.
    pub fn snapshot(generator: &Generator, version: u64) -> Self {
        RolloutPolicy {
            generator: Arc::new(generator.clone()),
            version,
        }
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn seq_len(&self) -> usize {
        self.generator.seq_len()
    }
}

/// Whether the rollouts of one call run on the rayon pool.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Schedule {
    #[default]
    Sequential,
    Parallel,
}

/// Terminal reward: `D(S) + D′(S)`, or `D(S)` alone when there is no D′.
#[derive(Clone, Copy, Debug)]
pub struct DiscriminatorReward<'a> {
    pub d: &'a Discriminator,
    pub d_prime: Option<&'a Discriminator>,
}

impl DiscriminatorReward<'_> {
    pub fn reward(&self, seq: &TokenSequence) -> Result<f64> {
        let mut r = self.d.score(seq)?;
        if let Some(dp) = self.d_prime {
            r += dp.score(seq)?;
        }
        Ok(r)
    }

    /// Open upper bound of the reward range.
    pub fn upper_bound(&self) -> f64 {
        if self.d_prime.is_some() {
            2.0
        } else {
            1.0
        }
    }
}

/// Rng for rollout `index` under `base`.
pub fn stream_rng(base: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(index);
    rng
}

fn check_prefix(prefix: &[usize], policy: &RolloutPolicy) -> Result<()> {
    let len = policy.seq_len();
    if prefix.is_empty() || prefix.len() > len {
        return Err(Error::Contract(format!(
            "prefix length {} outside 1..={len}",
            prefix.len()
        )));
    }
    let vocab = policy.generator().config().vocab_size;
    if let Some(&bad) = prefix.iter().find(|&&t| t >= vocab) {
        return Err(Error::Dimension(format!("token {bad} outside vocabulary")));
    }
    Ok(())
}

fn completions_from_base(
    prefix: &[usize],
    policy: &RolloutPolicy,
    n: usize,
    base: u64,
    schedule: Schedule,
) -> Vec<TokenSequence> {
    let g = policy.generator();
    let start = g.cursor_after(prefix);
    let one = |i: usize| {
        let mut rng = stream_rng(base, i as u64);
        g.complete(start.clone(), prefix, &mut rng)
    };
    match schedule {
        Schedule::Sequential => (0..n).map(one).collect(),
        Schedule::Parallel => (0..n).into_par_iter().map(one).collect(),
    }
}

/// `n` full-length completions of `prefix`, each sampled from the policy.
pub fn mc_search<R: Rng + ?Sized>(
    prefix: &[usize],
    policy: &RolloutPolicy,
    n: usize,
    rng: &mut R,
) -> Result<Vec<TokenSequence>> {
    check_prefix(prefix, policy)?;
    if n == 0 {
        return Err(Error::Contract("at least one rollout required".into()));
    }
    let base = rng.next_u64();
    Ok(completions_from_base(prefix, policy, n, base, Schedule::Sequential))
}

fn mean_reward<F>(completions: &[TokenSequence], reward: &F, schedule: Schedule) -> Result<f64>
where
    F: Fn(&TokenSequence) -> Result<f64> + Sync,
{
    let values: Vec<f64> = match schedule {
        Schedule::Sequential => completions.iter().map(reward).collect::<Result<_>>()?,
        Schedule::Parallel => completions.par_iter().map(reward).collect::<Result<_>>()?,
    };
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

fn action_value_from_base<F>(
    prefix: &[usize],
    reward: &F,
    policy: &RolloutPolicy,
    n: usize,
    base: u64,
    schedule: Schedule,
) -> Result<f64>
where
    F: Fn(&TokenSequence) -> Result<f64> + Sync,
{
    let completions = completions_from_base(prefix, policy, n, base, schedule);
    mean_reward(&completions, reward, schedule)
}

/// Expected terminal reward after emitting the last token of `prefix`: the
/// mean over `n` completions when the prefix is partial, the reward of the
/// sequence itself (no sampling, no rng use) when it is complete.
pub fn action_value<F, R>(
    prefix: &[usize],
    reward: &F,
    policy: &RolloutPolicy,
    n: usize,
    rng: &mut R,
) -> Result<f64>
where
    F: Fn(&TokenSequence) -> Result<f64> + Sync,
    R: Rng + ?Sized,
{
    check_prefix(prefix, policy)?;
    if n == 0 {
        return Err(Error::Contract("at least one rollout required".into()));
    }
    if prefix.len() == policy.seq_len() {
        return reward(&TokenSequence::from_generated(prefix.to_vec()));
    }
    let base = rng.next_u64();
    action_value_from_base(prefix, reward, policy, n, base, Schedule::Sequential)
}

/// Action values `A_1..A_L` for one sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionValueProfile {
    pub sequence: TokenSequence,
    pub values: Vec<f64>,
    pub rollouts: usize,
    pub policy_version: u64,
}

impl ActionValueProfile {
    pub fn into_episode(self) -> Episode {
        Episode {
            sequence: self.sequence,
            action_values: self.values,
        }
    }
}

/// Computes `A_t` for every position. The `L − 1` partial positions draw
/// their base seeds from `rng` in order, so the schedule only affects
/// speed. Uses `(L − 1)·n + 1` reward evaluations.
pub fn episode_profile<F, R>(
    seq: &TokenSequence,
    reward: &F,
    policy: &RolloutPolicy,
    n: usize,
    rng: &mut R,
    schedule: Schedule,
) -> Result<ActionValueProfile>
where
    F: Fn(&TokenSequence) -> Result<f64> + Sync,
    R: Rng + ?Sized,
{
    let len = policy.seq_len();
    if seq.len() != len {
        return Err(Error::Dimension(format!(
            "sequence length {} vs policy length {len}",
            seq.len()
        )));
    }
    if n == 0 {
        return Err(Error::Contract("at least one rollout required".into()));
    }
    check_prefix(seq.ids(), policy)?;
    let bases: Vec<u64> = (1..len).map(|_| rng.next_u64()).collect();
    let ids = seq.ids();
    let partial = |t: usize| action_value_from_base(&ids[..t], reward, policy, n, bases[t - 1], schedule);
    let mut values: Vec<f64> = match schedule {
        Schedule::Sequential => (1..len).map(partial).collect::<Result<_>>()?,
        Schedule::Parallel => (1..len).into_par_iter().map(partial).collect::<Result<_>>()?,
    };
    values.push(reward(seq)?);
    Ok(ActionValueProfile {
        sequence: seq.clone(),
        values,
        rollouts: n,
        policy_version: policy.version(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::NumArray;
    use crate::generator::GeneratorConfig;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn policy(len: usize, seed: u64) -> RolloutPolicy {
        let cfg = GeneratorConfig {
            vocab_size: 5,
            embed_dim: 3,
            hidden: 4,
            seq_len: len,
            end_terminates: false,
            train_embeddings: false,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let emb = NumArray::uniform(&[5, 3], 0.5, &mut rng);
        RolloutPolicy::snapshot(&Generator::new(cfg, emb, &mut rng).unwrap(), 0)
    }

    fn toy_reward(seq: &TokenSequence) -> Result<f64> {
        Ok(0.1 + 0.2 * (seq.ids().iter().filter(|&&t| t == 3).count() as f64) / seq.len() as f64)
    }

    #[test]
    fn snapshot_is_isolated() {
        let cfg = GeneratorConfig {
            vocab_size: 5,
            embed_dim: 3,
            hidden: 4,
            seq_len: 4,
            end_terminates: false,
            train_embeddings: false,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut g = Generator::new(cfg, NumArray::zeros(&[5, 3]), &mut rng).unwrap();
        let snap = RolloutPolicy::snapshot(&g, 3);
        let before = snap.generator().clone();
        g.output_bias_mut().data_mut()[0] = 50.0;
        assert_eq!(snap.generator(), &before);
        assert_ne!(snap.generator(), &g);
        assert_eq!(snap.version(), 3);
    }

    #[test]
    fn completions_extend_prefix() {
        let p = policy(6, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let prefix = [3, 4];
        let outs = mc_search(&prefix, &p, 20, &mut rng).unwrap();
        assert_eq!(outs.len(), 20);
        assert!(outs.iter().all(|s| s.len() == 6 && s.ids()[..2] == prefix));
    }

    #[test]
    fn full_prefix_is_returned_unchanged() {
        let p = policy(3, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let outs = mc_search(&[2, 3, 4], &p, 5, &mut rng).unwrap();
        assert!(outs.iter().all(|s| s.ids() == [2, 3, 4]));
    }

    #[test]
    fn prefix_bounds_are_contract_errors() {
        let p = policy(3, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(mc_search(&[1, 2, 3, 4], &p, 2, &mut rng), Err(Error::Contract(_))));
        assert!(matches!(mc_search(&[], &p, 2, &mut rng), Err(Error::Contract(_))));
        assert!(matches!(mc_search(&[2], &p, 0, &mut rng), Err(Error::Contract(_))));
    }

    #[test]
    fn terminal_action_value_uses_no_randomness() {
        let p = policy(3, 5);
        let mut a = ChaCha8Rng::seed_from_u64(9);
        let b = a.clone();
        let v = action_value(&[3, 3, 4], &toy_reward, &p, 7, &mut a).unwrap();
        assert_eq!(v, toy_reward(&TokenSequence::from_generated(vec![3, 3, 4])).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn profile_counts_reward_evaluations() {
        let p = policy(5, 6);
        let count = AtomicUsize::new(0);
        let counting = |s: &TokenSequence| {
            count.fetch_add(1, Ordering::Relaxed);
            toy_reward(s)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let seq = p.generator().sample_sequence(&mut rng);
        let prof = episode_profile(&seq, &counting, &p, 8, &mut rng, Schedule::Sequential).unwrap();
        assert_eq!(count.load(Ordering::Relaxed), 4 * 8 + 1);
        assert_eq!(prof.values.len(), 5);
    }

    #[test]
    fn parallel_and_sequential_profiles_match() {
        let p = policy(6, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let seq = p.generator().sample_sequence(&mut rng);
        let mut r1 = ChaCha8Rng::seed_from_u64(11);
        let mut r2 = ChaCha8Rng::seed_from_u64(11);
        let a = episode_profile(&seq, &toy_reward, &p, 16, &mut r1, Schedule::Sequential).unwrap();
        let b = episode_profile(&seq, &toy_reward, &p, 16, &mut r2, Schedule::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn doubling_rollouts_keeps_terminal_entry() {
        let p = policy(4, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let seq = p.generator().sample_sequence(&mut rng);
        let a = episode_profile(&seq, &toy_reward, &p, 4, &mut rng, Schedule::Sequential).unwrap();
        let b = episode_profile(&seq, &toy_reward, &p, 8, &mut rng, Schedule::Sequential).unwrap();
        assert_eq!(a.values[3].to_bits(), b.values[3].to_bits());
    }

    #[test]
    fn single_position_profile_is_direct() {
        let p = policy(1, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let seq = TokenSequence::from_generated(vec![3]);
        let prof = episode_profile(&seq, &toy_reward, &p, 16, &mut rng, Schedule::Sequential).unwrap();
        assert_eq!(prof.values, vec![toy_reward(&seq).unwrap()]);
    }
}

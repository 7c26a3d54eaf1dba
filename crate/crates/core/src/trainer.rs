//! Training schedule: pretraining of the generator and both
//! discriminators, then alternating policy-gradient (g) and discriminator
//! (d) steps until D's held-out accuracy stabilizes.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Activation, NumArray};
use crate::checkpoint;
use crate::corpus::{EmbeddingTable, Fold, TokenSequence, Vocabulary};
use crate::discriminator::{Discriminator, DiscriminatorConfig, KernelSpec, Role};
use crate::error::{Error, Result};
use crate::generator::{Episode, Generator, GeneratorConfig};
use crate::optim::Adam;
use crate::rollout::{episode_profile, DiscriminatorReward, RolloutPolicy, Schedule};

/// Which discriminators take part and what the generator imitates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Generator imitates deceptive reviews; reward `D + D′`.
    #[default]
    Full,
    /// Single discriminator; generator pretrained on truthful reviews.
    DOnlyTruthfulPretrain,
    /// Single discriminator; generator pretrained on deceptive reviews.
    DOnlyDeceptivePretrain,
}

impl Mode {
    pub const ALL: [Mode; 3] = [
        Mode::Full,
        Mode::DOnlyTruthfulPretrain,
        Mode::DOnlyDeceptivePretrain,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Full => "full",
            Mode::DOnlyTruthfulPretrain => "d-only-truthful-pretrain",
            Mode::DOnlyDeceptivePretrain => "d-only-deceptive-pretrain",
        }
    }

    pub fn uses_d_prime(self) -> bool {
        self == Mode::Full
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Contract(format!("unknown mode '{s}'")))
    }
}

/// Every training knob, as a flat JSON object. Missing fields take the
/// full-scale defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Sequence length L.
    pub seq_len: usize,
    /// Monte Carlo completions N per action value.
    pub rollouts: usize,
    pub g_steps: usize,
    pub d_steps: usize,
    /// Policy ascent rate λ.
    pub policy_lr: f64,
    pub clip_norm: f64,
    /// Episodes B per g-step.
    pub episodes: usize,
    /// Subtract the batch-mean action value before the policy update.
    pub reward_baseline: bool,
    /// Refresh the rollout policy after every g-step instead of once per
    /// iteration.
    pub refresh_rollout_each_g_step: bool,
    pub gen_pretrain_steps: usize,
    pub d_pretrain_steps: usize,
    pub dprime_pretrain_steps: usize,
    pub mle_lr: f64,
    pub mle_batch: usize,
    pub disc_lr: f64,
    pub disc_batch: usize,
    /// Balanced passes per discriminator per d-step.
    pub d_epochs: usize,
    pub embed_dim: usize,
    pub hidden: usize,
    pub windows: Vec<usize>,
    pub filters: usize,
    pub dropout: f64,
    pub train_embeddings: bool,
    pub end_terminates: bool,
    pub folds: usize,
    pub seed: u64,
    /// Convergence: population std of D's last `convergence_window`
    /// held-out accuracies below `convergence_tol`.
    pub convergence_window: usize,
    pub convergence_tol: f64,
    pub max_iterations: usize,
    pub mode: Mode,
    /// Record elapsed seconds; when off the column is zero so histories are
    /// byte-for-byte reproducible.
    pub wall_clock: bool,
    /// Run rollouts on the rayon pool (results are identical either way).
    pub parallel_rollouts: bool,
    /// Whitespace-separated `token v1 … vE` file; random vectors otherwise.
    pub embeddings_path: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig::full_scale()
    }
}

impl TrainConfig {
    /// Settings for the 685-review hotel corpus.
    pub fn full_scale() -> Self {
        TrainConfig {
            seq_len: 200,
            rollouts: 16,
            g_steps: 1,
            d_steps: 6,
            policy_lr: 0.01,
            clip_norm: 5.0,
            episodes: 16,
            reward_baseline: false,
            refresh_rollout_each_g_step: false,
            gen_pretrain_steps: 120,
            d_pretrain_steps: 50,
            dprime_pretrain_steps: 50,
            mle_lr: 1e-4,
            mle_batch: 32,
            disc_lr: 1e-4,
            disc_batch: 64,
            d_epochs: 1,
            embed_dim: 200,
            hidden: 256,
            windows: vec![1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 15, 20],
            filters: 100,
            dropout: 0.25,
            train_embeddings: false,
            end_terminates: true,
            folds: 5,
            seed: 0,
            convergence_window: 20,
            convergence_tol: 0.005,
            max_iterations: 200,
            mode: Mode::Full,
            wall_clock: true,
            parallel_rollouts: true,
            embeddings_path: None,
        }
    }

    /// Small synthetic setting that trains on one core in minutes.
    pub fn desk() -> Self {
        TrainConfig {
            seq_len: 16,
            gen_pretrain_steps: 60,
            mle_lr: 1e-3,
            disc_batch: 32,
            embed_dim: 16,
            hidden: 64,
            windows: vec![2, 3, 4],
            filters: 32,
            train_embeddings: true,
            folds: 3,
            convergence_window: 10,
            max_iterations: 15,
            wall_clock: false,
            parallel_rollouts: false,
            ..TrainConfig::full_scale()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("seq_len", self.seq_len),
            ("rollouts", self.rollouts),
            ("g_steps", self.g_steps),
            ("d_steps", self.d_steps),
            ("episodes", self.episodes),
            ("mle_batch", self.mle_batch),
            ("disc_batch", self.disc_batch),
            ("d_epochs", self.d_epochs),
            ("embed_dim", self.embed_dim),
            ("hidden", self.hidden),
            ("filters", self.filters),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Contract(format!("{name} must be at least 1")));
        }
        if self.convergence_tol.is_nan() || self.convergence_tol <= 0.0 {
            return Err(Error::Contract("convergence_tol must be positive".into()));
        }
        if self.convergence_window < 2 {
            return Err(Error::Contract("convergence_window must be at least 2".into()));
        }
        if self.folds < 2 {
            return Err(Error::Contract("folds must be at least 2".into()));
        }
        if self.windows.is_empty() || self.windows.iter().any(|&w| w == 0 || w > self.seq_len) {
            return Err(Error::Contract(format!(
                "windows {:?} must be nonempty and within 1..={}",
                self.windows, self.seq_len
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Contract("dropout must lie in [0, 1)".into()));
        }
        for (name, v) in [
            ("policy_lr", self.policy_lr),
            ("clip_norm", self.clip_norm),
            ("mle_lr", self.mle_lr),
            ("disc_lr", self.disc_lr),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Contract(format!("{name} must be finite and nonnegative")));
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: TrainConfig = serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn generator_config(&self, vocab_size: usize) -> GeneratorConfig {
        GeneratorConfig {
            vocab_size,
            embed_dim: self.embed_dim,
            hidden: self.hidden,
            seq_len: self.seq_len,
            end_terminates: self.end_terminates,
            train_embeddings: self.train_embeddings,
        }
    }

    pub fn discriminator_config(&self, vocab_size: usize) -> DiscriminatorConfig {
        DiscriminatorConfig {
            vocab_size,
            embed_dim: self.embed_dim,
            seq_len: self.seq_len,
            kernels: self
                .windows
                .iter()
                .map(|&window| KernelSpec {
                    window,
                    filters: self.filters,
                })
                .collect(),
            conv_activation: Activation::Tanh,
            highway_activation: Activation::Tanh,
            dropout: self.dropout,
            train_embeddings: self.train_embeddings,
        }
    }

    fn schedule(&self) -> Schedule {
        if self.parallel_rollouts {
            Schedule::Parallel
        } else {
            Schedule::Sequential
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Pretrain,
    Adversarial,
}

/// One evaluation. Fields that were not measured at this step are empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub step: usize,
    pub phase: Phase,
    pub d_acc: Option<f64>,
    pub dprime_acc: Option<f64>,
    pub d_loss: Option<f64>,
    pub dprime_loss: Option<f64>,
    pub gen_reward: Option<f64>,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub records: Vec<HistoryRecord>,
}

impl TrainingHistory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Held-out D accuracies in order, with their steps.
    pub fn d_accuracies(&self, phase: Option<Phase>) -> Vec<(usize, f64)> {
        self.records
            .iter()
            .filter(|r| phase.is_none_or(|p| r.phase == p))
            .filter_map(|r| r.d_acc.map(|a| (r.step, a)))
            .collect()
    }
}

/// Independent rng for one component of a run.
fn component_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

mod stream {
    pub const EMBEDDING: u64 = 1;
    pub const GEN_INIT: u64 = 2;
    pub const D_INIT: u64 = 3;
    pub const DPRIME_INIT: u64 = 4;
    pub const GEN_MLE: u64 = 5;
    pub const D_PRETRAIN: u64 = 6;
    pub const DPRIME_PRETRAIN: u64 = 7;
    pub const ADVERSARIAL: u64 = 8;
    pub const EVALUATION: u64 = 9;
}

/// Optional side outputs of a run.
#[derive(Clone, Debug, Default)]
pub struct TrainOptions {
    /// Receives `iter_NNNN_d.ckpt` after every adversarial iteration, the
    /// best D as `best_d.ckpt` and a `best` file naming its step.
    pub checkpoint_dir: Option<PathBuf>,
    pub vocabulary: Option<Vocabulary>,
}

/// Counters for one adversarial iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationStats {
    pub episodes: usize,
    pub policy_updates: usize,
    pub discriminator_phases: usize,
    /// Size of each generated pool, one per d-step.
    pub generated_pool_sizes: Vec<usize>,
    /// Smallest and largest action value fed to the policy update.
    pub action_value_range: (f64, f64),
    pub mean_reward: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// D at its best held-out accuracy over the whole history.
    pub best_d: Discriminator,
    pub best_accuracy: f64,
    pub best_step: usize,
    /// Best held-out D accuracy among adversarial evaluations, if any.
    pub best_adversarial: Option<(usize, f64)>,
    /// D's held-out accuracy at the end of pretraining.
    pub pretrain_plateau: f64,
    pub converged: bool,
    pub iterations: usize,
    pub history: TrainingHistory,
    pub generator: Generator,
    pub d: Discriminator,
    pub d_prime: Option<Discriminator>,
    /// Mean generator NLL before and after each MLE pass.
    pub mle_curve: Vec<f64>,
}

/// Training state for one run on one split.
pub struct Trainer {
    config: TrainConfig,
    options: TrainOptions,
    train: Fold<TokenSequence>,
    generator: Generator,
    d: Discriminator,
    d_prime: Option<Discriminator>,
    d_opt: Adam,
    dprime_opt: Adam,
    rollout: RolloutPolicy,
    adv_rng: ChaCha8Rng,
    eval_rng: ChaCha8Rng,
    history: TrainingHistory,
    best: Option<(usize, f64, Discriminator)>,
    best_adversarial: Option<(usize, f64)>,
    pretrain_plateau: Option<f64>,
    mle_curve: Vec<f64>,
    iterations: usize,
    started: Instant,
}

fn diverged(phase: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::NumericDomain(_) | Error::InfiniteLoss(_) => Error::Diverged {
            phase: phase.to_string(),
            step: 0,
        },
        other => other,
    }
}

impl Trainer {
    /// Builds fresh models. `embedding`, when given, initializes every
    /// model's embedding table; otherwise a random table is drawn.
    pub fn new(
        config: TrainConfig,
        split: Fold<TokenSequence>,
        vocab_size: usize,
        embedding: Option<NumArray>,
        options: TrainOptions,
    ) -> Result<Self> {
        config.validate()?;
        split.train.require_both()?;
        split.test.require_both()?;
        let seed = config.seed;
        let embedding = match embedding {
            Some(e) => {
                if e.shape() != [vocab_size, config.embed_dim] {
                    return Err(Error::Dimension(format!(
                        "embedding {:?} for vocab {vocab_size} x dim {}",
                        e.shape(),
                        config.embed_dim
                    )));
                }
                e
            }
            None => {
                let table_seed = component_rng(seed, stream::EMBEDDING).next_u64();
                EmbeddingTable::random(vocab_size, config.embed_dim, table_seed).into_array()
            }
        };
        let generator = Generator::new(
            config.generator_config(vocab_size),
            embedding.clone(),
            &mut component_rng(seed, stream::GEN_INIT),
        )?;
        let dcfg = config.discriminator_config(vocab_size);
        let d = Discriminator::new(dcfg.clone(), Role::D, embedding.clone(), &mut component_rng(seed, stream::D_INIT))?;
        let d_prime = if config.mode.uses_d_prime() {
            Some(Discriminator::new(
                dcfg,
                Role::DPrime,
                embedding,
                &mut component_rng(seed, stream::DPRIME_INIT),
            )?)
        } else {
            None
        };
        for s in split.train.labeled().chain(split.test.labeled()).map(|(s, _)| s) {
            if s.len() != config.seq_len {
                return Err(Error::Dimension(format!(
                    "sequence length {} vs configured length {}",
                    s.len(),
                    config.seq_len
                )));
            }
        }
        let rollout = RolloutPolicy::snapshot(&generator, 0);
        Ok(Trainer {
            d_opt: Adam::new(config.disc_lr),
            dprime_opt: Adam::new(config.disc_lr),
            adv_rng: component_rng(seed, stream::ADVERSARIAL),
            eval_rng: component_rng(seed, stream::EVALUATION),
            config,
            options,
            train: split,
            generator,
            d,
            d_prime,
            rollout,
            history: TrainingHistory::default(),
            best: None,
            best_adversarial: None,
            pretrain_plateau: None,
            mle_curve: Vec::new(),
            iterations: 0,
            started: Instant::now(),
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    pub fn generator_mut(&mut self) -> &mut Generator {
        &mut self.generator
    }

    pub fn d(&self) -> &Discriminator {
        &self.d
    }

    pub fn d_prime(&self) -> Option<&Discriminator> {
        self.d_prime.as_ref()
    }

    pub fn rollout_policy(&self) -> &RolloutPolicy {
        &self.rollout
    }

    pub fn history(&self) -> &TrainingHistory {
        &self.history
    }

    /// Mean generator NLL before and after each MLE pass.
    pub fn mle_curve(&self) -> &[f64] {
        &self.mle_curve
    }

    fn seconds(&self) -> f64 {
        if self.config.wall_clock {
            self.started.elapsed().as_secs_f64()
        } else {
            0.0
        }
    }

    fn push_record(&mut self, mut record: HistoryRecord) {
        record.step = self.history.len() + 1;
        record.seconds = self.seconds();
        if let Some(acc) = record.d_acc {
            if self.best.as_ref().is_none_or(|(_, best, _)| acc > *best) {
                self.best = Some((record.step, acc, self.d.clone()));
            }
            if record.phase == Phase::Adversarial
                && self.best_adversarial.is_none_or(|(_, best)| acc > best)
            {
                self.best_adversarial = Some((record.step, acc));
            }
        }
        self.history.records.push(record);
    }

    fn empty_record(phase: Phase) -> HistoryRecord {
        HistoryRecord {
            step: 0,
            phase,
            d_acc: None,
            dprime_acc: None,
            d_loss: None,
            dprime_loss: None,
            gen_reward: None,
            seconds: 0.0,
        }
    }

    /// Held-out D accuracy: test truthful vs. test deceptive.
    pub fn evaluate_d(&self) -> Result<f64> {
        self.d.accuracy(&self.train.test.truthful, &self.train.test.deceptive)
    }

    /// Held-out D′ accuracy: test deceptive vs. as many fresh samples.
    fn evaluate_d_prime(&mut self) -> Result<Option<f64>> {
        let Some(dp) = &self.d_prime else {
            return Ok(None);
        };
        let n = self.train.test.deceptive.len();
        let generated: Vec<TokenSequence> = (0..n)
            .map(|_| self.generator.sample_sequence(&mut self.eval_rng))
            .collect();
        dp.accuracy(&self.train.test.deceptive, &generated).map(Some)
    }

    fn sample_pool(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<TokenSequence> {
        (0..n).map(|_| self.generator.sample_sequence(rng)).collect()
    }

    /// MLE for G, then D on truthful vs. deceptive, then (full mode) D′ on
    /// deceptive vs. generated. Each discriminator epoch is evaluated.
    pub fn pretrain_all(&mut self) -> Result<()> {
        let cfg = self.config.clone();
        let imitate = match cfg.mode {
            Mode::DOnlyTruthfulPretrain => &self.train.train.truthful,
            _ => &self.train.train.deceptive,
        }
        .clone();
        self.mle_curve = self.generator.mle_pretrain(
            &imitate,
            cfg.gen_pretrain_steps,
            cfg.mle_lr,
            cfg.mle_batch,
            &mut component_rng(cfg.seed, stream::GEN_MLE),
        )?;

        let mut rng = component_rng(cfg.seed, stream::D_PRETRAIN);
        for step in 0..cfg.d_pretrain_steps {
            let loss = self
                .d
                .train_epoch(
                    &self.train.train.truthful,
                    &self.train.train.deceptive,
                    cfg.disc_batch,
                    &mut self.d_opt,
                    &mut rng,
                )
                .map_err(|e| match e {
                    Error::NumericDomain(_) => Error::Diverged {
                        phase: "D pretraining".into(),
                        step: step + 1,
                    },
                    other => other,
                })?;
            let acc = self.evaluate_d()?;
            self.push_record(HistoryRecord {
                d_acc: Some(acc),
                d_loss: Some(loss),
                ..Self::empty_record(Phase::Pretrain)
            });
        }
        self.pretrain_plateau = Some(self.evaluate_d()?);
        if self.best.is_none() {
            let acc = self.evaluate_d()?;
            self.push_record(HistoryRecord {
                d_acc: Some(acc),
                ..Self::empty_record(Phase::Pretrain)
            });
        }

        if self.d_prime.is_some() {
            let mut rng = component_rng(cfg.seed, stream::DPRIME_PRETRAIN);
            let generated = self.sample_pool(self.train.train.deceptive.len(), &mut rng);
            for step in 0..cfg.dprime_pretrain_steps {
                let dp = self.d_prime.as_mut().expect("full mode has D′");
                let loss = dp
                    .train_epoch(
                        &self.train.train.deceptive,
                        &generated,
                        cfg.disc_batch,
                        &mut self.dprime_opt,
                        &mut rng,
                    )
                    .map_err(|e| match e {
                        Error::NumericDomain(_) => Error::Diverged {
                            phase: "D′ pretraining".into(),
                            step: step + 1,
                        },
                        other => other,
                    })?;
                let acc = self.evaluate_d_prime()?;
                self.push_record(HistoryRecord {
                    dprime_acc: acc,
                    dprime_loss: Some(loss),
                    ..Self::empty_record(Phase::Pretrain)
                });
            }
        }
        self.rollout = RolloutPolicy::snapshot(&self.generator, 0);
        Ok(())
    }

    fn sample_episodes(&mut self) -> Result<Vec<Episode>> {
        let cfg = &self.config;
        let sequences: Vec<TokenSequence> = (0..cfg.episodes)
            .map(|_| self.generator.sample_sequence(&mut self.adv_rng))
            .collect();
        let reward = DiscriminatorReward {
            d: &self.d,
            d_prime: self.d_prime.as_ref(),
        };
        let reward_fn = |s: &TokenSequence| reward.reward(s);
        sequences
            .iter()
            .map(|s| {
                episode_profile(s, &reward_fn, &self.rollout, cfg.rollouts, &mut self.adv_rng, cfg.schedule())
                    .map(|p| p.into_episode())
            })
            .collect()
    }

    /// `g` policy updates followed by `d` discriminator steps, then the
    /// rollout policy is refreshed and D is evaluated.
    pub fn adversarial_iteration(&mut self) -> Result<IterationStats> {
        let cfg = self.config.clone();
        let mut stats = IterationStats {
            episodes: 0,
            policy_updates: 0,
            discriminator_phases: 0,
            generated_pool_sizes: Vec::new(),
            action_value_range: (f64::INFINITY, f64::NEG_INFINITY),
            mean_reward: 0.0,
        };
        let mut reward_total = 0.0;
        for _ in 0..cfg.g_steps {
            let mut episodes = self.sample_episodes()?;
            stats.episodes += episodes.len();
            for e in &episodes {
                reward_total += e.action_values.last().copied().unwrap_or(0.0);
                for &a in &e.action_values {
                    stats.action_value_range.0 = stats.action_value_range.0.min(a);
                    stats.action_value_range.1 = stats.action_value_range.1.max(a);
                }
            }
            if cfg.reward_baseline {
                let all: Vec<f64> = episodes.iter().flat_map(|e| e.action_values.iter().copied()).collect();
                let mean = all.iter().sum::<f64>() / all.len() as f64;
                for e in &mut episodes {
                    e.action_values.iter_mut().for_each(|a| *a -= mean);
                }
            }
            self.generator
                .policy_gradient_update(&episodes, cfg.policy_lr, cfg.clip_norm)
                .map_err(diverged("generator policy gradient"))?;
            stats.policy_updates += 1;
            if cfg.refresh_rollout_each_g_step {
                self.rollout = RolloutPolicy::snapshot(&self.generator, self.rollout.version() + 1);
            }
        }
        stats.mean_reward = reward_total / stats.episodes as f64;

        let mut d_loss = 0.0;
        let mut dprime_loss = 0.0;
        for _ in 0..cfg.d_steps {
            let mut rng = self.adv_rng.clone();
            let generated = self.sample_pool(self.train.train.truthful.len(), &mut rng);
            stats.generated_pool_sizes.push(generated.len());
            let mut negatives = self.train.train.deceptive.clone();
            negatives.extend(generated.iter().cloned());
            for _ in 0..cfg.d_epochs {
                d_loss = self
                    .d
                    .train_epoch(&self.train.train.truthful, &negatives, cfg.disc_batch, &mut self.d_opt, &mut rng)
                    .map_err(diverged("D adversarial training"))?;
            }
            stats.discriminator_phases += 1;
            if let Some(dp) = self.d_prime.as_mut() {
                for _ in 0..cfg.d_epochs {
                    dprime_loss = dp
                        .train_epoch(&self.train.train.deceptive, &generated, cfg.disc_batch, &mut self.dprime_opt, &mut rng)
                        .map_err(diverged("D′ adversarial training"))?;
                }
                stats.discriminator_phases += 1;
            }
            self.adv_rng = rng;
        }
        if !cfg.refresh_rollout_each_g_step {
            self.rollout = RolloutPolicy::snapshot(&self.generator, self.rollout.version() + 1);
        }
        self.iterations += 1;

        let d_acc = self.evaluate_d()?;
        let dprime_acc = self.evaluate_d_prime()?;
        self.push_record(HistoryRecord {
            d_acc: Some(d_acc),
            dprime_acc,
            d_loss: Some(d_loss),
            dprime_loss: self.d_prime.as_ref().map(|_| dprime_loss),
            gen_reward: Some(stats.mean_reward),
            ..Self::empty_record(Phase::Adversarial)
        });
        self.write_iteration_checkpoint()?;
        Ok(stats)
    }

    fn write_iteration_checkpoint(&self) -> Result<()> {
        let (Some(dir), Some(vocab)) = (&self.options.checkpoint_dir, &self.options.vocabulary) else {
            return Ok(());
        };
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        checkpoint::save_discriminator(&dir.join(format!("iter_{:04}_d.ckpt", self.iterations)), &self.d, vocab)?;
        if let Some((step, acc, best)) = &self.best {
            checkpoint::save_discriminator(&dir.join("best_d.ckpt"), best, vocab)?;
            checkpoint::write_atomic(
                &dir.join("best"),
                format!("best_d.ckpt step={step} d_acc={acc}\n").as_bytes(),
            )?;
        }
        Ok(())
    }

    /// Whether D's held-out accuracy has stabilized.
    pub fn converged(&self) -> bool {
        let accs: Vec<f64> = self
            .history
            .d_accuracies(Some(Phase::Adversarial))
            .into_iter()
            .map(|(_, a)| a)
            .collect();
        let w = self.config.convergence_window;
        if accs.len() < w {
            return false;
        }
        let tail = &accs[accs.len() - w..];
        let mean = tail.iter().sum::<f64>() / w as f64;
        let var = tail.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / w as f64;
        var.sqrt() < self.config.convergence_tol
    }

    /// Adversarial iterations until convergence or the iteration cap.
    pub fn run_adversarial(&mut self) -> Result<bool> {
        while self.iterations < self.config.max_iterations {
            self.adversarial_iteration()?;
            if self.converged() {
                return Ok(true);
            }
        }
        Ok(false)
    }

    pub fn finish(self, converged: bool) -> TrainOutcome {
        let (best_step, best_accuracy, best_d) = self.best.expect("pretraining records an evaluation");
        TrainOutcome {
            best_d,
            best_accuracy,
            best_step,
            best_adversarial: self.best_adversarial,
            pretrain_plateau: self.pretrain_plateau.unwrap_or(f64::NAN),
            converged,
            iterations: self.iterations,
            history: self.history,
            generator: self.generator,
            d: self.d,
            d_prime: self.d_prime,
            mle_curve: self.mle_curve,
        }
    }
}

/// Pretraining plus adversarial training on one split.
pub fn train(
    config: &TrainConfig,
    split: Fold<TokenSequence>,
    vocab_size: usize,
    embedding: Option<NumArray>,
    options: TrainOptions,
) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(config.clone(), split, vocab_size, embedding, options)?;
    trainer.pretrain_all()?;
    let converged = trainer.run_adversarial()?;
    Ok(trainer.finish(converged))
}

/// Single-discriminator variant; `config.mode` must not be `Full`.
pub fn train_ablation(
    config: &TrainConfig,
    split: Fold<TokenSequence>,
    vocab_size: usize,
    embedding: Option<NumArray>,
    options: TrainOptions,
) -> Result<TrainOutcome> {
    if config.mode == Mode::Full {
        return Err(Error::Contract("ablation requires a single-discriminator mode".into()));
    }
    train(config, split, vocab_size, embedding, options)
}

/// Runs every `(g, d)` pair in `values × values` with otherwise identical
/// settings.
pub fn sweep_gd(
    config: &TrainConfig,
    split: &Fold<TokenSequence>,
    vocab_size: usize,
    embedding: Option<&NumArray>,
    values: &[usize],
) -> Result<Vec<((usize, usize), TrainOutcome)>> {
    let mut out = Vec::new();
    for &g in values {
        for &d in values {
            let cfg = TrainConfig {
                g_steps: g,
                d_steps: d,
                ..config.clone()
            };
            let outcome = train(&cfg, split.clone(), vocab_size, embedding.cloned(), TrainOptions::default())?;
            out.push(((g, d), outcome));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::ReviewSet;
    use crate::synth::{sample_corpus, SourcePair};

    fn tiny_config() -> TrainConfig {
        TrainConfig {
            seq_len: 6,
            rollouts: 2,
            episodes: 3,
            d_steps: 2,
            gen_pretrain_steps: 2,
            d_pretrain_steps: 2,
            dprime_pretrain_steps: 2,
            disc_batch: 8,
            embed_dim: 4,
            hidden: 5,
            windows: vec![2, 3],
            filters: 3,
            max_iterations: 2,
            convergence_window: 2,
            ..TrainConfig::desk()
        }
    }

    fn tiny_split() -> Fold<TokenSequence> {
        let pair = SourcePair::blended(4, 6, 2.0, 0.5, 1);
        let all = sample_corpus(&pair, 24, 2, 6).unwrap();
        let (tt, te) = all.truthful.split_at(16);
        let (dt, de) = all.deceptive.split_at(16);
        Fold {
            train: ReviewSet::new(tt.to_vec(), dt.to_vec()),
            test: ReviewSet::new(te.to_vec(), de.to_vec()),
        }
    }

    #[test]
    fn presets_are_valid_and_round_trip() {
        for cfg in [TrainConfig::full_scale(), TrainConfig::desk()] {
            cfg.validate().unwrap();
            let json = serde_json::to_string(&cfg).unwrap();
            assert_eq!(serde_json::from_str::<TrainConfig>(&json).unwrap(), cfg);
        }
        let partial: TrainConfig = serde_json::from_str(r#"{"g_steps": 3, "mode": "d-only-truthful-pretrain"}"#).unwrap();
        assert_eq!(partial.g_steps, 3);
        assert_eq!(partial.mode, Mode::DOnlyTruthfulPretrain);
        assert!(serde_json::from_str::<TrainConfig>(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        for cfg in [
            TrainConfig { g_steps: 0, ..tiny_config() },
            TrainConfig { rollouts: 0, ..tiny_config() },
            TrainConfig { convergence_tol: 0.0, ..tiny_config() },
            TrainConfig { windows: vec![7], ..tiny_config() },
        ] {
            assert!(matches!(cfg.validate(), Err(Error::Contract(_))));
        }
    }

    #[test]
    fn iteration_accounting() {
        let mut t = Trainer::new(tiny_config(), tiny_split(), 7, None, TrainOptions::default()).unwrap();
        t.pretrain_all().unwrap();
        let stats = t.adversarial_iteration().unwrap();
        assert_eq!(stats.episodes, 3);
        assert_eq!(stats.policy_updates, 1);
        assert_eq!(stats.discriminator_phases, 4);
        assert_eq!(stats.generated_pool_sizes, vec![16, 16]);
        assert!(stats.action_value_range.0 > 0.0 && stats.action_value_range.1 < 2.0);
        assert_eq!(t.rollout_policy().version(), 1);
    }

    #[test]
    fn ablation_rewards_stay_below_one() {
        let cfg = TrainConfig {
            mode: Mode::DOnlyDeceptivePretrain,
            ..tiny_config()
        };
        let mut t = Trainer::new(cfg, tiny_split(), 7, None, TrainOptions::default()).unwrap();
        t.pretrain_all().unwrap();
        let stats = t.adversarial_iteration().unwrap();
        assert_eq!(stats.discriminator_phases, 2);
        assert!(stats.action_value_range.1 < 1.0);
        assert!(t.d_prime().is_none());
    }

    #[test]
    fn zero_policy_rate_leaves_generator_unchanged() {
        let cfg = TrainConfig {
            policy_lr: 0.0,
            ..tiny_config()
        };
        let mut t = Trainer::new(cfg, tiny_split(), 7, None, TrainOptions::default()).unwrap();
        t.pretrain_all().unwrap();
        let before = t.generator().clone();
        t.adversarial_iteration().unwrap();
        assert_eq!(t.generator(), &before);
    }

    #[test]
    fn best_checkpoint_is_history_maximum() {
        let out = train(&tiny_config(), tiny_split(), 7, None, TrainOptions::default()).unwrap();
        let max = out
            .history
            .d_accuracies(None)
            .into_iter()
            .map(|(_, a)| a)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(out.best_accuracy, max);
        let steps: Vec<usize> = out.history.records.iter().map(|r| r.step).collect();
        assert!(steps.windows(2).all(|w| w[1] == w[0] + 1));
        assert_eq!(out.iterations, 2);
    }

    #[test]
    fn ablation_entry_point_rejects_full_mode() {
        assert!(matches!(
            train_ablation(&tiny_config(), tiny_split(), 7, None, TrainOptions::default()),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn mode_names_parse() {
        for m in Mode::ALL {
            assert_eq!(m.as_str().parse::<Mode>().unwrap(), m);
        }
        assert!("both".parse::<Mode>().is_err());
    }
}

//! CNN sequence classifier: embedding concatenation, one convolution bank
//! per window size, max-over-time pooling, a highway layer and a sigmoid
//! head. The same architecture serves as D (truthful vs. the rest) and D′
//! (dataset-deceptive vs. generated).

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::kernels::bce_from_logit;
use crate::autodiff::{
    dot, highway_layer, matvec_into, sigmoid, Activation, Gradients, HighwayWeights, NumArray,
    ParamId, ParamSet, Tape, Var,
};
use crate::corpus::{Label, TokenSequence};
use crate::error::{Error, Result};
use crate::optim::Adam;

/// Which pair of pools a discriminator separates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    /// Truthful (positive) vs. deceptive or generated.
    D,
    /// Dataset-deceptive (positive) vs. generated.
    DPrime,
}

/// Output of [`Discriminator::classify`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassLabel {
    Truthful,
    Deceptive,
    Generated,
}

impl ClassLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            ClassLabel::Truthful => "truthful",
            ClassLabel::Deceptive => "deceptive",
            ClassLabel::Generated => "generated",
        }
    }

    /// Dataset label, if this is one.
    pub fn dataset_label(self) -> Option<Label> {
        match self {
            ClassLabel::Truthful => Some(Label::Truthful),
            ClassLabel::Deceptive => Some(Label::Deceptive),
            ClassLabel::Generated => None,
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Role {
    pub fn positive(self) -> ClassLabel {
        match self {
            Role::D => ClassLabel::Truthful,
            Role::DPrime => ClassLabel::Deceptive,
        }
    }

    pub fn negative(self) -> ClassLabel {
        match self {
            Role::D => ClassLabel::Deceptive,
            Role::DPrime => ClassLabel::Generated,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Role::D => "d",
            Role::DPrime => "d_prime",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub window: usize,
    pub filters: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorConfig {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub seq_len: usize,
    pub kernels: Vec<KernelSpec>,
    pub conv_activation: Activation,
    pub highway_activation: Activation,
    /// Drop probability on the pooled features during training.
    pub dropout: f64,
    pub train_embeddings: bool,
}

impl DiscriminatorConfig {
    pub fn feature_width(&self) -> usize {
        self.kernels.iter().map(|k| k.filters).sum()
    }

    fn validate(&self) -> Result<()> {
        if self.kernels.is_empty() || self.kernels.iter().any(|k| k.filters == 0 || k.window == 0) {
            return Err(Error::Contract("discriminator needs nonempty kernels".into()));
        }
        if let Some(k) = self.kernels.iter().find(|k| k.window > self.seq_len) {
            return Err(Error::Dimension(format!(
                "window {} exceeds sequence length {}",
                k.window, self.seq_len
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Contract(format!("dropout {} outside [0,1)", self.dropout)));
        }
        Ok(())
    }
}

/// Parameter layout: embedding, then `(conv_w, conv_b)` per kernel, then the
/// highway gate, highway transform and head.
#[derive(Clone, Debug, PartialEq)]
pub struct Discriminator {
    config: DiscriminatorConfig,
    role: Role,
    params: ParamSet,
}

const EMBEDDING: ParamId = ParamId(0);

/// Scores are kept inside the open unit interval.
const SCORE_MARGIN: f64 = f64::EPSILON;

impl Discriminator {
    pub fn new<R: Rng + ?Sized>(
        config: DiscriminatorConfig,
        role: Role,
        embedding: NumArray,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        if embedding.shape() != [config.vocab_size, config.embed_dim] {
            return Err(Error::Dimension(format!(
                "embedding {:?} for vocab {} x dim {}",
                embedding.shape(),
                config.vocab_size,
                config.embed_dim
            )));
        }
        let e = config.embed_dim;
        let f = config.feature_width();
        let mut params = ParamSet::new();
        params.add("embedding", embedding);
        for k in &config.kernels {
            let span = k.window * e;
            let bound = (6.0 / (span + k.filters) as f64).sqrt();
            params.add(
                format!("conv{}_w", k.window),
                NumArray::uniform(&[k.filters, span], bound, rng),
            );
            params.add(format!("conv{}_b", k.window), NumArray::zeros(&[k.filters]));
        }
        let hw_bound = (3.0 / f as f64).sqrt();
        params.add("highway_gate_w", NumArray::uniform(&[f, f], hw_bound, rng));
        params.add("highway_gate_b", NumArray::filled(&[f], -2.0));
        params.add("highway_transform_w", NumArray::uniform(&[f, f], hw_bound, rng));
        params.add("highway_transform_b", NumArray::zeros(&[f]));
        params.add("head_w", NumArray::uniform(&[f], (3.0 / f as f64).sqrt(), rng));
        params.add("head_b", NumArray::zeros(&[1]));
        Ok(Discriminator {
            config,
            role,
            params,
        })
    }

    pub fn from_parts(config: DiscriminatorConfig, role: Role, params: ParamSet) -> Result<Self> {
        config.validate()?;
        if params.is_empty() {
            return Err(Error::Contract("empty parameter set".into()));
        }
        let mut rng = rand::rngs::mock::StepRng::new(0, 0);
        let template = Discriminator::new(config.clone(), role, params.get(EMBEDDING).clone(), &mut rng)?;
        if template.params.len() != params.len()
            || template
                .params
                .iter()
                .zip(params.iter())
                .any(|((_, n1, a), (_, n2, b))| n1 != n2 || a.shape() != b.shape())
        {
            return Err(Error::Contract(
                "parameter set does not match discriminator config".into(),
            ));
        }
        Ok(Discriminator {
            config,
            role,
            params,
        })
    }

    pub fn config(&self) -> &DiscriminatorConfig {
        &self.config
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    /// Same weights under another role.
    pub fn with_role(mut self, role: Role) -> Self {
        self.role = role;
        self
    }

    fn conv_ids(&self, j: usize) -> (ParamId, ParamId) {
        (ParamId(1 + 2 * j), ParamId(2 + 2 * j))
    }

    fn head_ids(&self) -> [ParamId; 6] {
        let base = 1 + 2 * self.config.kernels.len();
        [0, 1, 2, 3, 4, 5].map(|i| ParamId(base + i))
    }

    /// Zeroes the output layer so every score is exactly 0.5.
    pub fn zero_head(&mut self) {
        let [.., hw, hb] = self.head_ids();
        self.params.get_mut(hw).data_mut().fill(0.0);
        self.params.get_mut(hb).data_mut().fill(0.0);
    }

    fn check_sequence(&self, seq: &TokenSequence) -> Result<()> {
        if seq.len() != self.config.seq_len {
            return Err(Error::Dimension(format!(
                "sequence length {} vs discriminator length {}",
                seq.len(),
                self.config.seq_len
            )));
        }
        if let Some(&bad) = seq.ids().iter().find(|&&t| t >= self.config.vocab_size) {
            return Err(Error::Dimension(format!("token {bad} outside vocabulary")));
        }
        Ok(())
    }

    /// Pooled `[F]` feature vector.
    fn pooled_features(&self, seq: &TokenSequence) -> Vec<f64> {
        let e = self.config.embed_dim;
        let emb = self.params.get(EMBEDDING);
        let mut matrix = Vec::with_capacity(seq.len() * e);
        for &id in seq.ids() {
            matrix.extend_from_slice(emb.row(id));
        }
        let mut pooled = Vec::with_capacity(self.config.feature_width());
        for (j, k) in self.config.kernels.iter().enumerate() {
            let (wid, bid) = self.conv_ids(j);
            let (w, b) = (self.params.get(wid), self.params.get(bid));
            let span = k.window * e;
            let positions = seq.len() - k.window + 1;
            for f in 0..k.filters {
                let row = w.row(f);
                let mut best = f64::NEG_INFINITY;
                for i in 0..positions {
                    let v = self
                        .config
                        .conv_activation
                        .apply(dot(row, &matrix[i * e..i * e + span]) + b.data()[f]);
                    if v > best {
                        best = v;
                    }
                }
                pooled.push(best);
            }
        }
        pooled
    }

    /// Pre-sigmoid output without dropout.
    pub fn logit(&self, seq: &TokenSequence) -> Result<f64> {
        self.check_sequence(seq)?;
        let pooled = NumArray::vector(self.pooled_features(seq));
        let [gw, gb, tw, tb, hw, hb] = self.head_ids();
        let p = &self.params;
        let y = highway_layer(
            &pooled,
            HighwayWeights {
                wt: p.get(gw),
                bt: p.get(gb),
                wh: p.get(tw),
                bh: p.get(tb),
                act: self.config.highway_activation,
            },
        )?;
        let mut out = [0.0];
        matvec_into(p.get(hw).data(), y.len(), y.data(), &mut out);
        Ok(out[0] + p.get(hb).data()[0])
    }

    /// Probability of the positive class, strictly inside `(0, 1)`.
    pub fn score(&self, seq: &TokenSequence) -> Result<f64> {
        Ok(squash(self.logit(seq)?))
    }

    pub fn classify(&self, seq: &TokenSequence, threshold: f64) -> Result<ClassLabel> {
        Ok(if self.score(seq)? >= threshold {
            self.role.positive()
        } else {
            self.role.negative()
        })
    }

    /// Records the logit; `mask` multiplies the pooled features.
    pub fn record_logit<'a>(
        &'a self,
        tape: &mut Tape<'a>,
        seq: &TokenSequence,
        mask: Option<NumArray>,
    ) -> Result<Var> {
        self.check_sequence(seq)?;
        let p = &self.params;
        let emb = if self.config.train_embeddings {
            tape.param(p, EMBEDDING)
        } else {
            tape.constant_ref(p.get(EMBEDDING))
        };
        let matrix = tape.gather_rows(emb, seq.ids())?;
        let mut pooled_parts = Vec::with_capacity(self.config.kernels.len());
        for j in 0..self.config.kernels.len() {
            let (wid, bid) = self.conv_ids(j);
            let w = tape.param(p, wid);
            let b = tape.param(p, bid);
            let maps = tape.conv1d(matrix, w, b)?;
            let maps = tape.activation(maps, self.config.conv_activation);
            pooled_parts.push(tape.max_over_time(maps)?);
        }
        let mut pooled = tape.concat(&pooled_parts)?;
        if let Some(mask) = mask {
            let m = tape.constant(mask);
            pooled = tape.mul(pooled, m)?;
        }
        let [gw, gb, tw, tb, hw, hb] = self.head_ids().map(|id| tape.param(p, id));
        let y = crate::autodiff::highway_graph(tape, pooled, gw, gb, tw, tb, self.config.highway_activation)?;
        let z = tape.dot(hw, y)?;
        tape.add(z, hb)
    }

    fn dropout_mask<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<NumArray> {
        let p = self.config.dropout;
        if p <= 0.0 {
            return None;
        }
        let keep = 1.0 / (1.0 - p);
        let data = (0..self.config.feature_width())
            .map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep })
            .collect();
        Some(NumArray::vector(data))
    }

    fn example_grad(&self, seq: &TokenSequence, target: f64, mask: Option<NumArray>) -> Result<(f64, Gradients)> {
        let mut tape = Tape::new();
        let z = self.record_logit(&mut tape, seq, mask)?;
        let loss = tape.bce_with_logits(z, target)?;
        Ok((tape.scalar(loss)?, tape.backward(loss)?))
    }

    /// Mean binary cross-entropy over both batches (positives labeled 1)
    /// and its gradient. `masks`, when given, holds one dropout mask per
    /// example in positives-then-negatives order.
    pub fn loss_and_grad(
        &self,
        positives: &[TokenSequence],
        negatives: &[TokenSequence],
        masks: Option<Vec<Option<NumArray>>>,
    ) -> Result<(f64, Gradients)> {
        if positives.is_empty() || negatives.is_empty() {
            return Err(Error::Contract("training batches must be nonempty".into()));
        }
        let n = positives.len() + negatives.len();
        let masks = masks.unwrap_or_else(|| vec![None; n]);
        if masks.len() != n {
            return Err(Error::Contract("one dropout mask per example required".into()));
        }
        let examples: Vec<(&TokenSequence, f64)> = positives
            .iter()
            .map(|s| (s, 1.0))
            .chain(negatives.iter().map(|s| (s, 0.0)))
            .collect();
        let parts: Vec<(f64, Gradients)> = examples
            .par_iter()
            .zip(masks)
            .map(|(&(s, y), m)| self.example_grad(s, y, m))
            .collect::<Result<_>>()?;
        let mut grads = Gradients::new();
        let mut loss = 0.0;
        for (l, g) in &parts {
            loss += l;
            grads.accumulate(g);
        }
        grads.scale(1.0 / n as f64);
        Ok((loss / n as f64, grads))
    }

    /// Mean binary cross-entropy without dropout.
    pub fn batch_loss(&self, positives: &[TokenSequence], negatives: &[TokenSequence]) -> Result<f64> {
        if positives.is_empty() || negatives.is_empty() {
            return Err(Error::Contract("loss batches must be nonempty".into()));
        }
        let mut total = 0.0;
        for s in positives {
            total += bce_from_logit(self.logit(s)?, 1.0);
        }
        for s in negatives {
            total += bce_from_logit(self.logit(s)?, 0.0);
        }
        Ok(total / (positives.len() + negatives.len()) as f64)
    }

    /// One optimizer step on binary cross-entropy with dropout; returns the
    /// batch loss before the step.
    pub fn train_step<R: Rng + ?Sized>(
        &mut self,
        positives: &[TokenSequence],
        negatives: &[TokenSequence],
        opt: &mut Adam,
        rng: &mut R,
    ) -> Result<f64> {
        let n = positives.len() + negatives.len();
        let masks = (0..n).map(|_| self.dropout_mask(rng)).collect();
        let (loss, grads) = self.loss_and_grad(positives, negatives, Some(masks))?;
        if !loss.is_finite() || !grads.is_finite() {
            return Err(Error::NumericDomain("discriminator loss diverged".into()));
        }
        opt.step(&mut self.params, &grads);
        Ok(loss)
    }

    /// One class-balanced pass: the larger pool is subsampled to the size of
    /// the smaller, both are shuffled, and each minibatch holds `batch / 2`
    /// examples of each class. Returns the mean minibatch loss.
    pub fn train_epoch<R: Rng + ?Sized>(
        &mut self,
        positives: &[TokenSequence],
        negatives: &[TokenSequence],
        batch: usize,
        opt: &mut Adam,
        rng: &mut R,
    ) -> Result<f64> {
        if positives.is_empty() || negatives.is_empty() {
            return Err(Error::Contract("training pools must be nonempty".into()));
        }
        let n = positives.len().min(negatives.len());
        let mut pos: Vec<&TokenSequence> = positives.iter().collect();
        let mut neg: Vec<&TokenSequence> = negatives.iter().collect();
        pos.shuffle(rng);
        neg.shuffle(rng);
        pos.truncate(n);
        neg.truncate(n);
        let half = (batch / 2).max(1);
        let mut losses = Vec::new();
        for (p, q) in pos.chunks(half).zip(neg.chunks(half)) {
            let p: Vec<TokenSequence> = p.iter().map(|s| (*s).clone()).collect();
            let q: Vec<TokenSequence> = q.iter().map(|s| (*s).clone()).collect();
            losses.push(self.train_step(&p, &q, opt, rng)?);
        }
        Ok(losses.iter().sum::<f64>() / losses.len() as f64)
    }

    /// Runs `steps` balanced epochs; returns the loss of each.
    pub fn pretrain<R: Rng + ?Sized>(
        &mut self,
        positives: &[TokenSequence],
        negatives: &[TokenSequence],
        steps: usize,
        batch: usize,
        opt: &mut Adam,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        (0..steps)
            .map(|step| {
                self.train_epoch(positives, negatives, batch, opt, rng)
                    .map_err(|e| match e {
                        Error::NumericDomain(_) => Error::Diverged {
                            phase: format!("{} pretraining", self.role.as_str()),
                            step: step + 1,
                        },
                        other => other,
                    })
            })
            .collect()
    }

    /// Fraction of positives scored ≥ 0.5 plus negatives scored < 0.5.
    pub fn accuracy(&self, positives: &[TokenSequence], negatives: &[TokenSequence]) -> Result<f64> {
        let n = positives.len() + negatives.len();
        if n == 0 {
            return Err(Error::Contract("accuracy over no examples".into()));
        }
        let mut correct = 0usize;
        for s in positives {
            correct += usize::from(self.score(s)? >= 0.5);
        }
        for s in negatives {
            correct += usize::from(self.score(s)? < 0.5);
        }
        Ok(correct as f64 / n as f64)
    }
}

fn squash(logit: f64) -> f64 {
    sigmoid(logit).clamp(SCORE_MARGIN, 1.0 - SCORE_MARGIN)
}

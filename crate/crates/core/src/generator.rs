//! LSTM policy over tokens: `p(s | s_1..s_t) = softmax(c + V·h_t)`.
//!
//! The output layer covers every vocabulary id except START, so START can
//! never be emitted. Generation is conditioned on START at the first step.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{
    lstm_cell_graph, matvec_into, Gradients, LstmWeights, NumArray, ParamId, ParamSet, Tape, Var,
};
use crate::autodiff::kernels::{lstm_step, softmax_in_place, LstmScratch};
use crate::corpus::{TokenSequence, Vocabulary};
use crate::error::{Error, Result};
use crate::optim::{ascend, Adam};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    /// Total vocabulary size, specials included.
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub hidden: usize,
    pub seq_len: usize,
    /// Once END is emitted, every later position is END.
    pub end_terminates: bool,
    pub train_embeddings: bool,
}

const EMBEDDING: ParamId = ParamId(0);
const LSTM_W: ParamId = ParamId(1);
const LSTM_B: ParamId = ParamId(2);
const OUT_W: ParamId = ParamId(3);
const OUT_B: ParamId = ParamId(4);

const INIT_BOUND: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    config: GeneratorConfig,
    params: ParamSet,
}

/// Recurrent state before emitting position `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
    pub t: usize,
}

/// One sampled or scored sequence together with its per-position action
/// values.
#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    pub sequence: TokenSequence,
    pub action_values: Vec<f64>,
}

impl Generator {
    /// Random LSTM and output weights; `embedding` must be `[vocab_size × embed_dim]`.
    pub fn new<R: Rng + ?Sized>(config: GeneratorConfig, embedding: NumArray, rng: &mut R) -> Result<Self> {
        let mut g = Self::zeros(config, embedding)?;
        let (h, e, v) = (g.config.hidden, g.config.embed_dim, g.config.vocab_size);
        *g.params.get_mut(LSTM_W) = NumArray::uniform(&[4 * h, e + h], INIT_BOUND, rng);
        *g.params.get_mut(OUT_W) = NumArray::uniform(&[v - 1, h], INIT_BOUND, rng);
        Ok(g)
    }

    /// All LSTM and output weights zero.
    pub fn zeros(config: GeneratorConfig, embedding: NumArray) -> Result<Self> {
        if config.vocab_size < 2 || config.hidden == 0 || config.seq_len == 0 {
            return Err(Error::Contract(format!("invalid generator config {config:?}")));
        }
        if embedding.shape() != [config.vocab_size, config.embed_dim] {
            return Err(Error::Dimension(format!(
                "embedding {:?} for vocab {} x dim {}",
                embedding.shape(),
                config.vocab_size,
                config.embed_dim
            )));
        }
        let (h, e, v) = (config.hidden, config.embed_dim, config.vocab_size);
        let mut params = ParamSet::new();
        params.add("embedding", embedding);
        params.add("lstm_w", NumArray::zeros(&[4 * h, e + h]));
        params.add("lstm_b", NumArray::zeros(&[4 * h]));
        params.add("out_w", NumArray::zeros(&[v - 1, h]));
        params.add("out_b", NumArray::zeros(&[v - 1]));
        Ok(Generator { config, params })
    }

    pub fn from_parts(config: GeneratorConfig, params: ParamSet) -> Result<Self> {
        let names = ["embedding", "lstm_w", "lstm_b", "out_w", "out_b"];
        if params.len() != names.len()
            || params.ids().zip(names).any(|(id, n)| params.name(id) != n)
        {
            return Err(Error::Contract("parameter set does not describe a generator".into()));
        }
        let expected = Generator::zeros(config.clone(), params.get(EMBEDDING).clone())?;
        for id in params.ids() {
            if params.get(id).shape() != expected.params.get(id).shape() {
                return Err(Error::Dimension(format!(
                    "generator parameter {} has shape {:?}",
                    params.name(id),
                    params.get(id).shape()
                )));
            }
        }
        Ok(Generator { config, params })
    }

    pub fn config(&self) -> &GeneratorConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn seq_len(&self) -> usize {
        self.config.seq_len
    }

    /// Mutable output bias, indexed by vocabulary id minus one.
    pub fn output_bias_mut(&mut self) -> &mut NumArray {
        self.params.get_mut(OUT_B)
    }

    pub fn output_bias_id() -> ParamId {
        OUT_B
    }

    fn lstm(&self) -> LstmWeights<'_> {
        LstmWeights {
            w: self.params.get(LSTM_W),
            b: self.params.get(LSTM_B),
        }
    }

    pub fn initial_state(&self) -> GeneratorState {
        GeneratorState {
            h: vec![0.0; self.config.hidden],
            c: vec![0.0; self.config.hidden],
            t: 0,
        }
    }

    fn forced_end(&self, t: usize, prev: usize) -> bool {
        self.config.end_terminates && t > 0 && prev == Vocabulary::END
    }

    /// Distribution over all vocabulary ids (START has probability 0) for
    /// position `state.t`, after consuming `prev_token`.
    pub fn next_token_distribution(
        &self,
        state: &GeneratorState,
        prev_token: usize,
    ) -> Result<(NumArray, GeneratorState)> {
        if state.t >= self.config.seq_len {
            return Err(Error::SequenceExhausted(state.t));
        }
        if prev_token >= self.config.vocab_size {
            return Err(Error::Dimension(format!("token {prev_token} outside vocabulary")));
        }
        let mut cursor = Cursor {
            h: state.h.clone(),
            c: state.c.clone(),
            t: state.t,
            last: prev_token,
            probs: vec![0.0; self.config.vocab_size],
            scratch: LstmScratch::new(self.config.embed_dim, self.config.hidden),
        };
        self.fill_distribution(&mut cursor);
        let next = GeneratorState {
            h: cursor.h,
            c: cursor.c,
            t: state.t + 1,
        };
        Ok((NumArray::vector(cursor.probs), next))
    }

    pub(crate) fn cursor(&self) -> Cursor {
        Cursor {
            h: vec![0.0; self.config.hidden],
            c: vec![0.0; self.config.hidden],
            t: 0,
            last: Vocabulary::START,
            probs: vec![0.0; self.config.vocab_size],
            scratch: LstmScratch::new(self.config.embed_dim, self.config.hidden),
        }
    }

    /// Computes `cursor.probs` for the next position, consuming `cursor.last`.
    fn fill_distribution(&self, cur: &mut Cursor) {
        if self.forced_end(cur.t, cur.last) {
            cur.probs.iter_mut().for_each(|p| *p = 0.0);
            cur.probs[Vocabulary::END] = 1.0;
            return;
        }
        let emb = self.params.get(EMBEDDING);
        lstm_step(self.lstm(), emb.row(cur.last), &mut cur.h, &mut cur.c, &mut cur.scratch);
        let out_w = self.params.get(OUT_W);
        let (start, rest) = cur.probs.split_at_mut(1);
        start[0] = 0.0;
        matvec_into(out_w.data(), self.config.hidden, &cur.h, rest);
        for (r, b) in rest.iter_mut().zip(self.params.get(OUT_B).data()) {
            *r += b;
        }
        softmax_in_place(rest);
    }

    /// Feeds `token` and advances the cursor by one position.
    pub(crate) fn advance(&self, cur: &mut Cursor, token: usize) {
        self.fill_distribution(cur);
        cur.last = token;
        cur.t += 1;
    }

    /// Samples the next token from the current state and feeds it.
    pub(crate) fn sample_next<R: Rng + ?Sized>(&self, cur: &mut Cursor, rng: &mut R) -> usize {
        self.fill_distribution(cur);
        let token = sample_index(&cur.probs, rng);
        cur.last = token;
        cur.t += 1;
        token
    }

    /// Completes a prefix held in `cur` to full length.
    pub(crate) fn complete<R: Rng + ?Sized>(
        &self,
        mut cur: Cursor,
        prefix: &[usize],
        rng: &mut R,
    ) -> TokenSequence {
        let mut ids = Vec::with_capacity(self.config.seq_len);
        ids.extend_from_slice(prefix);
        while ids.len() < self.config.seq_len {
            ids.push(self.sample_next(&mut cur, rng));
        }
        TokenSequence::from_generated(ids)
    }

    /// Autoregressive sample of `seq_len` tokens.
    pub fn sample_sequence<R: Rng + ?Sized>(&self, rng: &mut R) -> TokenSequence {
        self.complete(self.cursor(), &[], rng)
    }

    /// Cursor that has consumed `prefix`.
    pub(crate) fn cursor_after(&self, prefix: &[usize]) -> Cursor {
        let mut cur = self.cursor();
        for &tok in prefix {
            self.advance(&mut cur, tok);
        }
        cur
    }

    fn check_sequence(&self, seq: &TokenSequence) -> Result<()> {
        if seq.len() != self.config.seq_len {
            return Err(Error::Dimension(format!(
                "sequence length {} vs generator length {}",
                seq.len(),
                self.config.seq_len
            )));
        }
        if let Some(&bad) = seq.ids().iter().find(|&&t| t >= self.config.vocab_size) {
            return Err(Error::Dimension(format!("token {bad} outside vocabulary")));
        }
        Ok(())
    }

    /// `−Σ_t log p(S_t | S_{1:t−1})`.
    pub fn sequence_nll(&self, seq: &TokenSequence) -> Result<f64> {
        self.check_sequence(seq)?;
        let mut cur = self.cursor();
        let mut nll = 0.0;
        for (t, &tok) in seq.ids().iter().enumerate() {
            self.fill_distribution(&mut cur);
            let p = cur.probs[tok];
            if p == 0.0 {
                return Err(Error::InfiniteLoss(format!(
                    "token {tok} at position {t} has probability zero"
                )));
            }
            nll -= p.ln();
            cur.last = tok;
            cur.t += 1;
        }
        Ok(nll)
    }

    pub fn mean_nll(&self, data: &[TokenSequence]) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::EmptyCorpus("no sequences to score".into()));
        }
        let total: f64 = data
            .iter()
            .map(|s| self.sequence_nll(s))
            .collect::<Result<Vec<_>>>()?
            .iter()
            .sum();
        Ok(total / data.len() as f64)
    }

    /// Records per-position log-probabilities; forced positions get `None`.
    fn record_log_probs<'a>(
        &'a self,
        tape: &mut Tape<'a>,
        seq: &TokenSequence,
    ) -> Result<Vec<Option<Var>>> {
        self.check_sequence(seq)?;
        let p = &self.params;
        let emb = if self.config.train_embeddings {
            tape.param(p, EMBEDDING)
        } else {
            tape.constant_ref(p.get(EMBEDDING))
        };
        let w = tape.param(p, LSTM_W);
        let b = tape.param(p, LSTM_B);
        let out_w = tape.param(p, OUT_W);
        let out_b = tape.param(p, OUT_B);
        let mut h = tape.constant(NumArray::zeros(&[self.config.hidden]));
        let mut c = tape.constant(NumArray::zeros(&[self.config.hidden]));
        let mut prev = Vocabulary::START;
        let mut out = Vec::with_capacity(seq.len());
        for (t, &tok) in seq.ids().iter().enumerate() {
            if self.forced_end(t, prev) {
                if tok != Vocabulary::END {
                    return Err(Error::InfiniteLoss(format!(
                        "token {tok} at position {t} follows END"
                    )));
                }
                out.push(None);
                continue;
            }
            if tok == Vocabulary::START {
                return Err(Error::InfiniteLoss(format!("START emitted at position {t}")));
            }
            let x = tape.gather_row(emb, prev)?;
            let (nh, nc) = lstm_cell_graph(tape, x, h, c, w, b)?;
            h = nh;
            c = nc;
            let logits = tape.matvec(out_w, h)?;
            let logits = tape.add(logits, out_b)?;
            out.push(Some(tape.log_softmax_pick(logits, tok - 1)?));
            prev = tok;
        }
        Ok(out)
    }

    /// Records `Σ_t weight_t · log p(S_t | S_{1:t−1})` on `tape`.
    pub fn record_weighted_log_prob<'a>(
        &'a self,
        tape: &mut Tape<'a>,
        seq: &TokenSequence,
        weights: &[f64],
    ) -> Result<Var> {
        if weights.len() != seq.len() {
            return Err(Error::Contract(format!(
                "{} weights for a sequence of length {}",
                weights.len(),
                seq.len()
            )));
        }
        let steps = self.record_log_probs(tape, seq)?;
        let mut terms = Vec::new();
        for (lp, &w) in steps.iter().zip(weights) {
            if let Some(lp) = lp {
                terms.push(tape.scale(*lp, w));
            }
        }
        if terms.is_empty() {
            return Ok(tape.constant(NumArray::scalar(0.0)));
        }
        tape.add_n(&terms)
    }

    /// `log P(S)` and its gradient.
    pub fn log_prob_and_grad(&self, seq: &TokenSequence) -> Result<(f64, Gradients)> {
        let mut tape = Tape::new();
        let out = self.record_weighted_log_prob(&mut tape, seq, &vec![1.0; seq.len()])?;
        Ok((tape.scalar(out)?, tape.backward(out)?))
    }

    /// `Σ_t A_t ∇ log G(S_t | S_{1:t−1})` for one episode.
    pub fn episode_gradient(&self, episode: &Episode) -> Result<Gradients> {
        if episode.action_values.len() != self.config.seq_len {
            return Err(Error::Contract(format!(
                "{} action values for sequence length {}",
                episode.action_values.len(),
                self.config.seq_len
            )));
        }
        let mut tape = Tape::new();
        let out = self.record_weighted_log_prob(&mut tape, &episode.sequence, &episode.action_values)?;
        tape.backward(out)
    }

    /// Policy-gradient estimate averaged over episodes.
    pub fn policy_gradient(&self, episodes: &[Episode]) -> Result<Gradients> {
        if episodes.is_empty() {
            return Err(Error::Contract("policy gradient over zero episodes".into()));
        }
        let parts: Vec<Gradients> = episodes
            .par_iter()
            .map(|e| self.episode_gradient(e))
            .collect::<Result<_>>()?;
        let mut total = Gradients::new();
        for g in &parts {
            total.accumulate(g);
        }
        total.scale(1.0 / episodes.len() as f64);
        Ok(total)
    }

    /// Gradient ascent step with global-norm clipping; returns the gradient
    /// norm before clipping.
    pub fn policy_gradient_update(&mut self, episodes: &[Episode], rate: f64, clip_norm: f64) -> Result<f64> {
        let mut grads = self.policy_gradient(episodes)?;
        let norm = grads.clip_global_norm(clip_norm);
        if !grads.is_finite() {
            return Err(Error::NumericDomain("non-finite policy gradient".into()));
        }
        ascend(&mut self.params, &grads, rate);
        Ok(norm)
    }

    /// Gradient of the mean NLL over `batch`.
    pub fn nll_gradient(&self, batch: &[TokenSequence]) -> Result<(f64, Gradients)> {
        let parts: Vec<(f64, Gradients)> = batch
            .par_iter()
            .map(|s| self.log_prob_and_grad(s))
            .collect::<Result<_>>()?;
        let mut total = Gradients::new();
        let mut nll = 0.0;
        for (lp, g) in &parts {
            nll -= lp;
            total.accumulate(g);
        }
        let scale = 1.0 / batch.len().max(1) as f64;
        total.scale(-scale);
        Ok((nll * scale, total))
    }

    /// Maximum-likelihood training with Adam. One step is one shuffled pass
    /// over `data` in minibatches. Returns the mean NLL before training and
    /// after each step.
    pub fn mle_pretrain<R: Rng + ?Sized>(
        &mut self,
        data: &[TokenSequence],
        steps: usize,
        lr: f64,
        batch: usize,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        if data.is_empty() {
            return Err(Error::EmptyCorpus("no sequences for MLE pretraining".into()));
        }
        let batch = batch.max(1);
        let mut opt = Adam::new(lr);
        let mut curve = vec![self.mean_nll(data)?];
        let mut order: Vec<usize> = (0..data.len()).collect();
        for step in 0..steps {
            order.shuffle(rng);
            for chunk in order.chunks(batch) {
                let items: Vec<TokenSequence> = chunk.iter().map(|&i| data[i].clone()).collect();
                let (loss, grads) = self.nll_gradient(&items)?;
                if !loss.is_finite() || !grads.is_finite() {
                    return Err(Error::Diverged {
                        phase: "generator MLE".into(),
                        step: step + 1,
                    });
                }
                opt.step(&mut self.params, &grads);
            }
            let nll = self.mean_nll(data).map_err(|_| Error::Diverged {
                phase: "generator MLE".into(),
                step: step + 1,
            })?;
            if !nll.is_finite() {
                return Err(Error::Diverged {
                    phase: "generator MLE".into(),
                    step: step + 1,
                });
            }
            curve.push(nll);
        }
        Ok(curve)
    }
}

/// Incremental generation state with reusable buffers.
#[derive(Clone)]
pub(crate) struct Cursor {
    h: Vec<f64>,
    c: Vec<f64>,
    t: usize,
    last: usize,
    probs: Vec<f64>,
    scratch: LstmScratch,
}

pub(crate) fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last_positive = i;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn config(vocab: usize, len: usize) -> GeneratorConfig {
        GeneratorConfig {
            vocab_size: vocab,
            embed_dim: 3,
            hidden: 4,
            seq_len: len,
            end_terminates: false,
            train_embeddings: false,
        }
    }

    fn random_gen(vocab: usize, len: usize, seed: u64) -> Generator {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let emb = NumArray::uniform(&[vocab, 3], 0.5, &mut rng);
        let mut g = Generator::new(config(vocab, len), emb, &mut rng).unwrap();
        *g.params_mut().get_mut(LSTM_W) = NumArray::uniform(&[16, 7], 0.8, &mut rng);
        *g.params_mut().get_mut(OUT_W) = NumArray::uniform(&[vocab - 1, 4], 1.5, &mut rng);
        g
    }

    #[test]
    fn zero_params_give_uniform_distribution() {
        let g = Generator::zeros(config(11, 4), NumArray::zeros(&[11, 3])).unwrap();
        let (p, next) = g
            .next_token_distribution(&g.initial_state(), Vocabulary::START)
            .unwrap();
        assert_eq!(p.data()[Vocabulary::START], 0.0);
        for &v in &p.data()[1..] {
            assert!((v - 0.1).abs() < 1e-15);
        }
        assert_eq!(next.t, 1);
    }

    #[test]
    fn exhausted_state_is_an_error() {
        let g = Generator::zeros(config(5, 2), NumArray::zeros(&[5, 3])).unwrap();
        let mut s = g.initial_state();
        s.t = 2;
        assert!(matches!(
            g.next_token_distribution(&s, 3),
            Err(Error::SequenceExhausted(2))
        ));
    }

    #[test]
    fn uniform_nll_closed_form() {
        let g = Generator::zeros(config(11, 4), NumArray::zeros(&[11, 3])).unwrap();
        let seq = TokenSequence::padded(vec![3, 4, 5, 6], 4).unwrap();
        let nll = g.sequence_nll(&seq).unwrap();
        assert!((nll - 4.0 * 10f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn start_token_has_infinite_loss() {
        let g = Generator::zeros(config(5, 2), NumArray::zeros(&[5, 3])).unwrap();
        let seq = TokenSequence::padded(vec![3, Vocabulary::START], 2).unwrap();
        assert!(matches!(g.sequence_nll(&seq), Err(Error::InfiniteLoss(_))));
        let mut tape = Tape::new();
        assert!(matches!(
            g.record_weighted_log_prob(&mut tape, &seq, &[1.0, 1.0]),
            Err(Error::InfiniteLoss(_))
        ));
    }

    #[test]
    fn peaked_policy_repeats_token() {
        let mut g = Generator::zeros(config(6, 7), NumArray::zeros(&[6, 3])).unwrap();
        g.output_bias_mut().data_mut()[4 - 1] = 30.0;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = g.sample_sequence(&mut rng);
        assert_eq!(s.ids(), &[4; 7]);
        assert!(g.sequence_nll(&s).unwrap() < 1e-9);
    }

    #[test]
    fn end_terminates_forces_padding() {
        let mut cfg = config(6, 5);
        cfg.end_terminates = true;
        let mut g = Generator::zeros(cfg, NumArray::zeros(&[6, 3])).unwrap();
        g.output_bias_mut().data_mut()[Vocabulary::END - 1] = 30.0;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = g.sample_sequence(&mut rng);
        assert_eq!(s.ids(), &[Vocabulary::END; 5]);
        // After the first END nothing else is possible.
        let bad = TokenSequence::from_generated(vec![1, 4, 1, 1, 1]);
        assert!(matches!(g.sequence_nll(&bad), Err(Error::InfiniteLoss(_))));
        let nll = g.sequence_nll(&s).unwrap();
        let lp1 = {
            let (p, _) = g
                .next_token_distribution(&g.initial_state(), Vocabulary::START)
                .unwrap();
            p.data()[Vocabulary::END].ln()
        };
        assert!((nll + lp1).abs() < 1e-12);
    }

    #[test]
    fn sampling_is_deterministic_under_seed() {
        let g = random_gen(7, 9, 3);
        let a = g.sample_sequence(&mut ChaCha8Rng::seed_from_u64(5));
        let b = g.sample_sequence(&mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
    }

    #[test]
    fn tape_and_fast_path_agree() {
        let g = random_gen(7, 6, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..5 {
            let s = g.sample_sequence(&mut rng);
            let (lp, _) = g.log_prob_and_grad(&s).unwrap();
            let nll = g.sequence_nll(&s).unwrap();
            assert!((lp + nll).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_action_values_leave_params_unchanged() {
        let mut g = random_gen(5, 4, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let episodes: Vec<Episode> = (0..3)
            .map(|_| Episode {
                sequence: g.sample_sequence(&mut rng),
                action_values: vec![0.0; 4],
            })
            .collect();
        let before = g.params().clone();
        g.policy_gradient_update(&episodes, 0.5, 5.0).unwrap();
        assert_eq!(g.params(), &before);
    }

    #[test]
    fn misaligned_action_values_rejected() {
        let mut g = random_gen(5, 4, 4);
        let ep = Episode {
            sequence: g.sample_sequence(&mut ChaCha8Rng::seed_from_u64(0)),
            action_values: vec![1.0; 3],
        };
        assert!(matches!(
            g.policy_gradient_update(&[ep], 0.1, 5.0),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn memorizes_a_single_sequence() {
        let mut g = random_gen(8, 6, 12);
        let seq = TokenSequence::padded(vec![3, 5, 5, 7, 2, 4], 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let curve = g
            .mle_pretrain(std::slice::from_ref(&seq), 150, 0.05, 1, &mut rng)
            .unwrap();
        assert!(curve.last().unwrap() < &(0.1 * curve[0]), "{curve:?}");
    }

    #[test]
    fn mle_on_empty_data_fails() {
        let mut g = random_gen(5, 3, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            g.mle_pretrain(&[], 1, 0.01, 4, &mut rng),
            Err(Error::EmptyCorpus(_))
        ));
    }
}

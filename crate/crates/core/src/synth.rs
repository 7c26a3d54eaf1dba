//! Synthetic ground truth for small-scale verification: paired first-order
//! Markov token sources with an exact likelihood-ratio classifier, and
//! enumeration oracles for generator objectives and action values.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::Gradients;
use crate::corpus::{Label, LabeledCorpus, ReviewSet, TokenSequence, Vocabulary};
use crate::error::{Error, Result};
use crate::generator::{sample_index, Generator, GeneratorState};

/// Maximum number of sequences any oracle enumerates.
pub const ENUMERATION_CAP: usize = 10_000;

const STOCHASTIC_TOLERANCE: f64 = 1e-12;

/// First-order Markov chain over `vocab_size` source tokens emitting
/// sequences of exactly `seq_len` tokens.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkovSource {
    pub vocab_size: usize,
    pub seq_len: usize,
    pub initial: Vec<f64>,
    pub transition: Vec<Vec<f64>>,
}

fn check_distribution(row: &[f64], what: &str) -> Result<()> {
    if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::Contract(format!("{what} has a negative or non-finite entry")));
    }
    let total: f64 = row.iter().sum();
    if (total - 1.0).abs() > STOCHASTIC_TOLERANCE {
        return Err(Error::Contract(format!("{what} sums to {total}")));
    }
    Ok(())
}

impl MarkovSource {
    pub fn validate(&self) -> Result<()> {
        if self.vocab_size == 0 || self.seq_len == 0 {
            return Err(Error::Contract("source needs a vocabulary and a length".into()));
        }
        if self.initial.len() != self.vocab_size
            || self.transition.len() != self.vocab_size
            || self.transition.iter().any(|r| r.len() != self.vocab_size)
        {
            return Err(Error::Dimension("source matrices do not match vocab size".into()));
        }
        check_distribution(&self.initial, "initial distribution")?;
        for (i, row) in self.transition.iter().enumerate() {
            check_distribution(row, &format!("transition row {i}"))?;
        }
        Ok(())
    }

    /// Random source whose rows are `u^sharpness` for uniform `u`,
    /// normalized; larger `sharpness` gives peakier rows.
    pub fn random<R: Rng + ?Sized>(vocab_size: usize, seq_len: usize, sharpness: f64, rng: &mut R) -> Self {
        let row = |rng: &mut R| normalize((0..vocab_size).map(|_| rng.gen::<f64>().powf(sharpness)).collect());
        let initial = row(rng);
        let transition = (0..vocab_size).map(|_| row(rng)).collect();
        MarkovSource {
            vocab_size,
            seq_len,
            initial,
            transition,
        }
    }

    /// `(1 − weight)·self + weight·other`, entrywise.
    pub fn blend(&self, other: &MarkovSource, weight: f64) -> Self {
        let mix = |a: &[f64], b: &[f64]| normalize(a.iter().zip(b).map(|(x, y)| (1.0 - weight) * x + weight * y).collect());
        MarkovSource {
            vocab_size: self.vocab_size,
            seq_len: self.seq_len,
            initial: mix(&self.initial, &other.initial),
            transition: self
                .transition
                .iter()
                .zip(&other.transition)
                .map(|(a, b)| mix(a, b))
                .collect(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.seq_len);
        let mut cur = sample_index(&self.initial, rng);
        out.push(cur);
        while out.len() < self.seq_len {
            cur = sample_index(&self.transition[cur], rng);
            out.push(cur);
        }
        out
    }

    /// Exact entropy of a whole sequence in nats, i.e. the expected
    /// negative log-likelihood of a sample.
    pub fn sequence_entropy(&self) -> f64 {
        let row_entropy = |row: &[f64]| -> f64 {
            row.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum()
        };
        let mut marginal = self.initial.clone();
        let mut total = row_entropy(&self.initial);
        for _ in 1..self.seq_len {
            total += marginal
                .iter()
                .zip(&self.transition)
                .map(|(&m, row)| m * row_entropy(row))
                .sum::<f64>();
            let mut next = vec![0.0; self.vocab_size];
            for (&m, row) in marginal.iter().zip(&self.transition) {
                for (n, &p) in next.iter_mut().zip(row) {
                    *n += m * p;
                }
            }
            marginal = next;
        }
        total
    }

    /// Exact log-probability; `-inf` for impossible sequences.
    pub fn log_likelihood(&self, tokens: &[usize]) -> Result<f64> {
        if tokens.is_empty() {
            return Err(Error::EmptyInput("empty source sequence".into()));
        }
        if let Some(&bad) = tokens.iter().find(|&&t| t >= self.vocab_size) {
            return Err(Error::Contract(format!(
                "token {bad} outside source vocabulary of {}",
                self.vocab_size
            )));
        }
        let mut ll = self.initial[tokens[0]].ln();
        for w in tokens.windows(2) {
            ll += self.transition[w[0]][w[1]].ln();
        }
        Ok(ll)
    }
}

fn normalize(mut row: Vec<f64>) -> Vec<f64> {
    let total: f64 = row.iter().sum();
    row.iter_mut().for_each(|p| *p /= total);
    // Put the rounding residue on the largest entry so the row sums to one.
    let residue = 1.0 - row.iter().sum::<f64>();
    if let Some(max) = row
        .iter_mut()
        .max_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal))
    {
        *max += residue;
    }
    row
}

/// Truthful and deceptive sources with equal class prior.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourcePair {
    pub truthful: MarkovSource,
    pub deceptive: MarkovSource,
}

impl SourcePair {
    pub fn new(truthful: MarkovSource, deceptive: MarkovSource) -> Result<Self> {
        let pair = SourcePair {
            truthful,
            deceptive,
        };
        pair.validate()?;
        Ok(pair)
    }

    pub fn validate(&self) -> Result<()> {
        self.truthful.validate()?;
        self.deceptive.validate()?;
        if self.truthful.vocab_size != self.deceptive.vocab_size
            || self.truthful.seq_len != self.deceptive.seq_len
        {
            return Err(Error::Contract("sources differ in vocabulary or length".into()));
        }
        Ok(())
    }

    /// Deceptive source = truthful source blended with an independent one.
    pub fn blended(vocab_size: usize, seq_len: usize, sharpness: f64, weight: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truthful = MarkovSource::random(vocab_size, seq_len, sharpness, &mut rng);
        let other = MarkovSource::random(vocab_size, seq_len, sharpness, &mut rng);
        let deceptive = truthful.blend(&other, weight);
        SourcePair {
            truthful,
            deceptive,
        }
    }

    /// Like [`SourcePair::blended`], except that the last `markers` tokens
    /// never occur in truthful sequences and take `marker_mass` of every
    /// deceptive row. Class evidence is then largely carried by whether a
    /// marker occurs at all, on top of the blended transition statistics.
    pub fn marked(
        vocab_size: usize,
        seq_len: usize,
        sharpness: f64,
        weight: f64,
        markers: usize,
        marker_mass: f64,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = MarkovSource::random(vocab_size, seq_len, sharpness, &mut rng);
        let other = MarkovSource::random(vocab_size, seq_len, sharpness, &mut rng);
        let split: Vec<f64> = (0..markers).map(|_| 0.5 + rng.gen::<f64>()).collect();
        let split_total: f64 = split.iter().sum();
        let first_marker = vocab_size - markers;
        let reshape = |row: &[f64], mass: f64| {
            let rest: f64 = row[..first_marker].iter().sum();
            let mut out: Vec<f64> = row[..first_marker].iter().map(|p| p / rest * (1.0 - mass)).collect();
            out.extend(split.iter().map(|s| mass * s / split_total));
            normalize(out)
        };
        let apply = |src: &MarkovSource, mass: f64| MarkovSource {
            vocab_size,
            seq_len,
            initial: reshape(&src.initial, mass),
            transition: src.transition.iter().map(|r| reshape(r, mass)).collect(),
        };
        SourcePair {
            truthful: apply(&base, 0.0),
            deceptive: apply(&base.blend(&other, weight), marker_mass),
        }
    }

    /// The pinned desk-scale pair: 20 source tokens, length 16, two marker
    /// tokens carrying 8% of every deceptive row.
    pub fn desk() -> Self {
        SourcePair::marked(20, 16, 2.0, 0.1, 2, 0.08, 2024)
    }

    pub fn vocab_size(&self) -> usize {
        self.truthful.vocab_size
    }

    pub fn seq_len(&self) -> usize {
        self.truthful.seq_len
    }

    pub fn source(&self, label: Label) -> &MarkovSource {
        match label {
            Label::Truthful => &self.truthful,
            Label::Deceptive => &self.deceptive,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let pair: SourcePair = serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        pair.validate()?;
        Ok(pair)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("source pair serializes");
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Vocabulary for source tokens `0..vocab_size`: token `k` is named
/// `w{k:03}` and receives id `NUM_SPECIAL + k`.
pub fn synthetic_vocabulary(vocab_size: usize) -> Vocabulary {
    let names: Vec<String> = (0..vocab_size).map(token_name).collect();
    Vocabulary::from_tokens(names.iter().map(String::as_str))
}

pub fn token_name(k: usize) -> String {
    format!("w{k:03}")
}

/// Source tokens → padded vocabulary ids.
pub fn encode_source(tokens: &[usize], seq_len: usize) -> Result<TokenSequence> {
    TokenSequence::padded(tokens.iter().map(|t| t + Vocabulary::NUM_SPECIAL).collect(), seq_len)
}

/// Content of a sequence as source tokens.
pub fn decode_source(seq: &TokenSequence) -> Result<Vec<usize>> {
    seq.content()
        .iter()
        .map(|&id| {
            id.checked_sub(Vocabulary::NUM_SPECIAL)
                .ok_or_else(|| Error::Contract(format!("id {id} is not a source token")))
        })
        .collect()
}

/// `n_per_class` sequences from each source, padded to `seq_len`.
pub fn sample_corpus(pair: &SourcePair, n_per_class: usize, seed: u64, seq_len: usize) -> Result<LabeledCorpus> {
    if n_per_class == 0 {
        return Err(Error::Contract("need at least one sample per class".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |src: &MarkovSource| -> Result<Vec<TokenSequence>> {
        (0..n_per_class)
            .map(|_| encode_source(&src.sample(&mut rng), seq_len))
            .collect()
    };
    let truthful = draw(&pair.truthful)?;
    let deceptive = draw(&pair.deceptive)?;
    Ok(ReviewSet::new(truthful, deceptive))
}

/// Class with the larger exact likelihood; ties go to truthful.
pub fn bayes_classify(pair: &SourcePair, tokens: &[usize]) -> Result<Label> {
    let lt = pair.truthful.log_likelihood(tokens)?;
    let ld = pair.deceptive.log_likelihood(tokens)?;
    Ok(if ld > lt { Label::Deceptive } else { Label::Truthful })
}

/// Accuracy of [`bayes_classify`] on a fresh sample with `n_eval / 2`
/// sequences per class (rounded up).
pub fn bayes_accuracy(pair: &SourcePair, n_eval: usize, seed: u64) -> Result<f64> {
    if n_eval < 1000 {
        return Err(Error::Contract(format!("n_eval {n_eval} below 1000")));
    }
    let per_class = n_eval.div_ceil(2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut correct = 0usize;
    for label in [Label::Truthful, Label::Deceptive] {
        for _ in 0..per_class {
            let s = pair.source(label).sample(&mut rng);
            correct += usize::from(bayes_classify(pair, &s)? == label);
        }
    }
    Ok(correct as f64 / (2 * per_class) as f64)
}

fn state_after(g: &Generator, prefix: &[usize]) -> Result<(GeneratorState, usize)> {
    let mut state = g.initial_state();
    let mut prev = Vocabulary::START;
    for &tok in prefix {
        let (_, next) = g.next_token_distribution(&state, prev)?;
        state = next;
        prev = tok;
    }
    Ok((state, prev))
}

fn check_cap(branching: usize, depth: usize) -> Result<()> {
    let mut total: usize = 1;
    for _ in 0..depth {
        total = total.saturating_mul(branching);
        if total > ENUMERATION_CAP {
            return Err(Error::Contract(format!(
                "{branching}^{depth} sequences exceed the enumeration cap of {ENUMERATION_CAP}"
            )));
        }
    }
    Ok(())
}

fn extend(
    g: &Generator,
    state: GeneratorState,
    prev: usize,
    ids: &mut Vec<usize>,
    prob: f64,
    out: &mut Vec<(TokenSequence, f64)>,
) -> Result<()> {
    if ids.len() == g.seq_len() {
        out.push((TokenSequence::from_generated(ids.clone()), prob));
        return Ok(());
    }
    let (dist, next) = g.next_token_distribution(&state, prev)?;
    for (tok, &p) in dist.data().iter().enumerate() {
        if p > 0.0 {
            ids.push(tok);
            extend(g, next.clone(), tok, ids, prob * p, out)?;
            ids.pop();
        }
    }
    Ok(())
}

/// Every completion of `prefix` with positive probability, paired with its
/// probability conditional on the prefix.
pub fn enumerate_completions(g: &Generator, prefix: &[usize]) -> Result<Vec<(TokenSequence, f64)>> {
    let len = g.seq_len();
    if prefix.len() > len {
        return Err(Error::Contract(format!("prefix longer than {len}")));
    }
    check_cap(g.config().vocab_size - 1, len - prefix.len())?;
    let (state, prev) = state_after(g, prefix)?;
    let mut out = Vec::new();
    let mut ids = prefix.to_vec();
    extend(g, state, prev, &mut ids, 1.0, &mut out)?;
    Ok(out)
}

/// `Σ_S P(S)·reward(S)`.
pub fn exact_objective<F>(g: &Generator, reward: F) -> Result<f64>
where
    F: Fn(&TokenSequence) -> Result<f64>,
{
    let mut total = 0.0;
    for (s, p) in enumerate_completions(g, &[])? {
        total += p * reward(&s)?;
    }
    Ok(total)
}

/// `∇ Σ_S P(S)·reward(S) = Σ_S P(S)·reward(S)·∇log P(S)` by enumeration.
pub fn exact_policy_gradient<F>(g: &Generator, reward: F) -> Result<Gradients>
where
    F: Fn(&TokenSequence) -> Result<f64>,
{
    let mut total = Gradients::new();
    for (s, p) in enumerate_completions(g, &[])? {
        let (_, grad) = g.log_prob_and_grad(&s)?;
        total.accumulate_scaled(&grad, p * reward(&s)?);
    }
    Ok(total)
}

/// `Σ_suffix P(suffix | prefix)·reward(prefix ++ suffix)`.
pub fn exact_action_value<F>(prefix: &[usize], g: &Generator, reward: F) -> Result<f64>
where
    F: Fn(&TokenSequence) -> Result<f64>,
{
    let mut total = 0.0;
    for (s, p) in enumerate_completions(g, prefix)? {
        total += p * reward(&s)?;
    }
    Ok(total)
}

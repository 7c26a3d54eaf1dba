//! Forward-only evaluation of the network primitives, plus builders that
//! record the same computations on a [`Tape`].
//!
//! LSTM gate rows are packed in the order input, forget, candidate, output:
//! a `[4H × (E+H)]` weight matrix acting on `[x; h_prev]` and a `[4H]` bias.

use super::array::{dot, matvec_into, sigmoid, NumArray};
use super::tape::{first_argmax, Activation, Tape, Var};
use crate::error::{Error, Result};

/// Numerically stable softmax.
pub fn softmax(logits: &NumArray) -> Result<NumArray> {
    if logits.is_empty() {
        return Err(Error::Dimension("softmax of an empty vector".into()));
    }
    if !logits.is_finite() {
        return Err(Error::NumericDomain("softmax of non-finite logits".into()));
    }
    let mut out = logits.clone();
    softmax_in_place(out.data_mut());
    Ok(out)
}

pub(crate) fn softmax_in_place(xs: &mut [f64]) {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in xs.iter_mut() {
        *x = (*x - m).exp();
        total += *x;
    }
    for x in xs.iter_mut() {
        *x /= total;
    }
}

/// Borrowed LSTM weights.
#[derive(Clone, Copy)]
pub struct LstmWeights<'a> {
    pub w: &'a NumArray,
    pub b: &'a NumArray,
}

impl LstmWeights<'_> {
    pub fn hidden(&self) -> usize {
        self.b.len() / 4
    }

    fn check(&self, x: usize, h: usize, c: usize) -> Result<()> {
        let hidden = self.hidden();
        if self.b.len() != 4 * hidden
            || self.w.rows() != 4 * hidden
            || self.w.cols() != x + hidden
            || h != hidden
            || c != hidden
        {
            return Err(Error::Dimension(format!(
                "lstm weights {:?}/{:?} with x={x}, h={h}, c={c}",
                self.w.shape(),
                self.b.shape()
            )));
        }
        Ok(())
    }
}

/// One LSTM step: returns `(h, c)`.
pub fn lstm_cell(
    x: &NumArray,
    h_prev: &NumArray,
    c_prev: &NumArray,
    weights: LstmWeights<'_>,
) -> Result<(NumArray, NumArray)> {
    weights.check(x.len(), h_prev.len(), c_prev.len())?;
    let mut h = h_prev.data().to_vec();
    let mut c = c_prev.data().to_vec();
    let mut scratch = LstmScratch::new(x.len(), weights.hidden());
    lstm_step(weights, x.data(), &mut h, &mut c, &mut scratch);
    Ok((NumArray::vector(h), NumArray::vector(c)))
}

#[derive(Clone)]
pub(crate) struct LstmScratch {
    input: Vec<f64>,
    gates: Vec<f64>,
}

impl LstmScratch {
    pub(crate) fn new(x: usize, hidden: usize) -> Self {
        LstmScratch {
            input: vec![0.0; x + hidden],
            gates: vec![0.0; 4 * hidden],
        }
    }
}

/// In-place LSTM update of `h` and `c`; dimensions are trusted.
pub(crate) fn lstm_step(
    weights: LstmWeights<'_>,
    x: &[f64],
    h: &mut [f64],
    c: &mut [f64],
    scratch: &mut LstmScratch,
) {
    let hidden = h.len();
    scratch.input[..x.len()].copy_from_slice(x);
    scratch.input[x.len()..].copy_from_slice(h);
    matvec_into(weights.w.data(), weights.w.cols(), &scratch.input, &mut scratch.gates);
    let b = weights.b.data();
    for j in 0..hidden {
        let i_g = sigmoid(scratch.gates[j] + b[j]);
        let f_g = sigmoid(scratch.gates[hidden + j] + b[hidden + j]);
        let g_g = (scratch.gates[2 * hidden + j] + b[2 * hidden + j]).tanh();
        let o_g = sigmoid(scratch.gates[3 * hidden + j] + b[3 * hidden + j]);
        c[j] = f_g * c[j] + i_g * g_g;
        h[j] = o_g * c[j].tanh();
    }
}

/// Records one LSTM step; returns `(h, c)`.
pub fn lstm_cell_graph(
    tape: &mut Tape<'_>,
    x: Var,
    h_prev: Var,
    c_prev: Var,
    w: Var,
    b: Var,
) -> Result<(Var, Var)> {
    let hidden = tape.value(h_prev).len();
    let input = tape.concat(&[x, h_prev])?;
    let z = tape.matvec(w, input)?;
    let z = tape.add(z, b)?;
    let zi = tape.slice(z, 0, hidden)?;
    let zf = tape.slice(z, hidden, hidden)?;
    let zg = tape.slice(z, 2 * hidden, hidden)?;
    let zo = tape.slice(z, 3 * hidden, hidden)?;
    let i_g = tape.sigmoid(zi);
    let f_g = tape.sigmoid(zf);
    let g_g = tape.tanh(zg);
    let o_g = tape.sigmoid(zo);
    let keep = tape.mul(f_g, c_prev)?;
    let write = tape.mul(i_g, g_g)?;
    let c = tape.add(keep, write)?;
    let squashed = tape.tanh(c);
    let h = tape.mul(o_g, squashed)?;
    Ok((h, c))
}

/// Valid convolution of one kernel `[l×E]` over a `[L×E]` sequence,
/// followed by `act`. Output has `L−l+1` entries.
pub fn conv1d_valid(
    sequence: &NumArray,
    kernel: &NumArray,
    bias: f64,
    act: Activation,
) -> Result<NumArray> {
    if sequence.ndim() != 2 || kernel.ndim() != 2 || sequence.cols() != kernel.cols() {
        return Err(Error::Dimension(format!(
            "conv1d sequence {:?} kernel {:?}",
            sequence.shape(),
            kernel.shape()
        )));
    }
    let (len, window) = (sequence.rows(), kernel.rows());
    if window == 0 || window > len {
        return Err(Error::Dimension(format!(
            "window {window} exceeds sequence length {len}"
        )));
    }
    let span = kernel.len();
    let e = sequence.cols();
    let out = (0..=len - window)
        .map(|i| act.apply(dot(kernel.data(), &sequence.data()[i * e..i * e + span]) + bias))
        .collect();
    Ok(NumArray::vector(out))
}

/// Maximum entry of a feature map and its first index.
pub fn max_over_time(feature_map: &NumArray) -> Result<(f64, usize)> {
    if feature_map.is_empty() {
        return Err(Error::Dimension("max over an empty feature map".into()));
    }
    let (i, v) = first_argmax(feature_map.data());
    Ok((v, i))
}

/// Borrowed highway-layer weights: transform gate `(wt, bt)` and
/// nonlinear transform `(wh, bh)`, all square in the feature width.
#[derive(Clone, Copy)]
pub struct HighwayWeights<'a> {
    pub wt: &'a NumArray,
    pub bt: &'a NumArray,
    pub wh: &'a NumArray,
    pub bh: &'a NumArray,
    pub act: Activation,
}

impl HighwayWeights<'_> {
    fn check(&self, f: usize) -> Result<()> {
        let square = |m: &NumArray| m.ndim() == 2 && m.rows() == f && m.cols() == f;
        if !square(self.wt) || !square(self.wh) || self.bt.len() != f || self.bh.len() != f {
            return Err(Error::Dimension(format!(
                "highway weights do not match feature width {f}"
            )));
        }
        Ok(())
    }
}

/// `y = T(x)·H(x) + (1 − T(x))·x`.
pub fn highway_layer(x: &NumArray, weights: HighwayWeights<'_>) -> Result<NumArray> {
    let f = x.len();
    weights.check(f)?;
    let mut t = vec![0.0; f];
    let mut h = vec![0.0; f];
    matvec_into(weights.wt.data(), f, x.data(), &mut t);
    matvec_into(weights.wh.data(), f, x.data(), &mut h);
    let out = (0..f)
        .map(|j| {
            let gate = sigmoid(t[j] + weights.bt.data()[j]);
            let transformed = weights.act.apply(h[j] + weights.bh.data()[j]);
            gate * transformed + (1.0 - gate) * x.data()[j]
        })
        .collect();
    Ok(NumArray::vector(out))
}

/// Binary cross-entropy of `sigmoid(logit)` against `target`.
pub fn bce_from_logit(logit: f64, target: f64) -> f64 {
    super::array::softplus(logit) - target * logit
}

#[allow(clippy::too_many_arguments)]
pub fn highway_graph(
    tape: &mut Tape<'_>,
    x: Var,
    wt: Var,
    bt: Var,
    wh: Var,
    bh: Var,
    act: Activation,
) -> Result<Var> {
    let t = tape.matvec(wt, x)?;
    let t = tape.add(t, bt)?;
    let gate = tape.sigmoid(t);
    let h = tape.matvec(wh, x)?;
    let h = tape.add(h, bh)?;
    let h = tape.activation(h, act);
    let carry = tape.one_minus(gate);
    let a = tape.mul(gate, h)?;
    let b = tape.mul(carry, x)?;
    tape.add(a, b)
}

//! Word-level multi-layer LSTM trained with truncated backpropagation
//! through time.
//!
//! Each layer computes, for input `x` and previous state `(h, c)`:
//!
//! ```text
//! z = W·[x; h] + b          (4H rows, gate order i, f, g, o)
//! i = σ(z_i)  f = σ(z_f)  g = tanh(z_g)  o = σ(z_o)
//! c' = f ⊙ c + i ⊙ g
//! h' = o ⊙ tanh(c')
//! ```
//!
//! The top layer's `h` feeds a softmax output projection over the
//! vocabulary. Parameters are plain row-major `f64` buffers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{softmax_in_place, LmSession, NextWordModel};
use crate::corpus::{Vocabulary, WordId};
use crate::error::{Error, Result};

pub const CLIP_NORM: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LstmConfig {
    pub layers: usize,
    pub hidden: usize,
    pub embed: usize,
    pub unroll: usize,
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for LstmConfig {
    fn default() -> Self {
        Self {
            layers: 2,
            hidden: 64,
            embed: 64,
            unroll: 35,
            init_scale: 0.08,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Layer {
    input: usize,
    /// 4H × (input + H)
    w: Vec<f64>,
    /// 4H
    b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmModel {
    vocab: Vocabulary,
    config: LstmConfig,
    /// V × E
    embedding: Vec<f64>,
    layers: Vec<Layer>,
    /// V × H
    out_w: Vec<f64>,
    /// V
    out_b: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Training perplexity after each epoch.
    pub perplexity: Vec<f64>,
}

/// Recurrent state: one (h, c) pair per layer.
#[derive(Debug, Clone, PartialEq)]
struct State {
    h: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
}

impl State {
    fn zeros(layers: usize, hidden: usize) -> Self {
        Self {
            h: vec![vec![0.0; hidden]; layers],
            c: vec![vec![0.0; hidden]; layers],
        }
    }

    fn is_finite(&self) -> bool {
        self.h.iter().chain(&self.c).flatten().all(|v| v.is_finite())
    }
}

/// Everything one layer needs at one time step for the backward pass.
struct CellCache {
    xh: Vec<f64>,
    i: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    c_prev: Vec<f64>,
    tanh_c: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn matvec(w: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(w.len(), rows * cols);
    for (r, o) in out.iter_mut().enumerate().take(rows) {
        let row = &w[r * cols..(r + 1) * cols];
        *o += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

impl Layer {
    fn step(&self, hidden: usize, x: &[f64], h: &mut Vec<f64>, c: &mut Vec<f64>) -> CellCache {
        let cols = self.input + hidden;
        let mut xh = Vec::with_capacity(cols);
        xh.extend_from_slice(x);
        xh.extend_from_slice(h);
        let mut z = self.b.clone();
        matvec(&self.w, 4 * hidden, cols, &xh, &mut z);
        let i: Vec<f64> = z[..hidden].iter().map(|&v| sigmoid(v)).collect();
        let f: Vec<f64> = z[hidden..2 * hidden].iter().map(|&v| sigmoid(v)).collect();
        let g: Vec<f64> = z[2 * hidden..3 * hidden].iter().map(|&v| v.tanh()).collect();
        let o: Vec<f64> = z[3 * hidden..].iter().map(|&v| sigmoid(v)).collect();
        let c_prev = std::mem::take(c);
        *c = (0..hidden).map(|k| f[k] * c_prev[k] + i[k] * g[k]).collect();
        let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
        *h = (0..hidden).map(|k| o[k] * tanh_c[k]).collect();
        CellCache {
            xh,
            i,
            f,
            g,
            o,
            c_prev,
            tanh_c,
        }
    }
}

impl LstmModel {
    /// Randomly initialized model, weights uniform in ±`init_scale`.
    pub fn new(vocab: Vocabulary, config: LstmConfig) -> Result<Self> {
        if config.layers == 0 || config.hidden == 0 || config.embed == 0 {
            return Err(Error::InvalidParameter(
                "LSTM layers, hidden size and embedding size must be positive".into(),
            ));
        }
        if config.unroll == 0 {
            return Err(Error::InvalidParameter("unroll length must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let s = config.init_scale;
        let mut uniform = |n: usize| -> Vec<f64> {
            (0..n)
                .map(|_| if s > 0.0 { rng.gen_range(-s..=s) } else { 0.0 })
                .collect()
        };
        let (v, h, e) = (vocab.len(), config.hidden, config.embed);
        let embedding = uniform(v * e);
        let layers = (0..config.layers)
            .map(|l| {
                let input = if l == 0 { e } else { h };
                Layer {
                    input,
                    w: uniform(4 * h * (input + h)),
                    b: uniform(4 * h),
                }
            })
            .collect();
        let out_w = uniform(v * h);
        let out_b = uniform(v);
        Ok(Self {
            vocab,
            config,
            embedding,
            layers,
            out_w,
            out_b,
        })
    }

    pub fn config(&self) -> &LstmConfig {
        &self.config
    }

    /// Every parameter buffer in a fixed order: embedding, then `w` and `b`
    /// of each layer, then the output weights and bias.
    pub fn param_tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = vec![&self.embedding];
        for l in &self.layers {
            out.push(&l.w);
            out.push(&l.b);
        }
        out.push(&self.out_w);
        out.push(&self.out_b);
        out
    }

    pub fn param_tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![&mut self.embedding];
        for l in &mut self.layers {
            out.push(&mut l.w);
            out.push(&mut l.b);
        }
        out.push(&mut self.out_w);
        out.push(&mut self.out_b);
        out
    }

    fn zero_grads(&self) -> Vec<Vec<f64>> {
        self.param_tensors().iter().map(|t| vec![0.0; t.len()]).collect()
    }

    fn embed(&self, word: WordId) -> &[f64] {
        let e = self.config.embed;
        let w = if word.index() < self.vocab.len() { word.index() } else { WordId::UNK.index() };
        &self.embedding[w * e..(w + 1) * e]
    }

    fn step(&self, state: &mut State, word: WordId) -> Vec<CellCache> {
        let mut x = self.embed(word).to_vec();
        let mut caches = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate() {
            let cache = layer.step(self.config.hidden, &x, &mut state.h[l], &mut state.c[l]);
            x.clone_from(&state.h[l]);
            caches.push(cache);
        }
        caches
    }

    fn output(&self, state: &State) -> Vec<f64> {
        let top = state.h.last().expect("at least one layer");
        let mut logits = self.out_b.clone();
        matvec(&self.out_w, self.vocab.len(), self.config.hidden, top, &mut logits);
        softmax_in_place(&mut logits);
        logits
    }

    /// Mean cross-entropy of predicting `targets[t]` after `inputs[..=t]`,
    /// starting from the zero state.
    pub fn sequence_loss(&self, inputs: &[WordId], targets: &[WordId]) -> Result<f64> {
        check_pair(inputs, targets)?;
        let mut state = State::zeros(self.layers.len(), self.config.hidden);
        let mut total = 0.0;
        for (&x, &y) in inputs.iter().zip(targets) {
            self.step(&mut state, x);
            let p = self.output(&state);
            total -= p[y.index()].ln();
        }
        Ok(total / inputs.len() as f64)
    }

    /// Mean cross-entropy from the zero state and its gradient with respect
    /// to every buffer of [`param_tensors`](Self::param_tensors).
    pub fn loss_and_gradients(&self, inputs: &[WordId], targets: &[WordId]) -> Result<(f64, Vec<Vec<f64>>)> {
        check_pair(inputs, targets)?;
        let mut state = State::zeros(self.layers.len(), self.config.hidden);
        let (loss, grads) = self.bptt(&mut state, inputs, targets);
        Ok((loss, grads))
    }

    /// Forward over the window from `state` (left at the final state), then
    /// backward. Returns the summed cross-entropy divided by the window length.
    fn bptt(&self, state: &mut State, inputs: &[WordId], targets: &[WordId]) -> (f64, Vec<Vec<f64>>) {
        let (v, hsz, nl) = (self.vocab.len(), self.config.hidden, self.layers.len());
        let steps = inputs.len();
        let scale = 1.0 / steps as f64;

        let mut caches = Vec::with_capacity(steps);
        let mut tops = Vec::with_capacity(steps);
        let mut probs = Vec::with_capacity(steps);
        let mut loss = 0.0;
        for (&x, &y) in inputs.iter().zip(targets) {
            caches.push(self.step(state, x));
            let p = self.output(state);
            loss -= p[y.index()].ln();
            tops.push(state.h[nl - 1].clone());
            probs.push(p);
        }

        let mut grads = self.zero_grads();
        let out_w_ix = 1 + 2 * nl;
        let out_b_ix = out_w_ix + 1;
        let mut dh_next = vec![vec![0.0; hsz]; nl];
        let mut dc_next = vec![vec![0.0; hsz]; nl];

        for t in (0..steps).rev() {
            let mut dlogits = std::mem::take(&mut probs[t]);
            dlogits[targets[t].index()] -= 1.0;
            dlogits.iter_mut().for_each(|d| *d *= scale);

            let mut dh = dh_next[nl - 1].clone();
            for (r, &dl) in dlogits.iter().enumerate().take(v) {
                if dl == 0.0 {
                    continue;
                }
                let row = &self.out_w[r * hsz..(r + 1) * hsz];
                let grow = &mut grads[out_w_ix][r * hsz..(r + 1) * hsz];
                for k in 0..hsz {
                    grow[k] += dl * tops[t][k];
                    dh[k] += dl * row[k];
                }
                grads[out_b_ix][r] += dl;
            }

            for l in (0..nl).rev() {
                if l < nl - 1 {
                    for (a, b) in dh.iter_mut().zip(&dh_next[l]) {
                        *a += b;
                    }
                }
                let layer = &self.layers[l];
                let cc = &caches[t][l];
                let cols = layer.input + hsz;
                let mut dz = vec![0.0; 4 * hsz];
                for k in 0..hsz {
                    let d_o = dh[k] * cc.tanh_c[k];
                    let dc = dh[k] * cc.o[k] * (1.0 - cc.tanh_c[k] * cc.tanh_c[k]) + dc_next[l][k];
                    let di = dc * cc.g[k];
                    let dg = dc * cc.i[k];
                    let df = dc * cc.c_prev[k];
                    dc_next[l][k] = dc * cc.f[k];
                    dz[k] = di * cc.i[k] * (1.0 - cc.i[k]);
                    dz[hsz + k] = df * cc.f[k] * (1.0 - cc.f[k]);
                    dz[2 * hsz + k] = dg * (1.0 - cc.g[k] * cc.g[k]);
                    dz[3 * hsz + k] = d_o * cc.o[k] * (1.0 - cc.o[k]);
                }
                let w_ix = 1 + 2 * l;
                let mut dxh = vec![0.0; cols];
                for (r, &d) in dz.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    grads[w_ix + 1][r] += d;
                    let row = &layer.w[r * cols..(r + 1) * cols];
                    let grow = &mut grads[w_ix][r * cols..(r + 1) * cols];
                    for k in 0..cols {
                        grow[k] += d * cc.xh[k];
                        dxh[k] += d * row[k];
                    }
                }
                dh_next[l] = dxh[layer.input..].to_vec();
                dxh.truncate(layer.input);
                if l == 0 {
                    let e = self.config.embed;
                    let w = if inputs[t].index() < v { inputs[t].index() } else { WordId::UNK.index() };
                    for (g, d) in grads[0][w * e..(w + 1) * e].iter_mut().zip(&dxh) {
                        *g += d;
                    }
                } else {
                    dh = dxh;
                }
            }
        }
        (loss * scale, grads)
    }

    /// Truncated BPTT over `stream` in consecutive windows of `unroll`
    /// steps, carrying the recurrent state across windows. Plain SGD with the
    /// global gradient norm clipped at [`CLIP_NORM`].
    pub fn train(&mut self, stream: &[WordId], epochs: usize, learning_rate: f64, unroll: usize) -> Result<TrainReport> {
        if unroll == 0 {
            return Err(Error::InvalidParameter("unroll length must be positive".into()));
        }
        if stream.len() <= unroll {
            return Err(Error::InvalidInput(format!(
                "token stream of length {} must be longer than the unroll length {unroll}",
                stream.len()
            )));
        }
        let mut report = TrainReport::default();
        for epoch in 0..epochs {
            let mut state = State::zeros(self.layers.len(), self.config.hidden);
            let mut total = 0.0;
            let mut count = 0usize;
            let mut start = 0;
            let mut step = 0;
            while start + 1 < stream.len() {
                let end = (start + unroll).min(stream.len() - 1);
                let inputs = &stream[start..end];
                let targets = &stream[start + 1..=end];
                let (loss, mut grads) = self.bptt(&mut state, inputs, targets);
                if !loss.is_finite() || !state.is_finite() {
                    return Err(Error::Diverged { epoch, step, loss });
                }
                total += loss * inputs.len() as f64;
                count += inputs.len();
                clip_global_norm(&mut grads, CLIP_NORM);
                for (p, g) in self.param_tensors_mut().into_iter().zip(&grads) {
                    for (a, b) in p.iter_mut().zip(g) {
                        *a -= learning_rate * b;
                    }
                }
                start = end;
                step += 1;
            }
            report.perplexity.push((total / count as f64).exp());
        }
        Ok(report)
    }

    pub(crate) fn to_parts(&self) -> LstmParts {
        LstmParts {
            config: self.config,
            tensors: self.param_tensors().into_iter().map(<[f64]>::to_vec).collect(),
        }
    }

    pub(crate) fn from_parts(vocab: Vocabulary, parts: LstmParts) -> Result<Self> {
        let mut cfg = parts.config;
        cfg.init_scale = 0.0;
        let mut model = Self::new(vocab, cfg)?;
        model.config = parts.config;
        let mut slots = model.param_tensors_mut();
        if slots.len() != parts.tensors.len() {
            return Err(Error::InvalidInput("LSTM parameter count does not match its configuration".into()));
        }
        for (slot, t) in slots.iter_mut().zip(&parts.tensors) {
            if slot.len() != t.len() {
                return Err(Error::InvalidInput("LSTM parameter shape does not match its configuration".into()));
            }
            slot.copy_from_slice(t);
        }
        Ok(model)
    }
}

fn check_pair(inputs: &[WordId], targets: &[WordId]) -> Result<()> {
    if inputs.is_empty() || inputs.len() != targets.len() {
        return Err(Error::InvalidInput(
            "inputs and targets must be nonempty and of equal length".into(),
        ));
    }
    Ok(())
}

fn clip_global_norm(grads: &mut [Vec<f64>], max_norm: f64) {
    let norm = grads.iter().flatten().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        grads.iter_mut().flatten().for_each(|g| *g *= s);
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct LstmParts {
    config: LstmConfig,
    tensors: Vec<Vec<f64>>,
}

impl NextWordModel for LstmModel {
    type Session<'a> = LstmSession<'a>;

    fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    fn session(&self) -> LstmSession<'_> {
        LstmSession {
            model: self,
            state: State::zeros(self.layers.len(), self.config.hidden),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LstmSession<'a> {
    model: &'a LstmModel,
    state: State,
}

impl LmSession for LstmSession<'_> {
    fn reset(&mut self) {
        self.state = State::zeros(self.model.layers.len(), self.model.config.hidden);
    }

    fn feed(&mut self, word: WordId) -> Result<()> {
        self.model.step(&mut self.state, word);
        if !self.state.is_finite() {
            return Err(Error::NumericFailure("LSTM state became non-finite".into()));
        }
        Ok(())
    }

    fn next_distribution(&self) -> Result<Vec<f64>> {
        let p = self.model.output(&self.state);
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericFailure("LSTM output is non-finite".into()));
        }
        Ok(p)
    }
}

//! LinRel user intent model with upper-confidence-bound word selection.
//!
//! `X` is a V'×M tf-idf term-document matrix (one column per sampled
//! document, one row per non-stop word). Given the relevance vector `y` of
//! recently written words:
//!
//! ```text
//! ŵ = (XᵀX + μI)⁻¹ Xᵀ y          user intent over documents
//! ŷ = X ŵ = A y                   A = X (XᵀX + μI)⁻¹ Xᵀ
//! σ̂_i = ‖row_i(A)‖²               confidence width
//! v = ŷ + c·σ̂                     words ranked by v
//! ```
//!
//! `G = XᵀX + μI` is factored once as `L·D·Lᵀ` (unit lower-triangular `L`,
//! diagonal `D`); no inverse is formed. With `C = L⁻¹XᵀX L⁻ᵀ` and
//! `u_i = D⁻¹L⁻¹x_i` (x_i the i-th row of X), `σ̂_i = u_iᵀ C u_i`. σ̂ does not
//! depend on `y` and is computed once per matrix.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusStats, Document};
use crate::error::{Error, Result};
use crate::stopwords::StopWords;

pub const DEFAULT_MU: f64 = 1.0;
pub const DEFAULT_C: f64 = 1.0;
pub const DEFAULT_TAU: f64 = 0.1;
pub const DEFAULT_SAMPLE: usize = 2000;

/// Which norm of `row_i(A)` is reported as the confidence width.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WidthNorm {
    /// `‖row_i(A)‖²`
    #[default]
    Squared,
    /// `‖row_i(A)‖`
    Euclidean,
}

/// Sparse nonnegative term-document matrix stored by row.
#[derive(Debug, Clone, PartialEq)]
pub struct TermDocMatrix {
    words: Vec<String>,
    rows: Vec<Vec<(usize, f64)>>,
    cols: usize,
    row_of: HashMap<String, usize>,
}

impl TermDocMatrix {
    /// Columns are `docs[c]` for each `c` in `columns`; entries are raw term
    /// frequency times `stats` idf. Stop words and words with no idf are
    /// excluded; rows are ordered lexicographically.
    pub fn build(docs: &[Document], columns: &[usize], stats: &CorpusStats, stopwords: &StopWords) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::InvalidInput("term-document matrix needs at least one document".into()));
        }
        let mut entries: BTreeMap<String, Vec<(usize, f64)>> = BTreeMap::new();
        for (j, &c) in columns.iter().enumerate() {
            let doc = docs
                .get(c)
                .ok_or_else(|| Error::InvalidInput(format!("column refers to missing document #{c}")))?;
            let mut tf: BTreeMap<String, u32> = BTreeMap::new();
            for t in doc.tokens() {
                if !stopwords.contains(&t) {
                    *tf.entry(t).or_default() += 1;
                }
            }
            for (word, count) in tf {
                if let Some(idf) = stats.idf(&word) {
                    entries.entry(word).or_default().push((j, f64::from(count) * idf));
                }
            }
        }
        let (words, rows): (Vec<String>, Vec<Vec<(usize, f64)>>) = entries.into_iter().unzip();
        Ok(Self::assemble(words, rows, columns.len()))
    }

    /// Dense constructor; `rows[i][j]` is the weight of `words[i]` in
    /// document `j`. Entries must be finite and nonnegative.
    pub fn from_dense(words: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if words.len() != rows.len() {
            return Err(Error::InvalidInput("one word per row required".into()));
        }
        let cols = rows.first().map_or(0, Vec::len);
        if cols == 0 || rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidInput("rows must be nonempty and of equal length".into()));
        }
        if rows.iter().flatten().any(|&x| !(x >= 0.0 && x.is_finite())) {
            return Err(Error::InvalidInput("matrix entries must be finite and nonnegative".into()));
        }
        if words.iter().collect::<BTreeSet<_>>().len() != words.len() {
            return Err(Error::InvalidInput("duplicate row words".into()));
        }
        let sparse = rows
            .into_iter()
            .map(|r| r.into_iter().enumerate().filter(|&(_, x)| x != 0.0).collect())
            .collect();
        Ok(Self::assemble(words, sparse, cols))
    }

    fn assemble(words: Vec<String>, rows: Vec<Vec<(usize, f64)>>, cols: usize) -> Self {
        let row_of = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Self {
            words,
            rows,
            cols,
            row_of,
        }
    }

    pub fn num_words(&self) -> usize {
        self.words.len()
    }

    pub fn num_docs(&self) -> usize {
        self.cols
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn row_of(&self, word: &str) -> Option<usize> {
        self.row_of.get(word).copied()
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|r| {
                let mut d = vec![0.0; self.cols];
                for &(j, x) in r {
                    d[j] = x;
                }
                d
            })
            .collect()
    }

    /// `XᵀX` as a dense M×M row-major buffer.
    fn gram(&self) -> Vec<f64> {
        let m = self.cols;
        let mut g = vec![0.0; m * m];
        for r in &self.rows {
            for &(a, xa) in r {
                for &(b, xb) in r {
                    g[a * m + b] += xa * xb;
                }
            }
        }
        g
    }
}

/// Chooses `min(m, n_docs)` distinct document positions, sorted.
pub fn sample_columns(n_docs: usize, m: usize, seed: u64) -> Vec<usize> {
    let m = m.min(n_docs);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cols = sample(&mut rng, n_docs, m).into_vec();
    cols.sort_unstable();
    cols
}

/// Dense `L·D·Lᵀ` factorization of a symmetric positive-definite matrix.
#[derive(Debug, Clone)]
struct Ldl {
    n: usize,
    /// Unit lower triangle, row-major; the diagonal is implicit.
    l: Vec<f64>,
    d: Vec<f64>,
}

impl Ldl {
    fn factor(a: &[f64], n: usize) -> Result<Self> {
        let scale = (0..n).map(|i| a[i * n + i].abs()).fold(0.0, f64::max);
        let mut l = vec![0.0; n * n];
        let mut d = vec![0.0; n];
        for j in 0..n {
            let mut dj = a[j * n + j];
            for k in 0..j {
                dj -= l[j * n + k] * l[j * n + k] * d[k];
            }
            if !(dj > scale * 1e-14) || !dj.is_finite() {
                return Err(Error::NumericFailure(format!(
                    "regularized Gram matrix is singular or indefinite (pivot {j} = {dj:e})"
                )));
            }
            d[j] = dj;
            for i in j + 1..n {
                let mut v = a[i * n + j];
                for k in 0..j {
                    v -= l[i * n + k] * l[j * n + k] * d[k];
                }
                l[i * n + j] = v / dj;
            }
        }
        Ok(Self { n, l, d })
    }

    /// x ← L⁻¹ x
    fn forward(&self, x: &mut [f64]) {
        for i in 0..self.n {
            let row = &self.l[i * self.n..i * self.n + i];
            let s: f64 = row.iter().zip(&x[..i]).map(|(a, b)| a * b).sum();
            x[i] -= s;
        }
    }

    /// x ← L⁻ᵀ x
    fn backward(&self, x: &mut [f64]) {
        for i in (0..self.n).rev() {
            let mut s = 0.0;
            for k in i + 1..self.n {
                s += self.l[k * self.n + i] * x[k];
            }
            x[i] -= s;
        }
    }

    /// x ← G⁻¹ x
    fn solve(&self, x: &mut [f64]) {
        self.forward(x);
        for (v, d) in x.iter_mut().zip(&self.d) {
            *v /= d;
        }
        self.backward(x);
    }
}

/// LinRel estimator bound to one matrix and regularizer.
#[derive(Debug, Clone)]
pub struct LinRel {
    matrix: TermDocMatrix,
    mu: f64,
    ldl: Ldl,
    sigma: Vec<f64>,
    norm: WidthNorm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinRelSolution {
    /// User intent model over the M documents.
    pub w_hat: Vec<f64>,
    /// Relevance estimate per word.
    pub y_hat: Vec<f64>,
    /// Confidence width per word.
    pub sigma: Vec<f64>,
}

impl LinRelSolution {
    /// `v = ŷ + c·σ̂`
    pub fn ucb(&self, c: f64) -> Vec<f64> {
        self.y_hat.iter().zip(&self.sigma).map(|(y, s)| y + c * s).collect()
    }
}

impl LinRel {
    pub fn new(matrix: TermDocMatrix, mu: f64) -> Result<Self> {
        Self::with_norm(matrix, mu, WidthNorm::Squared)
    }

    pub fn with_norm(matrix: TermDocMatrix, mu: f64, norm: WidthNorm) -> Result<Self> {
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(Error::InvalidParameter(format!("μ must be finite and >= 0, got {mu}")));
        }
        let m = matrix.cols;
        let gram = matrix.gram();
        let mut g = gram.clone();
        for i in 0..m {
            g[i * m + i] += mu;
        }
        let ldl = Ldl::factor(&g, m)?;

        // C = L⁻¹ (XᵀX) L⁻ᵀ. Columns of Y = L⁻¹K, then C = L⁻¹Yᵀ (K symmetric).
        let mut y = vec![0.0; m * m];
        let mut col = vec![0.0; m];
        for j in 0..m {
            for i in 0..m {
                col[i] = gram[i * m + j];
            }
            ldl.forward(&mut col);
            for i in 0..m {
                y[i * m + j] = col[i];
            }
        }
        let mut c = vec![0.0; m * m];
        for j in 0..m {
            // column j of Yᵀ is row j of Y
            col.copy_from_slice(&y[j * m..(j + 1) * m]);
            ldl.forward(&mut col);
            for i in 0..m {
                c[i * m + j] = col[i];
            }
        }

        let sigma: Vec<f64> = matrix
            .rows
            .par_iter()
            .map(|row| {
                let mut u = vec![0.0; m];
                for &(j, x) in row {
                    u[j] = x;
                }
                ldl.forward(&mut u);
                for (v, d) in u.iter_mut().zip(&ldl.d) {
                    *v /= d;
                }
                let mut s = 0.0;
                for a in 0..m {
                    if u[a] == 0.0 {
                        continue;
                    }
                    let crow = &c[a * m..(a + 1) * m];
                    s += u[a] * crow.iter().zip(&u).map(|(p, q)| p * q).sum::<f64>();
                }
                let s = s.max(0.0);
                match norm {
                    WidthNorm::Squared => s,
                    WidthNorm::Euclidean => s.sqrt(),
                }
            })
            .collect();

        Ok(Self {
            matrix,
            mu,
            ldl,
            sigma,
            norm,
        })
    }

    pub fn matrix(&self) -> &TermDocMatrix {
        &self.matrix
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn width_norm(&self) -> WidthNorm {
        self.norm
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn solve(&self, y: &[f64]) -> Result<LinRelSolution> {
        let x = &self.matrix;
        if y.len() != x.num_words() {
            return Err(Error::InvalidInput(format!(
                "relevance vector has {} entries, matrix has {} rows",
                y.len(),
                x.num_words()
            )));
        }
        let mut w = vec![0.0; x.cols];
        for (row, &yi) in x.rows.iter().zip(y) {
            if yi != 0.0 {
                for &(j, v) in row {
                    w[j] += v * yi;
                }
            }
        }
        self.ldl.solve(&mut w);
        let y_hat = x
            .rows
            .iter()
            .map(|row| row.iter().map(|&(j, v)| v * w[j]).sum())
            .collect();
        Ok(LinRelSolution {
            w_hat: w,
            y_hat,
            sigma: self.sigma.clone(),
        })
    }
}

/// Relevance vector with per-word recency counters.
///
/// A word in the latest window has `y = 1`; a word last seen `n` windows ago
/// (counting the latest as 1) has `y = 1/n`, zeroed once below `τ`.
#[derive(Debug, Clone, PartialEq)]
pub struct RelevanceState {
    y: Vec<f64>,
    /// Windows since last occurrence; 0 means never seen.
    since: Vec<u32>,
    tau: f64,
}

impl RelevanceState {
    pub fn new(num_words: usize, tau: f64) -> Self {
        Self {
            y: vec![0.0; num_words],
            since: vec![0; num_words],
            tau,
        }
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn windows_since(&self, row: usize) -> u32 {
        self.since[row]
    }

    pub fn reset(&mut self) {
        self.y.fill(0.0);
        self.since.fill(0);
    }

    /// One tick per window. Words without a matrix row are ignored.
    pub fn update<S: AsRef<str>>(&mut self, matrix: &TermDocMatrix, window: &[S]) {
        let present: BTreeSet<usize> = window.iter().filter_map(|w| matrix.row_of(w.as_ref())).collect();
        for i in 0..self.y.len() {
            if present.contains(&i) {
                self.since[i] = 1;
                self.y[i] = 1.0;
            } else if self.since[i] > 0 {
                self.since[i] += 1;
                let y = 1.0 / f64::from(self.since[i]);
                self.y[i] = if y < self.tau { 0.0 } else { y };
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntentTerm {
    pub word: String,
    pub y_hat: f64,
    pub sigma: f64,
    pub v: f64,
}

/// The `n_exp` words with the largest `v = ŷ + c·σ̂`, excluding window and
/// stop words; ties broken lexicographically.
pub fn linrel_expand<S: AsRef<str>>(
    matrix: &TermDocMatrix,
    solution: &LinRelSolution,
    window: &[S],
    n_exp: usize,
    c: f64,
    stopwords: &StopWords,
) -> Vec<IntentTerm> {
    let excluded: BTreeSet<&str> = window.iter().map(AsRef::as_ref).collect();
    let mut terms: Vec<IntentTerm> = matrix
        .words
        .iter()
        .enumerate()
        .filter(|(_, w)| !excluded.contains(w.as_str()) && !stopwords.contains(w))
        .map(|(i, w)| IntentTerm {
            word: w.clone(),
            y_hat: solution.y_hat[i],
            sigma: solution.sigma[i],
            v: solution.y_hat[i] + c * solution.sigma[i],
        })
        .collect();
    terms.sort_by(|a, b| {
        b.v.partial_cmp(&a.v)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.word.cmp(&b.word))
    });
    terms.truncate(n_exp);
    terms
}

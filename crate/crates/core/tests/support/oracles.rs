//! Independent reference implementations shared by the oracle tests and the
//! acceptance report. Each check returns `Err` with a description of the
//! first mismatch.
#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use proactive_core::beam::{beam_expand, BeamParams};
use proactive_core::corpus::{CorpusStats, Document, Vocabulary, WordId};
use proactive_core::index::{InvertedIndex, WeightedQuery};
use proactive_core::intent::{LinRel, TermDocMatrix};
use proactive_core::lm::{LmSession, LstmConfig, LstmModel, NGramModel, NextWordModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check<T = ()> = Result<T, String>;

// ---------------------------------------------------------------- beam ----

#[derive(Debug, Clone)]
struct FullNode {
    word: WordId,
    prob: f64,
    score: f64,
    children: Vec<FullNode>,
}

fn top_b(model: &NGramModel, history: &[WordId], b: usize) -> Vec<(WordId, f64)> {
    let mut s = model.session();
    for &w in history {
        s.feed(w).unwrap();
    }
    let dist = s.next_distribution().unwrap();
    let vocab = model.vocab();
    let mut all: Vec<(WordId, f64)> = dist
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != WordId::UNK.index())
        .map(|(i, &p)| (WordId(i), p))
        .collect();
    all.sort_by(|a, c| {
        c.1.partial_cmp(&a.1)
            .unwrap()
            .then_with(|| vocab.word(a.0).cmp(vocab.word(c.0)))
    });
    all.truncate(b);
    all.retain(|&(_, p)| p > 0.0);
    all
}

/// The complete top-`b` tree, each prefix queried through a fresh session.
fn grow(model: &NGramModel, history: &mut Vec<WordId>, score: f64, b: usize, depth: usize) -> Vec<FullNode> {
    if depth == 0 {
        return Vec::new();
    }
    top_b(model, history, b)
        .into_iter()
        .map(|(word, prob)| {
            history.push(word);
            let children = grow(model, history, score * prob, b, depth - 1);
            history.pop();
            FullNode {
                word,
                prob,
                score: score * prob,
                children,
            }
        })
        .collect()
}

/// (word, prob, score, parent rank) per level, trailing empty levels removed.
pub fn beam_reference(
    model: &NGramModel,
    context: &[WordId],
    p: BeamParams,
) -> Vec<Vec<(WordId, f64, f64, Option<usize>)>> {
    let vocab = model.vocab();
    let roots = grow(model, &mut context.to_vec(), 1.0, p.b, p.d);
    let mut out = Vec::new();
    let mut survivors: Vec<&FullNode> = Vec::new();
    for level in 0..p.d {
        let mut cands: Vec<(&FullNode, Option<usize>)> = if level == 0 {
            roots.iter().map(|n| (n, None)).collect()
        } else {
            survivors
                .iter()
                .enumerate()
                .flat_map(|(i, n)| n.children.iter().map(move |c| (c, Some(i))))
                .collect()
        };
        cands.sort_by(|(a, pa), (c, pc)| {
            c.score
                .partial_cmp(&a.score)
                .unwrap_or(Ordering::Equal)
                .then_with(|| c.prob.partial_cmp(&a.prob).unwrap_or(Ordering::Equal))
                .then_with(|| vocab.word(a.word).cmp(vocab.word(c.word)))
                .then_with(|| pa.cmp(pc))
        });
        cands.truncate(p.k);
        out.push(cands.iter().map(|(n, par)| (n.word, n.prob, n.score, *par)).collect());
        survivors = cands.into_iter().map(|(n, _)| n).collect();
    }
    while out.last().is_some_and(Vec::is_empty) {
        out.pop();
    }
    out
}

pub fn random_ngram(rng: &mut ChaCha8Rng) -> NGramModel {
    let v = rng.gen_range(3..=6);
    let words: Vec<String> = (0..v).map(|i| ((b'a' + i as u8) as char).to_string()).collect();
    let vocab = Vocabulary::from_words(&words);
    let sents: Vec<Vec<WordId>> = (0..rng.gen_range(1..6))
        .map(|_| {
            (0..rng.gen_range(1..8))
                .map(|_| vocab.id(&words[rng.gen_range(0..v)]))
                .collect()
        })
        .collect();
    let order = rng.gen_range(1..=3);
    let alpha = [0.0, 0.05, 0.5][rng.gen_range(0..3)];
    NGramModel::train_on_sentences(&sents, &vocab, order, alpha).unwrap()
}

/// Random instances with b ≤ 4, k ≤ 3, d ≤ 3.
pub fn beam_equivalence(cases: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..cases {
        let model = random_ngram(&mut rng);
        let params = BeamParams {
            b: rng.gen_range(1..=4),
            k: rng.gen_range(1..=3),
            d: rng.gen_range(1..=3),
        };
        let v = model.vocab().len();
        let context: Vec<WordId> = (0..rng.gen_range(1..4)).map(|_| WordId(rng.gen_range(1..v))).collect();
        let tree = beam_expand(&model, &context, params).map_err(|e| format!("case {case}: {e}"))?;
        let want = beam_reference(&model, &context, params);
        let got: Vec<Vec<_>> = tree
            .levels
            .iter()
            .filter(|l| !l.is_empty())
            .map(|l| l.iter().map(|n| (n.word, n.prob, n.score, n.parent)).collect())
            .collect();
        if got.len() != want.len() {
            return Err(format!("case {case}: {} levels, expected {}", got.len(), want.len()));
        }
        for (level, (gl, wl)) in got.iter().zip(&want).enumerate() {
            if gl.len() != wl.len() {
                return Err(format!("case {case} level {level}: {} nodes, expected {}", gl.len(), wl.len()));
            }
            for (g, w) in gl.iter().zip(wl) {
                if (g.0, g.3) != (w.0, w.3) || (g.1 - w.1).abs() > 1e-12 || (g.2 - w.2).abs() > 1e-12 {
                    return Err(format!("case {case} level {level}: {g:?} vs {w:?}"));
                }
            }
        }
    }
    Ok(())
}

// -------------------------------------------------------------- linrel ----

pub struct DenseLinRel {
    pub w_hat: DVector<f64>,
    pub y_hat: DVector<f64>,
    pub sigma: DVector<f64>,
}

/// ŵ = (XᵀX + μI)⁻¹Xᵀy, ŷ = Xŵ, σ̂ᵢ = ‖row_i(X(XᵀX + μI)⁻¹Xᵀ)‖².
pub fn linrel_reference(x: &DMatrix<f64>, y: &DVector<f64>, mu: f64) -> DenseLinRel {
    let m = x.ncols();
    let g = x.transpose() * x + DMatrix::identity(m, m) * mu;
    let g_inv = g.try_inverse().expect("invertible");
    let w_hat = &g_inv * x.transpose() * y;
    let y_hat = x * &w_hat;
    let a = x * &g_inv * x.transpose();
    let sigma = DVector::from_iterator(a.nrows(), a.row_iter().map(|r| r.norm_squared()));
    DenseLinRel { w_hat, y_hat, sigma }
}

/// Largest relative deviation, relative to the largest reference entry.
pub fn rel_dev(got: &[f64], want: &DVector<f64>) -> f64 {
    let scale = want.amax().max(1e-300);
    got.iter().zip(want.iter()).map(|(g, w)| (g - w).abs() / scale).fold(0.0, f64::max)
}

pub fn random_linrel_instance(rng: &mut ChaCha8Rng, max_v: usize, max_m: usize) -> (Vec<String>, Vec<Vec<f64>>, Vec<f64>) {
    let v = rng.gen_range(1..=max_v);
    let m = rng.gen_range(1..=max_m);
    let density = rng.gen_range(0.1..1.0);
    let words = (0..v).map(|i| format!("w{i:02}")).collect();
    let rows = (0..v)
        .map(|_| {
            (0..m)
                .map(|_| {
                    if rng.gen_bool(density) {
                        f64::from(rng.gen_range(1..4)) * rng.gen_range(1.0..20.0)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    let y = (0..v)
        .map(|_| match rng.gen_range(0..3) {
            0 => 0.0,
            1 => 1.0,
            _ => 1.0 / f64::from(rng.gen_range(1..10)),
        })
        .collect();
    (words, rows, y)
}

/// Random instances with V' ≤ 50, M ≤ 20; returns the worst deviation.
pub fn linrel_equivalence(cases: usize, seed: u64) -> Check<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for case in 0..cases {
        let (words, rows, y) = random_linrel_instance(&mut rng, 50, 20);
        let mu = if case % 2 == 0 { 1.0 } else { rng.gen_range(0.05..5.0) };
        let c = rng.gen_range(0.0..2.0);
        let x = DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j]);
        let want = linrel_reference(&x, &DVector::from_vec(y.clone()), mu);
        let lr = LinRel::new(TermDocMatrix::from_dense(words, rows).unwrap(), mu).map_err(|e| e.to_string())?;
        let sol = lr.solve(&y).map_err(|e| e.to_string())?;
        let v_want = &want.y_hat + &want.sigma * c;
        for (what, dev) in [
            ("w_hat", rel_dev(&sol.w_hat, &want.w_hat)),
            ("y_hat", rel_dev(&sol.y_hat, &want.y_hat)),
            ("sigma", rel_dev(&sol.sigma, &want.sigma)),
            ("v", rel_dev(&sol.ucb(c), &v_want)),
        ] {
            worst = worst.max(dev);
            if dev > 1e-9 {
                return Err(format!("case {case}: {what} deviates by {dev:e}"));
            }
        }
    }
    Ok(worst)
}

/// X = I, μ = 1 must give ŷ = y/2 and σ̂ = 1/4 exactly.
pub fn linrel_identity_exact(max_n: usize) -> Check {
    for n in 1..=max_n {
        let words = (0..n).map(|i| format!("w{i:02}")).collect();
        let rows = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
        let lr = LinRel::new(TermDocMatrix::from_dense(words, rows).unwrap(), 1.0).map_err(|e| e.to_string())?;
        let y: Vec<f64> = (0..n).map(|i| 1.0 / (i + 1) as f64).collect();
        let sol = lr.solve(&y).map_err(|e| e.to_string())?;
        for i in 0..n {
            if sol.y_hat[i] != y[i] / 2.0 || sol.sigma[i] != 0.25 {
                return Err(format!("n={n}, i={i}: y_hat {} sigma {}", sol.y_hat[i], sol.sigma[i]));
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- lstm ----

pub fn lstm(v: usize, hidden: usize, layers: usize, seed: u64, scale: f64) -> LstmModel {
    let vocab = Vocabulary::from_words((0..v - 2).map(|i| format!("t{i}")));
    let cfg = LstmConfig {
        layers,
        hidden,
        embed: hidden,
        unroll: 4,
        init_scale: scale,
        seed,
    };
    LstmModel::new(vocab, cfg).unwrap()
}

/// Central differences over every parameter (V=5, H=3, T=4), one or two
/// layers alternately. Returns the worst relative error.
pub fn lstm_gradcheck(draws: usize, seed: u64) -> Check<f64> {
    let (v, h, t) = (5, 3, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = 1e-5;
    let mut worst: f64 = 0.0;
    for draw in 0..draws {
        let mut m = lstm(v, h, 1 + draw % 2, seed.wrapping_add(draw as u64), 0.6);
        let inputs: Vec<WordId> = (0..t).map(|_| WordId(rng.gen_range(0..v))).collect();
        let targets: Vec<WordId> = (0..t).map(|_| WordId(rng.gen_range(0..v))).collect();
        let (_, grads) = m.loss_and_gradients(&inputs, &targets).map_err(|e| e.to_string())?;
        let lens: Vec<usize> = m.param_tensors().iter().map(|p| p.len()).collect();
        for (ti, &len) in lens.iter().enumerate() {
            for k in 0..len {
                let orig = m.param_tensors()[ti][k];
                m.param_tensors_mut()[ti][k] = orig + step;
                let up = m.sequence_loss(&inputs, &targets).unwrap();
                m.param_tensors_mut()[ti][k] = orig - step;
                let down = m.sequence_loss(&inputs, &targets).unwrap();
                m.param_tensors_mut()[ti][k] = orig;
                let numeric = (up - down) / (2.0 * step);
                let analytic = grads[ti][k];
                let rel = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-6);
                worst = worst.max(rel);
                if rel > 1e-4 {
                    return Err(format!("draw {draw}, tensor {ti}[{k}]: analytic {analytic}, numeric {numeric}"));
                }
            }
        }
    }
    Ok(worst)
}

/// Forward pass with each gate as its own matrix; one distribution per fed word.
pub fn lstm_reference(m: &LstmModel, words: &[WordId]) -> Vec<Vec<f64>> {
    let cfg = *m.config();
    let (hid, v) = (cfg.hidden, m.vocab().len());
    let p = m.param_tensors();
    let emb = DMatrix::from_row_slice(v, cfg.embed, p[0]);
    let mut layers = Vec::new();
    for l in 0..cfg.layers {
        let input = if l == 0 { cfg.embed } else { hid };
        let w = DMatrix::from_row_slice(4 * hid, input + hid, p[1 + 2 * l]);
        let b = DVector::from_column_slice(p[2 + 2 * l]);
        let gate = |g: usize| {
            (
                w.view((g * hid, 0), (hid, input)).into_owned(),
                w.view((g * hid, input), (hid, hid)).into_owned(),
                b.rows(g * hid, hid).into_owned(),
            )
        };
        layers.push([gate(0), gate(1), gate(2), gate(3)]);
    }
    let out_w = DMatrix::from_row_slice(v, hid, p[p.len() - 2]);
    let out_b = DVector::from_column_slice(p[p.len() - 1]);

    let sig = |x: &DVector<f64>| x.map(|a| 1.0 / (1.0 + (-a).exp()));
    let mut h = vec![DVector::zeros(hid); cfg.layers];
    let mut c = vec![DVector::zeros(hid); cfg.layers];
    let mut out = Vec::new();
    for &w in words {
        let mut x: DVector<f64> = emb.row(w.index()).transpose();
        for (l, g) in layers.iter().enumerate() {
            let pre = |k: usize| &g[k].0 * &x + &g[k].1 * &h[l] + &g[k].2;
            let (i, f, gg, o) = (sig(&pre(0)), sig(&pre(1)), pre(2).map(f64::tanh), sig(&pre(3)));
            c[l] = f.component_mul(&c[l]) + i.component_mul(&gg);
            h[l] = o.component_mul(&c[l].map(f64::tanh));
            x = h[l].clone();
        }
        let logits = &out_w * &x + &out_b;
        let e = logits.map(|a| (a - logits.max()).exp());
        out.push((&e / e.sum()).iter().copied().collect());
    }
    out
}

/// Session outputs against the reference (V=7, H=4, two layers); every
/// distribution must also sum to 1 within 1e-9.
pub fn lstm_forward_and_normalization(models: u64, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for s in 0..models {
        let m = lstm(7, 4, 2, s, 0.5);
        let words: Vec<WordId> = (0..12).map(|_| WordId(rng.gen_range(0..7))).collect();
        let want = lstm_reference(&m, &words);
        let mut sess = m.session();
        for (w, reference) in words.iter().zip(&want) {
            sess.feed(*w).map_err(|e| e.to_string())?;
            let got = sess.next_distribution().map_err(|e| e.to_string())?;
            let total: f64 = got.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(format!("model {s}: distribution sums to {total}"));
            }
            if let Some((a, b)) = got.iter().zip(reference).find(|(a, b)| (*a - *b).abs() > 1e-12) {
                return Err(format!("model {s}: {a} vs reference {b}"));
            }
        }
    }
    Ok(())
}

// --------------------------------------------------------------- index ----

pub fn random_docs(rng: &mut ChaCha8Rng) -> Vec<Document> {
    let n = rng.gen_range(1..=200);
    let vocab = rng.gen_range(2..40);
    (0..n)
        .map(|i| {
            let len = rng.gen_range(0..25);
            let text: Vec<String> = (0..len).map(|_| format!("v{}", rng.gen_range(0..vocab))).collect();
            // ids whose string order differs from their position
            Document::new(format!("{}", rng.gen_range(0..10_000) * 1000 + i), text.join(" "))
        })
        .collect()
}

/// Dense cosine over every term: (doc id, score), score desc then id asc.
pub fn cosine_reference(docs: &[Document], stats: &CorpusStats, query: &WeightedQuery, top_k: usize) -> Vec<(String, f64)> {
    let terms: Vec<String> = docs.iter().flat_map(Document::tokens).collect::<BTreeSet<_>>().into_iter().collect();
    let vectorize = |weight: &dyn Fn(&str) -> f64| -> Vec<f64> {
        terms.iter().map(|t| weight(t) * stats.idf(t).unwrap_or(0.0)).collect()
    };
    let q = vectorize(&|t| query.weight(t));
    let qn = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut scored: Vec<(String, f64)> = docs
        .iter()
        .filter_map(|d| {
            let toks = d.tokens();
            let v = vectorize(&|t| toks.iter().filter(|x| x.as_str() == t).count() as f64);
            let vn = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let dot: f64 = q.iter().zip(&v).map(|(a, b)| a * b).sum();
            (dot > 0.0).then(|| (d.id.clone(), dot / (qn * vn)))
        })
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    scored.truncate(top_k);
    scored
}

/// Random corpora of at most 200 documents; order must match exactly and
/// scores within 1e-9.
pub fn index_equivalence(corpora: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..corpora {
        let docs = random_docs(&mut rng);
        let mut q = WeightedQuery::new();
        for _ in 0..rng.gen_range(1..6) {
            q.add(&format!("v{}", rng.gen_range(0..45)), f64::from(rng.gen_range(1..4)));
        }
        let top_k = [1, 3, 10, 500][rng.gen_range(0..4)];
        let stats = CorpusStats::compute(&docs);
        let index = InvertedIndex::build(&docs, &stats).map_err(|e| e.to_string())?;
        let got = index.search(&q, top_k);
        let want = cosine_reference(&docs, &stats, &q, top_k);
        if got.hits.len() != want.len() {
            return Err(format!("corpus {case}: {} hits, expected {}", got.hits.len(), want.len()));
        }
        for (rank, (h, (id, score))) in got.hits.iter().zip(&want).enumerate() {
            if h.doc_id != *id || (h.score - score).abs() > 1e-9 {
                return Err(format!("corpus {case} rank {rank}: {} {} vs {id} {score}", h.doc_id, h.score));
            }
        }
    }
    Ok(())
}

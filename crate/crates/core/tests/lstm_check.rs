//! LSTM gradients against central finite differences, and the forward pass
//! against a separate matrix-form implementation.

#[path = "support/oracles.rs"]
mod oracles;

use proactive_core::corpus::WordId;
use proactive_core::lm::{LmSession, NextWordModel};

#[test]
fn analytic_gradients_match_finite_differences() {
    let worst = oracles::lstm_gradcheck(25, 17).unwrap();
    eprintln!("worst relative gradient error {worst:.2e}");
}

#[test]
fn forward_pass_matches_reference() {
    oracles::lstm_forward_and_normalization(10, 3).unwrap();
}

#[test]
fn trained_model_distributions_are_normalized() {
    let mut m = oracles::lstm(9, 8, 2, 1, 0.08);
    let stream: Vec<WordId> = (0..200).map(|i| WordId(2 + (i * 7 % 5))).collect();
    m.train(&stream, 3, 0.5, 10).unwrap();
    let mut s = m.session();
    for &w in &stream[..30] {
        s.feed(w).unwrap();
        let d = s.next_distribution().unwrap();
        assert!((d.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        assert!(d.iter().all(|&p| p > 0.0));
    }
}

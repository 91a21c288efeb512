//! Beam search against brute force: the complete top-`b` tree built by
//! recursion with a fresh session per prefix, then the `k` best children of
//! the previous level's survivors, level by level.

#[path = "support/oracles.rs"]
mod oracles;

#[test]
fn beam_tree_matches_exhaustive_enumeration() {
    oracles::beam_equivalence(300, 2024).unwrap();
}

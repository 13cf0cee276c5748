//! The two graded relator families.
//!
//! With the distinguished elements `x`, `y`, `h` from one factor and `a`
//! from the other, the seed relator interleaves `a` between blocks of
//! growing `(y·a)` runs separated by `x·a` markers:
//!
//! ```text
//! r₀ = h a (y a) · x a (y a)² · x a (y a)³ · … · x a (y a)^cap
//! ```
//!
//! and the graded family continues the same run-length progression, `cap`
//! runs per stage:
//!
//! ```text
//! rₙ = x a (y a)^{cap(n−1)+1} · x a (y a)^{cap(n−1)+2} · … · x a (y a)^{cap·n}
//! ```
//!
//! Every letter is a single non-shared generator, so these words are already
//! canonical and cyclically reduced; their letter counts follow the closed
//! forms checked in the tests.

use crate::amalgam::{normalize, AmalgamWord};
use crate::factors::FactorSystem;

/// Letter count of the seed relator: `cap² + 3·cap`.
pub fn r0_length(cap: usize) -> usize {
    cap * cap + 3 * cap
}

/// Letter count of stage `n ≥ 1`:
/// `2·cap + Σ_{j=cap(n−1)+1}^{cap·n} 2j`.
pub fn rn_length(cap: usize, n: usize) -> usize {
    assert!(n >= 1, "graded relators start at stage 1");
    let a = cap * (n - 1);
    let b = cap * n;
    2 * cap + (b * (b + 1) - a * (a + 1))
}

fn push_run(sys: &FactorSystem, letters: &mut Vec<crate::factors::FactorWord>, reps: usize) {
    for _ in 0..reps {
        letters.push(sys.y.clone());
        letters.push(sys.a.clone());
    }
}

/// Build the seed relator at the given run-length cap (`cap ≥ 1`).
pub fn build_r0(sys: &FactorSystem, cap: usize) -> AmalgamWord {
    assert!(cap >= 1, "cap must be at least 1");
    let mut letters = Vec::with_capacity(r0_length(cap));
    letters.push(sys.h.clone());
    letters.push(sys.a.clone());
    push_run(sys, &mut letters, 1);
    for j in 2..=cap {
        letters.push(sys.x.clone());
        letters.push(sys.a.clone());
        push_run(sys, &mut letters, j);
    }
    normalize(sys, letters)
}

/// Build stage `n ≥ 1` of the graded family.
pub fn build_rn(sys: &FactorSystem, cap: usize, n: usize) -> AmalgamWord {
    assert!(cap >= 1, "cap must be at least 1");
    assert!(n >= 1, "graded relators start at stage 1");
    let mut letters = Vec::with_capacity(rn_length(cap, n));
    for j in cap * (n - 1) + 1..=cap * n {
        letters.push(sys.x.clone());
        letters.push(sys.a.clone());
        push_run(sys, &mut letters, j);
    }
    normalize(sys, letters)
}

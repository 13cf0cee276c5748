//! Shared helpers for the integration suites: a deliberately naive piece
//! oracle used to cross-check the optimized scan at small scale.

use std::collections::BTreeMap;

use amalgam_core::{FactorSystem, FactorWord, SymmetrizedSet};

/// Longest piece between two fixed member words, by brute force: try every
/// whole-letter prefix match and the one-letter mid-letter extension.
///
/// Only valid when the shared subgroup is trivial, where letters match
/// exactly and no interleaving adjustment exists. Runs in O(min(|u|,|v|)²)
/// per pair and makes no attempt to be clever — that is the point.
pub fn naive_piece(sys: &FactorSystem, u: &[FactorWord], v: &[FactorWord]) -> usize {
    assert!(
        sys.shared_symbols().is_empty(),
        "the naive oracle assumes a trivial shared subgroup"
    );
    let cap = u.len().min(v.len());
    let mut best = 0usize;
    let mut l = 0usize;
    loop {
        // `l` whole letters agree at this point.
        best = best.max(l);
        if l < cap {
            // A partial (l+1)-th letter: the next letters live in the same
            // factor and share a nontrivial free-group head.
            let (un, vn) = (&u[l], &v[l]);
            if un.factor() == vn.factor() {
                if let (Some(a), Some(b)) =
                    (un.syllables().first(), vn.syllables().first())
                {
                    if a.sym == b.sym && a.exp.sign() == b.exp.sign() {
                        best = best.max(l + 1);
                    }
                }
            }
        }
        if l >= cap || u[l] != v[l] {
            break;
        }
        l += 1;
    }
    best
}

/// Max piece per base pair over every pair of distinct members, brute force.
/// Keys are `(first_base, second_base)` with `first ≤ second`.
pub fn naive_pair_pieces(
    sys: &FactorSystem,
    set: &SymmetrizedSet,
) -> BTreeMap<(usize, usize), usize> {
    let members: Vec<_> = set.representatives(sys).collect();
    let words: Vec<_> = members
        .iter()
        .map(|&m| set.member_word(sys, m))
        .collect();
    let mut out: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for i in 0..members.len() {
        for j in 0..members.len() {
            if i == j {
                continue;
            }
            let (bi, bj) = (members[i].base, members[j].base);
            let key = (bi.min(bj), bi.max(bj));
            let val = naive_piece(sys, words[i].letters(), words[j].letters());
            let entry = out.entry(key).or_insert(0);
            *entry = (*entry).max(val);
        }
    }
    out
}

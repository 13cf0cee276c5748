//! Symmetrized relator sets and piece analysis.
//!
//! The symmetrized closure of a relator set contains every rotation of every
//! relator and of its inverse, each considered up to conjugation by the
//! shared subgroup. A *piece* is a word `b` admitting semireduced
//! factorizations `r = b·c` and `r′ = b·c′` of two distinct members; its
//! length is its letter count. Three shapes occur:
//!
//! * any single shared-subgroup letter (when the shared subgroup is
//!   nontrivial, `r = h·(h⁻¹r)` is semireduced for every member) — a
//!   universal piece of length 1;
//! * a block of whole letters common to two members up to interleaving;
//! * such a block extended by a partial letter: the next letters share
//!   free-group content past their shared prefixes, which merges into the
//!   piece as one extra letter.
//!
//! Whole-letter matching is exact on *rotation keys* — each letter's core
//! plus the shared junction into its successor — which are invariant under
//! every interleaving, so hashed window scans decide fuzzy matches without
//! materializing any rotation.

use std::collections::HashMap;

use num_rational::Ratio;
use num_traits::Signed;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::amalgam::{
    cyclically_reduce, letter_parts, normalize, rotation_keys, AmalgamWord, CyclicWord,
};
use crate::factors::{Factor, FactorSystem, FactorWord, Syllable};

/// Exact small-cancellation parameter.
pub type Lambda = Ratio<u64>;

/// Parse `"p/q"` (or a bare integer `"p"`) as an exact ratio.
pub fn parse_ratio(text: &str) -> Option<Lambda> {
    let text = text.trim();
    if let Some((num, den)) = text.split_once('/') {
        let num: u64 = num.trim().parse().ok()?;
        let den: u64 = den.trim().parse().ok()?;
        if den == 0 {
            return None;
        }
        Some(Ratio::new(num, den))
    } else {
        let num: u64 = text.parse().ok()?;
        Some(Ratio::from_integer(num))
    }
}

/// Render a ratio as `"p/q"`, always with the explicit denominator.
pub fn ratio_string(r: Lambda) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

// ---------------------------------------------------------------------------
// Interned key streams and rolling hashes.
// ---------------------------------------------------------------------------

const HASH_MOD: u128 = (1 << 61) - 1;
const HASH_BASE: u64 = 0x2545_F491_4F6C_DD1B;

fn mulmod(a: u64, b: u64) -> u64 {
    ((a as u128 * b as u128) % HASH_MOD) as u64
}

fn addmod(a: u64, b: u64) -> u64 {
    ((a as u128 + b as u128) % HASH_MOD) as u64
}

fn submod(a: u64, b: u64) -> u64 {
    addmod(a, (HASH_MOD as u64) - (b % HASH_MOD as u64))
}

/// Deduplicating id assignment for factor words used as stream symbols.
#[derive(Debug, Default)]
pub(crate) struct Interner {
    map: HashMap<FactorWord, u32>,
}

impl Interner {
    pub fn intern(&mut self, w: &FactorWord) -> u32 {
        if let Some(&id) = self.map.get(w) {
            return id;
        }
        let id = self.map.len() as u32;
        self.map.insert(w.clone(), id);
        id
    }

    pub fn lookup(&self, w: &FactorWord) -> Option<u32> {
        self.map.get(w).copied()
    }
}

/// Unit marking: cores occupy even codes, junctions odd ones, so the two
/// kinds can never collide inside a stream.
pub(crate) fn core_unit(id: u32) -> u32 {
    id * 2
}

pub(crate) fn junction_unit(id: u32) -> u32 {
    id * 2 + 1
}

/// The doubled key stream of one cyclic base, with prefix hashes.
///
/// Units alternate `K₀ J₀ K₁ J₁ …` over two copies of the cycle, so any
/// cyclic window of up to `n` letters is a contiguous slice. A window of
/// `ℓ` letters starting at letter `o` spans units `[2o, 2o + 2ℓ − 1)`.
#[derive(Debug)]
pub(crate) struct BaseStream {
    pub n: usize,
    pub period: usize,
    pub units: Vec<u32>,
    pref: Vec<u64>,
}

pub(crate) fn grow_powers(pows: &mut Vec<u64>, len: usize) {
    if pows.is_empty() {
        pows.push(1);
    }
    while pows.len() <= len {
        let last = *pows.last().expect("nonempty");
        pows.push(mulmod(last, HASH_BASE));
    }
}

pub(crate) fn prefix_hashes(units: &[u32]) -> Vec<u64> {
    let mut pref = Vec::with_capacity(units.len() + 1);
    pref.push(0);
    for &u in units {
        let prev = *pref.last().expect("nonempty");
        pref.push(addmod(mulmod(prev, HASH_BASE), u as u64 + 1));
    }
    pref
}

pub(crate) fn window_hash(pref: &[u64], pows: &[u64], start: usize, len: usize) -> u64 {
    submod(pref[start + len], mulmod(pref[start], pows[len]))
}

impl BaseStream {
    pub fn build(sys: &FactorSystem, interner: &mut Interner, cyc: &CyclicWord) -> BaseStream {
        let n = cyc.len();
        let keys = rotation_keys(sys, cyc.letters());
        let mut units = Vec::with_capacity(4 * n);
        for (core, junction) in &keys {
            units.push(core_unit(interner.intern(core)));
            units.push(junction_unit(interner.intern(junction)));
        }
        let single = units.clone();
        units.extend_from_slice(&single);
        let pref = prefix_hashes(&units);
        BaseStream { n, period: cyc.minimal_period(sys), units, pref }
    }

    pub fn window(&self, pows: &[u64], offset: usize, len_letters: usize) -> u64 {
        window_hash(&self.pref, pows, 2 * offset, 2 * len_letters - 1)
    }

    pub fn window_units(&self, offset: usize, len_letters: usize) -> &[u32] {
        &self.units[2 * offset..2 * offset + 2 * len_letters - 1]
    }
}

// ---------------------------------------------------------------------------
// Symmetrized sets.
// ---------------------------------------------------------------------------

/// Where a base of the symmetrized closure came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Origin {
    pub relator: usize,
    pub inverted: bool,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SymmetrizeError {
    #[error("relator {index} is trivial after cyclic reduction")]
    IdentityRelator { index: usize },
}

/// The symmetrized closure of a relator set, stored as its cyclic bases.
/// Members are the rotations of each base (offsets modulo the base's letter
/// period), each considered up to shared-subgroup conjugation.
#[derive(Debug, Clone)]
pub struct SymmetrizedSet {
    bases: Vec<CyclicWord>,
    origins: Vec<Origin>,
    input_count: usize,
}

/// One member of the closure, addressed without materialization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemberRef {
    pub base: usize,
    pub offset: usize,
    pub length: usize,
}

impl SymmetrizedSet {
    pub fn symmetrize(
        sys: &FactorSystem,
        relators: &[AmalgamWord],
    ) -> Result<SymmetrizedSet, SymmetrizeError> {
        let mut bases: Vec<CyclicWord> = Vec::new();
        let mut origins = Vec::new();
        for (index, r) in relators.iter().enumerate() {
            let (cyc, _) = cyclically_reduce(sys, r);
            if cyc.is_empty() {
                return Err(SymmetrizeError::IdentityRelator { index });
            }
            let (inv, _) = cyclically_reduce(sys, &r.inverse(sys));
            for (word, inverted) in [(cyc, false), (inv, true)] {
                if !bases.contains(&word) {
                    bases.push(word);
                    origins.push(Origin { relator: index, inverted });
                }
            }
        }
        Ok(SymmetrizedSet { bases, origins, input_count: relators.len() })
    }

    pub fn bases(&self) -> &[CyclicWord] {
        &self.bases
    }

    pub fn base(&self, i: usize) -> &CyclicWord {
        &self.bases[i]
    }

    pub fn origins(&self) -> &[Origin] {
        &self.origins
    }

    pub fn base_count(&self) -> usize {
        self.bases.len()
    }

    pub fn input_count(&self) -> usize {
        self.input_count
    }

    pub fn min_length(&self) -> usize {
        self.bases.iter().map(CyclicWord::len).min().unwrap_or(0)
    }

    pub fn max_length(&self) -> usize {
        self.bases.iter().map(CyclicWord::len).max().unwrap_or(0)
    }

    /// Number of distinct members (rotations modulo letter period).
    pub fn representative_count(&self, sys: &FactorSystem) -> usize {
        self.bases.iter().map(|b| b.minimal_period(sys)).sum()
    }

    /// Lazily enumerate the members.
    pub fn representatives<'a>(
        &'a self,
        sys: &'a FactorSystem,
    ) -> impl Iterator<Item = MemberRef> + 'a {
        self.bases.iter().enumerate().flat_map(move |(b, base)| {
            let n = base.len();
            (0..base.minimal_period(sys))
                .map(move |offset| MemberRef { base: b, offset, length: n })
        })
    }

    /// Materialize one member as a canonical linear word.
    pub fn member_word(&self, sys: &FactorSystem, member: MemberRef) -> AmalgamWord {
        self.bases[member.base].rotation(sys, member.offset)
    }

    /// Is this canonical cyclic word one of the bases (i.e. a member of the
    /// closure up to rotation and shared conjugation)?
    pub fn contains_cyclic(&self, cyc: &CyclicWord) -> Option<usize> {
        self.bases.iter().position(|b| b == cyc)
    }
}

// ---------------------------------------------------------------------------
// Fuzzy prefix walking — the direct per-pair mechanism. The hashed scan must
// agree with it on every pair.
// ---------------------------------------------------------------------------

/// Longest letter-prefix of `u` matching a letter-prefix of `v` up to an
/// interleaving chain with both ends free.
pub fn fuzzy_prefix_len(sys: &FactorSystem, u: &AmalgamWord, v: &AmalgamWord) -> usize {
    fuzzy_prefix_letters(sys, u.letters(), v.letters())
}

pub(crate) fn fuzzy_prefix_letters(
    sys: &FactorSystem,
    u: &[FactorWord],
    v: &[FactorWord],
) -> usize {
    let max = u.len().min(v.len());
    if max == 0 {
        return 0;
    }
    if sys.in_h(&u[0]) || sys.in_h(&v[0]) {
        // Lone shared letters occur only in one-letter words; they match
        // fuzzily exactly when both are shared.
        return usize::from(sys.in_h(&u[0]) && sys.in_h(&v[0]));
    }
    let mut t = 0;
    let mut h: Option<FactorWord> = None; // None while the left end is still free
    while t < max {
        let pu = letter_parts(sys, &u[t]);
        let pv = letter_parts(sys, &v[t]);
        if pu.factor != pv.factor || pu.core != pv.core {
            break;
        }
        if let Some(h_t) = &h {
            // v_t = h_t · u_t · h_{t+1}⁻¹ forces h_t · p_u = p_v.
            if h_t.mul(sys, &pu.p) != pv.p {
                break;
            }
        }
        h = Some(pv.q.inverse().mul(sys, &pu.q));
        t += 1;
    }
    t
}

/// End adjustments of a fuzzy prefix match: `v-prefix = h_a · u-prefix · h_b`.
pub(crate) fn match_adjustments(
    sys: &FactorSystem,
    u: &[FactorWord],
    v: &[FactorWord],
    len: usize,
) -> (FactorWord, FactorWord) {
    debug_assert!(len >= 1 && len <= u.len() && len <= v.len());
    let first_u = letter_parts(sys, &u[0]);
    let first_v = letter_parts(sys, &v[0]);
    let h_a = first_v.p.mul(sys, &first_u.p.inverse());
    let last_u = letter_parts(sys, &u[len - 1]);
    let last_v = letter_parts(sys, &v[len - 1]);
    let h_b = last_u.q.inverse().mul(sys, &last_v.q);
    (h_a, h_b)
}

/// Longest common prefix of two freely reduced words in the same factor.
pub(crate) fn free_prefix(sys: &FactorSystem, a: &FactorWord, b: &FactorWord) -> FactorWord {
    let mut syls: Vec<Syllable> = Vec::new();
    for (sa, sb) in a.syllables().iter().zip(b.syllables().iter()) {
        if sa == sb {
            syls.push(sa.clone());
            continue;
        }
        if sa.sym == sb.sym && sa.exp.sign() == sb.exp.sign() {
            let exp = if sa.exp.abs() < sb.exp.abs() { sa.exp.clone() } else { sb.exp.clone() };
            syls.push(Syllable::new(sa.sym, exp));
        }
        break;
    }
    FactorWord::new(sys, a.factor(), syls)
}

// ---------------------------------------------------------------------------
// Piece reports.
// ---------------------------------------------------------------------------

/// One realized piece: a common semireduced prefix of two distinct members.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairWitness {
    pub piece_length: usize,
    pub whole_letters: usize,
    pub mid_letter_extension: bool,
    /// The universal length-1 piece: a single shared-subgroup letter.
    pub shared_letter: bool,
    pub ratio: String,
    pub first: MemberRef,
    pub second: MemberRef,
}

/// The witness words materialized for the report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitnessWords {
    pub piece: String,
    pub first_member: String,
    pub second_member: String,
}

/// Full result of a piece scan over a symmetrized set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PieceReport {
    pub schema: u32,
    pub lambda: String,
    pub relator_count: usize,
    pub base_count: usize,
    pub representative_count: usize,
    pub min_relator_length: usize,
    pub max_relator_length: usize,
    pub max_piece_length: usize,
    pub max_whole_match: usize,
    pub achieved_lambda: String,
    pub length_floor_ok: bool,
    pub certified: bool,
    pub witness_words: Option<WitnessWords>,
    pub longest_piece: Option<PairWitness>,
    pub worst_ratio_pair: Option<PairWitness>,
}

/// Outcome of a certification attempt; both arms carry the full report.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CPrimeOutcome {
    Certified(PieceReport),
    Violated(PieceReport),
}

impl CPrimeOutcome {
    pub fn report(&self) -> &PieceReport {
        match self {
            CPrimeOutcome::Certified(r) | CPrimeOutcome::Violated(r) => r,
        }
    }

    pub fn is_certified(&self) -> bool {
        matches!(self, CPrimeOutcome::Certified(_))
    }
}

// ---------------------------------------------------------------------------
// The scan.
// ---------------------------------------------------------------------------

struct Scan<'a> {
    sys: &'a FactorSystem,
    set: &'a SymmetrizedSet,
    streams: Vec<BaseStream>,
    pows: Vec<u64>,
}

/// Verified groups of window-equal offsets at a probed length: `i_offs` from
/// the first base, `j_offs` from the second (identical for same-base probes).
struct MatchGroup {
    i_offs: Vec<u32>,
    j_offs: Vec<u32>,
}

impl<'a> Scan<'a> {
    fn new(sys: &'a FactorSystem, set: &'a SymmetrizedSet) -> Scan<'a> {
        let mut interner = Interner::default();
        let streams: Vec<BaseStream> = set
            .bases()
            .iter()
            .map(|b| BaseStream::build(sys, &mut interner, b))
            .collect();
        let mut pows = Vec::new();
        let longest = streams.iter().map(|s| s.units.len()).max().unwrap_or(0);
        grow_powers(&mut pows, longest + 1);
        Scan { sys, set, streams, pows }
    }

    fn window_eq(&self, bi: usize, oi: u32, bj: usize, oj: u32, len: usize) -> bool {
        self.streams[bi].window_units(oi as usize, len)
            == self.streams[bj].window_units(oj as usize, len)
    }

    /// Does any valid member pair match on `len` whole letters?
    fn match_exists(&self, bi: usize, bj: usize, len: usize) -> bool {
        let same = bi == bj;
        let (si, sj) = (&self.streams[bi], &self.streams[bj]);
        let mut buckets: HashMap<u64, Vec<u32>> = HashMap::new();
        for oj in 0..sj.period as u32 {
            let h = sj.window(&self.pows, oj as usize, len);
            let entry = buckets.entry(h).or_default();
            if same && entry.iter().any(|&o| self.window_eq(bj, o, bj, oj, len)) {
                return true;
            }
            entry.push(oj);
        }
        if same {
            return false;
        }
        for oi in 0..si.period as u32 {
            let h = si.window(&self.pows, oi as usize, len);
            if let Some(entry) = buckets.get(&h) {
                if entry.iter().any(|&oj| self.window_eq(bi, oi, bj, oj, len)) {
                    return true;
                }
            }
        }
        false
    }

    /// All match groups at the given length, in deterministic order.
    fn match_groups(&self, bi: usize, bj: usize, len: usize) -> Vec<MatchGroup> {
        let same = bi == bj;
        let (si, sj) = (&self.streams[bi], &self.streams[bj]);
        let mut order: Vec<MatchGroup> = Vec::new();
        let mut index: HashMap<u64, Vec<usize>> = HashMap::new();
        for oj in 0..sj.period as u32 {
            let h = sj.window(&self.pows, oj as usize, len);
            let slots = index.entry(h).or_default();
            let found = slots
                .iter()
                .find(|&&g| self.window_eq(bj, order[g].j_offs[0], bj, oj, len))
                .copied();
            match found {
                Some(g) => order[g].j_offs.push(oj),
                None => {
                    slots.push(order.len());
                    order.push(MatchGroup { i_offs: Vec::new(), j_offs: vec![oj] });
                }
            }
        }
        if same {
            for g in &mut order {
                g.i_offs = g.j_offs.clone();
            }
            order.retain(|g| g.j_offs.len() >= 2);
            return order;
        }
        for oi in 0..si.period as u32 {
            let h = si.window(&self.pows, oi as usize, len);
            if let Some(slots) = index.get(&h) {
                for &g in slots {
                    if self.window_eq(bi, oi, bj, order[g].j_offs[0], len) {
                        order[g].i_offs.push(oi);
                        break;
                    }
                }
            }
        }
        order.retain(|g| !g.i_offs.is_empty());
        order
    }

    /// Largest whole-letter match between distinct members of the two bases.
    fn max_match(&self, bi: usize, bj: usize) -> usize {
        let cap = if bi == bj {
            self.streams[bi].n - 1
        } else {
            self.streams[bi].n.min(self.streams[bj].n)
        };
        let (mut lo, mut hi, mut best) = (1usize, cap, 0usize);
        while lo <= hi {
            let mid = lo + (hi - lo) / 2;
            if self.match_exists(bi, bj, mid) {
                best = mid;
                lo = mid + 1;
            } else {
                hi = mid - 1;
            }
        }
        best
    }

    fn letter(&self, b: usize, idx: usize) -> &FactorWord {
        let n = self.set.base(b).len();
        &self.set.base(b).letters()[idx % n]
    }

    /// After a match of `len` whole letters, do the next letters share
    /// free-group content past their shared prefixes? The carry between the
    /// matched block and the continuation is fixed by the final matched
    /// letters (free when `len` is 0), and a common prefix that stays inside
    /// the shared subgroup would be absorbed by the block's last letter
    /// rather than adding one.
    fn extension_bit(&self, bu: usize, ou: u32, bv: usize, ov: u32, len: usize) -> bool {
        let u_next = self.letter(bu, ou as usize + len);
        let v_next = self.letter(bv, ov as usize + len);
        if self.sys.in_h(u_next) || self.sys.in_h(v_next) || u_next.factor() != v_next.factor() {
            return false;
        }
        let pu = letter_parts(self.sys, u_next);
        let pv = letter_parts(self.sys, v_next);
        let first_u = pu.core.syllables().first().expect("core nonempty");
        let first_v = pv.core.syllables().first().expect("core nonempty");
        if first_u.sym != first_v.sym || first_u.exp.sign() != first_v.exp.sign() {
            return false;
        }
        if len == 0 {
            return true; // the carry is free, so the shared prefixes align by choice
        }
        let q_u = letter_parts(self.sys, self.letter(bu, ou as usize + len - 1)).q;
        let q_v = letter_parts(self.sys, self.letter(bv, ov as usize + len - 1)).q;
        let h = q_v.inverse().mul(self.sys, &q_u);
        h.mul(self.sys, &pu.p) == pv.p
    }

    /// Per-offset fingerprint controlling the extension bit, used to
    /// deduplicate extension evaluations inside large match groups.
    fn extension_class(&self, b: usize, o: u32, len: usize) -> (FactorWord, FactorWord) {
        let next = self.letter(b, o as usize + len).clone();
        let q_prev = if len == 0 {
            FactorWord::identity(Factor::K)
        } else {
            letter_parts(self.sys, self.letter(b, o as usize + len - 1)).q
        };
        (q_prev, next)
    }

    fn collect_classes(
        &self,
        b: usize,
        offs: &[u32],
        len: usize,
    ) -> Vec<(Vec<u32>, (FactorWord, FactorWord))> {
        let mut classes: Vec<(Vec<u32>, (FactorWord, FactorWord))> = Vec::new();
        for &o in offs {
            let c = self.extension_class(b, o, len);
            match classes.iter_mut().find(|(_, cc)| *cc == c) {
                Some((list, _)) => {
                    if list.len() < 2 {
                        list.push(o);
                    }
                }
                None => classes.push((vec![o], c)),
            }
        }
        classes
    }

    /// The piece value for a base pair: maximal whole-letter match plus the
    /// extension bit, with a witness pair realizing it.
    fn pair_piece(&mut self, bi: usize, bj: usize) -> (usize, usize, bool, (u32, u32)) {
        let m = self.max_match(bi, bj);
        if m == 0 {
            return self.pair_piece_unmatched(bi, bj);
        }
        let groups = self.match_groups(bi, bj, m);
        debug_assert!(!groups.is_empty());
        // A piece is a prefix of both members; once the match consumes the
        // whole of either member there is no next letter to extend into.
        let extendable = m < self.streams[bi].n && m < self.streams[bj].n;
        let mut witness: Option<(u32, u32)> = None;
        for g in &groups {
            let offs_i = if bi == bj { &g.j_offs } else { &g.i_offs };
            if witness.is_none() {
                witness = Some(if bi == bj {
                    (g.j_offs[0], g.j_offs[1])
                } else {
                    (g.i_offs[0], g.j_offs[0])
                });
            }
            if !extendable {
                continue;
            }
            let classes_i = self.collect_classes(bi, offs_i, m);
            let classes_j = if bi == bj {
                classes_i.clone()
            } else {
                self.collect_classes(bj, &g.j_offs, m)
            };
            for (ci, (offs_u, _)) in classes_i.iter().enumerate() {
                for (cj, (offs_v, _)) in classes_j.iter().enumerate() {
                    let (ou, ov) = if bi == bj && ci == cj {
                        if offs_u.len() < 2 {
                            continue;
                        }
                        (offs_u[0], offs_u[1])
                    } else {
                        (offs_u[0], offs_v[0])
                    };
                    if self.extension_bit(bi, ou, bj, ov, m) {
                        return (m + 1, m, true, (ou, ov));
                    }
                }
            }
        }
        let (oi, oj) = witness.expect("at least one group");
        (m, m, false, (oi, oj))
    }

    /// No whole-letter match: the piece is 1 exactly when some pair of
    /// first letters overlaps mid-letter (with a free carry).
    fn pair_piece_unmatched(&mut self, bi: usize, bj: usize) -> (usize, usize, bool, (u32, u32)) {
        let same = bi == bj;
        let classes_i = self.collect_classes(
            bi,
            &(0..self.streams[bi].period as u32).collect::<Vec<_>>(),
            0,
        );
        let classes_j = if same {
            classes_i.clone()
        } else {
            self.collect_classes(bj, &(0..self.streams[bj].period as u32).collect::<Vec<_>>(), 0)
        };
        for (ci, (offs_u, _)) in classes_i.iter().enumerate() {
            for (cj, (offs_v, _)) in classes_j.iter().enumerate() {
                let (ou, ov) = if same && ci == cj {
                    if offs_u.len() < 2 {
                        continue;
                    }
                    (offs_u[0], offs_u[1])
                } else {
                    (offs_u[0], offs_v[0])
                };
                if self.extension_bit(bi, ou, bj, ov, 0) {
                    return (1, 0, true, (ou, ov));
                }
            }
        }
        (0, 0, false, (0, 0))
    }
}

/// Materialize the piece word realized by a witness.
pub fn piece_word(sys: &FactorSystem, set: &SymmetrizedSet, w: &PairWitness) -> AmalgamWord {
    if w.shared_letter {
        let sym = *sys.shared_symbols().first().expect("shared alphabet nonempty");
        return normalize(sys, vec![FactorWord::generator(sys, Factor::K, sym, 1)]);
    }
    let u = set.member_word(sys, w.first);
    let v = set.member_word(sys, w.second);
    let mut letters: Vec<FactorWord> = u.letters()[..w.whole_letters].to_vec();
    if w.mid_letter_extension {
        let u_next = &u.letters()[w.whole_letters % u.len()];
        let v_next = &v.letters()[w.whole_letters % v.len()];
        let partial = if w.whole_letters == 0 {
            // The carry is free: strip both shared prefixes and compare cores.
            let pu = letter_parts(sys, u_next);
            let pv = letter_parts(sys, v_next);
            let core_overlap = free_prefix(sys, &pu.core, &pv.core);
            pu.p.mul(sys, &core_overlap)
        } else {
            let (_, h_b) = match_adjustments(
                sys,
                &u.letters()[..w.whole_letters],
                &v.letters()[..w.whole_letters],
                w.whole_letters,
            );
            // The continuation of the second member, pulled into the first
            // member's frame, is h_b · v_next.
            free_prefix(sys, u_next, &h_b.mul(sys, v_next))
        };
        debug_assert!(!sys.in_h(&partial));
        letters.push(partial);
    }
    normalize(sys, letters)
}

/// Check that a witness reproduces: the piece word is a letter-prefix of
/// both members up to interleaving (with the member's shared-conjugate
/// freedom), and carries the stated letter count.
pub fn verify_piece_witness(sys: &FactorSystem, set: &SymmetrizedSet, w: &PairWitness) -> bool {
    let b = piece_word(sys, set, w);
    if b.len() != w.piece_length {
        return false;
    }
    if w.shared_letter {
        return !sys.shared_symbols().is_empty() && b.len() == 1;
    }
    let prefix_of = |member: MemberRef| -> bool {
        let r = set.member_word(sys, member);
        if w.mid_letter_extension {
            // All whole letters must match, and the partial letter must be
            // absorbable: matching its content against the member's next
            // letter is exactly the mid-letter check the scan performed.
            fuzzy_prefix_letters(sys, &b.letters()[..w.whole_letters], &r.letters()[..w.whole_letters])
                == w.whole_letters
        } else {
            fuzzy_prefix_len(sys, &b, &r) == w.piece_length
        }
    };
    prefix_of(w.first) && prefix_of(w.second)
}

/// Per-base-pair piece values, for oracle comparisons and diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairPiece {
    pub first_base: usize,
    pub second_base: usize,
    pub whole_letters: usize,
    pub piece_length: usize,
}

/// Compute the piece value of every base pair (the universal shared-letter
/// piece is not included; it attaches to every pair uniformly).
pub fn pairwise_pieces(sys: &FactorSystem, set: &SymmetrizedSet) -> Vec<PairPiece> {
    let mut scan = Scan::new(sys, set);
    let b = set.base_count();
    let mut out = Vec::new();
    for bi in 0..b {
        for bj in bi..b {
            if bi == bj && scan.streams[bi].period == 1 && set.base(bi).len() == 1 {
                continue;
            }
            let (piece, whole, _, _) = scan.pair_piece(bi, bj);
            out.push(PairPiece {
                first_base: bi,
                second_base: bj,
                whole_letters: whole,
                piece_length: piece,
            });
        }
    }
    out
}

/// Run the full piece scan and assemble the report (certification decision
/// included, against the given λ).
pub fn compute_pieces(sys: &FactorSystem, set: &SymmetrizedSet, lambda: Lambda) -> PieceReport {
    let mut scan = Scan::new(sys, set);
    let b = set.base_count();
    let mut max_piece: Option<PairWitness> = None;
    let mut worst: Option<(Ratio<u64>, PairWitness)> = None;
    let mut max_whole = 0usize;
    fn consider(
        witness: PairWitness,
        max_piece: &mut Option<PairWitness>,
        worst: &mut Option<(Ratio<u64>, PairWitness)>,
    ) {
        let min_len = witness.first.length.min(witness.second.length);
        let ratio = Ratio::new(witness.piece_length as u64, min_len as u64);
        if max_piece.as_ref().is_none_or(|w| witness.piece_length > w.piece_length) {
            *max_piece = Some(witness.clone());
        }
        if worst.as_ref().is_none_or(|(r, _)| ratio > *r) {
            *worst = Some((ratio, witness));
        }
    }
    // The universal piece: a single shared letter begins every member
    // semireduced, so any two members share it when the shared subgroup is
    // nontrivial.
    let member_total = set.representative_count(sys);
    if !sys.shared_symbols().is_empty() && member_total >= 2 {
        let second = if set.base_count() > 1 {
            MemberRef { base: 1, offset: 0, length: set.base(1).len() }
        } else {
            MemberRef { base: 0, offset: 1, length: set.base(0).len() }
        };
        let witness = PairWitness {
            piece_length: 1,
            whole_letters: 0,
            mid_letter_extension: false,
            shared_letter: true,
            ratio: ratio_string(Ratio::new(1, set.min_length() as u64)),
            first: MemberRef { base: 0, offset: 0, length: set.base(0).len() },
            second,
        };
        consider(witness, &mut max_piece, &mut worst);
    }
    for bi in 0..b {
        for bj in bi..b {
            if bi == bj && scan.streams[bi].period == 1 && set.base(bi).len() == 1 {
                continue; // single-letter base: only one member, no pair
            }
            let (piece, whole, ext, (oi, oj)) = scan.pair_piece(bi, bj);
            max_whole = max_whole.max(whole);
            if piece == 0 {
                continue;
            }
            let witness = PairWitness {
                piece_length: piece,
                whole_letters: whole,
                mid_letter_extension: ext,
                shared_letter: false,
                ratio: ratio_string(Ratio::new(
                    piece as u64,
                    set.base(bi).len().min(set.base(bj).len()) as u64,
                )),
                first: MemberRef { base: bi, offset: oi as usize, length: set.base(bi).len() },
                second: MemberRef { base: bj, offset: oj as usize, length: set.base(bj).len() },
            };
            consider(witness, &mut max_piece, &mut worst);
        }
    }
    let achieved = worst.as_ref().map_or_else(|| Ratio::new(0, 1), |(r, _)| *r);
    let min_length = set.min_length();
    // Every |r| > 1/λ.
    let length_floor_ok = min_length as u64 * *lambda.numer() > *lambda.denom();
    let certified = length_floor_ok && achieved < lambda;
    let witness_words = max_piece.as_ref().map(|w| WitnessWords {
        piece: piece_word(sys, set, w).display(sys),
        first_member: set.member_word(sys, w.first).display(sys),
        second_member: set.member_word(sys, w.second).display(sys),
    });
    PieceReport {
        schema: 1,
        lambda: ratio_string(lambda),
        relator_count: set.input_count(),
        base_count: b,
        representative_count: member_total,
        min_relator_length: min_length,
        max_relator_length: set.max_length(),
        max_piece_length: max_piece.as_ref().map_or(0, |w| w.piece_length),
        max_whole_match: max_whole,
        achieved_lambda: ratio_string(achieved),
        length_floor_ok,
        certified,
        witness_words,
        longest_piece: max_piece,
        worst_ratio_pair: worst.map(|(_, w)| w),
    }
}

/// Certify the metric small-cancellation condition at λ.
pub fn check_c_prime(sys: &FactorSystem, set: &SymmetrizedSet, lambda: Lambda) -> CPrimeOutcome {
    let report = compute_pieces(sys, set, lambda);
    if report.certified {
        CPrimeOutcome::Certified(report)
    } else {
        CPrimeOutcome::Violated(report)
    }
}

/// Build `{seed} ∪ {stages 1…max_stage}` at the given cap and certify it
/// jointly.
pub fn joint_family_check(
    sys: &FactorSystem,
    cap: usize,
    max_stage: usize,
    lambda: Lambda,
) -> Result<(SymmetrizedSet, CPrimeOutcome), SymmetrizeError> {
    let mut relators = vec![crate::relators::build_r0(sys, cap)];
    for n in 1..=max_stage {
        relators.push(crate::relators::build_rn(sys, cap, n));
    }
    let set = SymmetrizedSet::symmetrize(sys, &relators)?;
    let outcome = check_c_prime(sys, &set, lambda);
    Ok((set, outcome))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factors::{preset_h0, preset_h1};
    use crate::grammar::parse_amalgam_word;
    use crate::relators::build_r0;

    fn w(sys: &FactorSystem, s: &str) -> AmalgamWord {
        parse_amalgam_word(sys, s).unwrap()
    }

    fn lam(s: &str) -> Lambda {
        parse_ratio(s).unwrap()
    }

    #[test]
    fn ratio_parsing_and_formatting() {
        assert_eq!(parse_ratio("1/10"), Some(Ratio::new(1, 10)));
        assert_eq!(parse_ratio(" 3 / 9 "), Some(Ratio::new(1, 3)));
        assert_eq!(parse_ratio("2"), Some(Ratio::from_integer(2)));
        assert_eq!(parse_ratio("1/0"), None);
        assert_eq!(ratio_string(Ratio::new(0, 5)), "0/1");
        assert_eq!(ratio_string(Ratio::new(4, 2)), "2/1");
        assert_eq!(ratio_string(Ratio::new(160, 6640)), "2/83");
    }

    #[test]
    fn symmetrize_dedups_rotations_and_duplicates() {
        let sys = preset_h1();
        let set = SymmetrizedSet::symmetrize(
            &sys,
            &[w(&sys, "x a y a"), w(&sys, "y a x a"), w(&sys, "x a y a")],
        )
        .unwrap();
        assert_eq!(set.base_count(), 2); // the word and its inverse
        assert_eq!(set.representative_count(&sys), 8);
        let err = SymmetrizedSet::symmetrize(&sys, &[w(&sys, "x a a^-1 x^-1")]).unwrap_err();
        assert_eq!(err, SymmetrizeError::IdentityRelator { index: 0 });
    }

    #[test]
    fn members_materialize_with_constant_length() {
        let sys = preset_h1();
        let set = SymmetrizedSet::symmetrize(&sys, &[w(&sys, "x a y a^2")]).unwrap();
        assert_eq!(set.representative_count(&sys), 8);
        for m in set.representatives(&sys) {
            let word = set.member_word(&sys, m);
            assert_eq!(word.len(), m.length);
            let (cyc, _) = cyclically_reduce(&sys, &word);
            assert_eq!(set.contains_cyclic(&cyc), Some(m.base));
        }
    }

    #[test]
    fn two_letter_relator_only_has_the_shared_letter_piece() {
        let sys = preset_h1();
        let set = SymmetrizedSet::symmetrize(&sys, &[w(&sys, "x a")]).unwrap();
        let report = compute_pieces(&sys, &set, lam("1/10"));
        assert_eq!(report.max_piece_length, 1);
        let witness = report.longest_piece.clone().unwrap();
        assert!(witness.shared_letter);
        assert_eq!(report.max_whole_match, 0);
        assert!(verify_piece_witness(&sys, &set, &witness));
        assert!(!report.length_floor_ok);
        assert!(!report.certified);
        assert_eq!(report.witness_words.unwrap().piece, "s @H");
    }

    #[test]
    fn trivial_shared_subgroup_disjoint_relators_have_no_pieces() {
        let sys =
            FactorSystem::new(&["x", "y", "h"], &["a", "c"], &[], "x", "y", "a", "h").unwrap();
        let set = SymmetrizedSet::symmetrize(&sys, &[w(&sys, "x a"), w(&sys, "y c")]).unwrap();
        let report = compute_pieces(&sys, &set, lam("1/3"));
        assert_eq!(report.max_piece_length, 0);
        assert!(report.longest_piece.is_none());
    }

    #[test]
    fn fuzzy_prefix_walk_matches_expectations() {
        let sys = preset_h1();
        let u = w(&sys, "x a y a x");
        let v = w(&sys, "s x a y a s^-1");
        assert_eq!(v.len(), 4);
        assert_eq!(fuzzy_prefix_len(&sys, &u, &v), 4);
        assert_eq!(fuzzy_prefix_len(&sys, &u, &u), 5);
        assert_eq!(fuzzy_prefix_len(&sys, &u, &w(&sys, "y a")), 0);
        assert_eq!(fuzzy_prefix_len(&sys, &u, &w(&sys, "s^2 x a y")), 3);
        // An inserted junction letter breaks the chain right after it.
        assert_eq!(fuzzy_prefix_len(&sys, &u, &w(&sys, "x s a y a")), 1);
    }

    #[test]
    fn seed_relator_small_cap_piece_values() {
        let sys = preset_h1();
        let set = SymmetrizedSet::symmetrize(&sys, &[build_r0(&sys, 2)]).unwrap();
        let report = compute_pieces(&sys, &set, lam("1/3"));
        // The a·y·a block at offsets 1 and 5 realizes the maximum.
        assert_eq!(report.max_piece_length, 3);
        assert_eq!(report.min_relator_length, 10);
        assert!(report.certified);
        assert!(verify_piece_witness(&sys, &set, report.longest_piece.as_ref().unwrap()));
        let at_tenth = check_c_prime(&sys, &set, lam("1/10"));
        assert!(!at_tenth.is_certified());
    }

    #[test]
    fn seed_and_first_stage_jointly_collapse() {
        let sys = preset_h1();
        let (set, outcome) = joint_family_check(&sys, 2, 1, lam("1/10")).unwrap();
        let report = outcome.report();
        // The two relators differ only in their first letter, so all but one
        // letter of either is a piece.
        assert_eq!(report.max_piece_length, set.base(0).len() - 1);
        assert!(!outcome.is_certified());
    }

    #[test]
    fn scan_agrees_with_direct_prefix_walk_on_members() {
        // Suffix-of-block against next-block alignments peak at 4·cap − 3.
        for cap in 3usize..=5 {
            for sys in [preset_h1(), preset_h0()] {
                let set = SymmetrizedSet::symmetrize(&sys, &[build_r0(&sys, cap)]).unwrap();
                let report = compute_pieces(&sys, &set, lam("1/3"));
                let members: Vec<_> = set.representatives(&sys).collect();
                let mut naive_max = 0usize;
                for (i, mi) in members.iter().enumerate() {
                    let wi = set.member_word(&sys, *mi);
                    for mj in members.iter().skip(i + 1) {
                        let wj = set.member_word(&sys, *mj);
                        naive_max = naive_max.max(fuzzy_prefix_len(&sys, &wi, &wj));
                    }
                }
                assert_eq!(naive_max, 4 * cap - 3, "cap {cap}");
                assert_eq!(report.max_whole_match, naive_max, "cap {cap}");
            }
        }
    }

    #[test]
    #[ignore = "full-scale seed relator scan (nightly tier)"]
    fn full_scale_seed_scan_certifies() {
        let sys = preset_h1();
        let set = SymmetrizedSet::symmetrize(&sys, &[build_r0(&sys, 80)]).unwrap();
        assert_eq!(set.representative_count(&sys), 13_280);
        let outcome = check_c_prime(&sys, &set, lam("1/10"));
        let report = outcome.report();
        assert_eq!(report.max_whole_match, 4 * 80 - 3);
        assert_eq!(report.max_piece_length, 317);
        assert!(outcome.is_certified());
    }

    #[test]
    fn free_prefix_handles_partial_exponents() {
        use crate::grammar::parse_factor_word;
        let sys = preset_h1();
        let a = parse_factor_word(&sys, Factor::K, "x^3 y").unwrap();
        let b = parse_factor_word(&sys, Factor::K, "x^2 s").unwrap();
        let p = free_prefix(&sys, &a, &b);
        assert_eq!(p, parse_factor_word(&sys, Factor::K, "x^2").unwrap());
        let c = parse_factor_word(&sys, Factor::K, "x^-1").unwrap();
        assert!(free_prefix(&sys, &a, &c).is_identity());
    }
}

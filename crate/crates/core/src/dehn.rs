//! The word-problem decision procedure for small-cancellation quotients.
//!
//! Given a symmetrized relator set that carries a metric small-cancellation
//! certificate, membership in the normal closure is decided by Dehn's
//! classical rewriting loop: cyclically reduce, find the longest fragment of
//! a relator occurring in the word (up to shared-subgroup interleaving), and
//! if some fragment covers more than half of its relator, replace it by the
//! complementary part, which strictly shortens the word. A word that empties
//! is in the closure; a nonempty word with every fragment at half or below is
//! declared outside it.
//!
//! The two verdicts have different standing, stated here once and enforced
//! by construction:
//!
//! * **Trivial is unconditional.** Every rewrite is recorded in a [`Trace`],
//!   and [`replay`] re-derives each step from the relator set alone, so a
//!   Trivial verdict is a machine-checkable proof that the input is a
//!   product of conjugates of relators.
//! * **Nontrivial is conditional on the certificate.** Greendlinger's lemma
//!   for C′(1/10) sets guarantees that any nonidentity element of the
//!   closure contains a fragment longer than 7/10 of its relator, so the
//!   rewriting loop cannot get stuck on a closure element. At looser
//!   certificates the verdict is reported but carries no such guarantee.
//!
//! Fragment search works on the same interleaving-invariant key streams the
//! piece scan uses: each relator's doubled stream feeds a suffix automaton,
//! and a query walk reports, for every cyclic position of the word, the
//! longest window matching some relator window, letter-aligned by the
//! disjoint core/junction unit encoding.

use std::collections::HashMap;

use num_rational::Ratio;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::amalgam::{cyclically_reduce, normalize, AmalgamWord, CyclicWord};
use crate::cancellation::{
    check_c_prime, core_unit, fuzzy_prefix_letters, junction_unit, match_adjustments,
    ratio_string, BaseStream, CPrimeOutcome, Interner, Lambda, PieceReport, SymmetrizedSet,
};
use crate::enumerate::factor_ball;
use crate::factors::{Factor, FactorSystem, FactorWord};

// ---------------------------------------------------------------------------
// Suffix automaton over unit streams.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
struct SaState {
    len: u32,
    link: i32,
    /// A valid end position (in the indexed stream) of every string this
    /// state represents; clones inherit the value from the state they split.
    first_end: u32,
    next: HashMap<u32, u32>,
}

#[derive(Debug)]
struct SuffixAutomaton {
    states: Vec<SaState>,
}

impl SuffixAutomaton {
    fn build(units: &[u32]) -> SuffixAutomaton {
        let mut states = vec![SaState { len: 0, link: -1, first_end: 0, next: HashMap::new() }];
        let mut last = 0usize;
        for (pos, &c) in units.iter().enumerate() {
            let cur = states.len();
            states.push(SaState {
                len: states[last].len + 1,
                link: -1,
                first_end: pos as u32,
                next: HashMap::new(),
            });
            let mut p = last as i32;
            while p >= 0 && !states[p as usize].next.contains_key(&c) {
                states[p as usize].next.insert(c, cur as u32);
                p = states[p as usize].link;
            }
            if p < 0 {
                states[cur].link = 0;
            } else {
                let q = states[p as usize].next[&c] as usize;
                if states[p as usize].len + 1 == states[q].len {
                    states[cur].link = q as i32;
                } else {
                    let clone = states.len();
                    let mut split = states[q].clone();
                    split.len = states[p as usize].len + 1;
                    states.push(split);
                    while p >= 0 && states[p as usize].next.get(&c) == Some(&(q as u32)) {
                        states[p as usize].next.insert(c, clone as u32);
                        p = states[p as usize].link;
                    }
                    states[q].link = clone as i32;
                    states[cur].link = clone as i32;
                }
            }
            last = cur;
        }
        SuffixAutomaton { states }
    }

    /// For each query position, the length of the longest suffix of the
    /// query up to that position that occurs in the indexed stream, plus the
    /// automaton state holding that match.
    fn walk(&self, query: &[u32]) -> Vec<(u32, u32)> {
        let mut out = Vec::with_capacity(query.len());
        let mut st = 0usize;
        let mut len = 0u32;
        for &c in query {
            loop {
                if let Some(&nx) = self.states[st].next.get(&c) {
                    st = nx as usize;
                    len += 1;
                    break;
                }
                if st == 0 {
                    len = 0;
                    break;
                }
                st = self.states[st].link as usize;
                len = self.states[st].len;
            }
            out.push((len, st as u32));
        }
        out
    }

    /// A valid end position in the indexed stream of the `want`-unit suffix
    /// of the match currently held by `state`.
    fn occurrence_end(&self, state: u32, want: u32) -> u32 {
        let mut st = state as usize;
        loop {
            let link = self.states[st].link;
            if link < 0 || self.states[link as usize].len < want {
                return self.states[st].first_end;
            }
            st = link as usize;
        }
    }
}

// ---------------------------------------------------------------------------
// Fragment index.
// ---------------------------------------------------------------------------

#[derive(Debug)]
struct FragmentIndex {
    /// Letters in the underlying cyclic relator.
    n: usize,
    automaton: SuffixAutomaton,
}

impl FragmentIndex {
    fn build(stream: &BaseStream) -> FragmentIndex {
        FragmentIndex { n: stream.n, automaton: SuffixAutomaton::build(&stream.units) }
    }
}

/// Location of one fragment occurrence: `length` letters of the relator
/// `base` starting at its rotation offset `base_offset` match the query
/// window starting at cyclic position `w_offset`, up to interleaving.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FragmentHit {
    pub w_offset: usize,
    pub length: usize,
    pub base: usize,
    pub base_offset: usize,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    hit: FragmentHit,
    ratio: Lambda,
}

// ---------------------------------------------------------------------------
// Verdicts, traces, reports.
// ---------------------------------------------------------------------------

/// One recorded rewrite. All other data is recomputed at replay time; the
/// stored lengths are integrity checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewriteStep {
    /// Letters in the cyclic reduction this step saw.
    pub cyclic_length: usize,
    /// Rotation offset placing the fragment at the front.
    pub w_offset: usize,
    pub fragment_length: usize,
    /// Index of the relator base supplying the fragment.
    pub base: usize,
    /// Rotation offset of the fragment inside that base.
    pub base_offset: usize,
    /// Letters in the rewritten word handed to the next round.
    pub result_length: usize,
}

/// Replayable certificate for a Trivial verdict.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub schema: u32,
    pub input: String,
    pub lambda: String,
    pub steps: Vec<RewriteStep>,
}

/// Report backing a Nontrivial verdict: the rewriting loop stopped with
/// every fragment at or below half of its relator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NontrivialReport {
    pub schema: u32,
    pub input: String,
    pub lambda: String,
    /// Letters left when the loop stopped.
    pub residual_length: usize,
    /// Rewrites applied before stopping.
    pub steps_taken: usize,
    /// Largest fragment ratio of the residual word, as `p/q`.
    pub max_fragment_ratio: String,
    pub fragment: Option<FragmentHit>,
}

/// Outcome of a membership query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Trivial(Trace),
    Nontrivial(NontrivialReport),
}

impl Verdict {
    pub fn is_trivial(&self) -> bool {
        matches!(self, Verdict::Trivial(_))
    }

    pub fn trace(&self) -> Option<&Trace> {
        match self {
            Verdict::Trivial(t) => Some(t),
            Verdict::Nontrivial(_) => None,
        }
    }
}

/// Fragment-selection policy for the rewriting loop. Both policies only
/// ever choose fragments covering more than half of their relator, so the
/// verdict is policy-independent; the trace is not.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// Largest ratio, then leftmost in the canonical rotation, then smallest
    /// relator index, then smallest relator offset.
    Leftmost,
    /// Uniformly random among all above-half fragments, seeded for replay.
    Random(u64),
}

/// Result of a bounded factor-injectivity sweep.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BallReport {
    pub schema: u32,
    pub radius: usize,
    pub words_checked: usize,
    pub all_nontrivial: bool,
    /// Canonical displays of any factor words wrongly declared trivial.
    pub offenders: Vec<String>,
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("relator set failed its small-cancellation certificate at λ = {}", .report.lambda)]
    UncertifiedSet { report: Box<PieceReport> },
    #[error("relator set is empty")]
    EmptySet,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReplayError {
    #[error("step {step}: stored cyclic length {stored} but the word reduces to {actual} letters")]
    CyclicLengthMismatch { step: usize, stored: usize, actual: usize },
    #[error("step {step}: field {field} is out of range")]
    FieldOutOfRange { step: usize, field: &'static str },
    #[error("step {step}: fragment does not match the named relator window")]
    FragmentMismatch { step: usize },
    #[error("step {step}: rewrite does not shorten the word")]
    NotShorter { step: usize },
    #[error("step {step}: stored result length {stored} but the rewrite has {actual} letters")]
    ResultLengthMismatch { step: usize, stored: usize, actual: usize },
    #[error("step {step}: removed part is not a conjugate of relator {base}")]
    NotARelatorConjugate { step: usize, base: usize },
    #[error("trace ends on a nonempty word of {residual} letters")]
    ResidueNotTrivial { residual: usize },
    #[error("rebuilt product of conjugates does not equal the input word")]
    ReconstructionMismatch,
}

// ---------------------------------------------------------------------------
// The solver.
// ---------------------------------------------------------------------------

/// Word-problem solver for one certified symmetrized relator set.
///
/// Construction computes the full piece analysis and refuses to proceed
/// unless the set is certified at the requested λ, so every live solver
/// carries a valid certificate. Queries share the solver immutably.
pub struct Solver {
    sys: FactorSystem,
    set: SymmetrizedSet,
    lambda: Lambda,
    report: PieceReport,
    interner: Interner,
    indexes: Vec<FragmentIndex>,
}

fn half() -> Lambda {
    Ratio::new(1, 2)
}

impl Solver {
    pub fn new(
        sys: &FactorSystem,
        set: SymmetrizedSet,
        lambda: Lambda,
    ) -> Result<Solver, SolverError> {
        if set.base_count() == 0 {
            return Err(SolverError::EmptySet);
        }
        let report = match check_c_prime(sys, &set, lambda) {
            CPrimeOutcome::Certified(report) => report,
            CPrimeOutcome::Violated(report) => {
                return Err(SolverError::UncertifiedSet { report: Box::new(report) })
            }
        };
        let mut interner = Interner::default();
        let indexes = set
            .bases()
            .iter()
            .map(|cyc| FragmentIndex::build(&BaseStream::build(sys, &mut interner, cyc)))
            .collect();
        Ok(Solver { sys: sys.clone(), set, lambda, report, interner, indexes })
    }

    pub fn system(&self) -> &FactorSystem {
        &self.sys
    }

    pub fn set(&self) -> &SymmetrizedSet {
        &self.set
    }

    pub fn lambda(&self) -> Lambda {
        self.lambda
    }

    /// The small-cancellation certificate computed at construction.
    pub fn certificate(&self) -> &PieceReport {
        &self.report
    }

    /// Doubled interleaving-key stream of a cyclic query word, encoded with
    /// the relator interner; units unseen in any relator become dead values
    /// that match nothing.
    fn query_units(&self, cyc: &CyclicWord) -> Vec<u32> {
        let keys = crate::amalgam::rotation_keys(&self.sys, cyc.letters());
        let mut units = Vec::with_capacity(4 * keys.len());
        for (core, junction) in &keys {
            units.push(self.interner.lookup(core).map_or(u32::MAX, core_unit));
            units.push(self.interner.lookup(junction).map_or(u32::MAX, junction_unit));
        }
        let single = units.clone();
        units.extend_from_slice(&single);
        units
    }

    /// All maximal fragment occurrences in the cyclic word: for every cyclic
    /// end position and every relator, the longest window of that relator
    /// matching there, reported with its start offset.
    fn fragments(&self, cyc: &CyclicWord) -> Vec<Candidate> {
        let n_w = cyc.len();
        if n_w == 0 {
            return Vec::new();
        }
        let query = self.query_units(cyc);
        let per_base: Vec<Vec<Candidate>> = self
            .indexes
            .par_iter()
            .enumerate()
            .map(|(base, index)| {
                let walk = index.automaton.walk(&query);
                let mut best: Vec<Option<(usize, u32)>> = vec![None; n_w]; // per end residue
                for t in n_w..2 * n_w {
                    let (len_units, state) = walk[2 * t];
                    let len = ((len_units as usize + 1) / 2).min(n_w).min(index.n);
                    if len == 0 {
                        continue;
                    }
                    let slot = &mut best[t % n_w];
                    if slot.map_or(true, |(old, _)| len > old) {
                        *slot = Some((len, state));
                    }
                }
                let mut out = Vec::new();
                for (end, slot) in best.iter().enumerate() {
                    let Some((len, state)) = *slot else { continue };
                    let units_len = (2 * len - 1) as u32;
                    let occ_end = index.automaton.occurrence_end(state, units_len) as usize;
                    let start_unit = occ_end + 1 - units_len as usize;
                    debug_assert_eq!(start_unit % 2, 0);
                    let base_offset = (start_unit / 2) % index.n;
                    let w_offset = (end + n_w + 1 - len) % n_w;
                    out.push(Candidate {
                        hit: FragmentHit { w_offset, length: len, base, base_offset },
                        ratio: Ratio::new(len as u64, index.n as u64),
                    });
                }
                out
            })
            .collect();
        per_base.into_iter().flatten().collect()
    }

    /// Largest fragment ratio over all relators, with one witnessing
    /// occurrence; ratio 0 when no window of the word matches any relator
    /// window.
    pub fn max_fragment(&self, w: &AmalgamWord) -> (Lambda, Option<FragmentHit>) {
        let (cyc, _) = cyclically_reduce(&self.sys, w);
        self.max_fragment_cyclic(&cyc)
    }

    /// [`Solver::max_fragment`] for an already cyclically reduced word.
    pub fn max_fragment_cyclic(&self, cyc: &CyclicWord) -> (Lambda, Option<FragmentHit>) {
        let mut best: Option<Candidate> = None;
        for cand in self.fragments(cyc) {
            let better = match &best {
                None => true,
                Some(b) => {
                    (cand.ratio, std::cmp::Reverse(cand.hit.w_offset))
                        > (b.ratio, std::cmp::Reverse(b.hit.w_offset))
                }
            };
            if better {
                best = Some(cand);
            }
        }
        match best {
            Some(c) => (c.ratio, Some(c.hit)),
            None => (Ratio::new(0, 1), None),
        }
    }

    /// Apply one rewrite: the fragment (the first `length` letters of the
    /// rotation placing it at the front) is replaced by the complementary
    /// part of its relator, with the interleaving adjustments preserving the
    /// group element it represents.
    fn rewrite(&self, cyc: &CyclicWord, hit: FragmentHit) -> (AmalgamWord, RewriteStep) {
        let rot = cyc.rotation(&self.sys, hit.w_offset);
        let member = self.set.base(hit.base).rotation(&self.sys, hit.base_offset);
        let l = hit.length;
        debug_assert_eq!(
            fuzzy_prefix_letters(&self.sys, &member.letters()[..l], &rot.letters()[..l]),
            l,
            "indexed fragment must match the relator window"
        );
        let next = splice(&self.sys, &rot, &member, l);
        assert!(
            next.len() < rot.len(),
            "above-half rewrites must shorten: {} -> {}",
            rot.len(),
            next.len()
        );
        let step = RewriteStep {
            cyclic_length: cyc.len(),
            w_offset: hit.w_offset,
            fragment_length: l,
            base: hit.base,
            base_offset: hit.base_offset,
            result_length: next.len(),
        };
        (next, step)
    }

    /// Decide membership of the word in the normal closure of the relator
    /// set, using the deterministic leftmost strategy.
    pub fn membership(&self, w: &AmalgamWord) -> Verdict {
        self.membership_with_strategy(w, Strategy::Leftmost)
    }

    /// Decide membership with an explicit fragment-selection strategy.
    pub fn membership_with_strategy(&self, w: &AmalgamWord, strategy: Strategy) -> Verdict {
        let mut rng = match strategy {
            Strategy::Leftmost => None,
            Strategy::Random(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        };
        let mut current = w.clone();
        let mut steps = Vec::new();
        loop {
            let (cyc, _) = cyclically_reduce(&self.sys, &current);
            if cyc.is_empty() {
                return Verdict::Trivial(Trace {
                    schema: 1,
                    input: w.display(&self.sys),
                    lambda: ratio_string(self.lambda),
                    steps,
                });
            }
            let candidates = self.fragments(&cyc);
            let above_half: Vec<&Candidate> =
                candidates.iter().filter(|c| c.ratio > half()).collect();
            if above_half.is_empty() {
                let best = candidates.iter().max_by_key(|c| {
                    (
                        c.ratio,
                        std::cmp::Reverse(c.hit.w_offset),
                        std::cmp::Reverse(c.hit.base),
                        std::cmp::Reverse(c.hit.base_offset),
                    )
                });
                return Verdict::Nontrivial(NontrivialReport {
                    schema: 1,
                    input: w.display(&self.sys),
                    lambda: ratio_string(self.lambda),
                    residual_length: cyc.len(),
                    steps_taken: steps.len(),
                    max_fragment_ratio: ratio_string(
                        best.map_or(Ratio::new(0, 1), |c| c.ratio),
                    ),
                    fragment: best.map(|c| c.hit),
                });
            }
            let chosen = match &mut rng {
                None => above_half
                    .iter()
                    .max_by_key(|c| {
                        (
                            c.ratio,
                            std::cmp::Reverse(c.hit.w_offset),
                            std::cmp::Reverse(c.hit.base),
                            std::cmp::Reverse(c.hit.base_offset),
                        )
                    })
                    .expect("nonempty"),
                Some(rng) => above_half[rng.gen_range(0..above_half.len())],
            };
            let (next, step) = self.rewrite(&cyc, chosen.hit);
            steps.push(step);
            current = next;
        }
    }

    /// Check that no nonidentity word of either factor with syllable weight
    /// up to `radius` lies in the normal closure.
    pub fn ball_injectivity(&self, radius: usize) -> BallReport {
        let words: Vec<(Factor, FactorWord)> = factor_ball(&self.sys, Factor::K, radius)
            .into_iter()
            .map(|w| (Factor::K, w))
            .chain(factor_ball(&self.sys, Factor::L, radius).into_iter().map(|w| (Factor::L, w)))
            .collect();
        let offenders: Vec<String> = words
            .par_iter()
            .filter_map(|(_, g)| {
                let w = normalize(&self.sys, vec![g.clone()]);
                if self.membership(&w).is_trivial() {
                    Some(g.display(&self.sys))
                } else {
                    None
                }
            })
            .collect();
        BallReport {
            schema: 1,
            radius,
            words_checked: words.len(),
            all_nontrivial: offenders.is_empty(),
            offenders,
        }
    }
}

/// Replace the length-`l` front of `rot` (which matches the front of the
/// relator rotation `member` up to interleaving) by the complement of the
/// relator, preserving the represented element.
fn splice(sys: &FactorSystem, rot: &AmalgamWord, member: &AmalgamWord, l: usize) -> AmalgamWord {
    let (h_a, h_b) = match_adjustments(sys, &member.letters()[..l], &rot.letters()[..l], l);
    let mut letters: Vec<FactorWord> =
        Vec::with_capacity(member.len() - l + rot.len() - l + 2);
    letters.push(h_a);
    for m in member.letters()[l..].iter().rev() {
        letters.push(m.inverse());
    }
    letters.push(h_b);
    letters.extend_from_slice(&rot.letters()[l..]);
    normalize(sys, letters)
}

// ---------------------------------------------------------------------------
// Trace replay.
// ---------------------------------------------------------------------------

/// Independently re-derive every step of a Trivial trace and rebuild the
/// product of conjugates it encodes.
///
/// Each step is validated from scratch: the stored fragment must genuinely
/// match its relator window (checked by the direct interleaving walk, not
/// the index), the removed part must cyclically reduce to the named relator
/// base, and the length bookkeeping must hold with strict decrease. The
/// rebuilt product of conjugates is compared against the input word; on
/// success it is returned for display.
pub fn replay(
    sys: &FactorSystem,
    set: &SymmetrizedSet,
    input: &AmalgamWord,
    trace: &Trace,
) -> Result<AmalgamWord, ReplayError> {
    let mut current = input.clone();
    let mut carrier = AmalgamWord::identity(); // product of stripped conjugators so far
    let mut product_letters: Vec<FactorWord> = Vec::new();
    for (i, step) in trace.steps.iter().enumerate() {
        let (cyc, conj) = cyclically_reduce(sys, &current);
        if cyc.len() != step.cyclic_length {
            return Err(ReplayError::CyclicLengthMismatch {
                step: i,
                stored: step.cyclic_length,
                actual: cyc.len(),
            });
        }
        if step.base >= set.base_count() {
            return Err(ReplayError::FieldOutOfRange { step: i, field: "base" });
        }
        let base = set.base(step.base);
        let l = step.fragment_length;
        if step.w_offset >= cyc.len() || l == 0 || l > cyc.len() {
            return Err(ReplayError::FieldOutOfRange { step: i, field: "w_offset" });
        }
        if step.base_offset >= base.len() || l > base.len() || 2 * l <= base.len() {
            return Err(ReplayError::FieldOutOfRange { step: i, field: "base_offset" });
        }
        let rot = cyc.rotation(sys, step.w_offset);
        let member = base.rotation(sys, step.base_offset);
        if fuzzy_prefix_letters(sys, &member.letters()[..l], &rot.letters()[..l]) != l {
            return Err(ReplayError::FragmentMismatch { step: i });
        }
        let next = splice(sys, &rot, &member, l);
        if next.len() >= rot.len() {
            return Err(ReplayError::NotShorter { step: i });
        }
        if next.len() != step.result_length {
            return Err(ReplayError::ResultLengthMismatch {
                step: i,
                stored: step.result_length,
                actual: next.len(),
            });
        }
        // The part this step removed, conjugated back to the input's frame:
        // rot = z · next with z = h_a·member·h_a⁻¹, so z must cyclically
        // reduce to the relator base itself.
        let z = normalize(
            sys,
            rot.letters()
                .iter()
                .cloned()
                .chain(next.inverse(sys).letters().iter().cloned())
                .collect(),
        );
        let (z_cyc, _) = cyclically_reduce(sys, &z);
        if z_cyc != *base {
            return Err(ReplayError::NotARelatorConjugate { step: i, base: step.base });
        }
        // Accumulate carrier · z · carrier⁻¹ into the rebuilt product, then
        // absorb this step's stripped conjugator and rotation prefix.
        let rho = cyc.linearization().subword(sys, 0..step.w_offset);
        let frame = normalize(
            sys,
            carrier
                .letters()
                .iter()
                .cloned()
                .chain(conj.letters().iter().cloned())
                .chain(rho.letters().iter().cloned())
                .collect(),
        );
        product_letters.extend_from_slice(frame.letters());
        product_letters.extend_from_slice(z.letters());
        product_letters.extend_from_slice(frame.inverse(sys).letters());
        carrier = frame;
        current = next;
    }
    let (final_cyc, _) = cyclically_reduce(sys, &current);
    if !final_cyc.is_empty() {
        return Err(ReplayError::ResidueNotTrivial { residual: final_cyc.len() });
    }
    let rebuilt = normalize(sys, product_letters);
    if rebuilt != *input {
        return Err(ReplayError::ReconstructionMismatch);
    }
    Ok(rebuilt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cancellation::parse_ratio;
    use crate::factors::preset_h1;
    use crate::grammar::parse_amalgam_word;
    use crate::relators::{build_r0, r0_length};
    use crate::sampling::SeededSampler;

    fn solver_at(cap: usize, lambda: &str) -> Solver {
        let sys = preset_h1();
        let set = SymmetrizedSet::symmetrize(&sys, &[build_r0(&sys, cap)]).expect("valid");
        Solver::new(&sys, set, parse_ratio(lambda).expect("ratio")).expect("certified")
    }

    #[test]
    fn uncertified_sets_are_rejected_with_the_report() {
        let sys = preset_h1();
        let x = parse_amalgam_word(&sys, "x").expect("parse");
        let set = SymmetrizedSet::symmetrize(&sys, &[x]).expect("valid");
        match Solver::new(&sys, set, parse_ratio("1/10").expect("ratio")) {
            Err(SolverError::UncertifiedSet { report }) => {
                assert!(!report.certified);
                assert_eq!(report.min_relator_length, 1);
            }
            Err(other) => panic!("expected UncertifiedSet, got {other}"),
            Ok(_) => panic!("expected UncertifiedSet, got a solver"),
        }
    }

    #[test]
    fn the_relator_itself_dies_in_one_step() {
        let solver = solver_at(4, "1/2");
        let sys = solver.system();
        let r = build_r0(sys, 4);
        let verdict = solver.membership(&r);
        let Verdict::Trivial(trace) = &verdict else {
            panic!("relator must be trivial, got {verdict:?}")
        };
        assert_eq!(trace.steps.len(), 1);
        assert_eq!(trace.steps[0].fragment_length, r0_length(4));
        assert_eq!(trace.steps[0].result_length, 0);
        let rebuilt = replay(sys, solver.set(), &r, trace).expect("replay");
        assert_eq!(rebuilt, r);
    }

    #[test]
    fn single_generators_are_nontrivial() {
        let solver = solver_at(4, "1/2");
        let sys = solver.system();
        for name in ["x", "y", "h", "a", "s"] {
            let w = parse_amalgam_word(sys, name).expect("parse");
            let verdict = solver.membership(&w);
            let Verdict::Nontrivial(report) = &verdict else {
                panic!("{name} must be nontrivial, got {verdict:?}")
            };
            assert_eq!(report.residual_length, 1);
            assert_eq!(report.steps_taken, 0);
        }
    }

    #[test]
    fn whole_relator_fragment_has_ratio_one() {
        let solver = solver_at(4, "1/2");
        let r = build_r0(solver.system(), 4);
        let (ratio, hit) = solver.max_fragment(&r);
        assert_eq!(ratio, Ratio::new(1, 1));
        let hit = hit.expect("a whole-relator occurrence");
        assert_eq!(hit.length, r0_length(4));
    }

    #[test]
    fn prefix_with_foreign_tail_scores_its_exact_length() {
        // Two of the relator's four block runs, then a letter whose core
        // (negative exponent) appears in no relator rotation, so the
        // fragment is exactly the copied prefix.
        let solver = solver_at(4, "1/2");
        let sys = solver.system();
        let r = build_r0(sys, 4);
        let keep = 11;
        let mut letters: Vec<FactorWord> = r.letters()[..keep].to_vec();
        letters.push(sys.a.inverse());
        let w = normalize(sys, letters);
        assert_eq!(w.len(), keep + 1);
        let (ratio, hit) = solver.max_fragment(&w);
        assert_eq!(ratio, Ratio::new(keep as u64, r0_length(4) as u64));
        assert_eq!(hit.expect("hit").length, keep);
    }

    #[test]
    fn conjugate_products_reduce_to_trivial_with_replayable_traces() {
        let solver = solver_at(4, "1/2");
        let sys = solver.system();
        let r = build_r0(sys, 4);
        let mut sampler = SeededSampler::new(2024);
        for _ in 0..25 {
            let w = sampler.relator_product(sys, &[r.clone()], 3, 3);
            let verdict = solver.membership(&w);
            let Verdict::Trivial(trace) = &verdict else {
                panic!("product of conjugates must be trivial, got {verdict:?}")
            };
            let rebuilt = replay(sys, solver.set(), &w, trace).expect("replay");
            assert_eq!(rebuilt, w);
        }
    }

    #[test]
    fn interleaved_conjugates_still_reduce() {
        // Decorate the relator's letters with shared-subgroup shuffles
        // before conjugating: the verdict and trace replay must be immune.
        let solver = solver_at(5, "1/2");
        let sys = solver.system();
        let r = build_r0(sys, 5);
        let mut sampler = SeededSampler::new(7);
        for _ in 0..10 {
            let mut letters = r.letters().to_vec();
            for _ in 0..6 {
                letters = sampler.perturb_interleaving(sys, &letters);
            }
            let shuffled = normalize(sys, letters);
            assert_eq!(shuffled, r, "interleaving never changes the element");
            let u = sampler.amalgam_word(sys, 2);
            let w = normalize(
                sys,
                u.letters()
                    .iter()
                    .cloned()
                    .chain(shuffled.letters().iter().cloned())
                    .chain(u.inverse(sys).letters().iter().cloned())
                    .collect(),
            );
            let verdict = solver.membership(&w);
            assert!(verdict.is_trivial(), "got {verdict:?}");
            let rebuilt = replay(sys, solver.set(), &w, verdict.trace().expect("trace"))
                .expect("replay");
            assert_eq!(rebuilt, w);
        }
    }

    #[test]
    fn strategies_agree_on_the_verdict() {
        let solver = solver_at(4, "1/2");
        let sys = solver.system();
        let r = build_r0(sys, 4);
        let mut sampler = SeededSampler::new(31);
        for i in 0..10 {
            let w = sampler.relator_product(sys, &[r.clone()], 2, 2);
            let left = solver.membership_with_strategy(&w, Strategy::Leftmost);
            let rand = solver.membership_with_strategy(&w, Strategy::Random(i));
            assert_eq!(left.is_trivial(), rand.is_trivial());
            assert!(left.is_trivial());
        }
        let g = sampler.amalgam_word(sys, 9);
        let left = solver.membership_with_strategy(&g, Strategy::Leftmost);
        let rand = solver.membership_with_strategy(&g, Strategy::Random(5));
        assert_eq!(left.is_trivial(), rand.is_trivial());
    }

    #[test]
    fn rewrites_shorten_by_the_guaranteed_margin() {
        let solver = solver_at(4, "1/2");
        let sys = solver.system();
        let r = build_r0(sys, 4);
        let n = r0_length(4);
        let mut sampler = SeededSampler::new(55);
        for _ in 0..10 {
            let w = sampler.relator_product(sys, &[r.clone()], 3, 2);
            if let Verdict::Trivial(trace) = solver.membership(&w) {
                for step in &trace.steps {
                    let decrease = step.cyclic_length - step.result_length;
                    let margin = (2 * step.fragment_length).saturating_sub(n);
                    assert!(decrease >= margin.max(1), "decrease {decrease} < margin {margin}");
                }
            } else {
                panic!("expected trivial");
            }
        }
    }

    #[test]
    fn conjugation_does_not_change_the_verdict() {
        let solver = solver_at(4, "1/2");
        let sys = solver.system();
        let r = build_r0(sys, 4);
        let mut sampler = SeededSampler::new(77);
        for i in 0..8 {
            let w = if i % 2 == 0 {
                sampler.relator_product(sys, &[r.clone()], 2, 2)
            } else {
                sampler.amalgam_word(sys, 7)
            };
            let u = sampler.amalgam_word(sys, 3);
            let conj = normalize(
                sys,
                u.letters()
                    .iter()
                    .cloned()
                    .chain(w.letters().iter().cloned())
                    .chain(u.inverse(sys).letters().iter().cloned())
                    .collect(),
            );
            assert_eq!(
                solver.membership(&w).is_trivial(),
                solver.membership(&conj).is_trivial()
            );
        }
    }

    #[test]
    fn tampered_traces_are_rejected() {
        let solver = solver_at(4, "1/2");
        let sys = solver.system();
        let r = build_r0(sys, 4);
        let Verdict::Trivial(trace) = solver.membership(&r) else { panic!("trivial") };

        // Shrinking the fragment by one still leaves a valid alternative
        // proof (the complement cancels against the rotation's tail), so
        // replay accepts it; corrupted bookkeeping must be rejected.
        let mut wrong_result = trace.clone();
        wrong_result.steps[0].result_length += 1;
        assert_eq!(
            replay(sys, solver.set(), &r, &wrong_result),
            Err(ReplayError::ResultLengthMismatch { step: 0, stored: 1, actual: 0 })
        );

        let mut wrong_cyclic = trace.clone();
        wrong_cyclic.steps[0].cyclic_length += 1;
        assert!(matches!(
            replay(sys, solver.set(), &r, &wrong_cyclic),
            Err(ReplayError::CyclicLengthMismatch { .. })
        ));

        let mut wrong_offset = trace.clone();
        wrong_offset.steps[0].base_offset += 1;
        assert!(replay(sys, solver.set(), &r, &wrong_offset).is_err());

        let mut truncated = trace.clone();
        truncated.steps.clear();
        assert_eq!(
            replay(sys, solver.set(), &r, &truncated),
            Err(ReplayError::ResidueNotTrivial { residual: r.len() })
        );
    }

    #[test]
    fn ball_injectivity_holds_at_small_radius() {
        let solver = solver_at(4, "1/2");
        let report = solver.ball_injectivity(2);
        assert!(report.all_nontrivial);
        assert_eq!(report.words_checked, 64 + 16);
        let vacuous = solver.ball_injectivity(0);
        assert!(vacuous.all_nontrivial);
        assert_eq!(vacuous.words_checked, 0);
    }

    #[test]
    fn verdicts_serialize_round_trip() {
        let solver = solver_at(4, "1/2");
        let sys = solver.system();
        let r = build_r0(sys, 4);
        let verdict = solver.membership(&r);
        let json = serde_json::to_string(&verdict).expect("serialize");
        let back: Verdict = serde_json::from_str(&json).expect("deserialize");
        assert_eq!(back, verdict);
    }
}

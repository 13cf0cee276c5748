//! Factor groups of the amalgam.
//!
//! Both factors are finitely generated free groups presented over a common
//! symbol table. The amalgamated subgroup `H` is the free factor generated by
//! the symbols both alphabets share, so membership in `H`, double-coset
//! questions, and conjugate-intersection checks reduce to syllable
//! inspection.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use thiserror::Error;

/// Which factor group a word lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Factor {
    K,
    L,
}

impl Factor {
    pub fn other(self) -> Factor {
        match self {
            Factor::K => Factor::L,
            Factor::L => Factor::K,
        }
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Factor::K => write!(f, "K"),
            Factor::L => write!(f, "L"),
        }
    }
}

/// One maximal power of a single generator inside a reduced word.
///
/// Exponents are arbitrary-precision: rewriting can stack powers without
/// bound, and nothing here should silently wrap.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Syllable {
    pub sym: u32,
    pub exp: BigInt,
}

impl Syllable {
    pub fn new(sym: u32, exp: impl Into<BigInt>) -> Self {
        Syllable { sym, exp: exp.into() }
    }

    fn inverse(&self) -> Syllable {
        Syllable { sym: self.sym, exp: -&self.exp }
    }

    /// Free length contributed by this syllable.
    pub fn weight(&self) -> usize {
        // Magnitudes in practice are tiny; saturate rather than panic on
        // absurd inputs.
        self.exp.abs().try_into().unwrap_or(usize::MAX)
    }
}

// Order syllables by symbol, then exponent magnitude, positive before
// negative. This keeps enumerations in the natural reading order
// (s before s^-1 before s^2).
impl PartialOrd for Syllable {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Syllable {
    fn cmp(&self, other: &Self) -> Ordering {
        self.sym
            .cmp(&other.sym)
            .then_with(|| self.exp.abs().cmp(&other.exp.abs()))
            .then_with(|| other.exp.sign().cmp(&self.exp.sign()))
    }
}

/// A freely reduced word in one factor group.
///
/// Invariants: no zero exponents, adjacent syllables use distinct symbols,
/// and a word whose syllables all lie in the shared subgroup carries the
/// canonical tag `K` (the tag of a shared-only word is semantically
/// meaningless, so equality must not depend on it).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FactorWord {
    factor: Factor,
    syllables: Vec<Syllable>,
}

/// Errors from factor-level operations.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum FactorError {
    #[error("unknown symbol `{name}` in factor {factor}")]
    UnknownSymbol { name: String, factor: Factor },
    #[error("word lies in the amalgamated subgroup H")]
    InH,
}

impl FactorWord {
    /// Build from raw syllables, freely reducing and canonicalizing the tag.
    pub fn new(sys: &FactorSystem, factor: Factor, raw: Vec<Syllable>) -> FactorWord {
        let mut syllables: Vec<Syllable> = Vec::with_capacity(raw.len());
        for s in raw {
            push_reduced(&mut syllables, s);
        }
        let mut w = FactorWord { factor, syllables };
        w.canonicalize_tag(sys);
        w
    }

    pub fn identity(factor: Factor) -> FactorWord {
        FactorWord { factor: canonical_identity_tag(factor), syllables: Vec::new() }
    }

    /// Single-generator word `sym^exp`.
    pub fn generator(sys: &FactorSystem, factor: Factor, sym: u32, exp: impl Into<BigInt>) -> FactorWord {
        FactorWord::new(sys, factor, vec![Syllable::new(sym, exp)])
    }

    pub fn factor(&self) -> Factor {
        self.factor
    }

    pub fn syllables(&self) -> &[Syllable] {
        &self.syllables
    }

    pub fn is_identity(&self) -> bool {
        self.syllables.is_empty()
    }

    /// Total free length (sum of exponent magnitudes).
    pub fn weight(&self) -> usize {
        self.syllables.iter().map(Syllable::weight).sum()
    }

    pub fn inverse(&self) -> FactorWord {
        FactorWord {
            factor: self.factor,
            syllables: self.syllables.iter().rev().map(Syllable::inverse).collect(),
        }
    }

    /// Free product of two words of the same factor (or of a shared-only
    /// word with anything).
    pub fn mul(&self, sys: &FactorSystem, rhs: &FactorWord) -> FactorWord {
        debug_assert!(
            self.factor == rhs.factor || sys.in_h(self) || sys.in_h(rhs),
            "multiplying words from different factors"
        );
        let factor = if sys.in_h(self) { rhs.factor } else { self.factor };
        let mut syllables = self.syllables.clone();
        for s in &rhs.syllables {
            push_reduced(&mut syllables, s.clone());
        }
        let mut w = FactorWord { factor, syllables };
        w.canonicalize_tag(sys);
        w
    }

    fn canonicalize_tag(&mut self, sys: &FactorSystem) {
        if self.syllables.iter().all(|s| sys.is_shared(s.sym)) {
            self.factor = Factor::K;
        }
    }

    /// Re-tag a shared-only word; no-op when the word has factor-specific
    /// content.
    pub fn with_factor(&self, sys: &FactorSystem, factor: Factor) -> FactorWord {
        let mut w = self.clone();
        if sys.in_h(&w) {
            w.factor = factor;
        }
        w
    }
}

fn canonical_identity_tag(_requested: Factor) -> Factor {
    Factor::K
}

fn push_reduced(acc: &mut Vec<Syllable>, s: Syllable) {
    if s.exp.is_zero() {
        return;
    }
    if let Some(last) = acc.last_mut() {
        if last.sym == s.sym {
            last.exp += s.exp;
            if last.exp.is_zero() {
                acc.pop();
            }
            return;
        }
    }
    acc.push(s);
}

/// The pair of factor groups with their shared subgroup and the four
/// distinguished elements the relator constructions use.
#[derive(Debug, Clone)]
pub struct FactorSystem {
    symbols: Vec<String>,
    shared: Vec<bool>,
    in_k: Vec<bool>,
    in_l: Vec<bool>,
    k_symbols: Vec<u32>,
    l_symbols: Vec<u32>,
    pub x: FactorWord,
    pub y: FactorWord,
    pub a: FactorWord,
    pub h: FactorWord,
}

/// Errors detected while assembling or validating a system.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum SystemError {
    #[error("duplicate generator name `{0}`")]
    DuplicateSymbol(String),
    #[error("shared symbol `{0}` must appear in both alphabets")]
    SharedNotInBoth(String),
    #[error("distinguished element `{name}` failed its hypothesis: {reason}")]
    BadElement { name: String, reason: String },
}

impl FactorSystem {
    /// Assemble a system from alphabets and the distinguished elements given
    /// as symbol names (each must be a single generator for this entry
    /// point; richer words arrive via the grammar).
    pub fn new(
        k_names: &[&str],
        l_names: &[&str],
        shared_names: &[&str],
        x: &str,
        y: &str,
        a: &str,
        h: &str,
    ) -> Result<FactorSystem, SystemError> {
        let mut sys = FactorSystem::shell(k_names, l_names, shared_names)?;
        sys.x = sys.single(Factor::K, x, "x")?;
        sys.y = sys.single(Factor::K, y, "y")?;
        sys.a = sys.single(Factor::L, a, "a")?;
        sys.h = sys.single(Factor::K, h, "h")?;
        sys.validate()?;
        Ok(sys)
    }

    /// Assemble a system with the distinguished elements given as words in
    /// the textual grammar — the configuration-file entry point.
    pub fn from_words(
        k_names: &[&str],
        l_names: &[&str],
        shared_names: &[&str],
        x: &str,
        y: &str,
        a: &str,
        h: &str,
    ) -> Result<FactorSystem, SystemError> {
        let mut sys = FactorSystem::shell(k_names, l_names, shared_names)?;
        let parse = |sys: &FactorSystem, factor: Factor, src: &str, role: &str| {
            crate::grammar::parse_factor_word(sys, factor, src).map_err(|e| {
                SystemError::BadElement { name: role.into(), reason: e.to_string() }
            })
        };
        sys.x = parse(&sys, Factor::K, x, "x")?;
        sys.y = parse(&sys, Factor::K, y, "y")?;
        sys.a = parse(&sys, Factor::L, a, "a")?;
        sys.h = parse(&sys, Factor::K, h, "h")?;
        sys.validate()?;
        Ok(sys)
    }

    /// Alphabet assembly shared by the constructors: symbol table, factor
    /// membership, and shared-subgroup marking, with identity placeholders
    /// for the distinguished elements.
    fn shell(
        k_names: &[&str],
        l_names: &[&str],
        shared_names: &[&str],
    ) -> Result<FactorSystem, SystemError> {
        let mut symbols: Vec<String> = Vec::new();
        let lookup = |name: &str, symbols: &mut Vec<String>| -> u32 {
            if let Some(i) = symbols.iter().position(|s| s == name) {
                i as u32
            } else {
                symbols.push(name.to_string());
                (symbols.len() - 1) as u32
            }
        };
        let mut k_symbols = Vec::new();
        for n in k_names {
            let id = lookup(n, &mut symbols);
            if k_symbols.contains(&id) {
                return Err(SystemError::DuplicateSymbol((*n).into()));
            }
            k_symbols.push(id);
        }
        let mut l_symbols = Vec::new();
        for n in l_names {
            let id = lookup(n, &mut symbols);
            if l_symbols.contains(&id) {
                return Err(SystemError::DuplicateSymbol((*n).into()));
            }
            l_symbols.push(id);
        }
        let mut shared = vec![false; symbols.len()];
        for n in shared_names {
            let Some(i) = symbols.iter().position(|s| s == *n) else {
                return Err(SystemError::SharedNotInBoth((*n).into()));
            };
            shared[i] = true;
        }
        let mut in_k = vec![false; symbols.len()];
        for &i in &k_symbols {
            in_k[i as usize] = true;
        }
        let mut in_l = vec![false; symbols.len()];
        for &i in &l_symbols {
            in_l[i as usize] = true;
        }
        for (i, &sh) in shared.iter().enumerate() {
            if sh && !(in_k[i] && in_l[i]) {
                return Err(SystemError::SharedNotInBoth(symbols[i].clone()));
            }
        }
        // Non-shared symbols must belong to exactly one alphabet; otherwise
        // K ∩ L would exceed H.
        for i in 0..symbols.len() {
            if in_k[i] && in_l[i] && !shared[i] {
                return Err(SystemError::SharedNotInBoth(symbols[i].clone()));
            }
        }

        Ok(FactorSystem {
            symbols,
            shared,
            in_k,
            in_l,
            k_symbols,
            l_symbols,
            x: FactorWord::identity(Factor::K),
            y: FactorWord::identity(Factor::K),
            a: FactorWord::identity(Factor::L),
            h: FactorWord::identity(Factor::K),
        })
    }

    fn single(&self, factor: Factor, name: &str, role: &str) -> Result<FactorWord, SystemError> {
        let id = self.symbol_id(name).ok_or_else(|| SystemError::BadElement {
            name: role.into(),
            reason: format!("unknown symbol `{name}`"),
        })?;
        if !self.alphabet_contains(factor, id) {
            return Err(SystemError::BadElement {
                name: role.into(),
                reason: format!("symbol `{name}` is not a {factor} generator"),
            });
        }
        Ok(FactorWord::generator(self, factor, id, 1))
    }

    /// Replace the distinguished `h` (used when assembling a new
    /// presentation step) and re-validate.
    pub fn with_h(&self, h: FactorWord) -> Result<FactorSystem, SystemError> {
        let mut sys = self.clone();
        sys.h = h;
        sys.validate()?;
        Ok(sys)
    }

    /// Check every hypothesis the relator constructions rely on.
    pub fn validate(&self) -> Result<(), SystemError> {
        let bad = |name: &str, reason: &str| SystemError::BadElement {
            name: name.into(),
            reason: reason.into(),
        };
        for (name, w, factor) in [
            ("x", &self.x, Factor::K),
            ("y", &self.y, Factor::K),
            ("h", &self.h, Factor::K),
            ("a", &self.a, Factor::L),
        ] {
            if self.in_h(w) {
                return Err(bad(name, "must lie outside H"));
            }
            if w.factor() != factor {
                return Err(bad(name, &format!("must lie in factor {factor}")));
            }
            for s in w.syllables() {
                if !self.alphabet_contains(factor, s.sym) {
                    return Err(bad(name, &format!("uses a symbol outside factor {factor}")));
                }
            }
        }
        if !self.good_fellows(&self.x, &self.y).unwrap_or(false) {
            return Err(bad("x, y", "x must avoid H·y·H and H·y⁻¹·H"));
        }
        if !self.conjugate_intersection_trivial(&self.a).unwrap_or(false) {
            return Err(bad("a", "a⁻¹·H·a must meet H trivially"));
        }
        Ok(())
    }

    pub fn symbol_id(&self, name: &str) -> Option<u32> {
        self.symbols.iter().position(|s| s == name).map(|i| i as u32)
    }

    pub fn symbol_name(&self, id: u32) -> &str {
        &self.symbols[id as usize]
    }

    pub fn is_shared(&self, id: u32) -> bool {
        self.shared[id as usize]
    }

    pub fn alphabet_contains(&self, factor: Factor, id: u32) -> bool {
        match factor {
            Factor::K => self.in_k[id as usize],
            Factor::L => self.in_l[id as usize],
        }
    }

    pub fn alphabet(&self, factor: Factor) -> &[u32] {
        match factor {
            Factor::K => &self.k_symbols,
            Factor::L => &self.l_symbols,
        }
    }

    pub fn shared_symbols(&self) -> Vec<u32> {
        (0..self.symbols.len() as u32).filter(|&i| self.shared[i as usize]).collect()
    }

    /// Membership in the amalgamated subgroup: every syllable shared.
    pub fn in_h(&self, w: &FactorWord) -> bool {
        w.syllables().iter().all(|s| self.is_shared(s.sym))
    }

    /// Freely reduce raw syllables as a word of one factor; rejects symbols
    /// outside that factor's alphabet.
    pub fn reduce(&self, factor: Factor, raw: Vec<Syllable>) -> Result<FactorWord, FactorError> {
        for s in &raw {
            if !self.alphabet_contains(factor, s.sym) {
                return Err(FactorError::UnknownSymbol {
                    name: self.symbol_name(s.sym).to_string(),
                    factor,
                });
            }
        }
        Ok(FactorWord::new(self, factor, raw))
    }

    /// Split `g ∉ H` as `p · core · q` with `p, q ∈ H` and the core starting
    /// and ending on non-shared syllables. The split is unique because `H`
    /// is a free factor.
    pub fn h_core(&self, g: &FactorWord) -> Result<HCore, FactorError> {
        if self.in_h(g) {
            return Err(FactorError::InH);
        }
        let sylls = g.syllables();
        let start = sylls.iter().position(|s| !self.is_shared(s.sym)).expect("non-H word");
        let end = sylls.iter().rposition(|s| !self.is_shared(s.sym)).expect("non-H word");
        let prefix = FactorWord::new(self, g.factor(), sylls[..start].to_vec());
        let core = FactorWord::new(self, g.factor(), sylls[start..=end].to_vec());
        let suffix = FactorWord::new(self, g.factor(), sylls[end + 1..].to_vec());
        Ok(HCore { prefix, core, suffix })
    }

    /// Does `g` lie in the double coset `H·t·H`? Requires both outside `H`.
    pub fn double_coset_member(&self, g: &FactorWord, t: &FactorWord) -> Result<bool, FactorError> {
        if g.factor() != t.factor() {
            return Ok(false);
        }
        let cg = self.h_core(g)?;
        let ct = self.h_core(t)?;
        Ok(cg.core == ct.core)
    }

    /// `u ∉ H·v·H` and `u ∉ H·v⁻¹·H` (and both outside `H`): the separation
    /// hypothesis the letter-matching arguments need.
    pub fn good_fellows(&self, u: &FactorWord, v: &FactorWord) -> Result<bool, FactorError> {
        if self.in_h(u) || self.in_h(v) {
            return Err(FactorError::InH);
        }
        Ok(!self.double_coset_member(u, v)? && !self.double_coset_member(u, &v.inverse())?)
    }

    /// Does `g⁻¹·H·g ∩ H = 1`?
    ///
    /// For `H` a free factor this holds exactly when `g ∉ H`: conjugating a
    /// nontrivial shared-only word by the non-shared core of `g` leaves
    /// non-shared syllables at both ends, so the result cannot be
    /// shared-only. Tests cross-check the claim by bounded enumeration.
    pub fn conjugate_intersection_trivial(&self, g: &FactorWord) -> Result<bool, FactorError> {
        if self.in_h(g) {
            return Err(FactorError::InH);
        }
        Ok(true)
    }
}

/// Result of [`FactorSystem::h_core`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HCore {
    pub prefix: FactorWord,
    pub core: FactorWord,
    pub suffix: FactorWord,
}

/// The two bundled presets.
pub fn preset_h1() -> FactorSystem {
    FactorSystem::new(&["s", "x", "y", "h"], &["s", "a"], &["s"], "x", "y", "a", "h")
        .expect("preset amalgam-h1 is valid")
}

pub fn preset_h0() -> FactorSystem {
    FactorSystem::new(&["x", "y", "h"], &["a"], &[], "x", "y", "a", "h")
        .expect("preset amalgam-h0 is valid")
}

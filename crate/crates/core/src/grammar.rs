//! Textual grammar for words.
//!
//! ```text
//! word  := item* '@H'?
//! item  := atom ('^' int)?
//! atom  := '1' | symbol | '(' item* ')'
//! ```
//!
//! Symbols are identifiers (`[A-Za-z_][A-Za-z0-9_]*`), whitespace separates
//! tokens, `^` takes an integer of either sign, and `1` is the identity.
//! Symbol exponents are arbitrary precision; exponents on parenthesized
//! groups repeat the group and are bounded to keep expansion finite. The
//! optional `@H` suffix asserts the word lies in the amalgamated subgroup.

use num_bigint::BigInt;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::amalgam::{normalize, AmalgamWord};
use crate::factors::{Factor, FactorSystem, FactorWord, Syllable};

/// Largest magnitude accepted for an exponent on a parenthesized group.
const MAX_GROUP_EXPONENT: i64 = 1_000_000;
/// Cap on the flattened syllable count of one parsed word.
const MAX_EXPANDED_SYLLABLES: usize = 10_000_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GrammarError {
    #[error("unexpected character `{0}` at byte {1}")]
    UnexpectedChar(char, usize),
    #[error("unexpected end of input")]
    UnexpectedEnd,
    #[error("unexpected token at byte {0}")]
    UnexpectedToken(usize),
    #[error("unbalanced parenthesis at byte {0}")]
    UnbalancedParen(usize),
    #[error("numeric literal `{0}` is not a valid atom (only `1` stands alone)")]
    BadNumericAtom(String),
    #[error("group exponent out of range (|e| must be ≤ {MAX_GROUP_EXPONENT})")]
    GroupExponentTooLarge,
    #[error("expanded word exceeds {MAX_EXPANDED_SYLLABLES} syllables")]
    ExpansionTooLarge,
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("symbol `{name}` is not a generator of factor {factor}")]
    ForeignSymbol { name: String, factor: Factor },
    #[error("word carries `@H` but does not lie in the amalgamated subgroup")]
    SharedTagMismatch,
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Ident(String),
    Number(BigInt),
    Caret,
    LParen,
    RParen,
    TagH,
}

fn tokenize(input: &str) -> Result<Vec<(Token, usize)>, GrammarError> {
    let mut out = Vec::new();
    let bytes: Vec<char> = input.chars().collect();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '(' {
            out.push((Token::LParen, i));
            i += 1;
        } else if c == ')' {
            out.push((Token::RParen, i));
            i += 1;
        } else if c == '^' {
            out.push((Token::Caret, i));
            i += 1;
        } else if c == '@' {
            if bytes.get(i + 1) == Some(&'H') {
                out.push((Token::TagH, i));
                i += 2;
            } else {
                return Err(GrammarError::UnexpectedChar('@', i));
            }
        } else if c.is_ascii_digit() || c == '-' {
            let start = i;
            if c == '-' {
                i += 1;
                if !bytes.get(i).is_some_and(|d| d.is_ascii_digit()) {
                    return Err(GrammarError::UnexpectedChar('-', start));
                }
            }
            while bytes.get(i).is_some_and(|d| d.is_ascii_digit()) {
                i += 1;
            }
            let text: String = bytes[start..i].iter().collect();
            let n: BigInt = text.parse().expect("digits parse as integer");
            out.push((Token::Number(n), start));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while bytes
                .get(i)
                .is_some_and(|d| d.is_ascii_alphanumeric() || *d == '_')
            {
                i += 1;
            }
            out.push((Token::Ident(bytes[start..i].iter().collect()), start));
        } else {
            return Err(GrammarError::UnexpectedChar(c, i));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: &'a [(Token, usize)],
    pos: usize,
}

/// Flat syllable stream plus whether the `@H` tag was present.
struct Parsed {
    stream: Vec<(u32, BigInt)>,
    tagged_h: bool,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(t, _)| t)
    }

    fn here(&self) -> usize {
        self.tokens.get(self.pos).map_or(usize::MAX, |(_, p)| *p)
    }

    fn advance(&mut self) -> Option<&Token> {
        let t = self.tokens.get(self.pos).map(|(t, _)| t);
        self.pos += 1;
        t
    }

    fn maybe_exponent(&mut self) -> Result<BigInt, GrammarError> {
        if self.peek() == Some(&Token::Caret) {
            self.advance();
            match self.advance() {
                Some(Token::Number(n)) => Ok(n.clone()),
                Some(_) => Err(GrammarError::UnexpectedToken(self.tokens[self.pos - 1].1)),
                None => Err(GrammarError::UnexpectedEnd),
            }
        } else {
            Ok(BigInt::one())
        }
    }

    fn parse_items(&mut self, lookup: &dyn Fn(&str) -> Option<u32>, depth: usize) -> Result<Vec<(u32, BigInt)>, GrammarError> {
        let mut out: Vec<(u32, BigInt)> = Vec::new();
        loop {
            match self.peek() {
                Some(Token::Ident(name)) => {
                    let name = name.clone();
                    self.advance();
                    let id = lookup(&name).ok_or(GrammarError::UnknownSymbol(name))?;
                    let e = self.maybe_exponent()?;
                    if !e.is_zero() {
                        out.push((id, e));
                    }
                }
                Some(Token::Number(n)) => {
                    if !n.is_one() {
                        return Err(GrammarError::BadNumericAtom(n.to_string()));
                    }
                    self.advance();
                    // 1^k is still the identity.
                    self.maybe_exponent()?;
                }
                Some(Token::LParen) => {
                    self.advance();
                    let inner = self.parse_items(lookup, depth + 1)?;
                    if self.peek() != Some(&Token::RParen) {
                        return Err(GrammarError::UnbalancedParen(self.here().min(usize::MAX - 1)));
                    }
                    self.advance();
                    let e = self.maybe_exponent()?;
                    let reps: i64 = e.clone().try_into().map_err(|_| GrammarError::GroupExponentTooLarge)?;
                    if reps.unsigned_abs() > MAX_GROUP_EXPONENT as u64 {
                        return Err(GrammarError::GroupExponentTooLarge);
                    }
                    let unit: Vec<(u32, BigInt)> = if reps < 0 {
                        inner.iter().rev().map(|(s, e)| (*s, -e)).collect()
                    } else {
                        inner
                    };
                    let total = out.len() + unit.len() * reps.unsigned_abs() as usize;
                    if total > MAX_EXPANDED_SYLLABLES {
                        return Err(GrammarError::ExpansionTooLarge);
                    }
                    for _ in 0..reps.unsigned_abs() {
                        out.extend(unit.iter().cloned());
                    }
                }
                Some(Token::RParen) => {
                    if depth == 0 {
                        return Err(GrammarError::UnbalancedParen(self.here()));
                    }
                    break;
                }
                Some(Token::TagH) => {
                    if depth > 0 {
                        return Err(GrammarError::UnexpectedToken(self.here()));
                    }
                    break;
                }
                None => break,
                Some(Token::Caret) => return Err(GrammarError::UnexpectedToken(self.here())),
            }
        }
        Ok(out)
    }
}

fn parse_stream(sys: &FactorSystem, input: &str) -> Result<Parsed, GrammarError> {
    let tokens = tokenize(input)?;
    let mut p = Parser { tokens: &tokens, pos: 0 };
    let lookup = |name: &str| sys.symbol_id(name);
    let stream = p.parse_items(&lookup, 0)?;
    let tagged_h = if p.peek() == Some(&Token::TagH) {
        p.advance();
        true
    } else {
        false
    };
    if p.peek().is_some() {
        return Err(GrammarError::UnexpectedToken(p.here()));
    }
    Ok(Parsed { stream, tagged_h })
}

/// Parse a word of a single factor group.
pub fn parse_factor_word(
    sys: &FactorSystem,
    factor: Factor,
    input: &str,
) -> Result<FactorWord, GrammarError> {
    let parsed = parse_stream(sys, input)?;
    let mut raw = Vec::with_capacity(parsed.stream.len());
    for (sym, exp) in parsed.stream {
        if !sys.alphabet_contains(factor, sym) {
            return Err(GrammarError::ForeignSymbol {
                name: sys.symbol_name(sym).to_string(),
                factor,
            });
        }
        raw.push(Syllable { sym, exp });
    }
    let w = FactorWord::new(sys, factor, raw);
    if parsed.tagged_h && !sys.in_h(&w) {
        return Err(GrammarError::SharedTagMismatch);
    }
    Ok(w)
}

/// Parse a word of the amalgam, splitting the syllable stream into factor
/// letters. Shared syllables attach to the letter on their left (a leading
/// shared run attaches to the first letter); normalization then canonicalizes
/// whatever split this produces.
pub fn parse_amalgam_word(sys: &FactorSystem, input: &str) -> Result<AmalgamWord, GrammarError> {
    let parsed = parse_stream(sys, input)?;
    let mut letters: Vec<FactorWord> = Vec::new();
    let mut current: Option<(Factor, Vec<Syllable>)> = None;
    let mut leading_shared: Vec<Syllable> = Vec::new();
    for (sym, exp) in parsed.stream {
        let syll = Syllable { sym, exp };
        if sys.is_shared(sym) {
            match current.as_mut() {
                Some((_, run)) => run.push(syll),
                None => leading_shared.push(syll),
            }
            continue;
        }
        let factor = if sys.alphabet_contains(Factor::K, sym) {
            Factor::K
        } else if sys.alphabet_contains(Factor::L, sym) {
            Factor::L
        } else {
            return Err(GrammarError::UnknownSymbol(sys.symbol_name(sym).to_string()));
        };
        match current.as_mut() {
            Some((f, run)) if *f == factor => run.push(syll),
            Some((f, run)) => {
                letters.push(FactorWord::new(sys, *f, std::mem::take(run)));
                *f = factor;
                run.push(syll);
            }
            None => {
                let mut run = std::mem::take(&mut leading_shared);
                run.push(syll);
                current = Some((factor, run));
            }
        }
    }
    if let Some((f, run)) = current {
        letters.push(FactorWord::new(sys, f, run));
    } else if !leading_shared.is_empty() {
        letters.push(FactorWord::new(sys, Factor::K, leading_shared));
    }
    let w = normalize(sys, letters);
    if parsed.tagged_h && !(w.is_identity() || (w.len() == 1 && sys.in_h(&w.letters()[0]))) {
        return Err(GrammarError::SharedTagMismatch);
    }
    Ok(w)
}

fn push_syllable(out: &mut String, sys: &FactorSystem, s: &Syllable) {
    if !out.is_empty() {
        out.push(' ');
    }
    out.push_str(sys.symbol_name(s.sym));
    if !s.exp.is_one() {
        out.push('^');
        out.push_str(&s.exp.to_string());
    }
}

impl FactorWord {
    /// Canonical textual form; shared-only words carry the `@H` tag.
    pub fn display(&self, sys: &FactorSystem) -> String {
        if self.is_identity() {
            return "1".to_string();
        }
        let mut out = String::new();
        for s in self.syllables() {
            push_syllable(&mut out, sys, s);
        }
        if sys.in_h(self) {
            out.push_str(" @H");
        }
        out
    }
}

impl AmalgamWord {
    /// Canonical textual form: letters flattened to one syllable stream.
    pub fn display(&self, sys: &FactorSystem) -> String {
        if self.is_identity() {
            return "1".to_string();
        }
        let mut out = String::new();
        for letter in self.letters() {
            for s in letter.syllables() {
                push_syllable(&mut out, sys, s);
            }
        }
        if self.len() == 1 && sys.in_h(&self.letters()[0]) {
            out.push_str(" @H");
        }
        out
    }
}

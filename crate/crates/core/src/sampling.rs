//! Seeded random generation of words, conjugates, and interleaving moves.
//!
//! Every sampler draws from a ChaCha8 stream keyed by an explicit seed, so
//! any failure in a randomized suite replays exactly from its seed.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::amalgam::{normalize, AmalgamWord};
use crate::factors::{Factor, FactorSystem, FactorWord, Syllable};

/// Deterministic source of random words over a factor system.
pub struct SeededSampler {
    rng: ChaCha8Rng,
}

impl SeededSampler {
    pub fn new(seed: u64) -> SeededSampler {
        SeededSampler { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Direct access for callers that need raw randomness with the same
    /// replayable stream.
    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    fn signed_exp(&mut self, max_mag: usize) -> i64 {
        let mag = self.rng.gen_range(1..=max_mag.max(1)) as i64;
        if self.rng.gen_bool(0.5) {
            mag
        } else {
            -mag
        }
    }

    /// Random freely reduced word of the factor with total syllable weight
    /// exactly `weight` (identity when `weight` is 0).
    pub fn factor_word(&mut self, sys: &FactorSystem, factor: Factor, weight: usize) -> FactorWord {
        let alphabet = sys.alphabet(factor).to_vec();
        let mut syls: Vec<Syllable> = Vec::new();
        let mut remaining = weight;
        while remaining > 0 {
            let sym = loop {
                let s = alphabet[self.rng.gen_range(0..alphabet.len())];
                if Some(s) != syls.last().map(|p| p.sym) {
                    break s;
                }
            };
            let mag = self.rng.gen_range(1..=remaining);
            let exp = if self.rng.gen_bool(0.5) { mag as i64 } else { -(mag as i64) };
            syls.push(Syllable::new(sym, exp));
            remaining -= mag;
        }
        FactorWord::new(sys, factor, syls)
    }

    /// Random word of the shared subgroup with weight between 1 and
    /// `max_weight`; identity when the system has no shared symbols.
    pub fn shared_word(&mut self, sys: &FactorSystem, factor: Factor, max_weight: usize) -> FactorWord {
        let shared = sys.shared_symbols();
        if shared.is_empty() || max_weight == 0 {
            return FactorWord::identity(factor);
        }
        let mut syls = Vec::new();
        let mut remaining = self.rng.gen_range(1..=max_weight);
        while remaining > 0 {
            let sym = shared[self.rng.gen_range(0..shared.len())];
            if Some(sym) == syls.last().map(|p: &Syllable| p.sym) {
                break; // a free shared subgroup of rank 1 has nothing new to add
            }
            let mag = self.rng.gen_range(1..=remaining);
            syls.push(Syllable::new(sym, self.signed_exp(mag).signum() * mag as i64));
            remaining -= mag;
        }
        FactorWord::new(sys, factor, syls)
    }

    /// Random single letter of the factor that lies outside the shared
    /// subgroup, optionally decorated with shared syllables on either side.
    pub fn letter(&mut self, sys: &FactorSystem, factor: Factor) -> FactorWord {
        let core_syms: Vec<u32> = sys
            .alphabet(factor)
            .iter()
            .copied()
            .filter(|&s| !sys.is_shared(s))
            .collect();
        assert!(!core_syms.is_empty(), "factor has no non-shared generators");
        let sym = core_syms[self.rng.gen_range(0..core_syms.len())];
        let core = FactorWord::generator(sys, factor, sym, self.signed_exp(3));
        let mut letter = core;
        if self.rng.gen_bool(0.5) {
            letter = self.shared_word(sys, factor, 2).mul(sys, &letter);
        }
        if self.rng.gen_bool(0.5) {
            letter = letter.mul(sys, &self.shared_word(sys, factor, 2));
        }
        letter
    }

    /// Random normal-form word of exactly `len` letters (alternating
    /// factors, none shared).
    pub fn amalgam_word(&mut self, sys: &FactorSystem, len: usize) -> AmalgamWord {
        let mut factor = if self.rng.gen_bool(0.5) { Factor::K } else { Factor::L };
        let mut letters = Vec::with_capacity(len);
        for _ in 0..len {
            letters.push(self.letter(sys, factor));
            factor = factor.other();
        }
        let w = normalize(sys, letters);
        debug_assert_eq!(w.len(), len);
        w
    }

    /// Random product of `1..=max_factors` conjugates `u·r^{±1}·u⁻¹` of the
    /// given relators, with conjugator lengths up to `conj_len`.
    pub fn relator_product(
        &mut self,
        sys: &FactorSystem,
        relators: &[AmalgamWord],
        max_factors: usize,
        conj_len: usize,
    ) -> AmalgamWord {
        assert!(!relators.is_empty());
        let count = self.rng.gen_range(1..=max_factors.max(1));
        let mut letters = Vec::new();
        for _ in 0..count {
            let r = &relators[self.rng.gen_range(0..relators.len())];
            let r = if self.rng.gen_bool(0.5) { r.clone() } else { r.inverse(sys) };
            let u_len = self.rng.gen_range(0..=conj_len);
            let u = self.amalgam_word(sys, u_len);
            letters.extend_from_slice(u.letters());
            letters.extend_from_slice(r.letters());
            letters.extend_from_slice(u.inverse(sys).letters());
        }
        normalize(sys, letters)
    }

    /// Apply one random interleaving move to a letter sequence: splice a
    /// shared word `h` in at a junction, multiplying one letter by `h` on
    /// the right and the next by `h⁻¹` on the left. The represented group
    /// element is unchanged by construction.
    pub fn perturb_interleaving(
        &mut self,
        sys: &FactorSystem,
        letters: &[FactorWord],
    ) -> Vec<FactorWord> {
        let mut out = letters.to_vec();
        if out.len() < 2 || sys.shared_symbols().is_empty() {
            return out;
        }
        let t = self.rng.gen_range(1..out.len());
        let factor_left = out[t - 1].factor();
        let h_left = self.shared_word(sys, factor_left, 3);
        let h_right = h_left.with_factor(sys, out[t].factor());
        out[t - 1] = out[t - 1].mul(sys, &h_left);
        out[t] = h_right.inverse().mul(sys, &out[t]);
        out
    }
}

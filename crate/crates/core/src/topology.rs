//! The inductive one-relator step and the descending normal-subgroup chain
//! that yields a neighborhood base.
//!
//! One step of the construction takes the current factor system and a
//! designated element `hₙ` of the first factor, installs `h := hₙ⁻¹·x` as
//! the relator head (re-validating every hypothesis the relator machinery
//! needs), and instantiates the seed relator. Bounded verification then
//! checks, at a configurable radius, that the quotient by the relator's
//! normal closure embeds both factors, keeps their intersection equal to
//! the shared subgroup, and leaves the first factor malnormal.
//!
//! The chain construction enumerates nonidentity group elements g₁, g₂, …
//! in a fixed graded order, picks strictly increasing stage indices k(n)
//! with `|r_{k(n)}| > 2·|gₙ|`, and takes Nₙ to be the normal closure of
//! all stages from k(n) on. Every certificate is finite: a membership
//! query against the closure of an infinite tail only ever needs the
//! stages short enough to contribute an above-half fragment to words no
//! longer than the query, so each level works with the tail truncated by a
//! length bound — an empty truncation certifies vacuously, because every
//! element of the tail's closure is at least half as long as its shortest
//! relator, and the query word is shorter than that.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::amalgam::AmalgamWord;
use crate::cancellation::{ratio_string, Lambda, PieceReport, SymmetrizedSet, SymmetrizeError};
use crate::dehn::{BallReport, Solver, SolverError, Verdict};
use crate::enumerate::amalgam_elements;
use crate::factors::{Factor, FactorSystem, FactorWord, SystemError};
use crate::relators::{build_r0, build_rn, rn_length};
use crate::sampling::SeededSampler;

// ---------------------------------------------------------------------------
// The one-relator inductive step.
// ---------------------------------------------------------------------------

/// A validated instance of the one-relator quotient step.
#[derive(Debug, Clone)]
pub struct StepPresentation {
    /// The factor system with this step's relator head installed as `h`.
    pub system: FactorSystem,
    /// The installed head `hₙ⁻¹·x`.
    pub h_elem: FactorWord,
    pub cap: usize,
    /// The instantiated seed relator.
    pub relator: AmalgamWord,
}

#[derive(Debug, Error)]
pub enum StepError {
    #[error("cap {0} is too small: the relator family needs cap ≥ 2")]
    CapTooSmall(usize),
    #[error("hypothesis failed: {0}")]
    HypothesisFailed(#[from] SystemError),
}

/// Install `h := hₙ⁻¹·x` and instantiate the seed relator, re-validating
/// every hypothesis of the underlying system.
pub fn assemble_step(
    sys: &FactorSystem,
    h_n: &FactorWord,
    cap: usize,
) -> Result<StepPresentation, StepError> {
    if cap < 2 {
        return Err(StepError::CapTooSmall(cap));
    }
    let h = h_n.inverse().mul(sys, &sys.x);
    let system = sys.with_h(h.clone())?;
    let relator = build_r0(&system, cap);
    Ok(StepPresentation { system, h_elem: h, cap, relator })
}

impl StepPresentation {
    /// Package the system's own designated relator head as a step, for runs
    /// that certify the chain in the ambient presentation. A head that
    /// collapses into another relator letter (for example `h = x`, which a
    /// trivial step head would install) makes the seed relator coincide
    /// with the first chain stage and the descent degenerate, so chain
    /// construction wants the system's distinct designated head.
    pub fn from_system(sys: &FactorSystem, cap: usize) -> Result<StepPresentation, StepError> {
        if cap < 2 {
            return Err(StepError::CapTooSmall(cap));
        }
        sys.validate()?;
        let system = sys.clone();
        let relator = build_r0(&system, cap);
        Ok(StepPresentation { h_elem: system.h.clone(), relator, system, cap })
    }
}

// ---------------------------------------------------------------------------
// Bounded verification of the step's quotient.
// ---------------------------------------------------------------------------

/// Report of the bounded quotient checks for one step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepReport {
    pub schema: u32,
    pub cap: usize,
    pub radius: usize,
    pub lambda: String,
    /// The small-cancellation certificate of the relator set.
    pub certificate: PieceReport,
    /// Factor words up to the radius stay outside the normal closure.
    pub embedding: BallReport,
    /// Pairs `(u, v)` of factor-ball words with `u·v⁻¹` outside the
    /// closure unless both lie in the shared subgroup.
    pub intersection_pairs_checked: usize,
    pub intersection_ok: bool,
    /// Sampled words `u` outside the first factor (verified against the
    /// factor ball) with `u⁻¹·g·u·g′⁻¹` outside the closure for all
    /// nonidentity `g, g′` in the weight-1 factor ball.
    pub malnormality_samples: usize,
    pub malnormality_ok: bool,
    pub relator_length: usize,
    /// The power-of-a-set exponent the construction must stay under.
    pub length_bound: usize,
    pub length_bound_ok: bool,
}

impl StepReport {
    pub fn all_ok(&self) -> bool {
        self.embedding.all_nontrivial
            && self.intersection_ok
            && self.malnormality_ok
            && self.length_bound_ok
    }
}

/// The exponent bound the ambient argument imposes on the relator length.
pub const LENGTH_BOUND: usize = 10_000;

/// Run the bounded quotient checks for a step: factor embedding up to
/// `radius`, factor intersection up to `radius`, and sampled malnormality
/// of the first factor.
pub fn verify_step(
    step: &StepPresentation,
    radius: usize,
    lambda: Lambda,
) -> Result<StepReport, TopologyError> {
    let sys = &step.system;
    let set = SymmetrizedSet::symmetrize(sys, &[step.relator.clone()])?;
    let solver = Solver::new(sys, set, lambda)?;

    let embedding = solver.ball_injectivity(radius);

    let k_ball = crate::enumerate::factor_ball(sys, Factor::K, radius);
    let l_ball = crate::enumerate::factor_ball(sys, Factor::L, radius);
    let pairs: Vec<(&FactorWord, &FactorWord)> = k_ball
        .iter()
        .flat_map(|u| l_ball.iter().map(move |v| (u, v)))
        .filter(|(u, v)| !(sys.in_h(u) && sys.in_h(v)))
        .collect();
    let intersection_ok = pairs
        .par_iter()
        .all(|(u, v)| {
            let w = crate::amalgam::normalize(sys, vec![(*u).clone(), v.inverse()]);
            !solver.membership(&w).is_trivial()
        });

    // Malnormality, sampled: u must stay outside K modulo the closure
    // (checked against the whole K-ball), and conjugation by u must move
    // every nonidentity ball element off the factor.
    let mut sampler = SeededSampler::new(0x106);
    let samples: Vec<AmalgamWord> = (0..8)
        .map(|_| {
            let len = sampler.rng().gen_range(2..=radius.max(2));
            sampler.amalgam_word(sys, len)
        })
        .collect();
    let small_ball = crate::enumerate::factor_ball(sys, Factor::K, 1);
    let malnormality_ok = samples.par_iter().all(|u| {
        let u_inv = u.inverse(sys);
        let outside_k = k_ball.iter().all(|k| {
            let w = crate::amalgam::normalize(
                sys,
                u.letters()
                    .iter()
                    .cloned()
                    .chain(std::iter::once(k.inverse()))
                    .collect(),
            );
            !solver.membership(&w).is_trivial()
        });
        outside_k
            && small_ball.iter().all(|g| {
                small_ball.iter().all(|g2| {
                    let w = crate::amalgam::normalize(
                        sys,
                        u_inv
                            .letters()
                            .iter()
                            .cloned()
                            .chain(std::iter::once(g.clone()))
                            .chain(u.letters().iter().cloned())
                            .chain(std::iter::once(g2.inverse()))
                            .collect(),
                    );
                    !solver.membership(&w).is_trivial()
                })
            })
    });

    Ok(StepReport {
        schema: 1,
        cap: step.cap,
        radius,
        lambda: ratio_string(lambda),
        certificate: solver.certificate().clone(),
        embedding,
        intersection_pairs_checked: pairs.len(),
        intersection_ok,
        malnormality_samples: samples.len(),
        malnormality_ok,
        relator_length: step.relator.len(),
        length_bound: LENGTH_BOUND,
        length_bound_ok: step.relator.len() < LENGTH_BOUND,
    })
}

// ---------------------------------------------------------------------------
// The descending chain.
// ---------------------------------------------------------------------------

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("stage {stage} needs a relator of {needed} letters, over the budget {budget}")]
    CountTooLarge { stage: usize, needed: usize, budget: usize },
    #[error(transparent)]
    Uncertified(#[from] SolverError),
    #[error(transparent)]
    Symmetrize(#[from] SymmetrizeError),
}

/// One membership check against a truncated tail of the relator family.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelCheck {
    /// Stages short enough to matter for this query after truncation.
    pub truncated_stages: Vec<usize>,
    /// No stage was short enough: the verdict holds by the length floor
    /// (every element of the tail's closure is at least half as long as
    /// the tail's shortest relator).
    pub vacuous: bool,
    pub verdict_nontrivial: bool,
    pub max_fragment_ratio: String,
}

/// Certificates for the strict descent at one level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescentCertificate {
    /// Stages of the comparison set: the seed relator plus the truncated
    /// next-level tail.
    pub set_stages: Vec<usize>,
    /// Joint small-cancellation certificate of that set.
    pub certificate: PieceReport,
    /// `r_{k(n)}` stays outside the next level's closure.
    pub verdict_nontrivial: bool,
    pub max_fragment_ratio: String,
    /// Sanity: `r_{k(n)}` dies under its own level's truncated tail.
    pub trivial_at_own_level: bool,
}

/// Everything certified about one level of the chain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelCertificate {
    pub n: usize,
    pub element: String,
    pub element_length: usize,
    pub k: usize,
    pub relator_length: usize,
    /// `|r_{k(n)}| > 2·|gₙ|` — the selection rule's guarantee, rechecked.
    pub length_rule_ok: bool,
    /// `gₙ` outside its level's closure.
    pub own_level: LevelCheck,
    /// Strict descent to the next level, absent only at the last level.
    pub descent: Option<DescentCertificate>,
}

/// The materialized neighborhood base: elements, stage indices, and all
/// level certificates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopologyBase {
    pub schema: u32,
    pub cap: usize,
    pub count: usize,
    pub lambda: String,
    pub elements: Vec<String>,
    pub ks: Vec<usize>,
    pub levels: Vec<LevelCertificate>,
}

impl TopologyBase {
    /// All certificates hold: every element avoids its level, every length
    /// rule holds, and every descent verdict is strict.
    pub fn all_ok(&self) -> bool {
        self.ks.windows(2).all(|w| w[0] < w[1])
            && self.levels.iter().all(|lvl| {
                lvl.length_rule_ok
                    && lvl.own_level.verdict_nontrivial
                    && lvl.descent.as_ref().is_none_or(|d| {
                        d.verdict_nontrivial && d.certificate.certified && d.trivial_at_own_level
                    })
            })
    }
}

/// Stages `k ≥ from` whose relators are at most `length_cap` letters long.
fn truncated_tail(cap: usize, from: usize, length_cap: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut k = from;
    while rn_length(cap, k) <= length_cap {
        out.push(k);
        k += 1;
    }
    out
}

fn tail_query(
    step: &StepPresentation,
    stages: &[usize],
    include_seed: bool,
    word: &AmalgamWord,
    lambda: Lambda,
) -> Result<(LevelCheck, Option<PieceReport>), TopologyError> {
    let sys = &step.system;
    if stages.is_empty() && !include_seed {
        return Ok((
            LevelCheck {
                truncated_stages: Vec::new(),
                vacuous: true,
                verdict_nontrivial: true,
                max_fragment_ratio: "0/1".to_string(),
            },
            None,
        ));
    }
    let mut relators = Vec::new();
    if include_seed {
        relators.push(step.relator.clone());
    }
    for &k in stages {
        relators.push(build_rn(sys, step.cap, k));
    }
    let set = SymmetrizedSet::symmetrize(sys, &relators)?;
    let solver = Solver::new(sys, set, lambda)?;
    let verdict = solver.membership(word);
    let (nontrivial, ratio) = match &verdict {
        Verdict::Trivial(_) => (false, "1/1".to_string()),
        Verdict::Nontrivial(report) => (true, report.max_fragment_ratio.clone()),
    };
    Ok((
        LevelCheck {
            truncated_stages: stages.to_vec(),
            vacuous: false,
            verdict_nontrivial: nontrivial,
            max_fragment_ratio: ratio,
        },
        Some(solver.certificate().clone()),
    ))
}

/// Build the descending chain at desk scale: enumerate `count` elements,
/// select the stage indices by the length rule, and certify every level.
pub fn build_topology_base(
    step: &StepPresentation,
    count: usize,
    lambda: Lambda,
    budget: usize,
) -> Result<TopologyBase, TopologyError> {
    let sys = &step.system;
    let cap = step.cap;
    let elements = amalgam_elements(sys, count);

    // k(n): minimal strictly increasing with |r_{k(n)}| > 2·|gₙ|.
    let mut ks = Vec::with_capacity(count);
    let mut next_k = 1usize;
    for g in &elements {
        let mut k = next_k;
        while rn_length(cap, k) <= 2 * g.len() {
            k += 1;
        }
        if rn_length(cap, k) > budget {
            return Err(TopologyError::CountTooLarge {
                stage: k,
                needed: rn_length(cap, k),
                budget,
            });
        }
        ks.push(k);
        next_k = k + 1;
    }

    let levels: Vec<Result<LevelCertificate, TopologyError>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let n = i + 1;
            let g = &elements[i];
            let k = ks[i];
            let r_len = rn_length(cap, k);

            // gₙ against its own level's tail {r_j : j ≥ k(n)}.
            let own_stages = truncated_tail(cap, k, 2 * g.len());
            let (own_level, _) = tail_query(step, &own_stages, false, g, lambda)?;

            // Strict descent: r_{k(n)} against the seed plus the next
            // level's tail, and (sanity) against its own tail.
            let descent = if i + 1 < count {
                let r_kn = build_rn(sys, cap, k);
                let next_stages = truncated_tail(cap, ks[i + 1], 2 * r_len);
                let (next_check, certificate) =
                    tail_query(step, &next_stages, true, &r_kn, lambda)?;
                let own_tail = truncated_tail(cap, k, 2 * r_len);
                let (own_check, _) = tail_query(step, &own_tail, false, &r_kn, lambda)?;
                let mut set_stages = vec![0];
                set_stages.extend_from_slice(&next_stages);
                Some(DescentCertificate {
                    set_stages,
                    certificate: certificate.expect("seed relator always present"),
                    verdict_nontrivial: next_check.verdict_nontrivial,
                    max_fragment_ratio: next_check.max_fragment_ratio,
                    trivial_at_own_level: !own_check.verdict_nontrivial,
                })
            } else {
                None
            };

            Ok(LevelCertificate {
                n,
                element: g.display(sys),
                element_length: g.len(),
                k,
                relator_length: r_len,
                length_rule_ok: r_len > 2 * g.len(),
                own_level,
                descent,
            })
        })
        .collect();

    let levels = levels.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(TopologyBase {
        schema: 1,
        cap,
        count,
        lambda: ratio_string(lambda),
        elements: elements.iter().map(|g| g.display(sys)).collect(),
        ks,
        levels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cancellation::parse_ratio;
    use crate::factors::{preset_h1, Factor};
    use crate::grammar::parse_factor_word;

    #[test]
    fn step_with_identity_head_installs_x() {
        let sys = preset_h1();
        let id = FactorWord::identity(Factor::K);
        let step = assemble_step(&sys, &id, 3).expect("accepted");
        assert_eq!(step.h_elem, sys.x);
        assert_eq!(step.relator.len(), 18);
        // The relator now opens with x instead of h.
        assert_eq!(step.relator.letters()[0], sys.x);
    }

    #[test]
    fn step_rejects_heads_that_collapse_into_the_shared_subgroup() {
        let sys = preset_h1();
        // hₙ = x gives h = x⁻¹·x = 1 ∈ H.
        let err = assemble_step(&sys, &sys.x.clone(), 3).unwrap_err();
        assert!(matches!(err, StepError::HypothesisFailed(_)), "got {err}");
        // cap 1 is rejected before any group computation.
        let id = FactorWord::identity(Factor::K);
        assert!(matches!(assemble_step(&sys, &id, 1), Err(StepError::CapTooSmall(1))));
    }

    #[test]
    fn step_accepts_mixed_heads_with_nontrivial_core() {
        let sys = preset_h1();
        let h_n = parse_factor_word(&sys, Factor::K, "s x^-1").expect("parse");
        let step = assemble_step(&sys, &h_n, 2).expect("accepted");
        // h = (s·x⁻¹)⁻¹·x = x·s⁻¹·x stays outside the shared subgroup.
        assert!(!step.system.in_h(&step.h_elem));
        assert_eq!(step.h_elem, parse_factor_word(&sys, Factor::K, "x s^-1 x").expect("parse"));
    }

    #[test]
    fn bounded_step_verification_passes_at_small_scale() {
        let sys = preset_h1();
        let id = FactorWord::identity(Factor::K);
        let step = assemble_step(&sys, &id, 4).expect("accepted");
        let report =
            verify_step(&step, 2, parse_ratio("1/2").expect("ratio")).expect("certified");
        assert!(report.all_ok(), "{report:?}");
        assert!(report.embedding.all_nontrivial);
        assert!(report.intersection_ok);
        assert!(report.malnormality_ok);
        assert_eq!(report.relator_length, 28);
        assert!(report.length_bound_ok);
    }

    #[test]
    fn chain_certifies_at_miniature_scale() {
        // cap 38 is the smallest cap at which every level set of the chain
        // satisfies the 1/10 bound: a seed relator shares the window
        // `a (ya)^{cap−1} x a (ya)^cap` — 4·cap+1 letters — with any longer
        // stage, and (4·cap+1)/(cap²+3·cap) first drops below 1/10 at 38.
        // Count 3 keeps the stages small enough for a fast test.
        let sys = preset_h1();
        let step = StepPresentation::from_system(&sys, 38).expect("accepted");
        let base = build_topology_base(&step, 3, parse_ratio("1/10").expect("ratio"), 100_000)
            .expect("chain");
        assert_eq!(base.ks, vec![1, 2, 3]);
        assert_eq!(base.elements.len(), 3);
        assert_eq!(base.elements[0], "s @H");
        assert!(base.all_ok(), "{base:?}");
        // Single-letter elements certify vacuously: no stage is short
        // enough to reach them.
        assert!(base.levels[0].own_level.vacuous);
        // The first level's comparison set is the seed alone; the second
        // mixes the seed with a tail stage and carries the 4·cap+1 window.
        let d1 = base.levels[0].descent.as_ref().expect("descent at level 1");
        assert_eq!(d1.set_stages, vec![0]);
        assert!(d1.certificate.certified);
        assert!(d1.verdict_nontrivial);
        assert!(d1.trivial_at_own_level);
        let d2 = base.levels[1].descent.as_ref().expect("descent at level 2");
        assert_eq!(d2.set_stages, vec![0, 3]);
        // Longest piece: the tail stage's own marker window, 4·(3·38)−3.
        // Worst ratio: the 4·38+1 = 153 mixed window against the 1558-letter
        // seed — the certification's binding pair.
        assert_eq!(d2.certificate.max_piece_length, 4 * 3 * 38 - 3);
        assert_eq!(d2.certificate.achieved_lambda, "153/1558");
        assert!(d2.certificate.certified);
    }

    #[test]
    fn chain_pins_the_minimal_certifying_cap() {
        // One cap lower, the mixed-set window 4·37+1 = 149 against the
        // 1480-letter seed violates 1/10, and the chain reports it.
        let sys = preset_h1();
        let step = StepPresentation::from_system(&sys, 37).expect("accepted");
        let err = build_topology_base(&step, 3, parse_ratio("1/10").expect("ratio"), 100_000)
            .unwrap_err();
        match err {
            TopologyError::Uncertified(SolverError::UncertifiedSet { report }) => {
                assert_eq!(report.max_piece_length, 4 * 3 * 37 - 3);
                assert_eq!(report.achieved_lambda, "149/1480");
            }
            other => panic!("expected an uncertified-set error, got {other}"),
        }
    }

    #[test]
    fn budget_overflow_is_reported() {
        let sys = preset_h1();
        let step = StepPresentation::from_system(&sys, 37).expect("accepted");
        let err = build_topology_base(&step, 3, parse_ratio("1/10").expect("ratio"), 2_000)
            .unwrap_err();
        assert!(matches!(err, TopologyError::CountTooLarge { .. }), "got {err}");
    }

    #[test]
    fn uncertifiable_caps_surface_the_violation() {
        let sys = preset_h1();
        let step = StepPresentation::from_system(&sys, 8).expect("accepted");
        let err = build_topology_base(&step, 2, parse_ratio("1/10").expect("ratio"), 100_000)
            .unwrap_err();
        match err {
            TopologyError::Uncertified(SolverError::UncertifiedSet { report }) => {
                assert!(!report.certified);
            }
            other => panic!("expected an uncertified-set error, got {other}"),
        }
    }
}

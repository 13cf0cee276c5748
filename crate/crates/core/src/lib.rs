//! Computational engine for free products with amalgamation over a shared
//! free factor: canonical normal forms, symmetrized relator sets with piece
//! analysis and small-cancellation certification, a Greendlinger-style
//! word-problem solver with replayable traces, and the descending relator
//! chains used to build neighborhood bases.

pub mod amalgam;
pub mod cancellation;
pub mod dehn;
pub mod enumerate;
pub mod factors;
pub mod grammar;
pub mod relators;
pub mod sampling;
pub mod topology;

pub use amalgam::{
    compose, cyclically_reduce, interleave_equal, interleave_witness, normalize, AmalgamWord,
    Boundary, CyclicWord,
};
pub use cancellation::{
    check_c_prime, compute_pieces, fuzzy_prefix_len, joint_family_check, parse_ratio,
    ratio_string, CPrimeOutcome, Lambda, MemberRef, PieceReport, SymmetrizedSet,
};
pub use dehn::{replay, BallReport, Solver, SolverError, Strategy, Trace, Verdict};
pub use enumerate::{amalgam_elements, factor_ball};
pub use factors::{preset_h0, preset_h1, Factor, FactorSystem, FactorWord, Syllable};
pub use grammar::{parse_amalgam_word, parse_factor_word};
pub use relators::{build_r0, build_rn, r0_length, rn_length};
pub use sampling::SeededSampler;
pub use topology::{
    assemble_step, build_topology_base, verify_step, LevelCertificate, StepError,
    StepPresentation, StepReport, TopologyBase, TopologyError,
};

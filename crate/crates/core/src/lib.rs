//! Desk-scale toolkit for coarse-geometry dimension experiments.
//!
//! The crate is organized around five pieces:
//!
//! * [`metric`] — finite metric spaces (explicit tables, grids, Cayley
//!   balls, trees), the log-remetrization `d -> ln(1 + d)`, and basic
//!   structural predicates (metric axioms, M-connectedness, isometry).
//! * [`scale`] — a small symbolic calculus of scale functions on the
//!   positive reals with subpower/sublinear classification and the two
//!   `psi` constructions that move test functions across the
//!   remetrization.
//! * [`cover`] — cover families, the bounded/disjoint predicates, and
//!   exact/greedy solvers for the least number of families at a scale
//!   pair.
//! * [`transform`] — the two constructive witness transformations between
//!   power-bound and linear-bound cover data, with an auditable
//!   inequality chain.
//! * [`higson`] — finite-window estimation of oscillation decay for
//!   bounded functions, the membership batteries, and the cross-check
//!   tying the base space to its remetrization.

pub mod cover;
pub mod higson;
pub mod metric;
pub mod scale;
pub mod textio;
pub mod transform;

pub use cover::{
    dimension_profile, interval_witness_z, is_d_bounded, is_r_disjoint, min_families_exact,
    min_families_greedy, piece_diam, validate, BoundKind, Budgets, CoverError, CoverFamilySet,
    Piece, ScaleVerdict, SolveMethod, ValidationReport,
};
pub use higson::{
    decay_verdict, higson_profile, local_oscillation, membership_estimate, theorem_crosscheck,
    DecayConfig, DecayVerdict, HigsonError, HigsonProfile, MembershipReport, ObservedFunction,
};
pub use metric::{
    AxiomViolation, GeneratorTag, GridNorm, GroupKind, MetricError, MetricSpace, PointId,
    PointMap, PointedSpace, DEFAULT_POINT_BUDGET, DIST_TOL,
};
pub use scale::{
    classify, numeric_check, psi_backward, psi_forward, Classification, GrowthMode, ScaleError,
    ScaleFunction, Verdict,
};
pub use transform::{
    nagata_to_power, power_to_nagata, proof_chain_check, ChainReport, FamilyGenerator,
    LinkReport, NagataWitness, PowerWitness, TransformError,
};

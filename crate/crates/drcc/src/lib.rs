//! Certified inner approximations of distributionally robust
//! chance-constrained feasible sets.
//!
//! Given a decision box X, a noise variable ω, and an ambiguity set of all
//! mixtures of a parametrized distribution family (μ_a)_{a∈A}, the library
//! assembles a hierarchy of moment-SDP relaxations whose dual solutions are
//! polynomials w_d with w_d(x) ≥ max_{a∈A} Prob_{μ_a}(f(x,ω) ≤ 0) on X.
//! The sublevel set {x ∈ X : w_d(x) < ε} is then a certified inner
//! approximation of the feasible set of the chance constraint
//! Prob(f(x,ω) > 0) > 1 − ε, robust over the whole ambiguity set.
//!
//! Modules:
//! - [`poly`]: sparse polynomials over the (x, ω, a) blocks;
//! - [`sets`]: basic semialgebraic set descriptions and ball augmentation;
//! - [`family`]: distribution families with polynomial moment maps;
//! - [`relax`]: assembly of the base / Stokes / joint / moment-box SDPs;
//! - [`sdp`]: the interior-point backend and certificate extraction;
//! - [`oracle`]: worst-case-probability ground truth and comparisons;
//! - [`config`]: JSON problem configs;
//! - [`manifest`]: reproducible run manifests.

extern crate blas_src;
extern crate openblas_src;

pub mod config;
pub mod family;
pub mod manifest;
pub mod oracle;
pub mod poly;
pub mod problem;
pub mod relax;
pub mod sdp;
pub mod sets;
pub mod special;

pub use family::{DistributionFamily, FamilyKind, NoiseSample};
pub use poly::{enumerate_monomials, stokes_polynomial, Block, Monomial, Polynomial, VariableSpace};
pub use problem::{AffineMap, MomentBoxAmbiguity, ProblemSpec, StokesCaps, Variant};
pub use relax::{
    build_base, build_joint, build_moment_box, build_stokes, build_union, lebesgue_box_moments,
    LebesgueMoments, MomentRelaxation,
};
pub use sdp::{
    certify_pointwise, extract_inner, solve, InnerApproximation, SolveResult, SolveStatus,
    SolverSettings,
};
pub use sets::{augment_ball, ConstraintRegion, SemialgebraicSet};

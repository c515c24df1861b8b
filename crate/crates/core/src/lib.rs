//! Numerical laboratory for the constructive side of group-closure analysis.
//!
//! The crate is organised around a handful of small, composable subsystems:
//!
//! * [`jet`] — truncated polynomial jets of self-maps and vector fields,
//!   with composition, inversion, Lie brackets and grid-sup `C^r` norms;
//! * [`mobius`] / [`sphere`] — the Möbius group acting on the Riemann
//!   sphere, fixed-point classification, and a fixed icosphere mesh used
//!   for displacement estimates;
//! * [`tower`] — iterated-commutator towers over a generating set and the
//!   pseudo-solvability verdict, plus orbit accumulation diagnostics;
//! * [`closure`] — renormalization of near-identity maps by a diagonal
//!   contraction, extraction of limit difference fields, and polygonal
//!   (Euler) flow comparison;
//! * [`grading`] — multiplier ladders of vector monomials under a diagonal
//!   contraction and the graded bracket law;
//! * [`measure`] — empirical measures on the sphere and on boxes:
//!   quasi-volume constants, local dimension, translation discrepancy and
//!   rectifying maps;
//! * [`rigidity`] — synchronized flow pairs, conjugacy residuals, flow
//!   charts and Möbius recovery from point correspondences.
//!
//! Everything is deterministic: random inputs are drawn from seeded
//! counter-based generators, and all parallel reductions are performed in a
//! fixed order so results are bitwise independent of the thread count.

pub mod closure;
pub mod domain;
pub mod grading;
pub mod jet;
pub mod measure;
pub mod mobius;
pub mod pal;
pub mod rigidity;
pub mod rng;
pub mod sphere;
pub mod stats;
pub mod tower;

pub use domain::BoxDomain;

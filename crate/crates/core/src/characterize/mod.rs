//! Systems whose first and fifth invariants vanish: construction from
//! `(Γ, S, h)`, the linear constraints on `S`, and pointwise extraction.

mod extract;
mod fields;
mod nullspace;

pub use extract::{extract_structure, ExtractedStructure, QuadraticDecomposition, StructureDiagnostics};
pub use fields::{build_characterized_system, CharacterizedSystem, GammaField, SField, STAR_TOLERANCE};
pub use nullspace::{star_star_nullspace, NullSpace, StarStarOperator, RANK_CUTOFF};

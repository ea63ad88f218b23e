//! Invariant-subspace structure theory over finite von Neumann algebras.
//!
//! The ambient algebra is a direct sum of complex matrix blocks with a
//! faithful tracial state, viewed as the Hilbert space `L²(M)` under
//! `⟨x, y⟩ = τ(y* x)`.  Over a maximal subdiagonal subalgebra the crate
//! decomposes right invariant subspaces into their type 1 / type 2 column
//! sum, extracts the partial isometries generating the type 1 part from the
//! wandering subspace, and produces inner-outer factorizations of algebra
//! elements.

pub mod algebra;
pub mod beurling;
pub mod error;
pub mod factorization;
pub mod subspace;
pub mod tracial;

pub use algebra::{AlgebraElement, FinVNAlgebra, LpIndex, C64};
pub use beurling::{TypeDecomposition, TypeLabel};
pub use error::{Error, Result};
pub use factorization::{FactorizationKind, InnerOuterFactorization};
pub use subspace::{Subspace, WanderingData};
pub use tracial::{NestSpec, TracialSubalgebra};

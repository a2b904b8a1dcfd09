//! Rewriting toolkit for 2-polygraphs and linear (2,1)-polygraphs:
//! normal forms, critical branchings, Karoubi envelopes, coherence lifting
//! and Grothendieck decategorification.

pub mod cell;
pub mod decat;
pub mod error;
pub mod expr;
pub mod karoubi;
pub mod linear;
pub mod polygraph;
pub mod rewrite;
pub mod syntax;
pub mod validate;
pub mod verdict;

pub use cell::{Coef, LinComb, Word};
pub use error::{CoreError, SyntaxError};
pub use polygraph::{Polygraph, Ring, Rhs, Rule};

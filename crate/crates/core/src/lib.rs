//! Caplet: a deductive verifier for a small Rust-like core language whose
//! library types carry capability annotations.

pub mod capability;
pub mod corpus;
pub mod encode;
pub mod lang;
pub mod flow;
pub mod purity;
pub mod solver;
pub mod driver;

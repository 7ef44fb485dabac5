//! Q-Cantor series toolkit: basic sequences, digit streams of the η/ψ/Υ
//! constructions, block statistics against the divergence sums, and solvers
//! for the Diophantine relation systems that produce normality at some
//! orders but not others.

pub mod blocks;
pub mod constructions;
pub mod descriptor;
pub mod digits;
pub mod diophantine;
pub mod error;
pub mod schedule;
pub mod sequences;
pub mod stats;

pub use error::{Error, Result};

//! Model checking and query evaluation for FC, the first-order logic of word
//! equations over the factors of a single word.
//!
//! The crate is organised bottom-up:
//!
//! - [`word`]: words, factor occurrences, and the equality oracle
//! - [`syntax`]: the formula AST, parser, printer, and static analyses
//! - [`regexlang`]: regular constraints, simple regexes, regex equations
//! - [`relation`]: substitutions and relations over factor references
//! - [`eval`]: the naive reference evaluator and the width-bounded engine
//! - [`fixpoint`]: tc, dtc, lfp, and pfp operators
//! - [`patternopt`]: standard graphs, tree decompositions, pattern rewriting
//! - [`datalog`]: FC-Datalog programs
//! - [`bridges`]: translations to FO[Eq] and to guarded C
//! - [`spanner`]: regex formulas with captures and the spanner algebra

pub mod bridges;
pub mod datalog;
pub mod eval;
pub mod fixpoint;
pub mod patternopt;
pub mod regexlang;
pub mod relation;
pub mod spanner;
pub mod syntax;
pub mod word;

pub use syntax::{parse, Formula, Pattern, Term, WordEquation};
pub use word::{Alphabet, FactorIndex, FactorRef, Word};

//! JSON formats and the command line front end for `unirigid-core`.
//!
//! [`format`] defines the on-disk documents (graphs, frameworks, operation
//! sequences, certificates) and their conversions to the core types; [`cli`]
//! implements the `unirigid` binary.

pub mod cli;
pub mod format;

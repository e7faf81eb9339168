//! Algorithms for certifying universal rigidity of bar frameworks.
//!
//! Graphs are grown from the complete graph `K_{d+2}` by edge additions and
//! `d`-dimensional Hennenberg operations. Along the way the crate tracks a
//! generic framework together with an equilibrium stress whose stress matrix
//! is positive semidefinite of nullity `d+1`, which certifies that the
//! framework is universally rigid. The same machinery, run with the opposite
//! split placement, produces generic frameworks whose unique stress matrix is
//! indefinite and which are therefore *not* universally rigid.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the command line
//! front end and all IO live in the companion `unirigid` crate.
//!
//! Module map:
//!
//! - [`graph`]: graphs, frameworks, generic sampling, congruence checks
//! - [`rigidity`]: rigidity matrix, infinitesimal/redundant rigidity,
//!   vertex connectivity, conics at infinity
//! - [`stress`]: stress spaces, stress matrices, spectral reports, the
//!   perturbation combiner and subspace utilities
//! - [`hennenberg`]: edge additions, Hennenberg operations and the
//!   certificate-transfer steps
//! - [`builders`]: sequence replay and the end-to-end pipelines

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod builders;
pub mod error;
pub mod graph;
pub mod hennenberg;
pub mod linalg;
pub mod rigidity;
pub mod stress;
mod tolerance;

pub use builders::{
    build_graph, certify_gur, cycle_sequence, random_sequence, stress_dimension_audit,
    verify_certificate, verify_claim, verify_hendrickson, witness_sur, Certificate,
    CertificateKind, Check, Claim, GurCompanion, HendricksonReport, OpSequence, Provenance, Step,
    StepRecord, VerificationReport,
};
pub use error::{Error, Result};
pub use graph::{
    compare_frameworks, make_complete, sample_generic_framework, Comparison, Edge, Framework, Graph,
};
pub use hennenberg::{
    CertifiedFramework, HennenbergStep, PerturbationScope, PlacementMode, SplitParameters,
    StepDiagnostics,
};
pub use stress::{Classification, SpectralReport, StressMatrix, StressVector};
pub use tolerance::Tolerances;

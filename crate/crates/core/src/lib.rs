//! Sample-based quantum diagonalization with amplitude amplification (SQD-AA).
//!
//! The crate bundles an exact statevector simulator for the amplitude
//! amplification (AA) rotations used to suppress already-measured
//! bitstrings, the iterative SQD-AA driver and its plain-SQD baseline,
//! closed-form query complexities for model distributions, and T-count
//! models for SQD, SQD-AA and iterative phase estimation.
//!
//! Conventions shared by every module:
//! - bit `q` of a basis-state index is qubit `q`, and the rightmost
//!   character of a Pauli word acts on qubit 0;
//! - energies are in Hartree;
//! - all randomness flows from explicit `u64` seeds through ChaCha8.

pub mod amplification;
pub mod analytics;
pub mod asp;
pub mod driver;
pub mod error;
pub mod experiment;
pub mod pauli;
pub mod resources;
pub mod state;
pub mod subspace;

pub use amplification::{AaPlan, PlanRecord, RecordKind, ReductionSet};
pub use analytics::{ComplexityCurve, Distribution, DistributionSpec};
pub use driver::{DriverConfig, RunRecord, SampleLedger, StoppingRule, Termination};
pub use error::{Error, Result};
pub use pauli::{Bitstring, Pauli, PauliHamiltonian, PauliString};
pub use resources::{ResourceReport, TrotterErrorModel};
pub use state::{SampleResult, StateVector};
pub use subspace::{Subspace, SubspaceSolution};

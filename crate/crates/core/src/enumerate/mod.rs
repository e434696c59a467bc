//! Finite instance families, the campaign runner that solves every member,
//! and the append-only certificate store.

use thiserror::Error;

use crate::instances::InstanceError;
use crate::solvers::SolverError;

pub mod campaign;
pub mod generate;
pub mod spec;
pub mod store;

pub use campaign::{run_campaign, summarize_store, CampaignOptions, CampaignReport, Certificate};
pub use generate::{generate_family, is_member, weight, FamilyIter};
pub use spec::{builtin_spec, builtin_specs, Condition, DensityFn, DensityRule, FamilySpec, Minimality, RangeConstraint, TopTriple};
pub use store::{read_store, CertificateStore, StoreHeader};

#[derive(Debug, Error)]
pub enum EnumerateError {
    #[error("invalid family spec {0}: {1}")]
    InvalidSpec(String, String),
    #[error("unknown family spec {0}")]
    UnknownSpec(String),
    #[error("store {path} belongs to spec {found}, not {expected}")]
    FingerprintMismatch { path: String, expected: String, found: String },
    #[error("store {path}, line {line}: {why}")]
    Corrupt { path: String, line: usize, why: String },
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error("worker pool: {0}")]
    Pool(String),
}

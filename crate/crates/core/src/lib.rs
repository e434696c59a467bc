//! Pinwheel packing and covering: exact deciders, fold operations,
//! unschedulability certificates, enumeration campaigns and a 9/7
//! approximation for bamboo garden trimming.
//!
//! All periods and densities are exact rationals ([`ratio::Ratio`]).

pub mod instances;
pub mod bgt;
pub mod certify;
pub mod enumerate;
pub mod folds;
pub mod ratio;
pub mod schedule;
pub mod selftest;
pub mod solvers;

pub use instances::{Kind, TaskPeriods};
pub use ratio::Ratio;
pub use schedule::{CyclicSchedule, Slot};

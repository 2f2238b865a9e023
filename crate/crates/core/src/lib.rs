//! Simulator and design-space exploration toolkit for a multi-core cluster
//! whose cores share a configurable number of transprecision FPUs.

pub mod dse;
pub mod isa;
pub mod kernels;
pub mod sched;
pub mod timing;
pub mod tpfloat;

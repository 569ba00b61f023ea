//! The two sub-networks as pure parameterized functions.

pub mod blocks;
pub mod config;
pub mod dsr;
pub mod fme;
pub mod report;
pub mod tfsm;

pub use blocks::{BnUpdate, Mode};
pub use config::{DsrConfig, FmeConfig};
pub use dsr::DsrNet;
pub use fme::FmeNet;
pub use report::{count_parameters, ParamReport};
pub use tfsm::TfsmBlock;

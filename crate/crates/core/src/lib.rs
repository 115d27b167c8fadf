//! Cold-chain vaccine distribution under chance-constrained demand.

pub mod bssaa;
pub mod def;
pub mod demand;
pub mod error;
pub mod experiments;
pub mod instance;
pub mod metrics;
pub mod model;
pub mod ovw;
pub mod solver;
pub mod synthetic;
pub mod wastage;

pub use error::{CoreError, Result};

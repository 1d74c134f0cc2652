//! Multivariate Log S-fBM: a rough stochastic-volatility model in which the
//! log-volatilities of several assets form a stationary Gaussian field with
//! power-law covariances truncated at a correlation scale `T`.
//!
//! The crate is organized as
//!
//! * [`model`]: parameters and admissibility,
//! * [`kernels`]: closed-form covariances and moments,
//! * [`simulate`]: circulant-embedding simulation of fields, measures and
//!   prices,
//! * [`estimate`]: empirical covariances and two-step GMM calibration,
//! * [`marketdata`]: OHLC ingestion and Garman-Klass volatility panels.
//!
//! ```
//! use msfbm::kernels::{integrated_cov, KernelArgs};
//! use msfbm::model::ModelParams;
//!
//! let params = ModelParams::bivariate(16384.0, 0.02, 0.05, 0.15, 0.5);
//! let pair = params.pair(0, 1).unwrap();
//! let c = integrated_cov(&KernelArgs { tau: 16.0, delta: 16.0, pair }).unwrap();
//! assert!(c > 0.0);
//! ```

pub mod error;
pub mod io;
pub mod kernels;
pub mod model;
pub mod simulate;
pub mod estimate;
pub mod marketdata;

pub use error::{Error, Result};

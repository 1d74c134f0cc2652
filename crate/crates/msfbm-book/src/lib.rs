//! Compiles the guide under `book/` so that `cargo test` runs its listings.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/model.md")]
pub mod ch1_model {}
#[doc = include_str!("../../../book/src/kernels.md")]
pub mod ch2_kernels {}
#[doc = include_str!("../../../book/src/simulation.md")]
pub mod ch3_simulation {}
#[doc = include_str!("../../../book/src/estimation.md")]
pub mod ch4_estimation {}
#[doc = include_str!("../../../book/src/marketdata.md")]
pub mod ch5_marketdata {}
#[doc = include_str!("../../../book/src/index.md")]
pub mod ch6_index {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod ch7_cli {}

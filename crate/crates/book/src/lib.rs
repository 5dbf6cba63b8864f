//! The guide under `book/`, compiled so its snippets run with `cargo test`.

#![doc = include_str!("../../../book/src/introduction.md")]

#[doc = include_str!("../../../book/src/panels.md")]
pub mod panels {}

#[doc = include_str!("../../../book/src/statistics.md")]
pub mod statistics {}

#[doc = include_str!("../../../book/src/r2-connectedness.md")]
pub mod r2_connectedness {}

#[doc = include_str!("../../../book/src/fevd.md")]
pub mod fevd {}

#[doc = include_str!("../../../book/src/dynamics.md")]
pub mod dynamics {}

#[doc = include_str!("../../../book/src/networks.md")]
pub mod networks {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}

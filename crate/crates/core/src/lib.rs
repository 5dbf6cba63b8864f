//! Connectedness analytics for panels of asset returns.
//!
//! The pipeline runs from raw prices to spillover networks:
//!
//! 1. [`panel`] loads and aligns price tables and computes log returns.
//! 2. [`stats`] describes each series (moments, Jarque–Bera, ADF) and
//!    computes Pearson, Spearman and Kendall correlation matrices.
//! 3. [`r2conn`] splits every equation's R² into contemporaneous and lagged
//!    per-series contributions and assembles a [`ConnectednessTable`].
//! 4. [`fevdconn`] provides the GFEVD benchmarks (OLS VAR and quantile VAR).
//! 5. [`dynamics`] rolls any engine over fixed windows and splits samples by
//!    date.
//! 6. [`netgraph`] turns net pairwise spillovers into directed networks.
//!
//! ```
//! use connectedness::{connectedness_table, aggregate_indices, CorrMethod};
//! use connectedness::simulate::{simulate_returns, simulated_panel, default_labels, PlantedVar};
//!
//! let spec = PlantedVar::independent(3, 0.01).with_edge(0, 1, 0.5);
//! let returns = simulated_panel(simulate_returns(&spec, 500, 1)?, default_labels(3))?;
//! let table = connectedness_table(&returns, 1, CorrMethod::Pearson)?;
//! let idx = aggregate_indices(&table);
//! assert!(idx.overall.net[0] > 0.0);
//! # Ok::<(), connectedness::Error>(())
//! ```

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod estimators;
pub mod fevdconn;
pub mod netgraph;
pub mod panel;
pub mod r2conn;
pub mod simulate;
pub mod stats;
pub mod table;

pub use dynamics::{
    average_dynamic_table, event_markers, rolling_connectedness, subsample_split, Engine, RollingSeries, SubsampleSpec,
};
pub use error::{Error, Result};
pub use fevdconn::{dy_connectedness, gfevd, ma_coefficients, qvar_connectedness, GfevdTable};
pub use netgraph::{build_network, export_graph, GraphFormat, SpilloverNetwork};
pub use panel::{compute_log_returns, load_price_panel, IngestSpec, MissingPolicy, PricePanel, ReturnPanel};
pub use r2conn::{build_design, connectedness_table, decompose_r2};
pub use stats::{correlation_matrix, describe, CorrMethod};
pub use table::{aggregate_indices, npdc, ConnectednessTable, Npdc, SpilloverIndices, SplitKind};

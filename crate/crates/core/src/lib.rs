//! Neural-network compression of large European option books.
//!
//! A target book of thousands of vanillas with staggered maturities is
//! replaced, per risk horizon, by a small book of short-dated calls and puts
//! whose strikes and sizes are learned by a two-layer ReLU network. The crate
//! also benchmarks exposures and Greeks of the two books on Monte-Carlo paths
//! and computes SA-CCR exposure at default for both.
//!
//! Numerical code is generic over [`Scalar`] (`f32`/`f64`); the aliases
//! below pin the common `f64` instantiations. The experiment driver and all
//! file formats work in `f64`.

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod compressor;
pub mod config;
pub mod error;
pub mod experiment;
pub mod io;
pub mod manifest;
pub mod market_sim;
pub mod portfolio;
pub mod pricing;
pub mod risk_metrics;
pub mod saccr;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type MarketConfig = market_sim::MarketConfig<f64>;
pub type ScenarioConfig = market_sim::ScenarioConfig<f64>;
pub type HorizonGrid = market_sim::HorizonGrid<f64>;
pub type PathMatrix = market_sim::PathMatrix<f64>;
pub type VanillaTrade = portfolio::VanillaTrade<f64>;
pub type TargetPortfolio = portfolio::TargetPortfolio<f64>;
pub type PortfolioSpec = portfolio::PortfolioSpec<f64>;
pub type CompressedPortfolio = compressor::CompressedPortfolio<f64>;
pub type TrainingConfig = compressor::TrainingConfig<f64>;
pub type TrainingTrace = compressor::TrainingTrace<f64>;
pub type GreeksTriple = pricing::GreeksTriple<f64>;
pub type SaccrParams = saccr::SaccrParams<f64>;
pub type CapitalReport = saccr::CapitalReport<f64>;
pub type BenchmarkReport = risk_metrics::BenchmarkReport<f64>;

pub use portfolio::Direction;
pub use pricing::OptionKind;

//! Path-aware traffic engineering over PolKA polynomial source routing.
//!
//! The crate is organised bottom-up:
//!
//! - [`gf2poly`]: exact GF(2)\[t\] arithmetic and the polynomial CRT.
//! - [`polka`]: node identifiers, route identifiers, per-hop forwarding.
//! - [`netsim`]: fluid-flow simulator with tunnels, edge PBR and max-min fair sharing.
//! - [`telemetry`]: time-series store, lag windows, synthetic wireless dataset.
//! - [`predictor`]: regression models, RMSE evaluation, recursive forecasting.
//! - [`optimizer`]: demand-split objectives and path selection.
//! - [`controller`]: flow lifecycle orchestration over an in-process bus.
//! - [`scenario`]: scripted experiments and the model-evaluation pipeline.
//! - [`api`]: HTTP + server-sent-event gateway.

pub mod api;
pub mod bundled;
pub mod controller;
pub mod gf2poly;
pub mod netsim;
pub mod optimizer;
pub mod polka;
pub mod predictor;
pub mod scenario;
pub mod telemetry;

/// Version stamped into every JSON document and output manifest.
pub const SCHEMA_VERSION: u32 = 1;

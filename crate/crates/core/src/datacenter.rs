//! The datacenter: orchestrates the autonomous pipeline (capture frames,
//! compute samples, update history, retime signals, track buses), persists
//! everything as CSV + PPM, and serves queries over read-only snapshots.

pub mod config;
pub mod persist;
pub mod pipeline;
pub mod report;
pub mod serve;
pub mod store;

pub use config::{load_config, ConfigError};
pub use persist::{load_state, save_state, PersistError};
pub use pipeline::{FrameSource, Pipeline, PipelineError};
pub use store::{SampleStore, Snapshot, StoreError, Stores, WorldConfig};

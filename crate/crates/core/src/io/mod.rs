//! Configuration, dataset storage and report files.

pub mod config;
pub mod schema;
pub mod store;
pub mod tabular;

pub use config::{FiberConfig, NoiseConfig, OutputConfig, ProbeConfig, RunConfig, ScheduleConfig, StorageFormat};
pub use schema::{
    check_version, read_json, write_json, BurstReport, EventReport, FitReport, ScenarioTruth, TruthFile,
    SCHEMA_MAJOR, SCHEMA_VERSION,
};

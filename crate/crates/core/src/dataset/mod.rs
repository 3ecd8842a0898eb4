//! Bit-exact persistence of labelled frames and EPS tensors, plus builders
//! for synthetic capture campaigns.

pub mod format;
pub mod manifest;
pub mod scenario;

pub use format::{
    open_dataset, read_dataset, write_dataset, DatasetHeader, DatasetReader, DatasetWriter,
    PayloadKind, Record, HEADER_BYTES, RECORD_HEADER_BYTES,
};
pub use manifest::Manifest;
pub use scenario::{build_scenario, FrameJob, ScenarioKind, ScenarioPlan, ScenarioSpec};

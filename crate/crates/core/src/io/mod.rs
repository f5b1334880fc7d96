//! Configuration, dataset manifests and report serialization.

mod config;
mod dataset;
mod report;

pub use config::{
    load_config, EvalSettings, MultiscaleConfig, ParamConfig, QualityFloors, TauMode, CONFIG_VERSION, WINDOW_CHOICES,
};
pub use dataset::{
    load_dataset, load_manifest, split_counts, write_atomic, write_dataset, Dataset, DatasetManifest, ManifestEntry,
    RecordMetadata, SplitRole, FS_TOLERANCE, MANIFEST_VERSION,
};
pub use report::{
    csv_bytes, per_record_rows, write_csv, write_json, CascadeBar, CascadeTable, InvalidRow, PerRecordRow,
    ValidityRow, WindowRow,
};

//! NSL-KDD ingestion and preprocessing.

mod encode;
mod label;
mod record;
mod snapshot;

pub use encode::{
    encode, fit_stats, EncodeOptions, EncodedDataset, EncodingMode, NormalizationStats,
    UnknownCategoryPolicy, Vocabulary,
};
pub use label::{map_attack_label, ClassLabel, Taxonomy, BUNDLED_TAXONOMY};
pub use record::{
    parse_records, read_records, FeatureValue, RawRecord, FEATURE_NAMES, NUM_FEATURES,
    SYMBOLIC_FEATURES,
};
pub use snapshot::{read_snapshot, write_snapshot, SNAPSHOT_MAGIC};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: expected 42 or 43 comma-separated fields, found {found}")]
    FieldCount { line: usize, found: usize },
    #[error("line {line}: feature F{feature} ({name}) is not a finite number: {value:?}")]
    NonNumeric {
        line: usize,
        feature: usize,
        name: &'static str,
        value: String,
    },
    #[error("line {line}: difficulty column is not an integer: {value:?}")]
    BadDifficulty { line: usize, value: String },
    #[error("record {index}: expected 41 features, found {found}")]
    RecordWidth { index: usize, found: usize },
    #[error("record {index}: feature F{feature} has the wrong kind (symbolic vs numeric)")]
    FeatureKind { index: usize, feature: usize },
    #[error("unknown attack name {0:?} (not present in the taxonomy)")]
    UnknownAttack(String),
    #[error("taxonomy line {line}: {msg}")]
    Taxonomy { line: usize, msg: String },
    #[error("cannot fit normalization statistics on an empty record list")]
    EmptyRecords,
    #[error("feature F{feature} ({name}): category {category:?} was not seen when fitting")]
    UnseenCategory {
        feature: usize,
        name: &'static str,
        category: String,
    },
    #[error("matrix has {rows} rows but {labels} labels")]
    RowLabelMismatch { rows: usize, labels: usize },
    #[error("snapshot: {0}")]
    Snapshot(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

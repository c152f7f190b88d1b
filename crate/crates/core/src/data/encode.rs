use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::label::{ClassLabel, Taxonomy};
use super::record::{is_symbolic, FeatureValue, RawRecord, FEATURE_NAMES, NUM_FEATURES};
use super::DataError;

/// Observed categories of one symbolic feature, sorted and de-duplicated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub feature: usize,
    pub categories: Vec<String>,
}

impl Vocabulary {
    pub fn index_of(&self, category: &str) -> Option<usize> {
        self.categories
            .binary_search_by(|c| c.as_str().cmp(category))
            .ok()
    }
}

/// Per-feature min-max statistics plus vocabularies of the symbolic features.
///
/// For symbolic features `min`/`max` hold `0` and `vocab_len - 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub vocabularies: Vec<Vocabulary>,
}

impl NormalizationStats {
    /// Stats for data that is already in `[0, 1]` (synthetic sets, tests).
    pub fn unit(width: usize) -> Self {
        Self {
            min: vec![0.0; width],
            max: vec![1.0; width],
            vocabularies: Vec::new(),
        }
    }

    pub fn vocabulary(&self, feature: usize) -> Option<&Vocabulary> {
        self.vocabularies.iter().find(|v| v.feature == feature)
    }

    /// Encoded row width for the given mode.
    pub fn encoded_width(&self, mode: EncodingMode) -> usize {
        match mode {
            EncodingMode::Ordinal => self.min.len(),
            EncodingMode::OneHot => {
                let expanded: usize = self.vocabularies.iter().map(|v| v.categories.len()).sum();
                self.min.len() - self.vocabularies.len() + expanded
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum EncodingMode {
    /// Symbolic features become `index / (vocab_len - 1)`; width stays 41.
    #[default]
    Ordinal,
    /// Symbolic features expand into one column per category.
    OneHot,
}

impl fmt::Display for EncodingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EncodingMode::Ordinal => "ordinal",
            EncodingMode::OneHot => "one-hot",
        })
    }
}

impl FromStr for EncodingMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "ordinal" | "ordinal-41" => Ok(EncodingMode::Ordinal),
            "one-hot" | "onehot" => Ok(EncodingMode::OneHot),
            other => Err(format!(
                "unknown encoding {other:?} (expected ordinal or one-hot)"
            )),
        }
    }
}

/// What to do with a symbolic value that was not seen while fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum UnknownCategoryPolicy {
    Strict,
    /// Ordinal: encode as `1.0`. One-hot: all category columns stay `0`.
    #[default]
    Lenient,
}

impl fmt::Display for UnknownCategoryPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UnknownCategoryPolicy::Strict => "strict",
            UnknownCategoryPolicy::Lenient => "lenient",
        })
    }
}

impl FromStr for UnknownCategoryPolicy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "strict" => Ok(UnknownCategoryPolicy::Strict),
            "lenient" => Ok(UnknownCategoryPolicy::Lenient),
            other => Err(format!(
                "unknown category policy {other:?} (expected strict or lenient)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EncodeOptions {
    pub mode: EncodingMode,
    pub unknown_category: UnknownCategoryPolicy,
}

fn check_shape(index: usize, record: &RawRecord) -> Result<(), DataError> {
    if record.features.len() != NUM_FEATURES {
        return Err(DataError::RecordWidth {
            index,
            found: record.features.len(),
        });
    }
    for (f, value) in record.features.iter().enumerate() {
        let ok = match value {
            FeatureValue::Symbolic(_) => is_symbolic(f),
            FeatureValue::Numeric(_) => !is_symbolic(f),
        };
        if !ok {
            return Err(DataError::FeatureKind {
                index,
                feature: f + 1,
            });
        }
    }
    Ok(())
}

pub fn fit_stats(records: &[RawRecord]) -> Result<NormalizationStats, DataError> {
    if records.is_empty() {
        return Err(DataError::EmptyRecords);
    }
    let mut min = vec![f64::INFINITY; NUM_FEATURES];
    let mut max = vec![f64::NEG_INFINITY; NUM_FEATURES];
    let mut vocab: Vec<BTreeSet<&str>> = vec![BTreeSet::new(); NUM_FEATURES];

    for (i, rec) in records.iter().enumerate() {
        check_shape(i, rec)?;
        for (f, value) in rec.features.iter().enumerate() {
            match value {
                FeatureValue::Numeric(v) => {
                    min[f] = min[f].min(*v);
                    max[f] = max[f].max(*v);
                }
                FeatureValue::Symbolic(s) => {
                    vocab[f].insert(s.as_str());
                }
            }
        }
    }

    let mut vocabularies = Vec::new();
    for (f, set) in vocab.into_iter().enumerate() {
        if !is_symbolic(f) {
            continue;
        }
        let categories: Vec<String> = set.into_iter().map(str::to_string).collect();
        min[f] = 0.0;
        max[f] = (categories.len() - 1) as f64;
        vocabularies.push(Vocabulary {
            feature: f,
            categories,
        });
    }

    Ok(NormalizationStats {
        min,
        max,
        vocabularies,
    })
}

fn scale(x: f64, min: f64, max: f64) -> f64 {
    if max <= min {
        0.0
    } else {
        ((x - min) / (max - min)).clamp(0.0, 1.0)
    }
}

/// Encodes records with previously fitted stats. Labels go through `taxonomy`.
pub fn encode(
    records: &[RawRecord],
    stats: &NormalizationStats,
    taxonomy: &Taxonomy,
    opts: &EncodeOptions,
) -> Result<EncodedDataset, DataError> {
    let width = stats.encoded_width(opts.mode);
    let mut matrix = Array2::<f64>::zeros((records.len(), width));
    let mut labels = Vec::with_capacity(records.len());
    let mut warned: BTreeSet<(usize, &str)> = BTreeSet::new();

    for (i, rec) in records.iter().enumerate() {
        check_shape(i, rec)?;
        let mut row = matrix.row_mut(i);
        let mut col = 0;
        for (f, value) in rec.features.iter().enumerate() {
            match value {
                FeatureValue::Numeric(v) => {
                    row[col] = scale(*v, stats.min[f], stats.max[f]);
                    col += 1;
                }
                FeatureValue::Symbolic(s) => {
                    let vocab = stats.vocabulary(f).ok_or_else(|| {
                        DataError::Snapshot(format!("stats carry no vocabulary for F{}", f + 1))
                    })?;
                    let index = vocab.index_of(s);
                    if index.is_none() {
                        if opts.unknown_category == UnknownCategoryPolicy::Strict {
                            return Err(DataError::UnseenCategory {
                                feature: f + 1,
                                name: FEATURE_NAMES[f],
                                category: s.clone(),
                            });
                        }
                        if warned.insert((f, s.as_str())) {
                            log::warn!(
                                "F{} ({}): unseen category {:?}, encoding as unknown",
                                f + 1,
                                FEATURE_NAMES[f],
                                s
                            );
                        }
                    }
                    let n = vocab.categories.len();
                    match opts.mode {
                        EncodingMode::Ordinal => {
                            row[col] = match index {
                                Some(_) if n <= 1 => 0.0,
                                Some(k) => k as f64 / (n - 1) as f64,
                                None => 1.0,
                            };
                            col += 1;
                        }
                        EncodingMode::OneHot => {
                            if let Some(k) = index {
                                row[col + k] = 1.0;
                            }
                            col += n;
                        }
                    }
                }
            }
        }
        debug_assert_eq!(col, width);
        labels.push(taxonomy.lookup(&rec.label)?);
    }

    EncodedDataset::new(matrix, labels, stats.clone(), opts.mode)
}

/// Model-ready matrix: one row per record, every entry in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedDataset {
    matrix: Array2<f64>,
    labels: Vec<ClassLabel>,
    stats: NormalizationStats,
    mode: EncodingMode,
}

impl EncodedDataset {
    pub fn new(
        matrix: Array2<f64>,
        labels: Vec<ClassLabel>,
        stats: NormalizationStats,
        mode: EncodingMode,
    ) -> Result<Self, DataError> {
        if matrix.nrows() != labels.len() {
            return Err(DataError::RowLabelMismatch {
                rows: matrix.nrows(),
                labels: labels.len(),
            });
        }
        Ok(Self {
            matrix,
            labels,
            stats,
            mode,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn width(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.matrix.view()
    }

    pub fn labels(&self) -> &[ClassLabel] {
        &self.labels
    }

    pub fn stats(&self) -> &NormalizationStats {
        &self.stats
    }

    pub fn mode(&self) -> EncodingMode {
        self.mode
    }

    /// Record count per class, indexed by class code.
    pub fn class_tallies(&self) -> [usize; ClassLabel::COUNT] {
        let mut t = [0; ClassLabel::COUNT];
        for l in &self.labels {
            t[l.code()] += 1;
        }
        t
    }

    /// Rows in the given order (indices may repeat).
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            matrix: self.matrix.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            stats: self.stats.clone(),
            mode: self.mode,
        }
    }

    /// Seeded permutation of the rows.
    pub fn shuffled(&self, seed: u64) -> Self {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        self.select(&idx)
    }
}

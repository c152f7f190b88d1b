//! Binary snapshot of an [`EncodedDataset`].
//!
//! All integers and floats are little-endian:
//!
//! ```text
//! magic        8 bytes  "DQLENC01"
//! mode         u8       0 = ordinal, 1 = one-hot
//! n_features   u32      raw feature count (41)
//! min, max     n_features x (f64, f64)
//! n_vocab      u32
//!   feature    u32      zero-based raw feature index
//!   n_cat      u32
//!     len, utf8 bytes   one per category, sorted
//! rows         u64
//! cols         u32
//! labels       rows x u8 class codes
//! matrix       rows x cols f64, row-major
//! ```

use std::io::{Read, Write};

use ndarray::Array2;

use super::encode::{EncodedDataset, EncodingMode, NormalizationStats, Vocabulary};
use super::label::ClassLabel;
use super::DataError;
use crate::binio::*;

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"DQLENC01";

pub fn write_snapshot<W: Write>(dataset: &EncodedDataset, w: &mut W) -> Result<(), DataError> {
    let stats = dataset.stats();
    w.write_all(SNAPSHOT_MAGIC)?;
    write_u8(
        w,
        match dataset.mode() {
            EncodingMode::Ordinal => 0,
            EncodingMode::OneHot => 1,
        },
    )?;
    write_u32(w, stats.min.len() as u32)?;
    for (lo, hi) in stats.min.iter().zip(&stats.max) {
        write_f64(w, *lo)?;
        write_f64(w, *hi)?;
    }
    write_u32(w, stats.vocabularies.len() as u32)?;
    for v in &stats.vocabularies {
        write_u32(w, v.feature as u32)?;
        write_u32(w, v.categories.len() as u32)?;
        for c in &v.categories {
            write_str(w, c)?;
        }
    }
    write_u64(w, dataset.len() as u64)?;
    write_u32(w, dataset.width() as u32)?;
    let codes: Vec<u8> = dataset.labels().iter().map(|l| l.code() as u8).collect();
    w.write_all(&codes)?;
    write_f64s(w, dataset.features().iter())?;
    Ok(())
}

pub fn read_snapshot<R: Read>(r: &mut R) -> Result<EncodedDataset, DataError> {
    let magic: [u8; 8] = read_array(r)?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(DataError::Snapshot(
            "bad magic, not an encoded snapshot".into(),
        ));
    }
    let mode = match read_u8(r)? {
        0 => EncodingMode::Ordinal,
        1 => EncodingMode::OneHot,
        m => return Err(DataError::Snapshot(format!("unknown encoding mode {m}"))),
    };
    let n_features = read_u32(r)? as usize;
    let mut min = Vec::with_capacity(n_features);
    let mut max = Vec::with_capacity(n_features);
    for _ in 0..n_features {
        min.push(read_f64(r)?);
        max.push(read_f64(r)?);
    }
    let n_vocab = read_u32(r)? as usize;
    let mut vocabularies = Vec::with_capacity(n_vocab);
    for _ in 0..n_vocab {
        let feature = read_u32(r)? as usize;
        let n = read_u32(r)? as usize;
        let categories = (0..n).map(|_| read_str(r)).collect::<Result<Vec<_>, _>>()?;
        vocabularies.push(Vocabulary {
            feature,
            categories,
        });
    }
    let stats = NormalizationStats {
        min,
        max,
        vocabularies,
    };

    let rows = read_u64(r)? as usize;
    let cols = read_u32(r)? as usize;
    if cols != stats.encoded_width(mode) {
        return Err(DataError::Snapshot(format!(
            "matrix width {cols} disagrees with stats ({} for {mode})",
            stats.encoded_width(mode)
        )));
    }
    let mut codes = vec![0u8; rows];
    r.read_exact(&mut codes)?;
    let labels = codes
        .iter()
        .map(|&c| {
            ClassLabel::from_code(c as usize)
                .ok_or_else(|| DataError::Snapshot(format!("invalid class code {c}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let data = read_f64s(r, rows * cols)?;
    let matrix = Array2::from_shape_vec((rows, cols), data)
        .map_err(|e| DataError::Snapshot(e.to_string()))?;
    EncodedDataset::new(matrix, labels, stats, mode)
}

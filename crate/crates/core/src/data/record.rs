use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::DataError;

pub const NUM_FEATURES: usize = 41;

/// Zero-based positions of `protocol_type`, `service` and `flag`.
pub const SYMBOLIC_FEATURES: [usize; 3] = [1, 2, 3];

pub const FEATURE_NAMES: [&str; NUM_FEATURES] = [
    "duration",
    "protocol_type",
    "service",
    "flag",
    "src_bytes",
    "dst_bytes",
    "land",
    "wrong_fragment",
    "urgent",
    "hot",
    "num_failed_logins",
    "logged_in",
    "num_compromised",
    "root_shell",
    "su_attempted",
    "num_root",
    "num_file_creations",
    "num_shells",
    "num_access_files",
    "num_outbound_cmds",
    "is_host_login",
    "is_guest_login",
    "count",
    "srv_count",
    "serror_rate",
    "srv_serror_rate",
    "rerror_rate",
    "srv_rerror_rate",
    "same_srv_rate",
    "diff_srv_rate",
    "srv_diff_host_rate",
    "dst_host_count",
    "dst_host_srv_count",
    "dst_host_same_srv_rate",
    "dst_host_diff_srv_rate",
    "dst_host_same_src_port_rate",
    "dst_host_srv_diff_host_rate",
    "dst_host_serror_rate",
    "dst_host_srv_serror_rate",
    "dst_host_rerror_rate",
    "dst_host_srv_rerror_rate",
];

pub(crate) fn is_symbolic(feature: usize) -> bool {
    SYMBOLIC_FEATURES.contains(&feature)
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureValue {
    Numeric(f64),
    Symbolic(String),
}

impl FeatureValue {
    pub fn as_numeric(&self) -> Option<f64> {
        match self {
            FeatureValue::Numeric(v) => Some(*v),
            FeatureValue::Symbolic(_) => None,
        }
    }

    pub fn as_symbolic(&self) -> Option<&str> {
        match self {
            FeatureValue::Symbolic(s) => Some(s),
            FeatureValue::Numeric(_) => None,
        }
    }
}

/// One connection record: 41 features in dataset order plus the attack name.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub features: Vec<FeatureValue>,
    pub label: String,
    /// Present in the `+` distributions of NSL-KDD; never used for training.
    pub difficulty: Option<i64>,
}

/// Parses NSL-KDD rows (no header). Blank lines are skipped; line numbers in
/// errors are 1-based and count blank lines.
pub fn parse_records<R: BufRead>(source: R) -> Result<Vec<RawRecord>, DataError> {
    let mut records = Vec::new();
    for (idx, line) in source.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        records.push(parse_line(trimmed, line_no)?);
    }
    Ok(records)
}

pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<RawRecord>, DataError> {
    let file = File::open(path.as_ref())?;
    parse_records(BufReader::new(file))
}

fn parse_line(line: &str, line_no: usize) -> Result<RawRecord, DataError> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != NUM_FEATURES + 1 && fields.len() != NUM_FEATURES + 2 {
        return Err(DataError::FieldCount {
            line: line_no,
            found: fields.len(),
        });
    }

    let mut features = Vec::with_capacity(NUM_FEATURES);
    for (i, raw) in fields[..NUM_FEATURES].iter().enumerate() {
        if is_symbolic(i) {
            features.push(FeatureValue::Symbolic((*raw).to_string()));
            continue;
        }
        let value = raw
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| DataError::NonNumeric {
                line: line_no,
                feature: i + 1,
                name: FEATURE_NAMES[i],
                value: (*raw).to_string(),
            })?;
        features.push(FeatureValue::Numeric(value));
    }

    let difficulty = match fields.get(NUM_FEATURES + 1) {
        Some(raw) => Some(raw.parse::<i64>().map_err(|_| DataError::BadDifficulty {
            line: line_no,
            value: (*raw).to_string(),
        })?),
        None => None,
    };

    Ok(RawRecord {
        features,
        label: fields[NUM_FEATURES].to_string(),
        difficulty,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const LINE: &str = "0,tcp,http,SF,232,8153,0,0,0,0,0,1,0,0,0,0,0,0,0,0,0,0,5,5,0.20,0.20,0.00,0.00,1.00,0.00,0.00,30,255,1.00,0.00,0.03,0.04,0.03,0.01,0.00,0.01,normal,21";

    #[test]
    fn empty_input_yields_no_records() {
        assert!(parse_records("".as_bytes()).unwrap().is_empty());
        assert!(parse_records("\n\n  \n".as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn parses_one_line_field_by_field() {
        let recs = parse_records(LINE.as_bytes()).unwrap();
        assert_eq!(recs.len(), 1);
        let r = &recs[0];
        assert_eq!(r.features.len(), 41);
        let expected: Vec<FeatureValue> = LINE
            .split(',')
            .take(41)
            .enumerate()
            .map(|(i, f)| {
                if [1, 2, 3].contains(&i) {
                    FeatureValue::Symbolic(f.to_string())
                } else {
                    FeatureValue::Numeric(f.parse().unwrap())
                }
            })
            .collect();
        assert_eq!(r.features, expected);
        assert_eq!(r.features[0], FeatureValue::Numeric(0.0));
        assert_eq!(r.features[1], FeatureValue::Symbolic("tcp".into()));
        assert_eq!(r.features[2], FeatureValue::Symbolic("http".into()));
        assert_eq!(r.features[3], FeatureValue::Symbolic("SF".into()));
        assert_eq!(r.features[4], FeatureValue::Numeric(232.0));
        assert_eq!(r.features[40], FeatureValue::Numeric(0.01));
        assert_eq!(r.label, "normal");
        assert_eq!(r.difficulty, Some(21));
    }

    #[test]
    fn difficulty_column_is_optional() {
        let line = LINE.rsplit_once(',').unwrap().0;
        let recs = parse_records(line.as_bytes()).unwrap();
        assert_eq!(recs[0].difficulty, None);
        assert_eq!(recs[0].label, "normal");
    }

    #[test]
    fn count_matches_non_empty_lines_and_keeps_order() {
        let other = LINE.replace("normal", "neptune");
        let text = format!("{LINE}\n\n{other}\r\n{LINE}\n");
        let recs = parse_records(text.as_bytes()).unwrap();
        let labels: Vec<_> = recs.iter().map(|r| r.label.as_str()).collect();
        assert_eq!(labels, ["normal", "neptune", "normal"]);
    }

    #[test]
    fn wrong_field_count_names_the_line() {
        let text = format!("{LINE}\n0,tcp,http\n");
        match parse_records(text.as_bytes()) {
            Err(DataError::FieldCount { line, found }) => {
                assert_eq!(line, 2);
                assert_eq!(found, 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_numeric_value_names_the_feature() {
        let bad = LINE.replacen("232", "abc", 1);
        match parse_records(bad.as_bytes()) {
            Err(DataError::NonNumeric {
                line,
                feature,
                name,
                ..
            }) => {
                assert_eq!(line, 1);
                assert_eq!(feature, 5);
                assert_eq!(name, "src_bytes");
            }
            other => panic!("unexpected {other:?}"),
        }
        let nan = LINE.replacen("232", "NaN", 1);
        assert!(matches!(
            parse_records(nan.as_bytes()),
            Err(DataError::NonNumeric { feature: 5, .. })
        ));
    }

    #[test]
    fn bad_difficulty_is_rejected() {
        let bad = LINE.replace(",normal,21", ",normal,hard");
        assert!(matches!(
            parse_records(bad.as_bytes()),
            Err(DataError::BadDifficulty { line: 1, .. })
        ));
    }
}

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::DataError;

/// The five traffic classes. Integer codes double as Q-network action indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum ClassLabel {
    Normal = 0,
    DoS = 1,
    Probe = 2,
    U2R = 3,
    R2L = 4,
}

impl ClassLabel {
    pub const COUNT: usize = 5;
    pub const ALL: [ClassLabel; 5] = [
        ClassLabel::Normal,
        ClassLabel::DoS,
        ClassLabel::Probe,
        ClassLabel::U2R,
        ClassLabel::R2L,
    ];

    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Option<Self> {
        Self::ALL.get(code).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassLabel::Normal => "Normal",
            ClassLabel::DoS => "DoS",
            ClassLabel::Probe => "Probe",
            ClassLabel::U2R => "U2R",
            ClassLabel::R2L => "R2L",
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "normal" => Ok(ClassLabel::Normal),
            "dos" => Ok(ClassLabel::DoS),
            "probe" => Ok(ClassLabel::Probe),
            "u2r" => Ok(ClassLabel::U2R),
            "r2l" => Ok(ClassLabel::R2L),
            other => Err(format!("unknown class {other:?}")),
        }
    }
}

/// Text of the taxonomy file shipped with the crate.
pub const BUNDLED_TAXONOMY: &str = include_str!("../../data/attack_taxonomy.txt");

/// Attack name to class lookup, loaded from `attack_name,category` lines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Taxonomy {
    entries: BTreeMap<String, ClassLabel>,
}

impl Taxonomy {
    pub fn parse(text: &str) -> Result<Self, DataError> {
        let mut entries = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (name, category) = line.split_once(',').ok_or_else(|| DataError::Taxonomy {
                line: line_no,
                msg: format!("expected `attack_name,category`, got {line:?}"),
            })?;
            let name = name.trim().to_ascii_lowercase();
            if name.is_empty() {
                return Err(DataError::Taxonomy {
                    line: line_no,
                    msg: "empty attack name".into(),
                });
            }
            let class = category
                .parse::<ClassLabel>()
                .map_err(|msg| DataError::Taxonomy { line: line_no, msg })?;
            if let Some(prev) = entries.insert(name.clone(), class) {
                if prev != class {
                    return Err(DataError::Taxonomy {
                        line: line_no,
                        msg: format!("{name:?} listed as both {prev} and {class}"),
                    });
                }
            }
        }
        Ok(Self { entries })
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, DataError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn bundled() -> &'static Taxonomy {
        static BUNDLED: OnceLock<Taxonomy> = OnceLock::new();
        BUNDLED.get_or_init(|| Taxonomy::parse(BUNDLED_TAXONOMY).expect("bundled taxonomy parses"))
    }

    pub fn lookup(&self, name: &str) -> Result<ClassLabel, DataError> {
        let key = name.trim().to_ascii_lowercase();
        self.entries
            .get(&key)
            .copied()
            .ok_or(DataError::UnknownAttack(key))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, ClassLabel)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

/// Maps an attack name through the bundled taxonomy.
pub fn map_attack_label(name: &str) -> Result<ClassLabel, DataError> {
    Taxonomy::bundled().lookup(name)
}

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::GazeError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    BalancedTest,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::BalancedTest => "balanced_test",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = GazeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "balanced_test" => Ok(Split::BalancedTest),
            "test" => Ok(Split::Test),
            other => Err(GazeError::Manifest(format!("unknown split `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub id: String,
    pub path: PathBuf,
    pub label: usize,
    pub split: Split,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    Head,
    Medium,
    Tail,
}

impl Group {
    pub const ALL: [Group; 3] = [Group::Head, Group::Medium, Group::Tail];

    pub fn as_str(self) -> &'static str {
        match self {
            Group::Head => "head",
            Group::Medium => "medium",
            Group::Tail => "tail",
        }
    }
}

/// Head/medium/tail membership per class index.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassGrouping(pub Vec<Group>);

impl ClassGrouping {
    pub fn group(&self, class: usize) -> Group {
        self.0[class]
    }

    pub fn members(&self, group: Group) -> Vec<usize> {
        (0..self.0.len()).filter(|&c| self.0[c] == group).collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub const HEAD_MIN_EXCLUSIVE: usize = 1000;
pub const TAIL_MAX_EXCLUSIVE: usize = 100;

/// Head if more than 1000 training samples, tail if fewer than 100,
/// medium otherwise (both boundaries are medium).
pub fn group_classes(counts: &[usize]) -> ClassGrouping {
    ClassGrouping(
        counts
            .iter()
            .map(|&n| {
                if n > HEAD_MIN_EXCLUSIVE {
                    Group::Head
                } else if n < TAIL_MAX_EXCLUSIVE {
                    Group::Tail
                } else {
                    Group::Medium
                }
            })
            .collect(),
    )
}

/// Image records plus class metadata.
///
/// `groups` is optional in the JSON form; when absent the grouping is
/// derived from training counts with [`group_classes`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub class_names: Vec<String>,
    pub records: Vec<ImageRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groups: Option<ClassGrouping>,
}

impl DatasetManifest {
    pub fn new(class_names: Vec<String>, records: Vec<ImageRecord>) -> Result<Self, GazeError> {
        let m = Self {
            class_names,
            records,
            groups: None,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), GazeError> {
        let k = self.class_names.len();
        if k == 0 {
            return Err(GazeError::Manifest("no classes".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for r in &self.records {
            if r.label >= k {
                return Err(GazeError::Manifest(format!(
                    "record `{}` has label {} but only {k} classes",
                    r.id, r.label
                )));
            }
            if r.height == 0 || r.width == 0 || r.channels == 0 {
                return Err(GazeError::Manifest(format!(
                    "record `{}` has a zero dimension",
                    r.id
                )));
            }
            if !seen.insert(r.id.as_str()) {
                return Err(GazeError::Manifest(format!(
                    "duplicate record id `{}`",
                    r.id
                )));
            }
        }
        if let Some(g) = &self.groups {
            if g.len() != k {
                return Err(GazeError::Manifest(format!(
                    "grouping covers {} classes, manifest has {k}",
                    g.len()
                )));
            }
        }
        Ok(())
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Training records per class.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes()];
        for r in self.split(Split::Train) {
            counts[r.label] += 1;
        }
        counts
    }

    pub fn grouping(&self) -> ClassGrouping {
        self.groups
            .clone()
            .unwrap_or_else(|| group_classes(&self.class_counts()))
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ImageRecord> {
        self.records.iter().filter(move |r| r.split == split)
    }

    pub fn record(&self, id: &str) -> Option<&ImageRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    pub fn from_json<R: Read>(source: R) -> Result<Self, GazeError> {
        let m: Self =
            serde_json::from_reader(source).map_err(|e| GazeError::Manifest(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn to_json<W: Write>(&self, sink: W) -> Result<(), GazeError> {
        serde_json::to_writer_pretty(sink, self).map_err(|e| GazeError::Manifest(e.to_string()))
    }

    /// Per-class training counts keyed by class name.
    pub fn named_counts(&self) -> BTreeMap<String, usize> {
        self.class_names
            .iter()
            .cloned()
            .zip(self.class_counts())
            .collect()
    }
}

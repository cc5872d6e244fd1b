//! Named-tensor checkpoints.
//!
//! Layout, all integers little endian:
//!
//! ```text
//! "GZLT" | u32 version | u32 meta_len | meta JSON
//! u32 n_tensors | per tensor: u16 name_len, name, u8 rank, rank x u32 dims, f32 values
//! u64 FNV-1a of every preceding byte
//! ```

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::distill::{Student, StudentConfig};
use crate::teacher::{Teacher, TeacherConfig};
use crate::tensor::{ParamStore, Tensor};

use super::config::fnv1a64;
use super::PipelineError;

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"GZLT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Teacher,
    Student,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stage::Teacher => "teacher",
            Stage::Student => "student",
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("bad magic {0:?}")]
    BadMagic(Vec<u8>),
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("truncated checkpoint at offset {offset}: need {needed} bytes")]
    Truncated { offset: usize, needed: usize },
    #[error("checksum mismatch: stored {stored:016x}, computed {computed:016x}")]
    Checksum { stored: u64, computed: u64 },
    #[error("{0} trailing bytes after the checksum")]
    TrailingBytes(usize),
    #[error("metadata: {0}")]
    Meta(String),
    #[error("checkpoint holds a {found} stage, expected {expected}")]
    StageMismatch { expected: Stage, found: Stage },
    #[error("model config hash {found:016x} differs from the expected {expected:016x}")]
    ConfigMismatch { expected: u64, found: u64 },
    #[error("unknown tensor `{0}`")]
    UnknownTensor(String),
    #[error("missing tensor `{0}`")]
    MissingTensor(String),
    #[error("duplicate tensor `{0}`")]
    DuplicateTensor(String),
    #[error("tensor `{name}` has shape {found:?}, expected {expected:?}")]
    Shape {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("tensor `{0}` cannot be encoded: {1}")]
    Encode(String, &'static str),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub stage: Stage,
    pub seed: u64,
    /// FNV-1a of the JSON model config.
    pub config_hash: u64,
    pub model: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub tensors: Vec<(String, Tensor)>,
}

fn model_hash<T: Serialize>(model: &T) -> (u64, serde_json::Value) {
    let value = serde_json::to_value(model).expect("model config serializes");
    (fnv1a64(value.to_string().as_bytes()), value)
}

fn store_tensors(store: &ParamStore) -> impl Iterator<Item = (String, Tensor)> + '_ {
    store
        .iter()
        .map(|(_, p)| (p.name.clone(), p.tensor.clone()))
}

impl Checkpoint {
    pub fn from_teacher(teacher: &Teacher, seed: u64) -> Self {
        let (config_hash, model) = model_hash(&teacher.config);
        Self {
            meta: CheckpointMeta {
                stage: Stage::Teacher,
                seed,
                config_hash,
                model,
            },
            tensors: store_tensors(&teacher.twi)
                .chain(store_tensors(&teacher.twd))
                .collect(),
        }
    }

    pub fn from_student(student: &Student, seed: u64) -> Self {
        let (config_hash, model) = model_hash(&student.config);
        Self {
            meta: CheckpointMeta {
                stage: Stage::Student,
                seed,
                config_hash,
                model,
            },
            tensors: store_tensors(&student.params).collect(),
        }
    }

    fn expect(&self, stage: Stage, hash: u64) -> Result<(), CheckpointError> {
        if self.meta.stage != stage {
            return Err(CheckpointError::StageMismatch {
                expected: stage,
                found: self.meta.stage,
            });
        }
        if self.meta.config_hash != hash {
            return Err(CheckpointError::ConfigMismatch {
                expected: hash,
                found: self.meta.config_hash,
            });
        }
        Ok(())
    }

    /// Overwrite every parameter of `stores` from the checkpoint; each
    /// tensor must match exactly one parameter.
    fn fill(&self, stores: &mut [&mut ParamStore]) -> Result<(), CheckpointError> {
        let mut seen = std::collections::HashSet::new();
        for (name, tensor) in &self.tensors {
            if !seen.insert(name.as_str()) {
                return Err(CheckpointError::DuplicateTensor(name.clone()));
            }
            let slot = stores
                .iter_mut()
                .find_map(|s| s.find(name).map(|id| s.get_mut(id)))
                .ok_or_else(|| CheckpointError::UnknownTensor(name.clone()))?;
            if slot.tensor.shape() != tensor.shape() {
                return Err(CheckpointError::Shape {
                    name: name.clone(),
                    expected: slot.tensor.shape().to_vec(),
                    found: tensor.shape().to_vec(),
                });
            }
            slot.tensor = tensor.clone();
        }
        for store in stores.iter() {
            if let Some((_, p)) = store.iter().find(|(_, p)| !seen.contains(p.name.as_str())) {
                return Err(CheckpointError::MissingTensor(p.name.clone()));
            }
        }
        Ok(())
    }

    /// Rebuild a frozen teacher with architecture `config`.
    pub fn into_teacher(&self, config: TeacherConfig) -> Result<Teacher, PipelineError> {
        self.expect(Stage::Teacher, model_hash(&config).0)?;
        let mut teacher = Teacher::init(config, self.meta.seed)?;
        self.fill(&mut [&mut teacher.twi, &mut teacher.twd])?;
        teacher.freeze();
        Ok(teacher)
    }

    pub fn into_student(&self, config: StudentConfig) -> Result<Student, PipelineError> {
        self.expect(Stage::Student, model_hash(&config).0)?;
        let mut student = Student::init(config, self.meta.seed)?;
        self.fill(&mut [&mut student.params])?;
        Ok(student)
    }

    /// Model config stored in the metadata.
    pub fn model<T: serde::de::DeserializeOwned>(&self) -> Result<T, CheckpointError> {
        serde_json::from_value(self.meta.model.clone())
            .map_err(|e| CheckpointError::Meta(e.to_string()))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, CheckpointError> {
        let mut out = Vec::new();
        out.extend_from_slice(&CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        let meta =
            serde_json::to_vec(&self.meta).map_err(|e| CheckpointError::Meta(e.to_string()))?;
        out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
        out.extend_from_slice(&meta);
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, t) in &self.tensors {
            let name_len = u16::try_from(name.len())
                .map_err(|_| CheckpointError::Encode(name.clone(), "name too long"))?;
            let rank = u8::try_from(t.rank())
                .map_err(|_| CheckpointError::Encode(name.clone(), "rank above 255"))?;
            out.extend_from_slice(&name_len.to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(rank);
            for &d in t.shape() {
                let d = u32::try_from(d)
                    .map_err(|_| CheckpointError::Encode(name.clone(), "dimension above u32"))?;
                out.extend_from_slice(&d.to_le_bytes());
            }
            for &v in t.data() {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        let sum = fnv1a64(&out);
        out.extend_from_slice(&sum.to_le_bytes());
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let mut r = Cursor { bytes, pos: 0 };
        let magic = r.take(4)?;
        if magic != CHECKPOINT_MAGIC {
            return Err(CheckpointError::BadMagic(magic.to_vec()));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(CheckpointError::Version(version));
        }
        let meta_len = r.u32()? as usize;
        let meta: CheckpointMeta = serde_json::from_slice(r.take(meta_len)?)
            .map_err(|e| CheckpointError::Meta(e.to_string()))?;
        let count = r.u32()? as usize;
        let mut tensors = Vec::with_capacity(count.min(4096));
        for _ in 0..count {
            let name_len = u16::from_le_bytes(r.take(2)?.try_into().expect("2 bytes")) as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|e| CheckpointError::Meta(format!("tensor name: {e}")))?
                .to_string();
            let rank = r.take(1)?[0] as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(r.u32()? as usize);
            }
            let n: usize = shape.iter().product();
            let raw = r.take(n.checked_mul(4).ok_or(CheckpointError::Truncated {
                offset: r.pos,
                needed: usize::MAX,
            })?)?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes"))))
                .collect();
            let tensor =
                Tensor::new(&shape, data).map_err(|e| CheckpointError::Meta(e.to_string()))?;
            tensors.push((name, tensor));
        }
        let body_end = r.pos;
        let stored = u64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes"));
        let computed = fnv1a64(&bytes[..body_end]);
        if stored != computed {
            return Err(CheckpointError::Checksum { stored, computed });
        }
        if r.pos != bytes.len() {
            return Err(CheckpointError::TrailingBytes(bytes.len() - r.pos));
        }
        Ok(Self { meta, tensors })
    }

    pub fn write<W: Write>(&self, mut sink: W) -> Result<(), PipelineError> {
        sink.write_all(&self.to_bytes()?).map_err(PipelineError::Io)
    }

    pub fn read<R: Read>(mut source: R) -> Result<Self, PipelineError> {
        let mut bytes = Vec::new();
        source.read_to_end(&mut bytes).map_err(PipelineError::Io)?;
        Ok(Self::from_bytes(&bytes)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), PipelineError> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| PipelineError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let bytes = std::fs::read(path).map_err(|e| PipelineError::io(path, e))?;
        Ok(Self::from_bytes(&bytes)?)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or(CheckpointError::Truncated {
                offset: self.pos,
                needed: n,
            })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }
}

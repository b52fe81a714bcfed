use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// File header: `OPTCDS1` followed by a NUL byte.
pub const DATASET_MAGIC: &[u8; 8] = b"OPTCDS1\0";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Regression = 0,
    Classification = 1,
    Anomaly = 2,
}

impl TaskKind {
    fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(TaskKind::Regression),
            1 => Some(TaskKind::Classification),
            2 => Some(TaskKind::Anomaly),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    /// `len` float targets per sample (regression).
    Values { len: usize, data: Vec<f32> },
    /// One label per sample: a class index, or nonzero for "anomalous".
    Labels(Vec<u32>),
}

/// Test samples with their targets. Each row is one ready-made input vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    input_len: usize,
    inputs: Vec<f32>,
    targets: Targets,
    task: TaskKind,
}

impl Dataset {
    pub fn new(
        input_len: usize,
        inputs: Vec<f32>,
        targets: Targets,
        task: TaskKind,
    ) -> Result<Self> {
        if input_len == 0 || inputs.is_empty() || !inputs.len().is_multiple_of(input_len) {
            return Err(Error::Dataset(format!(
                "{} input values do not form rows of {input_len}",
                inputs.len()
            )));
        }
        let n = inputs.len() / input_len;
        match (&targets, task) {
            (Targets::Values { len, data }, TaskKind::Regression) => {
                if *len == 0 || data.len() != n * len {
                    return Err(Error::Dataset(format!(
                        "expected {n}×{len} regression targets, got {}",
                        data.len()
                    )));
                }
            }
            (Targets::Labels(labels), TaskKind::Classification | TaskKind::Anomaly) => {
                if labels.len() != n {
                    return Err(Error::Dataset(format!(
                        "expected {n} labels, got {}",
                        labels.len()
                    )));
                }
            }
            _ => {
                return Err(Error::Dataset(format!(
                    "target kind does not match task {task:?}"
                )))
            }
        }
        Ok(Dataset {
            input_len,
            inputs,
            targets,
            task,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len() / self.input_len
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input_len(&self) -> usize {
        self.input_len
    }

    pub fn task(&self) -> TaskKind {
        self.task
    }

    pub fn targets(&self) -> &Targets {
        &self.targets
    }

    pub fn input(&self, i: usize) -> &[f32] {
        &self.inputs[i * self.input_len..(i + 1) * self.input_len]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.inputs.chunks_exact(self.input_len)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |msg: &str| Error::Dataset(msg.to_string());
        if bytes.len() < 24 || &bytes[..8] != DATASET_MAGIC {
            return Err(bad("missing OPTCDS1 header"));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[8 + 4 * i..12 + 4 * i].try_into().unwrap());
        let (n, input_len, target_len) = (word(0) as usize, word(1) as usize, word(2) as usize);
        let task = TaskKind::from_code(word(3)).ok_or_else(|| bad("unknown task kind"))?;
        if n == 0 {
            return Err(bad("dataset has no samples"));
        }
        let target_words = match task {
            TaskKind::Regression => n * target_len,
            _ => {
                if target_len != 1 {
                    return Err(bad("label datasets must declare target_len 1"));
                }
                n
            }
        };
        let body = &bytes[24..];
        let expected = 4 * (n * input_len + target_words);
        if body.len() != expected {
            return Err(Error::Dataset(format!(
                "body has {} bytes, header implies {expected}",
                body.len()
            )));
        }
        let mut words = body.chunks_exact(4).map(|c| [c[0], c[1], c[2], c[3]]);
        let inputs: Vec<f32> = words
            .by_ref()
            .take(n * input_len)
            .map(f32::from_le_bytes)
            .collect();
        let targets = match task {
            TaskKind::Regression => Targets::Values {
                len: target_len,
                data: words.map(f32::from_le_bytes).collect(),
            },
            _ => Targets::Labels(words.map(u32::from_le_bytes).collect()),
        };
        Dataset::new(input_len, inputs, targets, task)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let target_len = match &self.targets {
            Targets::Values { len, .. } => *len,
            Targets::Labels(_) => 1,
        };
        let mut out = Vec::with_capacity(24 + 4 * self.inputs.len());
        out.extend_from_slice(DATASET_MAGIC);
        for w in [self.len(), self.input_len, target_len, self.task as usize] {
            out.extend_from_slice(&(w as u32).to_le_bytes());
        }
        for v in &self.inputs {
            out.extend_from_slice(&v.to_le_bytes());
        }
        match &self.targets {
            Targets::Values { data, .. } => data
                .iter()
                .for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
            Targets::Labels(l) => l
                .iter()
                .for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
        }
        out
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::file(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::file(path, e))
    }
}

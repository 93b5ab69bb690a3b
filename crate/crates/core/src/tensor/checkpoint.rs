//! Binary checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic      8 bytes  "ASCCKPT\0"
//! version    u32
//! header_len u64
//! header     header_len bytes of UTF-8 JSON (names, shapes, optimizer layout, seed, digest)
//! payload    f64 values: every parameter in store order, then optimizer slots
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::optim::{Optimizer, OptimizerKind, Slot};
use super::params::ParamStore;
use super::Tensor;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"ASCCKPT\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub seed: u64,
    pub config_digest: String,
    pub metadata: serde_json::Value,
    pub params: ParamStore,
    pub optimizer: Option<Optimizer>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    seed: u64,
    config_digest: String,
    metadata: serde_json::Value,
    params: Vec<ParamEntry>,
    optimizer: Option<OptimizerEntry>,
}

#[derive(Serialize, Deserialize)]
struct ParamEntry {
    name: String,
    shape: Vec<usize>,
    trainable: bool,
}

#[derive(Serialize, Deserialize)]
struct OptimizerEntry {
    kind: OptimizerKind,
    steps: u64,
    /// `(first_len, second_len)` per parameter; absent slots are `None`.
    slots: Vec<Option<(usize, usize)>>,
}

impl Checkpoint {
    pub fn new(params: ParamStore) -> Self {
        Self {
            seed: 0,
            config_digest: String::new(),
            metadata: serde_json::Value::Null,
            params,
            optimizer: None,
        }
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let header = Header {
            format_version: FORMAT_VERSION,
            seed: self.seed,
            config_digest: self.config_digest.clone(),
            metadata: self.metadata.clone(),
            params: self
                .params
                .iter()
                .map(|(_, p)| ParamEntry {
                    name: p.name.clone(),
                    shape: p.value.shape().to_vec(),
                    trainable: p.trainable,
                })
                .collect(),
            optimizer: self.optimizer.as_ref().map(|o| OptimizerEntry {
                kind: o.kind,
                steps: o.steps,
                slots: o
                    .slots
                    .iter()
                    .map(|s| s.as_ref().map(|s| (s.first.len(), s.second.len())))
                    .collect(),
            }),
        };
        let header = serde_json::to_vec(&header)?;
        let io = |e| Error::Checkpoint(format!("write failed: {e}"));
        w.write_all(MAGIC).map_err(io)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes()).map_err(io)?;
        w.write_all(&(header.len() as u64).to_le_bytes()).map_err(io)?;
        w.write_all(&header).map_err(io)?;
        let mut put = |vals: &[f64]| -> Result<()> {
            for v in vals {
                w.write_all(&v.to_le_bytes()).map_err(io)?;
            }
            Ok(())
        };
        for (_, p) in self.params.iter() {
            put(p.value.data())?;
        }
        if let Some(o) = &self.optimizer {
            for slot in o.slots.iter().flatten() {
                put(&slot.first)?;
                put(&slot.second)?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let io = |e: std::io::Error| Error::Checkpoint(format!("truncated or unreadable: {e}"));
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(io)?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint("bad magic, not a checkpoint file".into()));
        }
        let mut u32b = [0u8; 4];
        r.read_exact(&mut u32b).map_err(io)?;
        let version = u32::from_le_bytes(u32b);
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {version} (expected {FORMAT_VERSION})"
            )));
        }
        let mut u64b = [0u8; 8];
        r.read_exact(&mut u64b).map_err(io)?;
        let len = u64::from_le_bytes(u64b) as usize;
        let mut hbytes = vec![0u8; len];
        r.read_exact(&mut hbytes).map_err(io)?;
        let header: Header = serde_json::from_slice(&hbytes)?;
        if header.format_version != version {
            return Err(Error::Checkpoint("header version disagrees with preamble".into()));
        }

        let mut take = |n: usize| -> Result<Vec<f64>> {
            let mut buf = vec![0u8; n * 8];
            r.read_exact(&mut buf).map_err(io)?;
            Ok(buf
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect())
        };

        let mut params = ParamStore::new();
        for entry in &header.params {
            let n = entry.shape.iter().product();
            let t = Tensor::new(entry.shape.clone(), take(n)?)?;
            let id = params.add(entry.name.clone(), t)?;
            params.set_trainable(id, entry.trainable);
        }
        let optimizer = match header.optimizer {
            None => None,
            Some(o) => {
                let mut slots = Vec::with_capacity(o.slots.len());
                for s in o.slots {
                    slots.push(match s {
                        None => None,
                        Some((a, b)) => Some(Slot {
                            first: take(a)?,
                            second: take(b)?,
                        }),
                    });
                }
                Some(Optimizer {
                    kind: o.kind,
                    steps: o.steps,
                    slots,
                })
            }
        };
        let mut rest = Vec::new();
        r.read_to_end(&mut rest).map_err(io)?;
        if !rest.is_empty() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", rest.len())));
        }
        Ok(Self {
            seed: header.seed,
            config_digest: header.config_digest,
            metadata: header.metadata,
            params,
            optimizer,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        self.write_to(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(BufReader::new(f))
    }
}

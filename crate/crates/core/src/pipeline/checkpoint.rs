//! Binary checkpoint layout, all integers little-endian:
//!
//! ```text
//! "DASR" | u32 version | u8 stage | u32 len + config JSON | u32 count |
//! count × { u16 len + name | u8 rank | rank × u32 dim | f32 payload }
//! ```
//!
//! Tensors are stored in sorted-name order.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::config::{Stage, TrainConfig};
use crate::error::{Error, Result};
use crate::models::Module;
use crate::tensor::{Parameter, Tensor};

pub const MAGIC: [u8; 4] = *b"DASR";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub stage: Stage,
    pub config: TrainConfig,
    pub tensors: BTreeMap<String, Tensor>,
}

impl Checkpoint {
    pub fn new(stage: Stage, config: TrainConfig) -> Self {
        Self {
            stage,
            config,
            tensors: BTreeMap::new(),
        }
    }

    /// Snapshot the current values of `module`'s parameters.
    pub fn insert_module(&mut self, module: &dyn Module) {
        for Parameter { name, tensor } in module.parameters() {
            self.tensors.insert(name, tensor.detach());
        }
    }

    /// Tensors whose names start with `prefix`.
    pub fn subset(&self, prefix: &str) -> BTreeMap<String, Tensor> {
        self.tensors
            .iter()
            .filter(|(k, _)| k.starts_with(prefix))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect()
    }

    /// Load `module`'s parameters, requiring the checkpoint to hold exactly
    /// the tensors under `prefix` that the module enumerates.
    pub fn restore(&self, module: &dyn Module, prefix: &str) -> Result<()> {
        let subset = self.subset(prefix);
        let names: Vec<String> = module.parameters().into_iter().map(|p| p.name).collect();
        if let Some(extra) = subset.keys().find(|k| !names.contains(k)) {
            return Err(Error::State(format!(
                "checkpoint tensor {extra} is unknown to the model"
            )));
        }
        module.load_parameters(&subset)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(self.stage.tag());
        let cfg = self.config.to_json();
        out.extend_from_slice(&(cfg.len() as u32).to_le_bytes());
        out.extend_from_slice(cfg.as_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, t) in &self.tensors {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(t.rank() as u8);
            for &d in t.shape() {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for v in t.data().iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        let magic: [u8; 4] = r.take(4, "magic")?.try_into().expect("4 bytes");
        if magic != MAGIC {
            return Err(Error::BadMagic(magic));
        }
        let version = r.u32("version")?;
        if version != VERSION {
            return Err(Error::VersionMismatch {
                found: version,
                expected: VERSION,
            });
        }
        let tag = r.take(1, "stage tag")?[0];
        let stage = Stage::from_tag(tag).ok_or_else(|| Error::Corrupt(format!("unknown stage tag {tag}")))?;
        let len = r.u32("config length")? as usize;
        let cfg =
            std::str::from_utf8(r.take(len, "config")?).map_err(|_| Error::Corrupt("config is not UTF-8".into()))?;
        let config = TrainConfig::from_json(cfg)?;
        let count = r.u32("tensor count")?;
        let mut tensors = BTreeMap::new();
        let mut last: Option<String> = None;
        for _ in 0..count {
            let len = usize::from(r.u16("name length")?);
            let name = std::str::from_utf8(r.take(len, "tensor name")?)
                .map_err(|_| Error::Corrupt("tensor name is not UTF-8".into()))?
                .to_string();
            if last.as_ref().is_some_and(|l| *l >= name) {
                return Err(Error::Corrupt(format!("tensor {name} is out of sorted order")));
            }
            let rank = usize::from(r.take(1, "rank")?[0]);
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(r.u32("dims")? as usize);
            }
            let n: usize = shape.iter().product();
            let payload = r.take(n * 4, &format!("payload of {name}"))?;
            let data = payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            tensors.insert(name.clone(), Tensor::new(data, &shape)?);
            last = Some(name);
        }
        if r.pos != bytes.len() {
            return Err(Error::Corrupt(format!(
                "{} trailing bytes: a tensor's dims disagree with its payload",
                bytes.len() - r.pos
            )));
        }
        Ok(Self { stage, config, tensors })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// SHA-256 of the serialized form, hex-encoded.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_bytes()))
    }
}

/// SHA-256 over names and values of `params`, for freeze checks.
pub fn parameter_digest(params: &[Parameter]) -> String {
    let mut h = Sha256::new();
    for p in params {
        h.update(p.name.as_bytes());
        for v in p.tensor.data().iter() {
            h.update(v.to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Truncated(what.to_string()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().expect("2 bytes")))
    }
}

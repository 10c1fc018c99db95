//! Binary checkpoint container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic    8 bytes  "ANYRESCK"
//! version  u32
//! meta     u32 length + UTF-8 JSON (phase, step, seed, config hash, architecture)
//! count    u32 number of blobs
//! blob     u32 name length + name, u32 rank, rank x u64 dims, f64 values
//! trailer  32-byte SHA-256 of everything before it
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::discriminator::{Discriminator, DiscriminatorConfig};
use super::generator::{Generator, GeneratorConfig};
use crate::error::{Error, Result};
use crate::geometry::FourierBasis;
use crate::nn::{Params, Tensor};

pub const MAGIC: &[u8; 8] = b"ANYRESCK";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointMeta {
    pub phase: u32,
    pub step: u64,
    pub seed: u64,
    pub config_hash: String,
    pub generator: GeneratorConfig,
    pub discriminator: DiscriminatorConfig,
    /// Free-form state owned by the caller (training counters and the like).
    #[serde(default)]
    pub extra: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub blobs: Vec<(String, Tensor)>,
}

impl Checkpoint {
    pub fn new(meta: CheckpointMeta) -> Self {
        Self {
            meta,
            blobs: Vec::new(),
        }
    }

    /// Append every tensor of `model` under `prefix.`.
    pub fn push_params<P: Params>(&mut self, prefix: &str, model: &P) {
        model.visit(&mut |name, t| self.blobs.push((format!("{prefix}.{name}"), t.clone())));
    }

    pub fn push_generator(&mut self, prefix: &str, g: &Generator) {
        let k = g.basis.channels();
        let freq = g.basis.frequencies.iter().flatten().copied().collect();
        self.blobs.push((
            format!("{prefix}.basis.frequencies"),
            Tensor {
                shape: vec![k, 2],
                data: freq,
            },
        ));
        self.blobs.push((
            format!("{prefix}.basis.phases"),
            Tensor {
                shape: vec![k],
                data: g.basis.phases.clone(),
            },
        ));
        self.push_params(prefix, g);
    }

    pub fn blob(&self, name: &str) -> Result<&Tensor> {
        self.blobs
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
            .ok_or_else(|| Error::CorruptCheckpoint(format!("missing blob {name}")))
    }

    pub fn has_prefix(&self, prefix: &str) -> bool {
        let p = format!("{prefix}.");
        self.blobs.iter().any(|(n, _)| n.starts_with(&p))
    }

    /// Overwrite every tensor of `model` from blobs under `prefix.`.
    pub fn load_params<P: Params>(&self, prefix: &str, model: &mut P) -> Result<()> {
        let mut err = None;
        model.visit_mut(&mut |name, t| {
            if err.is_some() {
                return;
            }
            match self.blob(&format!("{prefix}.{name}")) {
                Ok(b) if b.shape == t.shape => t.data.copy_from_slice(&b.data),
                Ok(b) => {
                    err = Some(Error::CorruptCheckpoint(format!(
                        "blob {prefix}.{name} has shape {:?}, expected {:?}",
                        b.shape, t.shape
                    )))
                }
                Err(e) => err = Some(e),
            }
        });
        err.map_or(Ok(()), Err)
    }

    pub fn generator(&self, prefix: &str) -> Result<Generator> {
        let mut g = Generator::new(self.meta.generator.clone(), &mut placeholder_rng())?;
        let freq = self.blob(&format!("{prefix}.basis.frequencies"))?;
        let phases = self.blob(&format!("{prefix}.basis.phases"))?;
        if freq.shape != [g.basis.channels(), 2] || phases.shape != [g.basis.channels()] {
            return Err(Error::CorruptCheckpoint("Fourier basis shape mismatch".into()));
        }
        g.basis = FourierBasis {
            frequencies: freq.data.chunks_exact(2).map(|c| [c[0], c[1]]).collect(),
            phases: phases.data.clone(),
        };
        self.load_params(prefix, &mut g)?;
        Ok(g)
    }

    pub fn discriminator(&self, prefix: &str) -> Result<Discriminator> {
        let mut d = Discriminator::new(self.meta.discriminator.clone(), &mut placeholder_rng())?;
        self.load_params(prefix, &mut d)?;
        Ok(d)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        let meta = serde_json::to_vec(&self.meta)?;
        out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
        out.extend_from_slice(&meta);
        out.extend_from_slice(&(self.blobs.len() as u32).to_le_bytes());
        for (name, t) in &self.blobs {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
            for d in &t.shape {
                out.extend_from_slice(&(*d as u64).to_le_bytes());
            }
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let corrupt = |m: &str| Error::CorruptCheckpoint(m.to_string());
        if bytes.len() < 12 || &bytes[..8] != MAGIC {
            return Err(corrupt("bad magic"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != VERSION {
            return Err(Error::VersionMismatch {
                found: version,
                expected: VERSION,
            });
        }
        if bytes.len() < 12 + 32 {
            return Err(corrupt("truncated"));
        }
        let (body, trailer) = bytes.split_at(bytes.len() - 32);
        if Sha256::digest(body).as_slice() != trailer {
            return Err(corrupt("checksum mismatch (truncated or modified file)"));
        }
        let mut r = Reader { buf: body, pos: 12 };
        let meta_len = r.u32()? as usize;
        let meta: CheckpointMeta = serde_json::from_slice(r.take(meta_len)?)?;
        let count = r.u32()? as usize;
        let mut blobs = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let n = r.u32()? as usize;
            let name = String::from_utf8(r.take(n)?.to_vec()).map_err(|_| corrupt("blob name is not UTF-8"))?;
            let rank = r.u32()? as usize;
            let mut shape = Vec::with_capacity(rank.min(8));
            for _ in 0..rank {
                shape.push(r.u64()? as usize);
            }
            let len = shape
                .iter()
                .try_fold(1usize, |a, &d| a.checked_mul(d))
                .ok_or_else(|| corrupt("blob size overflow"))?;
            let raw = r.take(len.checked_mul(8).ok_or_else(|| corrupt("blob size overflow"))?)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            blobs.push((name, Tensor { shape, data }));
        }
        if r.pos != body.len() {
            return Err(corrupt("trailing bytes"));
        }
        Ok(Self { meta, blobs })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes = self.to_bytes()?;
        // Write then rename so an interrupted save never leaves a partial file.
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

// Constructing a model draws random weights; they are all overwritten.
fn placeholder_rng() -> rand_chacha::ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(0)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::CorruptCheckpoint("truncated".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

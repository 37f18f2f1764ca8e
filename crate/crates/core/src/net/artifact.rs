//! Saved models.
//!
//! Binary layout (little-endian):
//!
//! ```text
//! magic        8 bytes  "PCGNET\0\0"
//! version      u32
//! direction    u8       0 = speaker, 1 = listener
//! activation   u8       0 = identity, 1 = relu
//! embed_dim    u32
//! hidden       u32
//! seed         u64
//! config_len   u32
//! config       config_len bytes of JSON (TrainConfig)
//! param_count  u64
//! params       param_count f64 values
//! ```
//!
//! The JSON form is the serde encoding of [`ModelArtifact`].

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{param_count, Activation, Direction, SpeakerNet, TrainConfig};
use crate::error::{Error, Result};

pub const ARTIFACT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"PCGNET\0\0";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub version: u32,
    pub direction: Direction,
    pub config: TrainConfig,
    pub net: SpeakerNet,
}

impl ModelArtifact {
    pub fn new(direction: Direction, config: TrainConfig, net: SpeakerNet) -> Self {
        ModelArtifact {
            version: ARTIFACT_VERSION,
            direction,
            config,
            net,
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let config = serde_json::to_vec(&self.config)?;
        let params = self.net.params();
        let mut out = Vec::with_capacity(48 + config.len() + 8 * params.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&self.version.to_le_bytes());
        out.push(match self.direction {
            Direction::Speaker => 0,
            Direction::Listener => 1,
        });
        out.push(match self.net.activation() {
            Activation::Identity => 0,
            Activation::Relu => 1,
        });
        out.extend_from_slice(&u32_field(self.net.embed_dim())?.to_le_bytes());
        out.extend_from_slice(&u32_field(self.net.hidden())?.to_le_bytes());
        out.extend_from_slice(&self.config.seed.to_le_bytes());
        out.extend_from_slice(&u32_field(config.len())?.to_le_bytes());
        out.extend_from_slice(&config);
        out.extend_from_slice(&(params.len() as u64).to_le_bytes());
        for p in params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Artifact("bad magic".into()));
        }
        let version = r.u32()?;
        if version != ARTIFACT_VERSION {
            return Err(Error::Artifact(format!("unsupported version {version}")));
        }
        let direction = match r.u8()? {
            0 => Direction::Speaker,
            1 => Direction::Listener,
            other => return Err(Error::Artifact(format!("bad direction tag {other}"))),
        };
        let activation = match r.u8()? {
            0 => Activation::Identity,
            1 => Activation::Relu,
            other => return Err(Error::Artifact(format!("bad activation tag {other}"))),
        };
        let embed_dim = r.u32()? as usize;
        let hidden = r.u32()? as usize;
        let seed = r.u64()?;
        let config_len = r.u32()? as usize;
        let config: TrainConfig = serde_json::from_slice(r.take(config_len)?)?;
        if config.seed != seed {
            return Err(Error::Artifact("seed does not match config".into()));
        }
        let count = r.u64()? as usize;
        if embed_dim == 0 || hidden == 0 || count != param_count(embed_dim, hidden) {
            return Err(Error::Artifact(format!(
                "parameter count {count} does not match shapes {embed_dim}x{hidden}"
            )));
        }
        let params = (0..count)
            .map(|_| r.take(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())))
            .collect::<Result<Vec<_>>>()?;
        if r.pos != bytes.len() {
            return Err(Error::Artifact("trailing bytes".into()));
        }
        let net = SpeakerNet::from_params(embed_dim, hidden, activation, params)
            .map_err(|e| Error::Artifact(e.to_string()))?;
        Ok(ModelArtifact {
            version,
            direction,
            config,
            net,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let artifact: ModelArtifact = serde_json::from_str(text)?;
        if artifact.version != ARTIFACT_VERSION {
            return Err(Error::Artifact(format!(
                "unsupported version {}",
                artifact.version
            )));
        }
        // Re-validate shapes, which serde does not check.
        let net = &artifact.net;
        SpeakerNet::from_params(
            net.embed_dim(),
            net.hidden(),
            net.activation(),
            net.params().to_vec(),
        )
        .map_err(|e| Error::Artifact(e.to_string()))?;
        Ok(artifact)
    }

    /// Saves as JSON when the path ends in `.json`, binary otherwise.
    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = if is_json(path) {
            self.to_json()?.into_bytes()
        } else {
            self.to_bytes()?
        };
        fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        if is_json(path) {
            let text = String::from_utf8(bytes)
                .map_err(|_| Error::Artifact("JSON artifact is not UTF-8".into()))?;
            ModelArtifact::from_json(&text)
        } else {
            ModelArtifact::from_bytes(&bytes)
        }
    }
}

fn is_json(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

fn u32_field(v: usize) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Artifact(format!("{v} does not fit in u32")))
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Artifact("truncated artifact".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

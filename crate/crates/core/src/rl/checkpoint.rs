use std::path::Path;

use serde::{Deserialize, Serialize};

use super::net::{Architecture, PolicyValueNets};
use super::RlError;

pub const MAGIC: &[u8; 4] = b"DRCK";
pub const FORMAT_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub version: u64,
    pub episodes: u64,
    pub steps: u64,
    pub created_unix_ms: u64,
    /// Configuration text in the shared key/value format.
    pub config: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    #[serde(flatten)]
    meta: CheckpointMeta,
    architecture: Architecture,
    action_count: usize,
    dropout_p: f64,
    params: Vec<ParamEntry>,
}

/// An immutable parameter snapshot of both networks.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub nets: PolicyValueNets<f32>,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            meta: self.meta.clone(),
            architecture: self.nets.architecture,
            action_count: self.nets.action_count,
            dropout_p: self.nets.dropout_p(),
            params: self
                .nets
                .params()
                .map(|p| ParamEntry { name: p.name.clone(), shape: p.tensor.shape().to_vec() })
                .collect(),
        };
        let json = serde_json::to_vec(&header).expect("checkpoint header serialises");
        let mut out = Vec::with_capacity(14 + json.len() + 4 * self.nets.param_count());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for p in self.nets.params() {
            for v in p.tensor.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    /// Parses and verifies a checkpoint; nothing is returned unless the
    /// checksum and every parameter shape agree.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, RlError> {
        if bytes.len() < 14 {
            return Err(RlError::Truncated);
        }
        if &bytes[..4] != MAGIC {
            return Err(RlError::BadMagic);
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().expect("four bytes"));
        let actual = crc32fast::hash(body);
        if stored != actual {
            return Err(RlError::Checksum { stored, actual });
        }
        let format = u16::from_le_bytes([body[4], body[5]]);
        if format != FORMAT_VERSION {
            return Err(RlError::UnsupportedFormat(format));
        }
        let meta_len = u32::from_le_bytes(body[6..10].try_into().expect("four bytes")) as usize;
        let json = body.get(10..10 + meta_len).ok_or(RlError::Truncated)?;
        let header: Header = serde_json::from_slice(json).map_err(|e| RlError::Metadata(e.to_string()))?;
        let mut nets = PolicyValueNets::<f32>::zeros(header.architecture, header.action_count, header.dropout_p)?;
        let mut blobs = &body[10 + meta_len..];
        let params: Vec<_> = nets.params_mut().collect();
        if params.len() != header.params.len() {
            return Err(RlError::Metadata(format!(
                "{} parameter tensors declared, architecture has {}",
                header.params.len(),
                params.len()
            )));
        }
        for (p, entry) in params.into_iter().zip(&header.params) {
            if p.name != entry.name || p.tensor.shape() != entry.shape.as_slice() {
                return Err(RlError::Metadata(format!("unexpected parameter `{}` {:?}", entry.name, entry.shape)));
            }
            let n = p.tensor.len() * 4;
            if blobs.len() < n {
                return Err(RlError::Truncated);
            }
            let (blob, rest) = blobs.split_at(n);
            for (v, chunk) in p.tensor.data_mut().iter_mut().zip(blob.chunks_exact(4)) {
                *v = f32::from_le_bytes(chunk.try_into().expect("four bytes"));
            }
            blobs = rest;
        }
        if !blobs.is_empty() {
            return Err(RlError::Metadata(format!("{} trailing bytes", blobs.len())));
        }
        Ok(Checkpoint { meta: header.meta, nets })
    }

    /// Writes via a temporary file and rename so readers never see a
    /// partial file.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), RlError> {
        let path = path.as_ref();
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.to_bytes())?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RlError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rl::net::Mode;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample(arch: Architecture) -> Checkpoint {
        let nets = PolicyValueNets::new(arch, 10, 0.3, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        Checkpoint {
            meta: CheckpointMeta { version: 3, episodes: 60, steps: 4321, created_unix_ms: 17, config: "seed = 1\n".into() },
            nets,
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        for arch in [Architecture::features(), Architecture::image(64, 48)] {
            let ck = sample(arch);
            let back = Checkpoint::from_bytes(&ck.to_bytes()).unwrap();
            assert_eq!(back, ck);
            let x: Vec<f32> = (0..arch.input_len()).map(|i| (i % 13) as f32 / 13.0).collect();
            let a = ck.nets.forward_policy(&x, Mode::Eval).unwrap().logits;
            let b = back.nets.forward_policy(&x, Mode::Eval).unwrap().logits;
            assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        }
    }

    #[test]
    fn corruption_is_detected() {
        let bytes = sample(Architecture::features()).to_bytes();
        for cut in [bytes.len() - 1, bytes.len() / 2, 20] {
            assert!(matches!(Checkpoint::from_bytes(&bytes[..cut]), Err(RlError::Checksum { .. })));
        }
        assert!(matches!(Checkpoint::from_bytes(&bytes[..5]), Err(RlError::Truncated)));
        let mut flipped = bytes.clone();
        flipped[200] ^= 1;
        assert!(matches!(Checkpoint::from_bytes(&flipped), Err(RlError::Checksum { .. })));
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(matches!(Checkpoint::from_bytes(&magic), Err(RlError::BadMagic)));
        let mut format = bytes[..bytes.len() - 4].to_vec();
        format[4] = 9;
        let crc = crc32fast::hash(&format);
        format.extend_from_slice(&crc.to_le_bytes());
        assert!(matches!(Checkpoint::from_bytes(&format), Err(RlError::UnsupportedFormat(9))));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.drck");
        let ck = sample(Architecture::features());
        ck.save(&path).unwrap();
        assert_eq!(Checkpoint::load(&path).unwrap(), ck);
    }
}

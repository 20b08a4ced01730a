//! Model checkpoints.
//!
//! ```text
//! "CANCKPT1"                    8-byte magic
//! u32 version
//! u64 len, utf-8 descriptor     architecture, e.g. "16x1|conv1d(5,5,1)|relu|..."
//! u64 seed
//! [u8; 32] config digest        SHA-256 of the training configuration text
//! per trainable layer, in order:
//!     u64 n, f64[n] weights
//!     u64 n, f64[n] biases
//! u64 n, (f64 min, f64 max)[n]  normalization params
//! ```
//!
//! All integers and floats are little-endian.

use std::fs;
use std::io;
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use canids_core::ingest::NormalizationParams;
use canids_core::nn::Network;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"CANCKPT1";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("checkpoint version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("checkpoint i/o failed: {0}")]
    IoFailure(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub network: Network,
    pub norm: NormalizationParams,
    pub seed: u64,
    pub config_digest: [u8; 32],
}

pub fn config_digest(config_text: &str) -> [u8; 32] {
    Sha256::digest(config_text.as_bytes()).into()
}

fn put_f64s(out: &mut Vec<u8>, values: &[f64]) {
    out.extend_from_slice(&(values.len() as u64).to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        let desc = self.network.descriptor();
        out.extend_from_slice(&(desc.len() as u64).to_le_bytes());
        out.extend_from_slice(desc.as_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&self.config_digest);
        for p in self.network.params().iter().flatten() {
            put_f64s(&mut out, &p.weights);
            put_f64s(&mut out, &p.biases);
        }
        out.extend_from_slice(&(self.norm.ranges.len() as u64).to_le_bytes());
        for &(lo, hi) in &self.norm.ranges {
            out.extend_from_slice(&lo.to_le_bytes());
            out.extend_from_slice(&hi.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self, CheckpointError> {
        let mut r = Reader { buf, pos: 0 };
        if r.take(8)? != CHECKPOINT_MAGIC {
            return Err(CheckpointError::CorruptCheckpoint("bad magic".into()));
        }
        let version = u32::from_le_bytes(r.take(4)?.try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(CheckpointError::VersionMismatch { found: version, expected: CHECKPOINT_VERSION });
        }
        let desc_len = r.len()?;
        let desc = std::str::from_utf8(r.take(desc_len)?).map_err(|_| corrupt("descriptor is not utf-8"))?;
        let mut network = Network::from_descriptor(desc).map_err(|e| corrupt(&format!("descriptor: {e}")))?;
        let seed = r.u64()?;
        let config_digest: [u8; 32] = r.take(32)?.try_into().unwrap();
        for p in network.params_mut().iter_mut().flatten() {
            let w = r.f64s()?;
            let b = r.f64s()?;
            if w.len() != p.weights.len() || b.len() != p.biases.len() {
                return Err(corrupt("layer size disagrees with descriptor"));
            }
            p.weights = w;
            p.biases = b;
        }
        let n = r.len()?;
        if n.saturating_mul(16) > r.remaining() {
            return Err(corrupt("normalization count exceeds file size"));
        }
        let ranges = (0..n).map(|_| Ok((r.f64()?, r.f64()?))).collect::<Result<Vec<_>, CheckpointError>>()?;
        if r.remaining() != 0 {
            return Err(corrupt("trailing bytes"));
        }
        Ok(Self { network, norm: NormalizationParams { ranges }, seed, config_digest })
    }
}

fn corrupt(msg: &str) -> CheckpointError {
    CheckpointError::CorruptCheckpoint(msg.to_string())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| corrupt("truncated"))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn len(&mut self) -> Result<usize, CheckpointError> {
        usize::try_from(self.u64()?).map_err(|_| corrupt("length overflow"))
    }

    fn f64(&mut self) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self) -> Result<Vec<f64>, CheckpointError> {
        let n = self.len()?;
        if n.saturating_mul(8) > self.remaining() {
            return Err(corrupt("array length exceeds file size"));
        }
        (0..n).map(|_| self.f64()).collect()
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<(), CheckpointError> {
    fs::write(path, ckpt.to_bytes())?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    Checkpoint::from_bytes(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use canids_core::nn::Tensor;
    use canids_core::plenet::build_plenet;

    fn sample() -> Checkpoint {
        Checkpoint {
            network: build_plenet(3),
            norm: NormalizationParams { ranges: vec![(0.0, 2047.0), (0.0, 8.0)] },
            seed: 3,
            config_digest: config_digest("epochs = 10\n"),
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let ck = sample();
        save_checkpoint(&ck, &path).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back, ck);
        let x = Tensor::seq(16, 1, (0..16).map(|i| i as f64 / 16.0).collect());
        let (a, b) = (ck.network.forward(&x).unwrap(), back.network.forward(&x).unwrap());
        assert!(a.data().iter().zip(b.data()).all(|(p, q)| p.to_bits() == q.to_bits()));
    }

    #[test]
    fn truncation_is_corrupt() {
        let bytes = sample().to_bytes();
        for cut in [0, 5, 12, 40, bytes.len() / 2, bytes.len() - 1] {
            assert!(matches!(Checkpoint::from_bytes(&bytes[..cut]), Err(CheckpointError::CorruptCheckpoint(_))), "cut {cut}");
        }
    }

    #[test]
    fn version_is_checked() {
        let mut bytes = sample().to_bytes();
        bytes[8] = 2;
        assert!(matches!(Checkpoint::from_bytes(&bytes), Err(CheckpointError::VersionMismatch { found: 2, expected: 1 })));
    }

    #[test]
    fn missing_file_is_io_failure() {
        assert!(matches!(load_checkpoint(Path::new("/nonexistent/dir/m.ckpt")), Err(CheckpointError::IoFailure(_))));
    }
}

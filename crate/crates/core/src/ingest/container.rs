//! Flat binary container for prepared datasets.
//!
//! ```text
//! "CANIDS1"                         7-byte magic
//! u64 feature_len                   little-endian
//! u64 n_train, u64 n_val, u64 n_test
//! per partition (train, val, test):
//!     f64[n * feature_len]          row-major features
//!     u8[n]                         labels, 0 = normal, 1 = attack
//! u64 n_ranges
//! (f64 min, f64 max)[n_ranges]      normalization params
//! optional trailer:
//!     "KINDS"                       5-byte tag
//!     u8[n_train + n_val + n_test]  0 = none, 1 flooding, 2 fuzzing, 3 spoofing
//! ```
//!
//! The trailer is written only when at least one row carries attack-kind metadata.

use std::io::{self, Read, Write};

use super::features::{FeatureVector, NormalizationParams, FEATURE_LEN};
use super::split::{PreparedDataset, Provenance};
use crate::canbus::{AttackKind, Label};

pub const DATASET_MAGIC: &[u8; 7] = b"CANIDS1";
const KINDS_TAG: &[u8; 5] = b"KINDS";

#[derive(Debug, thiserror::Error)]
pub enum ContainerError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("not a dataset container (bad magic)")]
    BadMagic,
    #[error("corrupt dataset container: {0}")]
    Corrupt(String),
}

pub fn write_dataset<W: Write>(mut out: W, ds: &PreparedDataset) -> io::Result<()> {
    out.write_all(DATASET_MAGIC)?;
    out.write_all(&(FEATURE_LEN as u64).to_le_bytes())?;
    let parts = [&ds.train, &ds.validation, &ds.test];
    for p in parts {
        out.write_all(&(p.len() as u64).to_le_bytes())?;
    }
    for p in parts {
        for fv in p.iter() {
            for v in fv.x {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        let labels: Vec<u8> = p.iter().map(|fv| fv.y.bit()).collect();
        out.write_all(&labels)?;
    }
    out.write_all(&(ds.norm.ranges.len() as u64).to_le_bytes())?;
    for &(lo, hi) in &ds.norm.ranges {
        out.write_all(&lo.to_le_bytes())?;
        out.write_all(&hi.to_le_bytes())?;
    }
    if parts.iter().any(|p| p.iter().any(|fv| fv.kind.is_some())) {
        out.write_all(KINDS_TAG)?;
        let tags: Vec<u8> = parts.iter().flat_map(|p| p.iter().map(|fv| fv.kind.map_or(0, AttackKind::tag))).collect();
        out.write_all(&tags)?;
    }
    out.flush()
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ContainerError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| ContainerError::Corrupt(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64, ContainerError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, ContainerError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

/// Reads a container. Provenance is not stored in the container; `source`
/// and `seed` are supplied by the caller (typically from the manifest).
pub fn read_dataset<R: Read>(mut input: R, provenance: Provenance) -> Result<PreparedDataset, ContainerError> {
    let mut buf = Vec::new();
    input.read_to_end(&mut buf)?;
    let mut c = Cursor { buf: &buf, pos: 0 };
    if c.take(DATASET_MAGIC.len()).ok() != Some(&DATASET_MAGIC[..]) {
        return Err(ContainerError::BadMagic);
    }
    let width = c.u64()? as usize;
    if width != FEATURE_LEN {
        return Err(ContainerError::Corrupt(format!("feature width {width}, expected {FEATURE_LEN}")));
    }
    let counts = [c.u64()? as usize, c.u64()? as usize, c.u64()? as usize];
    let total: usize = counts.iter().sum();
    if total.saturating_mul(FEATURE_LEN * 8 + 1) > c.remaining() {
        return Err(ContainerError::Corrupt("row counts exceed file size".into()));
    }
    let mut parts: Vec<Vec<FeatureVector>> = Vec::with_capacity(3);
    for &n in &counts {
        let mut rows = Vec::with_capacity(n);
        for _ in 0..n {
            let mut x = [0.0; FEATURE_LEN];
            for v in x.iter_mut() {
                *v = c.f64()?;
            }
            rows.push(x);
        }
        let labels = c.take(n)?;
        let part = rows
            .into_iter()
            .zip(labels)
            .map(|(x, &b)| {
                let y = Label::from_bit(b).ok_or_else(|| ContainerError::Corrupt(format!("label byte {b}")))?;
                Ok(FeatureVector { x, y, kind: None })
            })
            .collect::<Result<Vec<_>, ContainerError>>()?;
        parts.push(part);
    }
    let n_ranges = c.u64()? as usize;
    if n_ranges.saturating_mul(16) > c.remaining() {
        return Err(ContainerError::Corrupt("normalization count exceeds file size".into()));
    }
    let ranges = (0..n_ranges).map(|_| Ok((c.f64()?, c.f64()?))).collect::<Result<Vec<_>, ContainerError>>()?;

    if c.remaining() > 0 {
        if c.take(KINDS_TAG.len())? != KINDS_TAG {
            return Err(ContainerError::Corrupt("unknown trailer".into()));
        }
        let tags = c.take(total)?;
        for (fv, &t) in parts.iter_mut().flatten().zip(tags) {
            fv.kind = AttackKind::from_tag(t).ok_or_else(|| ContainerError::Corrupt(format!("kind tag {t}")))?;
        }
        if c.remaining() > 0 {
            return Err(ContainerError::Corrupt("trailing bytes".into()));
        }
    }

    let test = parts.pop().unwrap();
    let validation = parts.pop().unwrap();
    let train = parts.pop().unwrap();
    Ok(PreparedDataset { train, validation, test, norm: NormalizationParams { ranges }, provenance })
}

/// Plain-text manifest accompanying a container.
pub fn manifest_text(ds: &PreparedDataset, extra: &[(String, String)]) -> String {
    let mut s = String::new();
    s.push_str("format = CANIDS1\n");
    s.push_str(&format!("source = {}\n", ds.provenance.source));
    s.push_str(&format!("seed = {}\n", ds.provenance.seed));
    s.push_str(&format!("train = {}\nvalidation = {}\ntest = {}\n", ds.train.len(), ds.validation.len(), ds.test.len()));
    for (k, v) in extra {
        s.push_str(&format!("{k} = {v}\n"));
    }
    s
}

/// Reads `source` and `seed` back from a manifest.
pub fn parse_manifest(text: &str) -> Provenance {
    let mut p = Provenance { source: String::new(), seed: 0 };
    for line in text.lines() {
        if let Some((k, v)) = line.split_once('=') {
            match k.trim() {
                "source" => p.source = v.trim().to_string(),
                "seed" => p.seed = v.trim().parse().unwrap_or(0),
                _ => {}
            }
        }
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(kinds: bool) -> PreparedDataset {
        let fv = |v: f64, y: Label, k: Option<AttackKind>| FeatureVector { x: [v; FEATURE_LEN], y, kind: if kinds { k } else { None } };
        PreparedDataset {
            train: vec![fv(0.1, Label::Normal, None), fv(0.9, Label::Attack, Some(AttackKind::Flooding))],
            validation: vec![fv(0.5, Label::Attack, Some(AttackKind::Spoofing))],
            test: vec![fv(0.25, Label::Normal, None), fv(1.0, Label::Attack, Some(AttackKind::Fuzzing)), fv(0.0, Label::Normal, None)],
            norm: NormalizationParams { ranges: vec![(0.0, 2047.0), (0.0, 8.0)] },
            provenance: Provenance { source: "unit".into(), seed: 4 },
        }
    }

    #[test]
    fn round_trip_with_and_without_kinds() {
        for kinds in [false, true] {
            let ds = sample(kinds);
            let mut buf = Vec::new();
            write_dataset(&mut buf, &ds).unwrap();
            assert_eq!(&buf[..7], b"CANIDS1");
            let back = read_dataset(&buf[..], ds.provenance.clone()).unwrap();
            assert_eq!(back, ds);
        }
    }

    #[test]
    fn exact_size_without_kinds() {
        let ds = sample(false);
        let mut buf = Vec::new();
        write_dataset(&mut buf, &ds).unwrap();
        assert_eq!(buf.len(), 7 + 8 * 4 + 6 * (FEATURE_LEN * 8 + 1) + 8 + 2 * 16);
    }

    #[test]
    fn truncation_and_magic_detected() {
        let mut buf = Vec::new();
        write_dataset(&mut buf, &sample(true)).unwrap();
        let p = Provenance { source: String::new(), seed: 0 };
        for cut in [3, 20, 100, buf.len() - 1] {
            assert!(read_dataset(&buf[..cut], p.clone()).is_err(), "cut {cut}");
        }
        buf[0] = b'X';
        assert!(matches!(read_dataset(&buf[..], p), Err(ContainerError::BadMagic)));
    }

    #[test]
    fn manifest_round_trip() {
        let ds = sample(false);
        let text = manifest_text(&ds, &[("rows".into(), "6".into())]);
        assert_eq!(parse_manifest(&text), ds.provenance);
    }
}

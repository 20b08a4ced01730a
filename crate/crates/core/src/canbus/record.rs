use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Binary class of a traffic record. Attack is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Normal = 0,
    Attack = 1,
}

impl Label {
    pub fn from_bit(bit: u8) -> Option<Self> {
        match bit {
            0 => Some(Label::Normal),
            1 => Some(Label::Attack),
            _ => None,
        }
    }

    pub fn bit(self) -> u8 {
        self as u8
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AttackKind {
    Flooding,
    Fuzzing,
    Spoofing,
}

impl AttackKind {
    pub const ALL: [AttackKind; 3] = [AttackKind::Flooding, AttackKind::Fuzzing, AttackKind::Spoofing];

    pub fn name(self) -> &'static str {
        match self {
            AttackKind::Flooding => "flooding",
            AttackKind::Fuzzing => "fuzzing",
            AttackKind::Spoofing => "spoofing",
        }
    }

    /// Compact tag used in binary containers; 0 is reserved for "none".
    pub fn tag(self) -> u8 {
        match self {
            AttackKind::Flooding => 1,
            AttackKind::Fuzzing => 2,
            AttackKind::Spoofing => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Option<Self>> {
        match tag {
            0 => Some(None),
            1 => Some(Some(AttackKind::Flooding)),
            2 => Some(Some(AttackKind::Fuzzing)),
            3 => Some(Some(AttackKind::Spoofing)),
            _ => None,
        }
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AttackKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "flooding" | "flood" | "dos" => Ok(AttackKind::Flooding),
            "fuzzing" | "fuzzy" | "fuzz" => Ok(AttackKind::Fuzzing),
            "spoofing" | "spoof" => Ok(AttackKind::Spoofing),
            other => Err(format!("unknown attack kind `{other}`")),
        }
    }
}

/// One timestamped, labeled log row.
///
/// `payload` may be longer than `dlc` for rows ingested from external logs;
/// simulator output always has `payload.len() == dlc`. `attack` is simulator
/// metadata and is not part of the five-column CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficRecord {
    pub timestamp: f64,
    pub can_id: u16,
    pub dlc: u8,
    pub payload: Vec<u8>,
    pub label: Label,
    pub attack: Option<AttackKind>,
}

impl TrafficRecord {
    pub fn normal(timestamp: f64, can_id: u16, payload: Vec<u8>) -> Self {
        Self { timestamp, can_id, dlc: payload.len() as u8, payload, label: Label::Normal, attack: None }
    }

    pub fn injected(timestamp: f64, can_id: u16, payload: Vec<u8>, kind: AttackKind) -> Self {
        Self { timestamp, can_id, dlc: payload.len() as u8, payload, label: Label::Attack, attack: Some(kind) }
    }

    /// Data field as space-separated uppercase hex bytes.
    pub fn data_field(&self) -> String {
        let mut s = String::with_capacity(self.payload.len() * 3);
        for (i, b) in self.payload.iter().enumerate() {
            if i > 0 {
                s.push(' ');
            }
            s.push_str(&format!("{b:02X}"));
        }
        s
    }
}

pub const LOG_HEADER: &str = "Timestamp,CAN_ID,DLC,Data_Field,Label";

/// Writes records as `Timestamp,CAN_ID,DLC,Data_Field,Label` with a header row.
pub fn write_log<W: Write>(mut out: W, records: &[TrafficRecord]) -> io::Result<()> {
    writeln!(out, "{LOG_HEADER}")?;
    for r in records {
        writeln!(out, "{:.6},{:04X},{},{},{}", r.timestamp, r.can_id, r.dlc, r.data_field(), r.label.bit())?;
    }
    out.flush()
}

/// Writes the per-record attack kind sidecar: one line per record,
/// `normal` or the attack kind name.
pub fn write_kinds<W: Write>(mut out: W, records: &[TrafficRecord]) -> io::Result<()> {
    for r in records {
        writeln!(out, "{}", r.attack.map_or("normal", AttackKind::name))?;
    }
    out.flush()
}

pub fn read_kinds<R: BufRead>(input: R) -> io::Result<Vec<Option<AttackKind>>> {
    let mut kinds = Vec::new();
    for line in input.lines() {
        let line = line?;
        let token = line.trim();
        if token.is_empty() {
            continue;
        }
        if token.eq_ignore_ascii_case("normal") {
            kinds.push(None);
        } else {
            let kind = token.parse().map_err(|e: String| io::Error::new(io::ErrorKind::InvalidData, e))?;
            kinds.push(Some(kind));
        }
    }
    Ok(kinds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_row_format() {
        let r = TrafficRecord::normal(0.5, 0x130, vec![0x80, 0x7F, 0x00, 0x73, 0x20, 0x00, 0x0A, 0xA1]);
        let mut buf = Vec::new();
        write_log(&mut buf, &[r]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "Timestamp,CAN_ID,DLC,Data_Field,Label\n0.500000,0130,8,80 7F 00 73 20 00 0A A1,0\n");
    }

    #[test]
    fn kinds_sidecar_round_trip() {
        let recs = vec![
            TrafficRecord::normal(0.0, 1, vec![]),
            TrafficRecord::injected(0.1, 0, vec![0; 8], AttackKind::Flooding),
            TrafficRecord::injected(0.2, 5, vec![1], AttackKind::Spoofing),
        ];
        let mut buf = Vec::new();
        write_kinds(&mut buf, &recs).unwrap();
        let kinds = read_kinds(&buf[..]).unwrap();
        assert_eq!(kinds, vec![None, Some(AttackKind::Flooding), Some(AttackKind::Spoofing)]);
    }
}

//! Deterministic CAN traffic simulator.
//!
//! Normal traffic is periodic per ECU with multiplicative timing jitter. Attacks
//! are injected into an existing log as additional records labeled `Attack`.
//! Every random draw comes from a ChaCha8 stream seeded explicitly by the caller,
//! so output is identical across runs and platforms for the same seed.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::frame::MAX_STANDARD_ID;
use super::record::{AttackKind, Label, TrafficRecord};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("profile has no ECUs")]
    EmptySchedule,
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("invalid attack spec: {0}")]
    InvalidAttack(String),
    #[error("attack window [{start}, {end}] lies outside the log span [0, {span_end}]")]
    WindowOutOfRange { start: f64, end: f64, span_end: f64 },
    #[error("spoofing attack needs at least one target identifier")]
    EmptySpoofTargets,
}

/// How one payload byte evolves across an ECU's emissions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ByteRule {
    Const(u8),
    /// Emission index modulo 256.
    Counter,
    /// Uniform draw in `lo..=hi`.
    Uniform {
        lo: u8,
        hi: u8,
    },
}

impl fmt::Display for ByteRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ByteRule::Const(b) => write!(f, "{b:02X}"),
            ByteRule::Counter => f.write_str("ctr"),
            ByteRule::Uniform { lo, hi } => write!(f, "{lo:02X}-{hi:02X}"),
        }
    }
}

impl FromStr for ByteRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let byte = |t: &str| u8::from_str_radix(t, 16).map_err(|_| format!("bad hex byte `{t}`"));
        if s.eq_ignore_ascii_case("ctr") {
            return Ok(ByteRule::Counter);
        }
        match s.split_once('-') {
            Some((lo, hi)) => {
                let (lo, hi) = (byte(lo)?, byte(hi)?);
                if lo > hi {
                    return Err(format!("empty byte range `{s}`"));
                }
                Ok(ByteRule::Uniform { lo, hi })
            }
            None => byte(s).map(ByteRule::Const),
        }
    }
}

/// Periodic transmission schedule of one ECU. The payload length (and thus
/// DLC) equals the number of byte rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcuSchedule {
    pub id: u16,
    pub period: f64,
    pub payload: Vec<ByteRule>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimProfile {
    pub ecus: Vec<EcuSchedule>,
    pub duration: f64,
    pub jitter_fraction: f64,
    pub seed: u64,
}

impl SimProfile {
    /// Three periodic ECUs with a mix of constant, counter and sensor-like bytes.
    pub fn three_ecu(duration: f64, seed: u64) -> Self {
        use ByteRule::*;
        let u = |lo, hi| Uniform { lo, hi };
        Self {
            ecus: vec![
                EcuSchedule {
                    id: 0x130,
                    period: 0.01,
                    payload: vec![Counter, u(0x00, 0x3F), Const(0x00), Const(0x80), u(0x10, 0x1F), Const(0x00), Const(0x0A), Const(0xA1)],
                },
                EcuSchedule {
                    id: 0x2B0,
                    period: 0.02,
                    payload: vec![u(0x00, 0xFF), u(0x00, 0x0F), Const(0x00), Const(0x07), Const(0x00), Const(0x00), Counter, Const(0x00)],
                },
                EcuSchedule {
                    id: 0x316,
                    period: 0.05,
                    payload: vec![Const(0x05), Const(0x21), u(0x68, 0x6F), Const(0x09), Const(0x21), Const(0x21), Const(0x00), Const(0x6F)],
                },
            ],
            duration,
            jitter_fraction: 0.05,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.ecus.is_empty() {
            return Err(SimError::EmptySchedule);
        }
        let bad = |m: String| Err(SimError::InvalidProfile(m));
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return bad(format!("duration must be positive, got {}", self.duration));
        }
        if !(0.0..0.5).contains(&self.jitter_fraction) {
            return bad(format!("jitter must lie in [0, 0.5), got {}", self.jitter_fraction));
        }
        let mut seen = std::collections::HashSet::new();
        for ecu in &self.ecus {
            if ecu.id > MAX_STANDARD_ID {
                return bad(format!("identifier {:#x} exceeds 11 bits", ecu.id));
            }
            if !seen.insert(ecu.id) {
                return bad(format!("duplicate identifier {:#x}", ecu.id));
            }
            if !(ecu.period.is_finite() && ecu.period > 0.0) {
                return bad(format!("period of {:#x} must be positive", ecu.id));
            }
            if ecu.payload.len() > 8 {
                return bad(format!("payload of {:#x} has more than 8 bytes", ecu.id));
            }
        }
        Ok(())
    }

    /// Scheduled emissions of one ECU over the profile duration.
    pub fn emissions(&self, ecu: &EcuSchedule) -> usize {
        (self.duration / ecu.period + 1e-9).floor() as usize
    }

    /// Renders the profile in the text format accepted by `FromStr`.
    pub fn to_text(&self) -> String {
        let mut s = format!("duration = {}\njitter = {}\nseed = {}\n", self.duration, self.jitter_fraction, self.seed);
        for ecu in &self.ecus {
            s.push_str(&format!("ecu = {:03X} {}", ecu.id, ecu.period));
            for rule in &ecu.payload {
                s.push_str(&format!(" {rule}"));
            }
            s.push('\n');
        }
        s
    }
}

/// Text profile: `key = value` lines, `#` comments. Keys are `duration`,
/// `jitter`, `seed` and repeated `ecu = <hex id> <period s> <byte rules...>`
/// where a byte rule is a hex constant, `ctr`, or a hex range `lo-hi`.
impl FromStr for SimProfile {
    type Err = SimError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let bad = |m: String| SimError::InvalidProfile(m);
        let mut profile = SimProfile { ecus: Vec::new(), duration: 0.0, jitter_fraction: 0.0, seed: 0 };
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| bad(format!("line {}: expected key = value", lineno + 1)))?;
            let value = value.trim();
            let num = |v: &str| v.parse::<f64>().map_err(|_| bad(format!("line {}: bad number `{v}`", lineno + 1)));
            match key.trim() {
                "duration" => profile.duration = num(value)?,
                "jitter" => profile.jitter_fraction = num(value)?,
                "seed" => profile.seed = value.parse().map_err(|_| bad(format!("line {}: bad seed", lineno + 1)))?,
                "ecu" => {
                    let mut tokens = value.split_whitespace();
                    let id = tokens
                        .next()
                        .and_then(|t| u16::from_str_radix(t.trim_start_matches("0x"), 16).ok())
                        .ok_or_else(|| bad(format!("line {}: bad ecu identifier", lineno + 1)))?;
                    let period = num(tokens.next().unwrap_or(""))?;
                    let payload = tokens
                        .map(|t| t.parse::<ByteRule>().map_err(|e| bad(format!("line {}: {e}", lineno + 1))))
                        .collect::<Result<Vec<_>, _>>()?;
                    profile.ecus.push(EcuSchedule { id, period, payload });
                }
                other => return Err(bad(format!("line {}: unknown key `{other}`", lineno + 1))),
            }
        }
        profile.validate()?;
        Ok(profile)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackSpec {
    pub kind: AttackKind,
    pub start: f64,
    pub end: f64,
    /// Injected frames per second.
    pub rate: f64,
    /// Identifiers impersonated by a spoofing attack; ignored otherwise.
    pub spoof_targets: Vec<u16>,
    pub seed: u64,
}

impl AttackSpec {
    pub fn new(kind: AttackKind, start: f64, end: f64, rate: f64, seed: u64) -> Self {
        Self { kind, start, end, rate, spoof_targets: Vec::new(), seed }
    }

    pub fn spoofing(start: f64, end: f64, rate: f64, targets: Vec<u16>, seed: u64) -> Self {
        Self { kind: AttackKind::Spoofing, start, end, rate, spoof_targets: targets, seed }
    }

    /// Number of frames injected: `floor(rate * (end - start))`.
    pub fn frame_count(&self) -> usize {
        (self.rate * (self.end - self.start) + 1e-9).floor() as usize
    }

    /// Parses `kind:start:end:rate[:id,id,...]` (identifiers in hex).
    /// The seed is supplied separately.
    pub fn parse(text: &str, seed: u64) -> Result<Self, SimError> {
        let bad = |m: String| SimError::InvalidAttack(m);
        let parts: Vec<&str> = text.split(':').collect();
        if !(4..=5).contains(&parts.len()) {
            return Err(bad(format!("expected kind:start:end:rate[:targets], got `{text}`")));
        }
        let kind: AttackKind = parts[0].parse().map_err(bad)?;
        let num = |v: &str| v.parse::<f64>().map_err(|_| bad(format!("bad number `{v}` in `{text}`")));
        let mut spec = AttackSpec::new(kind, num(parts[1])?, num(parts[2])?, num(parts[3])?, seed);
        if let Some(targets) = parts.get(4) {
            spec.spoof_targets = targets
                .split(',')
                .filter(|t| !t.is_empty())
                .map(|t| u16::from_str_radix(t.trim_start_matches("0x"), 16).map_err(|_| bad(format!("bad identifier `{t}`"))))
                .collect::<Result<_, _>>()?;
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.start.is_finite() && self.end.is_finite() && self.start < self.end) {
            return Err(SimError::InvalidAttack(format!("window [{}, {}] is empty", self.start, self.end)));
        }
        if !(self.rate.is_finite() && self.rate > 0.0) {
            return Err(SimError::InvalidAttack(format!("rate must be positive, got {}", self.rate)));
        }
        if self.kind == AttackKind::Spoofing && self.spoof_targets.is_empty() {
            return Err(SimError::EmptySpoofTargets);
        }
        if let Some(&id) = self.spoof_targets.iter().find(|&&id| id > MAX_STANDARD_ID) {
            return Err(SimError::InvalidAttack(format!("target {id:#x} exceeds 11 bits")));
        }
        Ok(())
    }
}

fn sort_by_time(records: &mut [TrafficRecord]) {
    records.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
}

/// Generates labeled normal traffic for a profile.
///
/// ECU `e` emits at `t = k * period * (1 + u)` for `k = 1..=floor(duration / period)`,
/// with `u` uniform in `[-jitter, +jitter]`. Draw order: ECUs in profile order,
/// and for each emission the jitter draw followed by one draw per `Uniform` byte.
pub fn generate_traffic(profile: &SimProfile) -> Result<Vec<TrafficRecord>, SimError> {
    profile.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
    let total: usize = profile.ecus.iter().map(|e| profile.emissions(e)).sum();
    let mut records = Vec::with_capacity(total);
    for ecu in &profile.ecus {
        for k in 1..=profile.emissions(ecu) {
            let u = (2.0 * rng.gen::<f64>() - 1.0) * profile.jitter_fraction;
            let timestamp = k as f64 * ecu.period * (1.0 + u);
            let payload = ecu
                .payload
                .iter()
                .map(|rule| match *rule {
                    ByteRule::Const(b) => b,
                    ByteRule::Counter => (k % 256) as u8,
                    ByteRule::Uniform { lo, hi } => rng.gen_range(lo..=hi),
                })
                .collect();
            records.push(TrafficRecord::normal(timestamp, ecu.id, payload));
        }
    }
    sort_by_time(&mut records);
    Ok(records)
}

/// Upper end of the span an attack window must fit in: the last timestamp
/// rounded up to a whole second. Logs always start at time zero.
pub fn log_span_end(log: &[TrafficRecord]) -> f64 {
    log.iter().map(|r| r.timestamp).fold(0.0, f64::max).ceil()
}

/// Merges injected attack frames into a time-sorted log.
///
/// Frames are injected at `start + i / rate` for `i < floor(rate * (end - start))`.
/// Per-frame draws from the attack's own seed:
/// - flooding: none; identifier 0x000 with eight zero bytes,
/// - fuzzing: identifier in `0..=0x7FF`, dlc in `0..=8`, then each payload byte,
/// - spoofing: target index, then (when the copied payload is non-empty) the
///   perturbed position and a non-zero XOR mask.
///
/// Spoofed payloads copy the latest legitimate payload of the target identifier
/// at or before the injection time (eight zero bytes if there is none yet).
/// Input records are carried over unchanged.
pub fn inject_attack(log: &[TrafficRecord], spec: &AttackSpec) -> Result<Vec<TrafficRecord>, SimError> {
    spec.validate()?;
    let span_end = log_span_end(log);
    if spec.start < 0.0 || spec.end > span_end {
        return Err(SimError::WindowOutOfRange { start: spec.start, end: spec.end, span_end });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let count = spec.frame_count();

    // Legitimate history per target identifier, in time order.
    let mut history: HashMap<u16, Vec<(f64, &[u8])>> = HashMap::new();
    if spec.kind == AttackKind::Spoofing {
        for r in log.iter().filter(|r| r.label == Label::Normal && spec.spoof_targets.contains(&r.can_id)) {
            history.entry(r.can_id).or_default().push((r.timestamp, &r.payload));
        }
    }

    let mut merged = Vec::with_capacity(log.len() + count);
    merged.extend_from_slice(log);
    for i in 0..count {
        let t = spec.start + i as f64 / spec.rate;
        let record = match spec.kind {
            AttackKind::Flooding => TrafficRecord::injected(t, 0x000, vec![0; 8], AttackKind::Flooding),
            AttackKind::Fuzzing => {
                let id = rng.gen_range(0..=MAX_STANDARD_ID);
                let dlc = rng.gen_range(0..=8usize);
                let payload = (0..dlc).map(|_| rng.gen::<u8>()).collect();
                TrafficRecord::injected(t, id, payload, AttackKind::Fuzzing)
            }
            AttackKind::Spoofing => {
                let id = spec.spoof_targets[rng.gen_range(0..spec.spoof_targets.len())];
                let mut payload = history
                    .get(&id)
                    .and_then(|h| {
                        let idx = h.partition_point(|(ts, _)| *ts <= t);
                        idx.checked_sub(1).map(|j| h[j].1.to_vec())
                    })
                    .unwrap_or_else(|| vec![0; 8]);
                if !payload.is_empty() {
                    let pos = rng.gen_range(0..payload.len());
                    payload[pos] ^= rng.gen_range(1..=255u8);
                }
                TrafficRecord::injected(t, id, payload, AttackKind::Spoofing)
            }
        };
        merged.push(record);
    }
    sort_by_time(&mut merged);
    Ok(merged)
}

//! CAN frame model, bit-level codec and traffic simulation.

mod frame;
mod record;
mod sim;

pub use frame::{crc15, decode_frame, encode_frame, CanFrame, FrameError, CRC15_POLY, FRAME_OVERHEAD_BITS, MAX_STANDARD_ID};
pub use record::{read_kinds, write_kinds, write_log, AttackKind, Label, TrafficRecord, LOG_HEADER};
pub use sim::{generate_traffic, inject_attack, log_span_end, AttackSpec, ByteRule, EcuSchedule, SimError, SimProfile};

/// Normal traffic for `profile` with every attack in `attacks` injected in order.
///
/// Attack windows must end within the profile duration.
pub fn simulate(profile: &SimProfile, attacks: &[AttackSpec]) -> Result<Vec<TrafficRecord>, SimError> {
    let mut log = generate_traffic(profile)?;
    for spec in attacks {
        spec.validate()?;
        if spec.end > profile.duration {
            return Err(SimError::WindowOutOfRange { start: spec.start, end: spec.end, span_end: profile.duration });
        }
        log = inject_attack(&log, spec)?;
    }
    Ok(log)
}

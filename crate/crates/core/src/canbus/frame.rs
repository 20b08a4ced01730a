//! Logical CAN 2.0A data frame and its bit-level codec.
//!
//! The codec works at the data-link logical level: no bit stuffing and no
//! arbitration timing. A frame occupies `44 + 8 * dlc` bits from SOF through
//! the end-of-frame field.

use std::fmt;

use thiserror::Error;

/// CAN-standard CRC-15 generator `x^15 + x^14 + x^10 + x^8 + x^7 + x^4 + x^3 + 1`
/// with the implicit `x^15` term dropped.
pub const CRC15_POLY: u16 = 0x4599;

/// Largest 11-bit identifier.
pub const MAX_STANDARD_ID: u16 = 0x7FF;

/// Bits in a frame with an empty data field.
pub const FRAME_OVERHEAD_BITS: usize = 44;

const DOMINANT: bool = false;
const RECESSIVE: bool = true;

// Bit offsets within an encoded frame.
const ID_START: usize = 1;
const RTR_BIT: usize = 12;
const IDE_BIT: usize = 13;
const R0_BIT: usize = 14;
const DLC_START: usize = 15;
const DATA_START: usize = 19;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrameError {
    #[error("identifier {0:#x} does not fit in 11 bits")]
    IdentifierOutOfRange(u32),
    #[error("payload of {0} bytes exceeds the 8-byte data field")]
    PayloadTooLong(usize),
    #[error("malformed frame: {0}")]
    MalformedFrame(String),
    #[error("crc mismatch: embedded {embedded:#06x}, computed {computed:#06x}")]
    CrcMismatch { embedded: u16, computed: u16 },
}

/// One standard-format CAN data frame.
///
/// `dlc` is always the payload length. The CRC is not stored; it is derived
/// from the header and data bits on demand.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CanFrame {
    id: u16,
    rtr: bool,
    reserved: bool,
    data: Vec<u8>,
}

impl CanFrame {
    pub fn new(id: u16, data: &[u8]) -> Result<Self, FrameError> {
        Self::with_flags(id, false, false, data)
    }

    pub fn with_flags(id: u16, rtr: bool, reserved: bool, data: &[u8]) -> Result<Self, FrameError> {
        if id > MAX_STANDARD_ID {
            return Err(FrameError::IdentifierOutOfRange(id as u32));
        }
        if data.len() > 8 {
            return Err(FrameError::PayloadTooLong(data.len()));
        }
        Ok(Self { id, rtr, reserved, data: data.to_vec() })
    }

    pub fn id(&self) -> u16 {
        self.id
    }

    pub fn rtr(&self) -> bool {
        self.rtr
    }

    /// Always false: extended identifiers are not representable.
    pub fn ide(&self) -> bool {
        false
    }

    pub fn reserved(&self) -> bool {
        self.reserved
    }

    pub fn dlc(&self) -> u8 {
        self.data.len() as u8
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    /// CRC over SOF, arbitration, control and data fields.
    pub fn crc(&self) -> u16 {
        let mut bits = Vec::with_capacity(DATA_START + 64);
        self.push_crc_covered_bits(&mut bits);
        crc15(&bits)
    }

    pub fn bit_len(&self) -> usize {
        FRAME_OVERHEAD_BITS + 8 * self.data.len()
    }

    fn push_crc_covered_bits(&self, bits: &mut Vec<bool>) {
        bits.push(DOMINANT); // SOF
        push_msb_first(bits, self.id as u32, 11);
        bits.push(self.rtr);
        bits.push(DOMINANT); // IDE: standard frame
        bits.push(self.reserved);
        push_msb_first(bits, self.data.len() as u32, 4);
        for &byte in &self.data {
            push_msb_first(bits, byte as u32, 8);
        }
    }
}

impl fmt::Display for CanFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:03X}#", self.id)?;
        for b in &self.data {
            write!(f, "{b:02X}")?;
        }
        Ok(())
    }
}

fn push_msb_first(bits: &mut Vec<bool>, value: u32, width: usize) {
    for i in (0..width).rev() {
        bits.push((value >> i) & 1 == 1);
    }
}

fn read_msb_first(bits: &[bool]) -> u32 {
    bits.iter().fold(0u32, |acc, &b| (acc << 1) | b as u32)
}

/// CRC-15/CAN of a bit sequence: shift-register form, zero initial value.
///
/// Returns 0 for an empty sequence.
pub fn crc15(bits: &[bool]) -> u16 {
    let mut crc: u16 = 0;
    for &bit in bits {
        let feedback = bit ^ ((crc >> 14) & 1 == 1);
        crc = (crc << 1) & 0x7FFF;
        if feedback {
            crc ^= CRC15_POLY;
        }
    }
    crc
}

/// Serializes a frame to its logical bit sequence (no stuffing).
///
/// Layout: SOF | ID(11) | RTR | IDE | r0 | DLC(4) | data | CRC(15) | CRC delimiter |
/// ACK slot | ACK delimiter | EOF(7). The ACK slot is written dominant, i.e. as the
/// frame appears on the bus once a receiver has acknowledged it.
pub fn encode_frame(frame: &CanFrame) -> Vec<bool> {
    let mut bits = Vec::with_capacity(frame.bit_len());
    frame.push_crc_covered_bits(&mut bits);
    let crc = crc15(&bits);
    push_msb_first(&mut bits, crc as u32, 15);
    bits.push(RECESSIVE); // CRC delimiter
    bits.push(DOMINANT); // ACK slot
    bits.push(RECESSIVE); // ACK delimiter
    bits.extend(std::iter::repeat_n(RECESSIVE, 7)); // EOF
    debug_assert_eq!(bits.len(), frame.bit_len());
    bits
}

/// Parses a logical bit sequence back into a frame and verifies its CRC.
pub fn decode_frame(bits: &[bool]) -> Result<CanFrame, FrameError> {
    let malformed = |msg: String| Err(FrameError::MalformedFrame(msg));
    if bits.len() < FRAME_OVERHEAD_BITS {
        return malformed(format!("{} bits is shorter than the minimum {FRAME_OVERHEAD_BITS}", bits.len()));
    }
    if bits[0] != DOMINANT {
        return malformed("start-of-frame bit is recessive".into());
    }
    if bits[IDE_BIT] != DOMINANT {
        return malformed("extended identifiers are not supported".into());
    }
    let dlc = read_msb_first(&bits[DLC_START..DATA_START]) as usize;
    if dlc > 8 {
        return malformed(format!("dlc {dlc} exceeds 8"));
    }
    let expected = FRAME_OVERHEAD_BITS + 8 * dlc;
    if bits.len() != expected {
        return malformed(format!("dlc {dlc} implies {expected} bits, got {}", bits.len()));
    }

    let crc_start = DATA_START + 8 * dlc;
    let tail = &bits[crc_start + 15..];
    // CRC delimiter, ACK slot, ACK delimiter, EOF
    let expected_tail = [RECESSIVE, DOMINANT, RECESSIVE, RECESSIVE, RECESSIVE, RECESSIVE, RECESSIVE, RECESSIVE, RECESSIVE, RECESSIVE];
    if tail != expected_tail {
        return malformed("delimiter, ack or end-of-frame bits are not in their fixed state".into());
    }

    let embedded = read_msb_first(&bits[crc_start..crc_start + 15]) as u16;
    let computed = crc15(&bits[..crc_start]);
    if embedded != computed {
        return Err(FrameError::CrcMismatch { embedded, computed });
    }

    let id = read_msb_first(&bits[ID_START..RTR_BIT]) as u16;
    let data: Vec<u8> = bits[DATA_START..crc_start].chunks(8).map(|c| read_msb_first(c) as u8).collect();
    CanFrame::with_flags(id, bits[RTR_BIT], bits[R0_BIT], &data)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Polynomial long division over GF(2) on the message multiplied by x^15.
    /// Independent of the shift-register form used by `crc15`.
    fn long_division_crc(bits: &[bool]) -> u16 {
        let mut dividend: Vec<bool> = bits.to_vec();
        dividend.extend(std::iter::repeat_n(false, 15));
        let generator: Vec<bool> = (0..16).rev().map(|i| (0xC599u32 >> i) & 1 == 1).collect();
        for i in 0..bits.len() {
            if dividend[i] {
                for (j, &g) in generator.iter().enumerate() {
                    dividend[i + j] ^= g;
                }
            }
        }
        read_msb_first(&dividend[bits.len()..]) as u16
    }

    /// Byte-table driven CRC-15 over a bit string padded on the left to whole bytes.
    /// Leading zero bits leave a zero-initialised CRC unchanged.
    fn table_crc(bits: &[bool]) -> u16 {
        let mut table = [0u16; 256];
        for (byte, slot) in table.iter_mut().enumerate() {
            let mut crc = (byte as u16) << 7;
            for _ in 0..8 {
                crc = if crc & 0x4000 != 0 { ((crc << 1) ^ CRC15_POLY) & 0x7FFF } else { (crc << 1) & 0x7FFF };
            }
            *slot = crc;
        }
        let pad = (8 - bits.len() % 8) % 8;
        let mut padded = vec![false; pad];
        padded.extend_from_slice(bits);
        let mut crc: u16 = 0;
        for chunk in padded.chunks(8) {
            let byte = read_msb_first(chunk) as u16;
            crc = ((crc << 8) ^ table[(((crc >> 7) ^ byte) & 0xFF) as usize]) & 0x7FFF;
        }
        crc
    }

    #[test]
    fn crc_of_zero_bits_is_zero() {
        assert_eq!(crc15(&[false; 16]), 0);
    }

    #[test]
    fn crc_of_single_one_bit_is_generator() {
        // x^0 * x^15 mod g = g - x^15
        assert_eq!(crc15(&[true]), CRC15_POLY & 0x7FFF);
        let mut bits = vec![true];
        bits.extend([false; 15]);
        // x^15 * x^15 mod g
        assert_eq!(crc15(&bits), long_division_crc(&bits));
        assert_eq!(crc15(&bits), 0x380A);
    }

    #[test]
    fn crc_matches_table_oracle_on_sample_frame() {
        let frame = CanFrame::new(0x130, &[0xAB, 0xCD]).unwrap();
        let mut bits = Vec::new();
        frame.push_crc_covered_bits(&mut bits);
        assert_eq!(crc15(&bits), table_crc(&bits));
        assert_eq!(crc15(&bits), long_division_crc(&bits));
        assert_eq!(frame.crc(), 0x5CE1);
    }

    #[test]
    fn encoded_lengths() {
        let f8 = CanFrame::new(0x123, &[1, 2, 3, 4, 5, 6, 7, 8]).unwrap();
        assert_eq!(encode_frame(&f8).len(), 108);
        let f0 = CanFrame::new(0x123, &[]).unwrap();
        assert_eq!(encode_frame(&f0).len(), 44);
    }

    #[test]
    fn zero_identifier_is_all_dominant() {
        let f = CanFrame::new(0x000, &[0xFF]).unwrap();
        let bits = encode_frame(&f);
        assert!(bits[..12].iter().all(|&b| b == DOMINANT));
    }

    #[test]
    fn rejects_invalid_frames() {
        assert_eq!(CanFrame::new(0x800, &[]), Err(FrameError::IdentifierOutOfRange(0x800)));
        assert_eq!(CanFrame::new(0x1, &[0; 9]), Err(FrameError::PayloadTooLong(9)));
    }

    #[test]
    fn truncated_sequence_is_malformed() {
        let bits = encode_frame(&CanFrame::new(0x7FF, &[]).unwrap());
        assert!(matches!(decode_frame(&bits[..43]), Err(FrameError::MalformedFrame(_))));
    }

    #[test]
    fn data_bit_flip_is_crc_mismatch() {
        let frame = CanFrame::new(0x2B0, &[0xDE, 0xAD, 0xBE, 0xEF]).unwrap();
        let bits = encode_frame(&frame);
        for i in DATA_START..DATA_START + 32 {
            let mut corrupted = bits.clone();
            corrupted[i] = !corrupted[i];
            assert!(matches!(decode_frame(&corrupted), Err(FrameError::CrcMismatch { .. })), "bit {i}");
        }
    }

    #[test]
    fn flags_round_trip() {
        let f = CanFrame::with_flags(0x555, true, true, &[9, 8, 7]).unwrap();
        assert_eq!(decode_frame(&encode_frame(&f)).unwrap(), f);
    }
}

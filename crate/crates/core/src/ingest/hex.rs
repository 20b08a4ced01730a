use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};

use super::IngestError;

/// Exact value of a hex string, ignoring whitespace between digits.
/// An empty string is zero.
pub fn hex_to_dec(hex: &str) -> Result<BigUint, IngestError> {
    let mut value = BigUint::zero();
    for c in hex.chars().filter(|c| !c.is_whitespace()) {
        let digit = c.to_digit(16).ok_or(IngestError::InvalidHexDigit(c))?;
        value = (value << 4u32) + digit;
    }
    Ok(value)
}

/// Canonical uppercase hex with no leading zeros (`"0"` for zero).
pub fn dec_to_hex(value: &BigUint) -> String {
    value.to_str_radix(16).to_ascii_uppercase()
}

/// Hex value as the nearest `f64`, for statistics over wide data fields.
pub fn hex_to_f64(hex: &str) -> Result<f64, IngestError> {
    Ok(hex_to_dec(hex)?.to_f64().unwrap_or(f64::INFINITY))
}

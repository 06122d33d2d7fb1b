//! LEB128 variable-length integers as used throughout the Wasm binary
//! format.
//!
//! Decoding enforces the format's ceiling: an encoding may take at most
//! `ceil(max_bits / 7)` bytes, and bits of the final permitted byte that
//! fall outside the value range must be zero (unsigned) or a copy of the
//! sign (signed). Non-shortest encodings within those limits are legal.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq, Clone, Copy)]
pub enum VarintError {
    #[error("varint runs past the end of input")]
    Truncated,
    #[error("continuation bit set on the final permitted byte")]
    TooLong,
    #[error("unused high bits of the final byte are not a valid extension")]
    UnusedBits,
}

/// Decodes an unsigned LEB128 value of at most `max_bits` bits, returning
/// the value and the number of bytes consumed.
pub fn decode_unsigned(bytes: &[u8], max_bits: u32) -> Result<(u64, usize), VarintError> {
    debug_assert!(max_bits <= 64);
    let max_bytes = (max_bits as usize).div_ceil(7);
    let mut value = 0u64;
    let mut n = 0usize;
    loop {
        let &b = bytes.get(n).ok_or(VarintError::Truncated)?;
        if n + 1 == max_bytes {
            if b & 0x80 != 0 {
                return Err(VarintError::TooLong);
            }
            let used = max_bits - 7 * (max_bytes as u32 - 1);
            if used < 7 && b >> used != 0 {
                return Err(VarintError::UnusedBits);
            }
            value |= (b as u64) << (7 * n);
            return Ok((value, n + 1));
        }
        value |= ((b & 0x7F) as u64) << (7 * n);
        n += 1;
        if b & 0x80 == 0 {
            return Ok((value, n));
        }
    }
}

/// Decodes a signed LEB128 value of at most `max_bits` bits.
pub fn decode_signed(bytes: &[u8], max_bits: u32) -> Result<(i64, usize), VarintError> {
    debug_assert!(max_bits <= 64);
    let max_bytes = (max_bits as usize).div_ceil(7);
    let mut value = 0u64;
    let mut shift = 0u32;
    let mut n = 0usize;
    loop {
        let &b = bytes.get(n).ok_or(VarintError::Truncated)?;
        let last_allowed = n + 1 == max_bytes;
        if last_allowed && b & 0x80 != 0 {
            return Err(VarintError::TooLong);
        }
        value |= ((b & 0x7F) as u64) << shift;
        shift += 7;
        n += 1;
        if b & 0x80 == 0 {
            if last_allowed {
                let used = max_bits - 7 * (max_bytes as u32 - 1);
                // Bits from the in-range sign position upward must agree.
                let mask = 0x7Fu8 & !((1u8 << (used - 1)) - 1);
                if b & mask != 0 && b & mask != mask {
                    return Err(VarintError::UnusedBits);
                }
            }
            if shift < 64 && b & 0x40 != 0 {
                value |= u64::MAX << shift;
            }
            return Ok((value as i64, n));
        }
    }
}

/// Encodes an unsigned value in shortest form.
pub fn encode_unsigned(mut value: u64, out: &mut Vec<u8>) {
    loop {
        let byte = (value & 0x7F) as u8;
        value >>= 7;
        if value == 0 {
            out.push(byte);
            return;
        }
        out.push(byte | 0x80);
    }
}

/// Encodes a signed value in shortest form.
pub fn encode_signed(mut value: i64, out: &mut Vec<u8>) {
    loop {
        let byte = (value & 0x7F) as u8;
        value >>= 7;
        let sign_clear = byte & 0x40 == 0;
        if (value == 0 && sign_clear) || (value == -1 && !sign_clear) {
            out.push(byte);
            return;
        }
        out.push(byte | 0x80);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decodes_the_canonical_examples() {
        assert_eq!(decode_unsigned(&[0x00], 32), Ok((0, 1)));
        assert_eq!(decode_unsigned(&[0xE5, 0x8E, 0x26], 32), Ok((624_485, 3)));
        assert_eq!(decode_signed(&[0x7F], 32), Ok((-1, 1)));
        assert_eq!(decode_signed(&[0x3F], 32), Ok((63, 1)));
        assert_eq!(decode_signed(&[0x40], 32), Ok((-64, 1)));
    }

    #[test]
    fn accepts_padded_but_in_range_encodings() {
        // Non-shortest forms are legal as long as the ceiling holds.
        assert_eq!(decode_unsigned(&[0x80, 0x00], 32), Ok((0, 2)));
        assert_eq!(decode_signed(&[0xFF, 0x7F], 32), Ok((-1, 2)));
    }

    #[test]
    fn rejects_over_long_encodings() {
        assert_eq!(
            decode_unsigned(&[0x80, 0x80, 0x80, 0x80, 0x80, 0x01], 32),
            Err(VarintError::TooLong)
        );
        assert_eq!(
            decode_signed(&[0x80, 0x80, 0x80, 0x80, 0x80, 0x01], 32),
            Err(VarintError::TooLong)
        );
    }

    #[test]
    fn rejects_unused_high_bits() {
        // Fifth byte of a u32 may only carry 4 bits.
        assert_eq!(
            decode_unsigned(&[0x80, 0x80, 0x80, 0x80, 0x10], 32),
            Err(VarintError::UnusedBits)
        );
        assert_eq!(decode_unsigned(&[0x80, 0x80, 0x80, 0x80, 0x0F], 32), Ok((0xF000_0000, 5)));
        // Signed: the unused bits must extend the sign.
        assert_eq!(
            decode_signed(&[0x80, 0x80, 0x80, 0x80, 0x4F], 32),
            Err(VarintError::UnusedBits)
        );
        assert_eq!(
            decode_signed(&[0x80, 0x80, 0x80, 0x80, 0x78], 32),
            Ok((i32::MIN as i64, 5))
        );
    }

    #[test]
    fn rejects_truncated_input() {
        assert_eq!(decode_unsigned(&[0x80], 32), Err(VarintError::Truncated));
        assert_eq!(decode_signed(&[], 64), Err(VarintError::Truncated));
    }

    #[test]
    fn sixty_four_bit_boundary_values_round_trip() {
        for v in [0u64, 1, u64::MAX, u64::MAX - 1, 1 << 63] {
            let mut buf = Vec::new();
            encode_unsigned(v, &mut buf);
            assert_eq!(decode_unsigned(&buf, 64), Ok((v, buf.len())));
        }
        for v in [0i64, -1, i64::MIN, i64::MAX, -624_485] {
            let mut buf = Vec::new();
            encode_signed(v, &mut buf);
            assert_eq!(decode_signed(&buf, 64), Ok((v, buf.len())));
        }
    }
}

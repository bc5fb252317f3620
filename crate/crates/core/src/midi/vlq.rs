//! Variable-length quantities: 7 data bits per byte, high bit set on every
//! byte except the last, at most four bytes (max value 0x0FFF_FFFF).

use super::{parse_err, MidiError};

pub const MAX_VLQ: u64 = 0x0FFF_FFFF;

/// Decodes one VLQ starting at `pos`; returns (value, bytes consumed).
pub fn decode_vlq(bytes: &[u8], pos: usize) -> Result<(u32, usize), MidiError> {
    let mut value: u32 = 0;
    for i in 0..4 {
        let byte = *bytes
            .get(pos + i)
            .ok_or_else(|| parse_err(pos + i, "truncated variable-length quantity"))?;
        value = (value << 7) | (byte & 0x7F) as u32;
        if byte & 0x80 == 0 {
            return Ok((value, i + 1));
        }
    }
    Err(parse_err(
        pos,
        "variable-length quantity longer than four bytes",
    ))
}

pub fn encode_vlq(value: u64, out: &mut Vec<u8>) -> Result<(), MidiError> {
    if value > MAX_VLQ {
        return Err(MidiError::VlqOverflow { delta: value });
    }
    let mut buf = [0u8; 4];
    let mut n = 0;
    let mut v = value as u32;
    loop {
        buf[n] = (v & 0x7F) as u8;
        v >>= 7;
        n += 1;
        if v == 0 {
            break;
        }
    }
    for i in (0..n).rev() {
        let mut byte = buf[i];
        if i != 0 {
            byte |= 0x80;
        }
        out.push(byte);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_byte_example_decodes_to_200() {
        // 0x81 0x48 -> (1 << 7) | 0x48 = 200
        let (value, used) = decode_vlq(&[0x81, 0x48], 0).unwrap();
        assert_eq!(value, 200);
        assert_eq!(used, 2);
    }

    #[test]
    fn single_byte_values() {
        assert_eq!(decode_vlq(&[0x00], 0).unwrap(), (0, 1));
        assert_eq!(decode_vlq(&[0x7F], 0).unwrap(), (0x7F, 1));
    }

    #[test]
    fn spec_table_extremes() {
        let (v, used) = decode_vlq(&[0xFF, 0xFF, 0xFF, 0x7F], 0).unwrap();
        assert_eq!(v, 0x0FFF_FFFF);
        assert_eq!(used, 4);
    }

    #[test]
    fn truncated_and_overlong_inputs_error() {
        assert!(decode_vlq(&[0x81], 0).is_err());
        assert!(decode_vlq(&[0xFF, 0xFF, 0xFF, 0xFF], 0).is_err());
        assert!(decode_vlq(&[], 0).is_err());
    }

    #[test]
    fn encode_rejects_out_of_range() {
        let mut out = Vec::new();
        assert!(matches!(
            encode_vlq(MAX_VLQ + 1, &mut out),
            Err(MidiError::VlqOverflow { .. })
        ));
    }

    proptest! {
        #[test]
        fn round_trip(value in 0u64..=MAX_VLQ) {
            let mut out = Vec::new();
            encode_vlq(value, &mut out).unwrap();
            prop_assert!(out.len() <= 4);
            let (decoded, used) = decode_vlq(&out, 0).unwrap();
            prop_assert_eq!(decoded as u64, value);
            prop_assert_eq!(used, out.len());
        }
    }
}

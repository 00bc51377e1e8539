//! Canonical scalar encoding: minimal big-endian magnitude prefixed with a
//! 2-byte big-endian length. Zero encodes as an empty magnitude.

use crate::error::{Error, Result};

/// Encodes a big-endian magnitude, stripping leading zero bytes.
pub fn encode_magnitude(be: &[u8]) -> Vec<u8> {
    let start = be.iter().position(|&b| b != 0).unwrap_or(be.len());
    let body = &be[start..];
    assert!(body.len() <= u16::MAX as usize, "magnitude too long");
    let mut out = Vec::with_capacity(2 + body.len());
    out.extend_from_slice(&(body.len() as u16).to_be_bytes());
    out.extend_from_slice(body);
    out
}

/// Splits one prefixed magnitude off the front of `bytes`. Non-minimal
/// encodings (a leading zero byte) are rejected so that encoding is a bijection.
pub fn decode_magnitude(bytes: &[u8]) -> Result<(&[u8], &[u8])> {
    if bytes.len() < 2 {
        return Err(Error::decode("missing length prefix"));
    }
    let len = u16::from_be_bytes([bytes[0], bytes[1]]) as usize;
    let rest = &bytes[2..];
    if rest.len() < len {
        return Err(Error::decode("truncated magnitude"));
    }
    let (body, tail) = rest.split_at(len);
    if body.first() == Some(&0) {
        return Err(Error::decode("non-minimal magnitude"));
    }
    Ok((body, tail))
}

pub(crate) fn u64_from_be(body: &[u8]) -> Result<u64> {
    if body.len() > 8 {
        return Err(Error::decode("magnitude exceeds 64 bits"));
    }
    Ok(body.iter().fold(0u64, |acc, &b| (acc << 8) | b as u64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_is_empty_magnitude() {
        assert_eq!(encode_magnitude(&[0, 0]), vec![0, 0]);
        let (body, rest) = decode_magnitude(&[0, 0, 9]).unwrap();
        assert!(body.is_empty());
        assert_eq!(rest, &[9]);
    }

    #[test]
    fn leading_zero_rejected() {
        assert!(decode_magnitude(&[0, 2, 0, 5]).is_err());
        assert!(decode_magnitude(&[0, 3, 1]).is_err());
    }
}

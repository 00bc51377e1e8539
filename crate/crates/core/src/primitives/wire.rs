//! Message framing: a tag byte followed by fields, each a 4-byte big-endian
//! length and its bytes. Signatures cover exactly these bytes.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct FrameWriter {
    buf: Vec<u8>,
}

impl FrameWriter {
    pub fn new(tag: u8) -> Self {
        FrameWriter { buf: vec![tag] }
    }

    pub fn field(mut self, bytes: &[u8]) -> Self {
        self.buf.extend((bytes.len() as u32).to_be_bytes());
        self.buf.extend_from_slice(bytes);
        self
    }

    pub fn id(self, id: u32) -> Self {
        self.field(&id.to_be_bytes())
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

#[derive(Debug, Clone)]
pub struct FrameReader<'a> {
    rest: &'a [u8],
}

impl<'a> FrameReader<'a> {
    /// Checks the tag and positions the reader at the first field.
    pub fn open(bytes: &'a [u8], tag: u8) -> Result<Self> {
        match bytes.split_first() {
            Some((&t, rest)) if t == tag => Ok(FrameReader { rest }),
            Some((&t, _)) => Err(Error::decode(format!("expected tag {tag}, found {t}"))),
            None => Err(Error::decode("empty frame")),
        }
    }

    pub fn field(&mut self) -> Result<&'a [u8]> {
        if self.rest.len() < 4 {
            return Err(Error::decode("truncated field length"));
        }
        let len = u32::from_be_bytes(self.rest[..4].try_into().expect("4 bytes")) as usize;
        let body = &self.rest[4..];
        if body.len() < len {
            return Err(Error::decode("truncated field"));
        }
        let (f, rest) = body.split_at(len);
        self.rest = rest;
        Ok(f)
    }

    pub fn id(&mut self) -> Result<u32> {
        let f = self.field()?;
        let b: [u8; 4] = f.try_into().map_err(|_| Error::decode("id field must be 4 bytes"))?;
        Ok(u32::from_be_bytes(b))
    }

    pub fn is_done(&self) -> bool {
        self.rest.is_empty()
    }

    pub fn finish(self) -> Result<()> {
        if self.rest.is_empty() {
            Ok(())
        } else {
            Err(Error::decode("trailing bytes in frame"))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let bytes = FrameWriter::new(7).id(1).id(2).field(b"cipher").finish();
        assert_eq!(&bytes[..9], &[7, 0, 0, 0, 4, 0, 0, 0, 1]);
        let mut r = FrameReader::open(&bytes, 7).unwrap();
        assert_eq!(r.id().unwrap(), 1);
        assert_eq!(r.id().unwrap(), 2);
        assert_eq!(r.field().unwrap(), b"cipher");
        r.finish().unwrap();
        assert!(FrameReader::open(&bytes, 8).is_err());
    }

    #[test]
    fn truncation_rejected() {
        let bytes = FrameWriter::new(1).field(b"abc").finish();
        let mut r = FrameReader::open(&bytes[..bytes.len() - 1], 1).unwrap();
        assert!(r.field().is_err());
    }
}

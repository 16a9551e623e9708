//! Canonical byte encoding for signed artifacts.
//!
//! Every signed artifact is encoded field by field in declaration order:
//!
//! | Field kind        | Encoding                                              |
//! |-------------------|-------------------------------------------------------|
//! | integer           | 8-byte big-endian `u64`                               |
//! | real magnitude    | 8-byte big-endian IEEE-754 bit pattern of an `f64`    |
//! | byte string       | 4-byte big-endian length, then the bytes              |
//! | list              | 4-byte big-endian element count, then each element    |
//! | enum / bool       | 1-byte tag                                            |
//!
//! Each artifact starts with a one-byte [`ArtifactTag`] so that two artifacts
//! of different kinds can never share an encoding. Signatures are never part
//! of the encoded payload.

/// Leading byte of every canonical encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum ArtifactTag {
    FirmwareUpdate = 0x01,
    Extension = 0x02,
    License = 0x03,
    Attestation = 0x04,
    LicenseDenial = 0x05,
    LandmarkResponse = 0x06,
}

/// Types with a canonical, injective byte encoding.
pub trait CanonicalEncode {
    fn encode_into(&self, enc: &mut Encoder);

    fn canonical_bytes(&self) -> Vec<u8> {
        let mut enc = Encoder::new();
        self.encode_into(&mut enc);
        enc.finish()
    }
}

/// Append-only writer for canonical encodings.
#[derive(Debug, Default, Clone)]
pub struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn tag(&mut self, tag: ArtifactTag) -> &mut Self {
        self.u8(tag as u8)
    }

    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.buf.push(v);
        self
    }

    pub fn bool(&mut self, v: bool) -> &mut Self {
        self.u8(u8::from(v))
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    /// Encodes an `f64` by bit pattern. `-0.0` is folded into `+0.0` so that
    /// numerically equal magnitudes encode identically.
    pub fn f64(&mut self, v: f64) -> &mut Self {
        let v = if v == 0.0 { 0.0 } else { v };
        self.buf.extend_from_slice(&v.to_bits().to_be_bytes());
        self
    }

    pub fn bytes(&mut self, v: &[u8]) -> &mut Self {
        self.len_prefix(v.len());
        self.buf.extend_from_slice(v);
        self
    }

    pub fn str(&mut self, v: &str) -> &mut Self {
        self.bytes(v.as_bytes())
    }

    /// Writes a 4-byte element count followed by each element.
    pub fn list<T: CanonicalEncode>(&mut self, items: &[T]) -> &mut Self {
        self.len_prefix(items.len());
        for item in items {
            item.encode_into(self);
        }
        self
    }

    pub fn str_list<S: AsRef<str>>(&mut self, items: &[S]) -> &mut Self {
        self.len_prefix(items.len());
        for item in items {
            self.str(item.as_ref());
        }
        self
    }

    fn len_prefix(&mut self, len: usize) {
        let len = u32::try_from(len).expect("canonical field longer than u32::MAX");
        self.buf.extend_from_slice(&len.to_be_bytes());
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integers_are_big_endian_eight_bytes() {
        let mut e = Encoder::new();
        e.u64(0x0102_0304_0506_0708);
        assert_eq!(e.finish(), vec![1, 2, 3, 4, 5, 6, 7, 8]);
    }

    #[test]
    fn strings_are_length_prefixed() {
        let mut e = Encoder::new();
        e.str("r0");
        assert_eq!(e.finish(), vec![0, 0, 0, 2, b'r', b'0']);
    }

    #[test]
    fn negative_zero_folds() {
        let mut a = Encoder::new();
        a.f64(-0.0);
        let mut b = Encoder::new();
        b.f64(0.0);
        assert_eq!(a.finish(), b.finish());
    }

    #[test]
    fn adjacent_strings_do_not_alias() {
        let mut a = Encoder::new();
        a.str("ab").str("c");
        let mut b = Encoder::new();
        b.str("a").str("bc");
        assert_ne!(a.finish(), b.finish());
    }
}

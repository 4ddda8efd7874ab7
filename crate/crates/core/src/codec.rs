//! Little-endian byte packing used for message payloads.

pub(crate) fn put_u64(buf: &mut Vec<u8>, v: u64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn put_f64(buf: &mut Vec<u8>, v: f64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn put_u64s(buf: &mut Vec<u8>, vs: &[u64]) {
    put_u64(buf, vs.len() as u64);
    for &v in vs {
        put_u64(buf, v);
    }
}

pub(crate) fn put_f64s(buf: &mut Vec<u8>, vs: &[f64]) {
    put_u64(buf, vs.len() as u64);
    for &v in vs {
        put_f64(buf, v);
    }
}

pub(crate) fn put_bytes(buf: &mut Vec<u8>, bytes: &[u8]) {
    put_u64(buf, bytes.len() as u64);
    buf.extend_from_slice(bytes);
}

/// Sequential reader over a payload. Reads past the end panic: payloads are
/// produced by the matching writer in this crate.
pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub fn is_empty(&self) -> bool {
        self.pos >= self.buf.len()
    }

    fn take8(&mut self) -> [u8; 8] {
        let out: [u8; 8] = self.buf[self.pos..self.pos + 8].try_into().unwrap();
        self.pos += 8;
        out
    }

    pub fn u64(&mut self) -> u64 {
        u64::from_le_bytes(self.take8())
    }

    pub fn f64(&mut self) -> f64 {
        f64::from_le_bytes(self.take8())
    }

    pub fn u64s(&mut self) -> Vec<u64> {
        let n = self.u64() as usize;
        (0..n).map(|_| self.u64()).collect()
    }

    pub fn f64s(&mut self) -> Vec<f64> {
        let n = self.u64() as usize;
        (0..n).map(|_| self.f64()).collect()
    }

    pub fn bytes(&mut self) -> &'a [u8] {
        let n = self.u64() as usize;
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        out
    }
}

pub(crate) fn encode_u64s(vs: &[u64]) -> Vec<u8> {
    let mut b = Vec::with_capacity(8 * vs.len() + 8);
    put_u64s(&mut b, vs);
    b
}

pub(crate) fn decode_u64s(bytes: &[u8]) -> Vec<u64> {
    Reader::new(bytes).u64s()
}

pub(crate) fn encode_f64s(vs: &[f64]) -> Vec<u8> {
    let mut b = Vec::with_capacity(8 * vs.len() + 8);
    put_f64s(&mut b, vs);
    b
}

pub(crate) fn decode_f64s(bytes: &[u8]) -> Vec<f64> {
    Reader::new(bytes).f64s()
}

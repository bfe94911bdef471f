//! Little-endian encoding helpers shared by the binary formats.

use anodiff_core::numcore::Tensor;

#[derive(Default)]
pub struct Encoder {
    pub buf: Vec<u8>,
}

impl Encoder {
    pub fn new(magic: &[u8; 4]) -> Self {
        Encoder { buf: magic.to_vec() }
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn usize(&mut self, v: usize) {
        self.u64(v as u64);
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64s(&mut self, vs: &[f64]) {
        self.usize(vs.len());
        for &v in vs {
            self.f64(v);
        }
    }

    pub fn tensor(&mut self, t: &Tensor) {
        self.u8(t.ndim() as u8);
        for &d in t.shape() {
            self.usize(d);
        }
        for &v in t.data() {
            self.f64(v);
        }
    }
}

/// Cursor over a byte slice; every read fails cleanly on truncation.
pub struct Decoder<'a> {
    buf: &'a [u8],
    pos: usize,
}

pub type DecodeResult<T> = Result<T, String>;

impl<'a> Decoder<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Decoder { buf, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn take(&mut self, n: usize) -> DecodeResult<&'a [u8]> {
        if self.remaining() < n {
            return Err(format!(
                "truncated: needed {n} bytes at offset {}, {} left",
                self.pos,
                self.remaining()
            ));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn expect_magic(&mut self, magic: &[u8; 4]) -> DecodeResult<()> {
        let m = self.take(4)?;
        if m != magic {
            return Err(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(m),
                String::from_utf8_lossy(magic)
            ));
        }
        Ok(())
    }

    pub fn u8(&mut self) -> DecodeResult<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u64(&mut self) -> DecodeResult<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    /// A `u64` that must index memory; `limit` guards against absurd sizes
    /// in corrupt files.
    pub fn usize_max(&mut self, limit: usize) -> DecodeResult<usize> {
        let v = self.u64()?;
        if v > limit as u64 {
            return Err(format!("value {v} exceeds limit {limit}"));
        }
        Ok(v as usize)
    }

    pub fn usize(&mut self) -> DecodeResult<usize> {
        self.usize_max(self.buf.len().max(1 << 20))
    }

    pub fn f64(&mut self) -> DecodeResult<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f64_n(&mut self, n: usize) -> DecodeResult<Vec<f64>> {
        if n.checked_mul(8).is_none_or(|b| b > self.remaining()) {
            return Err(format!("truncated: {n} floats do not fit in {} bytes", self.remaining()));
        }
        (0..n).map(|_| self.f64()).collect()
    }

    pub fn f64s(&mut self) -> DecodeResult<Vec<f64>> {
        let n = self.usize()?;
        self.f64_n(n)
    }

    pub fn tensor(&mut self) -> DecodeResult<Tensor> {
        let ndim = self.u8()? as usize;
        let shape = (0..ndim).map(|_| self.usize()).collect::<DecodeResult<Vec<_>>>()?;
        let len = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or("tensor size overflows")?;
        let data = self.f64_n(len)?;
        Tensor::new(shape, data).map_err(|e| e.to_string())
    }

    pub fn finish(&self) -> DecodeResult<()> {
        if self.remaining() != 0 {
            return Err(format!("{} trailing bytes", self.remaining()));
        }
        Ok(())
    }
}

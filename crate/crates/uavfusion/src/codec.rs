//! Little-endian primitives shared by the binary formats.

use uavfusion_core::Tensor;

use crate::error::{Error, Result};

pub(crate) fn put_u8(out: &mut Vec<u8>, v: u8) {
    out.push(v);
}

pub(crate) fn put_u16(out: &mut Vec<u8>, v: u16) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn put_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn put_f32s(out: &mut Vec<u8>, values: &[f32]) {
    out.reserve(values.len() * 4);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub(crate) fn put_u32_len(out: &mut Vec<u8>, n: usize, what: &str) -> Result<()> {
    let v =
        u32::try_from(n).map_err(|_| Error::Format(format!("{what} {n} does not fit in u32")))?;
    put_u32(out, v);
    Ok(())
}

/// Length-prefixed (u16) UTF-8 string.
pub(crate) fn put_str(out: &mut Vec<u8>, s: &str) -> Result<()> {
    let n = u16::try_from(s.len())
        .map_err(|_| Error::Format(format!("string of {} bytes is too long", s.len())))?;
    put_u16(out, n);
    out.extend_from_slice(s.as_bytes());
    Ok(())
}

/// Dimension count (u8) followed by each dimension (u32).
pub(crate) fn put_dims(out: &mut Vec<u8>, dims: &[usize]) -> Result<()> {
    let n = u8::try_from(dims.len())
        .map_err(|_| Error::Format(format!("{} dimensions is too many", dims.len())))?;
    put_u8(out, n);
    for &d in dims {
        put_u32_len(out, d, "dimension")?;
    }
    Ok(())
}

/// Bounds-checked cursor over an encoded file.
pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| {
                Error::Corrupt(format!(
                    "truncated {what}: need {n} bytes at offset {}, file has {}",
                    self.pos,
                    self.buf.len()
                ))
            })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        Ok(self.take(N, what)?.try_into().expect("slice length is N"))
    }

    pub(crate) fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.array::<1>(what)?[0])
    }

    pub(crate) fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.array(what)?))
    }

    pub(crate) fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array(what)?))
    }

    pub(crate) fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array(what)?))
    }

    pub(crate) fn str(&mut self, what: &str) -> Result<String> {
        let n = self.u16(what)? as usize;
        let bytes = self.take(n, what)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| Error::Format(format!("{what} is not valid UTF-8")))
    }

    pub(crate) fn dims(&mut self, what: &str) -> Result<Vec<usize>> {
        let n = self.u8(what)? as usize;
        (0..n).map(|_| self.u32(what).map(|d| d as usize)).collect()
    }

    pub(crate) fn f32s(&mut self, n: usize, what: &str) -> Result<Vec<f32>> {
        let bytes = n
            .checked_mul(4)
            .ok_or_else(|| Error::Corrupt(format!("{what} of {n} values overflows")))?;
        let raw = self.take(bytes, what)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect())
    }

    pub(crate) fn tensor(&mut self, shape: &[usize], what: &str) -> Result<Tensor<f32>> {
        let n = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::Corrupt(format!("{what} shape {shape:?} overflows")))?;
        Ok(Tensor::from_vec(shape, self.f32s(n, what)?)?)
    }

    /// Fails unless every byte has been consumed.
    pub(crate) fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Corrupt(format!(
                "{} trailing bytes after offset {}",
                self.buf.len() - self.pos,
                self.pos
            )));
        }
        Ok(())
    }
}

pub(crate) fn expect_magic(r: &mut Reader<'_>, magic: &[u8; 4], max_version: u16) -> Result<u16> {
    let got = r
        .take(4, "magic")
        .map_err(|_| Error::Format("file is shorter than its magic number".into()))?;
    if got != magic {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(got),
            std::str::from_utf8(magic).expect("ASCII magic")
        )));
    }
    let version = r.u16("version")?;
    if version == 0 || version > max_version {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    Ok(version)
}

pub(crate) fn read_file(path: &std::path::Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_file(path: &std::path::Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

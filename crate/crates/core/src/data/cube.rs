//! Cube and label rasters, plus their binary containers.
//!
//! `.hsic`: `b"HSIC"`, `u16` version, `u32` H, W, B, then `H·W·B` little-endian
//! `f32` values, band-interleaved by pixel (band fastest).
//!
//! `.hsil`: `b"HSIL"`, `u16` version, `u32` H, W, `u16` K, then `H·W`
//! little-endian `u16` labels with 0 meaning unlabeled.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

const CUBE_MAGIC: &[u8; 4] = b"HSIC";
const LABEL_MAGIC: &[u8; 4] = b"HSIL";
pub const FORMAT_VERSION: u16 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct HsiCube {
    values: Tensor,
}

impl HsiCube {
    /// Wraps a `[H, W, B]` tensor.
    pub fn new(values: Tensor) -> Result<Self> {
        values.dims3()?;
        Ok(Self { values })
    }

    pub fn height(&self) -> usize {
        self.values.shape()[0]
    }

    pub fn width(&self) -> usize {
        self.values.shape()[1]
    }

    pub fn bands(&self) -> usize {
        self.values.shape()[2]
    }

    pub fn values(&self) -> &Tensor {
        &self.values
    }

    pub fn spectrum(&self, row: usize, col: usize) -> &[f32] {
        let b = self.bands();
        let o = (row * self.width() + col) * b;
        &self.values.data()[o..o + b]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(18 + self.values.len() * 4);
        out.extend_from_slice(CUBE_MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        for d in [self.height(), self.width(), self.bands()] {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in self.values.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, "cube file");
        r.magic(CUBE_MAGIC)?;
        r.version()?;
        let (h, w, b) = (r.u32()? as usize, r.u32()? as usize, r.u32()? as usize);
        if h == 0 || w == 0 || b == 0 {
            return Err(r.err(format!("empty cube {h}x{w}x{b}")));
        }
        let n = h
            .checked_mul(w)
            .and_then(|x| x.checked_mul(b))
            .ok_or_else(|| r.err("dimensions overflow".into()))?;
        r.expect_remaining(n * 4)?;
        let data = (0..n).map(|_| r.f32()).collect::<Result<Vec<_>>>()?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(r.err("non-finite reflectance value".into()));
        }
        Self::new(Tensor::new(vec![h, w, b], data)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMap {
    height: usize,
    width: usize,
    num_classes: usize,
    labels: Vec<u16>,
}

impl LabelMap {
    pub fn new(height: usize, width: usize, num_classes: usize, labels: Vec<u16>) -> Result<Self> {
        if labels.len() != height * width {
            return Err(Error::shape(format!(
                "{} labels for a {height}x{width} raster",
                labels.len()
            )));
        }
        if num_classes == 0 || num_classes > u16::MAX as usize {
            return Err(Error::data(format!(
                "class count {num_classes} out of range"
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l as usize > num_classes) {
            return Err(Error::data(format!(
                "label {bad} exceeds class count {num_classes}"
            )));
        }
        Ok(Self {
            height,
            width,
            num_classes,
            labels,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn get(&self, row: usize, col: usize) -> u16 {
        self.labels[row * self.width + col]
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    pub fn labeled_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l != 0).count()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.labels.len() * 2);
        out.extend_from_slice(LABEL_MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.height as u32).to_le_bytes());
        out.extend_from_slice(&(self.width as u32).to_le_bytes());
        out.extend_from_slice(&(self.num_classes as u16).to_le_bytes());
        for l in &self.labels {
            out.extend_from_slice(&l.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, "label file");
        r.magic(LABEL_MAGIC)?;
        r.version()?;
        let (h, w) = (r.u32()? as usize, r.u32()? as usize);
        let k = r.u16()? as usize;
        let n = h
            .checked_mul(w)
            .ok_or_else(|| r.err("dimensions overflow".into()))?;
        r.expect_remaining(n * 2)?;
        let labels = (0..n).map(|_| r.u16()).collect::<Result<Vec<_>>>()?;
        Self::new(h, w, k, labels)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

/// Writes to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(bytes: &'a [u8], what: &'static str) -> Self {
        Self {
            bytes,
            pos: 0,
            what,
        }
    }

    pub(crate) fn err(&self, reason: String) -> Error {
        Error::Format {
            what: self.what,
            reason,
        }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.err(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub(crate) fn magic(&mut self, m: &[u8; 4]) -> Result<()> {
        if self.take(4)? != m {
            return Err(self.err(format!(
                "bad magic, expected {:?}",
                String::from_utf8_lossy(m)
            )));
        }
        Ok(())
    }

    pub(crate) fn version(&mut self) -> Result<u16> {
        let v = self.u16()?;
        if v != FORMAT_VERSION {
            return Err(self.err(format!("unsupported version {v}")));
        }
        Ok(v)
    }

    pub(crate) fn expect_remaining(&self, n: usize) -> Result<()> {
        let left = self.bytes.len() - self.pos;
        if left != n {
            return Err(self.err(format!("payload is {left} bytes, header implies {n}")));
        }
        Ok(())
    }

    pub(crate) fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(
            self.take(2)?.try_into().expect("2 bytes"),
        ))
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    pub(crate) fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_header_layout() {
        let cube = HsiCube::new(Tensor::from_fn(&[2, 3, 4], |i| i as f32)).unwrap();
        let bytes = cube.to_bytes();
        assert_eq!(&bytes[..4], b"HSIC");
        assert_eq!(u16::from_le_bytes([bytes[4], bytes[5]]), 1);
        assert_eq!(u32::from_le_bytes(bytes[6..10].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(bytes[14..18].try_into().unwrap()), 4);
        assert_eq!(bytes.len(), 18 + 24 * 4);
        // pixel (0,1) band 2 is the 7th float
        assert_eq!(
            f32::from_le_bytes(bytes[18 + 6 * 4..18 + 7 * 4].try_into().unwrap()),
            6.0
        );
        assert_eq!(cube.spectrum(0, 1), &[4.0, 5.0, 6.0, 7.0]);
        assert_eq!(HsiCube::from_bytes(&bytes).unwrap(), cube);
    }

    #[test]
    fn cube_rejects_bad_input() {
        let cube = HsiCube::new(Tensor::zeros(&[1, 1, 2])).unwrap();
        let mut bytes = cube.to_bytes();
        assert!(HsiCube::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        bytes[0] = b'X';
        assert!(matches!(
            HsiCube::from_bytes(&bytes),
            Err(Error::Format { .. })
        ));
        let mut nan = cube.to_bytes();
        nan[18..22].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(HsiCube::from_bytes(&nan).is_err());
    }

    #[test]
    fn label_layout_and_validation() {
        let lm = LabelMap::new(2, 2, 3, vec![0, 1, 2, 3]).unwrap();
        let bytes = lm.to_bytes();
        assert_eq!(&bytes[..4], b"HSIL");
        assert_eq!(u16::from_le_bytes([bytes[14], bytes[15]]), 3);
        assert_eq!(bytes.len(), 16 + 8);
        assert_eq!(LabelMap::from_bytes(&bytes).unwrap(), lm);
        assert!(matches!(
            LabelMap::new(1, 2, 2, vec![1, 3]),
            Err(Error::Data(_))
        ));
        assert_eq!(lm.labeled_count(), 3);
    }
}

//! Binary tensor container.
//!
//! Layout (little-endian): magic `FLXT`, `u16` version, `u16` tensor count,
//! then per tensor a `u16`-prefixed UTF-8 name, `u8` dtype (0 = f32, 1 = f64,
//! 2 = u8), `u8` rank, `u32` dims and the row-major payload.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"FLXT";
pub const VERSION: u16 = 1;

#[derive(Clone, Debug, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    F64(Vec<f64>),
    U8(Vec<u8>),
}

impl TensorData {
    fn code(&self) -> u8 {
        match self {
            TensorData::F32(_) => 0,
            TensorData::F64(_) => 1,
            TensorData::U8(_) => 2,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            TensorData::F32(v) => v.len(),
            TensorData::F64(v) => v.len(),
            TensorData::U8(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Values widened to f64.
    pub fn to_f64(&self) -> Vec<f64> {
        match self {
            TensorData::F32(v) => v.iter().map(|&x| x as f64).collect(),
            TensorData::F64(v) => v.clone(),
            TensorData::U8(v) => v.iter().map(|&x| x as f64).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub dims: Vec<u32>,
    pub data: TensorData,
}

impl Tensor {
    pub fn new(name: impl Into<String>, dims: Vec<u32>, data: TensorData) -> Result<Self> {
        let name = name.into();
        let expected: u64 = dims.iter().map(|&d| d as u64).product();
        if expected != data.len() as u64 {
            return Err(Error::shape(format!("{expected} values for dims {dims:?}"), data.len()));
        }
        if name.len() > u16::MAX as usize || dims.len() > u8::MAX as usize {
            return Err(Error::validation("tensor name or rank too long"));
        }
        Ok(Tensor { name, dims, data })
    }

    /// f64 values stored as f32.
    pub fn f32_from(name: impl Into<String>, dims: Vec<u32>, values: &[f64]) -> Result<Self> {
        Self::new(name, dims, TensorData::F32(values.iter().map(|&v| v as f32).collect()))
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TensorContainer {
    tensors: Vec<Tensor>,
}

impl TensorContainer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, tensor: Tensor) -> Result<()> {
        if self.get(&tensor.name).is_some() {
            return Err(Error::validation(format!("duplicate tensor name '{}'", tensor.name)));
        }
        if self.tensors.len() == u16::MAX as usize {
            return Err(Error::validation("too many tensors"));
        }
        self.tensors.push(tensor);
        Ok(())
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn require(&self, name: &str) -> Result<&Tensor> {
        self.get(name).ok_or_else(|| Error::Format(format!("missing tensor '{name}'")))
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.tensors.len() as u16).to_le_bytes())?;
        for t in &self.tensors {
            w.write_all(&(t.name.len() as u16).to_le_bytes())?;
            w.write_all(t.name.as_bytes())?;
            w.write_all(&[t.data.code(), t.dims.len() as u8])?;
            for d in &t.dims {
                w.write_all(&d.to_le_bytes())?;
            }
            match &t.data {
                TensorData::F32(v) => v.iter().try_for_each(|x| w.write_all(&x.to_le_bytes()))?,
                TensorData::F64(v) => v.iter().try_for_each(|x| w.write_all(&x.to_le_bytes()))?,
                TensorData::U8(v) => w.write_all(v)?,
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        read_exact(&mut r, &mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a FLXT container".into()));
        }
        let version = read_u16(&mut r)?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported container version {version}")));
        }
        let count = read_u16(&mut r)?;
        let mut out = TensorContainer::new();
        for _ in 0..count {
            let name_len = read_u16(&mut r)? as usize;
            let mut name = vec![0u8; name_len];
            read_exact(&mut r, &mut name)?;
            let name = String::from_utf8(name).map_err(|_| Error::Format("tensor name is not UTF-8".into()))?;
            let mut head = [0u8; 2];
            read_exact(&mut r, &mut head)?;
            let dims = (0..head[1]).map(|_| read_u32(&mut r)).collect::<Result<Vec<u32>>>()?;
            let n: usize = dims.iter().map(|&d| d as usize).product();
            let data = match head[0] {
                0 => TensorData::F32(read_payload(&mut r, n, 4)?.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect()),
                1 => TensorData::F64(read_payload(&mut r, n, 8)?.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect()),
                2 => TensorData::U8(read_payload(&mut r, n, 1)?),
                code => return Err(Error::Format(format!("unknown dtype code {code}"))),
            };
            out.push(Tensor::new(name, dims, data)?)
                .map_err(|e| Error::Format(e.to_string()))?;
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(Error::Format("trailing bytes after last tensor".into()));
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Self::read_from(bytes)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format("container is truncated".into()),
        _ => Error::Io(e),
    })
}

fn read_u16<R: Read>(r: &mut R) -> Result<u16> {
    let mut b = [0u8; 2];
    read_exact(r, &mut b)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_payload<R: Read>(r: &mut R, n: usize, width: usize) -> Result<Vec<u8>> {
    let bytes = n.checked_mul(width).ok_or_else(|| Error::Format("tensor too large".into()))?;
    let mut buf = Vec::new();
    r.take(bytes as u64).read_to_end(&mut buf)?;
    if buf.len() != bytes {
        return Err(Error::Format("container is truncated".into()));
    }
    Ok(buf)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> TensorContainer {
        let mut c = TensorContainer::new();
        c.push(Tensor::new("a", vec![2, 3], TensorData::F32(vec![1.0, -2.5, 3.0, 0.0, f32::MIN_POSITIVE, 7.0])).unwrap())
            .unwrap();
        c.push(Tensor::new("label", vec![4], TensorData::U8(vec![0, 1, 15, 255])).unwrap()).unwrap();
        c.push(Tensor::new("w", vec![1], TensorData::F64(vec![std::f64::consts::PI])).unwrap()).unwrap();
        c.push(Tensor::new("scalar", vec![], TensorData::F64(vec![1.5])).unwrap()).unwrap();
        c
    }

    #[test]
    fn round_trip_is_bitwise() {
        let c = sample();
        let bytes = c.to_bytes();
        assert_eq!(&bytes[..4], b"FLXT");
        assert_eq!(u16::from_le_bytes([bytes[4], bytes[5]]), 1);
        assert_eq!(u16::from_le_bytes([bytes[6], bytes[7]]), 4);
        let back = TensorContainer::from_bytes(&bytes).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn header_layout() {
        let mut c = TensorContainer::new();
        c.push(Tensor::new("xy", vec![2], TensorData::U8(vec![9, 8])).unwrap()).unwrap();
        let bytes = c.to_bytes();
        let expect: Vec<u8> = [&b"FLXT"[..], &[1, 0, 1, 0, 2, 0], b"xy", &[2, 1, 2, 0, 0, 0, 9, 8]].concat();
        assert_eq!(bytes, expect);
    }

    #[test]
    fn rejects_corruption() {
        let bytes = sample().to_bytes();
        assert!(matches!(TensorContainer::from_bytes(&bytes[..bytes.len() - 1]), Err(Error::Format(_))));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(TensorContainer::from_bytes(&bad).is_err());
        let mut extra = bytes;
        extra.push(0);
        assert!(TensorContainer::from_bytes(&extra).is_err());
    }

    #[test]
    fn rejects_duplicates_and_bad_shapes() {
        let mut c = sample();
        assert!(c.push(Tensor::new("a", vec![1], TensorData::U8(vec![1])).unwrap()).is_err());
        assert!(Tensor::new("b", vec![2, 2], TensorData::U8(vec![1])).is_err());
    }
}

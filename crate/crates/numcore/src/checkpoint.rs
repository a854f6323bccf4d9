//! Versioned binary tensor container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "ICLM"            4 bytes magic
//! version           u32
//! count             u32   number of named tensors
//! per tensor:
//!   name_len        u32
//!   name            UTF-8 bytes
//!   dtype           u8    0 = f32, 1 = f64
//!   rank            u32
//!   dims            rank × u64
//!   data            product(dims) scalars, little-endian
//! ```

use std::io::{Read, Write};

use crate::{DType, NumError, Scalar, Tensor};

pub const CONTAINER_MAGIC: &[u8; 4] = b"ICLM";
pub const CONTAINER_VERSION: u32 = 1;

/// A tensor of either supported precision.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyTensor {
    F32(Tensor<f32>),
    F64(Tensor<f64>),
}

impl AnyTensor {
    pub fn from_typed<T: Scalar>(t: &Tensor<T>) -> AnyTensor {
        match T::DTYPE {
            DType::F32 => AnyTensor::F32(t.cast()),
            DType::F64 => AnyTensor::F64(t.cast()),
        }
    }

    pub fn to_typed<T: Scalar>(&self) -> Tensor<T> {
        match self {
            AnyTensor::F32(t) => t.cast(),
            AnyTensor::F64(t) => t.cast(),
        }
    }

    pub fn dtype(&self) -> DType {
        match self {
            AnyTensor::F32(_) => DType::F32,
            AnyTensor::F64(_) => DType::F64,
        }
    }

    pub fn shape(&self) -> &[usize] {
        match self {
            AnyTensor::F32(t) => t.shape(),
            AnyTensor::F64(t) => t.shape(),
        }
    }
}

fn put_tensor<T: Scalar>(buf: &mut Vec<u8>, t: &Tensor<T>) {
    buf.push(T::DTYPE as u8);
    buf.extend_from_slice(&(t.rank() as u32).to_le_bytes());
    for &d in t.shape() {
        buf.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for &v in t.data() {
        v.write_le(buf);
    }
}

pub fn write_container<W: Write>(mut w: W, tensors: &[(String, AnyTensor)]) -> Result<(), NumError> {
    let mut buf = Vec::new();
    buf.extend_from_slice(CONTAINER_MAGIC);
    buf.extend_from_slice(&CONTAINER_VERSION.to_le_bytes());
    buf.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in tensors {
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        match t {
            AnyTensor::F32(t) => put_tensor(&mut buf, t),
            AnyTensor::F64(t) => put_tensor(&mut buf, t),
        }
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NumError> {
        if self.pos + n > self.bytes.len() {
            return Err(NumError::Format(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, NumError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, NumError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn tensor<T: Scalar>(&mut self, shape: Vec<usize>) -> Result<Tensor<T>, NumError> {
        let n: usize = shape.iter().product();
        let size = T::DTYPE.size();
        let raw = self.take(n * size)?;
        let data = raw.chunks_exact(size).map(T::read_le).collect();
        Tensor::new(shape, data)
    }
}

pub fn read_container<R: Read>(mut r: R) -> Result<Vec<(String, AnyTensor)>, NumError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut c = Cursor { bytes: &bytes, pos: 0 };
    if c.take(4)? != CONTAINER_MAGIC {
        return Err(NumError::Format("bad magic".into()));
    }
    let version = c.u32()?;
    if version != CONTAINER_VERSION {
        return Err(NumError::Format(format!("unsupported version {version}")));
    }
    let count = c.u32()? as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let len = c.u32()? as usize;
        let name = std::str::from_utf8(c.take(len)?)
            .map_err(|e| NumError::Format(format!("tensor name is not UTF-8: {e}")))?
            .to_string();
        let tag = c.take(1)?[0];
        let dtype = DType::from_tag(tag).ok_or_else(|| NumError::Format(format!("unknown dtype tag {tag}")))?;
        let rank = c.u32()? as usize;
        let shape = (0..rank).map(|_| c.u64().map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
        let t = match dtype {
            DType::F32 => AnyTensor::F32(c.tensor(shape)?),
            DType::F64 => AnyTensor::F64(c.tensor(shape)?),
        };
        out.push((name, t));
    }
    if c.pos != bytes.len() {
        return Err(NumError::Format(format!("{} trailing bytes", bytes.len() - c.pos)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let t = vec![("a".to_string(), AnyTensor::F64(Tensor::vector(vec![1.5])))];
        let mut buf = Vec::new();
        write_container(&mut buf, &t).unwrap();
        assert_eq!(&buf[0..4], b"ICLM");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 1);
        // name_len, name, dtype, rank, dim, value
        assert_eq!(buf.len(), 12 + 4 + 1 + 1 + 4 + 8 + 8);
        assert_eq!(buf[17], 1);
        assert_eq!(&buf[buf.len() - 8..], &1.5f64.to_le_bytes());
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        assert!(read_container(&b"XXXX\x01\0\0\0\0\0\0\0"[..]).is_err());
        let t = vec![("w".to_string(), AnyTensor::F32(Tensor::zeros(&[2, 2])))];
        let mut buf = Vec::new();
        write_container(&mut buf, &t).unwrap();
        buf.pop();
        assert!(matches!(read_container(&buf[..]), Err(NumError::Format(_))));
    }
}

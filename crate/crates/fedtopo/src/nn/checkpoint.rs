//! Flat binary checkpoints: magic `FTCK`, version, tensor count, then per
//! tensor a length-prefixed name, rank, dims, and little-endian f64 values.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::model::NamedParam;
use crate::nn::tensor::Tensor;

const MAGIC: &[u8; 4] = b"FTCK";
const VERSION: u32 = 1;

pub fn write_checkpoint(path: &Path, params: &[NamedParam]) -> Result<()> {
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for p in params {
        let name = p.name.as_bytes();
        if name.len() > u16::MAX as usize {
            return Err(Error::InvalidArgument(format!("parameter name too long: {}", p.name)));
        }
        buf.extend_from_slice(&(name.len() as u16).to_le_bytes());
        buf.extend_from_slice(name);
        buf.push(p.value.shape.len() as u8);
        for &d in &p.value.shape {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in &p.value.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.offset + n > self.bytes.len() {
            return Err(Error::Parse {
                location: format!("byte {}", self.offset),
                message: format!("truncated while reading {what}"),
            });
        }
        let s = &self.bytes[self.offset..self.offset + n];
        self.offset += n;
        Ok(s)
    }

    fn u16_le(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32_le(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

pub fn read_checkpoint(path: &Path) -> Result<Vec<NamedParam>> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut r = Reader { bytes: &bytes, offset: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::Parse {
            location: "byte 0".into(),
            message: "bad magic, expected FTCK".into(),
        });
    }
    let version = r.u32_le("version")?;
    if version != VERSION {
        return Err(Error::Parse {
            location: "byte 4".into(),
            message: format!("unsupported version {version}"),
        });
    }
    let count = r.u32_le("tensor count")?;
    let mut params = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let name_len = r.u16_le("name length")? as usize;
        let name = String::from_utf8(r.take(name_len, "name")?.to_vec()).map_err(|e| {
            Error::Parse { location: format!("byte {}", r.offset), message: e.to_string() }
        })?;
        let rank = r.take(1, "rank")?[0] as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32_le("dimension")? as usize);
        }
        let numel: usize = shape.iter().product();
        let raw = r.take(numel * 8, "values")?;
        let data: Vec<f64> =
            raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        params.push(NamedParam { name, value: Tensor::from_vec(&shape, data)? });
    }
    if r.offset != bytes.len() {
        return Err(Error::Parse {
            location: format!("byte {}", r.offset),
            message: "trailing bytes after last tensor".into(),
        });
    }
    Ok(params)
}

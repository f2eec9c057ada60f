//! Flat binary tensor container.
//!
//! Layout: magic bytes `B2V1`, then a little-endian u32 version, then one
//! record per tensor until EOF. Each record is `name_len: u32`, the UTF-8
//! name, `rank: u32`, `rank` extents as u64, and the row-major f64 payload.

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use super::Tensor;
use crate::error::{Error, Result};

pub const CONTAINER_MAGIC: &[u8; 4] = b"B2V1";
const CONTAINER_VERSION: u32 = 1;

pub fn write_tensors<W: Write>(mut w: W, entries: &[(String, &Tensor)]) -> Result<()> {
    w.write_all(CONTAINER_MAGIC)?;
    w.write_all(&CONTAINER_VERSION.to_le_bytes())?;
    for (name, tensor) in entries {
        let bytes = name.as_bytes();
        w.write_all(&(bytes.len() as u32).to_le_bytes())?;
        w.write_all(bytes)?;
        w.write_all(&(tensor.shape().len() as u32).to_le_bytes())?;
        for &extent in tensor.shape() {
            w.write_all(&(extent as u64).to_le_bytes())?;
        }
        for &v in tensor.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_tensors<R: Read>(mut r: R, source: &str) -> Result<Vec<(String, Tensor)>> {
    let bad = |reason: &str| Error::Format {
        path: source.to_string(),
        reason: reason.to_string(),
    };
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != CONTAINER_MAGIC {
        return Err(bad("bad magic bytes"));
    }
    let version = read_u32(&mut r)?;
    if version != CONTAINER_VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }

    let mut out = Vec::new();
    loop {
        let name_len = match try_read_u32(&mut r)? {
            Some(v) => v as usize,
            None => break,
        };
        let mut name_bytes = vec![0u8; name_len];
        r.read_exact(&mut name_bytes)?;
        let name = String::from_utf8(name_bytes).map_err(|_| bad("non-UTF8 tensor name"))?;
        let rank = read_u32(&mut r)? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            let mut buf = [0u8; 8];
            r.read_exact(&mut buf)?;
            shape.push(u64::from_le_bytes(buf) as usize);
        }
        let numel: usize = shape.iter().product();
        let mut data = Vec::with_capacity(numel);
        let mut buf = [0u8; 8];
        for _ in 0..numel {
            r.read_exact(&mut buf)?;
            data.push(f64::from_le_bytes(buf));
        }
        out.push((name, Tensor::from_vec(shape, data)?));
    }
    Ok(out)
}

pub fn save_tensors(path: &Path, entries: &[(String, &Tensor)]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_tensors(&mut w, entries)?;
    w.flush()?;
    Ok(())
}

pub fn load_tensors(path: &Path) -> Result<Vec<(String, Tensor)>> {
    let r = BufReader::new(File::open(path)?);
    read_tensors(r, &path.display().to_string())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

/// Like `read_u32` but maps a clean EOF at a record boundary to `None`.
fn try_read_u32<R: Read>(r: &mut R) -> Result<Option<u32>> {
    let mut buf = [0u8; 4];
    match r.read_exact(&mut buf) {
        Ok(()) => Ok(Some(u32::from_le_bytes(buf))),
        Err(e) if e.kind() == ErrorKind::UnexpectedEof => Ok(None),
        Err(e) => Err(e.into()),
    }
}

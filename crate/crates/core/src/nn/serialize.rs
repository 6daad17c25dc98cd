//! Parameter serialisation.
//!
//! Two formats live here:
//! * named-tensor JSON fragments ([`NamedTensorRef`] / [`NamedTensor`]) used
//!   inside the model document — the borrowed variant serialises directly
//!   from live parameter buffers without copying them;
//! * a compact little-endian binary snapshot used for intra-run checkpoints
//!   (e.g. "best validation epoch so far"), where JSON would be wastefully
//!   large and slow.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Borrowed view of a parameter for zero-copy JSON serialisation.
#[derive(Serialize)]
pub struct NamedTensorRef<'a> {
    pub name: &'a str,
    pub shape: &'a [usize],
    pub data: &'a [f64],
}

/// Owned parameter as read back from a model document.
#[derive(Debug, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl NamedTensor {
    pub fn volume(&self) -> usize {
        self.shape.iter().product()
    }
}

const SNAPSHOT_MAGIC: &[u8; 4] = b"IPSN";
const SNAPSHOT_VERSION: u32 = 1;

/// Writes `(name, shape, data)` triples to a binary snapshot file.
pub fn write_param_snapshot(path: &Path, tensors: &[(&str, &[usize], &[f64])]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::with_capacity(1 << 20, file);
    let io = |e| Error::io(path, e);
    w.write_all(SNAPSHOT_MAGIC).map_err(io)?;
    w.write_all(&SNAPSHOT_VERSION.to_le_bytes()).map_err(io)?;
    w.write_all(&(tensors.len() as u32).to_le_bytes()).map_err(io)?;
    for (name, shape, data) in tensors {
        let volume: usize = shape.iter().product();
        assert_eq!(volume, data.len(), "snapshot tensor '{name}' shape/data mismatch");
        w.write_all(&(name.len() as u32).to_le_bytes()).map_err(io)?;
        w.write_all(name.as_bytes()).map_err(io)?;
        w.write_all(&(shape.len() as u32).to_le_bytes()).map_err(io)?;
        for &d in *shape {
            w.write_all(&(d as u64).to_le_bytes()).map_err(io)?;
        }
        for chunk in data.chunks(4096) {
            let mut buf = Vec::with_capacity(chunk.len() * 8);
            for &v in chunk {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&buf).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

/// Reads back a snapshot written by [`write_param_snapshot`].
pub fn read_param_snapshot(path: &Path) -> Result<Vec<NamedTensor>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::with_capacity(1 << 20, file);
    let malformed = |reason: &str| Error::MalformedModel {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };

    let mut magic = [0u8; 4];
    read_exact(&mut r, &mut magic, path)?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(malformed("bad snapshot magic"));
    }
    let version = read_u32(&mut r, path)?;
    if version != SNAPSHOT_VERSION {
        return Err(malformed(&format!("unsupported snapshot version {version}")));
    }
    let count = read_u32(&mut r, path)? as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = read_u32(&mut r, path)? as usize;
        if name_len > 4096 {
            return Err(malformed("unreasonable tensor name length"));
        }
        let mut name_bytes = vec![0u8; name_len];
        read_exact(&mut r, &mut name_bytes, path)?;
        let name = String::from_utf8(name_bytes).map_err(|_| malformed("tensor name not UTF-8"))?;
        let ndim = read_u32(&mut r, path)? as usize;
        if ndim > 8 {
            return Err(malformed("unreasonable tensor rank"));
        }
        let mut shape = Vec::with_capacity(ndim);
        let mut volume = 1usize;
        for _ in 0..ndim {
            let mut b = [0u8; 8];
            read_exact(&mut r, &mut b, path)?;
            let d = u64::from_le_bytes(b) as usize;
            volume = volume
                .checked_mul(d)
                .ok_or_else(|| malformed("tensor volume overflows"))?;
            shape.push(d);
        }
        let mut data = vec![0.0f64; volume];
        let mut buf = vec![0u8; 4096 * 8];
        let mut filled = 0usize;
        while filled < volume {
            let take = (volume - filled).min(4096);
            let bytes = &mut buf[..take * 8];
            read_exact(&mut r, bytes, path)?;
            for (i, chunk) in bytes.chunks_exact(8).enumerate() {
                data[filled + i] = f64::from_le_bytes(chunk.try_into().unwrap());
            }
            filled += take;
        }
        out.push(NamedTensor { name, shape, data });
    }
    Ok(out)
}

fn read_exact(r: &mut impl Read, buf: &mut [u8], path: &Path) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::MalformedModel { path: path.to_path_buf(), reason: "truncated snapshot".into() }
        } else {
            Error::io(path, e)
        }
    })
}

fn read_u32(r: &mut impl Read, path: &Path) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, path)?;
    Ok(u32::from_le_bytes(b))
}

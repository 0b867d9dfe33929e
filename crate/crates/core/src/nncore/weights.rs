//! `CFW1` weight container.
//!
//! Layout, all little-endian:
//! magic `CFW1`, u32 version, u32 tensor count, then per tensor
//! u32 name length, UTF-8 name, u64 rows, u64 cols, rows·cols f64.
//! Hyperparameters live in a JSON sidecar next to the binary file.

use std::path::{Path, PathBuf};

use super::{NnError, Params, Tensor};

const MAGIC: &[u8; 4] = b"CFW1";
const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum WeightsError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("not a CFW1 file")]
    BadMagic,
    #[error("unsupported CFW1 version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated CFW1 payload")]
    Truncated,
    #[error("tensor name is not valid UTF-8")]
    BadName,
    #[error("sidecar: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Nn(#[from] NnError),
}

pub fn weights_to_bytes(params: &Params) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + params.scalar_count() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for (name, t) in params.iter() {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.rows() as u64).to_le_bytes());
        out.extend_from_slice(&(t.cols() as u64).to_le_bytes());
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], WeightsError> {
        if self.buf.len() < n {
            return Err(WeightsError::Truncated);
        }
        let (head, rest) = self.buf.split_at(n);
        self.buf = rest;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32, WeightsError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, WeightsError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn weights_from_bytes(bytes: &[u8]) -> Result<Params, WeightsError> {
    let mut r = Reader { buf: bytes };
    if r.take(4).map_err(|_| WeightsError::BadMagic)? != MAGIC {
        return Err(WeightsError::BadMagic);
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(WeightsError::UnsupportedVersion(version));
    }
    let count = r.u32()?;
    let mut params = Params::new();
    for _ in 0..count {
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(len)?).map_err(|_| WeightsError::BadName)?.to_string();
        let rows = r.u64()? as usize;
        let cols = r.u64()? as usize;
        let n = rows.checked_mul(cols).ok_or(WeightsError::Truncated)?;
        let raw = r.take(n.checked_mul(8).ok_or(WeightsError::Truncated)?)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        params.add(name, Tensor::from_vec(rows, cols, data)?)?;
    }
    if !r.buf.is_empty() {
        return Err(WeightsError::Truncated);
    }
    Ok(params)
}

fn sidecar(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Writes `path` and its `.json` sidecar.
pub fn write_weights(path: &Path, params: &Params, hyper: &serde_json::Value) -> Result<(), WeightsError> {
    let io = |p: &Path| {
        let p = p.to_path_buf();
        move |source| WeightsError::Io { path: p, source }
    };
    std::fs::write(path, weights_to_bytes(params)).map_err(io(path))?;
    let side = sidecar(path);
    let text = serde_json::to_string_pretty(hyper)?;
    std::fs::write(&side, text).map_err(io(&side))?;
    Ok(())
}

pub fn read_weights(path: &Path) -> Result<(Params, serde_json::Value), WeightsError> {
    let io = |p: &Path| {
        let p = p.to_path_buf();
        move |source| WeightsError::Io { path: p, source }
    };
    let bytes = std::fs::read(path).map_err(io(path))?;
    let params = weights_from_bytes(&bytes)?;
    let side = sidecar(path);
    let text = std::fs::read_to_string(&side).map_err(io(&side))?;
    Ok((params, serde_json::from_str(&text)?))
}

//! Binary model persistence.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic            8 bytes   "MDNECKPT"
//! version          u32       1
//! preprocess       u8        1 = per-modality input layers, 0 = joint
//! reserved         3 bytes   zero
//! n                u64       node count the model was trained for
//! m                u64       attribute count
//! pre_struct_dim   u64
//! pre_attr_dim     u64
//! hidden_count     u64
//! hidden_dims      u64 × hidden_count
//! s_scale          f64       input scaling for structure values
//! a_scale          f64       input scaling for attribute values
//! layers           per layer (fixed traversal order): rows u64, cols u64,
//!                  weights f64 × rows·cols (row-major), bias_len u64,
//!                  bias f64 × bias_len
//! ```
//!
//! The layer order is the parameter traversal order: input layer(s),
//! encoder bottom-up, decoder top-down, output layer(s).

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{LayerSpec, ModelParams};
use crate::tensor::Matrix;

const MAGIC: &[u8; 8] = b"MDNECKPT";
const VERSION: u32 = 1;

pub fn save_checkpoint(params: &ModelParams, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);

    w.write_all(MAGIC).map_err(io)?;
    w.write_all(&VERSION.to_le_bytes()).map_err(io)?;
    w.write_all(&[params.spec.preprocess as u8, 0, 0, 0]).map_err(io)?;
    for v in [
        params.n as u64,
        params.m as u64,
        params.spec.pre_struct_dim as u64,
        params.spec.pre_attr_dim as u64,
        params.spec.hidden_dims.len() as u64,
    ] {
        w.write_all(&v.to_le_bytes()).map_err(io)?;
    }
    for &d in &params.spec.hidden_dims {
        w.write_all(&(d as u64).to_le_bytes()).map_err(io)?;
    }
    w.write_all(&params.s_scale.to_le_bytes()).map_err(io)?;
    w.write_all(&params.a_scale.to_le_bytes()).map_err(io)?;
    for aff in params.affines() {
        w.write_all(&(aff.w.rows() as u64).to_le_bytes()).map_err(io)?;
        w.write_all(&(aff.w.cols() as u64).to_le_bytes()).map_err(io)?;
        for v in aff.w.data() {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
        w.write_all(&(aff.b.len() as u64).to_le_bytes()).map_err(io)?;
        for v in &aff.b {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

struct Reader<'a> {
    inner: BufReader<std::fs::File>,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner
            .read_exact(&mut buf)
            .map_err(|e| Error::io(self.path, e))?;
        Ok(buf)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes::<8>()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes::<8>()?))
    }

    fn dim(&mut self, what: &str) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v)
            .ok()
            .filter(|&d| d <= 1 << 32)
            .ok_or_else(|| Error::Checkpoint(format!("unreasonable {what}: {v}")))
    }
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParams> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader {
        inner: BufReader::new(file),
        path,
    };
    if &r.bytes::<8>()? != MAGIC {
        return Err(Error::Checkpoint("bad magic; not a model checkpoint".into()));
    }
    let version = u32::from_le_bytes(r.bytes::<4>()?);
    if version != VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported version {version} (expected {VERSION})"
        )));
    }
    let flags = r.bytes::<4>()?;
    let preprocess = match flags[0] {
        0 => false,
        1 => true,
        other => return Err(Error::Checkpoint(format!("bad preprocess flag {other}"))),
    };
    let n = r.dim("node count")?;
    let m = r.dim("attribute count")?;
    let pre_struct_dim = r.dim("pre_struct_dim")?;
    let pre_attr_dim = r.dim("pre_attr_dim")?;
    let hidden_count = r.dim("hidden layer count")?;
    if hidden_count > 64 {
        return Err(Error::Checkpoint(format!("unreasonable tower depth {hidden_count}")));
    }
    let mut hidden_dims = Vec::with_capacity(hidden_count);
    for _ in 0..hidden_count {
        hidden_dims.push(r.dim("hidden width")?);
    }
    let spec = LayerSpec {
        pre_struct_dim,
        pre_attr_dim,
        hidden_dims,
        preprocess,
    };
    let s_scale = r.f64()?;
    let a_scale = r.f64()?;

    let mut params = ModelParams::zeros(n, m, spec)
        .map_err(|e| Error::Checkpoint(format!("inconsistent geometry: {e}")))?;
    params.s_scale = s_scale;
    params.a_scale = a_scale;
    for aff in params.affines_mut() {
        let rows = r.dim("weight rows")?;
        let cols = r.dim("weight cols")?;
        if rows != aff.w.rows() || cols != aff.w.cols() {
            return Err(Error::Checkpoint(format!(
                "layer shape {rows}x{cols} does not match geometry {}x{}",
                aff.w.rows(),
                aff.w.cols()
            )));
        }
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            data.push(r.f64()?);
        }
        aff.w = Matrix::from_vec(rows, cols, data)?;
        let b_len = r.dim("bias length")?;
        if b_len != aff.b.len() {
            return Err(Error::Checkpoint(format!(
                "bias length {b_len} does not match geometry {}",
                aff.b.len()
            )));
        }
        for v in aff.b.iter_mut() {
            *v = r.f64()?;
        }
    }
    let mut trailing = [0u8; 1];
    match r.inner.read(&mut trailing) {
        Ok(0) => Ok(params),
        Ok(_) => Err(Error::Checkpoint("trailing bytes after parameters".into())),
        Err(e) => Err(Error::io(path, e)),
    }
}

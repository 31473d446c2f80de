//! `TOMO1` tensor container.
//!
//! One JSON header line, then the raw little-endian payload:
//!
//! ```text
//! {"magic":"TOMO1","dtype":"f32","byte_order":"LE","dims":[16,16,8],"order":"x-fastest"}\n
//! <product(dims) * sizeof(dtype) bytes>
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TomoError};
use crate::geometry::SystemMatrix;

pub const MAGIC: &str = "TOMO1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DType {
    U8,
    U32,
    F32,
    F64,
}

impl DType {
    pub fn size(self) -> usize {
        match self {
            DType::U8 => 1,
            DType::U32 | DType::F32 => 4,
            DType::F64 => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    U8(Vec<u8>),
    U32(Vec<u32>),
    F32(Vec<f32>),
    F64(Vec<f64>),
}

impl TensorData {
    pub fn dtype(&self) -> DType {
        match self {
            TensorData::U8(_) => DType::U8,
            TensorData::U32(_) => DType::U32,
            TensorData::F32(_) => DType::F32,
            TensorData::F64(_) => DType::F64,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            TensorData::U8(v) => v.len(),
            TensorData::U32(v) => v.len(),
            TensorData::F32(v) => v.len(),
            TensorData::F64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Values widened to f64.
    pub fn to_f64(&self) -> Vec<f64> {
        match self {
            TensorData::U8(v) => v.iter().map(|&x| x as f64).collect(),
            TensorData::U32(v) => v.iter().map(|&x| x as f64).collect(),
            TensorData::F32(v) => v.iter().map(|&x| x as f64).collect(),
            TensorData::F64(v) => v.clone(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    magic: String,
    dtype: DType,
    byte_order: String,
    dims: Vec<usize>,
    order: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dims: Vec<usize>,
    pub data: TensorData,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: TensorData) -> Result<Self> {
        let n: usize = dims.iter().product();
        if n != data.len() {
            return Err(TomoError::Shape(format!("dims {dims:?} hold {n} values, data has {}", data.len())));
        }
        Ok(Tensor { dims, data })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            magic: MAGIC.into(),
            dtype: self.data.dtype(),
            byte_order: "LE".into(),
            dims: self.dims.clone(),
            order: "x-fastest".into(),
        };
        let mut out = serde_json::to_vec(&header).expect("header serializes");
        out.push(b'\n');
        out.reserve(self.data.len() * self.data.dtype().size());
        match &self.data {
            TensorData::U8(v) => out.extend_from_slice(v),
            TensorData::U32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            TensorData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            TensorData::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<Self> {
        let bad = |msg: String| TomoError::Format { path: origin.to_path_buf(), msg };
        let nl = bytes.iter().position(|&b| b == b'\n').ok_or_else(|| bad("missing header line".into()))?;
        let header: Header = serde_json::from_slice(&bytes[..nl]).map_err(|e| bad(format!("bad header: {e}")))?;
        if header.magic != MAGIC || header.byte_order != "LE" || header.order != "x-fastest" {
            return Err(bad(format!("unsupported header {:?}", header)));
        }
        let body = &bytes[nl + 1..];
        let n: usize = header.dims.iter().product();
        let size = header.dtype.size();
        if body.len() != n * size {
            return Err(bad(format!("payload is {} bytes, expected {}", body.len(), n * size)));
        }
        let data = match header.dtype {
            DType::U8 => TensorData::U8(body.to_vec()),
            DType::U32 => TensorData::U32(body.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().unwrap())).collect()),
            DType::F32 => TensorData::F32(body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect()),
            DType::F64 => TensorData::F64(body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect()),
        };
        Ok(Tensor { dims: header.dims, data })
    }
}

pub fn write_tensor(path: &Path, t: &Tensor) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| TomoError::io(dir, e))?;
    }
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(|e| TomoError::io(&tmp, e))?;
    f.write_all(&t.to_bytes()).map_err(|e| TomoError::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| TomoError::io(path, e))
}

pub fn read_tensor(path: &Path) -> Result<Tensor> {
    let bytes = fs::read(path).map_err(|e| TomoError::io(path, e))?;
    Tensor::from_bytes(&bytes, path)
}

/// Cache a system matrix in `dir` as `shape.tomo` (u32 `[n_rays, n_voxels]`),
/// `row_ptr.tomo` (u32), `col_idx.tomo` (u32) and `values.tomo` (f64).
pub fn save_system_matrix(dir: &Path, a: &SystemMatrix) -> Result<()> {
    let rp: Vec<u32> = a.row_ptr().iter().map(|&v| v as u32).collect();
    write_tensor(&dir.join("row_ptr.tomo"), &Tensor::new(vec![rp.len()], TensorData::U32(rp))?)?;
    write_tensor(&dir.join("col_idx.tomo"), &Tensor::new(vec![a.nnz()], TensorData::U32(a.col_idx().to_vec()))?)?;
    write_tensor(&dir.join("values.tomo"), &Tensor::new(vec![a.nnz()], TensorData::F64(a.values().to_vec()))?)?;
    let shape = vec![a.n_rays() as u32, a.n_voxels() as u32];
    write_tensor(&dir.join("shape.tomo"), &Tensor::new(vec![2], TensorData::U32(shape))?)
}

pub fn load_system_matrix(dir: &Path) -> Result<SystemMatrix> {
    let get_u32 = |name: &str| -> Result<Vec<u32>> {
        let p = dir.join(name);
        match read_tensor(&p)?.data {
            TensorData::U32(v) => Ok(v),
            _ => Err(TomoError::Format { path: p, msg: "expected u32 tensor".into() }),
        }
    };
    let shape = get_u32("shape.tomo")?;
    let row_ptr = get_u32("row_ptr.tomo")?.into_iter().map(|v| v as usize).collect();
    let col_idx = get_u32("col_idx.tomo")?;
    let vp = dir.join("values.tomo");
    let values = match read_tensor(&vp)?.data {
        TensorData::F64(v) => v,
        _ => return Err(TomoError::Format { path: vp, msg: "expected f64 tensor".into() }),
    };
    let a = SystemMatrix::from_csr(shape[1] as usize, row_ptr, col_idx, values)?;
    if a.n_rays() != shape[0] as usize {
        return Err(TomoError::Shape("cached matrix row count disagrees with its shape".into()));
    }
    Ok(a)
}

//! Voxel volumes and the fixed flattened index convention.
//!
//! Storage order is x-fastest: the 1-based triple `(i1, i2, i3)` lives at
//! `(i3-1)*ny*nx + (i2-1)*nx + (i1-1)`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TomoError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl Dims {
    pub const fn new(nx: usize, ny: usize, nz: usize) -> Self {
        Dims { nx, ny, nz }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// 0-based flat index of 0-based coordinates.
    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        (z * self.ny + y) * self.nx + x
    }

    /// 0-based flat index of the 1-based triple used in the circuit rules.
    #[inline]
    pub fn index1(&self, i1: usize, i2: usize, i3: usize) -> usize {
        self.index(i1 - 1, i2 - 1, i3 - 1)
    }

    #[inline]
    pub fn coords(&self, flat: usize) -> (usize, usize, usize) {
        let x = flat % self.nx;
        let y = (flat / self.nx) % self.ny;
        let z = flat / (self.nx * self.ny);
        (x, y, z)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 || self.nz == 0 {
            return Err(TomoError::Config(format!(
                "volume dims must be positive, got {}x{}x{}",
                self.nx, self.ny, self.nz
            )));
        }
        Ok(())
    }
}

/// Physical voxel edge lengths in micrometers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoxelSize {
    pub sx: f64,
    pub sy: f64,
    pub sz: f64,
}

impl VoxelSize {
    pub const fn new(sx: f64, sy: f64, sz: f64) -> Self {
        VoxelSize { sx, sy, sz }
    }
}

/// Default circuit voxel: 0.15 x 0.15 x 0.30 um.
pub const CIRCUIT_VOXEL: VoxelSize = VoxelSize::new(0.15, 0.15, 0.30);
/// Default circuit grid: 16 x 16 x 8.
pub const CIRCUIT_DIMS: Dims = Dims::new(16, 16, 8);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VolumeKind {
    BinaryTruth,
    Continuous,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoxelVolume {
    dims: Dims,
    voxel_size: VoxelSize,
    values: Vec<f64>,
    kind: VolumeKind,
}

impl VoxelVolume {
    pub fn zeros(dims: Dims, voxel_size: VoxelSize, kind: VolumeKind) -> Self {
        VoxelVolume { dims, voxel_size, values: vec![0.0; dims.len()], kind }
    }

    pub fn from_values(
        dims: Dims,
        voxel_size: VoxelSize,
        values: Vec<f64>,
        kind: VolumeKind,
    ) -> Result<Self> {
        dims.validate()?;
        if values.len() != dims.len() {
            return Err(TomoError::Shape(format!(
                "volume of {}x{}x{} needs {} values, got {}",
                dims.nx,
                dims.ny,
                dims.nz,
                dims.len(),
                values.len()
            )));
        }
        if kind == VolumeKind::BinaryTruth && values.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(TomoError::Type("binary truth volume contains values other than 0/1".into()));
        }
        Ok(VoxelVolume { dims, voxel_size, values, kind })
    }

    /// Binary volume from a bit array in storage order.
    pub fn from_bits(dims: Dims, voxel_size: VoxelSize, bits: &[bool]) -> Result<Self> {
        let values = bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        Self::from_values(dims, voxel_size, values, VolumeKind::BinaryTruth)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn voxel_size(&self) -> VoxelSize {
        self.voxel_size
    }

    pub fn kind(&self) -> VolumeKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.values[self.dims.index(x, y, z)]
    }

    /// Reinterpret as a continuous volume (e.g. a truth used as a solver start).
    pub fn into_continuous(mut self) -> Self {
        self.kind = VolumeKind::Continuous;
        self
    }

    /// Copy with every value clamped into `[lo, hi]`.
    pub fn clipped(&self, lo: f64, hi: f64) -> Self {
        VoxelVolume {
            dims: self.dims,
            voxel_size: self.voxel_size,
            values: self.values.iter().map(|v| v.clamp(lo, hi)).collect(),
            kind: VolumeKind::Continuous,
        }
    }

    pub fn bits(&self) -> Vec<u8> {
        self.values.iter().map(|&v| (v != 0.0) as u8).collect()
    }
}

//! Cone-beam imaging geometry and the ray-traced system matrix.
//!
//! Object frame: the voxel grid is axis-aligned and centered on the origin,
//! the rotation axis is +z. At tilt 0 the source sits at `(0, -d, 0)` and the
//! detector plane is `y = d (M - 1)`, so rays travel along +y. Tilting the
//! sample by `theta` (right-handed about +z) is expressed by rotating source
//! and detector by `-theta` around the stationary grid.
//!
//! Detector pixel `(row, col)` is centered at
//! `x = (col - (cols - 1) / 2) * pitch`, `z = (row - (rows - 1) / 2) * pitch`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, TomoError};
use crate::volume::{Dims, VoxelSize, CIRCUIT_DIMS, CIRCUIT_VOXEL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImagingGeometry {
    #[serde(rename = "source_sample_um")]
    pub source_sample_distance: f64,
    pub magnification: f64,
    pub det_rows: usize,
    pub det_cols: usize,
    #[serde(rename = "pixel_pitch_um")]
    pub pixel_pitch: f64,
    #[serde(rename = "tilt_angles_deg")]
    pub tilt_angles: Vec<f64>,
}

impl Default for ImagingGeometry {
    fn default() -> Self {
        default_geometry()
    }
}

/// 10 um source-sample distance, magnification 5000, 32x32 pixels of 420 um,
/// eight tilts from -30 to 22.5 degrees in 7.5 degree steps.
pub fn default_geometry() -> ImagingGeometry {
    ImagingGeometry {
        source_sample_distance: 10.0,
        magnification: 5000.0,
        det_rows: 32,
        det_cols: 32,
        pixel_pitch: 420.0,
        tilt_angles: (0..8).map(|k| -30.0 + 7.5 * k as f64).collect(),
    }
}

impl ImagingGeometry {
    pub fn source_detector_distance(&self) -> f64 {
        self.magnification * self.source_sample_distance
    }

    /// Detector (width, height) in micrometers.
    pub fn detector_extent(&self) -> (f64, f64) {
        (self.det_cols as f64 * self.pixel_pitch, self.det_rows as f64 * self.pixel_pitch)
    }

    pub fn n_angles(&self) -> usize {
        self.tilt_angles.len()
    }

    pub fn n_rays(&self) -> usize {
        self.det_rows * self.det_cols * self.n_angles()
    }

    /// Row index of the ray through `(angle, row, col)`.
    #[inline]
    pub fn ray_index(&self, angle: usize, row: usize, col: usize) -> usize {
        col + self.det_cols * (row + self.det_rows * angle)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(TomoError::Config(m));
        if !(self.source_sample_distance > 0.0) {
            return bad(format!("source_sample_um must be positive, got {}", self.source_sample_distance));
        }
        if !(self.magnification > 1.0) {
            return bad(format!("magnification must exceed 1, got {}", self.magnification));
        }
        if self.det_rows == 0 || self.det_cols == 0 {
            return bad("detector must have at least one pixel".into());
        }
        if !(self.pixel_pitch > 0.0) {
            return bad(format!("pixel_pitch_um must be positive, got {}", self.pixel_pitch));
        }
        if self.tilt_angles.is_empty() {
            return bad("at least one tilt angle is required".into());
        }
        if self.tilt_angles.iter().any(|a| !(a.abs() < 90.0)) {
            return bad("tilt angles must lie in (-90, 90) degrees".into());
        }
        if self.tilt_angles.windows(2).any(|w| w[1] <= w[0]) {
            return bad("tilt angles must be strictly increasing".into());
        }
        Ok(())
    }

    /// Source point in the object frame for tilt `angle`.
    pub fn source_position(&self, angle: usize) -> [f64; 3] {
        rotate_z([0.0, -self.source_sample_distance, 0.0], -self.tilt_angles[angle].to_radians())
    }

    /// Center of detector pixel `(row, col)` in the object frame for tilt `angle`.
    pub fn pixel_center(&self, angle: usize, row: usize, col: usize) -> [f64; 3] {
        let d = self.source_sample_distance;
        let u = (col as f64 - (self.det_cols as f64 - 1.0) / 2.0) * self.pixel_pitch;
        let v = (row as f64 - (self.det_rows as f64 - 1.0) / 2.0) * self.pixel_pitch;
        let y = d * (self.magnification - 1.0);
        rotate_z([u, y, v], -self.tilt_angles[angle].to_radians())
    }

    /// Short stable digest of the geometry, used for provenance.
    pub fn hash_with(&self, grid: &Grid) -> String {
        let doc = serde_json::json!({ "geometry": self, "grid": grid });
        let digest = Sha256::digest(doc.to_string().as_bytes());
        hex::encode(&digest[..8])
    }
}

fn rotate_z(p: [f64; 3], angle: f64) -> [f64; 3] {
    let (s, c) = angle.sin_cos();
    [c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub angle_index: usize,
    pub pixel_row: usize,
    pub pixel_col: usize,
    pub origin: [f64; 3],
    pub direction: [f64; 3],
}

impl Ray {
    /// Ray from `origin` toward `target`.
    pub fn toward(origin: [f64; 3], target: [f64; 3]) -> Result<Ray> {
        let d = [target[0] - origin[0], target[1] - origin[1], target[2] - origin[2]];
        Ok(Ray { angle_index: 0, pixel_row: 0, pixel_col: 0, origin, direction: normalize(d)? })
    }
}

fn normalize(d: [f64; 3]) -> Result<[f64; 3]> {
    let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    if !(n > 0.0) || !n.is_finite() {
        return Err(TomoError::Geometry(format!("degenerate ray direction {d:?}")));
    }
    Ok([d[0] / n, d[1] / n, d[2] / n])
}

/// All rays in system-matrix row order.
pub fn enumerate_rays(g: &ImagingGeometry) -> Result<Vec<Ray>> {
    g.validate()?;
    let mut rays = Vec::with_capacity(g.n_rays());
    for a in 0..g.n_angles() {
        let src = g.source_position(a);
        for row in 0..g.det_rows {
            for col in 0..g.det_cols {
                let mut ray = Ray::toward(src, g.pixel_center(a, row, col))?;
                ray.angle_index = a;
                ray.pixel_row = row;
                ray.pixel_col = col;
                rays.push(ray);
            }
        }
    }
    Ok(rays)
}

/// Voxel grid centered on the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dims: Dims,
    pub voxel_size: VoxelSize,
}

impl Default for Grid {
    fn default() -> Self {
        Grid { dims: CIRCUIT_DIMS, voxel_size: CIRCUIT_VOXEL }
    }
}

impl Grid {
    pub fn new(dims: Dims, voxel_size: VoxelSize) -> Self {
        Grid { dims, voxel_size }
    }

    fn n(&self) -> [usize; 3] {
        [self.dims.nx, self.dims.ny, self.dims.nz]
    }

    fn spacing(&self) -> [f64; 3] {
        [self.voxel_size.sx, self.voxel_size.sy, self.voxel_size.sz]
    }

    /// Lower corner of the bounding box.
    pub fn lower(&self) -> [f64; 3] {
        let (n, s) = (self.n(), self.spacing());
        [-0.5 * n[0] as f64 * s[0], -0.5 * n[1] as f64 * s[1], -0.5 * n[2] as f64 * s[2]]
    }

    pub fn upper(&self) -> [f64; 3] {
        let l = self.lower();
        [-l[0], -l[1], -l[2]]
    }

    /// Center of voxel `(x, y, z)` (0-based).
    pub fn voxel_center(&self, x: usize, y: usize, z: usize) -> [f64; 3] {
        let (l, s) = (self.lower(), self.spacing());
        [
            l[0] + (x as f64 + 0.5) * s[0],
            l[1] + (y as f64 + 0.5) * s[1],
            l[2] + (z as f64 + 0.5) * s[2],
        ]
    }

    pub fn validate(&self) -> Result<()> {
        self.dims.validate()?;
        if self.spacing().iter().any(|&s| !(s > 0.0)) {
            return Err(TomoError::Geometry(format!("voxel sizes must be positive: {:?}", self.voxel_size)));
        }
        Ok(())
    }
}

/// Parametric interval `[t_in, t_out]` of the ray inside the grid's bounding
/// box, by slab clipping. `None` when the ray misses.
pub fn box_clip(ray: &Ray, grid: &Grid) -> Option<(f64, f64)> {
    let (lo, hi) = (grid.lower(), grid.upper());
    let mut t0 = f64::NEG_INFINITY;
    let mut t1 = f64::INFINITY;
    for k in 0..3 {
        let (o, d) = (ray.origin[k], ray.direction[k]);
        if d == 0.0 {
            if o < lo[k] || o > hi[k] {
                return None;
            }
            continue;
        }
        let a = (lo[k] - o) / d;
        let b = (hi[k] - o) / d;
        t0 = t0.max(a.min(b));
        t1 = t1.min(a.max(b));
    }
    let t0 = t0.max(0.0);
    (t1 > t0).then_some((t0, t1))
}

/// Exact intersection lengths of `ray` with every voxel it crosses
/// (Siddon's plane-crossing method). Voxel indices follow the flat storage
/// order; lengths are in micrometers.
pub fn trace_ray(ray: &Ray, grid: &Grid) -> Result<Vec<(u32, f64)>> {
    grid.validate()?;
    let d = ray.direction;
    let norm = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(TomoError::Geometry(format!("degenerate ray direction {d:?}")));
    }
    let d = [d[0] / norm, d[1] / norm, d[2] / norm];
    let ray = Ray { direction: d, ..*ray };

    let Some((t_in, t_out)) = box_clip(&ray, grid) else {
        return Ok(Vec::new());
    };

    let (lo, n, s) = (grid.lower(), grid.n(), grid.spacing());
    let mut ts = Vec::with_capacity(n[0] + n[1] + n[2] + 2);
    ts.push(t_in);
    for k in 0..3 {
        if d[k] == 0.0 {
            continue;
        }
        for plane in 0..=n[k] {
            let t = (lo[k] + plane as f64 * s[k] - ray.origin[k]) / d[k];
            if t > t_in && t < t_out {
                ts.push(t);
            }
        }
    }
    ts.push(t_out);
    ts.sort_by(|a, b| a.total_cmp(b));

    let mut entries: Vec<(u32, f64)> = Vec::with_capacity(ts.len());
    for w in ts.windows(2) {
        let len = w[1] - w[0];
        if !(len > 0.0) {
            continue;
        }
        let tm = 0.5 * (w[0] + w[1]);
        let mut idx = [0usize; 3];
        for k in 0..3 {
            let p = ray.origin[k] + tm * d[k];
            let cell = ((p - lo[k]) / s[k]).floor();
            idx[k] = (cell.max(0.0) as usize).min(n[k] - 1);
        }
        let flat = grid.dims.index(idx[0], idx[1], idx[2]) as u32;
        // Coincident planes can split one voxel into adjacent pieces.
        match entries.last_mut() {
            Some(last) if last.0 == flat => last.1 += len,
            _ => entries.push((flat, len)),
        }
    }
    Ok(entries)
}

/// Row-sparse (CSR) ray-by-voxel path-length matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrix {
    n_rays: usize,
    n_voxels: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<f64>,
}

impl SystemMatrix {
    pub fn from_rows(n_voxels: usize, rows: Vec<Vec<(u32, f64)>>) -> Result<Self> {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let nnz: usize = rows.iter().map(Vec::len).sum();
        let mut col_idx = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for row in &rows {
            for &(j, v) in row {
                if j as usize >= n_voxels {
                    return Err(TomoError::Shape(format!("voxel index {j} out of range {n_voxels}")));
                }
                col_idx.push(j);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Ok(SystemMatrix { n_rays: rows.len(), n_voxels, row_ptr, col_idx, values })
    }

    /// Build from raw CSR arrays, validating their structure.
    pub fn from_csr(
        n_voxels: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<u32>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let ok = !row_ptr.is_empty()
            && row_ptr[0] == 0
            && row_ptr.windows(2).all(|w| w[0] <= w[1])
            && *row_ptr.last().unwrap() == col_idx.len()
            && col_idx.len() == values.len()
            && col_idx.iter().all(|&j| (j as usize) < n_voxels);
        if !ok {
            return Err(TomoError::Shape("inconsistent CSR arrays".into()));
        }
        Ok(SystemMatrix { n_rays: row_ptr.len() - 1, n_voxels, row_ptr, col_idx, values })
    }

    pub fn n_rays(&self) -> usize {
        self.n_rays
    }

    pub fn n_voxels(&self) -> usize {
        self.n_voxels
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[u32] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn row(&self, r: usize) -> (&[u32], &[f64]) {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        (&self.col_idx[a..b], &self.values[a..b])
    }

    /// `A f`.
    pub fn forward(&self, f: &[f64]) -> Vec<f64> {
        (0..self.n_rays)
            .map(|r| {
                let (cols, vals) = self.row(r);
                cols.iter().zip(vals).map(|(&j, &a)| a * f[j as usize]).sum()
            })
            .collect()
    }

    /// `A^T y`, accumulated in fixed row order.
    pub fn back(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_voxels];
        for (r, &yr) in y.iter().enumerate().take(self.n_rays) {
            if yr == 0.0 {
                continue;
            }
            let (cols, vals) = self.row(r);
            for (&j, &a) in cols.iter().zip(vals) {
                out[j as usize] += a * yr;
            }
        }
        out
    }

    pub fn row_sum(&self, r: usize) -> f64 {
        self.row(r).1.iter().sum()
    }

    /// Whether each voxel is crossed by at least one ray.
    pub fn column_support(&self) -> Vec<bool> {
        let mut seen = vec![false; self.n_voxels];
        for &j in &self.col_idx {
            seen[j as usize] = true;
        }
        seen
    }
}

pub fn build_system_matrix(g: &ImagingGeometry, grid: &Grid) -> Result<SystemMatrix> {
    grid.validate()?;
    let rays = enumerate_rays(g)?;
    let rows = rays
        .par_iter()
        .map(|r| trace_ray(r, grid))
        .collect::<Result<Vec<_>>>()?;
    SystemMatrix::from_rows(grid.dims.len(), rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_derived_quantities() {
        let g = default_geometry();
        assert_eq!(g.source_detector_distance(), 50_000.0);
        assert_eq!(g.detector_extent(), (13_440.0, 13_440.0));
        assert_eq!(g.n_angles(), 8);
        assert_eq!(g.tilt_angles.last(), Some(&22.5));
        g.validate().unwrap();
    }

    #[test]
    fn geometry_validation() {
        let mut g = default_geometry();
        g.tilt_angles = vec![0.0, 0.0];
        assert!(g.validate().is_err());
        g.tilt_angles = vec![-95.0];
        assert!(g.validate().is_err());
        let g = ImagingGeometry { pixel_pitch: 0.0, ..default_geometry() };
        assert!(g.validate().is_err());
    }

    #[test]
    fn axis_aligned_ray_crosses_sixteen_voxels() {
        let grid = Grid::default();
        // Through the middle of a voxel row (avoid planes at y = 0 etc.).
        let ray = Ray::toward([-5.0, 0.075, 0.15], [5.0, 0.075, 0.15]).unwrap();
        let e = trace_ray(&ray, &grid).unwrap();
        assert_eq!(e.len(), 16);
        for &(_, l) in &e {
            assert!((l - 0.15).abs() < 1e-12);
        }
        let sum: f64 = e.iter().map(|p| p.1).sum();
        assert!((sum - 2.4).abs() < 1e-12);
    }

    #[test]
    fn missing_ray_is_empty() {
        let grid = Grid::default();
        let ray = Ray::toward([-5.0, 3.0, 0.0], [5.0, 3.0, 0.0]).unwrap();
        assert!(trace_ray(&ray, &grid).unwrap().is_empty());
        // Pointing away from the box.
        let ray = Ray::toward([0.0, -5.0, 0.0], [0.0, -6.0, 0.0]).unwrap();
        assert!(trace_ray(&ray, &grid).unwrap().is_empty());
    }

    #[test]
    fn zero_direction_is_rejected() {
        let ray = Ray { angle_index: 0, pixel_row: 0, pixel_col: 0, origin: [0.0; 3], direction: [0.0; 3] };
        assert!(matches!(trace_ray(&ray, &Grid::default()), Err(TomoError::Geometry(_))));
        assert!(Ray::toward([1.0, 1.0, 1.0], [1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn central_ray_runs_along_y() {
        // Odd detector so a pixel sits on the optical axis.
        let g = ImagingGeometry { det_rows: 33, det_cols: 33, tilt_angles: vec![0.0], ..default_geometry() };
        let rays = enumerate_rays(&g).unwrap();
        let c = &rays[g.ray_index(0, 16, 16)];
        assert!(c.direction[0].abs() < 1e-15 && c.direction[2].abs() < 1e-15);
        assert!((c.direction[1] - 1.0).abs() < 1e-15);
        assert!(c.origin[1] < 0.0);
    }

    #[test]
    fn ray_order_and_unit_directions() {
        let g = default_geometry();
        let rays = enumerate_rays(&g).unwrap();
        assert_eq!(rays.len(), 8192);
        for (i, r) in rays.iter().enumerate() {
            assert_eq!(g.ray_index(r.angle_index, r.pixel_row, r.pixel_col), i);
            let n = r.direction.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-12);
        }
        let mut shuffled = g.clone();
        shuffled.tilt_angles = vec![-10.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0];
        assert_eq!(enumerate_rays(&shuffled).unwrap().len(), rays.len());
    }

    #[test]
    fn object_plane_pixel_footprint() {
        let g = default_geometry();
        let footprint = g.pixel_pitch / g.magnification;
        assert!((footprint - 0.084).abs() < 1e-15);
        assert!(footprint * g.det_cols as f64 >= 2.4);
    }
}

//! Filtered back-projection baseline for the shallow cone.
//!
//! Line integrals are cosine-weighted, ramp filtered along detector columns
//! (each detector row independently; rows run parallel to the rotation
//! axis), then back-projected voxel by voxel with the cone magnification and
//! the usual inverse-square distance weight. All detector coordinates are
//! scaled to the plane through the rotation axis.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TomoError};
use crate::forward::{Measurement, Spectrum};
use crate::geometry::{Grid, ImagingGeometry};
use crate::recon_mle::Reconstruction;
use crate::volume::{VolumeKind, VoxelVolume};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Filter {
    #[default]
    Ramp,
    RampHann,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FbpSettings {
    pub filter: Filter,
    /// Count floor applied before taking logs.
    pub log_guard: f64,
}

impl Default for FbpSettings {
    fn default() -> Self {
        FbpSettings { filter: Filter::Ramp, log_guard: 0.5 }
    }
}

impl FbpSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.log_guard > 0.0) {
            return Err(TomoError::Config(format!("log_guard must be positive, got {}", self.log_guard)));
        }
        Ok(())
    }
}

/// `-ln(max(g, guard) / N0) / mu_eff` per ray, in micrometers of copper.
pub fn line_integrals(m: &Measurement, s: &Spectrum, log_guard: f64) -> Vec<f64> {
    let mu = s.mean_mu();
    let n0 = m.photons_per_ray;
    m.observed
        .iter()
        .map(|&g| -((g as f64).max(log_guard) / n0).ln() / mu)
        .collect()
}

/// Spatial filter taps `h[0..len]` (symmetric) for sample spacing `tau`.
pub fn filter_taps(filter: Filter, len: usize, tau: f64) -> Vec<f64> {
    let pi2 = std::f64::consts::PI * std::f64::consts::PI;
    let mut h: Vec<f64> = match filter {
        Filter::Ramp => (0..len)
            .map(|n| match n {
                0 => 1.0 / (4.0 * tau * tau),
                n if n % 2 == 1 => -1.0 / ((n * n) as f64 * pi2 * tau * tau),
                _ => 0.0,
            })
            .collect(),
        Filter::RampHann => (0..len).map(|n| windowed_ramp_tap(n, tau)).collect(),
    };
    // Zero DC gain for the truncated kernel.
    let off: f64 = h[1..].iter().sum::<f64>() * 2.0;
    h[0] = -off;
    h
}

/// `int_{-B}^{B} |nu| (1 + cos(pi nu / B)) / 2 cos(2 pi nu n tau) d nu`,
/// `B = 1 / (2 tau)`, by composite Simpson quadrature.
fn windowed_ramp_tap(n: usize, tau: f64) -> f64 {
    let band = 0.5 / tau;
    let steps = 4096;
    let h = band / steps as f64;
    let integrand = |nu: f64| {
        let w = 0.5 * (1.0 + (std::f64::consts::PI * nu / band).cos());
        nu * w * (2.0 * std::f64::consts::PI * nu * n as f64 * tau).cos()
    };
    let mut acc = integrand(0.0) + integrand(band);
    for k in 1..steps {
        let c = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += c * integrand(k as f64 * h);
    }
    2.0 * acc * h / 3.0
}

/// Filter one detector row with edge-replicated extension.
fn filter_row(row: &[f64], taps: &[f64], tau: f64) -> Vec<f64> {
    let n = row.len() as isize;
    let at = |k: isize| row[k.clamp(0, n - 1) as usize];
    (0..n)
        .map(|c| {
            let mut acc = taps[0] * at(c);
            for (m, &h) in taps.iter().enumerate().skip(1) {
                if h != 0.0 {
                    let m = m as isize;
                    acc += h * (at(c - m) + at(c + m));
                }
            }
            tau * acc
        })
        .collect()
}

/// Cosine-weight and filter every detector row of every angle. Input and
/// output are in system-matrix ray order.
pub fn filter_projections(p: &[f64], g: &ImagingGeometry, filter: Filter) -> Result<Vec<f64>> {
    if p.len() != g.n_rays() {
        return Err(TomoError::Shape(format!("{} line integrals for {} rays", p.len(), g.n_rays())));
    }
    let d = g.source_sample_distance;
    let tau = g.pixel_pitch / g.magnification;
    let (rows, cols) = (g.det_rows, g.det_cols);
    let taps = filter_taps(filter, cols, tau);
    let mut out = vec![0.0; p.len()];
    for a in 0..g.n_angles() {
        for r in 0..rows {
            let v = (r as f64 - (rows as f64 - 1.0) / 2.0) * tau;
            let base = g.ray_index(a, r, 0);
            let weighted: Vec<f64> = (0..cols)
                .map(|c| {
                    let u = (c as f64 - (cols as f64 - 1.0) / 2.0) * tau;
                    p[base + c] * d / (d * d + u * u + v * v).sqrt()
                })
                .collect();
            out[base..base + cols].copy_from_slice(&filter_row(&weighted, &taps, tau));
        }
    }
    Ok(out)
}

/// Voxel-driven weighted backprojection of filtered projections.
pub fn backproject(q: &[f64], g: &ImagingGeometry, grid: &Grid) -> Result<Vec<f64>> {
    if q.len() != g.n_rays() {
        return Err(TomoError::Shape(format!("{} filtered values for {} rays", q.len(), g.n_rays())));
    }
    let d = g.source_sample_distance;
    let tau = g.pixel_pitch / g.magnification;
    let (rows, cols) = (g.det_rows, g.det_cols);
    let weight = std::f64::consts::PI / g.n_angles() as f64;
    let dims = grid.dims;
    let trig: Vec<(f64, f64)> = g.tilt_angles.iter().map(|t| t.to_radians().sin_cos()).collect();

    let sample = |a: usize, row: f64, col: f64| -> f64 {
        if row < 0.0 || col < 0.0 || row > (rows - 1) as f64 || col > (cols - 1) as f64 {
            return 0.0;
        }
        let (r0, c0) = (row.floor() as usize, col.floor() as usize);
        let (r1, c1) = ((r0 + 1).min(rows - 1), (c0 + 1).min(cols - 1));
        let (fr, fc) = (row - r0 as f64, col - c0 as f64);
        let v = |r: usize, c: usize| q[g.ray_index(a, r, c)];
        (1.0 - fr) * ((1.0 - fc) * v(r0, c0) + fc * v(r0, c1)) + fr * ((1.0 - fc) * v(r1, c0) + fc * v(r1, c1))
    };

    let mut out = vec![0.0; dims.len()];
    for (j, o) in out.iter_mut().enumerate() {
        let (x, y, z) = dims.coords(j);
        let p = grid.voxel_center(x, y, z);
        let mut acc = 0.0;
        for (a, &(s, c)) in trig.iter().enumerate() {
            // Object point expressed in the untilted source/detector frame.
            let xr = c * p[0] - s * p[1];
            let yr = s * p[0] + c * p[1];
            let depth = d + yr;
            let mag = d / depth;
            let u = xr * mag;
            let v = p[2] * mag;
            let col = u / tau + (cols as f64 - 1.0) / 2.0;
            let row = v / tau + (rows as f64 - 1.0) / 2.0;
            acc += mag * mag * sample(a, row, col);
        }
        *o = weight * acc;
    }
    Ok(out)
}

/// Unclipped FBP volume from line integrals; linear in `p`.
pub fn fbp_from_line_integrals(p: &[f64], g: &ImagingGeometry, grid: &Grid, settings: &FbpSettings) -> Result<Vec<f64>> {
    let q = filter_projections(p, g, settings.filter)?;
    backproject(&q, g, grid)
}

pub fn reconstruct_fbp(
    m: &Measurement,
    g: &ImagingGeometry,
    grid: &Grid,
    spectrum: &Spectrum,
    settings: &FbpSettings,
) -> Result<Reconstruction> {
    settings.validate()?;
    g.validate()?;
    let p = line_integrals(m, spectrum, settings.log_guard);
    let raw = fbp_from_line_integrals(&p, g, grid, settings)?;
    let volume = VoxelVolume::from_values(grid.dims, grid.voxel_size, raw, VolumeKind::Continuous)?.clipped(0.0, 2.0);
    Ok(Reconstruction {
        volume,
        iterations_used: 0,
        final_objective: f64::NAN,
        converged: true,
        settings_hash: {
            use sha2::{Digest, Sha256};
            let doc = serde_json::json!({ "fbp": settings });
            hex::encode(&Sha256::digest(doc.to_string().as_bytes())[..8])
        },
        objective_history: Vec::new(),
        projected_gradient: f64::NAN,
        untraversed_voxels: 0,
    })
}

//! Beer's-law forward model and Poisson measurement noise.

use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TomoError};
use crate::geometry::{build_system_matrix, Grid, ImagingGeometry, SystemMatrix};
use crate::rng::{self, tag};
use crate::volume::VoxelVolume;

/// Copper attenuation that removes 2% of a ray crossing one 0.15 um voxel.
pub fn default_mu() -> f64 {
    -(0.98f64).ln() / 0.15
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralLine {
    pub energy_ev: f64,
    pub weight: f64,
    pub mu_per_um: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub lines: Vec<SpectralLine>,
    pub photons_per_ray: f64,
}

impl Default for Spectrum {
    fn default() -> Self {
        Spectrum::platinum_l_alpha(256.0)
    }
}

impl Spectrum {
    /// Two equally weighted lines at 9362 eV and 9442 eV, both with the
    /// default copper attenuation.
    pub fn platinum_l_alpha(photons_per_ray: f64) -> Self {
        let mu = default_mu();
        Spectrum {
            lines: vec![
                SpectralLine { energy_ev: 9362.0, weight: 0.5, mu_per_um: mu },
                SpectralLine { energy_ev: 9442.0, weight: 0.5, mu_per_um: mu },
            ],
            photons_per_ray,
        }
    }

    pub fn monochromatic(mu_per_um: f64, photons_per_ray: f64) -> Self {
        Spectrum {
            lines: vec![SpectralLine { energy_ev: 0.0, weight: 1.0, mu_per_um }],
            photons_per_ray,
        }
    }

    pub fn with_photons(&self, photons_per_ray: f64) -> Self {
        Spectrum { lines: self.lines.clone(), photons_per_ray }
    }

    /// Weight-averaged attenuation.
    pub fn mean_mu(&self) -> f64 {
        self.lines.iter().map(|l| l.weight * l.mu_per_um).sum()
    }

    /// Single line carrying the weight-averaged attenuation.
    pub fn effective(&self) -> Self {
        let e = self.lines.iter().map(|l| l.weight * l.energy_ev).sum();
        Spectrum {
            lines: vec![SpectralLine { energy_ev: e, weight: 1.0, mu_per_um: self.mean_mu() }],
            photons_per_ray: self.photons_per_ray,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lines.is_empty() {
            return Err(TomoError::Config("spectrum needs at least one line".into()));
        }
        if !(self.photons_per_ray > 0.0) || !self.photons_per_ray.is_finite() {
            return Err(TomoError::Config(format!(
                "photons_per_ray must be positive, got {}",
                self.photons_per_ray
            )));
        }
        for l in &self.lines {
            if !(l.mu_per_um > 0.0) {
                return Err(TomoError::Config(format!("line mu must be positive, got {}", l.mu_per_um)));
            }
            if !(l.weight > 0.0 && l.weight <= 1.0) {
                return Err(TomoError::Config(format!("line weight must lie in (0, 1], got {}", l.weight)));
            }
        }
        let total: f64 = self.lines.iter().map(|l| l.weight).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(TomoError::Config(format!("line weights sum to {total}, expected 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub expected: Vec<f64>,
    pub observed: Vec<u32>,
    pub geometry_hash: String,
    pub seed: u64,
    pub photons_per_ray: f64,
}

impl Measurement {
    pub fn n_rays(&self) -> usize {
        self.expected.len()
    }
}

fn check_columns(a: &SystemMatrix, n: usize) -> Result<()> {
    if a.n_voxels() != n {
        return Err(TomoError::Shape(format!(
            "system matrix has {} columns but the volume has {} voxels",
            a.n_voxels(),
            n
        )));
    }
    Ok(())
}

/// Expected counts from line integrals `(A f)_i`.
pub fn counts_from_projection(projection: &[f64], s: &Spectrum) -> Vec<f64> {
    projection
        .iter()
        .map(|&p| {
            let transmitted: f64 = s.lines.iter().map(|l| l.weight * (-l.mu_per_um * p).exp()).sum();
            s.photons_per_ray * transmitted
        })
        .collect()
}

/// `g0_i = N0 * sum_l w_l exp(-mu_l (A f)_i)`.
pub fn expected_counts(a: &SystemMatrix, f: &[f64], s: &Spectrum) -> Result<Vec<f64>> {
    check_columns(a, f.len())?;
    Ok(counts_from_projection(&a.forward(f), s))
}

pub fn sample_poisson(expected: &[f64], seed: u64) -> Result<Vec<u32>> {
    expected
        .par_iter()
        .enumerate()
        .map(|(i, &lambda)| {
            if !(lambda > 0.0) || !lambda.is_finite() {
                return Err(TomoError::Domain(format!("ray {i} has nonpositive expectation {lambda}")));
            }
            let dist = Poisson::new(lambda).map_err(|e| TomoError::Domain(e.to_string()))?;
            let mut rng = rng::substream(seed, tag::POISSON, i as u64);
            let k: f64 = dist.sample(&mut rng);
            Ok(k.min(u32::MAX as f64) as u32)
        })
        .collect()
}

/// Forward-project `f` through an already built matrix and draw counts.
pub fn simulate_with(
    a: &SystemMatrix,
    geometry_hash: &str,
    f: &VoxelVolume,
    s: &Spectrum,
    seed: u64,
) -> Result<Measurement> {
    s.validate()?;
    let expected = expected_counts(a, f.values(), s)?;
    let observed = sample_poisson(&expected, seed)?;
    Ok(Measurement {
        expected,
        observed,
        geometry_hash: geometry_hash.to_string(),
        seed,
        photons_per_ray: s.photons_per_ray,
    })
}

pub fn simulate(g: &ImagingGeometry, f: &VoxelVolume, s: &Spectrum, seed: u64) -> Result<Measurement> {
    let grid = Grid::new(f.dims(), f.voxel_size());
    let a = build_system_matrix(g, &grid)?;
    simulate_with(&a, &g.hash_with(&grid), f, s, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{trace_ray, Ray};
    use crate::volume::{Dims, VolumeKind, CIRCUIT_VOXEL};

    fn one_ray_matrix() -> SystemMatrix {
        let grid = Grid::default();
        let ray = Ray::toward([-5.0, 0.075, 0.15], [5.0, 0.075, 0.15]).unwrap();
        SystemMatrix::from_rows(grid.dims.len(), vec![trace_ray(&ray, &grid).unwrap()]).unwrap()
    }

    #[test]
    fn default_mu_is_two_percent_per_voxel() {
        assert!(((-default_mu() * 0.15).exp() - 0.98).abs() < 1e-15);
        assert!((default_mu() - 0.134_684_715_450_129_8).abs() < 1e-9);
    }

    #[test]
    fn empty_object_transmits_everything() {
        let a = one_ray_matrix();
        let f = vec![0.0; 2048];
        let g0 = expected_counts(&a, &f, &Spectrum::platinum_l_alpha(1000.0)).unwrap();
        assert_eq!(g0, vec![1000.0]);
    }

    #[test]
    fn single_copper_voxel_attenuates_two_percent() {
        let a = one_ray_matrix();
        let (cols, _) = a.row(0);
        let mut f = vec![0.0; 2048];
        f[cols[3] as usize] = 1.0;
        let g0 = expected_counts(&a, &f, &Spectrum::monochromatic(default_mu(), 1.0)).unwrap();
        assert!((g0[0] - 0.98).abs() < 1e-12);
    }

    #[test]
    fn equal_mu_lines_match_single_line() {
        let a = one_ray_matrix();
        let f: Vec<f64> = (0..2048).map(|j| (j % 3) as f64 * 0.5).collect();
        let two = expected_counts(&a, &f, &Spectrum::platinum_l_alpha(500.0)).unwrap();
        let one = expected_counts(&a, &f, &Spectrum::monochromatic(default_mu(), 500.0)).unwrap();
        assert!((two[0] - one[0]).abs() <= 1e-12 * one[0]);
    }

    #[test]
    fn shape_mismatch() {
        let a = one_ray_matrix();
        assert!(matches!(expected_counts(&a, &[0.0; 10], &Spectrum::default()), Err(TomoError::Shape(_))));
    }

    #[test]
    fn poisson_rejects_nonpositive() {
        assert!(matches!(sample_poisson(&[1.0, 0.0], 1), Err(TomoError::Domain(_))));
        assert!(matches!(sample_poisson(&[-1.0], 1), Err(TomoError::Domain(_))));
    }

    #[test]
    fn tiny_expectation_draws_zero() {
        let lam = vec![1e-12; 100_000];
        let k = sample_poisson(&lam, 3).unwrap();
        let zeros = k.iter().filter(|&&x| x == 0).count();
        assert!(zeros as f64 >= 0.9999 * 1e5);
    }

    #[test]
    fn poisson_moments_at_100() {
        let n = 100_000;
        let k = sample_poisson(&vec![100.0; n], 17).unwrap();
        let mean = k.iter().map(|&x| x as f64).sum::<f64>() / n as f64;
        let var = k.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        assert!((mean - 100.0).abs() < 3.0 * 10.0 / (n as f64).sqrt(), "mean {mean}");
        let ratio = var / mean;
        assert!((0.97..=1.03).contains(&ratio), "dispersion {ratio}");
    }

    #[test]
    fn poisson_is_deterministic_and_order_free() {
        let lam: Vec<f64> = (1..500).map(|i| i as f64).collect();
        let a = sample_poisson(&lam, 5).unwrap();
        let b = sample_poisson(&lam, 5).unwrap();
        assert_eq!(a, b);
        // A prefix draws the same values: each ray owns its substream.
        let c = sample_poisson(&lam[..100], 5).unwrap();
        assert_eq!(&a[..100], &c[..]);
    }

    #[test]
    fn simulate_empty_object() {
        let g = crate::geometry::default_geometry();
        let f = VoxelVolume::zeros(Dims::new(16, 16, 8), CIRCUIT_VOXEL, VolumeKind::BinaryTruth);
        let m = simulate(&g, &f, &Spectrum::platinum_l_alpha(1000.0), 1).unwrap();
        assert_eq!(m.n_rays(), 8192);
        assert!(m.expected.iter().all(|&e| e == 1000.0));
        let mean = m.observed.iter().map(|&x| x as f64).sum::<f64>() / 8192.0;
        assert!((mean - 1000.0).abs() < 5.0 * (1000.0f64 / 8192.0).sqrt());
    }

    #[test]
    fn spectrum_validation() {
        let mut s = Spectrum::default();
        s.lines[0].weight = 0.6;
        assert!(s.validate().is_err());
        assert!(Spectrum::monochromatic(0.1, 0.0).validate().is_err());
        assert!(Spectrum::monochromatic(-0.1, 10.0).validate().is_err());
        Spectrum::default().validate().unwrap();
    }
}

//! Poisson maximum-likelihood reconstruction with box bounds and an optional
//! Bouman-Sauer smoothness prior.
//!
//! The maximized objective is `L(f) + Psi(f)` with
//!
//! ```text
//! L(f)   = -sum_i [ ln g_i! - g_i ln g0_i(f) + g0_i(f) ]
//! Psi(f) = -beta * sum_{j~k} b_jk ((f_j - f_k)^2 + eps)^(p/2)
//! ```
//!
//! Internally the solver minimizes `-L - Psi`. Each likelihood term is
//! evaluated as a Stirling remainder `ln g! - g ln g + g` (constant in `f`)
//! plus the deviance `g0 - g - g ln(g0/g)`, which keeps the full objective
//! accurate to well below the 12-digit relative stopping rule.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::function::gamma::ln_gamma;

use crate::error::{Result, TomoError};
use crate::forward::{Measurement, Spectrum};
use crate::geometry::SystemMatrix;
use crate::lbfgsb::{self, BoxOptions, StopReason};
use crate::objects::REFERENCE_FILL_FRACTION;
use crate::volume::{Dims, VolumeKind, VoxelSize, VoxelVolume};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MleSettings {
    #[serde(rename = "lb")]
    pub lower_bound: f64,
    #[serde(rename = "ub")]
    pub upper_bound: f64,
    #[serde(rename = "max_iter")]
    pub max_iterations: usize,
    #[serde(rename = "gtol")]
    pub gradient_tolerance: f64,
    #[serde(rename = "rtol")]
    pub relative_tolerance: f64,
    #[serde(rename = "memory")]
    pub history_size: usize,
    /// Constant starting value, clipped into the bounds.
    pub initial_value: f64,
    /// Lines used inside the solver; `None` means a single effective line
    /// with the weight-averaged attenuation of the simulation spectrum.
    /// Photon counts always come from the measurement.
    pub recon_spectrum: Option<Spectrum>,
}

impl Default for MleSettings {
    fn default() -> Self {
        MleSettings {
            lower_bound: 0.0,
            upper_bound: 2.0,
            max_iterations: 200,
            gradient_tolerance: 1e-10,
            relative_tolerance: 1e-12,
            history_size: 10,
            initial_value: REFERENCE_FILL_FRACTION,
            recon_spectrum: None,
        }
    }
}

impl MleSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.lower_bound < self.upper_bound) {
            return Err(TomoError::Config(format!(
                "lb ({}) must be below ub ({})",
                self.lower_bound, self.upper_bound
            )));
        }
        if !(self.gradient_tolerance > 0.0) || !(self.relative_tolerance >= 0.0) {
            return Err(TomoError::Config("tolerances must be positive".into()));
        }
        if let Some(s) = &self.recon_spectrum {
            s.validate()?;
        }
        Ok(())
    }

    /// Spectrum the solver uses for a measurement simulated with `sim`.
    pub fn solver_spectrum(&self, sim: &Spectrum, photons_per_ray: f64) -> Spectrum {
        match &self.recon_spectrum {
            Some(s) => s.with_photons(photons_per_ray),
            None => sim.effective().with_photons(photons_per_ray),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriorSettings {
    pub enabled: bool,
    pub beta: f64,
    pub p: f64,
    pub epsilon: f64,
    /// Per-axis neighbor weights `(bx, by, bz)`; `None` uses inverse voxel
    /// spacing normalized to unit mean.
    pub neighbor_weights: Option<[f64; 3]>,
}

impl Default for PriorSettings {
    fn default() -> Self {
        PriorSettings { enabled: false, beta: 0.0, p: 1.1, epsilon: 1e-6, neighbor_weights: None }
    }
}

impl PriorSettings {
    pub fn with_beta(beta: f64) -> Self {
        PriorSettings { enabled: true, beta, ..PriorSettings::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0) {
            return Err(TomoError::Config(format!("beta must be nonnegative, got {}", self.beta)));
        }
        if !(self.p > 1.0 && self.p <= 2.0) {
            return Err(TomoError::Config(format!("prior exponent p must lie in (1, 2], got {}", self.p)));
        }
        if !(self.epsilon > 0.0) {
            return Err(TomoError::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        Ok(())
    }

    /// True when the prior changes the objective at all.
    pub fn active(&self) -> bool {
        self.enabled && self.beta != 0.0
    }

    pub fn weights(&self, voxel: VoxelSize) -> [f64; 3] {
        self.neighbor_weights.unwrap_or_else(|| {
            let inv = [1.0 / voxel.sx, 1.0 / voxel.sy, 1.0 / voxel.sz];
            let mean = (inv[0] + inv[1] + inv[2]) / 3.0;
            [inv[0] / mean, inv[1] / mean, inv[2] / mean]
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub volume: VoxelVolume,
    pub iterations_used: usize,
    /// Maximized objective `L + Psi` at the returned volume.
    pub final_objective: f64,
    pub converged: bool,
    pub settings_hash: String,
    /// Maximized objective after each accepted iterate.
    pub objective_history: Vec<f64>,
    pub projected_gradient: f64,
    /// Voxels no ray crosses; they keep their starting value.
    pub untraversed_voxels: usize,
}

/// `ln g! - g ln g + g`, with the `g = 0` limit 0.
fn stirling_remainder(g: f64) -> f64 {
    if g == 0.0 {
        0.0
    } else {
        ln_gamma(g + 1.0) - g * g.ln() + g
    }
}

/// `g0 - g - g ln(g0 / g)`, the f-dependent part of one term.
fn deviance(g: f64, g0: f64) -> f64 {
    if g == 0.0 {
        g0
    } else {
        let x = (g0 - g) / g;
        g * (x - x.ln_1p())
    }
}

/// Data term of the minimized objective, with cached per-ray constants.
struct PoissonData<'a> {
    a: &'a SystemMatrix,
    observed: Vec<f64>,
    spectrum: Spectrum,
    constant: f64,
}

impl<'a> PoissonData<'a> {
    fn new(a: &'a SystemMatrix, m: &Measurement, s: &Spectrum) -> Result<Self> {
        if m.observed.len() != a.n_rays() {
            return Err(TomoError::Shape(format!(
                "measurement has {} rays, system matrix {}",
                m.observed.len(),
                a.n_rays()
            )));
        }
        s.validate()?;
        let observed: Vec<f64> = m.observed.iter().map(|&g| g as f64).collect();
        let constant = observed.iter().map(|&g| stirling_remainder(g)).sum();
        Ok(PoissonData { a, observed, spectrum: s.clone(), constant })
    }

    fn check(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.a.n_voxels() {
            return Err(TomoError::Shape(format!(
                "volume has {} voxels, system matrix {}",
                f.len(),
                self.a.n_voxels()
            )));
        }
        Ok(())
    }

    /// `-L(f)`; fills `grad` with `-dL/df` when given.
    fn negative_log_likelihood(&self, f: &[f64], grad: Option<&mut [f64]>) -> Result<f64> {
        let proj = self.a.forward(f);
        let n0 = self.spectrum.photons_per_ray;
        let mut total = self.constant;
        let mut weights = grad.as_ref().map(|_| vec![0.0; proj.len()]);
        for (i, (&p, &g)) in proj.iter().zip(&self.observed).enumerate() {
            let mut g0 = 0.0;
            let mut mu_g0 = 0.0;
            for l in &self.spectrum.lines {
                let gl = n0 * l.weight * (-l.mu_per_um * p).exp();
                g0 += gl;
                mu_g0 += l.mu_per_um * gl;
            }
            if !(g0 > 0.0) || !g0.is_finite() {
                return Err(TomoError::Numeric(format!("expected count {g0} on ray {i}")));
            }
            total += deviance(g, g0);
            if let Some(w) = weights.as_mut() {
                // d(-L)/dp_i = sum_l mu_l g0_il (g_i / g0_i - 1)
                w[i] = mu_g0 * (g / g0 - 1.0);
            }
        }
        if let (Some(grad), Some(w)) = (grad, weights) {
            grad.copy_from_slice(&self.a.back(&w));
        }
        Ok(total)
    }
}

pub fn log_likelihood(f: &[f64], m: &Measurement, a: &SystemMatrix, s: &Spectrum) -> Result<f64> {
    let data = PoissonData::new(a, m, s)?;
    data.check(f)?;
    Ok(-data.negative_log_likelihood(f, None)?)
}

/// `dL/df_j`.
pub fn gradient(f: &[f64], m: &Measurement, a: &SystemMatrix, s: &Spectrum) -> Result<Vec<f64>> {
    let data = PoissonData::new(a, m, s)?;
    data.check(f)?;
    let mut g = vec![0.0; f.len()];
    data.negative_log_likelihood(f, Some(&mut g))?;
    g.iter_mut().for_each(|v| *v = -*v);
    Ok(g)
}

/// Visit each 6-connected neighbor pair once as `(j, k, axis)`.
fn for_each_pair(dims: Dims, mut visit: impl FnMut(usize, usize, usize)) {
    for z in 0..dims.nz {
        for y in 0..dims.ny {
            for x in 0..dims.nx {
                let j = dims.index(x, y, z);
                if x + 1 < dims.nx {
                    visit(j, dims.index(x + 1, y, z), 0);
                }
                if y + 1 < dims.ny {
                    visit(j, dims.index(x, y + 1, z), 1);
                }
                if z + 1 < dims.nz {
                    visit(j, dims.index(x, y, z + 1), 2);
                }
            }
        }
    }
}

/// `-Psi` and its gradient, accumulated into `grad`.
fn add_negative_prior(f: &[f64], dims: Dims, b: [f64; 3], pr: &PriorSettings, grad: Option<&mut [f64]>) -> f64 {
    let half_p = 0.5 * pr.p;
    let mut total = 0.0;
    match grad {
        Some(grad) => for_each_pair(dims, |j, k, axis| {
            let d = f[j] - f[k];
            let q = d * d + pr.epsilon;
            let w = pr.beta * b[axis];
            total += w * q.powf(half_p);
            let dj = w * pr.p * q.powf(half_p - 1.0) * d;
            grad[j] += dj;
            grad[k] -= dj;
        }),
        None => for_each_pair(dims, |j, k, axis| {
            let d = f[j] - f[k];
            total += pr.beta * b[axis] * (d * d + pr.epsilon).powf(half_p);
        }),
    }
    total
}

/// `(Psi(f), dPsi/df)`.
pub fn prior_value_and_gradient(f: &VoxelVolume, pr: &PriorSettings) -> Result<(f64, Vec<f64>)> {
    pr.validate()?;
    let mut g = vec![0.0; f.len()];
    if !pr.active() {
        return Ok((0.0, g));
    }
    let neg = add_negative_prior(f.values(), f.dims(), pr.weights(f.voxel_size()), pr, Some(&mut g));
    g.iter_mut().for_each(|v| *v = -*v);
    Ok((-neg, g))
}

fn settings_hash(settings: &MleSettings, prior: &PriorSettings, spectrum: &Spectrum) -> String {
    let doc = serde_json::json!({ "mle": settings, "prior": prior, "spectrum": spectrum });
    hex::encode(&Sha256::digest(doc.to_string().as_bytes())[..8])
}

/// Maximize `L + Psi` over `[lb, ub]^N`.
///
/// `spectrum` is the solver spectrum (see [`MleSettings::solver_spectrum`]);
/// `dims`/`voxel_size` describe the grid behind `a`'s columns.
pub fn reconstruct_mle(
    m: &Measurement,
    a: &SystemMatrix,
    spectrum: &Spectrum,
    dims: Dims,
    voxel_size: VoxelSize,
    settings: &MleSettings,
    prior: &PriorSettings,
) -> Result<Reconstruction> {
    settings.validate()?;
    prior.validate()?;
    if dims.len() != a.n_voxels() {
        return Err(TomoError::Shape(format!(
            "grid has {} voxels, system matrix {}",
            dims.len(),
            a.n_voxels()
        )));
    }
    let data = PoissonData::new(a, m, spectrum)?;
    let start = vec![settings.initial_value; dims.len()];
    let weights = prior.weights(voxel_size);
    let use_prior = prior.active();

    let mut failure: Option<TomoError> = None;
    let objective = |f: &[f64], g: &mut [f64]| -> f64 {
        match data.negative_log_likelihood(f, Some(g)) {
            Ok(mut v) => {
                if use_prior {
                    v += add_negative_prior(f, dims, weights, prior, Some(g));
                }
                v
            }
            Err(e) => {
                failure.get_or_insert(e);
                f64::INFINITY
            }
        }
    };
    let opts = BoxOptions {
        lower: settings.lower_bound,
        upper: settings.upper_bound,
        max_iterations: settings.max_iterations,
        gradient_tolerance: settings.gradient_tolerance,
        relative_tolerance: settings.relative_tolerance,
        history_size: settings.history_size,
    };
    let out = lbfgsb::minimize(objective, &start, &opts);
    if let Some(e) = failure {
        if !out.value.is_finite() {
            return Err(e);
        }
    }
    assert!(
        out.history.windows(2).all(|w| w[1] <= w[0]),
        "accepted iterates increased the objective"
    );

    let untraversed = a.column_support().iter().filter(|&&s| !s).count();
    let converged = out.converged()
        || (out.reason == StopReason::LineSearch && out.projected_gradient <= settings.gradient_tolerance);
    Ok(Reconstruction {
        volume: VoxelVolume::from_values(dims, voxel_size, out.x, VolumeKind::Continuous)?,
        iterations_used: out.iterations,
        final_objective: -out.value,
        converged,
        settings_hash: settings_hash(settings, prior, spectrum),
        objective_history: out.history.iter().map(|v| -v).collect(),
        projected_gradient: out.projected_gradient,
        untraversed_voxels: untraversed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::CIRCUIT_VOXEL;

    fn tiny() -> (SystemMatrix, Spectrum) {
        let rows = vec![
            vec![(0, 0.3), (1, 0.2)],
            vec![(1, 0.4), (2, 0.1)],
            vec![(2, 0.25), (3, 0.35)],
            vec![(0, 0.15), (3, 0.5)],
        ];
        (SystemMatrix::from_rows(4, rows).unwrap(), Spectrum::monochromatic(0.9, 50.0))
    }

    fn meas(observed: Vec<u32>, expected: Vec<f64>) -> Measurement {
        Measurement { expected, observed, geometry_hash: String::new(), seed: 0, photons_per_ray: 50.0 }
    }

    #[test]
    fn deviance_matches_direct_form() {
        for &(g, g0) in &[(3.0, 2.5), (100.0, 130.0), (7.0, 7.0), (0.0, 4.0)] {
            let direct: f64 = if g == 0.0 { g0 } else { ln_gamma(g + 1.0) - g * f64::ln(g0) + g0 };
            let split = stirling_remainder(g) + deviance(g, g0);
            assert!((direct - split).abs() < 1e-12 * direct.abs().max(1.0), "{g} {g0}");
        }
    }

    #[test]
    fn matched_data_has_zero_gradient() {
        let (a, _) = tiny();
        // Empty object: g0 = N0 on every ray, so observing N0 is a perfect fit.
        let s = Spectrum::monochromatic(0.9, 20.0);
        let m = meas(vec![20; 4], vec![20.0; 4]);
        let g = gradient(&[0.0; 4], &m, &a, &s).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
        let l = log_likelihood(&[0.0; 4], &m, &a, &s).unwrap();
        let ceiling = -4.0 * (ln_gamma(21.0) - 20.0 * 20f64.ln() + 20.0);
        assert!((l - ceiling).abs() < 1e-12 * ceiling.abs());
    }

    #[test]
    fn empty_object_zero_counts() {
        let (a, _) = tiny();
        let s = Spectrum::monochromatic(0.9, 4.0);
        let l = log_likelihood(&[0.0; 4], &meas(vec![0; 4], vec![4.0; 4]), &a, &s).unwrap();
        assert_eq!(l, -16.0);
    }

    #[test]
    fn prior_zero_beta_and_constant_volume() {
        let v = VoxelVolume::from_values(Dims::new(2, 2, 2), CIRCUIT_VOXEL, vec![0.7; 8], VolumeKind::Continuous)
            .unwrap();
        let (val, g) = prior_value_and_gradient(&v, &PriorSettings::with_beta(0.0)).unwrap();
        assert_eq!(val, 0.0);
        assert!(g.iter().all(|&x| x == 0.0));

        let pr = PriorSettings::with_beta(2.0);
        let (val, g) = prior_value_and_gradient(&v, &pr).unwrap();
        let b = pr.weights(CIRCUIT_VOXEL);
        // 4 pairs per axis in a 2x2x2 cube.
        let expect = -2.0 * 4.0 * (b[0] + b[1] + b[2]) * pr.epsilon.powf(pr.p / 2.0);
        assert!((val - expect).abs() < 1e-15);
        assert!(g.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn default_weights_follow_inverse_spacing() {
        let b = PriorSettings::default().weights(CIRCUIT_VOXEL);
        assert!((b[0] - 1.2).abs() < 1e-12 && (b[1] - 1.2).abs() < 1e-12 && (b[2] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn settings_validation() {
        let s = MleSettings { lower_bound: 2.0, upper_bound: 0.0, ..MleSettings::default() };
        assert!(s.validate().is_err());
        assert!(PriorSettings { p: 1.0, ..PriorSettings::default() }.validate().is_err());
        assert!(PriorSettings { beta: -1.0, ..PriorSettings::default() }.validate().is_err());
    }

    #[test]
    fn settings_json_keys() {
        let s: MleSettings = serde_json::from_str(r#"{"lb": 0, "ub": 2, "max_iter": 50, "gtol": 1e-8, "memory": 5}"#).unwrap();
        assert_eq!(s.max_iterations, 50);
        assert_eq!(s.history_size, 5);
        assert_eq!(s.initial_value, REFERENCE_FILL_FRACTION);
    }
}

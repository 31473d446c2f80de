//! Bit error rate from class-conditional Gaussian fits, plus Pearson
//! correlation.
//!
//! Reconstructed values are pooled over every voxel of a test set and split
//! by the truth bit. Each class gets a normal fit; the decision threshold is
//! the prior-weighted density intersection between the class means, and the
//! error rates are the Gaussian tail masses on the wrong side of it.

use serde::{Deserialize, Serialize};
use libm::erfc;

use crate::error::{Result, TomoError};
use crate::volume::{VolumeKind, VoxelVolume};

/// Standard deviations are floored here before thresholding.
pub const STD_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    pub mean: f64,
    pub std: f64,
    pub prior: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Threshold {
    Value(f64),
    /// The weighted densities never cross (or coincide everywhere).
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BerReport {
    pub fit0: GaussianFit,
    pub fit1: GaussianFit,
    /// NaN when the threshold is degenerate.
    pub threshold: f64,
    pub eta0: f64,
    pub eta1: f64,
    pub eta_avg: f64,
    pub n_voxels: usize,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn fit_class_gaussians(recons: &[VoxelVolume], truths: &[VoxelVolume]) -> Result<(GaussianFit, GaussianFit)> {
    if recons.len() != truths.len() {
        return Err(TomoError::Shape(format!(
            "{} reconstructions but {} truths",
            recons.len(),
            truths.len()
        )));
    }
    let mut zeros = Vec::new();
    let mut ones = Vec::new();
    for (r, t) in recons.iter().zip(truths) {
        if r.dims() != t.dims() {
            return Err(TomoError::Shape("reconstruction and truth dims differ".into()));
        }
        if t.kind() != VolumeKind::BinaryTruth {
            return Err(TomoError::Type("truth volumes must be binary".into()));
        }
        for (&v, &b) in r.values().iter().zip(t.values()) {
            if b == 1.0 {
                ones.push(v);
            } else {
                zeros.push(v);
            }
        }
    }
    if zeros.is_empty() || ones.is_empty() {
        return Err(TomoError::Evaluation(format!(
            "class {} is empty across the pooled test set; use a larger test pool",
            if zeros.is_empty() { 0 } else { 1 }
        )));
    }
    let total = (zeros.len() + ones.len()) as f64;
    let (m0, s0) = mean_std(&zeros);
    let (m1, s1) = mean_std(&ones);
    let p1 = ones.len() as f64 / total;
    Ok((
        GaussianFit { mean: m0, std: s0, prior: 1.0 - p1, n: zeros.len() },
        GaussianFit { mean: m1, std: s1, prior: p1, n: ones.len() },
    ))
}

/// Log of the prior-weighted normal density.
fn weighted_log_density(t: f64, fit: &GaussianFit, std: f64) -> f64 {
    fit.prior.ln() - std.ln() - 0.5 * ((t - fit.mean) / std).powi(2)
}

/// Solve `p0 N(t; m0, s0) = p1 N(t; m1, s1)`.
pub fn threshold_from_fits(fit0: &GaussianFit, fit1: &GaussianFit) -> Threshold {
    let s0 = fit0.std.max(STD_FLOOR);
    let s1 = fit1.std.max(STD_FLOOR);
    let (m0, m1) = (fit0.mean, fit1.mean);
    if fit0.prior <= 0.0 || fit1.prior <= 0.0 {
        return Threshold::Degenerate;
    }
    let k = (fit0.prior * s1 / (fit1.prior * s0)).ln();
    let (v0, v1) = (s0 * s0, s1 * s1);

    if s0 == s1 {
        if m0 == m1 {
            return Threshold::Degenerate;
        }
        // Equal variances: the quadratic collapses to a line.
        return Threshold::Value(0.5 * (m0 + m1) + v0 * (fit0.prior / fit1.prior).ln() / (m1 - m0));
    }

    // a t^2 + b t + c = 0
    let a = 0.5 / v0 - 0.5 / v1;
    let b = m1 / v1 - m0 / v0;
    let c = 0.5 * m0 * m0 / v0 - 0.5 * m1 * m1 / v1 - k;
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Threshold::Degenerate;
    }
    let sq = disc.sqrt();
    // Numerically stable pair of roots.
    let q = -0.5 * (b + b.signum() * sq);
    let mut roots = vec![];
    if q != 0.0 {
        roots.push(q / a);
        roots.push(c / q);
    } else {
        roots.push(0.0);
    }
    let (lo, hi) = if m0 < m1 { (m0, m1) } else { (m1, m0) };
    let mid = 0.5 * (m0 + m1);
    let between = roots.iter().copied().filter(|&t| t > lo && t < hi).min_by(|x, y| {
        (x - mid).abs().total_cmp(&(y - mid).abs())
    });
    let t = between.unwrap_or_else(|| {
        roots.iter().copied().min_by(|x, y| (x - mid).abs().total_cmp(&(y - mid).abs())).unwrap()
    });
    // One Newton polish on the log-density difference.
    let h = |t: f64| weighted_log_density(t, fit0, s0) - weighted_log_density(t, fit1, s1);
    let dh = |t: f64| -(t - m0) / v0 + (t - m1) / v1;
    let d = dh(t);
    let polished = if d != 0.0 { t - h(t) / d } else { t };
    Threshold::Value(if h(polished).abs() <= h(t).abs() { polished } else { t })
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

pub fn bit_error_rate(fit0: &GaussianFit, fit1: &GaussianFit, t: Threshold) -> BerReport {
    let n_voxels = fit0.n + fit1.n;
    let (p0, p1) = (fit0.prior, fit1.prior);
    match t {
        Threshold::Degenerate => {
            // Everything goes to the more probable class.
            let (eta0, eta1) = if p0 >= p1 { (0.0, 1.0) } else { (1.0, 0.0) };
            BerReport {
                fit0: *fit0,
                fit1: *fit1,
                threshold: f64::NAN,
                eta0,
                eta1,
                eta_avg: eta0 * p0 + eta1 * p1,
                n_voxels,
            }
        }
        Threshold::Value(t) => {
            let s0 = fit0.std.max(STD_FLOOR);
            let s1 = fit1.std.max(STD_FLOOR);
            let z0 = (t - fit0.mean) / s0;
            let z1 = (t - fit1.mean) / s1;
            let (eta0, eta1) = if fit0.mean <= fit1.mean {
                (normal_cdf(-z0), normal_cdf(z1))
            } else {
                (normal_cdf(z0), normal_cdf(-z1))
            };
            BerReport { fit0: *fit0, fit1: *fit1, threshold: t, eta0, eta1, eta_avg: eta0 * p0 + eta1 * p1, n_voxels }
        }
    }
}

/// Pooled BER of a test set.
pub fn evaluate_ber(recons: &[VoxelVolume], truths: &[VoxelVolume]) -> Result<BerReport> {
    let (f0, f1) = fit_class_gaussians(recons, truths)?;
    Ok(bit_error_rate(&f0, &f1, threshold_from_fits(&f0, &f1)))
}

/// BER of exactly one wrong voxel per volume of `n_voxels`.
pub fn single_error_per_sample(n_voxels: usize) -> f64 {
    1.0 / n_voxels as f64
}

pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(TomoError::Shape(format!("pearson inputs of length {} and {}", a.len(), b.len())));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(TomoError::UndefinedCorrelation("constant input".into()));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::{Dims, CIRCUIT_VOXEL};

    #[test]
    fn normal_cdf_tail_is_accurate() {
        assert!((normal_cdf(-2.0) - 0.022750131948179195).abs() < 1e-15);
        assert!((normal_cdf(-6.0) - 9.865876450376946e-10).abs() < 1e-22);
    }

    fn fit(mean: f64, std: f64, prior: f64) -> GaussianFit {
        GaussianFit { mean, std, prior, n: 1000 }
    }

    #[test]
    fn symmetric_threshold() {
        match threshold_from_fits(&fit(0.0, 0.2, 0.5), &fit(1.0, 0.2, 0.5)) {
            Threshold::Value(t) => assert!((t - 0.5).abs() < 1e-15),
            Threshold::Degenerate => panic!(),
        }
    }

    #[test]
    fn equal_variance_closed_form() {
        let s = 0.3;
        let (p0, p1) = (0.8, 0.2);
        let Threshold::Value(t) = threshold_from_fits(&fit(0.0, s, p0), &fit(1.0, s, p1)) else { panic!() };
        let expect = 0.5 + s * s * (p0 / p1).ln();
        assert!((t - expect).abs() < 1e-14);
    }

    #[test]
    fn unequal_variance_residual() {
        let cases = [
            (0.1, 0.05, 0.8, 0.9, 0.2),
            (0.0, 0.3, 0.6, 1.1, 0.1),
            (-0.2, 0.12, 0.3, 0.7, 0.4),
            (0.05, 0.2, 0.81, 0.95, 0.35),
        ];
        for (m0, s0, p0, m1, s1) in cases {
            let (f0, f1) = (fit(m0, s0, p0), fit(m1, s1, 1.0 - p0));
            let Threshold::Value(t) = threshold_from_fits(&f0, &f1) else { panic!() };
            assert!(t > m0 && t < m1, "{t}");
            let d0 = p0 / s0 * (-0.5 * ((t - m0) / s0).powi(2)).exp();
            let d1 = (1.0 - p0) / s1 * (-0.5 * ((t - m1) / s1).powi(2)).exp();
            assert!((d0 - d1).abs() <= 1e-10 * d0.max(d1), "{d0} {d1}");
        }
    }

    #[test]
    fn phi_minus_two() {
        let (f0, f1) = (fit(0.0, 0.25, 0.5), fit(1.0, 0.25, 0.5));
        let r = bit_error_rate(&f0, &f1, threshold_from_fits(&f0, &f1));
        assert_eq!(r.threshold, 0.5);
        assert!((r.eta0 - 0.022_750_131_948_179_195).abs() < 1e-14);
        assert!((r.eta1 - r.eta0).abs() < 1e-15);
        assert!((r.eta_avg - 0.022_750_131_948_179_195).abs() < 1e-14);
    }

    #[test]
    fn degenerate_identical_classes() {
        let (f0, f1) = (fit(0.4, 0.1, 0.7), fit(0.4, 0.1, 0.3));
        let t = threshold_from_fits(&f0, &f1);
        assert_eq!(t, Threshold::Degenerate);
        let r = bit_error_rate(&f0, &f1, t);
        assert!(r.threshold.is_nan());
        assert!((r.eta_avg - 0.3).abs() < 1e-15);
    }

    #[test]
    fn separation_never_hurts() {
        let mut last = 1.0;
        for k in 1..=40 {
            let gap = 0.05 * k as f64;
            let (f0, f1) = (fit(0.0, 0.2, 0.8), fit(gap, 0.2, 0.2));
            let r = bit_error_rate(&f0, &f1, threshold_from_fits(&f0, &f1));
            assert!(r.eta_avg <= last + 1e-15);
            assert!((r.eta_avg - (r.eta0 * 0.8 + r.eta1 * 0.2)).abs() <= 1e-15);
            last = r.eta_avg;
        }
        assert!(last < 1e-6);
    }

    #[test]
    fn perfect_reconstruction_has_zero_ber() {
        let d = Dims::new(4, 4, 2);
        let bits: Vec<bool> = (0..d.len()).map(|i| i % 3 == 0).collect();
        let truth = VoxelVolume::from_bits(d, CIRCUIT_VOXEL, &bits).unwrap();
        let recon = truth.clone().into_continuous();
        let (f0, f1) = fit_class_gaussians(&[recon.clone()], &[truth.clone()]).unwrap();
        assert_eq!((f0.mean, f0.std, f1.mean, f1.std), (0.0, 0.0, 1.0, 0.0));
        assert!((f1.prior - 11.0 / 32.0).abs() < 1e-15);
        let r = evaluate_ber(&[recon], &[truth]).unwrap();
        assert_eq!(r.eta_avg, 0.0);
    }

    #[test]
    fn missing_class_is_an_error() {
        let d = Dims::new(2, 2, 2);
        let truth = VoxelVolume::zeros(d, CIRCUIT_VOXEL, VolumeKind::BinaryTruth);
        let recon = VoxelVolume::from_values(d, CIRCUIT_VOXEL, vec![0.3; 8], VolumeKind::Continuous).unwrap();
        assert!(matches!(fit_class_gaussians(&[recon], &[truth]), Err(TomoError::Evaluation(_))));
    }

    #[test]
    fn single_error_reference() {
        assert!((single_error_per_sample(16 * 16 * 8) - 4.8828125e-4).abs() < 1e-16);
    }

    #[test]
    fn pearson_basics() {
        let a: Vec<f64> = (0..50).map(|i| ((i * 7) % 11) as f64).collect();
        let neg: Vec<f64> = a.iter().map(|v| -v).collect();
        let b: Vec<f64> = (0..50).map(|i| ((i * 3) % 5) as f64 + 0.1 * i as f64).collect();
        let affine: Vec<f64> = b.iter().map(|v| 2.0 * v + 3.0).collect();
        assert!((pearson(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&a, &neg).unwrap() + 1.0).abs() < 1e-15);
        assert!((pearson(&a, &b).unwrap() - pearson(&a, &affine).unwrap()).abs() < 1e-12);
        assert!(matches!(pearson(&a, &[1.0; 50]), Err(TomoError::UndefinedCorrelation(_))));
    }
}

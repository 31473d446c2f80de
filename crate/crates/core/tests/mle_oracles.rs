use proptest::prelude::*;
use tomo_core::geometry::SystemMatrix;
use tomo_core::recon_mle::{gradient, log_likelihood, prior_value_and_gradient};
use tomo_core::{Dims, Measurement, PriorSettings, SpectralLine, Spectrum, VolumeKind, VoxelSize, VoxelVolume};

fn fixed_matrix() -> SystemMatrix {
    let rows = vec![
        vec![(0, 0.15), (1, 0.21)],
        vec![(1, 0.30), (2, 0.12)],
        vec![(2, 0.27), (3, 0.18)],
        vec![(0, 0.09), (3, 0.33)],
        vec![(0, 0.15), (1, 0.15), (2, 0.15), (3, 0.15)],
        vec![(1, 0.42)],
        vec![(2, 0.06), (3, 0.24)],
        vec![(0, 0.36), (2, 0.05)],
    ];
    SystemMatrix::from_rows(4, rows).unwrap()
}

fn measurement(observed: Vec<u32>, n0: f64) -> Measurement {
    Measurement {
        expected: vec![n0; observed.len()],
        observed,
        geometry_hash: String::new(),
        seed: 0,
        photons_per_ray: n0,
    }
}

fn line(weight: f64, mu: f64) -> SpectralLine {
    SpectralLine { energy_ev: 9400.0, weight, mu_per_um: mu }
}

const F: [f64; 4] = [0.25, 1.5, 0.75, 1.9];
const G: [u32; 8] = [180, 171, 0, 166, 175, 188, 183, 176];

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn log_likelihood_matches_high_precision_mono() {
    let s = Spectrum { lines: vec![line(1.0, 0.1346847154)], photons_per_ray: 200.0 };
    let l = log_likelihood(&F, &measurement(G.to_vec(), 200.0), &fixed_matrix(), &s).unwrap();
    let oracle = -213.559_582_670_888_5;
    assert!(rel(l, oracle) < 1e-12, "{l} vs {oracle}");
}

#[test]
fn log_likelihood_matches_high_precision_bichromatic() {
    let s = Spectrum { lines: vec![line(0.5, 0.12), line(0.5, 0.16)], photons_per_ray: 200.0 };
    let l = log_likelihood(&F, &measurement(G.to_vec(), 200.0), &fixed_matrix(), &s).unwrap();
    let oracle = -212.880_680_166_748_3;
    assert!(rel(l, oracle) < 1e-12, "{l} vs {oracle}");
}

#[test]
fn excess_counts_on_empty_object_push_toward_less_copper() {
    let s = Spectrum::platinum_l_alpha(200.0);
    let m = measurement(vec![230; 8], 200.0);
    let g = gradient(&[0.0; 4], &m, &fixed_matrix(), &s).unwrap();
    assert!(g.iter().all(|&v| v < 0.0), "{g:?}");
}

fn random_matrix(n_rays: usize, n_vox: usize, seeds: &[f64]) -> SystemMatrix {
    let mut rows = Vec::with_capacity(n_rays);
    let mut k = 0;
    for _ in 0..n_rays {
        let mut row = Vec::new();
        for j in 0..n_vox {
            let u = seeds[k % seeds.len()];
            k += 1;
            if u > 0.4 {
                row.push((j as u32, 0.5 * u));
            }
        }
        rows.push(row);
    }
    SystemMatrix::from_rows(n_vox, rows).unwrap()
}

fn central_difference(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], j: usize, h: f64) -> f64 {
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    xp[j] += h;
    xm[j] -= h;
    (f(&xp) - f(&xm)) / (2.0 * h)
}

fn close(analytic: f64, numeric: f64, scale: f64) -> bool {
    (analytic - numeric).abs() <= 1e-6 * analytic.abs().max(scale)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn likelihood_gradient_matches_finite_differences(
        f in prop::collection::vec(0.1f64..1.9, 6),
        weights in prop::collection::vec(0.0f64..1.0, 60),
        counts in prop::collection::vec(0u32..400, 10),
        mu_a in 0.05f64..0.4,
        mu_b in 0.05f64..0.4,
    ) {
        let a = random_matrix(10, 6, &weights);
        let s = Spectrum { lines: vec![line(0.5, mu_a), line(0.5, mu_b)], photons_per_ray: 300.0 };
        let m = measurement(counts, 300.0);
        let g = gradient(&f, &m, &a, &s).unwrap();
        let scale = g.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        for j in 0..f.len() {
            let fd = central_difference(|x| log_likelihood(x, &m, &a, &s).unwrap(), &f, j, 1e-5);
            prop_assert!(close(g[j], fd, scale), "voxel {j}: {} vs {fd}", g[j]);
        }
    }

    #[test]
    fn prior_gradient_matches_finite_differences(
        values in prop::collection::vec(0.0f64..2.0, 27),
        beta in 0.01f64..5.0,
        p in 1.01f64..2.0,
    ) {
        let dims = Dims { nx: 3, ny: 3, nz: 3 };
        let vs = VoxelSize { sx: 0.15, sy: 0.15, sz: 0.30 };
        let pr = PriorSettings { p, ..PriorSettings::with_beta(beta) };
        let eval = |x: &[f64]| {
            let v = VoxelVolume::from_values(dims, vs, x.to_vec(), VolumeKind::Continuous).unwrap();
            prior_value_and_gradient(&v, &pr).unwrap()
        };
        let (_, g) = eval(&values);
        let scale = g.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        for j in 0..values.len() {
            let fd = central_difference(|x| eval(x).0, &values, j, 1e-5);
            prop_assert!(close(g[j], fd, scale), "voxel {j}: {} vs {fd}", g[j]);
        }
    }
}

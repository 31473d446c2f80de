use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TomoError};
use crate::forward::{simulate_with, Measurement};
use crate::geometry::{build_system_matrix, SystemMatrix};
use crate::metrics::{evaluate_ber, BerReport};
use crate::objects::{generate_bernoulli, generate_circuit};
use crate::recon_fbp::reconstruct_fbp;
use crate::recon_mle::{reconstruct_mle, Reconstruction};
use crate::rng::{derive_seed, mix, tag};
use crate::tensor::{read_tensor, write_tensor, Tensor, TensorData};
use crate::volume::{VolumeKind, VoxelVolume};

use super::config::{photons_label, ExportMode, Method, Phantom, RunConfig};
use super::manifest::{sha256_file, ConditionRecord, DatasetManifest, SampleRecord, Split};

pub const RESULTS_FILE: &str = "results.csv";

/// Run `f` on a dedicated pool of `workers` threads (all cores when `None`).
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(k) = workers {
        if k == 0 {
            return Err(TomoError::Config("--workers must be at least 1".into()));
        }
        b = b.num_threads(k);
    }
    let pool = b.build().map_err(|e| TomoError::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Seed shared by every sample of one `(photons, repeat)` condition.
pub fn condition_seed(master: u64, photons: f64, repeat: u32) -> u64 {
    mix(mix(master, tag::CONDITION, photons.to_bits()), tag::CONDITION, repeat as u64)
}

pub fn truth_seed(master: u64, id: u64) -> u64 {
    derive_seed(master, id, tag::SAMPLE_TRUTH)
}

pub fn measurement_seed(master: u64, photons: f64, repeat: u32, id: u64) -> u64 {
    derive_seed(condition_seed(master, photons, repeat), id, tag::SAMPLE_MEASURE)
}

fn truth_rel(id: u64) -> String {
    format!("truths/{id:05}.tomo")
}

pub fn condition_dir(photons: f64, repeat: u32) -> String {
    format!("conditions/n{}_r{repeat}", photons_label(photons))
}

fn recon_rel(photons: f64, repeat: u32, method: Method, id: u64) -> String {
    format!("{}/{}/{id:05}.tomo", condition_dir(photons, repeat), method.as_str())
}

fn recon_log_rel(photons: f64, repeat: u32, method: Method, id: u64) -> String {
    format!("{}/{}/{id:05}.json", condition_dir(photons, repeat), method.as_str())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| TomoError::io(dir, e))?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| TomoError::io(path, e))
}

fn geometry_hash(cfg: &RunConfig) -> String {
    cfg.geometry.hash_with(&cfg.grid())
}

fn system_matrix(cfg: &RunConfig) -> Result<SystemMatrix> {
    build_system_matrix(&cfg.geometry, &cfg.grid())
}

/// Manifest of `cfg.out_dir`, checked against the configuration.
fn open_manifest(cfg: &RunConfig) -> Result<DatasetManifest> {
    let m = DatasetManifest::load(&cfg.out_dir)?;
    if m.geometry_hash != geometry_hash(cfg) {
        return Err(TomoError::Config(format!(
            "{} was generated for a different geometry or grid",
            cfg.out_dir.display()
        )));
    }
    Ok(m)
}

pub fn make_truth(cfg: &RunConfig, seed: u64) -> Result<VoxelVolume> {
    match cfg.phantom {
        Phantom::Circuit => generate_circuit(&cfg.circuit, cfg.voxel_size, seed),
        Phantom::Bernoulli { p } => generate_bernoulli(cfg.circuit.dims(), cfg.voxel_size, p, seed),
    }
}

fn volume_dims(v: &VoxelVolume) -> Vec<usize> {
    let d = v.dims();
    vec![d.nx, d.ny, d.nz]
}

pub fn load_truth(cfg: &RunConfig, path: &Path) -> Result<VoxelVolume> {
    let t = read_tensor(path)?;
    let bits: Vec<bool> = match &t.data {
        TensorData::U8(v) => v.iter().map(|&b| b != 0).collect(),
        _ => return Err(TomoError::Format { path: path.to_path_buf(), msg: "truth must be u8".into() }),
    };
    VoxelVolume::from_bits(cfg.circuit.dims(), cfg.voxel_size, &bits)
}

pub fn load_reconstruction(cfg: &RunConfig, path: &Path) -> Result<VoxelVolume> {
    let t = read_tensor(path)?;
    VoxelVolume::from_values(cfg.circuit.dims(), cfg.voxel_size, t.data.to_f64(), VolumeKind::Continuous)
}

fn detector_dims(cfg: &RunConfig) -> Vec<usize> {
    vec![cfg.geometry.det_cols, cfg.geometry.det_rows, cfg.geometry.n_angles()]
}

pub fn load_measurement(cfg: &RunConfig, root: &Path, c: &ConditionRecord, hash: &str) -> Result<Measurement> {
    let ep = root.join(&c.expected_file);
    let op = root.join(&c.measurement_file);
    let expected = match read_tensor(&ep)?.data {
        TensorData::F64(v) => v,
        _ => return Err(TomoError::Format { path: ep, msg: "expected counts must be f64".into() }),
    };
    let observed = match read_tensor(&op)?.data {
        TensorData::U32(v) => v,
        _ => return Err(TomoError::Format { path: op, msg: "observed counts must be u32".into() }),
    };
    if observed.len() != cfg.geometry.n_rays() || expected.len() != observed.len() {
        return Err(TomoError::Shape(format!("measurement {} has the wrong ray count", c.measurement_file)));
    }
    Ok(Measurement {
        expected,
        observed,
        geometry_hash: hash.to_string(),
        seed: c.seed,
        photons_per_ray: c.photons_per_ray,
    })
}

/// Truth volumes for all `n_train + n_test` samples plus a fresh manifest.
pub fn cmd_generate(cfg: &RunConfig, workers: Option<usize>) -> Result<DatasetManifest> {
    cfg.validate()?;
    let root = &cfg.out_dir;
    let n = cfg.n_samples() as u64;
    let written: Vec<Result<(u64, u64)>> = with_workers(workers, || {
        (0..n)
            .into_par_iter()
            .map(|id| {
                let seed = truth_seed(cfg.master_seed, id);
                let v = make_truth(cfg, seed)?;
                let t = Tensor::new(volume_dims(&v), TensorData::U8(v.bits()))?;
                write_tensor(&root.join(truth_rel(id)), &t)?;
                Ok((id, seed))
            })
            .collect()
    })?;
    let mut m = DatasetManifest::new(cfg.clone(), geometry_hash(cfg));
    for r in written {
        let (id, seed) = r?;
        let split = if (id as usize) < cfg.n_train { Split::Train } else { Split::Test };
        let rel = truth_rel(id);
        m.record(root, &rel)?;
        m.samples.push(SampleRecord { id, split, seed, truth_file: rel, conditions: Vec::new() });
    }
    m.save(root)?;
    Ok(m)
}

/// Poisson measurements of every sample at `photons`.
pub fn cmd_simulate(cfg: &RunConfig, photons: f64, repeat: u32, workers: Option<usize>) -> Result<DatasetManifest> {
    cfg.validate()?;
    if !(photons > 0.0) || !photons.is_finite() {
        return Err(TomoError::Config(format!("photons must be positive, got {photons}")));
    }
    let root = &cfg.out_dir;
    let mut m = open_manifest(cfg)?;
    let a = system_matrix(cfg)?;
    let hash = m.geometry_hash.clone();
    let spectrum = cfg.spectrum_at(photons);
    let dir = condition_dir(photons, repeat);
    let det = detector_dims(cfg);
    let produced: Vec<Result<ConditionRecord>> = with_workers(workers, || {
        m.samples
            .par_iter()
            .map(|s| {
                let truth = load_truth(cfg, &root.join(&s.truth_file))?;
                let seed = measurement_seed(cfg.master_seed, photons, repeat, s.id);
                let meas = simulate_with(&a, &hash, &truth, &spectrum, seed)?;
                let expected_file = format!("{dir}/measurements/{:05}.expected.tomo", s.id);
                let measurement_file = format!("{dir}/measurements/{:05}.observed.tomo", s.id);
                write_tensor(&root.join(&expected_file), &Tensor::new(det.clone(), TensorData::F64(meas.expected))?)?;
                write_tensor(&root.join(&measurement_file), &Tensor::new(det.clone(), TensorData::U32(meas.observed))?)?;
                Ok(ConditionRecord {
                    photons_per_ray: photons,
                    repeat,
                    seed,
                    expected_file,
                    measurement_file,
                    mle_file: None,
                    fbp_file: None,
                })
            })
            .collect()
    })?;
    for (s, rec) in m.samples.iter_mut().zip(produced) {
        let rec = rec?;
        // Fresh counts invalidate reconstructions of the old ones.
        for old in s.conditions.iter().filter(|c| c.photons_per_ray == photons && c.repeat == repeat) {
            for f in old.mle_file.iter().chain(old.fbp_file.iter()) {
                m.checksums.remove(f);
            }
        }
        s.conditions.retain(|c| !(c.photons_per_ray == photons && c.repeat == repeat));
        let digest_e = sha256_file(&root.join(&rec.expected_file))?;
        let digest_o = sha256_file(&root.join(&rec.measurement_file))?;
        m.checksums.insert(rec.expected_file.clone(), digest_e);
        m.checksums.insert(rec.measurement_file.clone(), digest_o);
        s.conditions.push(rec);
        s.conditions.sort_by(|x, y| x.photons_per_ray.total_cmp(&y.photons_per_ray).then(x.repeat.cmp(&y.repeat)));
    }
    m.save(root)?;
    Ok(m)
}

/// Per-sample convergence log written next to each reconstruction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconLog {
    pub id: u64,
    pub method: Method,
    pub photons_per_ray: f64,
    pub repeat: u32,
    pub measurement_seed: u64,
    pub settings_hash: Option<String>,
    pub iterations_used: Option<usize>,
    pub converged: Option<bool>,
    pub final_objective: Option<f64>,
    pub projected_gradient: Option<f64>,
    pub untraversed_voxels: Option<usize>,
    pub log_guard: Option<f64>,
    pub objective_history: Vec<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleFailure {
    pub id: u64,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BatchReport {
    pub succeeded: usize,
    pub not_converged: usize,
    pub failures: Vec<SampleFailure>,
}

impl BatchReport {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }

    fn absorb(&mut self, other: BatchReport) {
        self.succeeded += other.succeeded;
        self.not_converged += other.not_converged;
        self.failures.extend(other.failures);
    }
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn solve(cfg: &RunConfig, a: &SystemMatrix, meas: &Measurement, method: Method) -> Result<Reconstruction> {
    let photons = meas.photons_per_ray;
    let sim = cfg.spectrum_at(photons);
    let grid = cfg.grid();
    match method {
        Method::Mle => {
            let s = cfg.mle.solver_spectrum(&sim, photons);
            reconstruct_mle(meas, a, &s, grid.dims, grid.voxel_size, &cfg.mle, &cfg.prior)
        }
        Method::Fbp => reconstruct_fbp(meas, &cfg.geometry, &grid, &sim, &cfg.fbp),
    }
}

/// Reconstruct every sample (optionally one split) measured at `photons`.
pub fn cmd_reconstruct(
    cfg: &RunConfig,
    photons: f64,
    repeat: u32,
    method: Method,
    only: Option<Split>,
    workers: Option<usize>,
) -> Result<BatchReport> {
    cfg.validate()?;
    let root = &cfg.out_dir;
    let mut m = open_manifest(cfg)?;
    let a = system_matrix(cfg)?;
    let hash = m.geometry_hash.clone();
    let chosen: Vec<usize> = (0..m.samples.len()).filter(|&i| only.is_none_or(|s| m.samples[i].split == s)).collect();
    let outcomes: Vec<(usize, std::result::Result<(String, bool), String>)> = with_workers(workers, || {
        chosen
            .par_iter()
            .map(|&i| {
                let s = &m.samples[i];
                let Some(c) = s.condition(photons, repeat) else {
                    return (i, Err(format!("no measurement at {} photons (repeat {repeat})", photons_label(photons))));
                };
                let mut log = ReconLog {
                    id: s.id,
                    method,
                    photons_per_ray: photons,
                    repeat,
                    measurement_seed: c.seed,
                    settings_hash: None,
                    iterations_used: None,
                    converged: None,
                    final_objective: None,
                    projected_gradient: None,
                    untraversed_voxels: None,
                    log_guard: (method == Method::Fbp).then_some(cfg.fbp.log_guard),
                    objective_history: Vec::new(),
                    error: None,
                };
                let rel = recon_rel(photons, repeat, method, s.id);
                let result = load_measurement(cfg, root, c, &hash).and_then(|meas| solve(cfg, &a, &meas, method)).and_then(|r| {
                    let values: Vec<f32> = r.volume.values().iter().map(|&v| v as f32).collect();
                    write_tensor(&root.join(&rel), &Tensor::new(volume_dims(&r.volume), TensorData::F32(values))?)?;
                    Ok(r)
                });
                let outcome = match result {
                    Ok(r) => {
                        log.settings_hash = Some(r.settings_hash);
                        log.iterations_used = Some(r.iterations_used);
                        log.converged = Some(r.converged);
                        log.final_objective = finite(r.final_objective);
                        log.projected_gradient = finite(r.projected_gradient);
                        log.untraversed_voxels = Some(r.untraversed_voxels);
                        log.objective_history = r.objective_history;
                        Ok((rel, r.converged))
                    }
                    Err(e) => {
                        log.error = Some(e.to_string());
                        Err(e.to_string())
                    }
                };
                if let Err(e) = write_json(&root.join(recon_log_rel(photons, repeat, method, s.id)), &log) {
                    return (i, Err(format!("{e}")));
                }
                (i, outcome)
            })
            .collect()
    })?;
    let mut report = BatchReport::default();
    for (i, outcome) in outcomes {
        let id = m.samples[i].id;
        match outcome {
            Ok((rel, converged)) => {
                let digest = sha256_file(&root.join(&rel))?;
                m.checksums.insert(rel.clone(), digest);
                let c = m.samples[i].condition_mut(photons, repeat).expect("condition checked above");
                match method {
                    Method::Mle => c.mle_file = Some(rel),
                    Method::Fbp => c.fbp_file = Some(rel),
                }
                report.succeeded += 1;
                if !converged {
                    report.not_converged += 1;
                }
            }
            Err(message) => report.failures.push(SampleFailure { id, message }),
        }
    }
    m.save(root)?;
    Ok(report)
}

/// One line of `results.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub photons: f64,
    pub method: Method,
    pub ber: f64,
    pub n_voxels: usize,
    pub n_samples: usize,
    pub seed: u64,
}

/// Pooled BER of the test split without touching `results.csv`.
pub fn evaluate_condition(cfg: &RunConfig, photons: f64, repeat: u32, method: Method) -> Result<(ResultRow, BerReport)> {
    let root = &cfg.out_dir;
    let m = open_manifest(cfg)?;
    let test: Vec<&SampleRecord> = m.samples.iter().filter(|s| s.split == Split::Test).collect();
    if test.is_empty() {
        return Err(TomoError::Missing("the test split is empty".into()));
    }
    let mut recons = Vec::with_capacity(test.len());
    let mut truths = Vec::with_capacity(test.len());
    for s in test {
        let file = s.condition(photons, repeat).and_then(|c| match method {
            Method::Mle => c.mle_file.as_ref(),
            Method::Fbp => c.fbp_file.as_ref(),
        });
        let Some(file) = file else {
            return Err(TomoError::Missing(format!(
                "sample {} has no {} reconstruction at {} photons",
                s.id,
                method.as_str(),
                photons_label(photons)
            )));
        };
        recons.push(load_reconstruction(cfg, &root.join(file))?);
        truths.push(load_truth(cfg, &root.join(&s.truth_file))?);
    }
    let report = evaluate_ber(&recons, &truths)?;
    let row = ResultRow {
        photons,
        method,
        ber: report.eta_avg,
        n_voxels: report.n_voxels,
        n_samples: recons.len(),
        seed: condition_seed(cfg.master_seed, photons, repeat),
    };
    Ok((row, report))
}

pub fn results_path(cfg: &RunConfig) -> PathBuf {
    cfg.out_dir.join(RESULTS_FILE)
}

/// Pooled BER of the test split, appended to `results.csv`.
pub fn cmd_evaluate(cfg: &RunConfig, photons: f64, repeat: u32, method: Method) -> Result<(ResultRow, BerReport)> {
    cfg.validate()?;
    let (row, report) = evaluate_condition(cfg, photons, repeat, method)?;
    let path = results_path(cfg);
    let fresh = !path.exists();
    let file = fs::OpenOptions::new().create(true).append(true).open(&path).map_err(|e| TomoError::io(&path, e))?;
    let mut w = csv::WriterBuilder::new().has_headers(fresh).from_writer(file);
    w.serialize(&row)?;
    w.flush().map_err(|e| TomoError::io(&path, e))?;
    Ok((row, report))
}

pub fn write_results(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if rows.is_empty() {
        w.write_record(["photons", "method", "ber", "n_voxels", "n_samples", "seed"])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| TomoError::io(path, e))
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r.deserialize().collect::<std::result::Result<Vec<ResultRow>, _>>()?;
    Ok(rows)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<ResultRow>,
    pub batch: BatchReport,
}

/// Generate, then simulate, reconstruct (test split) and score every
/// `(photons, method, repeat)` condition; rewrites `results.csv` sorted by
/// method then photons.
pub fn cmd_sweep(cfg: &RunConfig, repeats: u32, workers: Option<usize>) -> Result<SweepReport> {
    cfg.validate()?;
    if repeats == 0 {
        return Err(TomoError::Config("--repeats must be at least 1".into()));
    }
    cmd_generate(cfg, workers)?;
    let mut report = SweepReport::default();
    for repeat in 0..repeats {
        for &photons in &cfg.photons_grid {
            cmd_simulate(cfg, photons, repeat, workers)?;
            for &method in &cfg.methods {
                let batch = cmd_reconstruct(cfg, photons, repeat, method, Some(Split::Test), workers)?;
                let failed = !batch.is_complete();
                report.batch.absorb(batch);
                let row = if failed {
                    ResultRow {
                        photons,
                        method,
                        ber: f64::NAN,
                        n_voxels: 0,
                        n_samples: 0,
                        seed: condition_seed(cfg.master_seed, photons, repeat),
                    }
                } else {
                    evaluate_condition(cfg, photons, repeat, method)?.0
                };
                report.rows.push(row);
            }
        }
    }
    report.rows.sort_by(|a, b| a.method.cmp(&b.method).then(a.photons.total_cmp(&b.photons)));
    write_results(&results_path(cfg), &report.rows)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingPair {
    pub id: u64,
    pub split: Split,
    pub approximant_file: String,
    pub truth_file: String,
}

/// Index of an exported training set; paths are relative to its directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportManifest {
    pub schema_version: u32,
    pub mode: ExportMode,
    pub photons_per_ray: f64,
    pub repeat: u32,
    pub geometry_hash: String,
    /// x-fastest dims of every approximant tensor (f32).
    pub approximant_dims: Vec<usize>,
    /// x-fastest dims of every truth tensor (u8).
    pub truth_dims: Vec<usize>,
    pub pairs: Vec<TrainingPair>,
    pub checksums: std::collections::BTreeMap<String, String>,
}

pub const EXPORT_MANIFEST: &str = "pairs.json";

impl ExportManifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(EXPORT_MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| TomoError::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Files whose checksum does not match (or that are missing).
    pub fn verify(&self, dir: &Path) -> Result<Vec<String>> {
        let mut bad = Vec::new();
        for (rel, want) in &self.checksums {
            let p = dir.join(rel);
            if !p.exists() || sha256_file(&p)? != *want {
                bad.push(rel.clone());
            }
        }
        Ok(bad)
    }
}

pub fn export_dir(cfg: &RunConfig, mode: ExportMode, photons: f64, repeat: u32) -> PathBuf {
    cfg.out_dir.join(format!("export/{}_n{}_r{repeat}", mode.as_str(), photons_label(photons)))
}

/// `(approximant, truth)` tensor pairs for the refinement trainer.
pub fn cmd_export(cfg: &RunConfig, mode: ExportMode, photons: f64, repeat: u32) -> Result<(PathBuf, ExportManifest)> {
    cfg.validate()?;
    let root = &cfg.out_dir;
    let m = open_manifest(cfg)?;
    let dir = export_dir(cfg, mode, photons, repeat);
    let vol_dims = {
        let d = cfg.circuit.dims();
        vec![d.nx, d.ny, d.nz]
    };
    let approximant_dims = match mode {
        ExportMode::Raw => detector_dims(cfg),
        _ => vol_dims.clone(),
    };
    let mut out = ExportManifest {
        schema_version: 1,
        mode,
        photons_per_ray: photons,
        repeat,
        geometry_hash: m.geometry_hash.clone(),
        approximant_dims: approximant_dims.clone(),
        truth_dims: vol_dims,
        pairs: Vec::new(),
        checksums: Default::default(),
    };
    for s in &m.samples {
        let c = s.condition(photons, repeat).ok_or_else(|| {
            TomoError::Missing(format!("sample {} has no measurement at {} photons", s.id, photons_label(photons)))
        })?;
        let approximant = match mode {
            ExportMode::Raw => {
                let meas = load_measurement(cfg, root, c, &m.geometry_hash)?;
                let t: Vec<f32> = meas.observed.iter().map(|&g| (g as f64 / photons) as f32).collect();
                Tensor::new(approximant_dims.clone(), TensorData::F32(t))?
            }
            ExportMode::Mle | ExportMode::Fbp => {
                let file = if mode == ExportMode::Mle { &c.mle_file } else { &c.fbp_file };
                let file = file.as_ref().ok_or_else(|| {
                    TomoError::Missing(format!("sample {} has no {} reconstruction; run `recon` first", s.id, mode.as_str()))
                })?;
                let v = load_reconstruction(cfg, &root.join(file))?;
                Tensor::new(approximant_dims.clone(), TensorData::F32(v.values().iter().map(|&x| x as f32).collect()))?
            }
        };
        let approximant_file = format!("approximant/{:05}.tomo", s.id);
        let truth_file = format!("truth/{:05}.tomo", s.id);
        write_tensor(&dir.join(&approximant_file), &approximant)?;
        let truth_bytes = fs::read(root.join(&s.truth_file)).map_err(|e| TomoError::io(root.join(&s.truth_file), e))?;
        let tp = dir.join(&truth_file);
        fs::create_dir_all(tp.parent().expect("has parent")).map_err(|e| TomoError::io(&tp, e))?;
        fs::write(&tp, truth_bytes).map_err(|e| TomoError::io(&tp, e))?;
        for rel in [&approximant_file, &truth_file] {
            out.checksums.insert(rel.clone(), sha256_file(&dir.join(rel))?);
        }
        out.pairs.push(TrainingPair { id: s.id, split: s.split, approximant_file, truth_file });
    }
    write_json(&dir.join(EXPORT_MANIFEST), &out)?;
    Ok((dir, out))
}

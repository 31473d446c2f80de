//! Python bindings for `tomo_core`.
//!
//! Settings objects cross the boundary as JSON strings using the same schema
//! as the CLI configuration; bulk arrays cross as flat lists in storage order
//! (x fastest).

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use tomo_core::pipeline::{self, ExportMode, RunConfig};
use tomo_core::{metrics, objects, recon_fbp, recon_mle, tensor, TomoError};

fn to_py(e: TomoError) -> PyErr {
    match e {
        TomoError::Io { .. } | TomoError::Missing(_) => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn from_json<T: serde::de::DeserializeOwned>(text: &str) -> PyResult<T> {
    serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn to_json<T: serde::Serialize>(value: &T) -> PyResult<String> {
    serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Voxel volume on a regular grid.
#[pyclass(name = "Volume", module = "tomo_py", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyVolume {
    inner: tomo_core::VoxelVolume,
}

#[pymethods]
impl PyVolume {
    /// Continuous volume from flat values (x fastest).
    #[new]
    #[pyo3(signature = (values, nx = 16, ny = 16, nz = 8, sx = 0.15, sy = 0.15, sz = 0.30))]
    fn new(values: Vec<f64>, nx: usize, ny: usize, nz: usize, sx: f64, sy: f64, sz: f64) -> PyResult<Self> {
        let inner = tomo_core::VoxelVolume::from_values(
            tomo_core::Dims::new(nx, ny, nz),
            tomo_core::VoxelSize::new(sx, sy, sz),
            values,
            tomo_core::VolumeKind::Continuous,
        )
        .map_err(to_py)?;
        Ok(PyVolume { inner })
    }

    #[getter]
    fn dims(&self) -> (usize, usize, usize) {
        let d = self.inner.dims();
        (d.nx, d.ny, d.nz)
    }

    #[getter]
    fn is_binary(&self) -> bool {
        self.inner.kind() == tomo_core::VolumeKind::BinaryTruth
    }

    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    fn get(&self, x: usize, y: usize, z: usize) -> PyResult<f64> {
        let d = self.inner.dims();
        if x >= d.nx || y >= d.ny || z >= d.nz {
            return Err(PyValueError::new_err("voxel index out of range"));
        }
        Ok(self.inner.get(x, y, z))
    }

    fn fill_fraction(&self) -> PyResult<f64> {
        objects::fill_fraction(&self.inner).map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        let (nx, ny, nz) = self.dims();
        format!("Volume({nx}x{ny}x{nz}, binary={})", self.is_binary())
    }
}

/// Cone-beam imaging geometry.
#[pyclass(name = "Geometry", module = "tomo_py", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyGeometry {
    inner: tomo_core::ImagingGeometry,
}

#[pymethods]
impl PyGeometry {
    /// Default geometry, or one parsed from a JSON document.
    #[new]
    #[pyo3(signature = (json = None))]
    fn new(json: Option<&str>) -> PyResult<Self> {
        let inner = match json {
            Some(t) => from_json(t)?,
            None => tomo_core::default_geometry(),
        };
        inner.validate().map_err(to_py)?;
        Ok(PyGeometry { inner })
    }

    #[getter]
    fn n_rays(&self) -> usize {
        self.inner.n_rays()
    }

    #[getter]
    fn n_angles(&self) -> usize {
        self.inner.n_angles()
    }

    #[getter]
    fn tilt_angles_deg(&self) -> Vec<f64> {
        self.inner.tilt_angles.clone()
    }

    fn hash(&self) -> String {
        self.inner.hash_with(&tomo_core::Grid::default())
    }

    fn to_json(&self) -> PyResult<String> {
        to_json(&self.inner)
    }
}

/// Ray-by-voxel path-length matrix for the default circuit grid.
#[pyclass(name = "SystemMatrix", module = "tomo_py", frozen)]
pub struct PySystemMatrix {
    inner: tomo_core::SystemMatrix,
    hash: String,
}

#[pymethods]
impl PySystemMatrix {
    #[new]
    #[pyo3(signature = (geometry = None))]
    fn new(py: Python<'_>, geometry: Option<PyRef<'_, PyGeometry>>) -> PyResult<Self> {
        let g = geometry.map(|g| g.inner.clone()).unwrap_or_default();
        let grid = tomo_core::Grid::default();
        let inner = py.detach(|| tomo_core::geometry::build_system_matrix(&g, &grid)).map_err(to_py)?;
        Ok(PySystemMatrix { inner, hash: g.hash_with(&grid) })
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        (self.inner.n_rays(), self.inner.n_voxels())
    }

    #[getter]
    fn nnz(&self) -> usize {
        self.inner.nnz()
    }

    fn forward(&self, f: Vec<f64>) -> PyResult<Vec<f64>> {
        if f.len() != self.inner.n_voxels() {
            return Err(PyValueError::new_err("volume length does not match the matrix"));
        }
        Ok(self.inner.forward(&f))
    }

    fn back(&self, y: Vec<f64>) -> PyResult<Vec<f64>> {
        if y.len() != self.inner.n_rays() {
            return Err(PyValueError::new_err("ray vector length does not match the matrix"));
        }
        Ok(self.inner.back(&y))
    }

    fn row_sum(&self, ray: usize) -> PyResult<f64> {
        if ray >= self.inner.n_rays() {
            return Err(PyValueError::new_err("ray index out of range"));
        }
        Ok(self.inner.row_sum(ray))
    }
}

/// Emission spectrum and photons per ray.
#[pyclass(name = "Spectrum", module = "tomo_py", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PySpectrum {
    inner: tomo_core::Spectrum,
}

#[pymethods]
impl PySpectrum {
    /// Two equally weighted Pt L-alpha lines at `photons` per ray.
    #[staticmethod]
    fn platinum(photons: f64) -> PyResult<Self> {
        let inner = tomo_core::Spectrum::platinum_l_alpha(photons);
        inner.validate().map_err(to_py)?;
        Ok(PySpectrum { inner })
    }

    #[staticmethod]
    fn monochromatic(mu_per_um: f64, photons: f64) -> PyResult<Self> {
        let inner = tomo_core::Spectrum::monochromatic(mu_per_um, photons);
        inner.validate().map_err(to_py)?;
        Ok(PySpectrum { inner })
    }

    #[staticmethod]
    fn from_json(json: &str) -> PyResult<Self> {
        let inner: tomo_core::Spectrum = from_json(json)?;
        inner.validate().map_err(to_py)?;
        Ok(PySpectrum { inner })
    }

    #[getter]
    fn photons_per_ray(&self) -> f64 {
        self.inner.photons_per_ray
    }

    #[getter]
    fn mean_mu(&self) -> f64 {
        self.inner.mean_mu()
    }

    fn to_json(&self) -> PyResult<String> {
        to_json(&self.inner)
    }
}

/// Expected and observed photon counts per ray.
#[pyclass(name = "Measurement", module = "tomo_py", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyMeasurement {
    inner: tomo_core::Measurement,
}

#[pymethods]
impl PyMeasurement {
    #[getter]
    fn expected(&self) -> Vec<f64> {
        self.inner.expected.clone()
    }

    #[getter]
    fn observed(&self) -> Vec<u32> {
        self.inner.observed.clone()
    }

    #[getter]
    fn photons_per_ray(&self) -> f64 {
        self.inner.photons_per_ray
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }
}

/// Circuit phantom; `spec_json` is a complete `CircuitSpec` document.
#[pyfunction]
#[pyo3(signature = (seed, spec_json = None))]
fn generate_circuit(seed: u64, spec_json: Option<&str>) -> PyResult<PyVolume> {
    let spec: tomo_core::CircuitSpec = match spec_json {
        Some(t) => from_json(t)?,
        None => tomo_core::CircuitSpec::default(),
    };
    let inner = objects::generate_circuit(&spec, tomo_core::CIRCUIT_VOXEL, seed).map_err(to_py)?;
    Ok(PyVolume { inner })
}

/// Independent coin toss per voxel on the circuit grid.
#[pyfunction]
fn generate_bernoulli(p: f64, seed: u64) -> PyResult<PyVolume> {
    let inner = objects::generate_bernoulli(tomo_core::CIRCUIT_DIMS, tomo_core::CIRCUIT_VOXEL, p, seed).map_err(to_py)?;
    Ok(PyVolume { inner })
}

#[pyfunction]
fn simulate(
    py: Python<'_>,
    matrix: PyRef<'_, PySystemMatrix>,
    volume: PyRef<'_, PyVolume>,
    spectrum: PyRef<'_, PySpectrum>,
    seed: u64,
) -> PyResult<PyMeasurement> {
    let (a, hash, f, s) = (&matrix.inner, matrix.hash.as_str(), &volume.inner, &spectrum.inner);
    let inner = py.detach(|| tomo_core::forward::simulate_with(a, hash, f, s, seed)).map_err(to_py)?;
    Ok(PyMeasurement { inner })
}

/// Bounded Poisson MLE; returns `(volume, info)`.
#[pyfunction]
#[pyo3(signature = (measurement, matrix, spectrum, settings_json = None, prior_json = None))]
fn reconstruct_mle<'py>(
    py: Python<'py>,
    measurement: PyRef<'py, PyMeasurement>,
    matrix: PyRef<'py, PySystemMatrix>,
    spectrum: PyRef<'py, PySpectrum>,
    settings_json: Option<&str>,
    prior_json: Option<&str>,
) -> PyResult<(PyVolume, Bound<'py, PyDict>)> {
    let settings: tomo_core::MleSettings = settings_json.map(from_json).transpose()?.unwrap_or_default();
    let prior: tomo_core::PriorSettings = prior_json.map(from_json).transpose()?.unwrap_or_default();
    let m = &measurement.inner;
    let solver = settings.solver_spectrum(&spectrum.inner, m.photons_per_ray);
    let grid = tomo_core::Grid::default();
    let a = &matrix.inner;
    let r = py
        .detach(|| recon_mle::reconstruct_mle(m, a, &solver, grid.dims, grid.voxel_size, &settings, &prior))
        .map_err(to_py)?;
    let info = PyDict::new(py);
    info.set_item("iterations_used", r.iterations_used)?;
    info.set_item("converged", r.converged)?;
    info.set_item("final_objective", r.final_objective)?;
    info.set_item("projected_gradient", r.projected_gradient)?;
    info.set_item("objective_history", r.objective_history.clone())?;
    info.set_item("settings_hash", r.settings_hash.clone())?;
    Ok((PyVolume { inner: r.volume }, info))
}

/// Filtered back-projection clipped to [0, 2]; `filter` is "ramp" or "ramp_hann".
#[pyfunction]
#[pyo3(signature = (measurement, spectrum, geometry = None, filter = "ramp", log_guard = 0.5))]
fn reconstruct_fbp(
    py: Python<'_>,
    measurement: PyRef<'_, PyMeasurement>,
    spectrum: PyRef<'_, PySpectrum>,
    geometry: Option<PyRef<'_, PyGeometry>>,
    filter: &str,
    log_guard: f64,
) -> PyResult<PyVolume> {
    let filter: tomo_core::Filter = from_json(&format!("\"{filter}\""))?;
    let settings = tomo_core::FbpSettings { filter, log_guard };
    let g = geometry.map(|g| g.inner.clone()).unwrap_or_default();
    let (m, s) = (&measurement.inner, &spectrum.inner);
    let r = py
        .detach(|| recon_fbp::reconstruct_fbp(m, &g, &tomo_core::Grid::default(), s, &settings))
        .map_err(to_py)?;
    Ok(PyVolume { inner: r.volume })
}

/// Pooled bit error rate; returns the full report as a dict.
#[pyfunction]
fn evaluate_ber<'py>(
    py: Python<'py>,
    recons: Vec<PyRef<'py, PyVolume>>,
    truths: Vec<PyRef<'py, PyVolume>>,
) -> PyResult<Bound<'py, PyDict>> {
    let r: Vec<_> = recons.iter().map(|v| v.inner.clone()).collect();
    let t: Vec<_> = truths.iter().map(|v| v.inner.clone()).collect();
    let rep = metrics::evaluate_ber(&r, &t).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("eta_avg", rep.eta_avg)?;
    d.set_item("eta0", rep.eta0)?;
    d.set_item("eta1", rep.eta1)?;
    d.set_item("threshold", rep.threshold)?;
    d.set_item("n_voxels", rep.n_voxels)?;
    d.set_item("mean0", rep.fit0.mean)?;
    d.set_item("std0", rep.fit0.std)?;
    d.set_item("mean1", rep.fit1.mean)?;
    d.set_item("std1", rep.fit1.std)?;
    Ok(d)
}

#[pyfunction]
fn normal_cdf(z: f64) -> f64 {
    metrics::normal_cdf(z)
}

/// Read a TOMO1 tensor as `(dims, dtype, flat values as floats)`.
#[pyfunction]
fn read_tensor(path: PathBuf) -> PyResult<(Vec<usize>, String, Vec<f64>)> {
    let t = tensor::read_tensor(&path).map_err(to_py)?;
    let dtype = to_json(&t.data.dtype())?.trim_matches('"').to_string();
    Ok((t.dims, dtype, t.data.to_f64()))
}

/// Write a TOMO1 tensor; `dtype` is one of u8, u32, f32, f64.
#[pyfunction]
fn write_tensor(path: PathBuf, dims: Vec<usize>, dtype: &str, values: Vec<f64>) -> PyResult<()> {
    let data = match dtype {
        "u8" => tensor::TensorData::U8(values.iter().map(|&v| v as u8).collect()),
        "u32" => tensor::TensorData::U32(values.iter().map(|&v| v as u32).collect()),
        "f32" => tensor::TensorData::F32(values.iter().map(|&v| v as f32).collect()),
        "f64" => tensor::TensorData::F64(values),
        _ => return Err(PyValueError::new_err(format!("unknown dtype {dtype:?}"))),
    };
    let t = tensor::Tensor::new(dims, data).map_err(to_py)?;
    tensor::write_tensor(&path, &t).map_err(to_py)
}

fn config(json: &str) -> PyResult<RunConfig> {
    let cfg: RunConfig = from_json(json)?;
    cfg.validate().map_err(to_py)?;
    Ok(cfg)
}

/// Run a photon sweep from a JSON run configuration; returns result rows.
#[pyfunction]
#[pyo3(signature = (config_json, repeats = 1, workers = None))]
fn run_sweep<'py>(
    py: Python<'py>,
    config_json: &str,
    repeats: u32,
    workers: Option<usize>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let cfg = config(config_json)?;
    let report = py.detach(|| pipeline::cmd_sweep(&cfg, repeats, workers)).map_err(to_py)?;
    report
        .rows
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("photons", r.photons)?;
            d.set_item("method", r.method.as_str())?;
            d.set_item("ber", r.ber)?;
            d.set_item("n_voxels", r.n_voxels)?;
            d.set_item("n_samples", r.n_samples)?;
            d.set_item("seed", r.seed)?;
            Ok(d)
        })
        .collect()
}

/// Export training pairs; returns the export directory.
#[pyfunction]
#[pyo3(signature = (config_json, mode, photons, repeat = 0))]
fn export_pairs(config_json: &str, mode: &str, photons: f64, repeat: u32) -> PyResult<PathBuf> {
    let cfg = config(config_json)?;
    let mode = ExportMode::parse(mode).map_err(to_py)?;
    let (dir, _) = pipeline::cmd_export(&cfg, mode, photons, repeat).map_err(to_py)?;
    Ok(dir)
}

#[pymodule]
fn tomo_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyVolume>()?;
    m.add_class::<PyGeometry>()?;
    m.add_class::<PySystemMatrix>()?;
    m.add_class::<PySpectrum>()?;
    m.add_class::<PyMeasurement>()?;
    m.add_function(wrap_pyfunction!(generate_circuit, m)?)?;
    m.add_function(wrap_pyfunction!(generate_bernoulli, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(reconstruct_mle, m)?)?;
    m.add_function(wrap_pyfunction!(reconstruct_fbp, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_ber, m)?)?;
    m.add_function(wrap_pyfunction!(normal_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(read_tensor, m)?)?;
    m.add_function(wrap_pyfunction!(write_tensor, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(export_pairs, m)?)?;
    m.add("FILL_FRACTION_REFERENCE", objects::REFERENCE_FILL_FRACTION)?;
    Ok(())
}

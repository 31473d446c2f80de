//! Simulation and reconstruction toolkit for limited-angle, low-photon X-ray
//! tomography of synthetic integrated-circuit phantoms.
//!
//! The crate covers the whole chain: phantom generation ([`objects`]),
//! cone-beam ray tracing ([`geometry`]), Beer's-law counts with Poisson noise
//! ([`forward`]), bounded Poisson maximum likelihood ([`recon_mle`]) and
//! filtered back-projection ([`recon_fbp`]) reconstruction, bit-error-rate
//! scoring ([`metrics`]), and the batch [`pipeline`] behind the `tomo` CLI.

pub mod error;
pub mod forward;
pub mod geometry;
pub mod lbfgsb;
pub mod metrics;
pub mod objects;
pub mod pipeline;
pub mod recon_fbp;
pub mod recon_mle;
pub mod rng;
pub mod tensor;
pub mod volume;

pub use error::{Result, TomoError};
pub use forward::{Measurement, SpectralLine, Spectrum};
pub use geometry::{default_geometry, Grid, ImagingGeometry, Ray, SystemMatrix};
pub use metrics::{BerReport, GaussianFit, Threshold};
pub use objects::{CircuitSpec, LayerKind, Propagation};
pub use recon_fbp::{FbpSettings, Filter};
pub use recon_mle::{MleSettings, PriorSettings, Reconstruction};
pub use volume::{Dims, VolumeKind, VoxelSize, VoxelVolume, CIRCUIT_DIMS, CIRCUIT_VOXEL};

//! Synthetic ground-truth phantoms.
//!
//! Circuits are built in two rounds on a 1-based `(i1, i2, i3)` lattice.
//! Round one seeds every all-odd site with probability `pw`. Round two grows
//! wires one voxel at a time: along +x on x-wiring layers, along +y on
//! y-wiring layers and along +z into via layers.
//!
//! Every Bernoulli draw is addressed by its lattice coordinates, so a site
//! consumes the same randomness regardless of the grid it sits in.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TomoError};
use crate::rng::{self, tag};
use crate::volume::{Dims, VolumeKind, VoxelSize, VoxelVolume};

/// Circuit fill fraction used as the reference operating point.
pub const REFERENCE_FILL_FRACTION: f64 = 0.18521;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerKind {
    XWiring,
    YWiring,
    Via,
}

impl LayerKind {
    /// Layer kind of 1-based layer index `i3`.
    pub fn of_layer(i3: usize) -> LayerKind {
        match i3 % 4 {
            1 => LayerKind::XWiring,
            3 => LayerKind::YWiring,
            _ => LayerKind::Via,
        }
    }
}

/// Which bits may act as sources during round two.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Propagation {
    /// Only bits set in round one propagate; each seed grows at most one voxel
    /// per rule.
    #[default]
    RoundOneSources,
    /// Single raster pass (x fastest, then y, then z) in which bits set
    /// earlier in the pass are eligible sources; wire lengths are geometric.
    Chained,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircuitSpec {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub pw: f64,
    pub px: f64,
    pub py: f64,
    pub pz: f64,
    #[serde(default)]
    pub propagation: Propagation,
}

impl Default for CircuitSpec {
    fn default() -> Self {
        CircuitSpec {
            nx: 16,
            ny: 16,
            nz: 8,
            pw: 0.75,
            px: 0.8,
            py: 0.8,
            pz: 0.5,
            propagation: Propagation::default(),
        }
    }
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(TomoError::Config(format!("{name} must lie in [0, 1], got {p}")));
    }
    Ok(())
}

impl CircuitSpec {
    pub fn dims(&self) -> Dims {
        Dims::new(self.nx, self.ny, self.nz)
    }

    pub fn validate(&self) -> Result<()> {
        self.dims().validate()?;
        check_probability("pw", self.pw)?;
        check_probability("px", self.px)?;
        check_probability("py", self.py)?;
        check_probability("pz", self.pz)?;
        Ok(())
    }
}

/// Counter for a 1-based lattice site; independent of the grid extent.
#[inline]
fn site_counter(i1: usize, i2: usize, i3: usize) -> u64 {
    (i1 as u64) | ((i2 as u64) << 21) | ((i3 as u64) << 42)
}

pub fn generate_circuit(spec: &CircuitSpec, voxel_size: VoxelSize, seed: u64) -> Result<VoxelVolume> {
    spec.validate()?;
    let dims = spec.dims();
    let mut bits = vec![false; dims.len()];

    for i3 in (1..=dims.nz).step_by(2) {
        for i2 in (1..=dims.ny).step_by(2) {
            for i1 in (1..=dims.nx).step_by(2) {
                let c = site_counter(i1, i2, i3);
                if rng::bernoulli(seed, tag::CIRCUIT_SEED, c, spec.pw) {
                    bits[dims.index1(i1, i2, i3)] = true;
                }
            }
        }
    }

    let round_one = match spec.propagation {
        Propagation::RoundOneSources => Some(bits.clone()),
        Propagation::Chained => None,
    };

    for i3 in 1..=dims.nz {
        let kind = LayerKind::of_layer(i3);
        for i2 in 1..=dims.ny {
            for i1 in 1..=dims.nx {
                let here = dims.index1(i1, i2, i3);
                if bits[here] {
                    continue;
                }
                let (source, p) = match kind {
                    LayerKind::XWiring if i1 > 1 => (dims.index1(i1 - 1, i2, i3), spec.px),
                    LayerKind::YWiring if i2 > 1 => (dims.index1(i1, i2 - 1, i3), spec.py),
                    LayerKind::Via if i3 > 1 => (dims.index1(i1, i2, i3 - 1), spec.pz),
                    _ => continue,
                };
                let lit = match &round_one {
                    Some(r1) => r1[source],
                    None => bits[source],
                };
                if lit && rng::bernoulli(seed, tag::CIRCUIT_PROPAGATE, site_counter(i1, i2, i3), p) {
                    bits[here] = true;
                }
            }
        }
    }

    VoxelVolume::from_bits(dims, voxel_size, &bits)
}

/// Independent coin toss at every voxel.
pub fn generate_bernoulli(dims: Dims, voxel_size: VoxelSize, p: f64, seed: u64) -> Result<VoxelVolume> {
    dims.validate()?;
    check_probability("p", p)?;
    let bits: Vec<bool> = (0..dims.len())
        .map(|i| {
            let (x, y, z) = dims.coords(i);
            rng::bernoulli(seed, tag::BERNOULLI, site_counter(x + 1, y + 1, z + 1), p)
        })
        .collect();
    VoxelVolume::from_bits(dims, voxel_size, &bits)
}

pub fn fill_fraction(v: &VoxelVolume) -> Result<f64> {
    if v.kind() != VolumeKind::BinaryTruth {
        return Err(TomoError::Type("fill fraction is defined for binary truth volumes only".into()));
    }
    let ones = v.values().iter().filter(|&&x| x == 1.0).count();
    Ok(ones as f64 / v.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::CIRCUIT_VOXEL;

    fn spec(pw: f64, px: f64, py: f64, pz: f64) -> CircuitSpec {
        CircuitSpec { pw, px, py, pz, ..CircuitSpec::default() }
    }

    #[test]
    fn layer_partition() {
        assert_eq!(LayerKind::of_layer(1), LayerKind::XWiring);
        assert_eq!(LayerKind::of_layer(2), LayerKind::Via);
        assert_eq!(LayerKind::of_layer(3), LayerKind::YWiring);
        assert_eq!(LayerKind::of_layer(4), LayerKind::Via);
        assert_eq!(LayerKind::of_layer(5), LayerKind::XWiring);
        for i3 in 1..200 {
            let kinds = [LayerKind::XWiring, LayerKind::YWiring, LayerKind::Via];
            let hits = kinds.iter().filter(|&&k| k == LayerKind::of_layer(i3)).count();
            assert_eq!(hits, 1);
            assert_eq!(LayerKind::of_layer(i3) == LayerKind::Via, i3 % 2 == 0);
        }
    }

    #[test]
    fn no_seeds_means_empty() {
        for mode in [Propagation::RoundOneSources, Propagation::Chained] {
            let s = CircuitSpec { propagation: mode, ..spec(0.0, 1.0, 1.0, 1.0) };
            let v = generate_circuit(&s, CIRCUIT_VOXEL, 9).unwrap();
            assert_eq!(fill_fraction(&v).unwrap(), 0.0);
        }
    }

    #[test]
    fn full_seeds_without_growth_is_the_lattice() {
        let v = generate_circuit(&spec(1.0, 0.0, 0.0, 0.0), CIRCUIT_VOXEL, 1).unwrap();
        assert_eq!(fill_fraction(&v).unwrap(), 0.125);
        let d = v.dims();
        for (i, &b) in v.values().iter().enumerate() {
            let (x, y, z) = d.coords(i);
            let lattice = x % 2 == 0 && y % 2 == 0 && z % 2 == 0;
            assert_eq!(b == 1.0, lattice);
        }
    }

    #[test]
    fn chained_growth_fills_whole_rows() {
        // pw = 1 and px = 1: every odd row of an x layer becomes a full wire.
        let s = CircuitSpec { propagation: Propagation::Chained, ..spec(1.0, 1.0, 0.0, 0.0) };
        let v = generate_circuit(&s, CIRCUIT_VOXEL, 3).unwrap();
        assert!((0..16).all(|x| v.get(x, 0, 0) == 1.0));
        assert!((0..16).all(|x| v.get(x, 1, 0) == 0.0));
        // Round-one sources only extend each seed by one voxel, which with all
        // seeds lit is again the full row.
        let s = spec(1.0, 1.0, 0.0, 0.0);
        let v = generate_circuit(&s, CIRCUIT_VOXEL, 3).unwrap();
        assert!((0..16).all(|x| v.get(x, 0, 0) == 1.0));
    }

    #[test]
    fn vias_grow_from_the_layer_below() {
        let v = generate_circuit(&spec(1.0, 0.0, 0.0, 1.0), CIRCUIT_VOXEL, 5).unwrap();
        // Layer 2 (0-based z = 1) sits on the seeded layer 1.
        assert_eq!(v.get(0, 0, 1), 1.0);
        assert_eq!(v.get(1, 0, 1), 0.0);
    }

    #[test]
    fn deterministic_in_seed() {
        let s = CircuitSpec::default();
        let a = generate_circuit(&s, CIRCUIT_VOXEL, 77).unwrap();
        let b = generate_circuit(&s, CIRCUIT_VOXEL, 77).unwrap();
        let c = generate_circuit(&s, CIRCUIT_VOXEL, 78).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn draws_do_not_shift_with_dims() {
        let small = CircuitSpec { nx: 8, ny: 8, nz: 4, ..CircuitSpec::default() };
        let a = generate_circuit(&small, CIRCUIT_VOXEL, 11).unwrap();
        let b = generate_circuit(&CircuitSpec::default(), CIRCUIT_VOXEL, 11).unwrap();
        // Seeds at shared lattice sites agree between the two grids.
        for z in (0..4).step_by(2) {
            for y in (0..8).step_by(2) {
                for x in (0..8).step_by(2) {
                    assert_eq!(a.get(x, y, z), b.get(x, y, z));
                }
            }
        }
    }

    #[test]
    fn invalid_specs() {
        assert!(matches!(
            generate_circuit(&spec(1.5, 0.0, 0.0, 0.0), CIRCUIT_VOXEL, 0),
            Err(TomoError::Config(_))
        ));
        let zero = CircuitSpec { nz: 0, ..CircuitSpec::default() };
        assert!(matches!(generate_circuit(&zero, CIRCUIT_VOXEL, 0), Err(TomoError::Config(_))));
        assert!(generate_bernoulli(Dims::new(2, 2, 2), CIRCUIT_VOXEL, -0.1, 0).is_err());
    }

    #[test]
    fn bernoulli_extremes() {
        let d = Dims::new(16, 16, 8);
        let zero = generate_bernoulli(d, CIRCUIT_VOXEL, 0.0, 4).unwrap();
        let one = generate_bernoulli(d, CIRCUIT_VOXEL, 1.0, 4).unwrap();
        assert_eq!(fill_fraction(&zero).unwrap(), 0.0);
        assert_eq!(fill_fraction(&one).unwrap(), 1.0);
    }

    #[test]
    fn fill_fraction_rejects_continuous() {
        let v = VoxelVolume::zeros(Dims::new(2, 2, 2), CIRCUIT_VOXEL, VolumeKind::Continuous);
        assert!(matches!(fill_fraction(&v), Err(TomoError::Type(_))));
    }
}

//! Magic, entanglement and participation quantities of an RBC product state.
//!
//! Each cluster is Clifford-equivalent to `(|0> + e^{iφ}|1>) ⊗ |stabilizer>`,
//! and tracing out part of a cluster leaves a classical mixture of two basis
//! states. Every quantity here is therefore a sum over clusters, classified by
//! how each cluster meets the region(s) involved:
//!
//! * full magic: every cluster contributes `m(φ)`;
//! * subsystem magic of `A`: clusters contained in `A`;
//! * mutual magic and entanglement across `A | A^c`: clusters with members on both sides;
//! * participation entropy: one bit per cluster (per cluster touching the region for reduced states).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::phase::PhaseValue;
use crate::rbc::Partition;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ObservableError {
    #[error("t-unit magic needs a phase that is a multiple of pi/4, got {0} rad")]
    NotQuarterTurn(f64),
    #[error("site {site} out of range for {n_sites} sites")]
    SiteOutOfRange { site: usize, n_sites: usize },
    #[error("region must be a non-empty proper subset of the {0} sites")]
    TrivialCut(usize),
    #[error("regions A, B, C must be disjoint and cover all sites")]
    BadPartition,
    #[error("region covers {region} sites but state has {state}")]
    SizeMismatch { region: usize, state: usize },
    #[error("unknown observable `{0}`")]
    UnknownObservable(String),
}

/// An additive magic measure evaluated on single-qubit states `|0> + e^{iφ}|1>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MagicMeasure {
    /// Stabilizer nullity: 0 for stabilizer states, 1 otherwise.
    Nullity,
    /// Stabilizer Rényi-2 entropy, `-log2[(1 + cos⁴φ + sin⁴φ)/2]`.
    StabilizerRenyi2,
    /// Magic in units of the T state; only defined for multiples of π/4.
    #[default]
    TUnit,
}

impl MagicMeasure {
    pub fn single_qubit(self, phi: PhaseValue) -> Result<f64, ObservableError> {
        if phi.is_stabilizer() {
            return Ok(0.0);
        }
        Ok(match self {
            MagicMeasure::Nullity => 1.0,
            MagicMeasure::StabilizerRenyi2 => {
                let x = phi.radians();
                let (c, s) = (x.cos(), x.sin());
                -((1.0 + c.powi(4) + s.powi(4)) / 2.0).log2()
            }
            MagicMeasure::TUnit => match phi.quarter_turns() {
                Some(_) => 1.0,
                None => return Err(ObservableError::NotQuarterTurn(phi.radians())),
            },
        })
    }

    /// Value on the T state `|0> + e^{iπ/4}|1>`; magic curves are reported in these units.
    pub fn t_value(self) -> f64 {
        self.single_qubit(PhaseValue::PI_4).expect("T state is a quarter turn")
    }
}

impl fmt::Display for MagicMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MagicMeasure::Nullity => "nullity",
            MagicMeasure::StabilizerRenyi2 => "stabilizer_renyi2",
            MagicMeasure::TUnit => "t_unit",
        })
    }
}

/// `m(φ)` for one qubit.
pub fn single_qubit_magic(phi: PhaseValue, measure: MagicMeasure) -> Result<f64, ObservableError> {
    measure.single_qubit(phi)
}

/// A set of sites, stored as a membership mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Region {
    mask: Vec<bool>,
}

impl Region {
    pub fn new(n_sites: usize, sites: impl IntoIterator<Item = usize>) -> Result<Self, ObservableError> {
        let mut mask = vec![false; n_sites];
        for site in sites {
            if site >= n_sites {
                return Err(ObservableError::SiteOutOfRange { site, n_sites });
            }
            mask[site] = true;
        }
        Ok(Region { mask })
    }

    pub fn from_mask(mask: Vec<bool>) -> Self {
        Region { mask }
    }

    /// Sites `start..start+len`, wrapping around.
    pub fn interval(n_sites: usize, start: usize, len: usize) -> Self {
        let mut mask = vec![false; n_sites];
        for k in 0..len.min(n_sites) {
            mask[(start + k) % n_sites] = true;
        }
        Region { mask }
    }

    /// The `w × h` rectangle at `(x0, y0)` of an `l × l` lattice with site index `y·l + x` (wrapping).
    pub fn rect(l: usize, x0: usize, y0: usize, w: usize, h: usize) -> Self {
        let mut mask = vec![false; l * l];
        for dy in 0..h.min(l) {
            for dx in 0..w.min(l) {
                mask[((y0 + dy) % l) * l + (x0 + dx) % l] = true;
            }
        }
        Region { mask }
    }

    pub fn n_sites(&self) -> usize {
        self.mask.len()
    }

    pub fn len(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&b| b)
    }

    pub fn contains(&self, site: usize) -> bool {
        self.mask.get(site).copied().unwrap_or(false)
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn sites(&self) -> Vec<usize> {
        self.mask.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect()
    }

    pub fn complement(&self) -> Region {
        Region { mask: self.mask.iter().map(|b| !b).collect() }
    }

    pub fn union(&self, other: &Region) -> Region {
        Region { mask: self.mask.iter().zip(&other.mask).map(|(a, b)| *a || *b).collect() }
    }
}

fn check_size(part: &Partition, region: &Region) -> Result<(), ObservableError> {
    if region.n_sites() != part.n_sites() {
        return Err(ObservableError::SizeMismatch { region: region.n_sites(), state: part.n_sites() });
    }
    Ok(())
}

fn check_cut(part: &Partition, region: &Region) -> Result<(), ObservableError> {
    check_size(part, region)?;
    let k = region.len();
    if k == 0 || k == part.n_sites() {
        return Err(ObservableError::TrivialCut(part.n_sites()));
    }
    Ok(())
}

/// Per-cluster magic values.
pub fn cluster_magic(part: &Partition, measure: MagicMeasure) -> Result<Vec<f64>, ObservableError> {
    part.phases().iter().map(|&phi| measure.single_qubit(phi)).collect()
}

/// Sum of single-qubit magic over all clusters.
pub fn full_magic(part: &Partition, measure: MagicMeasure) -> Result<f64, ObservableError> {
    Ok(cluster_magic(part, measure)?.iter().sum())
}

/// Magic of the reduced state on `region`: clusters fully inside it; cut clusters are stabilizer mixtures.
pub fn subsystem_magic(part: &Partition, region: &Region, measure: MagicMeasure) -> Result<f64, ObservableError> {
    check_size(part, region)?;
    let counts = part.region_counts(region.mask());
    let magic = cluster_magic(part, measure)?;
    Ok(counts
        .iter()
        .zip(part.sizes())
        .zip(&magic)
        .filter(|((&c, &s), _)| c == s)
        .map(|(_, m)| m)
        .sum())
}

/// Magic of clusters with members on both sides of the cut.
pub fn mutual_magic(part: &Partition, region: &Region, measure: MagicMeasure) -> Result<f64, ObservableError> {
    check_cut(part, region)?;
    let counts = part.region_counts(region.mask());
    let magic = cluster_magic(part, measure)?;
    Ok(counts
        .iter()
        .zip(part.sizes())
        .zip(&magic)
        .filter(|((&c, &s), _)| c > 0 && c < s)
        .map(|(_, m)| m)
        .sum())
}

/// `M(ψ) - M(ρ_A) - M(ρ_{A^c})` evaluated term by term.
pub fn mutual_magic_from_definition(part: &Partition, region: &Region, measure: MagicMeasure) -> Result<f64, ObservableError> {
    check_cut(part, region)?;
    Ok(full_magic(part, measure)?
        - subsystem_magic(part, region, measure)?
        - subsystem_magic(part, &region.complement(), measure)?)
}

/// Both readings of the topological magic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TopoMagic {
    /// `M(ρ_ABC) + M(ρ_B) - M(ρ_AB) - M(ρ_BC)`
    pub combination: f64,
    /// clusters touching all three of A, B and C
    pub touching_abc: f64,
    /// clusters touching A and C but not B
    pub touching_ac_only: f64,
}

fn check_tripartition(part: &Partition, a: &Region, b: &Region, c: &Region) -> Result<(), ObservableError> {
    for r in [a, b, c] {
        check_size(part, r)?;
    }
    for site in 0..part.n_sites() {
        let hits = usize::from(a.contains(site)) + usize::from(b.contains(site)) + usize::from(c.contains(site));
        if hits != 1 {
            return Err(ObservableError::BadPartition);
        }
    }
    Ok(())
}

/// Topological magic over the partition `A ∪ B ∪ C`, with both cluster tallies.
pub fn topological_magic_tallies(
    part: &Partition,
    a: &Region,
    b: &Region,
    c: &Region,
    measure: MagicMeasure,
) -> Result<TopoMagic, ObservableError> {
    check_tripartition(part, a, b, c)?;
    let combination = full_magic(part, measure)? + subsystem_magic(part, b, measure)?
        - subsystem_magic(part, &a.union(b), measure)?
        - subsystem_magic(part, &b.union(c), measure)?;
    let magic = cluster_magic(part, measure)?;
    let (ca, cb, cc) = (part.region_counts(a.mask()), part.region_counts(b.mask()), part.region_counts(c.mask()));
    let mut touching_abc = 0.0;
    let mut touching_ac_only = 0.0;
    for k in 0..part.n_clusters() {
        match (ca[k] > 0, cb[k] > 0, cc[k] > 0) {
            (true, true, true) => touching_abc += magic[k],
            (true, false, true) => touching_ac_only += magic[k],
            _ => {}
        }
    }
    Ok(TopoMagic { combination, touching_abc, touching_ac_only })
}

/// `M(ρ_ABC) + M(ρ_B) - M(ρ_AB) - M(ρ_BC)`.
pub fn topological_magic(part: &Partition, a: &Region, b: &Region, c: &Region, measure: MagicMeasure) -> Result<f64, ObservableError> {
    topological_magic_tallies(part, a, b, c, measure).map(|t| t.combination)
}

/// Entanglement entropy (bits) of the cut: one bit per spanning cluster.
pub fn entanglement_entropy(part: &Partition, region: &Region) -> Result<f64, ObservableError> {
    check_cut(part, region)?;
    let counts = part.region_counts(region.mask());
    Ok(counts.iter().zip(part.sizes()).filter(|(&c, &s)| c > 0 && c < s).count() as f64)
}

/// Participation entropy (bits) of the full state: one bit per cluster.
pub fn participation_entropy(part: &Partition) -> f64 {
    part.n_clusters() as f64
}

/// Participation entropy (bits) of `ρ_A`: one bit per cluster intersecting `A`.
pub fn participation_entropy_region(part: &Partition, region: &Region) -> Result<f64, ObservableError> {
    check_size(part, region)?;
    Ok(part.region_counts(region.mask()).iter().filter(|&&c| c > 0).count() as f64)
}

/// `S_part(ρ_A) + S_part(ρ_{A^c}) - S_part(ψ)`.
pub fn shannon_mutual_information(part: &Partition, region: &Region) -> Result<f64, ObservableError> {
    check_cut(part, region)?;
    Ok(participation_entropy_region(part, region)? + participation_entropy_region(part, &region.complement())?
        - participation_entropy(part))
}

/// Spanning sums for a nested family of regions `A_ℓ = {site : key(site) < ℓ}`.
///
/// A cluster spans the cut of `A_ℓ` iff `min key < ℓ <= max key`, so the whole
/// family costs O(n_sites + levels). Returns `out[ℓ - 1]` for `ℓ = 1..=levels`.
pub fn nested_span_profile(part: &Partition, keys: &[u32], levels: usize, weights: &[f64]) -> Vec<f64> {
    let k = part.n_clusters();
    let mut lo = vec![u32::MAX; k];
    let mut hi = vec![0u32; k];
    for (site, &label) in part.labels().iter().enumerate() {
        let c = label as usize;
        lo[c] = lo[c].min(keys[site]);
        hi[c] = hi[c].max(keys[site]);
    }
    // diff[ℓ] accumulates clusters with lo < ℓ <= hi
    let mut diff = vec![0.0; levels + 2];
    for c in 0..k {
        if weights[c] == 0.0 || lo[c] >= hi[c] {
            continue;
        }
        let start = (lo[c] as usize + 1).min(levels + 1);
        let end = (hi[c] as usize + 1).min(levels + 1);
        diff[start] += weights[c];
        diff[end] -= weights[c];
    }
    let mut acc = 0.0;
    (1..=levels)
        .map(|l| {
            acc += diff[l];
            acc
        })
        .collect()
}

/// Stable identifiers of the observables a run can schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservableId {
    MagicDensity,
    MutualMagicHalf,
    MutualMagicProfile,
    TopoMagic,
    EntanglementHalf,
    EntanglementProfile,
    Participation,
    ShannonMutual,
}

impl ObservableId {
    pub const ALL: [ObservableId; 8] = [
        ObservableId::MagicDensity,
        ObservableId::MutualMagicHalf,
        ObservableId::MutualMagicProfile,
        ObservableId::TopoMagic,
        ObservableId::EntanglementHalf,
        ObservableId::EntanglementProfile,
        ObservableId::Participation,
        ObservableId::ShannonMutual,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ObservableId::MagicDensity => "magic_density",
            ObservableId::MutualMagicHalf => "mutual_magic_half",
            ObservableId::MutualMagicProfile => "mutual_magic_profile",
            ObservableId::TopoMagic => "topo_magic",
            ObservableId::EntanglementHalf => "entanglement_half",
            ObservableId::EntanglementProfile => "entanglement_profile",
            ObservableId::Participation => "participation",
            ObservableId::ShannonMutual => "shannon_mutual",
        }
    }

    pub fn is_profile(self) -> bool {
        matches!(self, ObservableId::MutualMagicProfile | ObservableId::EntanglementProfile)
    }
}

impl fmt::Display for ObservableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ObservableId {
    type Err = ObservableError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ObservableId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| ObservableError::UnknownObservable(s.to_string()))
    }
}

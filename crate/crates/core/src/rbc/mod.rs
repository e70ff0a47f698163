//! Rotated-Bell-cluster (RBC) states.
//!
//! Every state reachable in the circuit is a tensor product of clusters of the
//! form `|b> + e^{ip}|b̄>` over some set of sites, where `b̄` flips every bit of
//! the reference string `b`. The state is fully described by a cluster label
//! per site, a reference bit per site and one phase per cluster, and both
//! measurement types act on this description in O(1) or O(size of the smaller
//! merged cluster).
//!
//! [`ClusterState`] is the full engine (member sets, bits and phases, Born-exact
//! outcomes for any angle). [`ParityState`] is the reduced engine for the fixed
//! `θ = π/4` protocol, which only needs cluster connectivity and size parity.

mod parity;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::phase::PhaseValue;

pub use parity::ParityState;

/// Forced outcomes with Born probability below this are rejected.
pub const MIN_OUTCOME_PROB: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RbcError {
    #[error("expected {expected} phases, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("site {site} out of range for {n_sites} sites")]
    SiteOutOfRange { site: usize, n_sites: usize },
    #[error("zz measurement needs two distinct sites, got {0} twice")]
    SameSite(usize),
    #[error("outcome {lambda} has Born probability {probability:e}")]
    ImpossibleOutcome { lambda: Lambda, probability: f64 },
    #[error("no cluster with id {0}")]
    UnknownCluster(u32),
    #[error("invalid cluster layout: {0}")]
    InvalidLayout(String),
}

/// Measurement eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Lambda {
    #[serde(rename = "+1")]
    Plus,
    #[serde(rename = "-1")]
    Minus,
}

impl Lambda {
    pub fn sign(self) -> i8 {
        match self {
            Lambda::Plus => 1,
            Lambda::Minus => -1,
        }
    }

    /// `(-1)^parity`.
    pub fn from_parity(parity: u8) -> Lambda {
        if parity & 1 == 0 {
            Lambda::Plus
        } else {
            Lambda::Minus
        }
    }

    /// `δ_{λ,-1}·π`
    fn phase_kick(self) -> PhaseValue {
        match self {
            Lambda::Plus => PhaseValue::ZERO,
            Lambda::Minus => PhaseValue::PI,
        }
    }
}

impl std::fmt::Display for Lambda {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Lambda::Plus => "+1",
            Lambda::Minus => "-1",
        })
    }
}

/// A realized outcome together with its Born probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub lambda: Lambda,
    pub probability: f64,
}

/// Where the outcome of a measurement comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OutcomeSource {
    /// A uniform number in `[0, 1)`; `λ = +1` iff `u < Pr(+1)`.
    Uniform(f64),
    /// A fixed outcome, rejected if it has zero Born probability.
    Forced(Lambda),
}

impl OutcomeSource {
    pub fn resolve(self, dist: (f64, f64)) -> Result<Outcome, RbcError> {
        let (plus, minus) = dist;
        let lambda = match self {
            OutcomeSource::Uniform(u) => {
                if u < plus {
                    Lambda::Plus
                } else {
                    Lambda::Minus
                }
            }
            OutcomeSource::Forced(l) => l,
        };
        let probability = match lambda {
            Lambda::Plus => plus,
            Lambda::Minus => minus,
        };
        if probability < MIN_OUTCOME_PROB {
            return Err(RbcError::ImpossibleOutcome { lambda, probability });
        }
        Ok(Outcome { lambda, probability })
    }
}

/// One cluster: its phase and member sites.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterRecord {
    phase: PhaseValue,
    members: Vec<u32>,
}

impl ClusterRecord {
    pub fn phase(&self) -> PhaseValue {
        self.phase
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn members(&self) -> &[u32] {
        &self.members
    }

    pub fn is_odd(&self) -> bool {
        self.members.len() % 2 == 1
    }
}

/// Summary counts of a cluster configuration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClusterCensus {
    pub n_clusters: usize,
    /// size → number of clusters with that size
    pub size_histogram: BTreeMap<usize, usize>,
    pub odd_count: usize,
}

impl ClusterCensus {
    fn from_sizes(sizes: impl Iterator<Item = usize>) -> Self {
        let mut size_histogram = BTreeMap::new();
        let mut n_clusters = 0;
        let mut odd_count = 0;
        for s in sizes {
            n_clusters += 1;
            odd_count += s % 2;
            *size_histogram.entry(s).or_insert(0) += 1;
        }
        ClusterCensus { n_clusters, size_histogram, odd_count }
    }
}

/// A read-only snapshot of the cluster structure with dense cluster ids
/// `0..n_clusters`, ordered by the lowest member site.
///
/// Partitions produced by [`ParityState`] carry a representative phase per
/// cluster (`0` for even size, `π/4` for odd size), which has the same magic as
/// the true phase under the fixed `π/4` protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    labels: Vec<u32>,
    sizes: Vec<u32>,
    phases: Vec<PhaseValue>,
}

impl Partition {
    /// Builds a partition from arbitrary per-site labels, renumbering them densely.
    pub fn from_labels(raw: &[u32], phase_of: impl Fn(u32, u32) -> PhaseValue) -> Self {
        let max = raw.iter().copied().max().map_or(0, |m| m as usize + 1);
        let mut remap = vec![u32::MAX; max];
        let mut labels = Vec::with_capacity(raw.len());
        let mut sizes: Vec<u32> = Vec::new();
        let mut originals = Vec::new();
        for &r in raw {
            let slot = &mut remap[r as usize];
            if *slot == u32::MAX {
                *slot = sizes.len() as u32;
                sizes.push(0);
                originals.push(r);
            }
            sizes[*slot as usize] += 1;
            labels.push(*slot);
        }
        let phases = originals
            .iter()
            .zip(&sizes)
            .map(|(&orig, &size)| phase_of(orig, size))
            .collect();
        Partition { labels, sizes, phases }
    }

    pub fn n_sites(&self) -> usize {
        self.labels.len()
    }

    pub fn n_clusters(&self) -> usize {
        self.sizes.len()
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn sizes(&self) -> &[u32] {
        &self.sizes
    }

    pub fn phases(&self) -> &[PhaseValue] {
        &self.phases
    }

    pub fn census(&self) -> ClusterCensus {
        ClusterCensus::from_sizes(self.sizes.iter().map(|&s| s as usize))
    }

    /// Number of members of each cluster inside `mask`.
    pub fn region_counts(&self, mask: &[bool]) -> Vec<u32> {
        let mut counts = vec![0u32; self.sizes.len()];
        for (site, &inside) in mask.iter().enumerate() {
            if inside {
                counts[self.labels[site] as usize] += 1;
            }
        }
        counts
    }
}

/// Common interface of the full and parity engines, as used by the circuit driver.
pub trait ClusterEngine: Send {
    fn n_sites(&self) -> usize;

    fn n_clusters(&self) -> usize;

    /// Whether measurement outcomes influence anything this engine tracks.
    /// When false the driver does not draw outcome randomness at all.
    fn needs_outcomes(&self) -> bool;

    /// Measures `σ̃^x(θ)` at `site`. Returns the outcome when the engine resolves it.
    fn apply_x(&mut self, site: usize, theta: PhaseValue, u: f64) -> Result<Option<Outcome>, RbcError>;

    /// Measures `σ^z_i σ^z_j`. Returns the outcome when the engine resolves it.
    fn apply_zz(&mut self, i: usize, j: usize, u: f64) -> Result<Option<Outcome>, RbcError>;

    fn partition(&mut self) -> Partition;
}

/// Tensor product of rotated Bell clusters with Born-exact measurement updates.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterState {
    site_label: Vec<u32>,
    site_bit: Vec<u8>,
    /// index of each site inside its cluster's member list
    site_pos: Vec<u32>,
    clusters: Vec<Option<ClusterRecord>>,
    free: Vec<u32>,
    n_clusters: usize,
}

impl ClusterState {
    /// Product state `⊗_i (|0> + e^{i φ_i}|1>)`: one singleton cluster per site.
    pub fn init_product(n_sites: usize, phases: &[PhaseValue]) -> Result<Self, RbcError> {
        if phases.len() != n_sites {
            return Err(RbcError::LengthMismatch { expected: n_sites, got: phases.len() });
        }
        Ok(ClusterState {
            site_label: (0..n_sites as u32).collect(),
            site_bit: vec![0; n_sites],
            site_pos: vec![0; n_sites],
            clusters: phases
                .iter()
                .enumerate()
                .map(|(i, &phase)| Some(ClusterRecord { phase, members: vec![i as u32] }))
                .collect(),
            free: Vec::new(),
            n_clusters: n_sites,
        })
    }

    /// Builds an arbitrary RBC product state from reference bits and `(members, phase)` clusters.
    /// Every site must appear in exactly one cluster.
    pub fn from_clusters(site_bits: &[u8], clusters: &[(Vec<usize>, PhaseValue)]) -> Result<Self, RbcError> {
        let n = site_bits.len();
        let mut site_label = vec![u32::MAX; n];
        let mut site_pos = vec![0u32; n];
        let mut records = Vec::with_capacity(clusters.len());
        for (label, (members, phase)) in clusters.iter().enumerate() {
            if members.is_empty() {
                return Err(RbcError::InvalidLayout(format!("cluster {label} is empty")));
            }
            for (pos, &site) in members.iter().enumerate() {
                if site >= n {
                    return Err(RbcError::SiteOutOfRange { site, n_sites: n });
                }
                if site_label[site] != u32::MAX {
                    return Err(RbcError::InvalidLayout(format!("site {site} in two clusters")));
                }
                site_label[site] = label as u32;
                site_pos[site] = pos as u32;
            }
            records.push(Some(ClusterRecord {
                phase: *phase,
                members: members.iter().map(|&s| s as u32).collect(),
            }));
        }
        if let Some(site) = site_label.iter().position(|&l| l == u32::MAX) {
            return Err(RbcError::InvalidLayout(format!("site {site} not in any cluster")));
        }
        if site_bits.iter().any(|&b| b > 1) {
            return Err(RbcError::InvalidLayout("bits must be 0 or 1".into()));
        }
        Ok(ClusterState {
            site_label,
            site_bit: site_bits.to_vec(),
            site_pos,
            n_clusters: records.len(),
            clusters: records,
            free: Vec::new(),
        })
    }

    pub fn n_sites(&self) -> usize {
        self.site_label.len()
    }

    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    pub fn site_label(&self, site: usize) -> u32 {
        self.site_label[site]
    }

    pub fn site_bit(&self, site: usize) -> u8 {
        self.site_bit[site]
    }

    pub fn site_labels(&self) -> &[u32] {
        &self.site_label
    }

    pub fn site_bits(&self) -> &[u8] {
        &self.site_bit
    }

    pub fn cluster(&self, id: u32) -> Option<&ClusterRecord> {
        self.clusters.get(id as usize).and_then(Option::as_ref)
    }

    /// Live clusters as `(id, record)`, in id order.
    pub fn clusters(&self) -> impl Iterator<Item = (u32, &ClusterRecord)> {
        self.clusters
            .iter()
            .enumerate()
            .filter_map(|(id, c)| c.as_ref().map(|c| (id as u32, c)))
    }

    /// The cluster containing `site`.
    pub fn cluster_of(&self, site: usize) -> &ClusterRecord {
        self.clusters[self.site_label[site] as usize]
            .as_ref()
            .expect("site label points at a live cluster")
    }

    fn check_site(&self, site: usize) -> Result<(), RbcError> {
        if site >= self.n_sites() {
            return Err(RbcError::SiteOutOfRange { site, n_sites: self.n_sites() });
        }
        Ok(())
    }

    /// Born probabilities `(Pr(+1), Pr(-1))` for measuring `σ̃^x(θ)` at `site`.
    pub fn outcome_distribution_x(&self, site: usize, theta: PhaseValue) -> Result<(f64, f64), RbcError> {
        self.check_site(site)?;
        let rec = self.cluster_of(site);
        if rec.size() >= 2 {
            return Ok((0.5, 0.5));
        }
        // singleton |0> + e^{iφ'}|1>: Pr(+1) = cos²((φ' - θ)/2)
        let phi = if self.site_bit[site] == 0 { rec.phase } else { -rec.phase };
        let cos = phase_cos(phi - theta);
        Ok(((1.0 + cos) / 2.0, (1.0 - cos) / 2.0))
    }

    /// Projective measurement of `σ̃^x(θ)` at `site`.
    ///
    /// The site is detached into a fresh singleton `|0> ± e^{iθ}|1>`; the rest
    /// of its cluster picks up the phase `∓θ` (sign set by the site's bit) plus
    /// `π` for `λ = -1`.
    pub fn measure_x(&mut self, site: usize, theta: PhaseValue, source: OutcomeSource) -> Result<Outcome, RbcError> {
        let outcome = source.resolve(self.outcome_distribution_x(site, theta)?)?;
        let kick = outcome.lambda.phase_kick();
        let label = self.site_label[site];
        let bit = self.site_bit[site];
        let rec = self.clusters[label as usize].as_mut().expect("live cluster");
        if rec.members.len() == 1 {
            rec.phase = theta + kick;
            self.site_bit[site] = 0;
            return Ok(outcome);
        }
        let signed = if bit == 0 { theta } else { -theta };
        rec.phase = rec.phase - signed + kick;
        let pos = self.site_pos[site] as usize;
        rec.members.swap_remove(pos);
        if let Some(&moved) = rec.members.get(pos) {
            self.site_pos[moved as usize] = pos as u32;
        }
        let fresh = self.alloc(ClusterRecord { phase: theta + kick, members: vec![site as u32] });
        self.site_label[site] = fresh;
        self.site_pos[site] = 0;
        self.site_bit[site] = 0;
        Ok(outcome)
    }

    /// Born probabilities `(Pr(+1), Pr(-1))` for measuring `σ^z_i σ^z_j`.
    pub fn outcome_distribution_zz(&self, i: usize, j: usize) -> Result<(f64, f64), RbcError> {
        self.check_site(i)?;
        self.check_site(j)?;
        if i == j {
            return Err(RbcError::SameSite(i));
        }
        if self.site_label[i] != self.site_label[j] {
            return Ok((0.5, 0.5));
        }
        if self.site_bit[i] == self.site_bit[j] {
            Ok((1.0, 0.0))
        } else {
            Ok((0.0, 1.0))
        }
    }

    /// Projective measurement of `σ^z_i σ^z_j`. Distinct clusters merge; the
    /// smaller one is relabeled (and bit-flipped when the outcome disagrees with
    /// the reference bits).
    pub fn measure_zz(&mut self, i: usize, j: usize, source: OutcomeSource) -> Result<Outcome, RbcError> {
        let outcome = source.resolve(self.outcome_distribution_zz(i, j)?)?;
        let (li, lj) = (self.site_label[i], self.site_label[j]);
        if li == lj {
            return Ok(outcome);
        }
        let matches = outcome.lambda == Lambda::from_parity(self.site_bit[i] ^ self.site_bit[j]);
        let size_i = self.clusters[li as usize].as_ref().expect("live").size();
        let size_j = self.clusters[lj as usize].as_ref().expect("live").size();
        // |b_I b_J> + e^{i(p_i+p_j)}|..> on a match, else |b_I b̄_J> + e^{i(p_i-p_j)}|..>;
        // flipping I instead of J conjugates the relative phase, so the
        // mismatch phase is always p_survivor - p_absorbed.
        let (keep, gone) = if size_i >= size_j { (li, lj) } else { (lj, li) };
        let absorbed = self.clusters[gone as usize].take().expect("live");
        self.free.push(gone);
        self.n_clusters -= 1;
        let survivor = self.clusters[keep as usize].as_mut().expect("live");
        survivor.phase = if matches {
            survivor.phase + absorbed.phase
        } else {
            survivor.phase - absorbed.phase
        };
        let base = survivor.members.len();
        for (k, &site) in absorbed.members.iter().enumerate() {
            let s = site as usize;
            self.site_label[s] = keep;
            self.site_pos[s] = (base + k) as u32;
            if !matches {
                self.site_bit[s] ^= 1;
            }
        }
        survivor.members.extend_from_slice(&absorbed.members);
        Ok(outcome)
    }

    /// Phase `φ` such that the cluster is Clifford-equivalent to `|0> + e^{iφ}|1>`.
    pub fn canonical_phase(&self, cluster_id: u32) -> Result<PhaseValue, RbcError> {
        self.cluster(cluster_id)
            .map(ClusterRecord::phase)
            .ok_or(RbcError::UnknownCluster(cluster_id))
    }

    pub fn cluster_census(&self) -> ClusterCensus {
        ClusterCensus::from_sizes(self.clusters().map(|(_, c)| c.size()))
    }

    /// For each cluster touching `region`, the number of its members inside it.
    pub fn region_intersections(&self, region: &[usize]) -> Result<BTreeMap<u32, usize>, RbcError> {
        let mut out = BTreeMap::new();
        for &site in region {
            self.check_site(site)?;
            *out.entry(self.site_label[site]).or_insert(0) += 1;
        }
        Ok(out)
    }

    pub fn partition(&self) -> Partition {
        Partition::from_labels(&self.site_label, |label, _| {
            self.clusters[label as usize].as_ref().expect("live").phase
        })
    }

    /// Checks label, member-set and position bookkeeping. Intended for tests.
    pub fn check_invariants(&self) -> Result<(), String> {
        let n = self.n_sites();
        let mut seen = vec![false; n];
        let mut live = 0;
        let mut total = 0;
        for (id, rec) in self.clusters() {
            live += 1;
            total += rec.size();
            if rec.members.is_empty() {
                return Err(format!("cluster {id} is empty"));
            }
            for (pos, &site) in rec.members.iter().enumerate() {
                let s = site as usize;
                if s >= n || seen[s] {
                    return Err(format!("site {s} duplicated or out of range"));
                }
                seen[s] = true;
                if self.site_label[s] != id {
                    return Err(format!("site {s} labeled {} but member of {id}", self.site_label[s]));
                }
                if self.site_pos[s] as usize != pos {
                    return Err(format!("site {s} position out of sync"));
                }
            }
        }
        if live != self.n_clusters {
            return Err(format!("cluster count {} != live {live}", self.n_clusters));
        }
        if total != n {
            return Err(format!("sizes sum to {total}, expected {n}"));
        }
        if self.site_bit.iter().any(|&b| b > 1) {
            return Err("non-binary bit".into());
        }
        Ok(())
    }

    /// Stable JSON-serializable view for golden tests and debugging.
    pub fn dump(&self) -> StateDump {
        StateDump {
            n_sites: self.n_sites(),
            site_label: self.site_label.clone(),
            site_bit: self.site_bit.clone(),
            clusters: self
                .clusters()
                .map(|(id, c)| ClusterDump { id, phase: c.phase, size: c.size(), members: c.members.clone() })
                .collect(),
        }
    }

    fn alloc(&mut self, rec: ClusterRecord) -> u32 {
        self.n_clusters += 1;
        match self.free.pop() {
            Some(id) => {
                self.clusters[id as usize] = Some(rec);
                id
            }
            None => {
                self.clusters.push(Some(rec));
                (self.clusters.len() - 1) as u32
            }
        }
    }
}

impl ClusterEngine for ClusterState {
    fn n_sites(&self) -> usize {
        ClusterState::n_sites(self)
    }

    fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    fn needs_outcomes(&self) -> bool {
        true
    }

    fn apply_x(&mut self, site: usize, theta: PhaseValue, u: f64) -> Result<Option<Outcome>, RbcError> {
        self.measure_x(site, theta, OutcomeSource::Uniform(u)).map(Some)
    }

    fn apply_zz(&mut self, i: usize, j: usize, u: f64) -> Result<Option<Outcome>, RbcError> {
        self.measure_zz(i, j, OutcomeSource::Uniform(u)).map(Some)
    }

    fn partition(&mut self) -> Partition {
        ClusterState::partition(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDump {
    pub n_sites: usize,
    pub site_label: Vec<u32>,
    pub site_bit: Vec<u8>,
    pub clusters: Vec<ClusterDump>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterDump {
    pub id: u32,
    pub phase: PhaseValue,
    pub size: usize,
    pub members: Vec<u32>,
}

/// `cos φ`, exact for multiples of π/4.
fn phase_cos(phi: PhaseValue) -> f64 {
    use std::f64::consts::FRAC_1_SQRT_2 as R;
    match phi {
        PhaseValue::Exact(k) => [1.0, R, 0.0, -R, -1.0, -R, 0.0, R][k as usize],
        PhaseValue::Real(x) => x.cos(),
    }
}

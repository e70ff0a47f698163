//! Dense state-vector reference for up to twelve qubits.
//!
//! Basis index bit `i` is qubit `i`. [`coupled_run`] drives the cluster engine
//! and a [`DenseState`] through the same circuit, forcing identical outcomes,
//! and compares probabilities, overlaps and every observable along the way.

use ndarray::Array2;
use ndarray_linalg::{EigValsh, UPLO};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{AngleScheme, Circuit, CircuitError, CircuitParams, Event, TrajectoryRng};
use crate::observables::{
    entanglement_entropy, full_magic, mutual_magic, participation_entropy, participation_entropy_region,
    shannon_mutual_information, MagicMeasure, Region,
};
use crate::phase::PhaseValue;
use crate::rbc::{ClusterState, Lambda, Outcome, OutcomeSource, RbcError, MIN_OUTCOME_PROB};

pub const MAX_QUBITS: usize = 12;
pub const PROB_TOL: f64 = 1e-12;
pub const OBS_TOL: f64 = 1e-9;
pub const FIDELITY_TOL: f64 = 1e-10;
const EIG_CUTOFF: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("{0} qubits exceeds the dense limit of {MAX_QUBITS}")]
    TooManyQubits(usize),
    #[error("site {site} out of range for {n} qubits")]
    SiteOutOfRange { site: usize, n: usize },
    #[error("zz measurement needs two distinct sites, got {0} twice")]
    SameSite(usize),
    #[error("outcome {lambda} has probability {probability:e}")]
    ImpossibleOutcome { lambda: Lambda, probability: f64 },
    #[error(transparent)]
    Rbc(#[from] RbcError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

/// A measurement the oracle can apply.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DenseObservable {
    /// `cos θ X + sin θ Y`
    X { site: usize, theta: f64 },
    Zz { i: usize, j: usize },
}

impl From<Event> for DenseObservable {
    fn from(e: Event) -> Self {
        match e {
            Event::Zz { i, j } => DenseObservable::Zz { i, j },
            Event::X { site, theta } => DenseObservable::X { site, theta: theta.radians() },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseState {
    n: usize,
    amps: Vec<Complex64>,
}

impl DenseState {
    pub fn new(n: usize, amps: Vec<Complex64>) -> Result<Self, OracleError> {
        if n > MAX_QUBITS {
            return Err(OracleError::TooManyQubits(n));
        }
        assert_eq!(amps.len(), 1 << n, "amplitude vector length");
        Ok(DenseState { n, amps })
    }

    /// `⊗_i (|0> + e^{iφ_i}|1>)/√2`
    pub fn product(phases: &[PhaseValue]) -> Result<Self, OracleError> {
        let n = phases.len();
        if n > MAX_QUBITS {
            return Err(OracleError::TooManyQubits(n));
        }
        let mut amps = vec![Complex64::new(1.0, 0.0)];
        for (q, ph) in phases.iter().enumerate() {
            let e = Complex64::from_polar(1.0, ph.radians());
            let mut next = vec![Complex64::new(0.0, 0.0); amps.len() * 2];
            for (idx, &a) in amps.iter().enumerate() {
                next[idx] = a * std::f64::consts::FRAC_1_SQRT_2;
                next[idx | (1 << q)] = a * e * std::f64::consts::FRAC_1_SQRT_2;
            }
            amps = next;
        }
        Ok(DenseState { n, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `|<self|other>|`
    pub fn fidelity(&self, other: &DenseState) -> f64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum::<Complex64>().norm()
    }

    fn check_site(&self, site: usize) -> Result<(), OracleError> {
        if site >= self.n {
            Err(OracleError::SiteOutOfRange { site, n: self.n })
        } else {
            Ok(())
        }
    }

    /// `P_λ |ψ>` without renormalization.
    fn project(&self, obs: DenseObservable, lambda: Lambda) -> Result<Vec<Complex64>, OracleError> {
        let s = f64::from(lambda.sign());
        match obs {
            DenseObservable::X { site, theta } => {
                self.check_site(site)?;
                let bit = 1 << site;
                let e = Complex64::from_polar(1.0, theta);
                let mut out = self.amps.clone();
                for idx in 0..self.amps.len() {
                    if idx & bit == 0 {
                        let (a0, a1) = (self.amps[idx], self.amps[idx | bit]);
                        out[idx] = (a0 + s * e.conj() * a1) * 0.5;
                        out[idx | bit] = (a1 + s * e * a0) * 0.5;
                    }
                }
                Ok(out)
            }
            DenseObservable::Zz { i, j } => {
                self.check_site(i)?;
                self.check_site(j)?;
                if i == j {
                    return Err(OracleError::SameSite(i));
                }
                let keep = u8::from(lambda == Lambda::Minus);
                Ok(self
                    .amps
                    .iter()
                    .enumerate()
                    .map(|(idx, &a)| {
                        let parity = (((idx >> i) ^ (idx >> j)) & 1) as u8;
                        if parity == keep {
                            a
                        } else {
                            Complex64::new(0.0, 0.0)
                        }
                    })
                    .collect())
            }
        }
    }

    /// Born probabilities `(Pr(+1), Pr(-1))`.
    pub fn distribution(&self, obs: DenseObservable) -> Result<(f64, f64), OracleError> {
        let plus: f64 = self.project(obs, Lambda::Plus)?.iter().map(|a| a.norm_sqr()).sum();
        let minus: f64 = self.project(obs, Lambda::Minus)?.iter().map(|a| a.norm_sqr()).sum();
        Ok((plus / (plus + minus), minus / (plus + minus)))
    }

    /// Projects onto the realized outcome and renormalizes.
    pub fn measure(&mut self, obs: DenseObservable, source: OutcomeSource) -> Result<Outcome, OracleError> {
        let dist = self.distribution(obs)?;
        let outcome = source.resolve(dist).map_err(|e| match e {
            RbcError::ImpossibleOutcome { lambda, probability } => OracleError::ImpossibleOutcome { lambda, probability },
            other => other.into(),
        })?;
        let mut v = self.project(obs, outcome.lambda)?;
        let norm = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm * norm < MIN_OUTCOME_PROB {
            return Err(OracleError::ImpossibleOutcome { lambda: outcome.lambda, probability: norm * norm });
        }
        v.iter_mut().for_each(|a| *a /= norm);
        self.amps = v;
        Ok(outcome)
    }

    /// `ψ` reshaped so rows index the bits of `sites` and columns the rest.
    fn reshape(&self, sites: &[usize]) -> Array2<Complex64> {
        let rest: Vec<usize> = (0..self.n).filter(|q| !sites.contains(q)).collect();
        // gather tables for the low and high halves of the basis index
        let half = self.n / 2;
        let gather = |bits: std::ops::Range<usize>| -> Vec<(usize, usize)> {
            (0..1usize << bits.len())
                .map(|x| {
                    let idx = x << bits.start;
                    let r = sites.iter().enumerate().fold(0, |acc, (k, &q)| acc | (((idx >> q) & 1) << k));
                    let c = rest.iter().enumerate().fold(0, |acc, (k, &q)| acc | (((idx >> q) & 1) << k));
                    (r, c)
                })
                .collect()
        };
        let lo = gather(0..half);
        let hi = gather(half..self.n);
        let mut m = Array2::zeros((1 << sites.len(), 1 << rest.len()));
        for (idx, &a) in self.amps.iter().enumerate() {
            let (r0, c0) = lo[idx & ((1 << half) - 1)];
            let (r1, c1) = hi[idx >> half];
            m[(r0 | r1, c0 | c1)] = a;
        }
        m
    }

    /// Eigenvalues of the reduced density matrix on `sites` (via the smaller Gram matrix).
    pub fn reduced_spectrum(&self, sites: &[usize]) -> Vec<f64> {
        let m = self.reshape(sites);
        let adj = m.t().mapv(|z| z.conj());
        let gram = if m.nrows() <= m.ncols() { m.dot(&adj) } else { adj.dot(&m) };
        gram.eigvalsh(UPLO::Lower).map(|ev| ev.to_vec()).unwrap_or_else(|_| vec![f64::NAN])
    }

    /// Von Neumann entropy of `ρ_region` in bits.
    pub fn entanglement_entropy(&self, region: &Region) -> f64 {
        entropy_bits(&self.reduced_spectrum(&region.sites()))
    }

    /// Shannon entropy (bits) of computational-basis weights on `region`, or on all qubits.
    pub fn participation(&self, region: Option<&Region>) -> f64 {
        let sites: Vec<usize> = match region {
            Some(r) => r.sites(),
            None => (0..self.n).collect(),
        };
        let mut marginal = vec![0.0; 1 << sites.len()];
        for (idx, a) in self.amps.iter().enumerate() {
            let r = sites.iter().enumerate().fold(0, |acc, (k, &q)| acc | (((idx >> q) & 1) << k));
            marginal[r] += a.norm_sqr();
        }
        entropy_bits(&marginal)
    }

    /// Stabilizer Rényi-2 entropy `-log2(Σ_P <P>⁴ / 2^n)`. For each `X`-pattern
    /// `a`, the expectations of all `X^a Z^z` are one Walsh-Hadamard transform
    /// of `conj(ψ_{c⊕a}) ψ_c`, so the cost is `n·4^n`.
    pub fn sre2(&self) -> f64 {
        let dim = self.amps.len();
        let mut buf = vec![Complex64::new(0.0, 0.0); dim];
        let mut total = 0.0;
        for a in 0..dim {
            for (c, slot) in buf.iter_mut().enumerate() {
                *slot = self.amps[c ^ a].conj() * self.amps[c];
            }
            walsh_hadamard(&mut buf);
            total += buf.iter().map(|v| v.norm_sqr().powi(2)).sum::<f64>();
        }
        -(total / dim as f64).log2()
    }

    /// Splits the qubits into tensor factors: connected components of the
    /// pairwise mutual-information graph, each confirmed pure.
    pub fn tensor_factors(&self) -> Option<Vec<Vec<usize>>> {
        let n = self.n;
        let single: Vec<f64> = (0..n).map(|q| entropy_bits(&self.reduced_spectrum(&[q]))).collect();
        let mut parent: Vec<usize> = (0..n).collect();
        fn root(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                x = p[x];
            }
            x
        }
        for i in 0..n {
            for j in i + 1..n {
                let mi = single[i] + single[j] - entropy_bits(&self.reduced_spectrum(&[i, j]));
                if mi > 1e-8 {
                    let (ri, rj) = (root(&mut parent, i), root(&mut parent, j));
                    parent[ri] = rj;
                }
            }
        }
        let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for q in 0..n {
            let r = root(&mut parent, q);
            groups.entry(r).or_default().push(q);
        }
        let factors: Vec<Vec<usize>> = groups.into_values().collect();
        let pure = factors.iter().all(|f| f.len() == n || entropy_bits(&self.reduced_spectrum(f)) < 1e-8);
        pure.then_some(factors)
    }

    /// State of the tensor factor `sites`, assuming it is one.
    pub fn factor_state(&self, sites: &[usize]) -> DenseState {
        let m = self.reshape(sites);
        let weight = |c: usize| m.column(c).iter().map(|a| a.norm_sqr()).sum::<f64>();
        let col = (0..m.ncols()).max_by(|&a, &b| weight(a).total_cmp(&weight(b))).unwrap_or(0);
        let v = m.column(col);
        let norm = weight(col).sqrt();
        DenseState { n: sites.len(), amps: v.iter().map(|a| a / norm).collect() }
    }
}

fn entropy_bits(weights: &[f64]) -> f64 {
    weights.iter().filter(|&&w| w > EIG_CUTOFF).map(|&w| -w * w.log2()).sum()
}

fn walsh_hadamard(v: &mut [Complex64]) {
    let mut h = 1;
    while h < v.len() {
        for block in v.chunks_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                let (a, b) = (*x, *y);
                *x = a + b;
                *y = a - b;
            }
        }
        h *= 2;
    }
}

/// Dense wavefunction of a cluster state: `⊗_n (|b>+e^{ip_n}|b̄>)/√2`.
pub fn dense_from_clusters(state: &ClusterState) -> Result<DenseState, OracleError> {
    let n = state.n_sites();
    if n > MAX_QUBITS {
        return Err(OracleError::TooManyQubits(n));
    }
    let mut base = 0usize;
    for q in 0..n {
        base |= usize::from(state.site_bit(q)) << q;
    }
    let clusters: Vec<(usize, Complex64)> = state
        .clusters()
        .map(|(_, c)| {
            let mask = c.members().iter().fold(0usize, |m, &q| m | (1 << q));
            (mask, Complex64::from_polar(1.0, c.phase().radians()))
        })
        .collect();
    let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
    let scale = 0.5f64.powf(clusters.len() as f64 / 2.0);
    for choice in 0usize..(1 << clusters.len()) {
        let mut idx = base;
        let mut amp = Complex64::new(scale, 0.0);
        for (k, &(mask, e)) in clusters.iter().enumerate() {
            if choice >> k & 1 == 1 {
                idx ^= mask;
                amp *= e;
            }
        }
        amps[idx] = amp;
    }
    DenseState::new(n, amps)
}

/// Applies one measurement to the dense state.
pub fn dense_measure(dense: &mut DenseState, obs: DenseObservable, source: OutcomeSource) -> Result<Outcome, OracleError> {
    dense.measure(obs, source)
}

pub fn dense_entanglement_entropy(dense: &DenseState, region: &Region) -> f64 {
    dense.entanglement_entropy(region)
}

pub fn dense_participation(dense: &DenseState, region: Option<&Region>) -> f64 {
    dense.participation(region)
}

pub fn dense_sre2(dense: &DenseState) -> f64 {
    dense.sre2()
}

/// Mutual SRE-2 across `region` evaluated on the dense state: total SRE-2
/// minus the SRE-2 of every pure tensor factor inside `region` or inside its
/// complement (factors straddling the cut carry no subsystem magic).
pub fn dense_mutual_sre2(factors: &[(Vec<usize>, f64)], total: f64, region: &Region) -> f64 {
    let inside: f64 = factors
        .iter()
        .filter(|(f, _)| f.iter().all(|&q| region.contains(q)) || f.iter().all(|&q| !region.contains(q)))
        .map(|(_, m)| m)
        .sum();
    total - inside
}

/// Pairs each tensor factor with its own SRE-2.
pub fn dense_factor_sre2(dense: &DenseState, factors: &[Vec<usize>]) -> Vec<(Vec<usize>, f64)> {
    factors.iter().map(|f| (f.clone(), dense.factor_state(f).sre2())).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub step: usize,
    pub event: Event,
    pub p_plus_cluster: f64,
    pub p_plus_dense: f64,
    pub lambda: Lambda,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableRow {
    pub step: usize,
    pub name: String,
    pub cluster: f64,
    pub dense: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mismatch {
    pub step: usize,
    pub check: String,
    pub cluster: f64,
    pub dense: f64,
}

/// Outcome of one lockstep run of the cluster engine against the dense oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub params: CircuitParams,
    pub seed: u64,
    pub n_steps: usize,
    pub events: Vec<EventRecord>,
    pub observables: Vec<ObservableRow>,
    pub mismatches: Vec<Mismatch>,
    pub max_probability_error: f64,
    pub max_observable_error: f64,
    pub min_fidelity: f64,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

struct Checker {
    step: usize,
    rows: Vec<ObservableRow>,
    mismatches: Vec<Mismatch>,
    max_err: f64,
}

impl Checker {
    fn eq(&mut self, name: impl Into<String>, cluster: f64, dense: f64) {
        let name = name.into();
        let err = (cluster - dense).abs();
        self.max_err = self.max_err.max(err);
        if err > OBS_TOL || !err.is_finite() {
            self.mismatches.push(Mismatch { step: self.step, check: name.clone(), cluster, dense });
        }
        self.rows.push(ObservableRow { step: self.step, name, cluster, dense });
    }

    fn le(&mut self, name: impl Into<String>, lhs: f64, rhs: f64) {
        if lhs > rhs + OBS_TOL {
            self.mismatches.push(Mismatch { step: self.step, check: name.into(), cluster: lhs, dense: rhs });
        }
    }
}

/// Regions checked after every step: every contiguous interval of site
/// indices other than the empty and full ones.
fn contiguous_cuts(n: usize) -> Vec<(String, Region)> {
    let mut cuts = Vec::new();
    for a in 0..n {
        for b in a + 1..=n {
            if b - a < n {
                cuts.push((format!("[{a},{b})"), Region::interval(n, a, b - a)));
            }
        }
    }
    cuts
}

/// Runs the cluster engine and the dense oracle in lockstep for `n_steps`.
///
/// Per event the two Born distributions are compared; one outcome is drawn
/// from the dense distribution and forced into both. Per step the overlap,
/// entanglement and participation on all contiguous cuts, Shannon mutual
/// information, and mutual SRE-2 are compared; full SRE-2 is compared every
/// step up to eight qubits and at the last step beyond. Under random angles the
/// mutual nullity is also compared with the dense entanglement whenever every
/// cluster phase is non-stabilizer.
pub fn coupled_run(params: &CircuitParams, seed: u64, n_steps: usize) -> Result<ValidationReport, OracleError> {
    let circuit = Circuit::new(params.clone())?;
    let n = params.lattice.n_sites();
    if n > MAX_QUBITS {
        return Err(OracleError::TooManyQubits(n));
    }
    let mut rng = TrajectoryRng::from_seed(seed);
    let phases = circuit.initial_phases(&mut rng);
    let mask = circuit.dilute_mask(&mut rng);
    let mut state = ClusterState::init_product(n, &phases)?;
    let mut dense = DenseState::product(&phases)?;
    let cuts = contiguous_cuts(n);
    let mut events = Vec::new();
    let mut checker = Checker { step: 0, rows: Vec::new(), mismatches: Vec::new(), max_err: 0.0 };
    let mut max_prob_err = 0.0f64;
    let mut min_fid = 1.0f64;
    let mut plan = Vec::new();
    let random_angles = params.scheme == AngleScheme::RandomUniform;

    for step in 0..=n_steps {
        checker.step = step;
        if step > 0 {
            circuit.plan_step(&mut rng, mask.as_deref(), &mut plan);
            for &event in &plan {
                let obs = DenseObservable::from(event);
                let d = dense.distribution(obs)?;
                let c = match event {
                    Event::Zz { i, j } => state.outcome_distribution_zz(i, j)?,
                    Event::X { site, theta } => state.outcome_distribution_x(site, theta)?,
                };
                let err = (c.0 - d.0).abs().max((c.1 - d.1).abs());
                max_prob_err = max_prob_err.max(err);
                if err > PROB_TOL {
                    checker.mismatches.push(Mismatch { step, check: format!("born {event:?}"), cluster: c.0, dense: d.0 });
                }
                let u: f64 = rng.outcomes.random();
                let lambda = OutcomeSource::Uniform(u).resolve(d)?.lambda;
                dense.measure(obs, OutcomeSource::Forced(lambda))?;
                match event {
                    Event::Zz { i, j } => state.measure_zz(i, j, OutcomeSource::Forced(lambda))?,
                    Event::X { site, theta } => state.measure_x(site, theta, OutcomeSource::Forced(lambda))?,
                };
                events.push(EventRecord { step, event, p_plus_cluster: c.0, p_plus_dense: d.0, lambda });
            }
        }
        if let Err(msg) = state.check_invariants() {
            checker.mismatches.push(Mismatch { step, check: format!("invariants: {msg}"), cluster: 0.0, dense: 0.0 });
        }
        checker.eq("norm", 1.0, dense.norm());
        let rebuilt = dense_from_clusters(&state)?;
        let fid = rebuilt.fidelity(&dense);
        min_fid = min_fid.min(fid);
        if fid < 1.0 - FIDELITY_TOL {
            checker.mismatches.push(Mismatch { step, check: "fidelity".into(), cluster: fid, dense: 1.0 });
        }

        let part = state.partition();
        checker.eq("participation", participation_entropy(&part), dense.participation(None));
        let sre_every_step = n <= 8 || step == n_steps;
        let total_sre = sre_every_step.then(|| dense.sre2());
        if let Some(total) = total_sre {
            checker.eq("sre2", full_magic(&part, MagicMeasure::StabilizerRenyi2).expect("sre2 is total"), total);
        }
        let factors = dense.tensor_factors();
        if factors.is_none() {
            checker.mismatches.push(Mismatch { step, check: "tensor factorization".into(), cluster: 0.0, dense: 0.0 });
        }
        let factor_sre = match (total_sre, factors.as_ref()) {
            (Some(_), Some(f)) => Some(dense_factor_sre2(&dense, f)),
            _ => None,
        };
        let all_magic = part.phases().iter().all(|p| !p.is_stabilizer());
        for (name, region) in &cuts {
            let ent = dense.entanglement_entropy(region);
            let ent_c = entanglement_entropy(&part, region).expect("valid cut");
            checker.eq(format!("entanglement {name}"), ent_c, ent);
            checker.eq(
                format!("participation {name}"),
                participation_entropy_region(&part, region).expect("valid cut"),
                dense.participation(Some(region)),
            );
            checker.eq(format!("shannon_mutual {name}"), shannon_mutual_information(&part, region).expect("valid cut"), ent);
            if let (Some(total), Some(f)) = (total_sre, factor_sre.as_ref()) {
                let m = mutual_magic(&part, region, MagicMeasure::StabilizerRenyi2).expect("sre2 is total");
                checker.eq(format!("mutual_sre2 {name}"), m, dense_mutual_sre2(f, total, region));
            }
            let nullity = mutual_magic(&part, region, MagicMeasure::Nullity).expect("nullity is total");
            checker.le(format!("mutual_nullity <= entanglement {name}"), nullity, ent);
            if random_angles && all_magic {
                checker.eq(format!("mutual_nullity {name}"), nullity, ent);
            }
        }
    }

    Ok(ValidationReport {
        params: params.clone(),
        seed,
        n_steps,
        events,
        observables: checker.rows,
        mismatches: checker.mismatches,
        max_probability_error: max_prob_err,
        max_observable_error: checker.max_err,
        min_fidelity: min_fid,
    })
}

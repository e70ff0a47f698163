//! The measurement protocol and single-trajectory execution.
//!
//! One time step is a row of `σ^z σ^z` measurements (each edge with
//! probability `1 - p`) followed by a row of `σ̃^x(θ)` measurements (each site
//! with probability `p`), applied in canonical lattice order.
//!
//! Each trajectory draws from three independent streams derived from its seed:
//! `events` (which edges and sites are measured), `angles` (θ draws and initial
//! phases) and `outcomes` (Born sampling). Cluster structure therefore depends
//! only on `(lattice, p, seed)`, never on the angle scheme or the engine.

use std::f64::consts::TAU;

use rand::distr::{Bernoulli, Distribution};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::ensemble::derive_seed;
use crate::lattice::{build_lattice, Lattice, LatticeError, LatticeSpec};
use crate::observables::{
    full_magic, nested_span_profile, cluster_magic, shannon_mutual_information, topological_magic, MagicMeasure,
    ObservableError, ObservableId, Region,
};
use crate::phase::PhaseValue;
use crate::rbc::{ClusterEngine, ClusterState, Outcome, ParityState, Partition, RbcError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CircuitError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Rbc(#[from] RbcError),
    #[error(transparent)]
    Observable(#[from] ObservableError),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("parity mode requires the fixed pi/4 scheme with pi/4 initial phases")]
    ParityScheme,
}

/// How the angle of each `σ̃^x` measurement is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AngleScheme {
    Fixed { theta: PhaseValue },
    /// `θ` with probability `q`, otherwise the Clifford angle 0. With
    /// `per_site`, each site is marked non-Clifford once per trajectory
    /// instead of drawing per measurement.
    Dilute { theta: PhaseValue, q: f64, #[serde(default)] per_site: bool },
    /// `θ` uniform in `[0, 2π)` for every measurement.
    RandomUniform,
}

impl AngleScheme {
    pub fn fixed_pi_4() -> Self {
        AngleScheme::Fixed { theta: PhaseValue::PI_4 }
    }

    /// `Dilute(π/4, q = 2/N)`: on average two non-Clifford measurements per step at `p = 1`.
    pub fn dilute_preset(lattice: &LatticeSpec) -> Self {
        AngleScheme::Dilute { theta: PhaseValue::PI_4, q: 2.0 / lattice.n_sites() as f64, per_site: false }
    }

    /// Whether every angle this scheme produces is a multiple of π/4.
    pub fn is_exact(&self) -> bool {
        match self {
            AngleScheme::Fixed { theta } | AngleScheme::Dilute { theta, .. } => theta.is_exact(),
            AngleScheme::RandomUniform => false,
        }
    }

    /// Default initial phases: `|+_θ>` for a fixed angle, `|+>` otherwise.
    pub fn default_initial(&self) -> InitialPhases {
        match self {
            AngleScheme::Fixed { theta } => InitialPhases::Uniform { phase: *theta },
            _ => InitialPhases::Uniform { phase: PhaseValue::ZERO },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialPhases {
    Uniform { phase: PhaseValue },
    /// Each site uniform in `[0, 2π)`, drawn from the angle stream.
    Random,
    PerSite { phases: Vec<PhaseValue> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EngineMode {
    #[default]
    Full,
    Parity,
}

/// When an observable is evaluated; `t = 0` is the initial state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Times {
    Final,
    Every(usize),
    /// About this many log-spaced times in `[1, t_max]`.
    Log(usize),
    At(Vec<usize>),
}

impl Times {
    pub fn resolve(&self, t_max: usize) -> Vec<usize> {
        let mut ts: Vec<usize> = match self {
            Times::Final => vec![t_max],
            Times::Every(k) => {
                let k = (*k).max(1);
                (0..=t_max).filter(|t| t % k == 0).collect()
            }
            Times::Log(n) => {
                if t_max == 0 {
                    vec![0]
                } else {
                    let n = (*n).max(2);
                    (0..n)
                        .map(|i| (t_max as f64).powf(i as f64 / (n - 1) as f64).round() as usize)
                        .collect()
                }
            }
            Times::At(v) => v.iter().copied().filter(|&t| t <= t_max).collect(),
        };
        ts.sort_unstable();
        ts.dedup();
        ts
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub id: ObservableId,
    pub times: Times,
}

impl ScheduleEntry {
    pub fn final_time(id: ObservableId) -> Self {
        ScheduleEntry { id, times: Times::Final }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitParams {
    pub lattice: LatticeSpec,
    /// probability of an `x` measurement per site; edges are measured with `1 - p`
    pub p: f64,
    pub scheme: AngleScheme,
    pub t_max: usize,
    pub initial: InitialPhases,
    pub measure: MagicMeasure,
    pub mode: EngineMode,
    pub schedule: Vec<ScheduleEntry>,
    /// Average final-time observables over `[t_max, t_max + L]`.
    #[serde(default)]
    pub window_average: bool,
    /// Keep the applied-event log in each trajectory record.
    #[serde(default)]
    pub log_events: bool,
}

impl CircuitParams {
    /// Defaults: `t_max` from the lattice, initial phases from the scheme,
    /// t-unit magic for exact schemes (nullity otherwise), full engine, magic
    /// density and half-cut mutual magic at the final time.
    pub fn new(lattice: LatticeSpec, p: f64, scheme: AngleScheme) -> Self {
        CircuitParams {
            lattice,
            p,
            t_max: lattice.default_t_max(),
            initial: scheme.default_initial(),
            measure: if scheme.is_exact() { MagicMeasure::TUnit } else { MagicMeasure::Nullity },
            scheme,
            mode: EngineMode::Full,
            schedule: vec![
                ScheduleEntry::final_time(ObservableId::MagicDensity),
                ScheduleEntry::final_time(ObservableId::MutualMagicHalf),
            ],
            window_average: false,
            log_events: false,
        }
    }

    pub fn with_mode(mut self, mode: EngineMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_t_max(mut self, t_max: usize) -> Self {
        self.t_max = t_max;
        self
    }

    pub fn with_schedule(mut self, schedule: Vec<ScheduleEntry>) -> Self {
        self.schedule = schedule;
        self
    }

    pub fn with_measure(mut self, measure: MagicMeasure) -> Self {
        self.measure = measure;
        self
    }

    pub fn with_initial(mut self, initial: InitialPhases) -> Self {
        self.initial = initial;
        self
    }

    pub fn validate(&self) -> Result<(), CircuitError> {
        self.lattice.validate()?;
        if !(0.0..=1.0).contains(&self.p) {
            return Err(CircuitError::InvalidParams(format!("p = {} outside [0, 1]", self.p)));
        }
        if let AngleScheme::Dilute { q, .. } = self.scheme {
            if !(0.0..=1.0).contains(&q) {
                return Err(CircuitError::InvalidParams(format!("q = {q} outside [0, 1]")));
            }
        }
        let exact_initial = match &self.initial {
            InitialPhases::Uniform { phase } => phase.is_exact(),
            InitialPhases::Random => false,
            InitialPhases::PerSite { phases } => {
                if phases.len() != self.lattice.n_sites() {
                    return Err(RbcError::LengthMismatch { expected: self.lattice.n_sites(), got: phases.len() }.into());
                }
                phases.iter().all(|p| p.is_exact())
            }
        };
        if self.measure == MagicMeasure::TUnit && !(self.scheme.is_exact() && exact_initial) {
            return Err(CircuitError::InvalidParams(
                "t_unit magic needs angles and initial phases that are multiples of pi/4".into(),
            ));
        }
        if self.mode == EngineMode::Parity {
            let fixed = self.scheme == AngleScheme::fixed_pi_4();
            let init = self.initial == InitialPhases::Uniform { phase: PhaseValue::PI_4 };
            if !(fixed && init) {
                return Err(CircuitError::ParityScheme);
            }
        }
        Ok(())
    }
}

/// A measurement placed in the circuit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    Zz { i: usize, j: usize },
    X { site: usize, theta: PhaseValue },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AppliedEvent {
    pub event: Event,
    /// `None` when the engine does not resolve outcomes (parity mode)
    pub outcome: Option<Outcome>,
}

/// The three per-trajectory random streams.
#[derive(Debug, Clone)]
pub struct TrajectoryRng {
    pub events: Xoshiro256PlusPlus,
    pub angles: Xoshiro256PlusPlus,
    pub outcomes: Xoshiro256PlusPlus,
}

impl TrajectoryRng {
    pub fn from_seed(seed: u64) -> Self {
        TrajectoryRng {
            events: Xoshiro256PlusPlus::seed_from_u64(derive_seed(seed, 0)),
            angles: Xoshiro256PlusPlus::seed_from_u64(derive_seed(seed, 1)),
            outcomes: Xoshiro256PlusPlus::seed_from_u64(derive_seed(seed, 2)),
        }
    }
}

/// Precomputed regions and nested-cut keys for the scheduled observables.
#[derive(Debug, Clone)]
pub struct Geometry {
    spec: LatticeSpec,
    /// `A_half = {key < half_level}`
    half_keys: Vec<u32>,
    half_level: usize,
    half_region: Region,
    /// profile cut `ℓ` is `{key < ℓ}` for `ℓ = 1..=profile_levels`
    profile_keys: Vec<u32>,
    profile_levels: usize,
    topo: (Region, Region, Region),
}

impl Geometry {
    /// 1D: half = first `L/2` sites, profile = intervals `[0, ℓ)` for `ℓ < L`,
    /// topo = quarter/half/quarter split. 2D: half = rows `y < L/2`, profile =
    /// `ℓ × ℓ` corner blocks for `ℓ <= L/2`, topo split along `x`.
    pub fn new(spec: LatticeSpec) -> Self {
        let n = spec.n_sites();
        let l = spec.l;
        let coords: Vec<(usize, usize)> = (0..n).map(|s| spec.coords(s)).collect();
        let (half_keys, profile_keys, profile_levels): (Vec<u32>, Vec<u32>, usize) = if spec.dimension == 1 {
            let k: Vec<u32> = (0..n as u32).collect();
            (k.clone(), k, l - 1)
        } else {
            (
                coords.iter().map(|&(_, y)| y as u32).collect(),
                coords.iter().map(|&(x, y)| x.max(y) as u32).collect(),
                (l / 2).max(1),
            )
        };
        let half_level = l / 2;
        let half_region = Region::from_mask(half_keys.iter().map(|&k| (k as usize) < half_level).collect());
        let (qa, qb) = (l / 4, l / 4 + l / 2);
        let strip = |lo: usize, hi: usize| Region::from_mask(coords.iter().map(|&(x, _)| x >= lo && x < hi).collect());
        let topo = (strip(0, qa), strip(qa, qb), strip(qb, l));
        Geometry { spec, half_keys, half_level, half_region, profile_keys, profile_levels, topo }
    }

    pub fn half_region(&self) -> &Region {
        &self.half_region
    }

    pub fn topo_regions(&self) -> (&Region, &Region, &Region) {
        (&self.topo.0, &self.topo.1, &self.topo.2)
    }

    /// Cut sizes of the profile observables: interval length (1D) or block side (2D).
    pub fn profile_levels(&self) -> usize {
        self.profile_levels
    }

    pub fn evaluate(&self, id: ObservableId, part: &Partition, measure: MagicMeasure) -> Result<Vec<f64>, CircuitError> {
        let t = measure.t_value();
        let n = self.spec.n_sites() as f64;
        let spanning = |keys: &[u32], levels: usize, weights: &[f64]| nested_span_profile(part, keys, levels, weights);
        Ok(match id {
            ObservableId::MagicDensity => vec![full_magic(part, measure)? / (t * n)],
            ObservableId::MutualMagicHalf => {
                let w = cluster_magic(part, measure)?;
                vec![spanning(&self.half_keys, self.half_level, &w)[self.half_level - 1] / t]
            }
            ObservableId::MutualMagicProfile => {
                let w = cluster_magic(part, measure)?;
                spanning(&self.profile_keys, self.profile_levels, &w).into_iter().map(|v| v / t).collect()
            }
            ObservableId::TopoMagic => {
                let (a, b, c) = self.topo_regions();
                vec![topological_magic(part, a, b, c, measure)? / t]
            }
            ObservableId::EntanglementHalf => {
                let w = vec![1.0; part.n_clusters()];
                vec![spanning(&self.half_keys, self.half_level, &w)[self.half_level - 1]]
            }
            ObservableId::EntanglementProfile => {
                let w = vec![1.0; part.n_clusters()];
                spanning(&self.profile_keys, self.profile_levels, &w)
            }
            ObservableId::Participation => vec![part.n_clusters() as f64],
            ObservableId::ShannonMutual => vec![shannon_mutual_information(part, &self.half_region)?],
        })
    }
}

/// A validated circuit ready to run trajectories.
#[derive(Debug, Clone)]
pub struct Circuit {
    params: CircuitParams,
    lattice: Lattice,
    geometry: Geometry,
    zz: Bernoulli,
    x: Bernoulli,
}

impl Circuit {
    pub fn new(params: CircuitParams) -> Result<Self, CircuitError> {
        params.validate()?;
        let lattice = build_lattice(params.lattice)?;
        let zz = Bernoulli::new(1.0 - params.p).map_err(|e| CircuitError::InvalidParams(e.to_string()))?;
        let x = Bernoulli::new(params.p).map_err(|e| CircuitError::InvalidParams(e.to_string()))?;
        let geometry = Geometry::new(params.lattice);
        Ok(Circuit { params, lattice, geometry, zz, x })
    }

    pub fn params(&self) -> &CircuitParams {
        &self.params
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn initial_phases(&self, rng: &mut TrajectoryRng) -> Vec<PhaseValue> {
        let n = self.lattice.n_sites();
        match &self.params.initial {
            InitialPhases::Uniform { phase } => vec![*phase; n],
            InitialPhases::Random => (0..n).map(|_| PhaseValue::real(rng.angles.random::<f64>() * TAU)).collect(),
            InitialPhases::PerSite { phases } => phases.clone(),
        }
    }

    /// Per-trajectory non-Clifford site mask for `Dilute { per_site: true }`.
    pub fn dilute_mask(&self, rng: &mut TrajectoryRng) -> Option<Vec<bool>> {
        match self.params.scheme {
            AngleScheme::Dilute { q, per_site: true, .. } => {
                let d = Bernoulli::new(q).expect("validated q");
                Some((0..self.lattice.n_sites()).map(|_| d.sample(&mut rng.angles)).collect())
            }
            _ => None,
        }
    }

    fn draw_angle(&self, site: usize, mask: Option<&[bool]>, rng: &mut Xoshiro256PlusPlus) -> PhaseValue {
        match self.params.scheme {
            AngleScheme::Fixed { theta } => theta,
            AngleScheme::Dilute { theta, q, .. } => {
                let hit = match mask {
                    Some(m) => m[site],
                    None => rng.random::<f64>() < q,
                };
                if hit {
                    theta
                } else {
                    PhaseValue::ZERO
                }
            }
            AngleScheme::RandomUniform => PhaseValue::real(rng.random::<f64>() * TAU),
        }
    }

    /// Draws which measurements happen in one step, without applying them.
    /// Order: edge inclusion, site inclusion (events stream), then angles.
    pub fn plan_step(&self, rng: &mut TrajectoryRng, mask: Option<&[bool]>, plan: &mut Vec<Event>) {
        plan.clear();
        for &(i, j) in &self.lattice.edges {
            if self.zz.sample(&mut rng.events) {
                plan.push(Event::Zz { i, j });
            }
        }
        let first_x = plan.len();
        for site in 0..self.lattice.n_sites() {
            if self.x.sample(&mut rng.events) {
                plan.push(Event::X { site, theta: PhaseValue::ZERO });
            }
        }
        for ev in &mut plan[first_x..] {
            if let Event::X { site, theta } = ev {
                *theta = self.draw_angle(*site, mask, &mut rng.angles);
            }
        }
    }

    /// Applies one time step to `engine`; pushes applied events to `log` when given.
    pub fn step<E: ClusterEngine + ?Sized>(
        &self,
        engine: &mut E,
        rng: &mut TrajectoryRng,
        mask: Option<&[bool]>,
        plan: &mut Vec<Event>,
        mut log: Option<&mut Vec<AppliedEvent>>,
    ) -> Result<(), CircuitError> {
        self.plan_step(rng, mask, plan);
        let draw = engine.needs_outcomes();
        for &event in plan.iter() {
            let u = if draw { rng.outcomes.random::<f64>() } else { 0.0 };
            let outcome = match event {
                Event::Zz { i, j } => engine.apply_zz(i, j, u)?,
                Event::X { site, theta } => engine.apply_x(site, theta, u)?,
            };
            if let Some(log) = log.as_deref_mut() {
                log.push(AppliedEvent { event, outcome });
            }
        }
        Ok(())
    }

    /// Runs one trajectory from `seed`.
    pub fn run_trajectory(&self, seed: u64) -> Result<TrajectoryRecord, CircuitError> {
        let mut rng = TrajectoryRng::from_seed(seed);
        let phases = self.initial_phases(&mut rng);
        match self.params.mode {
            EngineMode::Full => {
                let mut engine = ClusterState::init_product(phases.len(), &phases)?;
                self.run_with(&mut engine, &mut rng, seed)
            }
            EngineMode::Parity => {
                let mut engine = ParityState::new(phases.len());
                self.run_with(&mut engine, &mut rng, seed)
            }
        }
    }

    /// Runs the schedule on an already-initialized engine.
    pub fn run_with<E: ClusterEngine + ?Sized>(
        &self,
        engine: &mut E,
        rng: &mut TrajectoryRng,
        seed: u64,
    ) -> Result<TrajectoryRecord, CircuitError> {
        let p = &self.params;
        let mask = self.dilute_mask(rng);
        let window = if p.window_average { self.params.lattice.l } else { 0 };
        let horizon = p.t_max + window;
        let mut plan = Vec::new();
        let mut events: Option<Vec<Vec<AppliedEvent>>> = p.log_events.then(Vec::new);

        // (entry index, time) pairs in time order; final-time entries get the window
        let mut wanted: Vec<Vec<usize>> = vec![Vec::new(); horizon + 1];
        let mut windowed = vec![false; p.schedule.len()];
        for (k, entry) in p.schedule.iter().enumerate() {
            let ts = entry.times.resolve(p.t_max);
            if window > 0 && ts == [p.t_max] {
                windowed[k] = true;
                for slot in wanted.iter_mut().skip(p.t_max) {
                    slot.push(k);
                }
            } else {
                for t in ts {
                    wanted[t].push(k);
                }
            }
        }

        let mut values: Vec<ObservableValue> = Vec::new();
        let mut window_sums: Vec<Option<Vec<f64>>> = vec![None; p.schedule.len()];
        for t in 0..=horizon {
            if t > 0 {
                let mut step_log = events.as_ref().map(|_| Vec::new());
                self.step(engine, rng, mask.as_deref(), &mut plan, step_log.as_mut())?;
                if let (Some(all), Some(step)) = (events.as_mut(), step_log) {
                    all.push(step);
                }
            }
            if wanted[t].is_empty() {
                continue;
            }
            let part = engine.partition();
            for &k in &wanted[t] {
                let id = p.schedule[k].id;
                let v = self.geometry.evaluate(id, &part, p.measure)?;
                if windowed[k] {
                    let acc = window_sums[k].get_or_insert_with(|| vec![0.0; v.len()]);
                    for (a, x) in acc.iter_mut().zip(&v) {
                        *a += x;
                    }
                } else {
                    values.push(ObservableValue { id, t, values: v });
                }
            }
        }
        for (k, sums) in window_sums.into_iter().enumerate() {
            if let Some(s) = sums {
                let count = (window + 1) as f64;
                values.push(ObservableValue { id: p.schedule[k].id, t: p.t_max, values: s.into_iter().map(|x| x / count).collect() });
            }
        }
        values.sort_by_key(|v| (v.t, v.id));
        Ok(TrajectoryRecord { seed, values, events })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableValue {
    pub id: ObservableId,
    pub t: usize,
    pub values: Vec<f64>,
}

/// Everything one trajectory produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub values: Vec<ObservableValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub events: Option<Vec<Vec<AppliedEvent>>>,
}

impl TrajectoryRecord {
    pub fn get(&self, id: ObservableId, t: usize) -> Option<&[f64]> {
        self.values.iter().find(|v| v.id == id && v.t == t).map(|v| v.values.as_slice())
    }
}

/// Convenience wrapper: validate, build and run one trajectory.
pub fn run_trajectory(params: &CircuitParams, seed: u64) -> Result<TrajectoryRecord, CircuitError> {
    Circuit::new(params.clone())?.run_trajectory(seed)
}

/// One step on `state` with fresh streams from `seed`; returns the applied events.
pub fn step(state: &mut ClusterState, params: &CircuitParams, rng: &mut TrajectoryRng) -> Result<Vec<AppliedEvent>, CircuitError> {
    let circuit = Circuit::new(params.clone())?;
    let mut log = Vec::new();
    let mut plan = Vec::new();
    circuit.step(state, rng, None, &mut plan, Some(&mut log))?;
    Ok(log)
}

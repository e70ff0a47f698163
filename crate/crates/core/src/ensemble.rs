//! Seeding and deterministic parallel ensemble averaging.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, CircuitError, CircuitParams, TrajectoryRecord};
use crate::observables::ObservableId;
use crate::stats::Welford;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Trajectories per work unit. Chunk results are merged in index order, so
/// the reduction tree (and every bit of the result) is fixed by `n_traj` alone.
pub const CHUNK: u64 = 16;

/// SplitMix64 finalizer: a bijection on `u64`.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trajectory `index` under `master`: `mix64(mix64(master) + (index + 1)·φ)`.
/// Odd-multiplier counters are distinct mod 2⁶⁴ and `mix64` is a bijection,
/// so the map is injective in `index` for a fixed master.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    mix64(mix64(master).wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN)))
}

/// FNV-1a over the canonical JSON encoding of the parameters.
pub fn params_digest(params: &CircuitParams) -> String {
    let json = serde_json::to_string(params).expect("params serialize");
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in json.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    format!("{h:016x}")
}

/// Mean and standard error of one observable at one time (vector-valued for profiles).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableStats {
    pub id: ObservableId,
    pub t: usize,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub sum: Vec<f64>,
    pub sum_sq: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub params_digest: String,
    pub n_traj: u64,
    pub master_seed: u64,
    pub observables: Vec<ObservableStats>,
}

impl EnsembleResult {
    pub fn get(&self, id: ObservableId, t: usize) -> Option<&ObservableStats> {
        self.observables.iter().find(|o| o.id == id && o.t == t)
    }

    /// Final-time entry of `id` (largest `t`).
    pub fn last(&self, id: ObservableId) -> Option<&ObservableStats> {
        self.observables.iter().filter(|o| o.id == id).max_by_key(|o| o.t)
    }

    /// `(t, mean, stderr)` series of a scalar observable.
    pub fn series(&self, id: ObservableId) -> Vec<(usize, f64, f64)> {
        self.observables.iter().filter(|o| o.id == id).map(|o| (o.t, o.mean[0], o.stderr[0])).collect()
    }
}

/// Streaming accumulator keyed by `(observable, t)`.
#[derive(Debug, Clone, Default)]
pub struct Accumulator {
    n: u64,
    cells: BTreeMap<(usize, ObservableId), Vec<Welford>>,
}

impl Accumulator {
    pub fn push(&mut self, record: &TrajectoryRecord) {
        self.n += 1;
        for v in &record.values {
            let cell = self.cells.entry((v.t, v.id)).or_insert_with(|| vec![Welford::default(); v.values.len()]);
            for (w, &x) in cell.iter_mut().zip(&v.values) {
                w.push(x);
            }
        }
    }

    pub fn merge(&mut self, other: &Accumulator) {
        self.n += other.n;
        for (k, ws) in &other.cells {
            match self.cells.get_mut(k) {
                Some(mine) => mine.iter_mut().zip(ws).for_each(|(a, b)| a.merge(b)),
                None => {
                    self.cells.insert(*k, ws.clone());
                }
            }
        }
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn finish(&self, params_digest: String, master_seed: u64) -> EnsembleResult {
        let observables = self
            .cells
            .iter()
            .map(|(&(t, id), ws)| ObservableStats {
                id,
                t,
                mean: ws.iter().map(|w| w.mean).collect(),
                stderr: ws.iter().map(Welford::stderr).collect(),
                sum: ws.iter().map(|w| w.sum).collect(),
                sum_sq: ws.iter().map(|w| w.sum_sq).collect(),
            })
            .collect();
        EnsembleResult { params_digest, n_traj: self.n, master_seed, observables }
    }
}

/// Runs `n_traj` trajectories with seeds `derive_seed(master_seed, i)` on a
/// pool of `workers` threads (0 = rayon default). The result does not depend
/// on `workers`.
pub fn run_ensemble(params: &CircuitParams, n_traj: u64, master_seed: u64, workers: usize) -> Result<EnsembleResult, CircuitError> {
    run_chunks(params, n_traj, master_seed, workers, false, |_| {})
}

/// Like [`run_ensemble`], calling `sink` with every trajectory record in index order.
pub fn run_ensemble_with(
    params: &CircuitParams,
    n_traj: u64,
    master_seed: u64,
    workers: usize,
    sink: impl FnMut(&TrajectoryRecord),
) -> Result<EnsembleResult, CircuitError> {
    run_chunks(params, n_traj, master_seed, workers, true, sink)
}

fn run_chunks(
    params: &CircuitParams,
    n_traj: u64,
    master_seed: u64,
    workers: usize,
    keep: bool,
    mut sink: impl FnMut(&TrajectoryRecord),
) -> Result<EnsembleResult, CircuitError> {
    if n_traj == 0 {
        return Err(CircuitError::InvalidParams("n_traj must be at least 1".into()));
    }
    let circuit = Circuit::new(params.clone())?;
    let n_chunks = n_traj.div_ceil(CHUNK);
    let run_chunk = |c: u64| -> Result<(Accumulator, Vec<TrajectoryRecord>), CircuitError> {
        let mut acc = Accumulator::default();
        let mut kept = Vec::new();
        for i in c * CHUNK..((c + 1) * CHUNK).min(n_traj) {
            let rec = circuit.run_trajectory(derive_seed(master_seed, i))?;
            acc.push(&rec);
            if keep {
                kept.push(rec);
            }
        }
        Ok((acc, kept))
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CircuitError::InvalidParams(format!("thread pool: {e}")))?;
    let chunks: Vec<_> = pool.install(|| (0..n_chunks).into_par_iter().map(run_chunk).collect::<Result<Vec<_>, _>>())?;
    let mut total = Accumulator::default();
    for (acc, kept) in &chunks {
        total.merge(acc);
        kept.iter().for_each(&mut sink);
    }
    Ok(total.finish(params_digest(params), master_seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{AngleScheme, ScheduleEntry};
    use crate::lattice::{Boundary, LatticeSpec};

    #[test]
    fn derived_seeds_are_stable() {
        // frozen values: changing these breaks reproducibility of stored runs
        let golden = [derive_seed(0, 0), derive_seed(0, 1), derive_seed(42, 0), derive_seed(42, 1_000_000)];
        let frozen: [u64; 4] = GOLDEN_SEEDS;
        assert_eq!(golden, frozen);
        assert_ne!(derive_seed(7, 0), derive_seed(7, 1));
        assert_ne!(derive_seed(7, 0), derive_seed(8, 0));
    }

    // first value is the first SplitMix64 output for seed 0
    const GOLDEN_SEEDS: [u64; 4] = [0xe220a8397b1dcdaf, 0x6e789e6aa1b965f4, 0x989b3f130a063869, 0xfabed23ce0f4c425];

    #[test]
    fn derived_seeds_distinct_over_range() {
        let mut seen: Vec<u64> = (0..100_000).map(|i| derive_seed(123, i)).collect();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), 100_000);
    }

    #[test]
    fn derived_streams_look_uniform() {
        // bit balance and lag-1 correlation of the first draw across many masters
        use rand::{Rng, SeedableRng};
        let n = 20_000;
        let xs: Vec<f64> = (0..n)
            .map(|m| rand_xoshiro::Xoshiro256PlusPlus::seed_from_u64(derive_seed(m, 0)).random::<f64>())
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 4.0 * (1.0 / 12.0 / n as f64).sqrt());
        let corr: f64 = xs.windows(2).map(|w| (w[0] - 0.5) * (w[1] - 0.5)).sum::<f64>() / (n - 1) as f64 * 12.0;
        assert!(corr.abs() < 4.0 / (n as f64).sqrt(), "corr {corr}");
        let ones: u32 = (0..n).map(|i| derive_seed(i, 0).count_ones()).sum();
        let expect = 32.0 * n as f64;
        assert!((f64::from(ones) - expect).abs() < 4.0 * (16.0 * n as f64).sqrt());
    }

    fn chain_params(l: usize, p: f64) -> CircuitParams {
        CircuitParams::new(LatticeSpec::chain(l, Boundary::Periodic), p, AngleScheme::fixed_pi_4())
    }

    #[test]
    fn p_one_is_deterministic() {
        let r = run_ensemble(&chain_params(16, 1.0), 200, 5, 1).unwrap();
        let m = r.last(ObservableId::MagicDensity).unwrap();
        assert_eq!(m.mean, vec![1.0]);
        assert_eq!(m.stderr, vec![0.0]);
        assert_eq!(r.n_traj, 200);
    }

    #[test]
    fn worker_count_does_not_matter() {
        let params = chain_params(32, 0.5).with_schedule(
            ObservableId::ALL.iter().map(|&id| ScheduleEntry::final_time(id)).collect(),
        );
        let a = run_ensemble(&params, 100, 77, 1).unwrap();
        let b = run_ensemble(&params, 100, 77, 8).unwrap();
        assert_eq!(a, b);
        let c = run_ensemble(&params, 100, 78, 2).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn streaming_matches_batch() {
        let params = chain_params(12, 0.4);
        let circuit = Circuit::new(params.clone()).unwrap();
        let mut acc = Accumulator::default();
        for i in 0..40 {
            acc.push(&circuit.run_trajectory(derive_seed(9, i)).unwrap());
        }
        let batch = run_ensemble(&params, 40, 9, 1).unwrap();
        let streamed = acc.finish(params_digest(&params), 9);
        for (x, y) in batch.observables.iter().zip(&streamed.observables) {
            assert!((x.mean[0] - y.mean[0]).abs() < 1e-12);
            assert!((x.stderr[0] - y.stderr[0]).abs() < 1e-12);
        }
    }
}

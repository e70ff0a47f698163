//! Aggregated sweep tables and their CSV form.
//!
//! Columns: `L,p,observable,t,index,mean,stderr,n_traj`. `index` is the
//! position inside a profile observable (cut size minus one) and 0 for
//! scalars. Metadata precedes the header as `# key=value` lines.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::collapse::ScalingPoint;
use super::fit::Point;
use super::AnalysisError;
use crate::circuit::{CircuitParams, TrajectoryRecord};
use crate::ensemble::{params_digest, EnsembleResult};
use crate::observables::ObservableId;
use crate::stats::Welford;

pub const CSV_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "L")]
    pub l: usize,
    pub p: f64,
    pub observable: ObservableId,
    pub t: usize,
    pub index: usize,
    pub mean: f64,
    pub stderr: f64,
    pub n_traj: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepDataset {
    /// scheme, dimension, boundary and anything else worth keeping
    pub metadata: BTreeMap<String, String>,
    pub rows: Vec<SweepRow>,
}

type RowKey = (usize, u64, ObservableId, usize, usize);

fn key(r: &SweepRow) -> RowKey {
    (r.l, r.p.to_bits(), r.observable, r.t, r.index)
}

/// `(scheme, dimension, boundary)` metadata for a parameter set.
pub fn metadata_for(params: &CircuitParams) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    m.insert("csv_version".into(), CSV_VERSION.to_string());
    m.insert("scheme".into(), serde_json::to_string(&params.scheme).expect("scheme serializes"));
    m.insert("dimension".into(), params.lattice.dimension.to_string());
    m.insert("boundary".into(), format!("{:?}", params.lattice.boundary).to_lowercase());
    m.insert("measure".into(), format!("{:?}", params.measure).to_lowercase());
    m
}

impl SweepDataset {
    pub fn new(metadata: BTreeMap<String, String>) -> Self {
        SweepDataset { metadata, rows: Vec::new() }
    }

    /// Appends rows, rejecting duplicate `(L, p, observable, t, index)` keys.
    pub fn extend(&mut self, rows: impl IntoIterator<Item = SweepRow>) -> Result<(), AnalysisError> {
        let mut seen: std::collections::HashSet<RowKey> = self.rows.iter().map(key).collect();
        for r in rows {
            if !seen.insert(key(&r)) {
                return Err(AnalysisError::DuplicateRow { l: r.l, p: r.p, observable: r.observable.as_str().into() });
            }
            self.rows.push(r);
        }
        Ok(())
    }

    /// Rows of one ensemble, for every observable and time it recorded.
    pub fn rows_from_ensemble(params: &CircuitParams, result: &EnsembleResult) -> Vec<SweepRow> {
        let mut rows = Vec::new();
        for o in &result.observables {
            for (index, (&mean, &stderr)) in o.mean.iter().zip(&o.stderr).enumerate() {
                rows.push(SweepRow { l: params.lattice.l, p: params.p, observable: o.id, t: o.t, index, mean, stderr, n_traj: result.n_traj });
            }
        }
        rows
    }

    pub fn sort(&mut self) {
        self.rows.sort_by(|a, b| {
            (a.l, a.observable, a.t, a.index).cmp(&(b.l, b.observable, b.t, b.index)).then(a.p.total_cmp(&b.p))
        });
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.rows.iter().map(|r| r.l).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Latest-time scalar value of `id` for every `(L, p)`.
    pub fn final_values(&self, id: ObservableId) -> Vec<ScalingPoint> {
        let mut last: BTreeMap<(usize, u64), &SweepRow> = BTreeMap::new();
        for r in self.rows.iter().filter(|r| r.observable == id && r.index == 0) {
            let k = (r.l, r.p.to_bits());
            if last.get(&k).is_none_or(|old| old.t < r.t) {
                last.insert(k, r);
            }
        }
        let mut pts: Vec<ScalingPoint> =
            last.values().map(|r| ScalingPoint { l: r.l, p: r.p, value: r.mean, stderr: r.stderr }).collect();
        pts.sort_by(|a, b| a.l.cmp(&b.l).then(a.p.total_cmp(&b.p)));
        pts
    }

    /// Latest-time profile of `id` at `(L, p)` as `(cut size, mean, stderr)` points.
    pub fn profile(&self, id: ObservableId, l: usize, p: f64) -> Vec<Point> {
        let rows: Vec<&SweepRow> = self.rows.iter().filter(|r| r.observable == id && r.l == l && r.p == p).collect();
        let Some(t) = rows.iter().map(|r| r.t).max() else { return Vec::new() };
        let mut pts: Vec<Point> =
            rows.iter().filter(|r| r.t == t).map(|r| Point::new((r.index + 1) as f64, r.mean, r.stderr)).collect();
        pts.sort_by(|a, b| a.x.total_cmp(&b.x));
        pts
    }

    /// Time series of a scalar `id` at `(L, p)`.
    pub fn time_series(&self, id: ObservableId, l: usize, p: f64) -> Vec<Point> {
        let mut pts: Vec<Point> = self
            .rows
            .iter()
            .filter(|r| r.observable == id && r.l == l && r.p == p && r.index == 0)
            .map(|r| Point::new(r.t as f64, r.mean, r.stderr))
            .collect();
        pts.sort_by(|a, b| a.x.total_cmp(&b.x));
        pts
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<(), AnalysisError> {
        for (k, v) in &self.metadata {
            writeln!(out, "# {k}={v}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        if self.rows.is_empty() {
            w.write_record(["L", "p", "observable", "t", "index", "mean", "stderr", "n_traj"])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self, AnalysisError> {
        let text = std::io::read_to_string(input)?;
        let mut metadata = BTreeMap::new();
        for line in text.lines().take_while(|l| l.starts_with('#')) {
            if let Some((k, v)) = line.trim_start_matches('#').trim().split_once('=') {
                metadata.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let mut ds = SweepDataset::new(metadata);
        let rows: Result<Vec<SweepRow>, _> = reader.deserialize().collect();
        ds.extend(rows?)?;
        Ok(ds)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), AnalysisError> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, AnalysisError> {
        let f = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(f))
    }
}

/// Streams trajectory records into per-`(L, p, observable, t, index)` statistics.
/// Every `(L, p)` group must come from a single parameter set.
#[derive(Debug, Default)]
pub struct Aggregator {
    digests: HashMap<(usize, u64), String>,
    cells: BTreeMap<RowKey, Welford>,
    p_values: HashMap<u64, f64>,
}

impl Aggregator {
    pub fn push(&mut self, params: &CircuitParams, record: &TrajectoryRecord) -> Result<(), AnalysisError> {
        let group = (params.lattice.l, params.p.to_bits());
        let digest = params_digest(params);
        match self.digests.get(&group) {
            Some(d) if *d != digest => {
                return Err(AnalysisError::MixedParams { l: params.lattice.l, p: params.p });
            }
            Some(_) => {}
            None => {
                self.digests.insert(group, digest);
            }
        }
        self.p_values.insert(params.p.to_bits(), params.p);
        for v in &record.values {
            for (index, &x) in v.values.iter().enumerate() {
                self.cells.entry((group.0, group.1, v.id, v.t, index)).or_default().push(x);
            }
        }
        Ok(())
    }

    pub fn rows(&self) -> Vec<SweepRow> {
        self.cells
            .iter()
            .map(|(&(l, pb, observable, t, index), w)| SweepRow {
                l,
                p: self.p_values[&pb],
                observable,
                t,
                index,
                mean: w.mean,
                stderr: w.stderr(),
                n_traj: w.n,
            })
            .collect()
    }
}

/// Batch form of [`Aggregator`].
pub fn aggregate<'a>(records: impl IntoIterator<Item = (&'a CircuitParams, &'a TrajectoryRecord)>) -> Result<Vec<SweepRow>, AnalysisError> {
    let mut agg = Aggregator::default();
    for (p, r) in records {
        agg.push(p, r)?;
    }
    Ok(agg.rows())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{AngleScheme, ObservableValue};
    use crate::lattice::{Boundary, LatticeSpec};

    fn params(l: usize, p: f64) -> CircuitParams {
        CircuitParams::new(LatticeSpec::chain(l, Boundary::Periodic), p, AngleScheme::fixed_pi_4())
    }

    fn record(seed: u64, v: f64) -> TrajectoryRecord {
        TrajectoryRecord { seed, values: vec![ObservableValue { id: ObservableId::MagicDensity, t: 16, values: vec![v] }], events: None }
    }

    #[test]
    fn sample_statistics_of_three_records() {
        let pr = params(8, 0.5);
        let recs: Vec<TrajectoryRecord> = [1.0, 2.0, 3.0].iter().enumerate().map(|(i, &v)| record(i as u64, v)).collect();
        let rows = aggregate(recs.iter().map(|r| (&pr, r))).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].mean, 2.0);
        assert!((rows[0].stderr - 0.577_350_269_189_625_8).abs() < 1e-12);
        assert_eq!(rows[0].n_traj, 3);
        let flat: Vec<TrajectoryRecord> = (0..5).map(|i| record(i, 0.25)).collect();
        assert_eq!(aggregate(flat.iter().map(|r| (&pr, r))).unwrap()[0].stderr, 0.0);
    }

    #[test]
    fn aggregation_is_order_invariant() {
        let pr = params(8, 0.5);
        let recs: Vec<TrajectoryRecord> = (0..50).map(|i| record(i, ((i * 31) % 17) as f64 * 0.1)).collect();
        let fwd = aggregate(recs.iter().map(|r| (&pr, r))).unwrap();
        let rev = aggregate(recs.iter().rev().map(|r| (&pr, r))).unwrap();
        assert!((fwd[0].mean - rev[0].mean).abs() < 1e-12);
        assert!((fwd[0].stderr - rev[0].stderr).abs() < 1e-12);
    }

    #[test]
    fn mixed_params_rejected() {
        let a = params(8, 0.5);
        let b = params(8, 0.5).with_t_max(3);
        let r = record(0, 1.0);
        assert!(matches!(aggregate([(&a, &r), (&b, &r)]), Err(AnalysisError::MixedParams { .. })));
    }

    #[test]
    fn csv_round_trip() {
        let pr = params(8, 0.3);
        let mut ds = SweepDataset::new(metadata_for(&pr));
        ds.extend([
            SweepRow { l: 8, p: 0.3, observable: ObservableId::MagicDensity, t: 16, index: 0, mean: 0.25, stderr: 0.01, n_traj: 100 },
            SweepRow { l: 8, p: 0.3, observable: ObservableId::MutualMagicProfile, t: 16, index: 2, mean: 1.5, stderr: 0.1, n_traj: 100 },
        ])
        .unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("L,p,observable,t,index,mean,stderr,n_traj"));
        assert!(text.contains("8,0.3,mutual_magic_profile,16,2,1.5,0.1,100"));
        let back = SweepDataset::read_csv(&buf[..]).unwrap();
        assert_eq!(back, ds);
        assert_eq!(back.profile(ObservableId::MutualMagicProfile, 8, 0.3)[0].x, 3.0);
    }

    #[test]
    fn duplicate_keys_rejected() {
        let row = SweepRow { l: 8, p: 0.3, observable: ObservableId::Participation, t: 1, index: 0, mean: 1.0, stderr: 0.0, n_traj: 1 };
        let mut ds = SweepDataset::default();
        assert!(ds.extend([row.clone(), row]).is_err());
    }
}

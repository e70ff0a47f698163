//! Finite-size-scaling collapse `y = f((p - p_c) L^{1/ν})`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::AnalysisError;

/// One measured point of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub l: usize,
    pub p: f64,
    pub value: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollapseOptions {
    pub p_c_range: (f64, f64),
    pub nu_range: (f64, f64),
    /// points per axis of the coarse grid and of each refinement grid
    pub grid: usize,
    pub refinements: usize,
    /// candidates with fewer overlapping comparisons than this fraction of
    /// all (point, smaller size) pairs are rejected
    pub min_overlap: f64,
}

impl Default for CollapseOptions {
    fn default() -> Self {
        CollapseOptions { p_c_range: (0.3, 0.7), nu_range: (0.8, 2.0), grid: 41, refinements: 3, min_overlap: 0.3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandscapePoint {
    pub p_c: f64,
    pub nu: f64,
    /// `None` when the rescaled sizes do not overlap enough
    pub quality: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseResult {
    pub p_c: f64,
    pub nu: f64,
    pub quality: f64,
    /// coarse grid followed by every refinement grid, in evaluation order
    pub trace: Vec<LandscapePoint>,
}

struct Curve {
    l: usize,
    p: Vec<f64>,
    y: Vec<f64>,
    s: Vec<f64>,
}

fn group(points: &[ScalingPoint]) -> Result<Vec<Curve>, AnalysisError> {
    let mut sizes: Vec<usize> = points.iter().map(|p| p.l).collect();
    sizes.sort_unstable();
    sizes.dedup();
    let curves: Vec<Curve> = sizes
        .into_iter()
        .map(|l| {
            let mut pts: Vec<&ScalingPoint> = points.iter().filter(|p| p.l == l).collect();
            pts.sort_by(|a, b| a.p.total_cmp(&b.p));
            Curve { l, p: pts.iter().map(|q| q.p).collect(), y: pts.iter().map(|q| q.value).collect(), s: pts.iter().map(|q| q.stderr).collect() }
        })
        .collect();
    if curves.len() < 3 {
        return Err(AnalysisError::Degenerate(format!("{} system sizes, need at least 3", curves.len())));
    }
    if let Some(c) = curves.iter().find(|c| c.p.len() < 5) {
        return Err(AnalysisError::Degenerate(format!("L = {} has {} p values, need at least 5", c.l, c.p.len())));
    }
    Ok(curves)
}

/// Master-curve quality: mean over (point, smaller size) pairs of
/// `(y - f_b(x))² / (σ² + σ_b(x)²)`, where `f_b` is a cubic through the four
/// nearest rescaled points of the smaller size `b` and `σ_b` its linear
/// interpolation. Points are compared only against smaller sizes because on a
/// shared `p` grid those are sampled more densely in `x`. Pairs where `x` falls
/// outside the smaller size's range are skipped.
fn quality(curves: &[Curve], p_c: f64, nu: f64, min_overlap: f64) -> Option<f64> {
    let xs: Vec<Vec<f64>> = curves.iter().map(|c| c.p.iter().map(|p| (p - p_c) * (c.l as f64).powf(1.0 / nu)).collect()).collect();
    // curves are sorted by size, so curve a has a smaller sizes
    let total: usize = curves.iter().enumerate().map(|(a, c)| c.p.len() * a).sum();
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for (a, ca) in curves.iter().enumerate() {
        for (b, cb) in curves.iter().enumerate().take(a) {
            let xb = &xs[b];
            for (k, &x) in xs[a].iter().enumerate() {
                if x < xb[0] || x > xb[xb.len() - 1] {
                    continue;
                }
                let j = xb.partition_point(|&v| v <= x).clamp(1, xb.len() - 1);
                let w = (x - xb[j - 1]) / (xb[j] - xb[j - 1]);
                let f = lagrange(xb, &cb.y, j, x);
                let sf = cb.s[j - 1] + w * (cb.s[j] - cb.s[j - 1]);
                let var = ca.s[k] * ca.s[k] + sf * sf;
                let r2 = (ca.y[k] - f).powi(2);
                sum += if var > 0.0 { r2 / var } else { r2 };
                pairs += 1;
            }
        }
    }
    ((pairs as f64) >= min_overlap * total as f64 && pairs > 0).then(|| sum / pairs as f64)
}

/// Cubic through the four points around the bracket `[j-1, j]` (fewer at the ends).
fn lagrange(xs: &[f64], ys: &[f64], j: usize, x: f64) -> f64 {
    let lo = j.saturating_sub(2);
    let hi = (j + 2).min(xs.len());
    let mut f = 0.0;
    for a in lo..hi {
        let mut w = 1.0;
        for b in lo..hi {
            if a != b {
                w *= (x - xs[b]) / (xs[a] - xs[b]);
            }
        }
        f += w * ys[a];
    }
    f
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

fn scan(curves: &[Curve], pcs: &[f64], nus: &[f64], min_overlap: f64) -> Vec<LandscapePoint> {
    let cells: Vec<(f64, f64)> = pcs.iter().flat_map(|&pc| nus.iter().map(move |&nu| (pc, nu))).collect();
    cells.par_iter().map(|&(p_c, nu)| LandscapePoint { p_c, nu, quality: quality(curves, p_c, nu, min_overlap) }).collect()
}

fn best(points: &[LandscapePoint]) -> Option<LandscapePoint> {
    points
        .iter()
        .filter(|p| p.quality.is_some())
        .min_by(|a, b| a.quality.unwrap().total_cmp(&b.quality.unwrap()))
        .copied()
}

/// Collapse quality at one candidate; `None` when the overlap is insufficient.
pub fn collapse_quality(points: &[ScalingPoint], p_c: f64, nu: f64, options: &CollapseOptions) -> Result<Option<f64>, AnalysisError> {
    Ok(quality(&group(points)?, p_c, nu, options.min_overlap))
}

/// Grid search for `(p_c, ν)` minimizing the collapse quality, then
/// `refinements` rounds of a grid over the neighbouring cells of the best point.
/// The grid is evaluated in parallel; ties resolve to the first grid point.
pub fn collapse(points: &[ScalingPoint], options: &CollapseOptions) -> Result<CollapseResult, AnalysisError> {
    let curves = group(points)?;
    let (mut pc_lo, mut pc_hi) = options.p_c_range;
    let (mut nu_lo, mut nu_hi) = options.nu_range;
    let mut trace = Vec::new();
    let mut winner: Option<LandscapePoint> = None;
    for round in 0..=options.refinements {
        let pcs = linspace(pc_lo, pc_hi, options.grid);
        let nus = linspace(nu_lo, nu_hi, options.grid);
        let grid = scan(&curves, &pcs, &nus, options.min_overlap);
        let round_best = best(&grid);
        trace.extend(grid);
        match (round_best, winner) {
            (Some(b), Some(w)) if b.quality >= w.quality => {}
            (Some(b), _) => winner = Some(b),
            (None, _) if round == 0 => {
                return Err(AnalysisError::NoOverlap);
            }
            _ => {}
        }
        let w = winner.expect("set in round 0");
        let dpc = (pc_hi - pc_lo) / (options.grid.max(2) - 1) as f64;
        let dnu = (nu_hi - nu_lo) / (options.grid.max(2) - 1) as f64;
        pc_lo = w.p_c - 2.0 * dpc;
        pc_hi = w.p_c + 2.0 * dpc;
        nu_lo = (w.nu - 2.0 * dnu).max(1e-3);
        nu_hi = w.nu + 2.0 * dnu;
    }
    let w = winner.expect("set in round 0");
    Ok(CollapseResult { p_c: w.p_c, nu: w.nu, quality: w.quality.expect("filtered"), trace })
}

fn differences(a: &[(f64, f64)], b: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut common: Vec<(f64, f64)> = Vec::new();
    for &(p, ya) in a {
        if let Some(&(_, yb)) = b.iter().find(|(q, _)| (q - p).abs() < 1e-12) {
            common.push((p, ya - yb));
        }
    }
    common.sort_by(|x, y| x.0.total_cmp(&y.0));
    common
}

fn interpolate_zero(w: &[(f64, f64)]) -> f64 {
    let (p0, d0) = w[0];
    let (p1, d1) = w[1];
    if d0 == 0.0 {
        p0
    } else {
        p0 - d0 * (p1 - p0) / (d1 - d0)
    }
}

/// Crossing point of two curves, by linear interpolation of their difference.
/// Returns every sign change, in increasing `p`.
pub fn crossings(a: &[(f64, f64)], b: &[(f64, f64)]) -> Vec<f64> {
    differences(a, b)
        .windows(2)
        .filter(|w| w[0].1 == 0.0 || w[0].1.signum() != w[1].1.signum() && w[1].1 != 0.0)
        .map(interpolate_zero)
        .collect()
}

/// Crossings where `b` passes from below `a` to above it as `p` grows.
pub fn rising_crossings(a: &[(f64, f64)], b: &[(f64, f64)]) -> Vec<f64> {
    differences(a, b).windows(2).filter(|w| w[0].1 > 0.0 && w[1].1 <= 0.0).map(interpolate_zero).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};
    use rand_xoshiro::Xoshiro256PlusPlus;

    fn synthetic(p_c: f64, nu: f64, sigma: f64, rng: Option<&mut Xoshiro256PlusPlus>) -> Vec<ScalingPoint> {
        let noise = Normal::new(0.0, sigma).unwrap();
        let mut rng = rng;
        let mut out = Vec::new();
        for l in [64usize, 128, 256] {
            for k in 0..13 {
                let p = 0.35 + 0.025 * k as f64;
                let x = (p - p_c) * (l as f64).powf(1.0 / nu);
                let e = rng.as_deref_mut().map_or(0.0, |r| noise.sample(r));
                out.push(ScalingPoint { l, p, value: (-x).tanh() + e, stderr: sigma.max(1e-3) });
            }
        }
        out
    }

    #[test]
    fn recovers_synthetic_parameters() {
        let pts = synthetic(0.5, 4.0 / 3.0, 0.0, None);
        let r = collapse(&pts, &CollapseOptions::default()).unwrap();
        assert!((r.p_c - 0.5).abs() < 0.01, "p_c {}", r.p_c);
        assert!((r.nu - 4.0 / 3.0).abs() < 0.05, "nu {}", r.nu);
        assert!(r.quality >= 0.0);
        assert!(r.trace.len() >= 41 * 41);
    }

    #[test]
    fn truth_beats_shifted_candidates_on_noisy_replicas() {
        let opts = CollapseOptions::default();
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(8);
        let mut wins = 0;
        let reps = 40;
        for _ in 0..reps {
            // noise comparable to the stderr of 10⁴ trajectories
            let pts = synthetic(0.5, 4.0 / 3.0, 0.005, Some(&mut rng));
            let q = |pc, nu| collapse_quality(&pts, pc, nu, &opts).unwrap().unwrap_or(f64::INFINITY);
            let truth = q(0.5, 4.0 / 3.0);
            let others = [q(0.45, 4.0 / 3.0), q(0.55, 4.0 / 3.0), q(0.5, 4.0 / 3.0 - 0.2), q(0.5, 4.0 / 3.0 + 0.2)];
            if others.iter().all(|&o| truth < o) {
                wins += 1;
            }
        }
        assert!(wins as f64 >= 0.95 * reps as f64, "{wins}/{reps}");
    }

    #[test]
    fn rejects_too_few_sizes() {
        let pts: Vec<ScalingPoint> = synthetic(0.5, 1.0, 0.0, None).into_iter().filter(|p| p.l != 64).collect();
        assert!(matches!(collapse(&pts, &CollapseOptions::default()), Err(AnalysisError::Degenerate(_))));
    }

    #[test]
    fn reports_missing_overlap() {
        let pts = synthetic(0.5, 4.0 / 3.0, 0.0, None);
        let opts = CollapseOptions { p_c_range: (5.0, 6.0), min_overlap: 0.9, ..Default::default() };
        assert_eq!(collapse(&pts, &opts), Err(AnalysisError::NoOverlap));
    }

    #[test]
    fn crossing_of_two_lines() {
        let a: Vec<(f64, f64)> = (0..11).map(|k| (k as f64 * 0.1, k as f64 * 0.1)).collect();
        let b: Vec<(f64, f64)> = (0..11).map(|k| (k as f64 * 0.1, 0.75 - 0.5 * (k as f64 * 0.1 - 0.75))).collect();
        let c = crossings(&a, &b);
        assert_eq!(c.len(), 1);
        assert!((c[0] - 0.75).abs() < 1e-12);
        assert!(rising_crossings(&a, &b).is_empty());
        assert!((rising_crossings(&b, &a)[0] - 0.75).abs() < 1e-12);
    }
}

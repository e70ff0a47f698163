//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion.
//!
//! `RBC_ACCEPTANCE=2,10` restricts the run to the listed criteria.

use std::process::ExitCode;
use std::time::Instant;

use rbc_lab::analysis::{collapse, fit_area_law, fit_log_profile, fit_time_growth, rising_crossings, CollapseOptions, FitOptions, Point, ScalingPoint};
use rbc_lab::circuit::{AngleScheme, Circuit, CircuitParams, EngineMode, InitialPhases, ScheduleEntry, Times, TrajectoryRng};
use rbc_lab::cli::{validate_campaign, SchemeArg};
use rbc_lab::ensemble::{derive_seed, run_ensemble, EnsembleResult};
use rbc_lab::lattice::{Boundary, LatticeSpec};
use rbc_lab::observables::{
    entanglement_entropy, full_magic, mutual_magic, participation_entropy, shannon_mutual_information, MagicMeasure, ObservableId, Region,
};
use rbc_lab::rbc::ClusterState;

const WORKERS: usize = 0;
const TARGET_SLOPE: f64 = 0.573 / 2.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn ensemble(params: &CircuitParams, n: u64, seed: u64) -> EnsembleResult {
    run_ensemble(params, n, seed, WORKERS).expect("ensemble")
}

fn schedule(ids: &[ObservableId]) -> Vec<ScheduleEntry> {
    ids.iter().map(|&id| ScheduleEntry::final_time(id)).collect()
}

fn quarter(lattice: LatticeSpec, p: f64) -> CircuitParams {
    CircuitParams::new(lattice, p, AngleScheme::fixed_pi_4()).with_mode(EngineMode::Parity)
}

fn mean_stderr(r: &EnsembleResult, id: ObservableId) -> (f64, f64) {
    let s = r.last(id).expect("scheduled");
    (s.mean[0], s.stderr[0])
}

fn profile_points(r: &EnsembleResult, id: ObservableId) -> Vec<Point> {
    let s = r.last(id).expect("scheduled");
    s.mean.iter().zip(&s.stderr).enumerate().map(|(k, (&m, &e))| Point::new((k + 1) as f64, m, e)).collect()
}

fn oracle_equivalence() -> Outcome {
    let ps = [0.25, 0.5, 0.75];
    let schemes = [SchemeArg::Quarter, SchemeArg::Clifford, SchemeArg::Dilute, SchemeArg::Random];
    let mut lattices: Vec<(LatticeSpec, usize)> = [4, 6, 8, 10].iter().map(|&l| (LatticeSpec::chain(l, Boundary::Periodic), 2 * l)).collect();
    lattices.push((LatticeSpec::square(3, Boundary::Periodic), 6));
    let (mut runs, mut failed, mut dp, mut dobs) = (0, 0, 0.0f64, 0.0f64);
    for (lattice, steps) in lattices {
        let s = validate_campaign(lattice, &ps, &schemes, 100, steps).expect("campaign");
        runs += s.runs;
        failed += s.failures.len();
        dp = dp.max(s.max_probability_error);
        dobs = dobs.max(s.max_observable_error);
    }
    outcome(failed == 0, format!("{runs} coupled runs, {failed} with mismatches; max |dPr| {dp:.1e}, max |dObs| {dobs:.1e}"))
}

fn exact_limits() -> Outcome {
    let mut bad = Vec::new();
    let all = [ObservableId::MagicDensity, ObservableId::TopoMagic];
    for mode in [EngineMode::Full, EngineMode::Parity] {
        for l in [8usize, 16, 7, 9] {
            for p in [0.0, 1.0] {
                let params = quarter(LatticeSpec::chain(l, Boundary::Periodic), p).with_mode(mode).with_schedule(schedule(&all));
                let r = ensemble(&params, 64, 11);
                let (density, density_err) = mean_stderr(&r, ObservableId::MagicDensity);
                let (topo, _) = mean_stderr(&r, ObservableId::TopoMagic);
                let expected = match (p == 0.0, l % 2 == 0) {
                    (true, true) => 0.0,
                    (true, false) => 1.0 / l as f64,
                    (false, _) => 1.0,
                };
                if (density - expected).abs() > 1e-12 || density_err > 1e-12 {
                    bad.push(format!("{mode:?} L={l} p={p}: density {density}"));
                }
                if p == 0.0 && l % 2 == 0 && topo.abs() > 1e-12 {
                    bad.push(format!("{mode:?} L={l} p=0: topo {topo}"));
                }
            }
        }
    }
    let detail = if bad.is_empty() { "p=0 even: 0, odd: M_T, p=1: density 1, topo 0 at p=0 (full and parity)".to_string() } else { bad.join("; ") };
    outcome(bad.is_empty(), detail)
}

fn extensive_scaling() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for p in [0.2, 0.8] {
        let mut v = Vec::new();
        for l in [256, 512] {
            let params = quarter(LatticeSpec::chain(l, Boundary::Periodic), p).with_schedule(schedule(&[ObservableId::MagicDensity]));
            v.push(mean_stderr(&ensemble(&params, 10_000, 3), ObservableId::MagicDensity));
        }
        let diff = (v[0].0 - v[1].0).abs();
        let comb = (v[0].1.powi(2) + v[1].1.powi(2)).sqrt();
        pass &= diff <= 3.0 * comb;
        parts.push(format!("p={p}: {:.5}±{:.5} vs {:.5}±{:.5} ({:.2}σ)", v[0].0, v[0].1, v[1].0, v[1].1, diff / comb));
    }
    outcome(pass, parts.join(", "))
}

fn critical_slope() -> (Outcome, Option<f64>) {
    let l = 512;
    let params = quarter(LatticeSpec::chain(l, Boundary::Periodic), 0.5).with_schedule(schedule(&[ObservableId::MutualMagicProfile]));
    let r = ensemble(&params, 10_000, 4);
    match fit_log_profile(&profile_points(&r, ObservableId::MutualMagicProfile), l, &FitOptions::default()) {
        Ok(f) => {
            let pass = (f.slope - TARGET_SLOPE).abs() <= 0.04;
            (outcome(pass, format!("slope {:.4} ± {:.4} (target {TARGET_SLOPE:.4} ± 0.04)", f.slope, f.slope_stderr())), Some(f.slope))
        }
        Err(e) => (outcome(false, format!("fit failed: {e}")), None),
    }
}

fn dynamics(static_slope: Option<f64>) -> Outcome {
    let l = 1024;
    let params = quarter(LatticeSpec::chain(l, Boundary::Periodic), 0.5)
        .with_schedule(vec![ScheduleEntry { id: ObservableId::MutualMagicHalf, times: Times::Log(48) }]);
    let r = ensemble(&params, 2_000, 5);
    let series: Vec<Point> = r.series(ObservableId::MutualMagicHalf).into_iter().map(|(t, m, e)| Point::new(t as f64, m, e)).collect();
    let reference = static_slope.unwrap_or(TARGET_SLOPE);
    match fit_time_growth(&series, &FitOptions::default()) {
        Ok(f) => {
            let rel = (f.slope - reference).abs() / reference;
            outcome(
                rel <= 0.2,
                format!("time slope {:.4} ± {:.4} over t in [{:.0}, {:.0}] vs static {reference:.4} ({:.1}% off)", f.slope, f.slope_stderr(), f.window.0, f.window.1, 100.0 * rel),
            )
        }
        Err(e) => outcome(false, format!("fit failed: {e}")),
    }
}

fn topo_phases() -> Outcome {
    let mut v = Vec::new();
    for p in [0.25, 0.75] {
        let params = quarter(LatticeSpec::chain(256, Boundary::Open), p).with_schedule(schedule(&[ObservableId::TopoMagic]));
        v.push(mean_stderr(&ensemble(&params, 2_000, 6), ObservableId::TopoMagic));
    }
    let pass = (0.4..=0.6).contains(&v[0].0) && v[1].0 <= 0.1;
    outcome(pass, format!("p=0.25: {:.4} ± {:.4} in [0.4, 0.6]; p=0.75: {:.4} ± {:.4} <= 0.1", v[0].0, v[0].1, v[1].0, v[1].1))
}

fn data_collapse() -> Outcome {
    let mut points = Vec::new();
    for l in [64, 128, 256] {
        for k in 0..13 {
            let p = 0.35 + 0.025 * k as f64;
            let params = quarter(LatticeSpec::chain(l, Boundary::Open), p).with_schedule(schedule(&[ObservableId::TopoMagic]));
            let (value, stderr) = mean_stderr(&ensemble(&params, 10_000, 7), ObservableId::TopoMagic);
            points.push(ScalingPoint { l, p, value, stderr });
        }
    }
    match collapse(&points, &CollapseOptions::default()) {
        Ok(c) => {
            let pass = (c.p_c - 0.5).abs() <= 0.02 && (c.nu - 1.33).abs() <= 0.15;
            outcome(pass, format!("p_c {:.4} (0.50 ± 0.02), nu {:.4} (1.33 ± 0.15), Q {:.3}", c.p_c, c.nu, c.quality))
        }
        Err(e) => outcome(false, format!("collapse failed: {e}")),
    }
}

fn dilute_regime() -> Outcome {
    let ids = [ObservableId::MagicDensity, ObservableId::MutualMagicHalf];
    let mut magic = Vec::new();
    let mut mutual = Vec::new();
    for p in [0.25, 0.75] {
        let mut m = Vec::new();
        for l in [128usize, 256] {
            let lattice = LatticeSpec::chain(l, Boundary::Periodic);
            let params = CircuitParams::new(lattice, p, AngleScheme::dilute_preset(&lattice)).with_schedule(schedule(&ids));
            let r = ensemble(&params, 2_000, 8);
            let (density, _) = mean_stderr(&r, ObservableId::MagicDensity);
            m.push(density * l as f64);
            mutual.push((p, l, mean_stderr(&r, ObservableId::MutualMagicHalf).0));
        }
        magic.push((p, m[0], m[1]));
    }
    let saturates = magic.iter().all(|&(_, a, b)| (a - b).abs() / a.max(b) < 0.1);
    let ordered = mutual.iter().all(|&(p, _, i)| if p > 0.5 { i < 0.05 } else { i > 0.3 });
    let m = magic.iter().map(|(p, a, b)| format!("M(p={p}) {a:.3}/{b:.3}")).collect::<Vec<_>>().join(", ");
    let i = mutual.iter().map(|(p, l, v)| format!("I(p={p},L={l}) {v:.3}")).collect::<Vec<_>>().join(", ");
    outcome(saturates && ordered, format!("{m}; {i}"))
}

fn transition_2d() -> Outcome {
    let sizes = [12usize, 16, 24];
    let ps: Vec<f64> = (0..10).map(|k| 0.66 + 0.02 * k as f64).collect();
    let curves: Vec<Vec<(f64, f64)>> = sizes
        .iter()
        .map(|&l| {
            ps.iter()
                .map(|&p| {
                    let params = quarter(LatticeSpec::square(l, Boundary::Periodic), p).with_schedule(schedule(&[ObservableId::MutualMagicHalf]));
                    (p, mean_stderr(&ensemble(&params, 10_000, 9), ObservableId::MutualMagicHalf).0 / l as f64)
                })
                .collect()
        })
        .collect();
    let mut found = Vec::new();
    for a in 0..sizes.len() {
        for b in a + 1..sizes.len() {
            if let Some(&x) = rising_crossings(&curves[a], &curves[b]).first() {
                found.push((sizes[a], sizes[b], x));
            }
        }
    }
    let p_x = found.iter().map(|c| c.2).sum::<f64>() / found.len().max(1) as f64;
    let cross_ok = found.len() == 3 && (p_x - 0.75).abs() <= 0.03;

    let l = 64;
    let params = quarter(LatticeSpec::square(l, Boundary::Periodic), 0.75).with_schedule(schedule(&[ObservableId::MutualMagicProfile]));
    let r = ensemble(&params, 1_000, 10);
    let area = fit_area_law(&profile_points(&r, ObservableId::MutualMagicProfile), l, &FitOptions::default());
    let (area_ok, area_detail) = match area {
        Ok(f) => (f.r_squared > 0.98, format!("area law L=64: R² {:.4} (> 0.98), slope {:.4}", f.r_squared, f.slope)),
        Err(e) => (false, format!("area-law fit failed: {e}")),
    };
    let pairs = found.iter().map(|(a, b, x)| format!("{a}/{b}: {x:.4}")).collect::<Vec<_>>().join(", ");
    outcome(cross_ok && area_ok, format!("I/L crossings {pairs}, mean {p_x:.4} (0.75 ± 0.03); {area_detail}"))
}

fn structural_identities() -> Outcome {
    let tol = 1e-9;
    let mut violations = Vec::new();
    let mut n_traj = 0;
    let mut n_checks = 0u64;
    let setups: Vec<(LatticeSpec, AngleScheme, InitialPhases)> = vec![
        (LatticeSpec::chain(12, Boundary::Periodic), AngleScheme::RandomUniform, InitialPhases::Random),
        (LatticeSpec::square(4, Boundary::Periodic), AngleScheme::RandomUniform, InitialPhases::Random),
        (LatticeSpec::chain(12, Boundary::Open), AngleScheme::fixed_pi_4(), AngleScheme::fixed_pi_4().default_initial()),
        (LatticeSpec::square(4, Boundary::Open), AngleScheme::Dilute { theta: rbc_lab::phase::PhaseValue::PI_4, q: 0.5, per_site: false }, InitialPhases::Uniform { phase: rbc_lab::phase::PhaseValue::ZERO }),
    ];
    for (k, (lattice, scheme, initial)) in setups.into_iter().enumerate() {
        let random = matches!(scheme, AngleScheme::RandomUniform);
        let n = lattice.n_sites();
        let regions: Vec<Region> = if lattice.dimension == 1 {
            (0..n).flat_map(|a| (1..n).map(move |len| Region::interval(n, a, len))).collect()
        } else {
            let l = lattice.l;
            (0..l).flat_map(|x| (0..l).flat_map(move |y| (1..=l - x).flat_map(move |w| (1..=l - y).map(move |h| Region::rect(l, x, y, w, h)))))
                .filter(|r| r.len() < n)
                .collect()
        };
        for (j, p) in [0.25, 0.5, 0.75].iter().enumerate() {
            let params = CircuitParams::new(lattice, *p, scheme).with_initial(initial.clone());
            let measure = if random { MagicMeasure::Nullity } else { params.measure };
            let circuit = Circuit::new(params.clone()).expect("valid");
            let per = if k < 2 { 100 } else { 67 };
            for s in 0..per {
                n_traj += 1;
                let mut rng = TrajectoryRng::from_seed(derive_seed(1000 + 10 * k as u64 + j as u64, s));
                let phases = circuit.initial_phases(&mut rng);
                let mut state = ClusterState::init_product(n, &phases).expect("init");
                let mut plan = Vec::new();
                for _ in 0..params.t_max {
                    circuit.step(&mut state, &mut rng, None, &mut plan, None).expect("step");
                    let part = state.partition();
                    let full = full_magic(&part, measure).unwrap();
                    let pe = participation_entropy(&part);
                    if full > pe + tol || (random && (full - pe).abs() > tol) {
                        violations.push(format!("setup {k} seed {s}: full {full} vs participation {pe}"));
                    }
                    for region in &regions {
                        n_checks += 1;
                        let ee = entanglement_entropy(&part, region).unwrap();
                        let mi = shannon_mutual_information(&part, region).unwrap();
                        let mm = mutual_magic(&part, region, measure).unwrap();
                        if (mi - ee).abs() > tol || mm > ee + tol || (random && (mm - ee).abs() > tol) {
                            violations.push(format!("setup {k} seed {s}: EE {ee}, Shannon {mi}, mutual {mm}"));
                        }
                    }
                }
            }
        }
    }
    let detail = format!("{n_traj} trajectories, {n_checks} region checks, {} violations", violations.len());
    let detail = match violations.first() {
        Some(v) => format!("{detail}; first: {v}"),
        None => detail,
    };
    outcome(violations.is_empty() && n_traj >= 1000, detail)
}

fn main() -> ExitCode {
    let only: Option<Vec<u32>> = std::env::var("RBC_ACCEPTANCE").ok().map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let wanted = |k: u32| only.as_ref().is_none_or(|v| v.contains(&k));
    let mut results: Vec<(u32, &str, Outcome, f64)> = Vec::new();
    let mut static_slope = None;
    let mut run = |k: u32, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        if wanted(k) {
            let t = Instant::now();
            let o = f();
            let secs = t.elapsed().as_secs_f64();
            println!("{} criterion {k} ({name}): {} [{secs:.0} s]", if o.pass { "PASS" } else { "FAIL" }, o.detail);
            results.push((k, name, o, secs));
        }
    };
    run(1, "oracle equivalence", &mut oracle_equivalence);
    run(2, "exact limits", &mut exact_limits);
    run(3, "extensive scaling", &mut extensive_scaling);
    run(4, "critical mutual magic", &mut || {
        let (o, s) = critical_slope();
        static_slope = s;
        o
    });
    run(5, "dynamics", &mut || dynamics(static_slope));
    run(6, "topological magic phases", &mut topo_phases);
    run(7, "data collapse", &mut data_collapse);
    run(8, "dilute regime", &mut dilute_regime);
    run(9, "2D transition", &mut transition_2d);
    run(10, "structural identities", &mut structural_identities);
    let failed = results.iter().filter(|r| !r.2.pass).count();
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

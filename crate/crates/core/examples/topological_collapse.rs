//! Topological magic on open chains and a finite-size-scaling collapse.

use rbc_lab::analysis::{collapse, CollapseOptions, ScalingPoint};
use rbc_lab::circuit::{AngleScheme, CircuitParams, EngineMode, ScheduleEntry};
use rbc_lab::ensemble::run_ensemble;
use rbc_lab::lattice::{Boundary, LatticeSpec};
use rbc_lab::observables::ObservableId;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut points = Vec::new();
    for l in [32, 64, 128] {
        for k in 0..13 {
            let p = 0.35 + 0.025 * k as f64;
            let params = CircuitParams::new(LatticeSpec::chain(l, Boundary::Open), p, AngleScheme::fixed_pi_4())
                .with_mode(EngineMode::Parity)
                .with_schedule(vec![ScheduleEntry::final_time(ObservableId::TopoMagic)]);
            let s = run_ensemble(&params, 1000, 5, 0)?.last(ObservableId::TopoMagic).cloned().expect("scheduled");
            points.push(ScalingPoint { l, p, value: s.mean[0], stderr: s.stderr[0] });
        }
    }
    for pt in points.iter().filter(|pt| (pt.p * 40.0).round() as i64 % 2 == 0) {
        println!("L = {:>3}  p = {:.3}  M_topo/M_T = {:.4} ± {:.4}", pt.l, pt.p, pt.value, pt.stderr);
    }
    let c = collapse(&points, &CollapseOptions::default())?;
    println!("collapse: p_c = {:.4}, nu = {:.4}, Q = {:.3}", c.p_c, c.nu, c.quality);
    Ok(())
}

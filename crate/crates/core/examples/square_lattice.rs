//! Square lattice: half-system mutual magic per unit boundary across the
//! transition, and the area law of corner blocks near p = 0.75.

use rbc_lab::analysis::{fit_area_law, FitOptions, Point};
use rbc_lab::circuit::{AngleScheme, CircuitParams, EngineMode, ScheduleEntry};
use rbc_lab::ensemble::run_ensemble;
use rbc_lab::lattice::{Boundary, LatticeSpec};
use rbc_lab::observables::ObservableId;

fn params(l: usize, p: f64, id: ObservableId) -> CircuitParams {
    CircuitParams::new(LatticeSpec::square(l, Boundary::Periodic), p, AngleScheme::fixed_pi_4())
        .with_mode(EngineMode::Parity)
        .with_schedule(vec![ScheduleEntry::final_time(id)])
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("{:>5} {:>10} {:>10}", "p", "L=8", "L=16");
    for k in 0..8 {
        let p = 0.6 + 0.04 * k as f64;
        let row: Vec<String> = [8, 16]
            .iter()
            .map(|&l| {
                let r = run_ensemble(&params(l, p, ObservableId::MutualMagicHalf), 500, 1, 0).expect("valid");
                format!("{:>10.4}", r.last(ObservableId::MutualMagicHalf).expect("scheduled").mean[0] / l as f64)
            })
            .collect();
        println!("{p:>5.2} {}", row.join(" "));
    }

    let l = 32;
    let r = run_ensemble(&params(l, 0.75, ObservableId::MutualMagicProfile), 300, 1, 0)?;
    let s = r.last(ObservableId::MutualMagicProfile).expect("scheduled");
    let pts: Vec<Point> = s.mean.iter().zip(&s.stderr).enumerate().map(|(k, (&m, &e))| Point::new(k as f64 + 1.0, m, e)).collect();
    let fit = fit_area_law(&pts, l, &FitOptions::default())?;
    println!("corner blocks, L = {l}: slope {:.4} per unit side, R² = {:.4}", fit.slope, fit.r_squared);
    Ok(())
}

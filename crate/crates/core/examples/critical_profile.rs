//! Mutual magic of intervals at p = 1/2 and its logarithmic fit, next to the
//! entanglement profile.

use rbc_lab::analysis::{fit_log_profile, FitOptions, Point};
use rbc_lab::circuit::{AngleScheme, CircuitParams, EngineMode, ScheduleEntry};
use rbc_lab::ensemble::run_ensemble;
use rbc_lab::lattice::{Boundary, LatticeSpec};
use rbc_lab::observables::ObservableId;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let l = 128;
    let ids = [ObservableId::MutualMagicProfile, ObservableId::EntanglementProfile];
    let params = CircuitParams::new(LatticeSpec::chain(l, Boundary::Periodic), 0.5, AngleScheme::fixed_pi_4())
        .with_mode(EngineMode::Parity)
        .with_schedule(ids.iter().map(|&id| ScheduleEntry::final_time(id)).collect());
    let r = run_ensemble(&params, 2000, 7, 0)?;
    for id in ids {
        let s = r.last(id).expect("scheduled");
        let pts: Vec<Point> = s.mean.iter().zip(&s.stderr).enumerate().map(|(k, (&m, &e))| Point::new(k as f64 + 1.0, m, e)).collect();
        let fit = fit_log_profile(&pts, l, &FitOptions::default())?;
        println!("{:<22} c = {:.4} ± {:.4}  (R² {:.4})", id.as_str(), fit.slope, fit.slope_stderr(), fit.r_squared);
    }
    println!("ratio expected near 1/2 for mutual magic over entanglement");
    Ok(())
}

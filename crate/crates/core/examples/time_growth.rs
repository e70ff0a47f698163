//! Growth of half-chain mutual magic from a product state at p = 1/2.

use rbc_lab::analysis::{fit_time_growth, saturation_time, FitOptions, Point};
use rbc_lab::circuit::{AngleScheme, CircuitParams, EngineMode, ScheduleEntry, Times};
use rbc_lab::ensemble::run_ensemble;
use rbc_lab::lattice::{Boundary, LatticeSpec};
use rbc_lab::observables::ObservableId;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = CircuitParams::new(LatticeSpec::chain(256, Boundary::Periodic), 0.5, AngleScheme::fixed_pi_4())
        .with_mode(EngineMode::Parity)
        .with_schedule(vec![ScheduleEntry { id: ObservableId::MutualMagicHalf, times: Times::Log(30) }]);
    let r = run_ensemble(&params, 500, 3, 0)?;
    let series: Vec<Point> = r.series(ObservableId::MutualMagicHalf).into_iter().map(|(t, m, e)| Point::new(t as f64, m, e)).collect();
    for p in series.iter().step_by(3) {
        println!("t = {:>4}  I = {:.4} ± {:.4}", p.x, p.value, p.stderr);
    }
    let fit = fit_time_growth(&series, &FitOptions::default())?;
    println!("saturation at t ≈ {:?}", saturation_time(&series));
    println!("c_t = {:.4} ± {:.4} over t in [{}, {}]", fit.slope, fit.slope_stderr(), fit.window.0, fit.window.1);
    Ok(())
}

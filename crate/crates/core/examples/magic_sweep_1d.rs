//! Magic density and half-chain mutual magic across p for fixed pi/4
//! measurements on periodic chains.

use rbc_lab::circuit::{AngleScheme, CircuitParams, EngineMode};
use rbc_lab::ensemble::run_ensemble;
use rbc_lab::lattice::{Boundary, LatticeSpec};
use rbc_lab::observables::ObservableId;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sizes = [32, 64];
    println!("{:>5} {:>4} {:>16} {:>16}", "p", "L", "M/(M_T L)", "I_M(L/2)/M_T");
    for k in 0..=10 {
        let p = k as f64 / 10.0;
        for &l in &sizes {
            let params = CircuitParams::new(LatticeSpec::chain(l, Boundary::Periodic), p, AngleScheme::fixed_pi_4())
                .with_mode(EngineMode::Parity);
            let r = run_ensemble(&params, 400, 1, 0)?;
            let m = r.last(ObservableId::MagicDensity).expect("default schedule");
            let i = r.last(ObservableId::MutualMagicHalf).expect("default schedule");
            println!("{p:>5.1} {l:>4} {:>9.4} ± {:.4} {:>9.4} ± {:.4}", m.mean[0], m.stderr[0], i.mean[0], i.stderr[0]);
        }
    }
    Ok(())
}

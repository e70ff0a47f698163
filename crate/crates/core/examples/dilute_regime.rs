//! Sparse non-Clifford measurements: theta = pi/4 with probability q = 2/L,
//! Clifford otherwise. Total magic saturates while half-chain mutual magic
//! acts as an order parameter.

use rbc_lab::circuit::{AngleScheme, CircuitParams};
use rbc_lab::ensemble::run_ensemble;
use rbc_lab::lattice::{Boundary, LatticeSpec};
use rbc_lab::observables::ObservableId;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("{:>5} {:>4} {:>12} {:>12}", "p", "L", "M/M_T", "I_M/M_T");
    for p in [0.1, 0.25, 0.5, 0.75, 0.9] {
        for l in [64, 128] {
            let lattice = LatticeSpec::chain(l, Boundary::Periodic);
            let params = CircuitParams::new(lattice, p, AngleScheme::dilute_preset(&lattice));
            let r = run_ensemble(&params, 500, 2, 0)?;
            let m = r.last(ObservableId::MagicDensity).expect("default schedule").mean[0] * l as f64;
            let i = r.last(ObservableId::MutualMagicHalf).expect("default schedule").mean[0];
            println!("{p:>5.2} {l:>4} {m:>12.4} {i:>12.4}");
        }
    }
    Ok(())
}

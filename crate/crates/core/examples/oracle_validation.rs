//! Lockstep runs of the cluster engine against the dense state vector.

use rbc_lab::cli::{validation_params, SchemeArg};
use rbc_lab::lattice::{Boundary, LatticeSpec};
use rbc_lab::oracle::coupled_run;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let lattice = LatticeSpec::chain(8, Boundary::Periodic);
    for scheme in [SchemeArg::Quarter, SchemeArg::Clifford, SchemeArg::Dilute, SchemeArg::Random] {
        let params = validation_params(lattice, 0.5, scheme);
        let mut worst = (0.0f64, 0.0f64, 1.0f64);
        let mut failures = 0;
        for seed in 0..20 {
            let r = coupled_run(&params, seed, 16)?;
            worst = (worst.0.max(r.max_probability_error), worst.1.max(r.max_observable_error), worst.2.min(r.min_fidelity));
            failures += usize::from(!r.passed());
        }
        println!(
            "{scheme:?}: {failures} failing seeds, max |dPr| {:.1e}, max |dObs| {:.1e}, min fidelity {:.12}",
            worst.0, worst.1, worst.2
        );
    }
    Ok(())
}

//! Uniformly random measurement angles: stabilizer nullity of every
//! subsystem tracks entanglement and participation entropy exactly.

use rbc_lab::circuit::{AngleScheme, Circuit, CircuitParams, InitialPhases, TrajectoryRng};
use rbc_lab::lattice::{Boundary, LatticeSpec};
use rbc_lab::observables::{entanglement_entropy, full_magic, mutual_magic, participation_entropy, MagicMeasure, Region};
use rbc_lab::rbc::ClusterState;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let l = 16;
    let params = CircuitParams::new(LatticeSpec::chain(l, Boundary::Periodic), 0.4, AngleScheme::RandomUniform)
        .with_initial(InitialPhases::Random);
    let circuit = Circuit::new(params.clone())?;
    let mut rng = TrajectoryRng::from_seed(2024);
    let phases = circuit.initial_phases(&mut rng);
    let mut state = ClusterState::init_product(l, &phases)?;
    let mut plan = Vec::new();
    for t in 1..=params.t_max {
        circuit.step(&mut state, &mut rng, None, &mut plan, None)?;
        if t % 8 == 0 {
            let part = state.partition();
            let half = Region::interval(l, 0, l / 2);
            println!(
                "t = {t:>2}: nullity {:>4.1} = participation {:>4.1};  mutual nullity {:>3.1} = entanglement {:>3.1}",
                full_magic(&part, MagicMeasure::Nullity)?,
                participation_entropy(&part),
                mutual_magic(&part, &half, MagicMeasure::Nullity)?,
                entanglement_entropy(&part, &half)?,
            );
        }
    }
    Ok(())
}

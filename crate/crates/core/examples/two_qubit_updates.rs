//! Two T states, a ZZ measurement that fuses them, and an X measurement at
//! angle pi/4 that splits one qubit back off. Each step is checked against
//! the dense state vector.

use rbc_lab::oracle::{dense_from_clusters, DenseObservable};
use rbc_lab::phase::PhaseValue;
use rbc_lab::rbc::{ClusterState, Lambda, OutcomeSource};

fn show(label: &str, state: &ClusterState) {
    let clusters: Vec<String> = state
        .clusters()
        .map(|(_, c)| format!("{:?} phase {}", c.members(), c.phase()))
        .collect();
    println!("{label:<24} {}", clusters.join(" | "));
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let t = PhaseValue::PI_4;
    let mut state = ClusterState::init_product(2, &[t, t])?;
    let mut dense = dense_from_clusters(&state)?;
    show("initial", &state);

    let (plus, minus) = state.outcome_distribution_zz(0, 1)?;
    println!("Pr(ZZ = +1) = {plus:.3}, Pr(ZZ = -1) = {minus:.3}");
    let out = state.measure_zz(0, 1, OutcomeSource::Forced(Lambda::Plus))?;
    dense.measure(DenseObservable::Zz { i: 0, j: 1 }, OutcomeSource::Forced(out.lambda))?;
    show("after ZZ(+1)", &state);
    println!("fidelity with dense state: {:.12}", dense.fidelity(&dense_from_clusters(&state)?));

    let (plus, _) = state.outcome_distribution_x(1, t)?;
    let out = state.measure_x(1, t, OutcomeSource::Uniform(0.3))?;
    dense.measure(DenseObservable::X { site: 1, theta: t.radians() }, OutcomeSource::Forced(out.lambda))?;
    println!("Pr(X(pi/4) = +1) = {plus:.3}, drew {:?}", out.lambda);
    show("after X(pi/4)", &state);
    println!("fidelity with dense state: {:.12}", dense.fidelity(&dense_from_clusters(&state)?));
    Ok(())
}

//! Fixtures shared by the benchmarks in `benches/`.

use coadapt::{
    EnvironmentProfile, GainParams, GainSet, Gate, InitialReference, JointState, Periodic, PointMass, ReferenceMode,
    Robot, ScenarioConfig, TwoLinkArm, Variant, Vector,
};

/// One-dimensional point mass against the default wall, `periods` long.
pub fn wall_1dof(periods: usize) -> ScenarioConfig {
    let s = |v: f64| Vector::from_element(1, v);
    ScenarioConfig {
        robot: Robot::PointMass(PointMass::new(1.0, 1)),
        environment: EnvironmentProfile::wall(1, 2.0, -100.0, -2.0).expect("valid wall"),
        gains: GainSet::new(GainParams::isotropic(1, 5.0, 20.0, 1.0, 1.0, 1.0)).expect("valid gains"),
        period: 2.0,
        step: 1e-3,
        periods,
        desired_force: Periodic::constant(s(-5.0)),
        initial_state: JointState::at_rest(s(0.0)),
        initial_reference: InitialReference::Constant(s(0.0)),
        variant: Variant::Full,
        gate: Gate::Simultaneous,
        reference_mode: ReferenceMode::Consistent,
        divergence_limit: 1e6,
    }
}

pub fn two_link_arm() -> TwoLinkArm {
    TwoLinkArm::uniform([1.0, 1.0], [1.0, 1.0])
}

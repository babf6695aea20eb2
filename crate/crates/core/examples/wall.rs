//! Runs the one-dimensional wall scenario and prints the per-period summary.
//!
//! `cargo run --release -p coadapt-core --example wall [full|no-damping] [damping_floor] [fourier]`

use coadapt::{
    run_scenario, EnvironmentProfile, GainParams, GainSet, Gate, InitialReference, JointState, Matrix, Periodic,
    PointMass, ReferenceMode, Robot, ScenarioConfig, Variant, Vector,
};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let variant = match args.get(1).map(String::as_str) {
        Some("no-damping") => Variant::NoDamping,
        _ => Variant::Full,
    };
    let floor: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(3.0);
    let fourier = args.get(3).is_some_and(|s| s == "fourier");
    let s = |v: f64| Vector::from_element(1, v);
    let m = |v: f64| Matrix::from_element(1, 1, v);
    let damping = if variant == Variant::NoDamping { 0.0 } else { -2.0 };
    let stiffness = if fourier {
        Periodic::Fourier { mean: m(-100.0), cos: vec![m(-20.0)], sin: vec![m(0.0)] }
    } else {
        Periodic::Constant(m(-100.0))
    };
    let environment = EnvironmentProfile::new(
        2.0,
        Periodic::Constant(s(0.0)),
        stiffness,
        Periodic::Constant(m(damping)),
        Periodic::Constant(s(0.0)),
    )
    .unwrap();
    let mut gains = GainParams::isotropic(1, 5.0, 20.0, 1.0, 1.0, 1.0);
    gains.damping_floor = floor;
    let config = ScenarioConfig {
        robot: Robot::PointMass(PointMass::new(1.0, 1)),
        environment,
        gains: GainSet::new(gains).unwrap(),
        period: 2.0,
        step: 1e-3,
        periods: 30,
        desired_force: Periodic::Constant(s(-5.0)),
        initial_state: JointState::at_rest(s(0.0)),
        initial_reference: InitialReference::Constant(s(0.0)),
        variant,
        gate: Gate::Simultaneous,
        reference_mode: ReferenceMode::Consistent,
        divergence_limit: 1e6,
    };
    let start = std::time::Instant::now();
    let trace = match run_scenario(&config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("run failed: {e}");
            std::process::exit(1);
        }
    };
    println!("runtime {:.2?}", start.elapsed());
    println!("period       J_c        J_e        J_r          J     delta_J    rms_eps  mean_f    mean_x   wf/f   margin   slack");
    for p in &trace.period_costs {
        println!(
            "{:6} {:10.4} {:10.3e} {:10.4} {:10.4} {:11.3e} {:9.3e} {:8.4} {:8.5} {:6.4} {:8.2e} {:8.2e}",
            p.period,
            p.j_c,
            p.j_e,
            p.j_r,
            p.j,
            p.delta_j.unwrap_or(0.0),
            p.rms_eps,
            p.mean_force[0],
            p.mean_position[0],
            p.max_w_plus_f / p.max_f.max(1e-300),
            p.margin_min,
            p.slack_min
        );
    }
}

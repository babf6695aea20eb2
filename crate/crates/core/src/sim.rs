//! Fixed-step closed-loop simulation of the robot, environment and controller.

use crate::analysis::{self, PeriodCosts};
use crate::controller::{
    ControlError, ControlOutput, Controller, ControllerConfig, GainSet, Gate, InitialReference, ReferenceMode,
    Variant,
};
use crate::environment::{EnvironmentProfile, Periodic};
use crate::linalg::{self, Matrix, Vector};
use crate::robot::{self, DynamicsError, JointState, Robot, RobotModel};
use thiserror::Error;

pub const DEFAULT_DIVERGENCE_LIMIT: f64 = 1e6;
const GRID_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("T/h: not integer (T = {period}, h = {step})")]
    NonIntegerPeriod { period: f64, step: f64 },
    #[error("{key}: {constraint}")]
    Invalid { key: String, constraint: String },
}

impl ConfigError {
    pub fn invalid(key: impl Into<String>, constraint: impl Into<String>) -> Self {
        ConfigError::Invalid { key: key.into(), constraint: constraint.into() }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("step {step} (t = {time:.6}): {source}")]
    Dynamics { step: usize, time: f64, source: DynamicsError },
    #[error("step {step} (t = {time:.6}): {source}; {snapshot}")]
    Control { step: usize, time: f64, source: ControlError, snapshot: String },
    #[error("step {step} (t = {time:.6}): non-finite {quantity}; {snapshot}")]
    NonFinite { step: usize, time: f64, quantity: &'static str, snapshot: String },
    #[error("step {step} (t = {time:.6}): state magnitude {magnitude:.3e} exceeds divergence limit; {snapshot}")]
    Diverged { step: usize, time: f64, magnitude: f64, snapshot: String },
}

impl SimError {
    /// True for run-time blow-ups as opposed to configuration problems.
    pub fn is_divergence(&self) -> bool {
        !matches!(self, SimError::Config(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub robot: Robot,
    pub environment: EnvironmentProfile,
    pub gains: GainSet,
    pub period: f64,
    pub step: f64,
    pub periods: usize,
    pub desired_force: Periodic<Vector>,
    pub initial_state: JointState,
    pub initial_reference: InitialReference,
    pub variant: Variant,
    pub gate: Gate,
    pub reference_mode: ReferenceMode,
    pub divergence_limit: f64,
}

impl ScenarioConfig {
    /// Number of steps per period, if `T/h` is an integer.
    pub fn period_steps(&self) -> Result<usize, ConfigError> {
        let ratio = self.period / self.step;
        let n = ratio.round();
        if !(self.step > 0.0 && ratio.is_finite() && n >= 1.0 && (ratio - n).abs() <= GRID_TOL * n.max(1.0)) {
            return Err(ConfigError::NonIntegerPeriod { period: self.period, step: self.step });
        }
        Ok(n as usize)
    }

    pub fn validate(&self) -> Result<usize, ConfigError> {
        if !(self.period.is_finite() && self.period > 0.0) {
            return Err(ConfigError::invalid("period", "must be > 0"));
        }
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(ConfigError::invalid("step", "must be > 0"));
        }
        let n = self.period_steps()?;
        if self.periods < 2 {
            return Err(ConfigError::invalid("periods", "must be >= 2"));
        }
        let dim = self.robot.dof();
        let checks = [
            ("environment", self.environment.dim()),
            ("gains", self.gains.dim()),
            ("desired_force", self.desired_force.mean().len()),
            ("initial.q", self.initial_state.q.len()),
            ("initial.qdot", self.initial_state.qdot.len()),
            ("reference", self.initial_reference.dim()),
        ];
        for (key, found) in checks {
            if found != dim {
                return Err(ConfigError::invalid(key, format!("dimension {found} does not match robot dimension {dim}")));
            }
        }
        if (self.environment.period() - self.period).abs() > GRID_TOL * self.period {
            return Err(ConfigError::invalid("environment.period", "must equal the scenario period"));
        }
        if !self.initial_state.is_finite() {
            return Err(ConfigError::invalid("initial", "must be finite"));
        }
        if self.robot.is_singular(&self.initial_state.q) {
            return Err(ConfigError::invalid("initial.q", "singular configuration"));
        }
        if let Gate::EpsilonThreshold(th) = self.gate {
            if !(th > 0.0) {
                return Err(ConfigError::invalid("gate.threshold", "must be > 0"));
            }
        }
        if !(self.divergence_limit > 0.0) {
            return Err(ConfigError::invalid("divergence_limit", "must be > 0"));
        }
        Ok(n)
    }

    pub fn controller_config(&self) -> Result<ControllerConfig, ConfigError> {
        Ok(ControllerConfig {
            gains: self.gains.clone(),
            variant: self.variant,
            gate: self.gate,
            reference_mode: self.reference_mode,
            period: self.period,
            period_steps: self.period_steps()?,
            desired_force: self.desired_force.clone(),
            initial_reference: self.initial_reference.clone(),
        })
    }

    /// Constant desired position for constant environments and forces.
    pub fn desired_position(&self) -> Option<Vector> {
        if !self.desired_force.is_constant() {
            return None;
        }
        self.environment.steady_desired_position(self.desired_force.mean()).ok()
    }
}

/// One logged sample of the closed loop.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub q: Vector,
    pub qdot: Vector,
    pub x: Vector,
    pub xdot: Vector,
    pub x_r: Vector,
    pub xr_dot: Vector,
    pub e: Vector,
    pub eps: Vector,
    pub eps_adapt: Vector,
    pub force_est: Vector,
    pub stiffness: Matrix,
    pub damping: Matrix,
    pub xi_r: Vector,
    pub delta_xi: Vector,
    pub delta_xr: Vector,
    pub f: Vector,
    pub f_d: Vector,
    pub u: Vector,
    pub v: Vector,
    pub w: Vector,
    /// Operational-space inertia at this sample.
    pub mass: Matrix,
    pub gate_open: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub dim: usize,
    pub period: f64,
    pub step: f64,
    pub period_steps: usize,
    pub periods: usize,
    pub variant: Variant,
    pub steps: Vec<StepRecord>,
    pub period_costs: Vec<PeriodCosts>,
}

impl Trace {
    /// The `N + 1` samples covering period `k` (zero-based), endpoints included.
    pub fn period_window(&self, k: usize) -> &[StepRecord] {
        let n = self.period_steps;
        &self.steps[k * n..=(k + 1) * n]
    }
}

/// State derivative `(q̇, q̈)` of the closed loop under the held control `u`.
fn derivative(
    model: &dyn RobotModel,
    env: &EnvironmentProfile,
    u: &Vector,
    t: f64,
    state: &JointState,
) -> Result<(Vector, Vector), DynamicsError> {
    let task = model.task_state(state);
    let f = env.interaction_force(t, &task.x, &task.xdot);
    let qddot = robot::joint_accel(model, state, &(u + f))?;
    Ok((state.qdot.clone(), qddot))
}

/// Classical fourth-order Runge-Kutta step with `u` held over the step and the
/// environment force re-evaluated at every stage.
pub fn rk4_step(
    model: &dyn RobotModel,
    env: &EnvironmentProfile,
    u: &Vector,
    t: f64,
    state: &JointState,
    h: f64,
) -> Result<JointState, DynamicsError> {
    let shifted = |k: &(Vector, Vector), s: f64| JointState::new(&state.q + &k.0 * s, &state.qdot + &k.1 * s);
    let k1 = derivative(model, env, u, t, state)?;
    let k2 = derivative(model, env, u, t + 0.5 * h, &shifted(&k1, 0.5 * h))?;
    let k3 = derivative(model, env, u, t + 0.5 * h, &shifted(&k2, 0.5 * h))?;
    let k4 = derivative(model, env, u, t + h, &shifted(&k3, h))?;
    let w = h / 6.0;
    Ok(JointState::new(
        &state.q + (k1.0 + k2.0 * 2.0 + k3.0 * 2.0 + k4.0) * w,
        &state.qdot + (k1.1 + k2.1 * 2.0 + k3.1 * 2.0 + k4.1) * w,
    ))
}

fn snapshot(config: &ScenarioConfig, state: &JointState) -> String {
    let g = config.gains.params();
    format!(
        "q = {:?}, qdot = {:?}; gains alpha = {}, lambda_gamma = {}, lambda_l = {}, beta = {}, kappa = {}",
        state.q.as_slice(),
        state.qdot.as_slice(),
        g.alpha,
        config.gains.lambda_gamma(),
        config.gains.lambda_l(),
        g.beta,
        g.kappa
    )
}

fn make_record(
    t: f64,
    state: &JointState,
    x: Vector,
    xdot: Vector,
    f: Vector,
    mass: Matrix,
    out: ControlOutput,
) -> StepRecord {
    StepRecord {
        t,
        q: state.q.clone(),
        qdot: state.qdot.clone(),
        x,
        xdot,
        x_r: out.x_r,
        xr_dot: out.xr_dot,
        e: out.signals.e,
        eps: out.signals.epsilon,
        eps_adapt: out.eps_adapt,
        force_est: out.estimates.force,
        stiffness: out.estimates.stiffness,
        damping: out.estimates.damping,
        xi_r: out.xi_r,
        delta_xi: out.delta_xi,
        delta_xr: out.delta_xr,
        f,
        f_d: out.desired_force,
        u: out.u,
        v: out.v,
        w: out.w,
        mass,
        gate_open: out.gate_open,
    }
}

/// Runs the scenario for `P` periods and returns `P·N + 1` samples together
/// with the per-period cost report.
pub fn run_scenario(config: &ScenarioConfig) -> Result<Trace, SimError> {
    let n = config.validate()?;
    let total = config.periods * n;
    let h = config.step;
    let model: &dyn RobotModel = &config.robot;
    let env = &config.environment;
    let mut controller = Controller::new(config.controller_config()?);
    let mut state = config.initial_state.clone();
    let mut steps = Vec::with_capacity(total + 1);

    for k in 0..=total {
        let t = k as f64 * (config.period / n as f64);
        let time = t;
        let task = model.task_state(&state);
        let terms = robot::operational_dynamics(model, &state.q, &state.qdot)
            .map_err(|source| SimError::Dynamics { step: k, time, source })?;
        let out = controller.step(&task.x, &task.xdot, &terms).map_err(|source| SimError::Control {
            step: k,
            time,
            source,
            snapshot: snapshot(config, &state),
        })?;
        let f = env.interaction_force(t, &task.x, &task.xdot);
        let u = out.u.clone();

        // Guard on states (plant, learned parameters, reference); the control
        // force itself may spike transiently without the loop diverging.
        let magnitude = [&state.q, &state.qdot, &task.x, &task.xdot, &out.x_r, &out.xr_dot, &out.estimates.force, &out.xi_r]
            .iter()
            .map(|v| v.amax())
            .fold(out.estimates.stiffness.amax().max(out.estimates.damping.amax()), f64::max);
        if !magnitude.is_finite() || !linalg::all_finite(f.iter().chain(out.u.iter())) {
            return Err(SimError::NonFinite { step: k, time, quantity: "state", snapshot: snapshot(config, &state) });
        }
        if magnitude > config.divergence_limit {
            return Err(SimError::Diverged { step: k, time, magnitude, snapshot: snapshot(config, &state) });
        }
        steps.push(make_record(t, &state, task.x, task.xdot, f, terms.mass, out));

        if k < total {
            state = rk4_step(model, env, &u, t, &state, h)
                .map_err(|source| SimError::Dynamics { step: k, time, source })?;
            if !state.is_finite() {
                return Err(SimError::NonFinite {
                    step: k + 1,
                    time: t + h,
                    quantity: "joint state",
                    snapshot: snapshot(config, &state),
                });
            }
        }
    }

    let mut trace = Trace {
        dim: model.dof(),
        period: config.period,
        step: h,
        period_steps: n,
        periods: config.periods,
        variant: config.variant,
        steps,
        period_costs: Vec::new(),
    };
    trace.period_costs = analysis::per_period_report(&trace, config);
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::GainParams;
    use crate::robot::{PointMass, TwoLinkArm};
    use approx::assert_relative_eq;

    fn s(v: f64) -> Vector {
        Vector::from_element(1, v)
    }

    fn point_mass_config() -> ScenarioConfig {
        ScenarioConfig {
            robot: Robot::PointMass(PointMass::new(1.0, 1)),
            environment: EnvironmentProfile::wall(1, 0.1, -100.0, -2.0).unwrap(),
            gains: GainSet::new(GainParams::isotropic(1, 5.0, 20.0, 1.0, 1.0, 1.0)).unwrap(),
            period: 0.1,
            step: 1e-3,
            periods: 3,
            desired_force: Periodic::Constant(s(-5.0)),
            initial_state: JointState::at_rest(s(0.0)),
            initial_reference: InitialReference::Constant(s(0.0)),
            variant: Variant::Full,
            gate: Gate::Simultaneous,
            reference_mode: ReferenceMode::Consistent,
            divergence_limit: DEFAULT_DIVERGENCE_LIMIT,
        }
    }

    #[test]
    fn uniform_acceleration_step_is_exact() {
        let model = PointMass::new(1.0, 1);
        let env = EnvironmentProfile::free_space(1, 1.0).unwrap();
        let out = rk4_step(&model, &env, &s(1.0), 0.0, &JointState::at_rest(s(0.0)), 0.01).unwrap();
        assert_relative_eq!(out.qdot[0], 0.01, epsilon = 1e-15);
        assert_relative_eq!(out.q[0], 5e-5, epsilon = 1e-15);
    }

    #[test]
    fn gravity_hold_is_an_equilibrium() {
        let arm = TwoLinkArm::default();
        let env = EnvironmentProfile::free_space(2, 1.0).unwrap();
        let state = JointState::at_rest(Vector::from_vec(vec![0.3, 1.2]));
        let g = robot::operational_dynamics(&arm, &state.q, &state.qdot).unwrap().gravity;
        let next = rk4_step(&arm, &env, &g, 0.0, &state, 1e-3).unwrap();
        assert!((&next.q - &state.q).amax() <= 1e-12);
        assert!(next.qdot.amax() <= 1e-12);
    }

    #[test]
    fn trace_has_one_record_per_grid_point() {
        let trace = run_scenario(&point_mass_config()).unwrap();
        assert_eq!(trace.steps.len(), 3 * 100 + 1);
        assert_eq!(trace.period_window(2).len(), 101);
        assert_relative_eq!(trace.steps.last().unwrap().t, 0.3, epsilon = 1e-12);
        assert_eq!(trace.period_costs.len(), 3);
    }

    #[test]
    fn non_integer_grid_is_rejected() {
        let mut cfg = point_mass_config();
        cfg.period = 2.0;
        cfg.step = 0.0003;
        cfg.environment = EnvironmentProfile::wall(1, 2.0, -100.0, -2.0).unwrap();
        let err = run_scenario(&cfg).unwrap_err();
        assert!(err.to_string().starts_with("T/h: not integer"), "{err}");
    }

    #[test]
    fn dimension_mismatch_is_reported_with_key() {
        let mut cfg = point_mass_config();
        cfg.desired_force = Periodic::Constant(Vector::zeros(2));
        assert!(matches!(cfg.validate(), Err(ConfigError::Invalid { key, .. }) if key == "desired_force"));
    }

    #[test]
    fn divergence_guard_reports_step() {
        let mut cfg = point_mass_config();
        cfg.divergence_limit = 1.0;
        cfg.initial_state = JointState::new(s(0.0), s(5.0));
        let err = run_scenario(&cfg).unwrap_err();
        assert!(matches!(err, SimError::Diverged { step: 0, .. }), "{err}");
    }

    #[test]
    fn passive_contact_does_not_gain_energy() {
        let model = PointMass::new(1.0, 1);
        let env = EnvironmentProfile::wall(1, 1.0, -100.0, -2.0).unwrap();
        let energy = |s: &JointState| 0.5 * s.qdot[0] * s.qdot[0] + 50.0 * s.q[0] * s.q[0];
        let mut state = JointState::new(s(0.1), s(0.0));
        let mut prev = energy(&state);
        for period in 0..5 {
            for k in 0..1000 {
                let t = period as f64 + k as f64 * 1e-3;
                state = rk4_step(&model, &env, &s(0.0), t, &state, 1e-3).unwrap();
            }
            let e = energy(&state);
            assert!(e <= prev + 1e-6);
            prev = e;
        }
    }
}

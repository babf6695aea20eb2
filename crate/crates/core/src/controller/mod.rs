//! Adaptive controller `u = v + w`: feedback around a learned reference
//! trajectory plus learned feedforward force and impedance, all adapted
//! from one period to the next.

mod buffer;
mod gains;
pub mod laws;

pub use buffer::{BufferError, PeriodBuffer};
pub use gains::{GainError, GainParams, GainSet, DEFAULT_BETA, DEFAULT_DAMPING_FLOOR, DEFAULT_KAPPA};
pub use laws::{Estimates, ReferenceMode, TrackingSignals};

use crate::environment::Periodic;
use crate::linalg::{self, Matrix, Vector};
use crate::robot::DynamicsTerms;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("{law} update: linear solve failed")]
    SolverFailure { law: &'static str },
    #[error("non-finite value in {quantity}")]
    NonFiniteState { quantity: &'static str },
    #[error(transparent)]
    Buffer(#[from] BufferError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Variant {
    /// Adapts force, stiffness, damping and the visco-elastic reference.
    #[default]
    Full,
    /// Drops damping and adapts the reference position directly.
    NoDamping,
}

/// When trajectory adaptation is allowed to run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Gate {
    /// From the second period on, together with the other laws.
    #[default]
    Simultaneous,
    /// From the given zero-based period index on.
    AfterPeriods(usize),
    /// Once the RMS tracking error over a completed period falls below the
    /// threshold. The gate stays open afterwards.
    EpsilonThreshold(f64),
}

/// Reference trajectory used during the first period.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialReference {
    Constant(Vector),
    /// Straight line from `start` at `t = 0` towards `end` at `t = T`.
    Line { start: Vector, end: Vector },
    Fourier(Periodic<Vector>),
}

impl InitialReference {
    pub fn dim(&self) -> usize {
        match self {
            InitialReference::Constant(v) => v.len(),
            InitialReference::Line { start, .. } => start.len(),
            InitialReference::Fourier(p) => p.mean().len(),
        }
    }

    /// Position, velocity and acceleration at `t`.
    pub fn eval(&self, t: f64, period: f64) -> (Vector, Vector, Vector) {
        let n = self.dim();
        match self {
            InitialReference::Constant(v) => (v.clone(), Vector::zeros(n), Vector::zeros(n)),
            InitialReference::Line { start, end } => {
                let slope = (end - start) / period;
                (start + &slope * t, slope, Vector::zeros(n))
            }
            InitialReference::Fourier(p) => {
                let (d1, d2) = p.derivatives(t, period);
                (p.eval(t, period), d1, d2)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig {
    pub gains: GainSet,
    pub variant: Variant,
    pub gate: Gate,
    pub reference_mode: ReferenceMode,
    pub period: f64,
    pub period_steps: usize,
    pub desired_force: Periodic<Vector>,
    pub initial_reference: InitialReference,
}

impl ControllerConfig {
    pub fn step_size(&self) -> f64 {
        self.period / self.period_steps as f64
    }
}

/// Everything the controller stores per step for reuse one period later.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotState {
    pub estimates: Estimates,
    pub xi_r: Vector,
    pub x_r: Vector,
    pub xr_dot: Vector,
    pub delta_xr: Vector,
}

/// Result of one controller evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlOutput {
    pub u: Vector,
    pub v: Vector,
    pub w: Vector,
    pub signals: TrackingSignals,
    /// Tracking error used by the adaptation laws at this step, computed
    /// against the reference predicted before the update.
    pub eps_adapt: Vector,
    pub estimates: Estimates,
    pub xi_r: Vector,
    pub delta_xi: Vector,
    pub x_r: Vector,
    pub xr_dot: Vector,
    pub xr_ddot: Vector,
    pub delta_xr: Vector,
    pub delta_xr_dot: Vector,
    pub desired_force: Vector,
    pub gate_open: bool,
}

#[derive(Debug, Clone)]
struct LastStep {
    xr_dot: Vector,
    delta_xr: Vector,
    delta_xr_dot: Vector,
}

/// Single-threaded controller advanced once per sample.
#[derive(Debug, Clone)]
pub struct Controller {
    config: ControllerConfig,
    buffer: PeriodBuffer<SlotState>,
    step: usize,
    last: LastStep,
    gate_latched: bool,
    eps_sq_sum: f64,
}

impl Controller {
    pub fn new(config: ControllerConfig) -> Self {
        let n = config.gains.dim();
        Self {
            buffer: PeriodBuffer::new(config.period_steps),
            step: 0,
            last: LastStep { xr_dot: Vector::zeros(n), delta_xr: Vector::zeros(n), delta_xr_dot: Vector::zeros(n) },
            gate_latched: false,
            eps_sq_sum: 0.0,
            config,
        }
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.config
    }

    /// Index of the next step to be evaluated.
    pub fn step_index(&self) -> usize {
        self.step
    }

    fn update_gate(&mut self) -> bool {
        let n_steps = self.config.period_steps;
        let k = self.step;
        if k < n_steps {
            return false;
        }
        match self.config.gate {
            Gate::Simultaneous => true,
            Gate::AfterPeriods(p) => k / n_steps >= p,
            Gate::EpsilonThreshold(threshold) => {
                if k.is_multiple_of(n_steps) {
                    let rms = (self.eps_sq_sum / n_steps as f64).sqrt();
                    self.eps_sq_sum = 0.0;
                    if rms < threshold {
                        self.gate_latched = true;
                    }
                }
                self.gate_latched
            }
        }
    }

    /// Computes the control force for the current sample and advances the
    /// controller by one step.
    pub fn step(&mut self, x: &Vector, xdot: &Vector, terms: &DynamicsTerms) -> Result<ControlOutput, ControlError> {
        let cfg = &self.config;
        let gains = &cfg.gains;
        let n = gains.dim();
        let h = cfg.step_size();
        let t = self.step as f64 * h;
        let alpha = gains.alpha();
        let desired_force = cfg.desired_force.eval(t, cfg.period);
        let first_period = self.step < cfg.period_steps;
        let gate_open = self.update_gate();
        let cfg = &self.config;
        let gains = &cfg.gains;

        let (estimates, xi_r, delta_xi, x_r, xr_dot, xr_ddot, delta_xr, delta_xr_dot, eps_adapt);
        if first_period {
            let (r, rd, rdd) = cfg.initial_reference.eval(t, cfg.period);
            estimates = Estimates::zeros(n);
            xi_r = Vector::zeros(n);
            delta_xi = Vector::zeros(n);
            delta_xr = Vector::zeros(n);
            delta_xr_dot = Vector::zeros(n);
            eps_adapt = laws::tracking_error(x, xdot, &r, &rd, alpha);
            x_r = r;
            xr_dot = rd;
            xr_ddot = rdd;
        } else {
            let prev = self.buffer.delayed(self.step)?;
            let predicted_xr = &prev.x_r + &self.last.delta_xr;
            let predicted_xr_dot = &prev.xr_dot + &self.last.delta_xr_dot;
            eps_adapt = laws::tracking_error(x, xdot, &predicted_xr, &predicted_xr_dot, alpha);
            let pe = &prev.estimates;

            let reference;
            match (cfg.variant, gate_open) {
                (Variant::Full, true) => {
                    let (ks, kd) = laws::adapt_impedance(&pe.stiffness, &pe.damping, &eps_adapt, x, xdot, gains)?;
                    let upd = laws::adapt_trajectory_and_force(&eps_adapt, &desired_force, &pe.force, &prev.xi_r, gains)?;
                    reference = laws::integrate_reference(
                        &laws::ReferenceInputs {
                            delta_xi: &upd.delta_xi,
                            stiffness: &ks,
                            damping: &kd,
                            last_delta_xr: &self.last.delta_xr,
                            prev_period_xi: &prev.xi_r,
                            prev_period_xr: &prev.x_r,
                            prev_period_xr_dot: &prev.xr_dot,
                            step: h,
                        },
                        cfg.reference_mode,
                        gains,
                    )?;
                    estimates = Estimates { force: upd.force, stiffness: ks, damping: kd };
                    xi_r = upd.xi;
                    delta_xi = upd.delta_xi;
                }
                (Variant::NoDamping, true) => {
                    let upd = laws::adapt_no_damping(
                        &eps_adapt,
                        x,
                        &desired_force,
                        &pe.force,
                        &pe.stiffness,
                        &prev.x_r,
                        gains,
                    )?;
                    let dx_dot = (&upd.delta_xr - &self.last.delta_xr) / h;
                    reference = laws::ReferenceUpdate {
                        xr_dot: &prev.xr_dot + &dx_dot,
                        x_r: upd.x_r,
                        delta_xr: upd.delta_xr,
                        delta_xr_dot: dx_dot,
                    };
                    xi_r = &upd.stiffness * &reference.x_r;
                    delta_xi = &xi_r - &prev.xi_r;
                    estimates = Estimates { force: upd.force, stiffness: upd.stiffness, damping: Matrix::zeros(n, n) };
                }
                (variant, false) => {
                    let (ks, kd) = laws::adapt_impedance(&pe.stiffness, &pe.damping, &eps_adapt, x, xdot, gains)?;
                    let kd = if variant == Variant::NoDamping { Matrix::zeros(n, n) } else { kd };
                    let force = laws::adapt_force(&pe.force, &eps_adapt, gains)?;
                    estimates = Estimates { force, stiffness: ks, damping: kd };
                    xi_r = prev.xi_r.clone();
                    delta_xi = Vector::zeros(n);
                    reference = laws::ReferenceUpdate {
                        delta_xr: Vector::zeros(n),
                        delta_xr_dot: Vector::zeros(n),
                        x_r: prev.x_r.clone(),
                        xr_dot: prev.xr_dot.clone(),
                    };
                }
            }
            xr_ddot = (&reference.xr_dot - &self.last.xr_dot) / h;
            x_r = reference.x_r;
            xr_dot = reference.xr_dot;
            delta_xr = reference.delta_xr;
            delta_xr_dot = reference.delta_xr_dot;
        }

        let signals = laws::tracking_signals(x, xdot, &x_r, &xr_dot, &xr_ddot, alpha);
        let v = laws::feedback_control(terms, &signals, gains.gamma());
        let w = laws::feedforward_control(&estimates, x, xdot);
        let u = &v + &w;

        let checks: [(&'static str, bool); 7] = [
            ("control force", linalg::all_finite(u.iter())),
            ("feedforward force", linalg::all_finite(estimates.force.iter())),
            ("stiffness", linalg::all_finite(estimates.stiffness.iter())),
            ("damping", linalg::all_finite(estimates.damping.iter())),
            ("reference trajectory", linalg::all_finite(x_r.iter().chain(xr_dot.iter()).chain(xr_ddot.iter()))),
            ("visco-elastic reference", linalg::all_finite(xi_r.iter())),
            ("tracking error", linalg::all_finite(eps_adapt.iter())),
        ];
        if let Some((quantity, _)) = checks.iter().find(|(_, ok)| !ok) {
            return Err(ControlError::NonFiniteState { quantity });
        }

        if matches!(self.config.gate, Gate::EpsilonThreshold(_)) {
            self.eps_sq_sum += signals.epsilon.norm_squared();
        }
        self.buffer.push(SlotState {
            estimates: estimates.clone(),
            xi_r: xi_r.clone(),
            x_r: x_r.clone(),
            xr_dot: xr_dot.clone(),
            delta_xr: delta_xr.clone(),
        });
        self.last = LastStep { xr_dot: xr_dot.clone(), delta_xr: delta_xr.clone(), delta_xr_dot: delta_xr_dot.clone() };
        self.step += 1;

        Ok(ControlOutput {
            u,
            v,
            w,
            signals,
            eps_adapt,
            estimates,
            xi_r,
            delta_xi,
            x_r,
            xr_dot,
            xr_ddot,
            delta_xr,
            delta_xr_dot,
            desired_force,
            gate_open,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(gate: Gate) -> ControllerConfig {
        ControllerConfig {
            gains: GainSet::new(GainParams::isotropic(1, 5.0, 20.0, 1.0, 1.0, 1.0)).unwrap(),
            variant: Variant::Full,
            gate,
            reference_mode: ReferenceMode::Consistent,
            period: 0.01,
            period_steps: 10,
            desired_force: Periodic::Constant(Vector::from_element(1, -5.0)),
            initial_reference: InitialReference::Constant(Vector::from_element(1, 0.02)),
        }
    }

    fn unit_terms() -> DynamicsTerms {
        DynamicsTerms { mass: Matrix::identity(1, 1), coriolis: Matrix::zeros(1, 1), gravity: Vector::zeros(1) }
    }

    #[test]
    fn first_period_uses_feedback_only() {
        let mut c = Controller::new(config(Gate::Simultaneous));
        let x = Vector::from_element(1, 0.01);
        let xd = Vector::from_element(1, 0.3);
        for _ in 0..10 {
            let out = c.step(&x, &xd, &unit_terms()).unwrap();
            assert_eq!(out.w, Vector::zeros(1));
            assert_eq!(out.u, out.v);
            assert_eq!(out.estimates, Estimates::zeros(1));
            assert_eq!(out.delta_xi, Vector::zeros(1));
            assert!(!out.gate_open);
        }
        let out = c.step(&x, &xd, &unit_terms()).unwrap();
        assert!(out.gate_open);
        assert_ne!(out.w, Vector::zeros(1));
    }

    #[test]
    fn closed_gate_replays_reference() {
        let mut c = Controller::new(config(Gate::AfterPeriods(3)));
        let x = Vector::from_element(1, 0.01);
        let xd = Vector::from_element(1, -0.2);
        let mut refs = Vec::new();
        for k in 0..30 {
            let out = c.step(&x, &xd, &unit_terms()).unwrap();
            if k < 10 {
                refs.push(out.x_r.clone());
            } else {
                assert!(!out.gate_open);
                assert_eq!(out.x_r, refs[k % 10]);
                assert_eq!(out.delta_xi, Vector::zeros(1));
            }
        }
        assert!(c.step(&x, &xd, &unit_terms()).unwrap().gate_open);
    }

    #[test]
    fn epsilon_gate_opens_after_quiet_period() {
        let mut c = Controller::new(config(Gate::EpsilonThreshold(1e-9)));
        let x_r = Vector::from_element(1, 0.02);
        let zero = Vector::zeros(1);
        let mut opened = None;
        for k in 0..40 {
            let out = c.step(&x_r, &zero, &unit_terms()).unwrap();
            if out.gate_open && opened.is_none() {
                opened = Some(k);
            }
        }
        assert_eq!(opened, Some(10));
    }

    #[test]
    fn line_reference_has_constant_slope() {
        let r = InitialReference::Line { start: Vector::from_element(1, 0.0), end: Vector::from_element(1, 1.0) };
        let (x, v, a) = r.eval(0.5, 2.0);
        assert_eq!((x[0], v[0], a[0]), (0.25, 0.5, 0.0));
    }
}

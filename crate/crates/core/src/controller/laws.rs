//! Control and adaptation laws as pure functions of their inputs.
//!
//! Each period-delay law holds its time-`t` unknown on both sides. The
//! functions here solve those relations exactly; the matching `*_residual`
//! functions evaluate the relations in their original form so the solutions
//! can be checked independently.

use super::{ControlError, GainSet};
use crate::linalg::{self, Matrix, Vector};
use crate::robot::DynamicsTerms;

/// Tracking errors around the reference trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackingSignals {
    pub e: Vector,
    pub edot: Vector,
    pub epsilon: Vector,
    pub xdot_e: Vector,
    pub xddot_e: Vector,
}

pub fn tracking_signals(
    x: &Vector,
    xdot: &Vector,
    x_r: &Vector,
    xr_dot: &Vector,
    xr_ddot: &Vector,
    alpha: f64,
) -> TrackingSignals {
    let e = x - x_r;
    let edot = xdot - xr_dot;
    TrackingSignals {
        epsilon: &edot + &e * alpha,
        xdot_e: xr_dot - &e * alpha,
        xddot_e: xr_ddot - &edot * alpha,
        e,
        edot,
    }
}

/// Composite tracking error `ė + αe` alone.
pub fn tracking_error(x: &Vector, xdot: &Vector, x_r: &Vector, xr_dot: &Vector, alpha: f64) -> Vector {
    (xdot - xr_dot) + (x - x_r) * alpha
}

/// Feedback part `v = M ẍ_e + C ẋ_e + G − Γ ε`.
pub fn feedback_control(terms: &DynamicsTerms, sig: &TrackingSignals, gamma: &Matrix) -> Vector {
    &terms.mass * &sig.xddot_e + &terms.coriolis * &sig.xdot_e + &terms.gravity - gamma * &sig.epsilon
}

/// Learned feedforward force and impedance.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimates {
    pub force: Vector,
    pub stiffness: Matrix,
    pub damping: Matrix,
}

impl Estimates {
    pub fn zeros(dim: usize) -> Self {
        Self { force: Vector::zeros(dim), stiffness: Matrix::zeros(dim, dim), damping: Matrix::zeros(dim, dim) }
    }
}

/// Feedforward part `w = −F − K_S x − K_D ẋ`.
pub fn feedforward_control(est: &Estimates, x: &Vector, xdot: &Vector) -> Vector {
    -&est.force - &est.stiffness * x - &est.damping * xdot
}

fn leak(gains: &GainSet, q: &Matrix) -> Matrix {
    Matrix::identity(gains.dim(), gains.dim()) + q * gains.beta()
}

fn solve_leak(gains: &GainSet, q: &Matrix, rhs: &Matrix, law: &'static str) -> Result<Matrix, ControlError> {
    linalg::solve_matrix(&leak(gains, q), rhs).ok_or(ControlError::SolverFailure { law })
}

/// Stiffness and damping laws
/// `K_S(t) − K_S(t−T) = Q_S[ε xᵀ − β K_S(t)]`,
/// `K_D(t) − K_D(t−T) = Q_D[ε ẋᵀ − β K_D(t)]`.
pub fn adapt_impedance(
    prev_stiffness: &Matrix,
    prev_damping: &Matrix,
    epsilon: &Vector,
    x: &Vector,
    xdot: &Vector,
    gains: &GainSet,
) -> Result<(Matrix, Matrix), ControlError> {
    let ks_rhs = prev_stiffness + gains.q_s() * epsilon * x.transpose();
    let kd_rhs = prev_damping + gains.q_d() * epsilon * xdot.transpose();
    Ok((
        solve_leak(gains, gains.q_s(), &ks_rhs, "stiffness")?,
        solve_leak(gains, gains.q_d(), &kd_rhs, "damping")?,
    ))
}

/// Force law without the trajectory coupling:
/// `F(t) − F(t−T) = Q_F[ε − β F(t)]`.
pub fn adapt_force(prev_force: &Vector, epsilon: &Vector, gains: &GainSet) -> Result<Vector, ControlError> {
    linalg::solve(&leak(gains, gains.q_f()), &(prev_force + gains.q_f() * epsilon))
        .ok_or(ControlError::SolverFailure { law: "force" })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForceTrajectoryUpdate {
    pub delta_xi: Vector,
    pub force: Vector,
    pub xi: Vector,
}

/// Jointly solves
/// `δξ_r = L⁻ᵀQ_r(F_d − F(t) − ξ_r(t−T) − δξ_r)` and
/// `F(t) − F(t−T) = Q_F[ε − β F(t) + Q_rᵀ δξ_r]`.
pub fn adapt_trajectory_and_force(
    epsilon: &Vector,
    desired_force: &Vector,
    prev_force: &Vector,
    prev_xi: &Vector,
    gains: &GainSet,
) -> Result<ForceTrajectoryUpdate, ControlError> {
    let n = gains.dim();
    let a = gains.trajectory_gain();
    let eye = Matrix::identity(n, n);
    let mut system = Matrix::zeros(2 * n, 2 * n);
    system.view_mut((0, 0), (n, n)).copy_from(&(&eye + &a));
    system.view_mut((0, n), (n, n)).copy_from(&a);
    system.view_mut((n, 0), (n, n)).copy_from(&(-(gains.q_f() * gains.q_r().transpose())));
    system.view_mut((n, n), (n, n)).copy_from(&leak(gains, gains.q_f()));
    let mut rhs = Vector::zeros(2 * n);
    rhs.rows_mut(0, n).copy_from(&(&a * (desired_force - prev_xi)));
    rhs.rows_mut(n, n).copy_from(&(prev_force + gains.q_f() * epsilon));

    let lu = system.clone().lu();
    let failure = ControlError::SolverFailure { law: "force/trajectory" };
    let mut z = lu.solve(&rhs).ok_or(failure.clone())?;
    // One refinement sweep removes most of the LU rounding.
    let correction = lu.solve(&(&rhs - &system * &z)).ok_or(failure.clone())?;
    z += correction;
    if !linalg::all_finite(z.iter()) {
        return Err(failure);
    }
    let delta_xi = z.rows(0, n).into_owned();
    let force = z.rows(n, n).into_owned();
    Ok(ForceTrajectoryUpdate { xi: prev_xi + &delta_xi, delta_xi, force })
}

/// How the visco-elastic reference increment is turned into a reference
/// trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReferenceMode {
    /// Enforces `ξ_r(t) = K_S(t) x_r(t) + D(t) ẋ_r(t)` on the whole reference,
    /// with `D` the learned damping pushed to at most `−damping_floor`, and
    /// integrates it by backward Euler.
    #[default]
    Consistent,
    /// Integrates the increment relation `δξ_r = K_S δx_r + K_D δẋ_r` alone:
    /// a semi-implicit Euler step when `σ_min(K_D) ≥ κ`, the algebraic solve
    /// `(K_S + κI)⁻¹ δξ_r` otherwise.
    Increment,
}

/// Inputs for one reference update. Quantities marked `prev_period` are the
/// samples from one period earlier, `last_*` are from the previous step.
#[derive(Debug, Clone, Copy)]
pub struct ReferenceInputs<'a> {
    pub delta_xi: &'a Vector,
    pub stiffness: &'a Matrix,
    pub damping: &'a Matrix,
    pub last_delta_xr: &'a Vector,
    pub prev_period_xi: &'a Vector,
    pub prev_period_xr: &'a Vector,
    pub prev_period_xr_dot: &'a Vector,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceUpdate {
    pub delta_xr: Vector,
    pub delta_xr_dot: Vector,
    pub x_r: Vector,
    pub xr_dot: Vector,
}

pub fn integrate_reference(
    input: &ReferenceInputs<'_>,
    mode: ReferenceMode,
    gains: &GainSet,
) -> Result<ReferenceUpdate, ControlError> {
    let n = gains.dim();
    let h = input.step;
    let failure = ControlError::SolverFailure { law: "reference" };
    let delta_xr = match mode {
        ReferenceMode::Consistent => {
            let d = linalg::clamp_negative(input.damping, gains.damping_floor());
            let mismatch =
                input.prev_period_xi - input.stiffness * input.prev_period_xr - &d * input.prev_period_xr_dot;
            let lhs = &d / h + input.stiffness;
            let rhs = input.delta_xi + mismatch + (&d / h) * input.last_delta_xr;
            linalg::solve(&lhs, &rhs).ok_or(failure)?
        }
        ReferenceMode::Increment => {
            if linalg::min_singular_value(input.damping) >= gains.kappa() {
                let lhs = input.damping / h + input.stiffness;
                let rhs = input.delta_xi + (input.damping / h) * input.last_delta_xr;
                linalg::solve(&lhs, &rhs).ok_or(failure)?
            } else {
                let lhs = input.stiffness + Matrix::identity(n, n) * gains.kappa();
                linalg::solve(&lhs, input.delta_xi).ok_or(failure)?
            }
        }
    };
    let delta_xr_dot = (&delta_xr - input.last_delta_xr) / h;
    Ok(ReferenceUpdate {
        x_r: input.prev_period_xr + &delta_xr,
        xr_dot: input.prev_period_xr_dot + &delta_xr_dot,
        delta_xr,
        delta_xr_dot,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoDampingUpdate {
    pub force: Vector,
    pub stiffness: Matrix,
    pub delta_xr: Vector,
    pub x_r: Vector,
}

const NEWTON_MAX_ITER: usize = 50;
const NEWTON_TOL: f64 = 1e-13;

/// Damping-free variant, solved jointly for `F(t)`, `K_S(t)` and `δx_r`:
/// `δx_r = L⁻ᵀQ_r(F_d − F(t) − K_S(t) x_r(t))`,
/// `F(t) − F(t−T) = Q_F(ε − β F(t) + Q_rᵀ δx_r)`,
/// `K_S(t) − K_S(t−T) = Q_S(ε xᵀ − β K_S(t) + Q_rᵀ δx_r x_r(t)ᵀ)`,
/// with `x_r(t) = x_r(t−T) + δx_r`. The stiffness law makes the system
/// polynomial in `δx_r`, so it is solved by Newton's method.
pub fn adapt_no_damping(
    epsilon: &Vector,
    x: &Vector,
    desired_force: &Vector,
    prev_force: &Vector,
    prev_stiffness: &Matrix,
    prev_xr: &Vector,
    gains: &GainSet,
) -> Result<NoDampingUpdate, ControlError> {
    let n = gains.dim();
    let a = gains.trajectory_gain();
    let failure = ControlError::SolverFailure { law: "no-damping" };
    let pf_inv = leak(gains, gains.q_f()).try_inverse().ok_or(failure.clone())?;
    let ps_inv = leak(gains, gains.q_s()).try_inverse().ok_or(failure.clone())?;
    let qs_qr = gains.q_s() * gains.q_r().transpose();
    let qf_qr = gains.q_f() * gains.q_r().transpose();
    let ks_base = prev_stiffness + gains.q_s() * epsilon * x.transpose();
    let f_base = prev_force + gains.q_f() * epsilon;

    let evaluate = |dx: &Vector| {
        let x_r = prev_xr + dx;
        let force = &pf_inv * (&f_base + &qf_qr * dx);
        let stiffness = &ps_inv * (&ks_base + &qs_qr * dx * x_r.transpose());
        let residual = dx - &a * (desired_force - &force - &stiffness * &x_r);
        (residual, force, stiffness, x_r)
    };

    let scale = 1.0 + desired_force.amax() + prev_force.amax() + (prev_stiffness * prev_xr).amax();
    let mut dx = Vector::zeros(n);
    for _ in 0..NEWTON_MAX_ITER {
        let (residual, force, stiffness, x_r) = evaluate(&dx);
        if !linalg::all_finite(residual.iter()) {
            return Err(failure);
        }
        if residual.amax() <= NEWTON_TOL * scale {
            return Ok(NoDampingUpdate { force, stiffness, delta_xr: dx, x_r });
        }
        let d_ksxr = &ps_inv
            * (&ks_base + &qs_qr * x_r.norm_squared() + &qs_qr * &dx * x_r.transpose() * 2.0);
        let jac = Matrix::identity(n, n) + &a * (&pf_inv * &qf_qr + d_ksxr);
        let step = linalg::solve(&jac, &residual).ok_or(failure.clone())?;
        // Backtrack until the residual shrinks; plain Newton can overshoot
        // on the cubic stiffness term far from the root.
        let current = residual.norm();
        let mut scale_step = 1.0;
        let mut candidate = &dx - &step;
        while evaluate(&candidate).0.norm() >= current && scale_step > 1e-6 {
            scale_step *= 0.5;
            candidate = &dx - &step * scale_step;
        }
        dx = candidate;
    }
    Err(failure)
}

/// Largest violation of the impedance laws at the given solution.
pub fn impedance_residual(
    stiffness: &Matrix,
    damping: &Matrix,
    prev_stiffness: &Matrix,
    prev_damping: &Matrix,
    epsilon: &Vector,
    x: &Vector,
    xdot: &Vector,
    gains: &GainSet,
) -> f64 {
    let beta = gains.beta();
    let rs = stiffness - prev_stiffness - gains.q_s() * (epsilon * x.transpose() - stiffness * beta);
    let rd = damping - prev_damping - gains.q_d() * (epsilon * xdot.transpose() - damping * beta);
    rs.amax().max(rd.amax())
}

/// Largest violation of the coupled force/trajectory laws.
pub fn trajectory_force_residual(
    update: &ForceTrajectoryUpdate,
    prev_force: &Vector,
    prev_xi: &Vector,
    epsilon: &Vector,
    desired_force: &Vector,
    gains: &GainSet,
) -> f64 {
    let a = gains.trajectory_gain();
    let traj = &update.delta_xi - &a * (desired_force - &update.force - prev_xi - &update.delta_xi);
    let force = &update.force
        - prev_force
        - gains.q_f() * (epsilon - &update.force * gains.beta() + gains.q_r().transpose() * &update.delta_xi);
    let xi = &update.xi - prev_xi - &update.delta_xi;
    traj.amax().max(force.amax()).max(xi.amax())
}

/// Largest violation of the plain force law.
pub fn force_residual(force: &Vector, prev_force: &Vector, epsilon: &Vector, gains: &GainSet) -> f64 {
    (force - prev_force - gains.q_f() * (epsilon - force * gains.beta())).amax()
}

/// Largest violation of the damping-free laws.
pub fn no_damping_residual(
    update: &NoDampingUpdate,
    prev_force: &Vector,
    prev_stiffness: &Matrix,
    prev_xr: &Vector,
    epsilon: &Vector,
    x: &Vector,
    desired_force: &Vector,
    gains: &GainSet,
) -> f64 {
    let a = gains.trajectory_gain();
    let qr_t = gains.q_r().transpose();
    let beta = gains.beta();
    let dx = &update.delta_xr;
    let traj = dx - &a * (desired_force - &update.force - &update.stiffness * &update.x_r);
    let force = &update.force - prev_force - gains.q_f() * (epsilon - &update.force * beta + &qr_t * dx);
    let stiff = &update.stiffness
        - prev_stiffness
        - gains.q_s() * (epsilon * x.transpose() - &update.stiffness * beta + &qr_t * dx * update.x_r.transpose());
    let pos = &update.x_r - prev_xr - dx;
    traj.amax().max(force.amax()).max(stiff.amax()).max(pos.amax())
}

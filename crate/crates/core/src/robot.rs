//! Rigid-body robot models and their operational-space dynamics.
//!
//! The models expose joint-space terms; [`operational_dynamics`] maps them into
//! the task frame where the controller works.

use crate::linalg::{self, Matrix, Vector};
use thiserror::Error;

pub const DEFAULT_SINGULAR_THRESHOLD: f64 = 1e-6;
pub const MAX_CONDITION: f64 = 1e12;
pub const STANDARD_GRAVITY: f64 = 9.81;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("singular configuration: |det J| = {det:.3e} below threshold {threshold:.1e}")]
    SingularConfiguration { det: f64, threshold: f64 },
    #[error("inertia matrix ill-conditioned (condition estimate {condition:.3e})")]
    IllConditioned { condition: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    pub q: Vector,
    pub qdot: Vector,
}

impl JointState {
    pub fn new(q: Vector, qdot: Vector) -> Self {
        Self { q, qdot }
    }

    pub fn at_rest(q: Vector) -> Self {
        let n = q.len();
        Self { q, qdot: Vector::zeros(n) }
    }

    pub fn is_finite(&self) -> bool {
        linalg::all_finite(self.q.iter().chain(self.qdot.iter()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskState {
    pub x: Vector,
    pub xdot: Vector,
}

/// Inertia, Coriolis/centrifugal matrix and gravity vector, either in joint
/// space or in the operational space depending on where they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsTerms {
    pub mass: Matrix,
    pub coriolis: Matrix,
    pub gravity: Vector,
}

/// Capabilities a non-redundant robot model has to provide.
pub trait RobotModel: Send + Sync + std::fmt::Debug {
    fn dof(&self) -> usize;
    fn forward_kinematics(&self, q: &Vector) -> Vector;
    /// Jacobian `∂x/∂q` and its time derivative along `qdot`.
    fn jacobian(&self, q: &Vector, qdot: &Vector) -> (Matrix, Matrix);
    /// Joint-space `M_q`, `C_q` (Christoffel form) and `G_q`.
    fn joint_dynamics(&self, q: &Vector, qdot: &Vector) -> DynamicsTerms;
    fn singular_threshold(&self) -> f64 {
        DEFAULT_SINGULAR_THRESHOLD
    }

    fn is_singular(&self, q: &Vector) -> bool {
        let (j, _) = self.jacobian(q, &Vector::zeros(self.dof()));
        j.determinant().abs() < self.singular_threshold()
    }

    fn task_state(&self, state: &JointState) -> TaskState {
        let (j, _) = self.jacobian(&state.q, &state.qdot);
        TaskState { x: self.forward_kinematics(&state.q), xdot: j * &state.qdot }
    }

    fn kinetic_energy(&self, state: &JointState) -> f64 {
        let m = self.joint_dynamics(&state.q, &state.qdot).mass;
        0.5 * state.qdot.dot(&(m * &state.qdot))
    }
}

/// `n`-dimensional point mass with identity kinematics and an optional constant
/// gravity load.
#[derive(Debug, Clone, PartialEq)]
pub struct PointMass {
    pub mass: f64,
    pub gravity: Vector,
}

impl PointMass {
    pub fn new(mass: f64, dof: usize) -> Self {
        Self { mass, gravity: Vector::zeros(dof) }
    }

    pub fn with_gravity(mass: f64, gravity: Vector) -> Self {
        Self { mass, gravity }
    }
}

impl RobotModel for PointMass {
    fn dof(&self) -> usize {
        self.gravity.len()
    }

    fn forward_kinematics(&self, q: &Vector) -> Vector {
        q.clone()
    }

    fn jacobian(&self, _q: &Vector, _qdot: &Vector) -> (Matrix, Matrix) {
        let n = self.dof();
        (Matrix::identity(n, n), Matrix::zeros(n, n))
    }

    fn joint_dynamics(&self, _q: &Vector, _qdot: &Vector) -> DynamicsTerms {
        let n = self.dof();
        DynamicsTerms {
            mass: Matrix::identity(n, n) * self.mass,
            coriolis: Matrix::zeros(n, n),
            gravity: self.gravity.clone(),
        }
    }
}

/// Planar two-link arm moving in a vertical plane, links modelled as rods with
/// given centre-of-mass offsets and inertias about the centre of mass.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoLinkArm {
    pub masses: [f64; 2],
    pub lengths: [f64; 2],
    pub com: [f64; 2],
    pub inertias: [f64; 2],
    pub gravity: f64,
    pub singular_threshold: f64,
}

impl TwoLinkArm {
    /// Uniform rods: centre of mass at mid-length and `I = m l² / 12`.
    pub fn uniform(masses: [f64; 2], lengths: [f64; 2]) -> Self {
        Self {
            masses,
            lengths,
            com: [lengths[0] / 2.0, lengths[1] / 2.0],
            inertias: [
                masses[0] * lengths[0] * lengths[0] / 12.0,
                masses[1] * lengths[1] * lengths[1] / 12.0,
            ],
            gravity: STANDARD_GRAVITY,
            singular_threshold: DEFAULT_SINGULAR_THRESHOLD,
        }
    }
}

impl Default for TwoLinkArm {
    fn default() -> Self {
        Self::uniform([1.0, 1.0], [1.0, 1.0])
    }
}

impl RobotModel for TwoLinkArm {
    fn dof(&self) -> usize {
        2
    }

    fn forward_kinematics(&self, q: &Vector) -> Vector {
        let [l1, l2] = self.lengths;
        let q12 = q[0] + q[1];
        Vector::from_vec(vec![
            l1 * q[0].cos() + l2 * q12.cos(),
            l1 * q[0].sin() + l2 * q12.sin(),
        ])
    }

    fn jacobian(&self, q: &Vector, qdot: &Vector) -> (Matrix, Matrix) {
        let [l1, l2] = self.lengths;
        let (s1, c1) = q[0].sin_cos();
        let (s12, c12) = (q[0] + q[1]).sin_cos();
        let w1 = qdot[0];
        let w12 = qdot[0] + qdot[1];
        let j = Matrix::from_row_slice(
            2,
            2,
            &[-l1 * s1 - l2 * s12, -l2 * s12, l1 * c1 + l2 * c12, l2 * c12],
        );
        let jdot = Matrix::from_row_slice(
            2,
            2,
            &[
                -l1 * c1 * w1 - l2 * c12 * w12,
                -l2 * c12 * w12,
                -l1 * s1 * w1 - l2 * s12 * w12,
                -l2 * s12 * w12,
            ],
        );
        (j, jdot)
    }

    fn joint_dynamics(&self, q: &Vector, qdot: &Vector) -> DynamicsTerms {
        let [m1, m2] = self.masses;
        let [l1, _] = self.lengths;
        let [lc1, lc2] = self.com;
        let [i1, i2] = self.inertias;
        let (s2, c2) = q[1].sin_cos();
        let m11 = m1 * lc1 * lc1 + i1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * c2) + i2;
        let m12 = m2 * (lc2 * lc2 + l1 * lc2 * c2) + i2;
        let m22 = m2 * lc2 * lc2 + i2;
        // Christoffel symbols of the first kind collapse to a single coefficient.
        let h = -m2 * l1 * lc2 * s2;
        let coriolis = Matrix::from_row_slice(
            2,
            2,
            &[h * qdot[1], h * (qdot[0] + qdot[1]), -h * qdot[0], 0.0],
        );
        let c1 = q[0].cos();
        let c12 = (q[0] + q[1]).cos();
        let g = self.gravity;
        let g2 = m2 * lc2 * g * c12;
        let gravity = Vector::from_vec(vec![(m1 * lc1 + m2 * l1) * g * c1 + g2, g2]);
        DynamicsTerms {
            mass: Matrix::from_row_slice(2, 2, &[m11, m12, m12, m22]),
            coriolis,
            gravity,
        }
    }

    fn singular_threshold(&self) -> f64 {
        self.singular_threshold
    }
}

/// Built-in models behind one concrete type, convenient for configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum Robot {
    PointMass(PointMass),
    TwoLink(TwoLinkArm),
}

impl Robot {
    fn inner(&self) -> &dyn RobotModel {
        match self {
            Robot::PointMass(m) => m,
            Robot::TwoLink(m) => m,
        }
    }
}

impl RobotModel for Robot {
    fn dof(&self) -> usize {
        self.inner().dof()
    }
    fn forward_kinematics(&self, q: &Vector) -> Vector {
        self.inner().forward_kinematics(q)
    }
    fn jacobian(&self, q: &Vector, qdot: &Vector) -> (Matrix, Matrix) {
        self.inner().jacobian(q, qdot)
    }
    fn joint_dynamics(&self, q: &Vector, qdot: &Vector) -> DynamicsTerms {
        self.inner().joint_dynamics(q, qdot)
    }
    fn singular_threshold(&self) -> f64 {
        self.inner().singular_threshold()
    }
}

fn checked_jacobian(
    model: &dyn RobotModel,
    q: &Vector,
    qdot: &Vector,
) -> Result<(Matrix, Matrix), DynamicsError> {
    let (j, jdot) = model.jacobian(q, qdot);
    let det = j.determinant();
    let threshold = model.singular_threshold();
    if !(det.abs() >= threshold) {
        return Err(DynamicsError::SingularConfiguration { det, threshold });
    }
    Ok((j, jdot))
}

/// Operational-space `M`, `C`, `G`:
/// `M = J⁻ᵀ M_q J⁻¹`, `C = J⁻ᵀ (C_q − M_q J⁻¹ J̇) J⁻¹`, `G = J⁻ᵀ G_q`.
pub fn operational_dynamics(
    model: &dyn RobotModel,
    q: &Vector,
    qdot: &Vector,
) -> Result<DynamicsTerms, DynamicsError> {
    let (j, jdot) = checked_jacobian(model, q, qdot)?;
    let joint = model.joint_dynamics(q, qdot);
    let det = j.determinant();
    let singular = || DynamicsError::SingularConfiguration { det, threshold: model.singular_threshold() };
    let j_inv = j.clone().try_inverse().ok_or_else(singular)?;
    let j_inv_t = j_inv.transpose();
    let mass = linalg::sym(&(&j_inv_t * &joint.mass * &j_inv));
    let coriolis = &j_inv_t * (&joint.coriolis - &joint.mass * &j_inv * &jdot) * &j_inv;
    let gravity = &j_inv_t * &joint.gravity;
    Ok(DynamicsTerms { mass, coriolis, gravity })
}

/// Task acceleration `ẍ = M⁻¹(u + f − C ẋ − G)`.
pub fn forward_accel(
    terms: &DynamicsTerms,
    xdot: &Vector,
    u: &Vector,
    f: &Vector,
) -> Result<Vector, DynamicsError> {
    let condition = linalg::condition_number(&terms.mass);
    if !(condition <= MAX_CONDITION) {
        return Err(DynamicsError::IllConditioned { condition });
    }
    let rhs = u + f - &terms.coriolis * xdot - &terms.gravity;
    linalg::solve(&terms.mass, &rhs).ok_or(DynamicsError::IllConditioned { condition })
}

/// Joint acceleration for task-space force `u + f`:
/// `q̈ = M_q⁻¹(Jᵀ(u + f) − C_q q̇ − G_q)`.
pub fn joint_accel(
    model: &dyn RobotModel,
    state: &JointState,
    force: &Vector,
) -> Result<Vector, DynamicsError> {
    let (j, _) = checked_jacobian(model, &state.q, &state.qdot)?;
    let terms = model.joint_dynamics(&state.q, &state.qdot);
    let tau = j.transpose() * force;
    let rhs = tau - &terms.coriolis * &state.qdot - &terms.gravity;
    let condition = linalg::condition_number(&terms.mass);
    if !(condition <= MAX_CONDITION) {
        return Err(DynamicsError::IllConditioned { condition });
    }
    linalg::solve(&terms.mass, &rhs).ok_or(DynamicsError::IllConditioned { condition })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_row_slice(xs)
    }

    fn arm() -> TwoLinkArm {
        TwoLinkArm::default()
    }

    #[test]
    fn forward_kinematics_reference_points() {
        let a = arm();
        assert_relative_eq!(a.forward_kinematics(&v(&[0.0, 0.0])), v(&[2.0, 0.0]), epsilon = 1e-12);
        assert_relative_eq!(a.forward_kinematics(&v(&[FRAC_PI_2, 0.0])), v(&[0.0, 2.0]), epsilon = 1e-12);
        assert_relative_eq!(a.forward_kinematics(&v(&[0.0, FRAC_PI_2])), v(&[1.0, 1.0]), epsilon = 1e-12);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let a = arm();
        let q = v(&[0.0, FRAC_PI_2]);
        let (j, jdot) = a.jacobian(&q, &Vector::zeros(2));
        assert_relative_eq!(j, Matrix::from_row_slice(2, 2, &[-1.0, -1.0, 1.0, 0.0]), epsilon = 1e-12);
        assert_eq!(jdot, Matrix::zeros(2, 2));
        let d = 1e-6;
        for col in 0..2 {
            let mut qp = q.clone();
            let mut qm = q.clone();
            qp[col] += d;
            qm[col] -= d;
            let fd = (a.forward_kinematics(&qp) - a.forward_kinematics(&qm)) / (2.0 * d);
            assert_relative_eq!(fd, j.column(col).into_owned(), epsilon = 1e-6);
        }
    }

    #[test]
    fn jacobian_derivative_matches_finite_differences() {
        let a = arm();
        let q = v(&[0.4, 1.1]);
        let qdot = v(&[0.7, -0.3]);
        let d = 1e-6;
        let (jp, _) = a.jacobian(&(&q + &qdot * d), &qdot);
        let (jm, _) = a.jacobian(&(&q - &qdot * d), &qdot);
        let (_, jdot) = a.jacobian(&q, &qdot);
        assert_relative_eq!((jp - jm) / (2.0 * d), jdot, epsilon = 1e-7);
    }

    #[test]
    fn point_mass_has_identity_kinematics() {
        let p = PointMass::new(1.0, 3);
        let q = v(&[0.3, -2.0, 5.0]);
        let (j, jdot) = p.jacobian(&q, &v(&[1.0, 2.0, 3.0]));
        assert_eq!(j, Matrix::identity(3, 3));
        assert_eq!(jdot, Matrix::zeros(3, 3));
        let jd = p.joint_dynamics(&q, &q);
        assert_eq!(jd.mass, Matrix::identity(3, 3));
        assert_eq!(jd.coriolis, Matrix::zeros(3, 3));
        let op = operational_dynamics(&p, &q, &q).unwrap();
        assert_eq!(op, jd);
    }

    #[test]
    fn joint_mass_matrix_at_straight_elbow() {
        let jd = arm().joint_dynamics(&v(&[0.3, 0.0]), &v(&[0.0, 0.0]));
        let expected = Matrix::from_row_slice(2, 2, &[2.6667, 0.8333, 0.8333, 0.3333]);
        assert_relative_eq!(jd.mass, expected, epsilon = 1e-3);
        assert_eq!(jd.coriolis, Matrix::zeros(2, 2));
    }

    #[test]
    fn mass_matrix_is_kinetic_energy_hessian() {
        let a = arm();
        let q = v(&[0.2, 0.0]);
        let ke = |qd: &Vector| a.kinetic_energy(&JointState::new(q.clone(), qd.clone()));
        let d = 1e-3;
        let mass = a.joint_dynamics(&q, &Vector::zeros(2)).mass;
        for r in 0..2 {
            for c in 0..2 {
                let e = |sr: f64, sc: f64| {
                    let mut qd = Vector::zeros(2);
                    qd[r] += sr * d;
                    qd[c] += sc * d;
                    ke(&qd)
                };
                let hess = (e(1.0, 1.0) - e(1.0, -1.0) - e(-1.0, 1.0) + e(-1.0, -1.0)) / (4.0 * d * d);
                assert_relative_eq!(hess, mass[(r, c)], epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn energy_equivalence_at_elbow_right_angle() {
        let a = arm();
        let q = v(&[0.0, FRAC_PI_2]);
        let qdot = v(&[0.1, -0.2]);
        let op = operational_dynamics(&a, &q, &qdot).unwrap();
        let ts = a.task_state(&JointState::new(q.clone(), qdot.clone()));
        let joint = 0.5 * qdot.dot(&(a.joint_dynamics(&q, &qdot).mass * &qdot));
        let task = 0.5 * ts.xdot.dot(&(&op.mass * &ts.xdot));
        assert!((joint - task).abs() <= 1e-9);
    }

    #[test]
    fn fully_extended_arm_is_singular() {
        let err = operational_dynamics(&arm(), &v(&[0.0, 0.0]), &v(&[0.0, 0.0])).unwrap_err();
        assert!(matches!(err, DynamicsError::SingularConfiguration { .. }));
        assert!(arm().is_singular(&v(&[1.0, 0.0])));
        assert!(!arm().is_singular(&v(&[1.0, 0.5])));
    }

    #[test]
    fn forward_accel_reference_cases() {
        let id = DynamicsTerms {
            mass: Matrix::identity(2, 2),
            coriolis: Matrix::zeros(2, 2),
            gravity: Vector::zeros(2),
        };
        let a = forward_accel(&id, &v(&[0.0, 0.0]), &v(&[1.0, 0.0]), &Vector::zeros(2)).unwrap();
        assert_eq!(a, v(&[1.0, 0.0]));

        let heavy = DynamicsTerms {
            mass: Matrix::identity(2, 2) * 2.0,
            coriolis: Matrix::zeros(2, 2),
            gravity: v(&[0.0, 9.81]),
        };
        let a = forward_accel(&heavy, &v(&[3.0, -1.0]), &v(&[0.0, 9.81]), &Vector::zeros(2)).unwrap();
        assert_eq!(a, Vector::zeros(2));
    }

    #[test]
    fn forward_accel_rejects_ill_conditioned_inertia() {
        let terms = DynamicsTerms {
            mass: Matrix::from_diagonal(&v(&[1.0, 1e-14])),
            coriolis: Matrix::zeros(2, 2),
            gravity: Vector::zeros(2),
        };
        let err = forward_accel(&terms, &Vector::zeros(2), &Vector::zeros(2), &Vector::zeros(2));
        assert!(matches!(err, Err(DynamicsError::IllConditioned { .. })));
    }

    fn central_mdot(a: &TwoLinkArm, q: &Vector, qdot: &Vector) -> Matrix {
        let d = 1e-4;
        let m = |s: f64| operational_dynamics(a, &(q + qdot * s), qdot).unwrap().mass;
        (m(-2.0 * d) - m(2.0 * d) + (m(d) - m(-d)) * 8.0) / (12.0 * d)
    }

    proptest! {
        #[test]
        fn forward_accel_satisfies_equation_of_motion(
            entries in proptest::collection::vec(-1.0f64..1.0, 14),
        ) {
            let b = Matrix::from_row_slice(2, 2, &entries[0..4]);
            let mass = &b * b.transpose() + Matrix::identity(2, 2);
            let terms = DynamicsTerms {
                mass,
                coriolis: Matrix::from_row_slice(2, 2, &entries[4..8]),
                gravity: v(&entries[8..10]),
            };
            let xdot = v(&entries[10..12]);
            let u = v(&entries[12..14]);
            let f = v(&[entries[0] - entries[5], entries[3]]);
            let xddot = forward_accel(&terms, &xdot, &u, &f).unwrap();
            let residual = &terms.mass * xddot + &terms.coriolis * &xdot + &terms.gravity - u - f;
            prop_assert!(residual.amax() <= 1e-10);
        }

        #[test]
        fn operational_inertia_is_symmetric_and_skew_identity_holds(
            q1 in -3.0f64..3.0, q2 in 0.4f64..2.7,
            w1 in -1.0f64..1.0, w2 in -1.0f64..1.0,
            z1 in -1.0f64..1.0, z2 in -1.0f64..1.0,
        ) {
            let a = arm();
            let q = v(&[q1, q2]);
            let qdot = v(&[w1, w2]);
            let (j, _) = a.jacobian(&q, &qdot);
            let xdot = j * &qdot;
            let op = operational_dynamics(&a, &q, &qdot).unwrap();
            prop_assert!(linalg::asymmetry(&op.mass) <= 1e-10);
            let mdot = central_mdot(&a, &q, &qdot);
            let z = v(&[z1, z2]);
            let skew = z.dot(&((mdot - &op.coriolis * 2.0) * &z));
            prop_assert!(skew.abs() <= 1e-8, "skew residual {}", skew);
            let joint = 0.5 * qdot.dot(&(a.joint_dynamics(&q, &qdot).mass * &qdot));
            let task = 0.5 * xdot.dot(&(&op.mass * &xdot));
            prop_assert!((joint - task).abs() <= 1e-9);
        }

        #[test]
        fn joint_skew_identity_holds(q2 in -3.0f64..3.0, w1 in -2.0f64..2.0, w2 in -2.0f64..2.0) {
            let a = arm();
            let q = v(&[0.1, q2]);
            let qdot = v(&[w1, w2]);
            let d = 1e-5;
            let m = |s: f64| a.joint_dynamics(&(&q + &qdot * s), &qdot).mass;
            let mdot = (m(d) - m(-d)) / (2.0 * d);
            let n = mdot - a.joint_dynamics(&q, &qdot).coriolis * 2.0;
            prop_assert!((&n + n.transpose()).amax() <= 1e-8);
        }
    }
}

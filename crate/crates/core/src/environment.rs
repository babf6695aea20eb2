//! Ground-truth periodic visco-elastic environment.
//!
//! The interaction force acting on the robot is
//! `f = F₀*(t) + K_S*(t)(x − x₀*(t)) + K_D*(t) ẋ`. All components repeat
//! exactly with the period `T`, since they are either constant or truncated
//! Fourier series with fundamental `2π/T`.

use crate::linalg::{self, Matrix, Vector};
use std::f64::consts::TAU;
use thiserror::Error;

pub const MAX_HARMONICS: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvironmentError {
    #[error("period must be positive and finite, got {0}")]
    InvalidPeriod(f64),
    #[error("{component}: at most {MAX_HARMONICS} harmonics are supported, got {count}")]
    TooManyHarmonics { component: &'static str, count: usize },
    #[error("{component}: cosine and sine coefficient lists differ in length")]
    HarmonicMismatch { component: &'static str },
    #[error("{component}: expected dimension {expected}, got {found}")]
    DimensionMismatch { component: &'static str, expected: usize, found: usize },
    #[error("environment parameters vary with time; no closed-form desired position exists")]
    NonConstantEnvironment,
    #[error("environment stiffness is singular")]
    SingularStiffness,
}

/// Values a periodic profile can take.
pub trait PeriodicValue: Clone + PartialEq + std::fmt::Debug {
    fn shape(&self) -> (usize, usize);
    fn add_scaled(&mut self, scale: f64, other: &Self);
}

impl PeriodicValue for Vector {
    fn shape(&self) -> (usize, usize) {
        (self.len(), 1)
    }
    fn add_scaled(&mut self, scale: f64, other: &Self) {
        self.axpy(scale, other, 1.0);
    }
}

impl PeriodicValue for Matrix {
    fn shape(&self) -> (usize, usize) {
        (self.nrows(), self.ncols())
    }
    fn add_scaled(&mut self, scale: f64, other: &Self) {
        *self += other * scale;
    }
}

/// A `T`-periodic signal: a constant or `a₀ + Σ aₖ cos(kωt) + bₖ sin(kωt)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Periodic<V> {
    Constant(V),
    Fourier { mean: V, cos: Vec<V>, sin: Vec<V> },
}

impl<V: PeriodicValue> Periodic<V> {
    pub fn constant(value: V) -> Self {
        Periodic::Constant(value)
    }

    pub fn mean(&self) -> &V {
        match self {
            Periodic::Constant(v) => v,
            Periodic::Fourier { mean, .. } => mean,
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Periodic::Constant(_) => true,
            Periodic::Fourier { mean, cos, sin } => cos
                .iter()
                .chain(sin.iter())
                .all(|c| c == &zero_like(mean)),
        }
    }

    pub fn harmonics(&self) -> usize {
        match self {
            Periodic::Constant(_) => 0,
            Periodic::Fourier { cos, .. } => cos.len(),
        }
    }

    fn validate(&self, component: &'static str, shape: (usize, usize)) -> Result<(), EnvironmentError> {
        let check = |v: &V| {
            let s = v.shape();
            if s != shape {
                Err(EnvironmentError::DimensionMismatch { component, expected: shape.0, found: s.0 })
            } else {
                Ok(())
            }
        };
        match self {
            Periodic::Constant(v) => check(v),
            Periodic::Fourier { mean, cos, sin } => {
                if cos.len() != sin.len() {
                    return Err(EnvironmentError::HarmonicMismatch { component });
                }
                if cos.len() > MAX_HARMONICS {
                    return Err(EnvironmentError::TooManyHarmonics { component, count: cos.len() });
                }
                check(mean)?;
                cos.iter().chain(sin.iter()).try_for_each(check)
            }
        }
    }

    /// Evaluates the signal at `t`. The phase is reduced modulo `period` first
    /// so that `t` and `t + T` give the same value up to rounding of `t` itself.
    pub fn eval(&self, t: f64, period: f64) -> V {
        match self {
            Periodic::Constant(v) => v.clone(),
            Periodic::Fourier { mean, cos, sin } => {
                let phase = TAU * (t.rem_euclid(period) / period);
                let mut out = mean.clone();
                for (k, (a, b)) in cos.iter().zip(sin).enumerate() {
                    let arg = (k + 1) as f64 * phase;
                    out.add_scaled(arg.cos(), a);
                    out.add_scaled(arg.sin(), b);
                }
                out
            }
        }
    }

    /// First and second time derivatives.
    pub fn derivatives(&self, t: f64, period: f64) -> (V, V) {
        let zero = zero_like(self.mean());
        match self {
            Periodic::Constant(_) => (zero.clone(), zero),
            Periodic::Fourier { cos, sin, .. } => {
                let omega = TAU / period;
                let phase = TAU * (t.rem_euclid(period) / period);
                let (mut d1, mut d2) = (zero.clone(), zero);
                for (k, (a, b)) in cos.iter().zip(sin).enumerate() {
                    let kw = (k + 1) as f64 * omega;
                    let (s, c) = ((k + 1) as f64 * phase).sin_cos();
                    d1.add_scaled(-kw * s, a);
                    d1.add_scaled(kw * c, b);
                    d2.add_scaled(-kw * kw * c, a);
                    d2.add_scaled(-kw * kw * s, b);
                }
                (d1, d2)
            }
        }
    }
}

fn zero_like<V: PeriodicValue>(v: &V) -> V {
    let mut z = v.clone();
    z.add_scaled(-1.0, v);
    z
}

/// Effective parameters `F* = F₀* − K_S* x₀*`, `K_S*`, `K_D*`.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveForceParams {
    pub force: Vector,
    pub stiffness: Matrix,
    pub damping: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentProfile {
    period: f64,
    pub force: Periodic<Vector>,
    pub stiffness: Periodic<Matrix>,
    pub damping: Periodic<Matrix>,
    pub rest_position: Periodic<Vector>,
}

impl EnvironmentProfile {
    pub fn new(
        period: f64,
        force: Periodic<Vector>,
        stiffness: Periodic<Matrix>,
        damping: Periodic<Matrix>,
        rest_position: Periodic<Vector>,
    ) -> Result<Self, EnvironmentError> {
        if !(period.is_finite() && period > 0.0) {
            return Err(EnvironmentError::InvalidPeriod(period));
        }
        let n = force.mean().len();
        force.validate("force", (n, 1))?;
        stiffness.validate("stiffness", (n, n))?;
        damping.validate("damping", (n, n))?;
        rest_position.validate("rest_position", (n, 1))?;
        Ok(Self { period, force, stiffness, damping, rest_position })
    }

    /// No environment at all: `f ≡ 0`.
    pub fn free_space(dim: usize, period: f64) -> Result<Self, EnvironmentError> {
        Self::new(
            period,
            Periodic::Constant(Vector::zeros(dim)),
            Periodic::Constant(Matrix::zeros(dim, dim)),
            Periodic::Constant(Matrix::zeros(dim, dim)),
            Periodic::Constant(Vector::zeros(dim)),
        )
    }

    /// Isotropic constant spring-damper with rest position at the origin.
    pub fn wall(dim: usize, period: f64, stiffness: f64, damping: f64) -> Result<Self, EnvironmentError> {
        Self::new(
            period,
            Periodic::Constant(Vector::zeros(dim)),
            Periodic::Constant(Matrix::identity(dim, dim) * stiffness),
            Periodic::Constant(Matrix::identity(dim, dim) * damping),
            Periodic::Constant(Vector::zeros(dim)),
        )
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn dim(&self) -> usize {
        self.force.mean().len()
    }

    pub fn is_constant(&self) -> bool {
        self.force.is_constant()
            && self.stiffness.is_constant()
            && self.damping.is_constant()
            && self.rest_position.is_constant()
    }

    pub fn interaction_force(&self, t: f64, x: &Vector, xdot: &Vector) -> Vector {
        let t_period = self.period;
        let f0 = self.force.eval(t, t_period);
        let ks = self.stiffness.eval(t, t_period);
        let kd = self.damping.eval(t, t_period);
        let x0 = self.rest_position.eval(t, t_period);
        f0 + ks * (x - x0) + kd * xdot
    }

    /// Privileged access to the effective parameters, for diagnostics only.
    pub fn truth(&self, t: f64) -> EffectiveForceParams {
        let t_period = self.period;
        let ks = self.stiffness.eval(t, t_period);
        let force = self.force.eval(t, t_period) - &ks * self.rest_position.eval(t, t_period);
        EffectiveForceParams { force, stiffness: ks, damping: self.damping.eval(t, t_period) }
    }

    /// Constant position `x_d` at which the environment pushes back with `F_d`.
    pub fn steady_desired_position(&self, desired_force: &Vector) -> Result<Vector, EnvironmentError> {
        if !self.is_constant() {
            return Err(EnvironmentError::NonConstantEnvironment);
        }
        let truth = self.truth(0.0);
        if linalg::min_singular_value(&truth.stiffness) < 1e-12 {
            return Err(EnvironmentError::SingularStiffness);
        }
        linalg::solve(&truth.stiffness, &(desired_force - truth.force)).ok_or(EnvironmentError::SingularStiffness)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn s(v: f64) -> Vector {
        Vector::from_element(1, v)
    }

    fn sm(v: f64) -> Matrix {
        Matrix::from_element(1, 1, v)
    }

    fn wall() -> EnvironmentProfile {
        EnvironmentProfile::wall(1, 2.0, -100.0, -2.0).unwrap()
    }

    fn fourier_wall() -> EnvironmentProfile {
        EnvironmentProfile::new(
            2.0,
            Periodic::Constant(s(0.0)),
            Periodic::Fourier { mean: sm(-100.0), cos: vec![sm(-20.0)], sin: vec![sm(0.0)] },
            Periodic::Constant(sm(-2.0)),
            Periodic::Constant(s(0.0)),
        )
        .unwrap()
    }

    #[test]
    fn free_space_exerts_no_force() {
        let env = EnvironmentProfile::free_space(2, 1.0).unwrap();
        let f = env.interaction_force(0.37, &Vector::from_vec(vec![1.0, -4.0]), &Vector::from_vec(vec![3.0, 2.0]));
        assert_eq!(f, Vector::zeros(2));
    }

    #[test]
    fn wall_force_at_penetration() {
        let f = wall().interaction_force(0.0, &s(0.05), &s(0.0));
        assert_relative_eq!(f[0], -5.0, epsilon = 1e-12);
    }

    #[test]
    fn effective_force_from_rest_position() {
        let env = EnvironmentProfile::new(
            2.0,
            Periodic::Constant(s(0.0)),
            Periodic::Constant(sm(-100.0)),
            Periodic::Constant(sm(0.0)),
            Periodic::Constant(s(0.01)),
        )
        .unwrap();
        assert_relative_eq!(env.truth(0.3).force[0], 1.0, epsilon = 1e-12);
        assert_eq!(env.truth(0.3), env.truth(1.7));
    }

    #[test]
    fn desired_position_oracle() {
        assert_relative_eq!(wall().steady_desired_position(&s(-5.0)).unwrap()[0], 0.05, epsilon = 1e-15);
        assert_eq!(wall().steady_desired_position(&s(0.0)).unwrap()[0], 0.0);
        let env = EnvironmentProfile::new(
            2.0,
            Periodic::Constant(s(0.0)),
            Periodic::Constant(sm(-100.0)),
            Periodic::Constant(sm(0.0)),
            Periodic::Constant(s(0.02)),
        )
        .unwrap();
        let xd = env.steady_desired_position(&s(0.0)).unwrap();
        assert_relative_eq!(xd[0], 0.02, epsilon = 1e-15);
        let truth = env.truth(0.0);
        let rendered = truth.force + truth.stiffness * xd;
        assert!(rendered[0].abs() <= 1e-10);
    }

    #[test]
    fn desired_position_needs_constant_invertible_environment() {
        assert_eq!(
            fourier_wall().steady_desired_position(&s(-5.0)),
            Err(EnvironmentError::NonConstantEnvironment)
        );
        let free = EnvironmentProfile::free_space(1, 2.0).unwrap();
        assert_eq!(free.steady_desired_position(&s(-5.0)), Err(EnvironmentError::SingularStiffness));
    }

    #[test]
    fn construction_rejects_bad_profiles() {
        let too_many = Periodic::Fourier { mean: sm(1.0), cos: vec![sm(0.0); 6], sin: vec![sm(0.0); 6] };
        let err = EnvironmentProfile::new(
            1.0,
            Periodic::Constant(s(0.0)),
            too_many,
            Periodic::Constant(sm(0.0)),
            Periodic::Constant(s(0.0)),
        );
        assert!(matches!(err, Err(EnvironmentError::TooManyHarmonics { .. })));
        assert!(matches!(EnvironmentProfile::free_space(1, 0.0), Err(EnvironmentError::InvalidPeriod(_))));
        let err = EnvironmentProfile::new(
            1.0,
            Periodic::Constant(s(0.0)),
            Periodic::Constant(Matrix::zeros(2, 2)),
            Periodic::Constant(sm(0.0)),
            Periodic::Constant(s(0.0)),
        );
        assert!(matches!(err, Err(EnvironmentError::DimensionMismatch { component: "stiffness", .. })));
    }

    #[test]
    fn fourier_derivatives_match_finite_differences() {
        let p = Periodic::Fourier { mean: s(0.3), cos: vec![s(0.2), s(-0.1)], sin: vec![s(0.05), s(0.4)] };
        let (t, period, d) = (0.7, 2.0, 1e-5);
        let (d1, d2) = p.derivatives(t, period);
        let fd1 = (p.eval(t + d, period) - p.eval(t - d, period)) / (2.0 * d);
        let fd2 = (p.eval(t + d, period) - p.eval(t, period) * 2.0 + p.eval(t - d, period)) / (d * d);
        assert_relative_eq!(d1[0], fd1[0], epsilon = 1e-8);
        assert_relative_eq!(d2[0], fd2[0], epsilon = 1e-4);
    }

    #[test]
    fn zero_harmonic_fourier_counts_as_constant() {
        let p = Periodic::Fourier { mean: sm(1.0), cos: vec![sm(0.0)], sin: vec![sm(0.0)] };
        assert!(p.is_constant());
        assert!(!fourier_wall().is_constant());
    }

    proptest! {
        #[test]
        fn fourier_force_is_periodic(t in 0.0f64..100.0, x in -0.2f64..0.2, xd in -1.0f64..1.0) {
            let env = fourier_wall();
            let a = env.interaction_force(t, &s(x), &s(xd));
            let b = env.interaction_force(t + env.period(), &s(x), &s(xd));
            prop_assert!((a[0] - b[0]).abs() <= 1e-12);
            let ta = env.truth(t);
            let tb = env.truth(t + env.period());
            prop_assert!((ta.stiffness - tb.stiffness).amax() <= 1e-12);
        }

        #[test]
        fn expanded_and_effective_forms_agree(
            t in 0.0f64..10.0, x in -0.2f64..0.2, xd in -1.0f64..1.0, x0 in -0.1f64..0.1, f0 in -3.0f64..3.0,
        ) {
            let env = EnvironmentProfile::new(
                2.0,
                Periodic::Fourier { mean: s(f0), cos: vec![s(1.0)], sin: vec![s(-0.5)] },
                Periodic::Fourier { mean: sm(-100.0), cos: vec![sm(-20.0)], sin: vec![sm(3.0)] },
                Periodic::Constant(sm(-2.0)),
                Periodic::Fourier { mean: s(x0), cos: vec![s(0.01)], sin: vec![s(0.0)] },
            ).unwrap();
            let truth = env.truth(t);
            let effective = truth.force + truth.stiffness * s(x) + truth.damping * s(xd);
            let expanded = env.interaction_force(t, &s(x), &s(xd));
            prop_assert!((effective[0] - expanded[0]).abs() <= 1e-12);
        }
    }
}

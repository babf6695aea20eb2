//! Cost functionals and stability diagnostics evaluated along traces, using
//! privileged access to the environment's true parameters.

use crate::controller::{GainSet, Variant};
use crate::environment::{EffectiveForceParams, EnvironmentProfile};
use crate::linalg::{Matrix, Vector};
use crate::sim::{ScenarioConfig, StepRecord, Trace};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("window is not a uniformly sampled period on the step grid")]
    WindowMisaligned,
    #[error("environment parameters vary with time; no desired position oracle")]
    NonConstantEnvironment,
}

/// Per-period decrement tolerance `1e-3 · max(J, 1)`.
pub fn tol_slack(previous_cost: f64) -> f64 {
    1e-3 * previous_cost.max(1.0)
}

/// Trapezoid rule on uniformly spaced samples.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    match values {
        [] | [_] => 0.0,
        [first, .., last] => h * (values.iter().sum::<f64>() - 0.5 * (first + last)),
    }
}

fn check_window(window: &[StepRecord], h: f64) -> Result<(), AnalysisError> {
    if window.len() < 2 {
        return Err(AnalysisError::WindowMisaligned);
    }
    let aligned = window.windows(2).all(|p| ((p[1].t - p[0].t) - h).abs() <= 1e-9 * h.max(1.0));
    if aligned {
        Ok(())
    } else {
        Err(AnalysisError::WindowMisaligned)
    }
}

/// Inverses of the adaptation gains used as cost weights.
#[derive(Debug, Clone)]
pub struct CostWeights {
    q_f_inv: Matrix,
    q_s_inv: Matrix,
    q_d_inv: Matrix,
    q_r_t: Matrix,
}

impl CostWeights {
    pub fn new(gains: &GainSet) -> Self {
        let inv = |m: &Matrix| m.clone().try_inverse().expect("validated gains are invertible");
        Self {
            q_f_inv: inv(gains.q_f()),
            q_s_inv: inv(gains.q_s()),
            q_d_inv: inv(gains.q_d()),
            q_r_t: gains.q_r().transpose(),
        }
    }
}

fn quad(v: &Vector, w: &Matrix) -> f64 {
    v.dot(&(w * v))
}

fn trace_quad(k: &Matrix, w: &Matrix) -> f64 {
    (k.transpose() * w * k).trace()
}

/// Parameter-error integrand `½[F̃ᵀQ_F⁻¹F̃ + tr(K̃_SᵀQ_S⁻¹K̃_S) + tr(K̃_DᵀQ_D⁻¹K̃_D)]`,
/// leaving out the damping term when `with_damping` is false.
pub fn jc_integrand(rec: &StepRecord, truth: &EffectiveForceParams, w: &CostWeights, with_damping: bool) -> f64 {
    let f_err = &truth.force - &rec.force_est;
    let ks_err = &truth.stiffness - &rec.stiffness;
    let mut total = quad(&f_err, &w.q_f_inv) + trace_quad(&ks_err, &w.q_s_inv);
    if with_damping {
        total += trace_quad(&(&truth.damping - &rec.damping), &w.q_d_inv);
    }
    0.5 * total
}

/// `ξ_d = F_d − F*`, the visco-elastic force the environment must supply on
/// top of `F*` to produce the desired force.
pub fn desired_visco_elastic(desired_force: &Vector, truth: &EffectiveForceParams) -> Vector {
    desired_force - &truth.force
}

pub fn jr_integrand(rec: &StepRecord, truth: &EffectiveForceParams, w: &CostWeights) -> f64 {
    let err = &rec.xi_r - desired_visco_elastic(&rec.f_d, truth);
    0.5 * quad(&err, &w.q_r_t)
}

pub fn cost_jc(window: &[StepRecord], env: &EnvironmentProfile, gains: &GainSet, h: f64) -> Result<f64, AnalysisError> {
    check_window(window, h)?;
    let w = CostWeights::new(gains);
    let values: Vec<f64> = window.iter().map(|r| jc_integrand(r, &env.truth(r.t), &w, true)).collect();
    Ok(trapezoid(&values, h))
}

/// Parameter cost without the damping term, for damping-free runs.
pub fn cost_jc_prime(
    window: &[StepRecord],
    env: &EnvironmentProfile,
    gains: &GainSet,
    h: f64,
) -> Result<f64, AnalysisError> {
    check_window(window, h)?;
    let w = CostWeights::new(gains);
    let values: Vec<f64> = window.iter().map(|r| jc_integrand(r, &env.truth(r.t), &w, false)).collect();
    Ok(trapezoid(&values, h))
}

/// Tracking cost `½ εᵀ M ε`.
pub fn cost_je(epsilon: &Vector, mass: &Matrix) -> f64 {
    0.5 * quad(epsilon, mass)
}

pub fn cost_jr(window: &[StepRecord], env: &EnvironmentProfile, gains: &GainSet, h: f64) -> Result<f64, AnalysisError> {
    check_window(window, h)?;
    let w = CostWeights::new(gains);
    let values: Vec<f64> = window.iter().map(|r| jr_integrand(r, &env.truth(r.t), &w)).collect();
    Ok(trapezoid(&values, h))
}

/// Position-reference cost of damping-free runs, together with whether its
/// weight `K_S*ᵀQ_rᵀ` is sign-definite (otherwise the value carries no sign
/// guarantee).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrimeCost {
    pub value: f64,
    pub sign_definite: bool,
}

pub fn cost_jr_prime(
    window: &[StepRecord],
    env: &EnvironmentProfile,
    desired_position: &Vector,
    gains: &GainSet,
    h: f64,
) -> Result<PrimeCost, AnalysisError> {
    check_window(window, h)?;
    if !env.is_constant() {
        return Err(AnalysisError::NonConstantEnvironment);
    }
    let weight = env.truth(0.0).stiffness.transpose() * gains.q_r().transpose();
    let eig = crate::linalg::sym(&weight).symmetric_eigenvalues();
    let sign_definite = eig.iter().all(|&l| l > 0.0) || eig.iter().all(|&l| l < 0.0);
    let values: Vec<f64> = window
        .iter()
        .map(|r| 0.5 * quad(&(&r.x_r - desired_position), &weight))
        .collect();
    Ok(PrimeCost { value: trapezoid(&values, h), sign_definite })
}

fn increment_norm_sq(rec: &StepRecord, variant: Variant) -> f64 {
    match variant {
        Variant::Full => rec.delta_xi.norm_squared(),
        Variant::NoDamping => rec.delta_xr.norm_squared(),
    }
}

/// Pointwise value of the sufficient condition for a non-increasing cost:
/// `λ_Γ‖ε‖² + λ_L‖δ‖² + β(‖F̃‖² + ‖K̃_S‖² + ‖K̃_D‖²) − β(‖F̃‖‖F*‖ + ‖K̃_S‖‖K_S*‖ + ‖K̃_D‖‖K_D*‖)`
/// with Frobenius norms. `δ` is `δξ_r`, or `δx_r` for damping-free runs.
pub fn sufficient_condition(rec: &StepRecord, truth: &EffectiveForceParams, gains: &GainSet, variant: Variant) -> f64 {
    let beta = gains.beta();
    let f_err = (&truth.force - &rec.force_est).norm();
    let ks_err = (&truth.stiffness - &rec.stiffness).norm();
    let kd_err = (&truth.damping - &rec.damping).norm();
    gains.lambda_gamma() * rec.eps.norm_squared()
        + gains.lambda_l() * increment_norm_sq(rec, variant)
        + beta * (f_err * f_err + ks_err * ks_err + kd_err * kd_err)
        - beta * (f_err * truth.force.norm() + ks_err * truth.stiffness.norm() + kd_err * truth.damping.norm())
}

/// Pointwise slack of the boundedness bound:
/// `(β/2)(‖F*‖² + ‖K_S*‖² + ‖K_D*‖²) − [λ_Γ‖ε‖² + λ_L‖δ‖² + (β/2)(‖F̃‖² + ‖K̃_S‖² + ‖K̃_D‖²)]`.
pub fn boundedness_slack(rec: &StepRecord, truth: &EffectiveForceParams, gains: &GainSet, variant: Variant) -> f64 {
    let half_beta = 0.5 * gains.beta();
    let bound = truth.force.norm_squared() + truth.stiffness.norm_squared() + truth.damping.norm_squared();
    let errors = (&truth.force - &rec.force_est).norm_squared()
        + (&truth.stiffness - &rec.stiffness).norm_squared()
        + (&truth.damping - &rec.damping).norm_squared();
    half_beta * bound
        - (gains.lambda_gamma() * rec.eps.norm_squared()
            + gains.lambda_l() * increment_norm_sq(rec, variant)
            + half_beta * errors)
}

pub fn sufficient_condition_margin(
    window: &[StepRecord],
    env: &EnvironmentProfile,
    gains: &GainSet,
    variant: Variant,
) -> Vec<f64> {
    window.iter().map(|r| sufficient_condition(r, &env.truth(r.t), gains, variant)).collect()
}

pub fn boundedness_check(window: &[StepRecord], env: &EnvironmentProfile, gains: &GainSet, variant: Variant) -> Vec<f64> {
    window.iter().map(|r| boundedness_slack(r, &env.truth(r.t), gains, variant)).collect()
}

/// Largest `‖w + f‖` and largest `‖ε‖` over the window.
pub fn force_estimation_residual(window: &[StepRecord]) -> (f64, f64) {
    window.iter().fold((0.0f64, 0.0f64), |(wf, eps), r| {
        (wf.max((&r.w + &r.f).norm()), eps.max(r.eps.norm()))
    })
}

/// Summary of one period of a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodCosts {
    /// One-based period index.
    pub period: usize,
    pub j_c: f64,
    /// Tracking cost at the end of the period.
    pub j_e: f64,
    pub j_r: f64,
    pub j_c_prime: f64,
    pub j_r_prime: Option<PrimeCost>,
    /// `J_c + J_e + J_r`, or `J_c′ + J_e + J_r′` for damping-free runs when the
    /// position oracle exists.
    pub j: f64,
    pub delta_j: Option<f64>,
    pub rms_eps: f64,
    pub max_force_err: f64,
    pub mean_force: Vector,
    pub mean_position: Vector,
    pub max_w_plus_f: f64,
    pub max_f: f64,
    pub margin_min: f64,
    pub slack_min: f64,
}

fn mean_of(window: &[StepRecord], h: f64, period: f64, pick: impl Fn(&StepRecord) -> &Vector) -> Vector {
    let n = pick(&window[0]).len();
    let mut out = Vector::zeros(n);
    for i in 0..n {
        let values: Vec<f64> = window.iter().map(|r| pick(r)[i]).collect();
        out[i] = trapezoid(&values, h) / period;
    }
    out
}

fn period_costs(trace: &Trace, config: &ScenarioConfig, k: usize, weights: &CostWeights) -> PeriodCosts {
    let window = trace.period_window(k);
    let h = trace.step;
    let env = &config.environment;
    let gains = &config.gains;
    let truths: Vec<EffectiveForceParams> = window.iter().map(|r| env.truth(r.t)).collect();
    let integral = |f: &dyn Fn(&StepRecord, &EffectiveForceParams) -> f64| {
        let values: Vec<f64> = window.iter().zip(&truths).map(|(r, t)| f(r, t)).collect();
        trapezoid(&values, h)
    };
    let j_c = integral(&|r, t| jc_integrand(r, t, weights, true));
    let j_c_prime = integral(&|r, t| jc_integrand(r, t, weights, false));
    let j_r = integral(&|r, t| jr_integrand(r, t, weights));
    let end = window.last().expect("non-empty window");
    let j_e = cost_je(&end.eps, &end.mass);
    let j_r_prime = config
        .desired_position()
        .and_then(|xd| cost_jr_prime(window, env, &xd, gains, h).ok());
    let j = match (trace.variant, j_r_prime) {
        (Variant::Full, _) => j_c + j_e + j_r,
        (Variant::NoDamping, Some(p)) => j_c_prime + j_e + p.value,
        (Variant::NoDamping, None) => j_c_prime + j_e,
    };
    let rms_eps = (integral(&|r, _| r.eps.norm_squared()) / trace.period).sqrt();
    let max_force_err = window.iter().map(|r| (&r.f - &r.f_d).norm()).fold(0.0, f64::max);
    let (max_w_plus_f, _) = force_estimation_residual(window);
    let max_f = window.iter().map(|r| r.f.norm()).fold(0.0, f64::max);
    let margin_min = window
        .iter()
        .zip(&truths)
        .map(|(r, t)| sufficient_condition(r, t, gains, trace.variant))
        .fold(f64::INFINITY, f64::min);
    let slack_min = window
        .iter()
        .zip(&truths)
        .map(|(r, t)| boundedness_slack(r, t, gains, trace.variant))
        .fold(f64::INFINITY, f64::min);
    PeriodCosts {
        period: k + 1,
        j_c,
        j_e,
        j_r,
        j_c_prime,
        j_r_prime,
        j,
        delta_j: None,
        rms_eps,
        max_force_err,
        mean_force: mean_of(window, h, trace.period, |r| &r.f),
        mean_position: mean_of(window, h, trace.period, |r| &r.x),
        max_w_plus_f,
        max_f,
        margin_min,
        slack_min,
    }
}

/// One summary per period, with `delta_j` from the second period on.
pub fn per_period_report(trace: &Trace, config: &ScenarioConfig) -> Vec<PeriodCosts> {
    let weights = CostWeights::new(&config.gains);
    let mut out: Vec<PeriodCosts> = (0..trace.periods).map(|k| period_costs(trace, config, k, &weights)).collect();
    for k in 1..out.len() {
        out[k].delta_j = Some(out[k].j - out[k - 1].j);
    }
    out
}

/// Cost change over period `k` (zero-based, `k ≥ 1`) as the integral of the
/// pointwise difference between the integrands one period apart plus the
/// change of the endpoint tracking cost.
pub fn delta_j_pointwise(trace: &Trace, config: &ScenarioConfig, k: usize) -> f64 {
    assert!(k >= 1, "needs a previous period");
    let weights = CostWeights::new(&config.gains);
    let env = &config.environment;
    let with_damping = trace.variant == Variant::Full;
    let oracle = config.desired_position();
    let prime_weight = env.truth(0.0).stiffness.transpose() * config.gains.q_r().transpose();
    let integrand = |r: &StepRecord| {
        let truth = env.truth(r.t);
        let reference = match (trace.variant, &oracle) {
            (Variant::Full, _) => jr_integrand(r, &truth, &weights),
            (Variant::NoDamping, Some(xd)) => 0.5 * quad(&(&r.x_r - xd), &prime_weight),
            (Variant::NoDamping, None) => 0.0,
        };
        jc_integrand(r, &truth, &weights, with_damping) + reference
    };
    let now = trace.period_window(k);
    let before = trace.period_window(k - 1);
    let diffs: Vec<f64> = now.iter().zip(before).map(|(a, b)| integrand(a) - integrand(b)).collect();
    let je = |r: &StepRecord| cost_je(&r.eps, &r.mass);
    trapezoid(&diffs, trace.step) + je(now.last().unwrap()) - je(before.last().unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::GainParams;
    use crate::environment::Periodic;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn s(v: f64) -> Vector {
        Vector::from_element(1, v)
    }
    fn sm(v: f64) -> Matrix {
        Matrix::from_element(1, 1, v)
    }

    fn record(t: f64) -> StepRecord {
        let z = s(0.0);
        StepRecord {
            t,
            q: z.clone(),
            qdot: z.clone(),
            x: z.clone(),
            xdot: z.clone(),
            x_r: z.clone(),
            xr_dot: z.clone(),
            e: z.clone(),
            eps: z.clone(),
            eps_adapt: z.clone(),
            force_est: z.clone(),
            stiffness: sm(0.0),
            damping: sm(0.0),
            xi_r: z.clone(),
            delta_xi: z.clone(),
            delta_xr: z.clone(),
            f: z.clone(),
            f_d: z.clone(),
            u: z.clone(),
            v: z.clone(),
            w: z.clone(),
            mass: sm(1.0),
            gate_open: false,
        }
    }

    fn window(n: usize, h: f64, fill: impl Fn(&mut StepRecord)) -> Vec<StepRecord> {
        (0..=n)
            .map(|k| {
                let mut r = record(k as f64 * h);
                fill(&mut r);
                r
            })
            .collect()
    }

    fn gains(q: f64, beta: f64) -> GainSet {
        let mut p = GainParams::isotropic(1, 5.0, 20.0, q, q, 1.0);
        p.beta = beta;
        GainSet::new(p).unwrap()
    }

    fn env() -> EnvironmentProfile {
        EnvironmentProfile::new(
            2.0,
            Periodic::Constant(s(1.5)),
            Periodic::Constant(sm(-100.0)),
            Periodic::Constant(sm(-2.0)),
            Periodic::Constant(s(0.0)),
        )
        .unwrap()
    }

    #[test]
    fn perfect_estimates_cost_nothing() {
        let w = window(200, 0.01, |r| {
            r.force_est = s(1.5);
            r.stiffness = sm(-100.0);
            r.damping = sm(-2.0);
        });
        assert_eq!(cost_jc(&w, &env(), &gains(1.0, 0.0), 0.01).unwrap(), 0.0);
    }

    #[test]
    fn zero_state_parameter_cost_closed_form() {
        let w = window(200, 0.01, |_| {});
        let jc = cost_jc(&w, &env(), &gains(1.0, 0.0), 0.01).unwrap();
        assert_relative_eq!(jc, 0.5 * 2.0 * (1.5 * 1.5 + 100.0 * 100.0 + 4.0), max_relative = 1e-12);
        let halved = cost_jc(&w, &env(), &gains(2.0, 0.0), 0.01).unwrap();
        assert_relative_eq!(halved, jc / 2.0, max_relative = 1e-12);
        let jc_prime = cost_jc_prime(&w, &env(), &gains(1.0, 0.0), 0.01).unwrap();
        assert_relative_eq!(jc_prime, 0.5 * 2.0 * (1.5 * 1.5 + 100.0 * 100.0), max_relative = 1e-12);
    }

    #[test]
    fn misaligned_window_is_rejected() {
        let w = window(10, 0.01, |_| {});
        assert_eq!(cost_jc(&w, &env(), &gains(1.0, 0.0), 0.02), Err(AnalysisError::WindowMisaligned));
        assert_eq!(cost_jc(&w[..1], &env(), &gains(1.0, 0.0), 0.01), Err(AnalysisError::WindowMisaligned));
    }

    #[test]
    fn tracking_cost_reference_values() {
        assert_eq!(cost_je(&Vector::zeros(2), &Matrix::identity(2, 2)), 0.0);
        assert_eq!(cost_je(&Vector::from_vec(vec![1.0, 1.0]), &(Matrix::identity(2, 2) * 2.0)), 2.0);
    }

    #[test]
    fn reference_cost_closed_forms() {
        let e = env();
        // ξ_d = F_d − F* = −5 − 1.5.
        let w = window(200, 0.01, |r| {
            r.f_d = s(-5.0);
            r.xi_r = s(-6.5);
        });
        assert_eq!(cost_jr(&w, &e, &gains(1.0, 0.0), 0.01).unwrap(), 0.0);
        let delta = 0.3;
        let w = window(200, 0.01, |r| {
            r.f_d = s(-5.0);
            r.xi_r = s(-6.5 + delta);
        });
        let jr = cost_jr(&w, &e, &gains(1.0, 0.0), 0.01).unwrap();
        assert_relative_eq!(jr, 0.5 * delta * delta * 2.0, max_relative = 1e-12);
    }

    #[test]
    fn prime_reference_cost_closed_form_and_sign_flag() {
        let e = EnvironmentProfile::wall(1, 2.0, -100.0, 0.0).unwrap();
        let xd = s(0.05);
        let w = window(200, 0.01, |r| r.x_r = s(0.05));
        assert_eq!(cost_jr_prime(&w, &e, &xd, &gains(1.0, 0.0), 0.01).unwrap().value, 0.0);
        let delta = 0.01;
        let w = window(200, 0.01, |r| r.x_r = s(0.05 + delta));
        let p = cost_jr_prime(&w, &e, &xd, &gains(1.0, 0.0), 0.01).unwrap();
        assert_relative_eq!(p.value, -0.5 * 100.0 * delta * delta * 2.0, max_relative = 1e-12);
        assert!(p.sign_definite);
        let fourier = EnvironmentProfile::new(
            2.0,
            Periodic::Constant(s(0.0)),
            Periodic::Fourier { mean: sm(-100.0), cos: vec![sm(-20.0)], sin: vec![sm(0.0)] },
            Periodic::Constant(sm(0.0)),
            Periodic::Constant(s(0.0)),
        )
        .unwrap();
        assert_eq!(
            cost_jr_prime(&w, &fourier, &xd, &gains(1.0, 0.0), 0.01),
            Err(AnalysisError::NonConstantEnvironment)
        );
    }

    #[test]
    fn sufficient_condition_reference_cases() {
        let e = env();
        let truth = e.truth(0.0);
        let mut r = record(0.0);
        r.force_est = truth.force.clone();
        r.stiffness = truth.stiffness.clone();
        r.damping = truth.damping.clone();
        assert_eq!(sufficient_condition(&r, &truth, &gains(1.0, 1e-3), Variant::Full), 0.0);

        let mut r = record(0.0);
        r.eps = s(0.01);
        assert!(sufficient_condition(&r, &truth, &gains(1.0, 0.0), Variant::Full) > 0.0);
    }

    #[test]
    fn sufficient_condition_scalar_spot_check() {
        let e = env();
        let truth = e.truth(0.0);
        let g = gains(1.0, 0.02);
        let mut r = record(0.0);
        r.eps = s(0.3);
        r.delta_xi = s(-0.2);
        r.force_est = s(0.5);
        r.stiffness = sm(-80.0);
        r.damping = sm(1.0);
        let (fe, ke, de) = (1.0f64, 20.0f64, 3.0f64);
        let by_hand = 20.0 * 0.09 + 1.0 * 0.04 + 0.02 * (fe * fe + ke * ke + de * de)
            - 0.02 * (fe * 1.5 + ke * 100.0 + de * 2.0);
        assert_relative_eq!(sufficient_condition(&r, &truth, &g, Variant::Full), by_hand, max_relative = 1e-12);
    }

    #[test]
    fn boundedness_reference_cases() {
        let free = EnvironmentProfile::free_space(1, 2.0).unwrap();
        let r = record(0.0);
        assert_eq!(boundedness_slack(&r, &free.truth(0.0), &gains(1.0, 1e-3), Variant::Full), 0.0);
    }

    #[test]
    fn force_estimation_residual_on_consistent_trace() {
        let w = window(10, 0.1, |r| {
            r.f = s(-5.0);
            r.w = s(5.0);
        });
        assert_eq!(force_estimation_residual(&w), (0.0, 0.0));
    }

    #[test]
    fn trapezoid_is_second_order() {
        let f = |t: f64| (3.0 * t).sin() + t * t;
        let exact = (1.0 - 6.0f64.cos()) / 3.0 + 8.0 / 3.0;
        let err = |n: usize| {
            let h = 2.0 / n as f64;
            let v: Vec<f64> = (0..=n).map(|k| f(k as f64 * h)).collect();
            (trapezoid(&v, h) - exact).abs()
        };
        let ratio = err(100) / err(200);
        assert!((3.9..4.1).contains(&ratio), "ratio {ratio}");
    }

    proptest! {
        #[test]
        fn tracking_cost_eigenvalue_bound(a in -2.0f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0, e1 in -1.0f64..1.0, e2 in -1.0f64..1.0) {
            let m = Matrix::from_row_slice(2, 2, &[a, b, 0.0, c]);
            let mass = &m * m.transpose() + Matrix::identity(2, 2) * 0.1;
            let eps = Vector::from_vec(vec![e1, e2]);
            let lmin = mass.clone().symmetric_eigenvalues().min();
            prop_assert!(cost_je(&eps, &mass) >= 0.5 * lmin * eps.norm_squared() - 1e-12);
        }

        #[test]
        fn larger_lambda_gamma_never_raises_slack(eps in -1.0f64..1.0, f in -3.0f64..3.0) {
            let e = env();
            let truth = e.truth(0.0);
            let mut r = record(0.0);
            r.eps = s(eps);
            r.force_est = s(f);
            let mut p = GainParams::isotropic(1, 5.0, 20.0, 1.0, 1.0, 1.0);
            let base = boundedness_slack(&r, &truth, &GainSet::new(p.clone()).unwrap(), Variant::Full);
            p.gamma *= 2.0;
            let doubled = boundedness_slack(&r, &truth, &GainSet::new(p).unwrap(), Variant::Full);
            prop_assert!(doubled <= base + 1e-15);
        }
    }
}

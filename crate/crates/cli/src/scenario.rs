//! Scenario files: TOML with nested sections, mapped onto [`ScenarioConfig`].
//!
//! Matrices may be written as a scalar (`s·I`), a list (diagonal) or a list of
//! rows. Vectors may be a scalar (same value on every axis) or a list. Any
//! periodic quantity may instead be a table `{ mean = ..., cos = [...], sin = [...] }`
//! holding up to five harmonics of the scenario period.

// `!(a > b)` rejects NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use coadapt::controller::{DEFAULT_BETA, DEFAULT_DAMPING_FLOOR, DEFAULT_KAPPA};
use coadapt::sim::DEFAULT_DIVERGENCE_LIMIT;
use coadapt::{
    EnvironmentError, EnvironmentProfile, GainParams, GainSet, Gate, InitialReference, JointState, Matrix, Periodic,
    PointMass, ReferenceMode, Robot, ScenarioConfig, TwoLinkArm, Variant, Vector,
};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed scenario: {0}")]
    Syntax(String),
    #[error("{key}: {constraint}")]
    Invalid { key: String, constraint: String },
}

impl ScenarioError {
    fn invalid(key: impl Into<String>, constraint: impl Into<String>) -> Self {
        ScenarioError::Invalid { key: key.into(), constraint: constraint.into() }
    }

    /// Configuration key the error refers to, when there is one.
    pub fn key(&self) -> Option<&str> {
        match self {
            ScenarioError::Invalid { key, .. } => Some(key),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VectorSpec {
    Scalar(f64),
    Values(Vec<f64>),
}

impl VectorSpec {
    fn build(&self, n: usize, key: &str) -> Result<Vector, ScenarioError> {
        match self {
            VectorSpec::Scalar(v) => Ok(Vector::from_element(n, *v)),
            VectorSpec::Values(vs) if vs.len() == n => Ok(Vector::from_column_slice(vs)),
            VectorSpec::Values(vs) => Err(ScenarioError::invalid(key, format!("expected {n} values, got {}", vs.len()))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    /// `s·I`.
    Scalar(f64),
    Diagonal(Vec<f64>),
    Rows(Vec<Vec<f64>>),
}

impl MatrixSpec {
    fn build(&self, n: usize, key: &str) -> Result<Matrix, ScenarioError> {
        match self {
            MatrixSpec::Scalar(v) => Ok(Matrix::identity(n, n) * *v),
            MatrixSpec::Diagonal(d) if d.len() == n => Ok(Matrix::from_diagonal(&Vector::from_column_slice(d))),
            MatrixSpec::Diagonal(d) => Err(ScenarioError::invalid(key, format!("expected {n} diagonal entries, got {}", d.len()))),
            MatrixSpec::Rows(rows) => {
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(ScenarioError::invalid(key, format!("expected a {n}x{n} matrix")));
                }
                Ok(Matrix::from_fn(n, n, |i, j| rows[i][j]))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PeriodicSpec<T> {
    Plain(T),
    Fourier {
        mean: T,
        #[serde(default = "Vec::new")]
        cos: Vec<T>,
        #[serde(default = "Vec::new")]
        sin: Vec<T>,
    },
}

impl<T> PeriodicSpec<T> {
    fn build<V>(&self, key: &str, one: impl Fn(&T, &str) -> Result<V, ScenarioError>) -> Result<Periodic<V>, ScenarioError> {
        match self {
            PeriodicSpec::Plain(v) => Ok(Periodic::Constant(one(v, key)?)),
            PeriodicSpec::Fourier { mean, cos, sin } => {
                if cos.len() != sin.len() {
                    return Err(ScenarioError::invalid(key, "cos and sin need the same number of harmonics"));
                }
                let list = |xs: &[T], part: &str| {
                    xs.iter()
                        .enumerate()
                        .map(|(i, x)| one(x, &format!("{key}.{part}[{i}]")))
                        .collect::<Result<Vec<V>, _>>()
                };
                Ok(Periodic::Fourier {
                    mean: one(mean, &format!("{key}.mean"))?,
                    cos: list(cos, "cos")?,
                    sin: list(sin, "sin")?,
                })
            }
        }
    }
}

impl PeriodicSpec<VectorSpec> {
    fn vector(&self, n: usize, key: &str) -> Result<Periodic<Vector>, ScenarioError> {
        self.build(key, |v, k| v.build(n, k))
    }
}

impl PeriodicSpec<MatrixSpec> {
    fn matrix(&self, n: usize, key: &str) -> Result<Periodic<Matrix>, ScenarioError> {
        self.build(key, |m, k| m.build(n, k))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub period: f64,
    pub step: f64,
    pub periods: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum RobotSection {
    PointMass {
        mass: f64,
        dof: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gravity: Option<Vec<f64>>,
    },
    TwoLink {
        masses: [f64; 2],
        lengths: [f64; 2],
        /// Centre-of-mass offsets; mid-length when omitted.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        com: Option<[f64; 2]>,
        /// Inertias about the centre of mass; uniform rods when omitted.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        inertias: Option<[f64; 2]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gravity: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        singular_threshold: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSection {
    pub force: PeriodicSpec<VectorSpec>,
    pub stiffness: PeriodicSpec<MatrixSpec>,
    pub damping: PeriodicSpec<MatrixSpec>,
    pub rest_position: PeriodicSpec<VectorSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesiredSection {
    pub force: PeriodicSpec<VectorSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub q: VectorSpec,
    #[serde(default = "zero_vector")]
    pub qdot: VectorSpec,
}

fn zero_vector() -> VectorSpec {
    VectorSpec::Scalar(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceSection {
    Constant { value: VectorSpec },
    Line { start: VectorSpec, end: VectorSpec },
    Fourier {
        mean: VectorSpec,
        #[serde(default)]
        cos: Vec<VectorSpec>,
        #[serde(default)]
        sin: Vec<VectorSpec>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsSection {
    pub alpha: f64,
    pub gamma: MatrixSpec,
    pub q_f: MatrixSpec,
    pub q_s: MatrixSpec,
    pub q_d: MatrixSpec,
    pub q_r: MatrixSpec,
    pub l: MatrixSpec,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default = "default_damping_floor")]
    pub damping_floor: f64,
}

fn default_beta() -> f64 {
    DEFAULT_BETA
}
fn default_kappa() -> f64 {
    DEFAULT_KAPPA
}
fn default_damping_floor() -> f64 {
    DEFAULT_DAMPING_FLOOR
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum VariantName {
    #[default]
    Full,
    NoDamping,
}

impl From<VariantName> for Variant {
    fn from(v: VariantName) -> Self {
        match v {
            VariantName::Full => Variant::Full,
            VariantName::NoDamping => Variant::NoDamping,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceModeName {
    #[default]
    Consistent,
    Increment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GateSection {
    #[default]
    Simultaneous,
    AfterPeriods { periods: usize },
    EpsilonThreshold { threshold: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSection {
    #[serde(default)]
    pub variant: VariantName,
    #[serde(default)]
    pub reference_mode: ReferenceModeName,
    #[serde(default)]
    pub gate: GateSection,
    #[serde(default = "default_divergence_limit")]
    pub divergence_limit: f64,
}

impl Default for ControllerSection {
    fn default() -> Self {
        Self {
            variant: VariantName::default(),
            reference_mode: ReferenceModeName::default(),
            gate: GateSection::default(),
            divergence_limit: DEFAULT_DIVERGENCE_LIMIT,
        }
    }
}

fn default_divergence_limit() -> f64 {
    DEFAULT_DIVERGENCE_LIMIT
}

/// Direct image of a scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub time: TimeSection,
    pub robot: RobotSection,
    pub environment: EnvironmentSection,
    pub desired: DesiredSection,
    pub initial: InitialSection,
    pub reference: ReferenceSection,
    pub gains: GainsSection,
    #[serde(default)]
    pub controller: ControllerSection,
}

impl ScenarioFile {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        toml::from_str(text).map_err(|e| ScenarioError::Syntax(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario files always serialise")
    }

    /// Overrides a numeric entry addressed by a dotted key such as
    /// `gains.gamma` or `environment.stiffness`. The value replaces whatever
    /// was there, so matrices become `value·I`.
    pub fn set_number(&self, key: &str, value: f64) -> Result<Self, ScenarioError> {
        let mut doc = toml::Value::try_from(self).map_err(|e| ScenarioError::Syntax(e.to_string()))?;
        let parts: Vec<&str> = key.split('.').collect();
        let (last, parents) = parts.split_last().ok_or_else(|| ScenarioError::invalid(key, "empty key"))?;
        let mut table = doc.as_table_mut().expect("scenario is a table");
        for p in parents {
            table = table
                .get_mut(*p)
                .and_then(toml::Value::as_table_mut)
                .ok_or_else(|| ScenarioError::invalid(key, format!("no section `{p}`")))?;
        }
        let existing = table.get(*last).ok_or_else(|| ScenarioError::invalid(key, "unknown key"))?;
        let replacement = match existing {
            toml::Value::Integer(_) if value.fract() == 0.0 && value >= 0.0 => toml::Value::Integer(value as i64),
            toml::Value::Integer(_) => return Err(ScenarioError::invalid(key, "expects a non-negative integer")),
            _ => toml::Value::Float(value),
        };
        table.insert((*last).to_string(), replacement);
        doc.try_into().map_err(|e: toml::de::Error| ScenarioError::invalid(key, e.to_string()))
    }

    pub fn dof(&self) -> usize {
        match &self.robot {
            RobotSection::PointMass { dof, .. } => *dof,
            RobotSection::TwoLink { .. } => 2,
        }
    }

    /// Validates the file and builds the simulation configuration.
    pub fn build(&self) -> Result<ScenarioConfig, ScenarioError> {
        let n = self.dof();
        if n == 0 {
            return Err(ScenarioError::invalid("robot.dof", "must be >= 1"));
        }
        let robot = match &self.robot {
            RobotSection::PointMass { mass, gravity, .. } => {
                if !(*mass > 0.0) {
                    return Err(ScenarioError::invalid("robot.mass", "must be > 0"));
                }
                let g = match gravity {
                    Some(g) => VectorSpec::Values(g.clone()).build(n, "robot.gravity")?,
                    None => Vector::zeros(n),
                };
                Robot::PointMass(PointMass::with_gravity(*mass, g))
            }
            RobotSection::TwoLink { masses, lengths, com, inertias, gravity, singular_threshold } => {
                if masses.iter().chain(lengths).any(|v| !(*v > 0.0)) {
                    return Err(ScenarioError::invalid("robot", "link masses and lengths must be > 0"));
                }
                let mut arm = TwoLinkArm::uniform(*masses, *lengths);
                if let Some(c) = com {
                    arm.com = *c;
                }
                if let Some(i) = inertias {
                    arm.inertias = *i;
                }
                if let Some(g) = gravity {
                    arm.gravity = *g;
                }
                if let Some(s) = singular_threshold {
                    if !(*s > 0.0) {
                        return Err(ScenarioError::invalid("robot.singular_threshold", "must be > 0"));
                    }
                    arm.singular_threshold = *s;
                }
                Robot::TwoLink(arm)
            }
        };

        let t = &self.time;
        let env = &self.environment;
        let environment = EnvironmentProfile::new(
            t.period,
            env.force.vector(n, "environment.force")?,
            env.stiffness.matrix(n, "environment.stiffness")?,
            env.damping.matrix(n, "environment.damping")?,
            env.rest_position.vector(n, "environment.rest_position")?,
        )
        .map_err(environment_error)?;

        let g = &self.gains;
        let params = GainParams {
            alpha: g.alpha,
            gamma: g.gamma.build(n, "gains.gamma")?,
            q_f: g.q_f.build(n, "gains.q_f")?,
            q_s: g.q_s.build(n, "gains.q_s")?,
            q_d: g.q_d.build(n, "gains.q_d")?,
            q_r: g.q_r.build(n, "gains.q_r")?,
            l: g.l.build(n, "gains.l")?,
            beta: g.beta,
            kappa: g.kappa,
            damping_floor: g.damping_floor,
        };
        let gains = GainSet::new(params).map_err(|e| ScenarioError::invalid(format!("gains.{}", e.key), e.constraint))?;

        let desired_force = self.desired.force.vector(n, "desired.force")?;
        if desired_force.harmonics() > coadapt::environment::MAX_HARMONICS {
            return Err(ScenarioError::invalid("desired.force", "at most 5 harmonics"));
        }
        let initial_state = JointState::new(
            self.initial.q.build(n, "initial.q")?,
            self.initial.qdot.build(n, "initial.qdot")?,
        );
        let initial_reference = match &self.reference {
            ReferenceSection::Constant { value } => InitialReference::Constant(value.build(n, "reference.value")?),
            ReferenceSection::Line { start, end } => InitialReference::Line {
                start: start.build(n, "reference.start")?,
                end: end.build(n, "reference.end")?,
            },
            ReferenceSection::Fourier { mean, cos, sin } => {
                let spec = PeriodicSpec::Fourier { mean: mean.clone(), cos: cos.clone(), sin: sin.clone() };
                let p = spec.vector(n, "reference")?;
                if p.harmonics() > coadapt::environment::MAX_HARMONICS {
                    return Err(ScenarioError::invalid("reference", "at most 5 harmonics"));
                }
                InitialReference::Fourier(p)
            }
        };
        let c = &self.controller;
        let gate = match c.gate {
            GateSection::Simultaneous => Gate::Simultaneous,
            GateSection::AfterPeriods { periods } => Gate::AfterPeriods(periods),
            GateSection::EpsilonThreshold { threshold } => Gate::EpsilonThreshold(threshold),
        };
        let config = ScenarioConfig {
            robot,
            environment,
            gains,
            period: t.period,
            step: t.step,
            periods: t.periods,
            desired_force,
            initial_state,
            initial_reference,
            variant: c.variant.into(),
            gate,
            reference_mode: match c.reference_mode {
                ReferenceModeName::Consistent => ReferenceMode::Consistent,
                ReferenceModeName::Increment => ReferenceMode::Increment,
            },
            divergence_limit: c.divergence_limit,
        };
        config.validate().map_err(|e| match e {
            coadapt::ConfigError::NonIntegerPeriod { .. } => ScenarioError::invalid("T/h", "not integer"),
            coadapt::ConfigError::Invalid { key, constraint } => {
                ScenarioError::invalid(section_key(&key), constraint)
            }
        })?;
        Ok(config)
    }
}

fn section_key(key: &str) -> String {
    match key {
        "period" => "time.period".into(),
        "step" => "time.step".into(),
        "periods" => "time.periods".into(),
        "gate.threshold" => "controller.gate.threshold".into(),
        "divergence_limit" => "controller.divergence_limit".into(),
        "desired_force" => "desired.force".into(),
        "environment.period" => "time.period".into(),
        other => other.into(),
    }
}

fn environment_error(e: EnvironmentError) -> ScenarioError {
    match e {
        EnvironmentError::InvalidPeriod(_) => ScenarioError::invalid("time.period", "must be > 0"),
        EnvironmentError::TooManyHarmonics { component, .. }
        | EnvironmentError::HarmonicMismatch { component }
        | EnvironmentError::DimensionMismatch { component, .. } => {
            ScenarioError::invalid(format!("environment.{component}"), e.to_string())
        }
        other => ScenarioError::invalid("environment", other.to_string()),
    }
}

pub fn parse_scenario_str(text: &str) -> Result<ScenarioConfig, ScenarioError> {
    ScenarioFile::from_toml(text)?.build()
}

pub fn read_scenario_file(path: &Path) -> Result<ScenarioFile, ScenarioError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
    ScenarioFile::from_toml(&text)
}

pub fn parse_scenario(path: &Path) -> Result<ScenarioConfig, ScenarioError> {
    read_scenario_file(path)?.build()
}

/// Scenario files shipped with the crate, by name.
pub mod bundled {
    pub const WALL_1DOF: &str = include_str!("../scenarios/wall_1dof.scenario");
    pub const FREE_SPACE_1DOF: &str = include_str!("../scenarios/free_space_1dof.scenario");
    pub const SPRING_WALL_1DOF: &str = include_str!("../scenarios/spring_wall_1dof.scenario");
    pub const PERIODIC_WALL_1DOF: &str = include_str!("../scenarios/periodic_wall_1dof.scenario");
    pub const TWO_LINK_WALL: &str = include_str!("../scenarios/two_link_wall.scenario");

    pub const ALL: [(&str, &str); 5] = [
        ("wall_1dof", WALL_1DOF),
        ("free_space_1dof", FREE_SPACE_1DOF),
        ("spring_wall_1dof", SPRING_WALL_1DOF),
        ("periodic_wall_1dof", PERIODIC_WALL_1DOF),
        ("two_link_wall", TWO_LINK_WALL),
    ];
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wall() -> ScenarioFile {
        ScenarioFile::from_toml(bundled::WALL_1DOF).unwrap()
    }

    #[test]
    fn bundled_wall_parses_with_default_grid() {
        let cfg = wall().build().unwrap();
        assert_eq!(cfg.period, 2.0);
        assert_eq!(cfg.step, 0.001);
        assert_eq!(cfg.period_steps().unwrap(), 2000);
        assert_eq!(cfg.periods, 30);
    }

    #[test]
    fn every_bundled_scenario_builds() {
        for (name, text) in bundled::ALL {
            parse_scenario_str(text).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn negative_beta_is_rejected_with_key() {
        let err = wall().set_number("gains.beta", -0.1).unwrap().build().unwrap_err();
        assert_eq!(err.key(), Some("gains.beta"));
        assert!(err.to_string().contains(">= 0"), "{err}");
    }

    #[test]
    fn off_grid_step_is_rejected() {
        let err = wall().set_number("time.step", 0.0003).unwrap().build().unwrap_err();
        assert_eq!(err.to_string(), "T/h: not integer");
    }

    #[test]
    fn indefinite_gamma_is_reported() {
        let err = wall().set_number("gains.gamma", -1.0).unwrap().build().unwrap_err();
        assert_eq!(err.to_string(), "gains.gamma: not positive definite");
    }

    #[test]
    fn round_trip_through_text_preserves_everything() {
        for (name, text) in bundled::ALL {
            let file = ScenarioFile::from_toml(text).unwrap();
            let again = ScenarioFile::from_toml(&file.to_toml()).unwrap();
            assert_eq!(file, again, "{name}");
            assert_eq!(file.build().unwrap(), again.build().unwrap(), "{name}");
        }
    }

    #[test]
    fn matrix_shorthands() {
        assert_eq!(MatrixSpec::Scalar(2.0).build(2, "k").unwrap(), Matrix::identity(2, 2) * 2.0);
        assert_eq!(
            MatrixSpec::Diagonal(vec![1.0, 3.0]).build(2, "k").unwrap(),
            Matrix::from_diagonal(&Vector::from_vec(vec![1.0, 3.0]))
        );
        let rows = MatrixSpec::Rows(vec![vec![1.0, 2.0], vec![3.0, 4.0]]).build(2, "k").unwrap();
        assert_eq!(rows, Matrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        assert!(MatrixSpec::Diagonal(vec![1.0]).build(2, "k").is_err());
    }

    #[test]
    fn fourier_tables_parse() {
        let text = bundled::WALL_1DOF.replace(
            "stiffness = -100.0",
            "stiffness = { mean = -100.0, cos = [-20.0], sin = [0.0] }",
        );
        let cfg = parse_scenario_str(&text).unwrap();
        assert!(!cfg.environment.is_constant());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = bundled::WALL_1DOF.replace("alpha = 5.0", "alpha = 5.0\ngama = 3.0");
        assert!(matches!(ScenarioFile::from_toml(&text), Err(ScenarioError::Syntax(_))));
    }

    #[test]
    fn setting_unknown_key_fails() {
        assert!(wall().set_number("gains.zeta", 1.0).is_err());
        assert!(wall().set_number("nothing.here", 1.0).is_err());
    }
}

//! System, safe-set and scenario descriptions.
//!
//! Everything here is validated once at construction; downstream modules
//! assume consistent dimensions and well-formed covariances.
//!
//! The on-disk scenario format is JSON. Matrices are row-major arrays of
//! arrays; a bare number is accepted for 1×1 matrices, and a flat array is
//! read as a column for `B` and as a row for `H` and `controller.nominal_gain`.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::control::{ClfParams, Method1Params, NominalController};
use crate::linalg::{clip_psd, is_pd, is_psd, is_symmetric, quad_form};
use crate::{Error, Result};

const SYM_TOL: f64 = 1e-12;

/// `x_{t+1} = A x_t + B u_t + w_t`, `z_t = H x_t + v_t` with
/// `Cov(w) = Q`, `Cov(v) = R`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    h: DMatrix<f64>,
    q: DMatrix<f64>,
    r: DMatrix<f64>,
}

impl SystemModel {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        h: DMatrix<f64>,
        q: DMatrix<f64>,
        r: DMatrix<f64>,
    ) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || !a.is_square() {
            return Err(Error::invalid("system.A", format!("must be square and non-empty, got {:?}", a.shape())));
        }
        if b.nrows() != n || b.ncols() == 0 {
            return Err(Error::invalid("system.B", format!("must be {n}×m with m ≥ 1, got {:?}", b.shape())));
        }
        if h.ncols() != n || h.nrows() == 0 {
            return Err(Error::invalid("system.H", format!("must be n_y×{n}, got {:?}", h.shape())));
        }
        let ny = h.nrows();
        check_covariance("system.Q", &q, n)?;
        check_covariance("system.R", &r, ny)?;
        if !is_pd(&r) {
            return Err(Error::invalid("system.R", "must be positive definite"));
        }
        let q = clip_psd(&q);
        let r = clip_psd(&r);
        Ok(Self { a, b, h, q, r })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }
    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }
    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    /// State dimension.
    pub fn n(&self) -> usize {
        self.a.nrows()
    }
    /// Input dimension.
    pub fn m(&self) -> usize {
        self.b.ncols()
    }
    /// Output dimension.
    pub fn ny(&self) -> usize {
        self.h.nrows()
    }
}

fn check_covariance(field: &str, m: &DMatrix<f64>, dim: usize) -> Result<()> {
    if m.shape() != (dim, dim) {
        return Err(Error::invalid(field, format!("must be {dim}×{dim}, got {:?}", m.shape())));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(field, "contains non-finite entries"));
    }
    if !is_symmetric(m, SYM_TOL) {
        return Err(Error::invalid(field, "must be symmetric"));
    }
    if !is_psd(m) {
        return Err(Error::invalid(field, "must be positive semidefinite"));
    }
    Ok(())
}

/// Filtered mean and covariance of the state at `time_index`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefState {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub time_index: usize,
}

impl BeliefState {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>, time_index: usize) -> Result<Self> {
        let n = mean.len();
        if cov.shape() != (n, n) {
            return Err(Error::dim("belief covariance", format!("{n}×{n}"), format!("{:?}", cov.shape())));
        }
        Ok(Self {
            mean,
            cov: clip_psd(&cov),
            time_index,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// `h(x) = q^T x + r`.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpaceSafeSet {
    pub(crate) q: DVector<f64>,
    pub(crate) r: f64,
}

impl HalfSpaceSafeSet {
    pub fn new(q: DVector<f64>, r: f64) -> Result<Self> {
        if q.iter().all(|&v| v == 0.0) {
            return Err(Error::invalid("safe_set.q", "must not be the zero vector"));
        }
        if q.iter().any(|v| !v.is_finite()) || !r.is_finite() {
            return Err(Error::invalid("safe_set", "non-finite coefficients"));
        }
        Ok(Self { q, r })
    }

    pub fn q(&self) -> &DVector<f64> {
        &self.q
    }
    pub fn r(&self) -> f64 {
        self.r
    }
}

/// `h(x) = -(x - x_c)^T E (x - x_c) + r`.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipsoidSafeSet {
    pub(crate) e: DMatrix<f64>,
    pub(crate) center: DVector<f64>,
    pub(crate) r: f64,
}

impl EllipsoidSafeSet {
    pub fn new(e: DMatrix<f64>, center: DVector<f64>, r: f64) -> Result<Self> {
        let n = center.len();
        if e.shape() != (n, n) {
            return Err(Error::invalid("safe_set.E", format!("must be {n}×{n}, got {:?}", e.shape())));
        }
        if !is_symmetric(&e, SYM_TOL) || !is_pd(&e) {
            return Err(Error::invalid("safe_set.E", "must be symmetric positive definite"));
        }
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::invalid("safe_set.r", format!("must be positive, got {r}")));
        }
        Ok(Self { e, center, r })
    }

    pub fn e(&self) -> &DMatrix<f64> {
        &self.e
    }
    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }
    pub fn r(&self) -> f64 {
        self.r
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SafeSet {
    HalfSpace(HalfSpaceSafeSet),
    Ellipsoid(EllipsoidSafeSet),
}

impl SafeSet {
    pub fn dim(&self) -> usize {
        match self {
            SafeSet::HalfSpace(s) => s.q.len(),
            SafeSet::Ellipsoid(s) => s.center.len(),
        }
    }

    /// Barrier value; `x` lies in the safe set iff the result is `>= 0`.
    pub fn h_value(&self, x: &DVector<f64>) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::dim("h_value", self.dim(), x.len()));
        }
        Ok(match self {
            SafeSet::HalfSpace(s) => s.q.dot(x) + s.r,
            SafeSet::Ellipsoid(s) => {
                let d = x - &s.center;
                -quad_form(&s.e, &d) + s.r
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskParams {
    epsilon: f64,
    alpha: f64,
}

impl RiskParams {
    pub fn new(epsilon: f64, alpha: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::invalid("risk.epsilon", format!("must lie in (0, 1), got {epsilon}")));
        }
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::invalid("risk.alpha", format!("must lie in [0, 1), got {alpha}")));
        }
        Ok(Self { epsilon, alpha })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// Sampling family for `w_t`, `v_t` and the initial state. Only the first
/// two moments are pinned; the uniform option matches them with a bounded
/// distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DisturbanceModel {
    #[default]
    Gaussian,
    Uniform,
}

/// Which constraint family a controller uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    /// Worst-case CVaR constraints.
    Proposed,
    /// No safety constraint.
    Ignore,
    /// Expectation in place of worst-case CVaR.
    ExpectedValue,
}

/// Which optimization scheme a controller uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Minimal modification of a nominal controller.
    SafetyFilter,
    /// CLF-CBF program.
    ClfCbf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ControllerKind {
    pub policy: Policy,
    pub method: Method,
}

impl ControllerKind {
    /// Parses `proposed_m1`, `ignore_m2`, ... ; the bare baseline names
    /// `ignore` and `expected_value` take the method from `flavor`.
    pub fn parse(name: &str, flavor: Option<&str>) -> Result<Self> {
        let (base, suffix) = match name.rsplit_once('_') {
            Some((b, s @ ("m1" | "m2"))) => (b, Some(s)),
            _ => (name, None),
        };
        let policy = match base {
            "proposed" => Policy::Proposed,
            "ignore" => Policy::Ignore,
            "expected_value" => Policy::ExpectedValue,
            _ => return Err(Error::invalid("controller.method", format!("unknown controller `{name}`"))),
        };
        let suffix = match (suffix, policy) {
            (Some(s), _) => s,
            (None, Policy::Proposed) => {
                return Err(Error::invalid("controller.method", format!("unknown controller `{name}`")))
            }
            (None, _) => flavor.unwrap_or("m1"),
        };
        let method = match suffix {
            "m1" => Method::SafetyFilter,
            "m2" => Method::ClfCbf,
            other => {
                return Err(Error::invalid(
                    "controller.baseline_flavor",
                    format!("expected `m1` or `m2`, got `{other}`"),
                ))
            }
        };
        Ok(Self { policy, method })
    }

    pub fn name(&self) -> &'static str {
        match (self.policy, self.method) {
            (Policy::Proposed, Method::SafetyFilter) => "proposed_m1",
            (Policy::Proposed, Method::ClfCbf) => "proposed_m2",
            (Policy::Ignore, Method::SafetyFilter) => "ignore_m1",
            (Policy::Ignore, Method::ClfCbf) => "ignore_m2",
            (Policy::ExpectedValue, Method::SafetyFilter) => "expected_value_m1",
            (Policy::ExpectedValue, Method::ClfCbf) => "expected_value_m2",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig {
    pub kind: ControllerKind,
    pub method1: Option<Method1Params>,
    pub clf: Option<ClfParams>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub system: SystemModel,
    pub safe_set: SafeSet,
    pub risk: RiskParams,
    pub initial_mean: DVector<f64>,
    pub initial_cov: DMatrix<f64>,
    pub horizon_steps: usize,
    pub num_runs: usize,
    pub rng_seed: u64,
    pub controller: ControllerConfig,
    pub disturbance_model: DisturbanceModel,
}

impl ScenarioConfig {
    pub fn initial_belief(&self) -> BeliefState {
        BeliefState {
            mean: self.initial_mean.clone(),
            cov: self.initial_cov.clone(),
            time_index: 0,
        }
    }

    /// Returns a copy running a different controller. Fails when the
    /// parameters that controller needs are absent from the config.
    pub fn with_controller(&self, kind: ControllerKind) -> Result<Self> {
        let mut out = self.clone();
        out.controller.kind = kind;
        check_controller(&out.controller, out.system.n(), out.system.m())?;
        Ok(out)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_value(value)
    }

    pub fn from_value(value: serde_json::Value) -> Result<Self> {
        let file: ConfigFile = serde_json::from_value(value).map_err(|e| Error::Parse(e.to_string()))?;
        file.into_config()
    }

    /// Canonical JSON tree of this scenario; loading it back yields an equal
    /// config.
    pub fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(ConfigFile::from_config(self)).expect("config tree is always serializable")
    }
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    ScenarioConfig::from_json_str(&text)
}

fn check_controller(c: &ControllerConfig, n: usize, m: usize) -> Result<()> {
    match c.kind.method {
        Method::SafetyFilter => {
            let p = c
                .method1
                .as_ref()
                .ok_or_else(|| Error::invalid("controller.nominal_gain", "required by method-1 controllers"))?;
            if p.nominal.gain().shape() != (m, n) {
                return Err(Error::invalid(
                    "controller.nominal_gain",
                    format!("must be {m}×{n}, got {:?}", p.nominal.gain().shape()),
                ));
            }
        }
        Method::ClfCbf => {
            let p = c
                .clf
                .as_ref()
                .ok_or_else(|| Error::invalid("controller.clf", "required by method-2 controllers"))?;
            if p.phi().nrows() != n {
                return Err(Error::invalid("controller.clf.Phi", format!("must be {n}×{n}")));
            }
            if p.theta().nrows() != m + 1 {
                return Err(Error::invalid("controller.clf.Theta", format!("must be {}×{}", m + 1, m + 1)));
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// File representation

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum MatrixRepr {
    Scalar(f64),
    Flat(Vec<f64>),
    Rows(Vec<Vec<f64>>),
}

#[derive(Clone, Copy)]
enum FlatAs {
    Row,
    Column,
}

impl MatrixRepr {
    fn to_matrix(&self, field: &str, flat: FlatAs) -> Result<DMatrix<f64>> {
        match self {
            MatrixRepr::Scalar(v) => Ok(DMatrix::from_element(1, 1, *v)),
            MatrixRepr::Flat(v) => Ok(match flat {
                FlatAs::Row => DMatrix::from_row_slice(1, v.len(), v),
                FlatAs::Column => DMatrix::from_column_slice(v.len(), 1, v),
            }),
            MatrixRepr::Rows(rows) => {
                let nr = rows.len();
                let nc = rows.first().map_or(0, Vec::len);
                if rows.iter().any(|r| r.len() != nc) {
                    return Err(Error::invalid(field, "rows have unequal lengths"));
                }
                let flat: Vec<f64> = rows.iter().flatten().copied().collect();
                Ok(DMatrix::from_row_slice(nr, nc, &flat))
            }
        }
    }

    fn from_matrix(m: &DMatrix<f64>) -> Self {
        MatrixRepr::Rows(m.row_iter().map(|r| r.iter().copied().collect()).collect())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemFile {
    #[serde(rename = "A")]
    a: MatrixRepr,
    #[serde(rename = "B")]
    b: MatrixRepr,
    #[serde(rename = "H")]
    h: MatrixRepr,
    #[serde(rename = "Q")]
    q: MatrixRepr,
    #[serde(rename = "R")]
    r: MatrixRepr,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum SafeSetFile {
    HalfSpace {
        q: Vec<f64>,
        r: f64,
    },
    Ellipsoid {
        #[serde(rename = "E")]
        e: MatrixRepr,
        center: Vec<f64>,
        r: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RiskFile {
    epsilon: f64,
    alpha: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InitFile {
    mean: Vec<f64>,
    cov: MatrixRepr,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimFile {
    horizon_steps: usize,
    num_runs: usize,
    seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClfFile {
    #[serde(rename = "Phi")]
    phi: MatrixRepr,
    #[serde(rename = "Theta")]
    theta: MatrixRepr,
    eta: Vec<f64>,
    c3: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ControllerFile {
    method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    baseline_flavor: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    nominal_gain: Option<MatrixRepr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    clf: Option<ClfFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    system: SystemFile,
    safe_set: SafeSetFile,
    risk: RiskFile,
    init: InitFile,
    sim: SimFile,
    controller: ControllerFile,
    #[serde(default)]
    disturbance_model: DisturbanceModel,
}

impl ConfigFile {
    fn into_config(self) -> Result<ScenarioConfig> {
        let s = &self.system;
        let system = SystemModel::new(
            s.a.to_matrix("system.A", FlatAs::Row)?,
            s.b.to_matrix("system.B", FlatAs::Column)?,
            s.h.to_matrix("system.H", FlatAs::Row)?,
            s.q.to_matrix("system.Q", FlatAs::Row)?,
            s.r.to_matrix("system.R", FlatAs::Row)?,
        )?;
        let n = system.n();
        let m = system.m();

        let safe_set = match self.safe_set {
            SafeSetFile::HalfSpace { q, r } => SafeSet::HalfSpace(HalfSpaceSafeSet::new(DVector::from_vec(q), r)?),
            SafeSetFile::Ellipsoid { e, center, r } => SafeSet::Ellipsoid(EllipsoidSafeSet::new(
                e.to_matrix("safe_set.E", FlatAs::Row)?,
                DVector::from_vec(center),
                r,
            )?),
        };
        if safe_set.dim() != n {
            return Err(Error::invalid("safe_set", format!("dimension {} does not match state dimension {n}", safe_set.dim())));
        }

        let risk = RiskParams::new(self.risk.epsilon, self.risk.alpha)?;

        let initial_mean = DVector::from_vec(self.init.mean);
        if initial_mean.len() != n {
            return Err(Error::invalid("init.mean", format!("must have length {n}")));
        }
        let initial_cov = self.init.cov.to_matrix("init.cov", FlatAs::Row)?;
        check_covariance("init.cov", &initial_cov, n)?;
        let initial_cov = clip_psd(&initial_cov);

        if self.sim.horizon_steps == 0 {
            return Err(Error::invalid("sim.horizon_steps", "must be at least 1"));
        }
        if self.sim.num_runs == 0 {
            return Err(Error::invalid("sim.num_runs", "must be at least 1"));
        }

        let c = self.controller;
        let kind = ControllerKind::parse(&c.method, c.baseline_flavor.as_deref())?;
        let method1 = match c.nominal_gain {
            Some(g) => {
                let gain = g.to_matrix("controller.nominal_gain", FlatAs::Row)?;
                let rho = c.rho.unwrap_or(crate::control::DEFAULT_RHO);
                Some(Method1Params::new(NominalController::new(gain), rho)?)
            }
            None => None,
        };
        let clf = match c.clf {
            Some(f) => Some(ClfParams::new(
                f.phi.to_matrix("controller.clf.Phi", FlatAs::Row)?,
                f.c3,
                f.theta.to_matrix("controller.clf.Theta", FlatAs::Row)?,
                DVector::from_vec(f.eta),
            )?),
            None => None,
        };
        let controller = ControllerConfig { kind, method1, clf };
        check_controller(&controller, n, m)?;

        Ok(ScenarioConfig {
            system,
            safe_set,
            risk,
            initial_mean,
            initial_cov,
            horizon_steps: self.sim.horizon_steps,
            num_runs: self.sim.num_runs,
            rng_seed: self.sim.seed,
            controller,
            disturbance_model: self.disturbance_model,
        })
    }

    fn from_config(c: &ScenarioConfig) -> Self {
        let sys = &c.system;
        // the suffixed name already carries the method, so no flavor is written
        let method = c.controller.kind.name().to_string();
        let baseline_flavor = None;
        ConfigFile {
            system: SystemFile {
                a: MatrixRepr::from_matrix(sys.a()),
                b: MatrixRepr::from_matrix(sys.b()),
                h: MatrixRepr::from_matrix(sys.h()),
                q: MatrixRepr::from_matrix(sys.q()),
                r: MatrixRepr::from_matrix(sys.r()),
            },
            safe_set: match &c.safe_set {
                SafeSet::HalfSpace(s) => SafeSetFile::HalfSpace {
                    q: s.q.iter().copied().collect(),
                    r: s.r,
                },
                SafeSet::Ellipsoid(s) => SafeSetFile::Ellipsoid {
                    e: MatrixRepr::from_matrix(&s.e),
                    center: s.center.iter().copied().collect(),
                    r: s.r,
                },
            },
            risk: RiskFile {
                epsilon: c.risk.epsilon,
                alpha: c.risk.alpha,
            },
            init: InitFile {
                mean: c.initial_mean.iter().copied().collect(),
                cov: MatrixRepr::from_matrix(&c.initial_cov),
            },
            sim: SimFile {
                horizon_steps: c.horizon_steps,
                num_runs: c.num_runs,
                seed: c.rng_seed,
            },
            controller: ControllerFile {
                method,
                baseline_flavor,
                nominal_gain: c.controller.method1.as_ref().map(|p| MatrixRepr::from_matrix(p.nominal.gain())),
                rho: c.controller.method1.as_ref().map(|p| p.rho),
                clf: c.controller.clf.as_ref().map(|p| ClfFile {
                    phi: MatrixRepr::from_matrix(p.phi()),
                    theta: MatrixRepr::from_matrix(p.theta()),
                    eta: p.eta().iter().copied().collect(),
                    c3: p.c3(),
                }),
            },
            disturbance_model: c.disturbance_model,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const VEHICLE: &str = r#"{
        "system": {
            "A": [[1.0, 0.05], [0.0, 1.0]],
            "B": [0.0125, 0.05],
            "H": [1.0, 0.0],
            "Q": [[7.66e-5, 3.06e-3], [3.06e-3, 1.23e-1]],
            "R": 0.09
        },
        "safe_set": { "type": "half_space", "q": [0.4, 0.4], "r": 1.0 },
        "risk": { "epsilon": 0.3, "alpha": 0.7 },
        "init": { "mean": [7.0, 0.0], "cov": [[7.66e-5, 3.06e-3], [3.06e-3, 1.23e-1]] },
        "sim": { "horizon_steps": 80, "num_runs": 100, "seed": 7 },
        "controller": { "method": "proposed_m1", "nominal_gain": [-15.0, -5.0] },
        "disturbance_model": "gaussian"
    }"#;

    fn vehicle_value() -> serde_json::Value {
        serde_json::from_str(VEHICLE).unwrap()
    }

    #[test]
    fn loads_vehicle_dimensions() {
        let c = ScenarioConfig::from_json_str(VEHICLE).unwrap();
        assert_eq!((c.system.n(), c.system.m(), c.system.ny()), (2, 1, 1));
        assert_eq!(c.system.b()[(1, 0)], 0.05);
        assert_eq!(c.system.r()[(0, 0)], 0.09);
        assert_eq!(c.controller.method1.as_ref().unwrap().rho, crate::control::DEFAULT_RHO);
    }

    #[test]
    fn rejects_epsilon_out_of_range() {
        let mut v = vehicle_value();
        v["risk"]["epsilon"] = serde_json::json!(1.5);
        let err = ScenarioConfig::from_value(v).unwrap_err();
        assert!(matches!(&err, Error::Validation { field, .. } if field == "risk.epsilon"), "{err}");
    }

    #[test]
    fn rejects_asymmetric_q() {
        let mut v = vehicle_value();
        v["system"]["Q"] = serde_json::json!([[1.0, 0.1], [0.2, 1.0]]);
        let err = ScenarioConfig::from_value(v).unwrap_err();
        assert!(matches!(&err, Error::Validation { field, .. } if field == "system.Q"), "{err}");
    }

    #[test]
    fn rejects_singular_r_and_missing_keys() {
        let mut v = vehicle_value();
        v["system"]["R"] = serde_json::json!(0.0);
        assert!(ScenarioConfig::from_value(v).is_err());

        let mut v = vehicle_value();
        v.as_object_mut().unwrap().remove("risk");
        assert!(matches!(ScenarioConfig::from_value(v), Err(Error::Parse(_))));
    }

    #[test]
    fn unknown_controller_is_a_validation_error() {
        let mut v = vehicle_value();
        v["controller"]["method"] = serde_json::json!("bogus");
        assert!(matches!(ScenarioConfig::from_value(v), Err(Error::Validation { .. })));
        assert!(ControllerKind::parse("proposed", None).is_err());
        assert_eq!(ControllerKind::parse("ignore", Some("m2")).unwrap().name(), "ignore_m2");
    }

    #[test]
    fn round_trips_through_value() {
        let c = ScenarioConfig::from_json_str(VEHICLE).unwrap();
        let again = ScenarioConfig::from_value(c.to_value()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn h_value_examples() {
        let hs = SafeSet::HalfSpace(HalfSpaceSafeSet::new(DVector::from_vec(vec![0.4, 0.4]), 1.0).unwrap());
        let h = hs.h_value(&DVector::from_vec(vec![7.0, 0.0])).unwrap();
        assert!((h - 3.8).abs() < 1e-12);
        let h = hs.h_value(&DVector::from_vec(vec![-2.5, 0.0])).unwrap();
        assert!(h.abs() < 1e-12);
        assert!(hs.h_value(&DVector::from_vec(vec![1.0])).is_err());

        let el = SafeSet::Ellipsoid(
            EllipsoidSafeSet::new(DMatrix::identity(2, 2), DVector::zeros(2), 1.0).unwrap(),
        );
        assert_eq!(el.h_value(&DVector::from_vec(vec![1.0, 0.0])).unwrap(), 0.0);
        assert_eq!(el.h_value(&DVector::zeros(2)).unwrap(), 1.0);
    }

    #[test]
    fn invalid_sets() {
        assert!(HalfSpaceSafeSet::new(DVector::zeros(2), 1.0).is_err());
        assert!(EllipsoidSafeSet::new(DMatrix::identity(2, 2), DVector::zeros(2), 0.0).is_err());
        assert!(EllipsoidSafeSet::new(-DMatrix::identity(2, 2), DVector::zeros(2), 1.0).is_err());
        assert!(RiskParams::new(0.3, 1.0).is_err());
        assert!(RiskParams::new(0.0, 0.5).is_err());
    }
}

//! Controllers built on the CBF constraints.
//!
//! * Method 1 minimally modifies a nominal linear feedback so that the CBF
//!   constraint holds, falling back to a penalized slack when the constraint
//!   set is empty.
//! * Method 2 minimizes `½ v^T Θ v + η^T v` over `v = [u; δ]` subject to a
//!   relaxed quadratic CLF decrease condition and the hard CBF constraint.
//!
//! The ellipsoid constraint carries an auxiliary `v >= |u|`; only the
//! components with a positive risk weight are kept as decision variables,
//! since a zero weight leaves `v_i` unbounded and irrelevant.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::cbf::{expected_value_constraint, risk_aware_constraint, CbfConstraint, LinearCbfConstraint, QuadraticCbfConstraint};
use crate::linalg::{block_diag, is_pd, is_psd, is_symmetric, quad_form, symmetrize};
use crate::model::{BeliefState, ControllerConfig, Method, Policy, RiskParams, SafeSet, SystemModel};
use crate::solve::{solve, ConvexProgram, Solution, Status};
use crate::{Error, Result};

/// Default slack penalty for the relaxed method-1 program.
pub const DEFAULT_RHO: f64 = 1e4;

/// `u_nom(x_bar) = K x_bar`.
#[derive(Debug, Clone, PartialEq)]
pub struct NominalController {
    gain: DMatrix<f64>,
}

impl NominalController {
    /// `gain` is `m × n`.
    pub fn new(gain: DMatrix<f64>) -> Self {
        Self { gain }
    }

    pub fn gain(&self) -> &DMatrix<f64> {
        &self.gain
    }

    pub fn input(&self, mean: &DVector<f64>) -> DVector<f64> {
        &self.gain * mean
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Method1Params {
    pub nominal: NominalController,
    pub rho: f64,
}

impl Method1Params {
    pub fn new(nominal: NominalController, rho: f64) -> Result<Self> {
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::invalid("controller.rho", format!("must be positive, got {rho}")));
        }
        Ok(Self { nominal, rho })
    }
}

/// Quadratic CLF `V(x) = x^T Φ x` and the method-2 objective weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ClfParams {
    phi: DMatrix<f64>,
    c3: f64,
    theta: DMatrix<f64>,
    eta: DVector<f64>,
    c1: f64,
    c2: f64,
}

impl ClfParams {
    pub fn new(phi: DMatrix<f64>, c3: f64, theta: DMatrix<f64>, eta: DVector<f64>) -> Result<Self> {
        if !phi.is_square() || !is_symmetric(&phi, 1e-12) || !is_pd(&phi) {
            return Err(Error::invalid("controller.clf.Phi", "must be symmetric positive definite"));
        }
        if !(c3 > 0.0) || !c3.is_finite() {
            return Err(Error::invalid("controller.clf.c3", format!("must be positive, got {c3}")));
        }
        if !theta.is_square() || !is_symmetric(&theta, 1e-12) || !is_psd(&theta) {
            return Err(Error::invalid("controller.clf.Theta", "must be symmetric positive semidefinite"));
        }
        if eta.len() != theta.nrows() {
            return Err(Error::invalid("controller.clf.eta", format!("must have length {}", theta.nrows())));
        }
        if eta.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::invalid("controller.clf.eta", "entries must be non-negative"));
        }
        let eig = SymmetricEigen::new(symmetrize(&phi));
        let c1 = eig.eigenvalues.min();
        let c2 = eig.eigenvalues.max();
        Ok(Self {
            phi,
            c3,
            theta,
            eta,
            c1,
            c2,
        })
    }

    pub fn phi(&self) -> &DMatrix<f64> {
        &self.phi
    }
    pub fn c3(&self) -> f64 {
        self.c3
    }
    pub fn theta(&self) -> &DMatrix<f64> {
        &self.theta
    }
    pub fn eta(&self) -> &DVector<f64> {
        &self.eta
    }
    /// Lower CLF bound constant (smallest singular value of Φ).
    pub fn c1(&self) -> f64 {
        self.c1
    }
    /// Upper CLF bound constant (largest singular value of Φ).
    pub fn c2(&self) -> f64 {
        self.c2
    }

    /// `V(A x + B u) - V(x) + c3 ‖x‖²`.
    pub fn decrease(&self, model: &SystemModel, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        let next = model.a() * x + model.b() * u;
        quad_form(&self.phi, &next) - quad_form(&self.phi, x) + self.c3 * x.norm_squared()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlOutput {
    pub u: DVector<f64>,
    /// Whether method 1 had to fall back to the slack program.
    pub relaxed: bool,
    /// Slack of the relaxed CBF constraint (method 1) or of the CLF
    /// constraint (method 2).
    pub delta: f64,
}

impl ControlOutput {
    fn plain(u: DVector<f64>) -> Self {
        Self {
            u,
            relaxed: false,
            delta: 0.0,
        }
    }
}

pub enum MethodParams<'a> {
    SafetyFilter(&'a Method1Params),
    ClfCbf(&'a ClfParams),
}

/// Indices of `u` whose `|u_i|` carries a positive weight.
fn weighted_indices(c: &QuadraticCbfConstraint) -> Vec<usize> {
    c.abs_weights().iter().enumerate().filter(|(_, &w)| w > 0.0).map(|(i, _)| i).collect()
}

/// Embeds the quadratic CBF constraint into a program whose variable is
/// laid out as `[u (m) | extra (k) | v_S]`, `extra` being unconstrained by
/// the CBF (slack columns etc.). `slack_col` optionally relaxes the
/// quadratic row by `- z[slack_col]`.
fn add_quadratic_cbf(
    prog: &mut ConvexProgram,
    c: &QuadraticCbfConstraint,
    m: usize,
    v_offset: usize,
    support: &[usize],
    slack_col: Option<usize>,
) {
    let dim = prog.dim();
    let mut p = DMatrix::zeros(dim, dim);
    p.view_mut((0, 0), (m, m)).copy_from(&c.ptil.view((0, 0), (m, m)));
    let mut q = DVector::zeros(dim);
    q.rows_mut(0, m).copy_from(&c.qtil.rows(0, m));
    let w = c.abs_weights();
    for (k, &i) in support.iter().enumerate() {
        q[v_offset + k] = w[i];
    }
    if let Some(s) = slack_col {
        q[s] = -0.5;
    }
    prog.quad.push(crate::solve::QuadIneq { p, q, r: c.rtil });
    for (k, &i) in support.iter().enumerate() {
        let mut up = DVector::zeros(dim);
        up[i] = 1.0;
        up[v_offset + k] = -1.0;
        prog.affine.push(crate::solve::AffineIneq::new(up, 0.0));
        let mut down = DVector::zeros(dim);
        down[i] = -1.0;
        down[v_offset + k] = -1.0;
        prog.affine.push(crate::solve::AffineIneq::new(down, 0.0));
    }
}

fn embed_linear(c: &LinearCbfConstraint, dim: usize) -> DVector<f64> {
    let mut a = DVector::zeros(dim);
    a.rows_mut(0, c.coeff.len()).copy_from(&c.coeff);
    a
}

fn require(sol: Solution, what: &str) -> Result<Solution> {
    match sol.status {
        Status::Optimal => Ok(sol),
        Status::Infeasible => Err(Error::Infeasible(what.to_string())),
        Status::MaxIter => Err(Error::Solver(format!(
            "{what}: iteration budget exhausted (kkt residual {:.3e})",
            sol.kkt_residual
        ))),
    }
}

/// `argmin ‖u - u_nom‖²` subject to the given CBF constraint, with the
/// `ρ δ` relaxation when that program is infeasible.
pub fn method1_with_constraint(
    constraint: &CbfConstraint,
    u_nom: &DVector<f64>,
    rho: f64,
) -> Result<ControlOutput> {
    let m = u_nom.len();
    let support = match constraint {
        CbfConstraint::Linear(_) => Vec::new(),
        CbfConstraint::Quadratic(c) => weighted_indices(c),
    };
    let s = support.len();

    let build = |relax: bool| -> ConvexProgram {
        let dim = m + s + usize::from(relax);
        let mut h = DMatrix::zeros(dim, dim);
        h.view_mut((0, 0), (m, m)).fill_with_identity();
        h.view_mut((0, 0), (m, m)).scale_mut(2.0);
        let mut f = DVector::zeros(dim);
        f.rows_mut(0, m).copy_from(&(u_nom * -2.0));
        let slack = relax.then_some(m + s);
        if let Some(d) = slack {
            f[d] = rho;
        }
        let mut prog = ConvexProgram::new(h, f);
        match constraint {
            CbfConstraint::Linear(c) => {
                let mut a = embed_linear(c, dim);
                if let Some(d) = slack {
                    a[d] = -1.0;
                }
                prog = prog.with_affine(a, c.rhs);
            }
            CbfConstraint::Quadratic(c) => add_quadratic_cbf(&mut prog, c, m, m, &support, slack),
        }
        if let Some(d) = slack {
            let mut nonneg = DVector::zeros(dim);
            nonneg[d] = -1.0;
            prog = prog.with_affine(nonneg, 0.0);
        }
        prog
    };

    let sol = solve(&build(false))?;
    match sol.status {
        Status::Optimal => Ok(ControlOutput::plain(sol.z.rows(0, m).into_owned())),
        Status::Infeasible => {
            let sol = require(solve(&build(true))?, "relaxed method-1 program")?;
            Ok(ControlOutput {
                u: sol.z.rows(0, m).into_owned(),
                relaxed: true,
                delta: sol.z[m + s].max(0.0),
            })
        }
        Status::MaxIter => require(sol, "method-1 program").map(|_| unreachable!()),
    }
}

pub fn method1_input(
    belief: &BeliefState,
    model: &SystemModel,
    safe_set: &SafeSet,
    risk: &RiskParams,
    params: &Method1Params,
) -> Result<ControlOutput> {
    let constraint = risk_aware_constraint(safe_set, belief, model, risk)?;
    method1_with_constraint(&constraint, &params.nominal.input(&belief.mean), params.rho)
}

/// The CLF-CBF program; `constraint = None` drops the CBF row.
pub fn method2_with_constraint(
    constraint: Option<&CbfConstraint>,
    belief: &BeliefState,
    model: &SystemModel,
    params: &ClfParams,
) -> Result<ControlOutput> {
    let m = model.m();
    if params.theta().nrows() != m + 1 || params.phi().nrows() != model.n() {
        return Err(Error::dim("CLF parameters", m + 1, params.theta().nrows()));
    }
    let support = match constraint {
        Some(CbfConstraint::Quadratic(c)) => weighted_indices(c),
        _ => Vec::new(),
    };
    let dim = m + 1 + support.len();
    let h = block_diag(params.theta(), &DMatrix::zeros(support.len(), support.len()));
    let mut f = DVector::zeros(dim);
    f.rows_mut(0, m + 1).copy_from(params.eta());
    let mut prog = ConvexProgram::new(h, f);

    // V(A x + B u) - V(x) + c3 ‖x‖² <= δ
    let x = &belief.mean;
    let (a, b, phi) = (model.a(), model.b(), params.phi());
    let mut p = DMatrix::zeros(dim, dim);
    p.view_mut((0, 0), (m, m)).copy_from(&symmetrize(&(b.transpose() * phi * b)));
    let mut q = DVector::zeros(dim);
    q.rows_mut(0, m).copy_from(&(b.transpose() * phi * (a * x)));
    q[m] = -0.5;
    let n = model.n();
    let r = quad_form(&(a.transpose() * phi * a - phi + DMatrix::identity(n, n) * params.c3()), x);
    prog = prog.with_quad(p, q, r);

    match constraint {
        Some(CbfConstraint::Linear(c)) => {
            let coeff = embed_linear(c, dim);
            prog = prog.with_affine(coeff, c.rhs);
        }
        Some(CbfConstraint::Quadratic(c)) => add_quadratic_cbf(&mut prog, c, m, m + 1, &support, None),
        None => {}
    }

    let sol = require(solve(&prog)?, "method-2 program")?;
    Ok(ControlOutput {
        u: sol.z.rows(0, m).into_owned(),
        relaxed: false,
        delta: sol.z[m],
    })
}

pub fn method2_input(
    belief: &BeliefState,
    model: &SystemModel,
    safe_set: &SafeSet,
    risk: &RiskParams,
    params: &ClfParams,
) -> Result<ControlOutput> {
    let constraint = risk_aware_constraint(safe_set, belief, model, risk)?;
    method2_with_constraint(Some(&constraint), belief, model, params)
}

/// Nominal input with no safety constraint.
pub fn baseline_ignore_constraint(belief: &BeliefState, nominal: &NominalController) -> DVector<f64> {
    nominal.input(&belief.mean)
}

/// Method-2 program without the CBF row.
pub fn baseline_ignore_clf(belief: &BeliefState, model: &SystemModel, params: &ClfParams) -> Result<ControlOutput> {
    method2_with_constraint(None, belief, model, params)
}

/// Either method with expectation-based constraints.
pub fn baseline_expected_value(
    belief: &BeliefState,
    model: &SystemModel,
    safe_set: &SafeSet,
    risk: &RiskParams,
    params: MethodParams<'_>,
) -> Result<ControlOutput> {
    let constraint = expected_value_constraint(safe_set, belief, model, risk)?;
    match params {
        MethodParams::SafetyFilter(p) => method1_with_constraint(&constraint, &p.nominal.input(&belief.mean), p.rho),
        MethodParams::ClfCbf(p) => method2_with_constraint(Some(&constraint), belief, model, p),
    }
}

/// Dispatches on the configured controller.
pub fn compute_input(
    cfg: &ControllerConfig,
    belief: &BeliefState,
    model: &SystemModel,
    safe_set: &SafeSet,
    risk: &RiskParams,
) -> Result<ControlOutput> {
    let missing = |what: &str| Error::invalid("controller", format!("{} requires {what}", cfg.kind.name()));
    match cfg.kind.method {
        Method::SafetyFilter => {
            let p = cfg.method1.as_ref().ok_or_else(|| missing("nominal_gain"))?;
            match cfg.kind.policy {
                Policy::Ignore => Ok(ControlOutput::plain(baseline_ignore_constraint(belief, &p.nominal))),
                Policy::Proposed => method1_input(belief, model, safe_set, risk, p),
                Policy::ExpectedValue => {
                    baseline_expected_value(belief, model, safe_set, risk, MethodParams::SafetyFilter(p))
                }
            }
        }
        Method::ClfCbf => {
            let p = cfg.clf.as_ref().ok_or_else(|| missing("clf"))?;
            match cfg.kind.policy {
                Policy::Ignore => baseline_ignore_clf(belief, model, p),
                Policy::Proposed => method2_input(belief, model, safe_set, risk, p),
                Policy::ExpectedValue => baseline_expected_value(belief, model, safe_set, risk, MethodParams::ClfCbf(p)),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EllipsoidSafeSet, HalfSpaceSafeSet};

    fn vehicle() -> SystemModel {
        SystemModel::new(
            DMatrix::from_row_slice(2, 2, &[1.0, 0.05, 0.0, 1.0]),
            DMatrix::from_column_slice(2, 1, &[0.0125, 0.05]),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            DMatrix::from_row_slice(2, 2, &[7.66e-5, 3.06e-3, 3.06e-3, 1.23e-1]),
            DMatrix::from_element(1, 1, 0.09),
        )
        .unwrap()
    }

    fn vehicle_clf() -> ClfParams {
        ClfParams::new(
            DMatrix::from_diagonal(&DVector::from_vec(vec![100.0, 1.0])),
            10.0,
            DMatrix::from_diagonal(&DVector::from_vec(vec![10.0, 0.1])),
            DVector::from_vec(vec![0.0, 100.0]),
        )
        .unwrap()
    }

    fn nominal() -> Method1Params {
        Method1Params::new(NominalController::new(DMatrix::from_row_slice(1, 2, &[-15.0, -5.0])), DEFAULT_RHO).unwrap()
    }

    #[test]
    fn nominal_examples() {
        let k = nominal().nominal;
        let b = BeliefState::new(DVector::from_vec(vec![7.0, 0.0]), DMatrix::zeros(2, 2), 0).unwrap();
        assert_eq!(baseline_ignore_constraint(&b, &k)[0], -105.0);
        assert_eq!(k.input(&DVector::zeros(2))[0], 0.0);
        let x1 = DVector::from_vec(vec![1.5, -0.5]);
        let x2 = DVector::from_vec(vec![-0.25, 2.0]);
        assert!((k.input(&(&x1 + &x2)) - k.input(&x1) - k.input(&x2)).amax() < 1e-12);
    }

    #[test]
    fn inactive_constraint_returns_nominal() {
        let c = CbfConstraint::Linear(LinearCbfConstraint {
            coeff: DVector::from_vec(vec![1.0]),
            rhs: 10.0,
        });
        let out = method1_with_constraint(&c, &DVector::from_vec(vec![2.0]), DEFAULT_RHO).unwrap();
        assert!((out.u[0] - 2.0).abs() < 1e-12);
        assert!(!out.relaxed);
        assert_eq!(out.delta, 0.0);
    }

    #[test]
    fn active_scalar_constraint_projects() {
        let c = CbfConstraint::Linear(LinearCbfConstraint {
            coeff: DVector::from_vec(vec![2.0]),
            rhs: 3.0,
        });
        let out = method1_with_constraint(&c, &DVector::from_vec(vec![5.0]), DEFAULT_RHO).unwrap();
        assert!((out.u[0] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn empty_constraint_relaxes() {
        // 0·u <= -1 has no solution; the slack absorbs the gap
        let c = CbfConstraint::Linear(LinearCbfConstraint {
            coeff: DVector::from_vec(vec![0.0]),
            rhs: -1.0,
        });
        let out = method1_with_constraint(&c, &DVector::from_vec(vec![0.7]), 100.0).unwrap();
        assert!(out.relaxed);
        assert!((out.delta - 1.0).abs() < 1e-7, "{}", out.delta);
        assert!((out.u[0] - 0.7).abs() < 1e-7);
    }

    #[test]
    fn vehicle_step_zero_projection() {
        let model = vehicle();
        let set = SafeSet::HalfSpace(HalfSpaceSafeSet::new(DVector::from_vec(vec![0.4, 0.4]), 1.0).unwrap());
        let risk = RiskParams::new(0.3, 0.7).unwrap();
        let b = BeliefState::new(DVector::from_vec(vec![7.0, 0.0]), model.q().clone(), 0).unwrap();
        let out = method1_input(&b, &model, &set, &risk, &nominal()).unwrap();
        let CbfConstraint::Linear(c) = risk_aware_constraint(&set, &b, &model, &risk).unwrap() else { panic!() };
        let u_nom = -105.0;
        let projected = if c.coeff[0] * u_nom > c.rhs { c.rhs / c.coeff[0] } else { u_nom };
        assert!((out.u[0] - projected).abs() < 1e-9, "{} vs {projected}", out.u[0]);
    }

    #[test]
    fn method2_at_origin() {
        let model = vehicle();
        let set = SafeSet::HalfSpace(HalfSpaceSafeSet::new(DVector::from_vec(vec![0.4, 0.4]), 1.0).unwrap());
        let risk = RiskParams::new(0.3, 0.7).unwrap();
        let b = BeliefState::new(DVector::zeros(2), model.q().clone(), 0).unwrap();
        let out = method2_input(&b, &model, &set, &risk, &vehicle_clf()).unwrap();
        assert!(out.u[0].abs() < 1e-6, "{}", out.u[0]);
        assert!(out.delta.abs() < 1e-6);
        let clf_value = vehicle_clf().decrease(&model, &b.mean, &out.u);
        assert!(out.delta >= clf_value - 1e-9);
    }

    #[test]
    fn method2_uncontrollable() {
        let model = SystemModel::new(
            DMatrix::identity(2, 2) * 0.5,
            DMatrix::zeros(2, 1),
            DMatrix::identity(2, 2),
            DMatrix::zeros(2, 2),
            DMatrix::identity(2, 2),
        )
        .unwrap();
        let clf = vehicle_clf();
        let b = BeliefState::new(DVector::from_vec(vec![0.3, 0.1]), DMatrix::zeros(2, 2), 0).unwrap();
        let out = baseline_ignore_clf(&b, &model, &clf).unwrap();
        assert!(out.u[0].abs() < 1e-7);
    }

    #[test]
    fn ellipsoid_method1_respects_constraint() {
        let model = vehicle();
        let set = SafeSet::Ellipsoid(EllipsoidSafeSet::new(DMatrix::identity(2, 2), DVector::zeros(2), 25.0).unwrap());
        let risk = RiskParams::new(0.3, 0.5).unwrap();
        let b = BeliefState::new(DVector::from_vec(vec![2.0, 3.0]), model.q() * 0.1, 0).unwrap();
        let params = Method1Params::new(NominalController::new(DMatrix::from_row_slice(1, 2, &[5.0, 5.0])), DEFAULT_RHO).unwrap();
        let out = method1_input(&b, &model, &set, &risk, &params).unwrap();
        assert!(!out.relaxed);
        let CbfConstraint::Quadratic(c) = risk_aware_constraint(&set, &b, &model, &risk).unwrap() else { panic!() };
        let ubar = DVector::from_vec(vec![out.u[0], out.u[0].abs()]);
        assert!(c.violation(&ubar) <= 1e-7);
        // the nominal input would have violated it
        let nom = params.nominal.input(&b.mean)[0];
        assert!(c.violation(&DVector::from_vec(vec![nom, nom.abs()])) > 0.0);
    }

    #[test]
    fn clf_param_validation() {
        assert!(ClfParams::new(DMatrix::zeros(2, 2), 1.0, DMatrix::identity(2, 2), DVector::zeros(2)).is_err());
        assert!(ClfParams::new(DMatrix::identity(2, 2), 0.0, DMatrix::identity(2, 2), DVector::zeros(2)).is_err());
        let p = vehicle_clf();
        assert_eq!((p.c1(), p.c2()), (1.0, 100.0));
        assert!(Method1Params::new(NominalController::new(DMatrix::zeros(1, 2)), 0.0).is_err());
    }
}

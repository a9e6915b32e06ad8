//! Risk-aware CBF constraints in solver-ready form.
//!
//! All risk terms are taken over the centered joint vector
//! `xi = [x_hat - x_bar; w]`, whose covariance is `blockdiag(P, Q)`.
//! The one-step condition being enforced is
//!
//! ```text
//! sup CVaR_eps[ -h(x_hat_{t+1|t}) + alpha h(x_hat_{t|t}) ] <= 0
//! x_hat_{t+1|t} = A x_hat_{t|t} + B u + w
//! ```
//!
//! * half-space sets give an exact linear constraint in `u`;
//! * ellipsoids give an exact scalar check for a fixed `u`, and a
//!   sufficient convex quadratic constraint in `[u; v]` with `v >= |u|`.

use nalgebra::{DMatrix, DVector};

use crate::linalg::{block_diag, clip_psd, quad_form, vstack};
use crate::model::{BeliefState, EllipsoidSafeSet, HalfSpaceSafeSet, RiskParams, SafeSet, SystemModel};
use crate::wc_cvar::{wc_cvar_elementwise, wc_cvar_linear, wc_cvar_quadratic, MomentAmbiguitySet, QuadraticLoss};
use crate::{Error, Result};

/// Centered ambiguity set of `[x_hat - x_bar; w]`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointNoiseAmbiguity {
    set: MomentAmbiguitySet,
    n: usize,
}

impl JointNoiseAmbiguity {
    pub fn set(&self) -> &MomentAmbiguitySet {
        &self.set
    }
    pub fn sigma(&self) -> &DMatrix<f64> {
        self.set.sigma()
    }
    /// State dimension; the joint vector has length `2n`.
    pub fn state_dim(&self) -> usize {
        self.n
    }
}

pub fn joint_ambiguity(belief: &BeliefState, model: &SystemModel) -> Result<JointNoiseAmbiguity> {
    let n = model.n();
    if belief.dim() != n || belief.cov.shape() != (n, n) {
        return Err(Error::dim("joint_ambiguity", n, belief.dim()));
    }
    let sigma = block_diag(&belief.cov, model.q());
    Ok(JointNoiseAmbiguity {
        set: MomentAmbiguitySet::centered(sigma)?,
        n,
    })
}

/// `coeff . u <= rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearCbfConstraint {
    pub coeff: DVector<f64>,
    pub rhs: f64,
}

impl LinearCbfConstraint {
    /// `coeff . u - rhs`; non-positive when satisfied.
    pub fn violation(&self, u: &DVector<f64>) -> f64 {
        self.coeff.dot(u) - self.rhs
    }
}

/// `ubar^T Ptil ubar + 2 qtil^T ubar + rtil <= 0` and `Atil ubar <= 0` with
/// `ubar = [u; v]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticCbfConstraint {
    pub ptil: DMatrix<f64>,
    pub qtil: DVector<f64>,
    pub rtil: f64,
    pub atil: DMatrix<f64>,
}

impl QuadraticCbfConstraint {
    pub fn input_dim(&self) -> usize {
        self.qtil.len() / 2
    }

    /// Value of the quadratic part at `ubar`.
    pub fn quadratic_value(&self, ubar: &DVector<f64>) -> f64 {
        quad_form(&self.ptil, ubar) + 2.0 * self.qtil.dot(ubar) + self.rtil
    }

    /// Largest violation over the quadratic and the linear rows.
    pub fn violation(&self, ubar: &DVector<f64>) -> f64 {
        let lin = (&self.atil * ubar).max();
        self.quadratic_value(ubar).max(lin)
    }

    /// Element-wise risk weights on `|u|` (the second block of `qtil`).
    pub fn abs_weights(&self) -> DVector<f64> {
        let m = self.input_dim();
        self.qtil.rows(m, m).into_owned()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CbfConstraint {
    Linear(LinearCbfConstraint),
    Quadratic(QuadraticCbfConstraint),
}

/// `[[I, -I], [-I, -I]]`, encoding `-v <= u <= v`.
pub fn abs_split_matrix(m: usize) -> DMatrix<f64> {
    let i = DMatrix::<f64>::identity(m, m);
    let mut a = DMatrix::zeros(2 * m, 2 * m);
    a.view_mut((0, 0), (m, m)).copy_from(&i);
    a.view_mut((0, m), (m, m)).copy_from(&(-&i));
    a.view_mut((m, 0), (m, m)).copy_from(&(-&i));
    a.view_mut((m, m), (m, m)).copy_from(&(-&i));
    a
}

fn check_dims(dim: usize, belief: &BeliefState, model: &SystemModel) -> Result<()> {
    if dim != model.n() {
        return Err(Error::dim("safe set", model.n(), dim));
    }
    if belief.dim() != model.n() {
        return Err(Error::dim("belief", model.n(), belief.dim()));
    }
    Ok(())
}

/// `(A - alpha I)^T q` stacked over `q`, negated: the loss direction of
/// the half-space condition in the joint noise.
fn halfspace_noise_direction(set: &HalfSpaceSafeSet, model: &SystemModel, alpha: f64) -> (DVector<f64>, DMatrix<f64>) {
    let n = model.n();
    let a_shift = model.a() - DMatrix::identity(n, n) * alpha;
    let g = -vstack(&(a_shift.transpose() * set.q()), set.q());
    (g, a_shift)
}

/// Exact linear constraint for `h(x) = q^T x + r`:
/// `-q^T B u <= phi`, where
/// `phi = -wcCVaR[g^T xi] + q^T (A - alpha I) x_bar + (1 - alpha) r`.
pub fn halfspace_constraint(
    set: &HalfSpaceSafeSet,
    belief: &BeliefState,
    model: &SystemModel,
    risk: &RiskParams,
) -> Result<LinearCbfConstraint> {
    halfspace_build(set, belief, model, risk, true)
}

fn halfspace_build(
    set: &HalfSpaceSafeSet,
    belief: &BeliefState,
    model: &SystemModel,
    risk: &RiskParams,
    worst_case: bool,
) -> Result<LinearCbfConstraint> {
    check_dims(set.q().len(), belief, model)?;
    let alpha = risk.alpha();
    let amb = joint_ambiguity(belief, model)?;
    let (g, a_shift) = halfspace_noise_direction(set, model, alpha);
    let nominal = set.q().dot(&(&a_shift * &belief.mean)) + (1.0 - alpha) * set.r();

    let risk_term = |amb: &MomentAmbiguitySet| -> Result<f64> {
        if worst_case {
            wc_cvar_linear(amb, &g, risk.epsilon())
        } else {
            Ok(0.0)
        }
    };
    let mut rhs = nominal - risk_term(amb.set())?;
    if !rhs.is_finite() {
        let clipped = MomentAmbiguitySet::centered(clip_psd(amb.sigma()))?;
        rhs = nominal - risk_term(&clipped)?;
        if !rhs.is_finite() {
            return Err(Error::NonFinite("half-space CBF right-hand side"));
        }
    }
    Ok(LinearCbfConstraint {
        coeff: -(model.b().transpose() * set.q()),
        rhs,
    })
}

/// The half-space condition for a fixed `u`, evaluated as a general
/// quadratic loss (with zero quadratic part) rather than through the
/// closed form. Non-positive iff the condition holds.
pub fn halfspace_exact_check(
    set: &HalfSpaceSafeSet,
    belief: &BeliefState,
    model: &SystemModel,
    risk: &RiskParams,
    u: &DVector<f64>,
) -> Result<f64> {
    check_dims(set.q().len(), belief, model)?;
    if u.len() != model.m() {
        return Err(Error::dim("halfspace_exact_check: input", model.m(), u.len()));
    }
    let alpha = risk.alpha();
    let amb = joint_ambiguity(belief, model)?;
    let (g, a_shift) = halfspace_noise_direction(set, model, alpha);
    let offset = -set.q().dot(&(model.b() * u)) - set.q().dot(&(&a_shift * &belief.mean)) - (1.0 - alpha) * set.r();
    let loss = QuadraticLoss::affine(g * 0.5, offset);
    wc_cvar_quadratic(amb.set(), &loss, risk.epsilon())
}

/// Pieces of the ellipsoid condition as a quadratic loss in the joint noise.
struct EllipsoidTerms {
    pbar: DMatrix<f64>,
    qbar1: DVector<f64>,
    /// `[A^T E B; E B]`, so that `qbar2 = g_u u`.
    g_u: DMatrix<f64>,
    /// `A x_bar - x_c`.
    pred_offset: DVector<f64>,
    /// `alpha (x_bar - x_c)^T E (x_bar - x_c) + (1 - alpha) r`.
    decay: f64,
}

fn ellipsoid_terms(set: &EllipsoidSafeSet, belief: &BeliefState, model: &SystemModel, alpha: f64) -> EllipsoidTerms {
    let n = model.n();
    let a = model.a();
    let e = set.e();
    let at_e = a.transpose() * e;
    let mut pbar = DMatrix::zeros(2 * n, 2 * n);
    pbar.view_mut((0, 0), (n, n)).copy_from(&(&at_e * a - e * alpha));
    pbar.view_mut((0, n), (n, n)).copy_from(&at_e);
    pbar.view_mut((n, 0), (n, n)).copy_from(&(e * a));
    pbar.view_mut((n, n), (n, n)).copy_from(e);

    let pred_offset = a * &belief.mean - set.center();
    let cur_offset = &belief.mean - set.center();
    let qbar1 = vstack(&(&at_e * &pred_offset - e * &cur_offset * alpha), &(e * &pred_offset));

    let eb = e * model.b();
    let mut g_u = DMatrix::zeros(2 * n, model.m());
    g_u.view_mut((0, 0), (n, model.m())).copy_from(&(a.transpose() * &eb));
    g_u.view_mut((n, 0), (n, model.m())).copy_from(&eb);

    let decay = alpha * quad_form(e, &cur_offset) + (1.0 - alpha) * set.r();
    EllipsoidTerms {
        pbar,
        qbar1,
        g_u,
        pred_offset,
        decay,
    }
}

/// The quadratic loss `xi^T Pbar xi + 2 qbar^T xi + rbar` whose worst-case
/// CVaR is the ellipsoid condition for input `u`.
pub fn ellipsoid_loss(
    set: &EllipsoidSafeSet,
    belief: &BeliefState,
    model: &SystemModel,
    risk: &RiskParams,
    u: &DVector<f64>,
) -> Result<QuadraticLoss> {
    check_dims(set.center().len(), belief, model)?;
    if u.len() != model.m() {
        return Err(Error::dim("ellipsoid_loss: input", model.m(), u.len()));
    }
    let t = ellipsoid_terms(set, belief, model, risk.alpha());
    let qbar = &t.qbar1 + &t.g_u * u;
    let next = &t.pred_offset + model.b() * u;
    let rbar = quad_form(set.e(), &next) - t.decay;
    QuadraticLoss::new(t.pbar, qbar, rbar)
}

/// Exact ellipsoid condition for a fixed `u`; non-positive iff it holds.
pub fn ellipsoid_exact_check(
    set: &EllipsoidSafeSet,
    belief: &BeliefState,
    model: &SystemModel,
    risk: &RiskParams,
    u: &DVector<f64>,
) -> Result<f64> {
    let loss = ellipsoid_loss(set, belief, model, risk, u)?;
    let amb = joint_ambiguity(belief, model)?;
    wc_cvar_quadratic(amb.set(), &loss, risk.epsilon())
}

/// Sufficient convex constraint for the ellipsoid condition: any `[u; v]`
/// satisfying it satisfies the exact condition.
pub fn ellipsoid_sufficient_constraint(
    set: &EllipsoidSafeSet,
    belief: &BeliefState,
    model: &SystemModel,
    risk: &RiskParams,
) -> Result<QuadraticCbfConstraint> {
    ellipsoid_build(set, belief, model, risk, true)
}

fn ellipsoid_build(
    set: &EllipsoidSafeSet,
    belief: &BeliefState,
    model: &SystemModel,
    risk: &RiskParams,
    worst_case: bool,
) -> Result<QuadraticCbfConstraint> {
    check_dims(set.center().len(), belief, model)?;
    let m = model.m();
    let t = ellipsoid_terms(set, belief, model, risk.alpha());
    let amb = joint_ambiguity(belief, model)?;
    let b = model.b();
    let e = set.e();

    let mut ptil = DMatrix::zeros(2 * m, 2 * m);
    ptil.view_mut((0, 0), (m, m)).copy_from(&(b.transpose() * e * b));

    let (abs_weights, noise_term) = if worst_case {
        let w = wc_cvar_elementwise(amb.set(), &t.g_u, risk.epsilon())?;
        let loss = QuadraticLoss::new(t.pbar.clone(), t.qbar1.clone(), 0.0)?;
        (w, wc_cvar_quadratic(amb.set(), &loss, risk.epsilon())?)
    } else {
        (DVector::zeros(m), (&t.pbar * amb.sigma()).trace())
    };
    let qtil = vstack(&(b.transpose() * e * &t.pred_offset), &abs_weights);
    let rtil = noise_term + quad_form(e, &t.pred_offset) - t.decay;
    if !rtil.is_finite() || qtil.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("ellipsoid CBF constraint"));
    }
    Ok(QuadraticCbfConstraint {
        ptil,
        qtil,
        rtil,
        atil: abs_split_matrix(m),
    })
}

/// The worst-case CVaR constraint for whichever safe-set shape is given.
pub fn risk_aware_constraint(
    set: &SafeSet,
    belief: &BeliefState,
    model: &SystemModel,
    risk: &RiskParams,
) -> Result<CbfConstraint> {
    Ok(match set {
        SafeSet::HalfSpace(s) => CbfConstraint::Linear(halfspace_constraint(s, belief, model, risk)?),
        SafeSet::Ellipsoid(s) => CbfConstraint::Quadratic(ellipsoid_sufficient_constraint(s, belief, model, risk)?),
    })
}

/// Same construction with every worst-case CVaR replaced by the
/// expectation under the centered joint noise.
pub fn expected_value_constraint(
    set: &SafeSet,
    belief: &BeliefState,
    model: &SystemModel,
    risk: &RiskParams,
) -> Result<CbfConstraint> {
    Ok(match set {
        SafeSet::HalfSpace(s) => CbfConstraint::Linear(halfspace_build(s, belief, model, risk, false)?),
        SafeSet::Ellipsoid(s) => CbfConstraint::Quadratic(ellipsoid_build(s, belief, model, risk, false)?),
    })
}

/// `sup CVaR_eps[-h(x_hat_{t|t})]` over the belief; non-positive means the
/// current belief is itself risk-safe.
pub fn belief_risk(set: &SafeSet, belief: &BeliefState, epsilon: f64) -> Result<f64> {
    if set.dim() != belief.dim() {
        return Err(Error::dim("belief_risk", set.dim(), belief.dim()));
    }
    let amb = MomentAmbiguitySet::centered(belief.cov.clone())?;
    match set {
        SafeSet::HalfSpace(s) => {
            Ok(wc_cvar_linear(&amb, &(-s.q()), epsilon)? - set.h_value(&belief.mean)?)
        }
        SafeSet::Ellipsoid(s) => {
            let offset = &belief.mean - s.center();
            let loss = QuadraticLoss::new(s.e().clone(), s.e() * &offset, quad_form(s.e(), &offset) - s.r())?;
            wc_cvar_quadratic(&amb, &loss, epsilon)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

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

    fn halfspace() -> HalfSpaceSafeSet {
        HalfSpaceSafeSet::new(DVector::from_vec(vec![0.4, 0.4]), 1.0).unwrap()
    }

    fn deterministic(n: usize, a: DMatrix<f64>, b: DMatrix<f64>) -> SystemModel {
        SystemModel::new(a, b, DMatrix::identity(n, n), DMatrix::zeros(n, n), DMatrix::identity(n, n)).unwrap()
    }

    #[test]
    fn joint_covariance_blocks() {
        let model = SystemModel::new(
            DMatrix::identity(2, 2),
            DMatrix::zeros(2, 1),
            DMatrix::identity(2, 2),
            DMatrix::identity(2, 2) * 2.0,
            DMatrix::identity(2, 2),
        )
        .unwrap();
        let b = BeliefState::new(DVector::zeros(2), DMatrix::identity(2, 2), 0).unwrap();
        let j = joint_ambiguity(&b, &model).unwrap();
        assert_eq!(j.sigma(), &DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, 2.0, 2.0])));
        assert!(j.set().is_centered());
    }

    #[test]
    fn vehicle_halfspace_rhs() {
        let model = vehicle();
        let b = BeliefState::new(DVector::from_vec(vec![7.0, 0.0]), model.q().clone(), 0).unwrap();
        let risk = RiskParams::new(0.3, 0.7).unwrap();
        let c = halfspace_constraint(&halfspace(), &b, &model, &risk).unwrap();

        let g = DVector::from_vec(vec![-0.12, -0.14, -0.4, -0.4]);
        let sigma = block_diag(model.q(), model.q());
        let expected = -(7.0f64 / 3.0).sqrt() * quad_form(&sigma, &g).sqrt() + 0.12 * 7.0 + 0.3;
        assert!((c.rhs - expected).abs() < 1e-12, "{} vs {expected}", c.rhs);
        assert!((c.coeff[0] + 0.4 * 0.0125 + 0.4 * 0.05).abs() < 1e-15);

        let ev = expected_value_constraint(&SafeSet::HalfSpace(halfspace()), &b, &model, &risk).unwrap();
        let CbfConstraint::Linear(ev) = ev else { panic!() };
        assert!((ev.rhs - c.rhs - (7.0f64 / 3.0).sqrt() * quad_form(&sigma, &g).sqrt()).abs() < 1e-12);
        assert!(ev.rhs > c.rhs);
    }

    #[test]
    fn halfspace_deterministic_limit_and_alpha_zero() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 0.9]);
        let model = deterministic(2, a.clone(), DMatrix::from_column_slice(2, 1, &[0.0, 1.0]));
        let set = halfspace();
        let x = DVector::from_vec(vec![1.0, -2.0]);
        let b = BeliefState::new(x.clone(), DMatrix::zeros(2, 2), 0).unwrap();
        for alpha in [0.0, 0.5] {
            let risk = RiskParams::new(0.2, alpha).unwrap();
            let c = halfspace_constraint(&set, &b, &model, &risk).unwrap();
            let expected = set.q().dot(&((&a - DMatrix::identity(2, 2) * alpha) * &x)) + (1.0 - alpha) * set.r();
            assert!((c.rhs - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn halfspace_two_routes_agree() {
        let model = vehicle();
        let b = BeliefState::new(DVector::from_vec(vec![1.0, -3.0]), model.q() * 3.0, 0).unwrap();
        let risk = RiskParams::new(0.3, 0.7).unwrap();
        let c = halfspace_constraint(&halfspace(), &b, &model, &risk).unwrap();
        for u in [-40.0, -5.0, 0.0, 12.0] {
            let u = DVector::from_element(1, u);
            let exact = halfspace_exact_check(&halfspace(), &b, &model, &risk, &u).unwrap();
            assert!((exact - c.violation(&u)).abs() < 1e-7, "{exact} vs {}", c.violation(&u));
        }
    }

    #[test]
    fn ellipsoid_deterministic_origin() {
        let model = deterministic(2, DMatrix::identity(2, 2), DMatrix::identity(2, 2));
        let b = BeliefState::new(DVector::zeros(2), DMatrix::zeros(2, 2), 0).unwrap();
        let risk = RiskParams::new(0.5, 0.0).unwrap();
        let set = EllipsoidSafeSet::new(DMatrix::identity(2, 2), DVector::zeros(2), 1.0).unwrap();
        let loss = ellipsoid_loss(&set, &b, &model, &risk, &DVector::zeros(2)).unwrap();
        assert_eq!(loss.p().view((0, 2), (2, 2)), DMatrix::<f64>::identity(2, 2));
        assert_eq!(loss.r(), -1.0);
        let v = ellipsoid_exact_check(&set, &b, &model, &risk, &DVector::zeros(2)).unwrap();
        assert!((v + 1.0).abs() < 1e-8, "{v}");
    }

    #[test]
    fn ellipsoid_deterministic_ball_constraint() {
        let model = deterministic(2, DMatrix::identity(2, 2), DMatrix::identity(2, 2));
        let b = BeliefState::new(DVector::zeros(2), DMatrix::zeros(2, 2), 0).unwrap();
        let risk = RiskParams::new(0.5, 0.0).unwrap();
        let set = EllipsoidSafeSet::new(DMatrix::identity(2, 2), DVector::zeros(2), 1.0).unwrap();
        let c = ellipsoid_sufficient_constraint(&set, &b, &model, &risk).unwrap();
        assert_eq!(c.ptil.view((0, 0), (2, 2)), DMatrix::<f64>::identity(2, 2));
        assert_eq!(c.qtil.amax(), 0.0);
        assert!((c.rtil + 1.0).abs() < 1e-8);
        assert_eq!(c.atil, abs_split_matrix(2));
    }

    #[test]
    fn ellipsoid_uncontrollable_case() {
        let model = SystemModel::new(
            DMatrix::identity(2, 2),
            DMatrix::zeros(2, 1),
            DMatrix::identity(2, 2),
            DMatrix::identity(2, 2) * 0.01,
            DMatrix::identity(2, 2),
        )
        .unwrap();
        let b = BeliefState::new(DVector::from_vec(vec![0.2, 0.1]), DMatrix::identity(2, 2) * 0.01, 0).unwrap();
        let risk = RiskParams::new(0.3, 0.5).unwrap();
        let set = EllipsoidSafeSet::new(DMatrix::identity(2, 2), DVector::zeros(2), 1.0).unwrap();
        let c = ellipsoid_sufficient_constraint(&set, &b, &model, &risk).unwrap();
        assert_eq!(c.ptil.amax(), 0.0);
        assert_eq!(c.qtil[0], 0.0);
    }

    #[test]
    fn ellipsoid_expected_below_risk_aware() {
        let model = vehicle();
        let b = BeliefState::new(DVector::from_vec(vec![0.5, -0.3]), model.q().clone(), 0).unwrap();
        let risk = RiskParams::new(0.3, 0.7).unwrap();
        let set = EllipsoidSafeSet::new(DMatrix::identity(2, 2) * 0.5, DVector::zeros(2), 2.0).unwrap();
        let ra = ellipsoid_sufficient_constraint(&set, &b, &model, &risk).unwrap();
        let CbfConstraint::Quadratic(ev) = expected_value_constraint(&SafeSet::Ellipsoid(set), &b, &model, &risk).unwrap()
        else {
            panic!()
        };
        assert!(ev.rtil <= ra.rtil);
        assert_eq!(ev.abs_weights(), DVector::zeros(1));
        assert!(ra.abs_weights()[0] > 0.0);
    }

    #[test]
    fn zero_covariance_expected_equals_risk_aware() {
        let model = deterministic(2, DMatrix::from_row_slice(2, 2, &[1.0, 0.05, 0.0, 1.0]), DMatrix::from_column_slice(2, 1, &[0.0125, 0.05]));
        let b = BeliefState::new(DVector::from_vec(vec![3.0, -1.0]), DMatrix::zeros(2, 2), 0).unwrap();
        let risk = RiskParams::new(0.3, 0.7).unwrap();
        let set = SafeSet::HalfSpace(halfspace());
        assert_eq!(
            risk_aware_constraint(&set, &b, &model, &risk).unwrap(),
            expected_value_constraint(&set, &b, &model, &risk).unwrap()
        );
    }

    #[test]
    fn belief_risk_signs() {
        let set = SafeSet::HalfSpace(halfspace());
        let b = BeliefState::new(DVector::from_vec(vec![7.0, 0.0]), DMatrix::identity(2, 2) * 1e-4, 0).unwrap();
        assert!(belief_risk(&set, &b, 0.3).unwrap() < 0.0);
        let b = BeliefState::new(DVector::from_vec(vec![-2.5, 0.0]), DMatrix::identity(2, 2) * 1e-4, 0).unwrap();
        assert!(belief_risk(&set, &b, 0.3).unwrap() > 0.0);

        let el = SafeSet::Ellipsoid(EllipsoidSafeSet::new(DMatrix::identity(2, 2), DVector::zeros(2), 1.0).unwrap());
        let b = BeliefState::new(DVector::zeros(2), DMatrix::zeros(2, 2), 0).unwrap();
        assert!((belief_risk(&el, &b, 0.3).unwrap() + 1.0).abs() < 1e-8);
    }
}

//! Worst-case CVaR over moment ambiguity sets.
//!
//! The ambiguity set is every distribution with a given mean `mu` and
//! covariance `sigma`. For a quadratic loss
//! `L(xi) = xi^T P xi + 2 q^T xi + r` the worst-case CVaR at level `epsilon` is
//!
//! ```text
//! inf_beta  beta + (1/epsilon) * min { Tr(Omega N) : N ⪰ 0, N ⪰ M(beta) }
//! M(beta) = [[P, q], [q^T, r - beta]]
//! Omega   = [[Sigma + mu mu^T, mu], [mu^T, 1]]
//! ```
//!
//! For fixed `beta` the inner program has the closed form
//! `Tr((Omega^{1/2} M(beta) Omega^{1/2})_+)`, the sum of the positive
//! eigenvalues. The outer problem is a convex scalar minimization, solved
//! here by bracketing followed by golden-section search.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::linalg::{clip_psd, is_psd, is_symmetric, psd_sqrt, quad_form, symmetrize};
use crate::{Error, Result};

/// Absolute tolerance on the CVaR threshold `beta`.
pub const BETA_TOL: f64 = 1e-9;
/// Number of geometric bracket expansions before giving up.
pub const MAX_BRACKET_EXPANSIONS: usize = 200;
const MAX_GOLDEN_ITERS: usize = 400;
const GOLDEN: f64 = 1.618_033_988_749_895;

/// Distributions sharing mean `mu` and covariance `sigma`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentAmbiguitySet {
    mu: DVector<f64>,
    sigma: DMatrix<f64>,
}

impl MomentAmbiguitySet {
    pub fn new(mu: DVector<f64>, sigma: DMatrix<f64>) -> Result<Self> {
        let d = mu.len();
        if sigma.shape() != (d, d) {
            return Err(Error::dim("ambiguity covariance", format!("{d}×{d}"), format!("{:?}", sigma.shape())));
        }
        if !is_symmetric(&sigma, 1e-9) || !is_psd(&sigma) {
            return Err(Error::invalid("sigma", "must be symmetric positive semidefinite"));
        }
        Ok(Self {
            mu,
            sigma: clip_psd(&sigma),
        })
    }

    /// Zero-mean set with covariance `sigma`.
    pub fn centered(sigma: DMatrix<f64>) -> Result<Self> {
        let d = sigma.nrows();
        Self::new(DVector::zeros(d), sigma)
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }
    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }
    pub fn dim(&self) -> usize {
        self.mu.len()
    }
    pub fn is_centered(&self) -> bool {
        self.mu.iter().all(|&v| v == 0.0)
    }

    pub fn second_moment(&self) -> SecondMomentMatrix {
        SecondMomentMatrix::from_ambiguity(self)
    }
}

/// `Omega = [[Sigma + mu mu^T, mu], [mu^T, 1]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondMomentMatrix {
    omega: DMatrix<f64>,
}

impl SecondMomentMatrix {
    pub fn from_ambiguity(amb: &MomentAmbiguitySet) -> Self {
        let d = amb.dim();
        let mut omega = DMatrix::zeros(d + 1, d + 1);
        omega
            .view_mut((0, 0), (d, d))
            .copy_from(&(amb.sigma() + amb.mu() * amb.mu().transpose()));
        omega.view_mut((0, d), (d, 1)).copy_from(amb.mu());
        omega.view_mut((d, 0), (1, d)).copy_from(&amb.mu().transpose());
        omega[(d, d)] = 1.0;
        Self { omega }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.omega
    }
}

/// `L(xi) = xi^T P xi + 2 q^T xi + r`, with `P` symmetrized on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticLoss {
    p: DMatrix<f64>,
    q: DVector<f64>,
    r: f64,
}

impl QuadraticLoss {
    pub fn new(p: DMatrix<f64>, q: DVector<f64>, r: f64) -> Result<Self> {
        let d = q.len();
        if p.shape() != (d, d) {
            return Err(Error::dim("quadratic loss", format!("{d}×{d}"), format!("{:?}", p.shape())));
        }
        Ok(Self {
            p: symmetrize(&p),
            q,
            r,
        })
    }

    /// `2 q^T xi + r`.
    pub fn affine(q: DVector<f64>, r: f64) -> Self {
        let d = q.len();
        Self {
            p: DMatrix::zeros(d, d),
            q,
            r,
        }
    }

    pub fn constant(d: usize, r: f64) -> Self {
        Self::affine(DVector::zeros(d), r)
    }

    pub fn p(&self) -> &DMatrix<f64> {
        &self.p
    }
    pub fn q(&self) -> &DVector<f64> {
        &self.q
    }
    pub fn r(&self) -> f64 {
        self.r
    }
    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn eval(&self, xi: &DVector<f64>) -> f64 {
        quad_form(&self.p, xi) + 2.0 * self.q.dot(xi) + self.r
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            p: &self.p * c,
            q: &self.q * c,
            r: self.r * c,
        }
    }

    pub fn shifted(&self, c: f64) -> Self {
        Self {
            r: self.r + c,
            ..self.clone()
        }
    }

    pub fn sum(&self, other: &Self) -> Self {
        Self {
            p: &self.p + &other.p,
            q: &self.q + &other.q,
            r: self.r + other.r,
        }
    }

    /// `E[L(xi)] = Tr(P Sigma) + mu^T P mu + 2 q^T mu + r`.
    pub fn expectation(&self, amb: &MomentAmbiguitySet) -> f64 {
        (&self.p * amb.sigma()).trace() + quad_form(&self.p, amb.mu()) + 2.0 * self.q.dot(amb.mu()) + self.r
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon < 1.0 {
        Ok(())
    } else {
        Err(Error::Epsilon(epsilon))
    }
}

/// `sqrt((1 - epsilon) / epsilon)`, the worst-case CVaR of a zero-mean,
/// unit-variance scalar.
pub fn unit_linear_factor(epsilon: f64) -> f64 {
    ((1.0 - epsilon) / epsilon).sqrt()
}

/// Worst-case CVaR of `q^T xi` over a centered ambiguity set:
/// `sqrt((1 - epsilon)/epsilon) * sqrt(q^T Sigma q)`.
pub fn wc_cvar_linear(amb: &MomentAmbiguitySet, q: &DVector<f64>, epsilon: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    if q.len() != amb.dim() {
        return Err(Error::dim("wc_cvar_linear", amb.dim(), q.len()));
    }
    if !amb.is_centered() {
        return Err(Error::NonzeroMean("wc_cvar_linear"));
    }
    let var = quad_form(amb.sigma(), q).max(0.0);
    Ok(unit_linear_factor(epsilon) * var.sqrt())
}

/// Component `i` is the worst-case CVaR of `g_i^T xi`, with `g_i` the
/// `i`-th column of `g`.
pub fn wc_cvar_elementwise(amb: &MomentAmbiguitySet, g: &DMatrix<f64>, epsilon: f64) -> Result<DVector<f64>> {
    if g.nrows() != amb.dim() {
        return Err(Error::dim("wc_cvar_elementwise", amb.dim(), g.nrows()));
    }
    let mut out = DVector::zeros(g.ncols());
    for (i, col) in g.column_iter().enumerate() {
        out[i] = wc_cvar_linear(amb, &col.into_owned(), epsilon)?;
    }
    Ok(out)
}

/// `|q|^T` times the element-wise worst-case CVaR of `xi`; an upper bound on
/// [`wc_cvar_linear`].
pub fn linear_bound(amb: &MomentAmbiguitySet, q: &DVector<f64>, epsilon: f64) -> Result<f64> {
    if q.len() != amb.dim() {
        return Err(Error::dim("linear_bound", amb.dim(), q.len()));
    }
    let per_axis = wc_cvar_elementwise(amb, &DMatrix::identity(amb.dim(), amb.dim()), epsilon)?;
    Ok(q.abs().dot(&per_axis))
}

/// The scalar objective `g(beta)` whose infimum is the worst-case CVaR.
///
/// `Omega^{1/2}` and `Omega^{1/2} M(0) Omega^{1/2}` are computed once; only
/// a rank-one term depends on `beta`.
#[derive(Debug, Clone)]
pub struct ThresholdObjective {
    base: DMatrix<f64>,
    last_col: DVector<f64>,
    inv_eps: f64,
}

impl ThresholdObjective {
    pub fn new(amb: &MomentAmbiguitySet, loss: &QuadraticLoss, epsilon: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        let d = amb.dim();
        if loss.dim() != d {
            return Err(Error::dim("wc_cvar_quadratic", d, loss.dim()));
        }
        let root = psd_sqrt(amb.second_moment().matrix());
        let mut m0 = DMatrix::zeros(d + 1, d + 1);
        m0.view_mut((0, 0), (d, d)).copy_from(loss.p());
        m0.view_mut((0, d), (d, 1)).copy_from(loss.q());
        m0.view_mut((d, 0), (1, d)).copy_from(&loss.q().transpose());
        m0[(d, d)] = loss.r();
        let base = symmetrize(&(&root * m0 * &root));
        let last_col = root.column(d).into_owned();
        Ok(Self {
            base,
            last_col,
            inv_eps: 1.0 / epsilon,
        })
    }

    pub fn eval(&self, beta: f64) -> f64 {
        let x = &self.base - (&self.last_col * self.last_col.transpose()) * beta;
        let eig = SymmetricEigen::new(symmetrize(&x));
        let pos: f64 = eig.eigenvalues.iter().filter(|&&l| l > 0.0).sum();
        beta + self.inv_eps * pos
    }
}

/// Result of the scalar minimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvarSolution {
    pub value: f64,
    pub beta: f64,
}

/// Worst-case CVaR of a quadratic loss. See the module docs for the
/// reduction used.
pub fn wc_cvar_quadratic(amb: &MomentAmbiguitySet, loss: &QuadraticLoss, epsilon: f64) -> Result<f64> {
    wc_cvar_quadratic_solution(amb, loss, epsilon).map(|s| s.value)
}

pub fn wc_cvar_quadratic_solution(
    amb: &MomentAmbiguitySet,
    loss: &QuadraticLoss,
    epsilon: f64,
) -> Result<CvarSolution> {
    let g = ThresholdObjective::new(amb, loss, epsilon)?;
    let beta0 = loss.expectation(amb);
    if !beta0.is_finite() {
        return Err(Error::NonFinite("expected loss"));
    }
    let step = 0.5 * (1.0 + beta0.abs());
    minimize_convex(|b| g.eval(b), beta0, step)
}

/// Brackets and golden-section minimizes a convex scalar function that
/// grows without bound in both directions.
fn minimize_convex(f: impl Fn(f64) -> f64, start: f64, step: f64) -> Result<CvarSolution> {
    let eval = |b: f64| -> Result<f64> {
        let v = f(b);
        if v.is_nan() {
            Err(Error::NonFinite("CVaR threshold objective"))
        } else {
            Ok(v)
        }
    };

    let (mut a, mut fa) = (start, eval(start)?);
    let (mut b, mut fb) = (start + step, eval(start + step)?);
    if fb > fa {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let mut c = b + GOLDEN * (b - a);
    let mut fc = eval(c)?;
    let mut expansions = 0;
    while fc < fb {
        if expansions >= MAX_BRACKET_EXPANSIONS {
            return Err(Error::Bracket(expansions));
        }
        a = b;
        b = c;
        fb = fc;
        c = b + GOLDEN * (b - a);
        fc = eval(c)?;
        expansions += 1;
    }

    let (mut lo, mut hi) = if a < c { (a, c) } else { (c, a) };
    let inv_phi = GOLDEN - 1.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = eval(x1)?;
    let mut f2 = eval(x2)?;
    let mut best = if fb <= f1.min(f2) {
        (b, fb)
    } else if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    };
    let mut iters = 0;
    while hi - lo > BETA_TOL {
        if iters >= MAX_GOLDEN_ITERS {
            return Err(Error::Bracket(expansions));
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = eval(x1)?;
            if f1 < best.1 {
                best = (x1, f1);
            }
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = eval(x2)?;
            if f2 < best.1 {
                best = (x2, f2);
            }
        }
        iters += 1;
    }
    Ok(CvarSolution {
        value: best.1,
        beta: best.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn amb1(var: f64) -> MomentAmbiguitySet {
        MomentAmbiguitySet::centered(DMatrix::from_element(1, 1, var)).unwrap()
    }

    #[test]
    fn linear_unit_variance_half_level() {
        let amb = MomentAmbiguitySet::centered(DMatrix::identity(2, 2)).unwrap();
        let v = wc_cvar_linear(&amb, &DVector::from_vec(vec![1.0, 0.0]), 0.5).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
        assert_eq!(wc_cvar_linear(&amb, &DVector::zeros(2), 0.5).unwrap(), 0.0);
    }

    #[test]
    fn linear_level_point_three() {
        let v = wc_cvar_linear(&amb1(1.0), &DVector::from_vec(vec![1.0]), 0.3).unwrap();
        assert!((v - (7.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((v - 1.527_525_2).abs() < 1e-7);
    }

    #[test]
    fn linear_rejects_bad_inputs() {
        let amb = amb1(1.0);
        assert!(matches!(wc_cvar_linear(&amb, &DVector::from_vec(vec![1.0]), 1.0), Err(Error::Epsilon(_))));
        assert!(wc_cvar_linear(&amb, &DVector::from_vec(vec![1.0, 2.0]), 0.5).is_err());
        let shifted = MomentAmbiguitySet::new(DVector::from_vec(vec![1.0]), DMatrix::identity(1, 1)).unwrap();
        assert!(matches!(
            wc_cvar_linear(&shifted, &DVector::from_vec(vec![1.0]), 0.5),
            Err(Error::NonzeroMean(_))
        ));
    }

    #[test]
    fn quadratic_constant_loss() {
        let amb = MomentAmbiguitySet::new(DVector::from_vec(vec![0.3, -1.0]), DMatrix::identity(2, 2) * 2.0).unwrap();
        let v = wc_cvar_quadratic(&amb, &QuadraticLoss::constant(2, 3.7), 0.2).unwrap();
        assert!((v - 3.7).abs() < 1e-8, "{v}");
    }

    #[test]
    fn quadratic_square_of_unit_variance() {
        // g(beta) = beta + 2 (1 + max(-beta, 0)) is minimized at beta = 0
        let loss = QuadraticLoss::new(DMatrix::identity(1, 1), DVector::zeros(1), 0.0).unwrap();
        let v = wc_cvar_quadratic(&amb1(1.0), &loss, 0.5).unwrap();
        assert!((v - 2.0).abs() < 1e-8, "{v}");
    }

    #[test]
    fn quadratic_linear_loss_matches_closed_form() {
        // 2 * 0.5 * xi = xi, whose worst-case CVaR at level 0.5 is 1
        let loss = QuadraticLoss::affine(DVector::from_vec(vec![0.5]), 0.0);
        let v = wc_cvar_quadratic(&amb1(1.0), &loss, 0.5).unwrap();
        assert!((v - 1.0).abs() < 1e-8, "{v}");
        let lin = wc_cvar_linear(&amb1(1.0), &DVector::from_vec(vec![1.0]), 0.5).unwrap();
        assert!((v - lin).abs() < 1e-8);
    }

    #[test]
    fn quadratic_dominates_expectation() {
        let amb = MomentAmbiguitySet::new(
            DVector::from_vec(vec![0.5, -0.2]),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.5]),
        )
        .unwrap();
        let loss = QuadraticLoss::new(
            DMatrix::from_row_slice(2, 2, &[1.0, -0.5, -0.5, -2.0]),
            DVector::from_vec(vec![0.1, 0.7]),
            -0.4,
        )
        .unwrap();
        let v = wc_cvar_quadratic(&amb, &loss, 0.25).unwrap();
        assert!(v >= loss.expectation(&amb) - 1e-9);
    }

    #[test]
    fn degenerate_covariance_is_handled() {
        let amb = MomentAmbiguitySet::centered(DMatrix::zeros(2, 2)).unwrap();
        let loss = QuadraticLoss::new(DMatrix::identity(2, 2), DVector::from_vec(vec![1.0, 1.0]), -1.0).unwrap();
        let v = wc_cvar_quadratic(&amb, &loss, 0.3).unwrap();
        assert!((v + 1.0).abs() < 1e-8, "{v}");
    }

    #[test]
    fn elementwise_and_bound() {
        let amb = MomentAmbiguitySet::centered(DMatrix::identity(2, 2)).unwrap();
        let e = wc_cvar_elementwise(&amb, &DMatrix::identity(2, 2), 0.5).unwrap();
        assert!((e - DVector::from_vec(vec![1.0, 1.0])).amax() < 1e-15);
        assert_eq!(wc_cvar_elementwise(&amb, &DMatrix::zeros(2, 3), 0.5).unwrap(), DVector::zeros(3));
        let g = DMatrix::from_row_slice(2, 2, &[0.3, 0.3, -1.0, -1.0]);
        let e = wc_cvar_elementwise(&amb, &g, 0.4).unwrap();
        assert_eq!(e[0], e[1]);

        let q = DVector::from_vec(vec![1.0, 1.0]);
        let bound = linear_bound(&amb, &q, 0.5).unwrap();
        let exact = wc_cvar_linear(&amb, &q, 0.5).unwrap();
        assert!((bound - 2.0).abs() < 1e-15);
        assert!((exact - 2f64.sqrt()).abs() < 1e-12);

        let diag = MomentAmbiguitySet::centered(DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 5.0]))).unwrap();
        let axis = DVector::from_vec(vec![0.0, -3.0]);
        let b = linear_bound(&diag, &axis, 0.2).unwrap();
        let x = wc_cvar_linear(&diag, &axis, 0.2).unwrap();
        assert!((b - x).abs() < 1e-12);
        assert_eq!(linear_bound(&diag, &DVector::zeros(2), 0.2).unwrap(), 0.0);
    }

    #[test]
    fn second_moment_layout() {
        let amb = MomentAmbiguitySet::new(DVector::from_vec(vec![1.0, 2.0]), DMatrix::identity(2, 2)).unwrap();
        let om = amb.second_moment();
        let m = om.matrix();
        assert_eq!(m[(2, 2)], 1.0);
        assert_eq!(m[(0, 2)], 1.0);
        assert_eq!(m[(2, 1)], 2.0);
        assert_eq!(m[(0, 0)], 2.0);
        assert_eq!(m[(0, 1)], 2.0);
        assert!(is_psd(m));
    }
}

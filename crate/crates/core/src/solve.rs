//! Small dense convex solver.
//!
//! Programs have the shape
//!
//! ```text
//! minimize    ½ z^T H z + f^T z
//! subject to  a_i^T z <= b_i
//!             z^T P_j z + 2 q_j^T z + r_j <= 0      (P_j ⪰ 0)
//! ```
//!
//! Affine-only programs with `H ≻ 0` go through a dual active-set method
//! (Goldfarb–Idnani), which also yields a Farkas certificate when the
//! constraints are inconsistent. Everything else uses a logarithmic barrier
//! path with damped Newton centering, followed by an active-set polish of
//! the KKT equations.

use nalgebra::{DMatrix, DVector};

use crate::linalg::{is_pd, is_psd, is_symmetric, symmetrize};
use crate::{Error, Result};

/// Newton/active-set iteration budget.
pub const MAX_ITER: usize = 500;
/// Required primal feasibility at an optimal point.
pub const FEAS_TOL: f64 = 1e-7;
/// Required KKT residual at an optimal point.
pub const KKT_TOL: f64 = 1e-6;

const GAP_TOL: f64 = 1e-10;
/// Newton decrement at which centering stops.
const NEWTON_TOL: f64 = 1e-12;
/// KKT residual at which a polished point ends the barrier loop early.
const POLISH_ACCEPT: f64 = 1e-9;
/// Relative depth phase I aims for inside the feasible set.
const PHASE_ONE_MARGIN: f64 = 1e-3;
const BARRIER_GROWTH: f64 = 10.0;
const CENTERING_STEPS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct AffineIneq {
    pub a: DVector<f64>,
    pub b: f64,
}

impl AffineIneq {
    pub fn new(a: DVector<f64>, b: f64) -> Self {
        Self { a, b }
    }
}

/// `z^T p z + 2 q^T z + r <= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadIneq {
    pub p: DMatrix<f64>,
    pub q: DVector<f64>,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexProgram {
    pub hobj: DMatrix<f64>,
    pub fobj: DVector<f64>,
    pub affine: Vec<AffineIneq>,
    pub quad: Vec<QuadIneq>,
}

impl ConvexProgram {
    pub fn new(hobj: DMatrix<f64>, fobj: DVector<f64>) -> Self {
        Self {
            hobj,
            fobj,
            affine: Vec::new(),
            quad: Vec::new(),
        }
    }

    pub fn with_affine(mut self, a: DVector<f64>, b: f64) -> Self {
        self.affine.push(AffineIneq { a, b });
        self
    }

    pub fn with_quad(mut self, p: DMatrix<f64>, q: DVector<f64>, r: f64) -> Self {
        self.quad.push(QuadIneq { p, q, r });
        self
    }

    pub fn dim(&self) -> usize {
        self.fobj.len()
    }

    pub fn objective(&self, z: &DVector<f64>) -> f64 {
        0.5 * z.dot(&(&self.hobj * z)) + self.fobj.dot(z)
    }

    /// Largest constraint value; non-positive when `z` is feasible.
    pub fn max_violation(&self, z: &DVector<f64>) -> f64 {
        constraints(self).iter().map(|c| c.value(z)).fold(f64::NEG_INFINITY, f64::max)
    }

    fn validate(&self) -> Result<()> {
        let n = self.dim();
        if self.hobj.shape() != (n, n) {
            return Err(Error::dim("objective Hessian", format!("{n}×{n}"), format!("{:?}", self.hobj.shape())));
        }
        if !is_symmetric(&self.hobj, 1e-9) || !is_psd(&self.hobj) {
            return Err(Error::invalid("objective Hessian", "must be symmetric positive semidefinite"));
        }
        for c in &self.affine {
            if c.a.len() != n {
                return Err(Error::dim("affine constraint", n, c.a.len()));
            }
        }
        for c in &self.quad {
            if c.p.shape() != (n, n) || c.q.len() != n {
                return Err(Error::dim("quadratic constraint", n, c.q.len()));
            }
            if !is_symmetric(&c.p, 1e-9) || !is_psd(&c.p) {
                return Err(Error::invalid("quadratic constraint", "must be symmetric positive semidefinite"));
            }
        }
        let finite = self.hobj.iter().chain(self.fobj.iter()).all(|v| v.is_finite())
            && self.affine.iter().all(|c| c.b.is_finite() && c.a.iter().all(|v| v.is_finite()))
            && self.quad.iter().all(|c| c.r.is_finite() && c.q.iter().chain(c.p.iter()).all(|v| v.is_finite()));
        if !finite {
            return Err(Error::NonFinite("convex program data"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    MaxIter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub z: DVector<f64>,
    pub status: Status,
    pub kkt_residual: f64,
    /// Multipliers, affine constraints first, then quadratic ones.
    pub multipliers: DVector<f64>,
    pub iterations: usize,
    /// For inconsistent affine systems: `y >= 0` with `sum y_i a_i = 0` and
    /// `sum y_i b_i < 0`.
    pub certificate: Option<DVector<f64>>,
}

impl Solution {
    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }
}

/// KKT diagnostics for a candidate primal-dual pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktReport {
    /// Stationarity residual, scaled by `1 + ` the largest gradient term.
    pub stationarity: f64,
    pub primal_infeasibility: f64,
    pub complementarity: f64,
    pub dual_infeasibility: f64,
}

impl KktReport {
    pub fn residual(&self) -> f64 {
        self.stationarity.max(self.complementarity).max(self.dual_infeasibility)
    }
}

pub fn kkt_report(prog: &ConvexProgram, z: &DVector<f64>, lambda: &DVector<f64>) -> KktReport {
    let cons = constraints(prog);
    let grad_obj = &prog.hobj * z + &prog.fobj;
    let mut scale = grad_obj.amax();
    let mut stat = grad_obj;
    let mut primal: f64 = 0.0;
    let mut comp: f64 = 0.0;
    let mut dual: f64 = 0.0;
    for (c, &l) in cons.iter().zip(lambda.iter()) {
        let g = c.grad(z);
        scale = scale.max(l.abs() * g.amax());
        stat += g * l;
        let v = c.value(z);
        primal = primal.max(v);
        comp = comp.max((l * v).abs());
        dual = dual.max(-l);
    }
    KktReport {
        stationarity: stat.amax() / (1.0 + scale),
        primal_infeasibility: primal.max(0.0),
        complementarity: comp,
        dual_infeasibility: dual.max(0.0),
    }
}

/// Internal uniform constraint `z^T P z + lin^T z + r <= 0`.
struct Con {
    p: Option<DMatrix<f64>>,
    lin: DVector<f64>,
    r: f64,
}

impl Con {
    fn value(&self, z: &DVector<f64>) -> f64 {
        let quad = self.p.as_ref().map_or(0.0, |p| z.dot(&(p * z)));
        quad + self.lin.dot(z) + self.r
    }

    fn grad(&self, z: &DVector<f64>) -> DVector<f64> {
        match &self.p {
            Some(p) => p * z * 2.0 + &self.lin,
            None => self.lin.clone(),
        }
    }
}

fn constraints(prog: &ConvexProgram) -> Vec<Con> {
    let aff = prog.affine.iter().map(|c| Con {
        p: None,
        lin: c.a.clone(),
        r: -c.b,
    });
    let quad = prog.quad.iter().map(|c| Con {
        p: Some(symmetrize(&c.p)),
        lin: &c.q * 2.0,
        r: c.r,
    });
    aff.chain(quad).collect()
}

pub fn solve(prog: &ConvexProgram) -> Result<Solution> {
    prog.validate()?;
    if prog.quad.is_empty() {
        if let Some(chol) = definite_cholesky(&prog.hobj) {
            return Ok(dual_active_set(prog, &chol.inverse()));
        }
    }
    barrier(prog)
}

// ---------------------------------------------------------------------------
// Dual active set

fn dual_active_set(prog: &ConvexProgram, ginv: &DMatrix<f64>) -> Solution {
    let n = prog.dim();
    let ncons = prog.affine.len();
    let mut x = -(ginv * &prog.fobj);
    let mut active: Vec<usize> = Vec::new();
    let mut u: Vec<f64> = Vec::new();
    let tol = |i: usize| 1e-12 * (1.0 + prog.affine[i].b.abs() + prog.affine[i].a.amax());

    let finish = |x: DVector<f64>, active: &[usize], u: &[f64], iters: usize, status: Status| {
        let mut lambda = DVector::zeros(ncons);
        for (&j, &uj) in active.iter().zip(u) {
            lambda[j] = uj.max(0.0);
        }
        let kkt = kkt_report(prog, &x, &lambda).residual();
        Solution {
            z: x,
            status,
            kkt_residual: kkt,
            multipliers: lambda,
            iterations: iters,
            certificate: None,
        }
    };

    let mut iters = 0;
    loop {
        // most violated constraint outside the active set
        let mut pick: Option<(usize, f64)> = None;
        for (i, c) in prog.affine.iter().enumerate() {
            if active.contains(&i) {
                continue;
            }
            let viol = c.a.dot(&x) - c.b;
            if viol > tol(i) && pick.is_none_or(|(_, v)| viol > v) {
                pick = Some((i, viol));
            }
        }
        let Some((p, _)) = pick else {
            return finish(x, &active, &u, iters, Status::Optimal);
        };
        let np = -&prog.affine[p].a;
        let mut u_new = 0.0;

        loop {
            iters += 1;
            if iters > MAX_ITER {
                return finish(x, &active, &u, iters, Status::MaxIter);
            }
            let q = active.len();
            let (z, r) = if q == 0 {
                (ginv * &np, DVector::zeros(0))
            } else {
                let mut nmat = DMatrix::zeros(n, q);
                for (k, &j) in active.iter().enumerate() {
                    nmat.set_column(k, &(-&prog.affine[j].a));
                }
                let gn = ginv * &nmat;
                let Some(minv) = (nmat.transpose() * &gn).try_inverse() else {
                    return finish(x, &active, &u, iters, Status::MaxIter);
                };
                let nstar = &minv * gn.transpose();
                let r = &nstar * &np;
                let z = ginv * &np - &gn * &r;
                (z, r)
            };

            let mut t1 = f64::INFINITY;
            let mut drop_k = None;
            for k in 0..q {
                if r[k] > 0.0 {
                    let ratio = u[k] / r[k];
                    if ratio < t1 {
                        t1 = ratio;
                        drop_k = Some(k);
                    }
                }
            }
            let zn = z.dot(&np);
            let s_p = np.dot(&x) + prog.affine[p].b;
            let t2 = if zn > 1e-14 * np.norm_squared() * ginv.amax().max(1e-300) {
                -s_p / zn
            } else {
                f64::INFINITY
            };
            let t = t1.min(t2);

            if t.is_infinite() {
                let mut cert = DVector::zeros(ncons);
                cert[p] = 1.0;
                for (k, &j) in active.iter().enumerate() {
                    cert[j] = -r[k];
                }
                let mut sol = finish(x, &active, &u, iters, Status::Infeasible);
                sol.certificate = Some(cert);
                return sol;
            }

            for k in 0..q {
                u[k] -= t * r[k];
            }
            u_new += t;
            if t2.is_finite() {
                x += &z * t;
            }
            if t2 <= t1 {
                active.push(p);
                u.push(u_new);
                break;
            }
            let k = drop_k.expect("partial step always names a constraint");
            active.remove(k);
            u.remove(k);
        }
    }
}

// ---------------------------------------------------------------------------
// Barrier method

/// Unconstrained-structure view used by the centering loop: objective
/// `t (½ z^T H z + f^T z) - sum log(-g_i(z))`.
struct BarrierProblem<'a> {
    h: &'a DMatrix<f64>,
    f: &'a DVector<f64>,
    cons: &'a [Con],
}

impl BarrierProblem<'_> {
    fn value(&self, z: &DVector<f64>, t: f64) -> Option<f64> {
        let mut acc = t * (0.5 * z.dot(&(self.h * z)) + self.f.dot(z));
        for c in self.cons {
            let g = c.value(z);
            if !(g < 0.0) {
                return None;
            }
            acc -= (-g).ln();
        }
        Some(acc)
    }

    fn newton(&self, z: &DVector<f64>, t: f64) -> Option<(DVector<f64>, f64)> {
        let mut grad = (self.h * z + self.f) * t;
        let mut hess = self.h * t;
        for c in self.cons {
            let g = c.value(z);
            let dg = c.grad(z);
            grad += &dg / (-g);
            hess += &dg * dg.transpose() / (g * g);
            if let Some(p) = &c.p {
                hess += p * (2.0 / (-g));
            }
        }
        let hess = symmetrize(&hess);
        let dz = regularized_solve(&hess, &(-&grad))?;
        let decrement = -grad.dot(&dz);
        Some((dz, decrement))
    }

    /// Damped Newton centering. Returns the number of steps taken and
    /// whether the Newton decrement fell below tolerance.
    fn center(
        &self,
        z: &mut DVector<f64>,
        t: f64,
        max_steps: usize,
        stop: &dyn Fn(&DVector<f64>) -> bool,
    ) -> (usize, bool) {
        let mut steps = 0;
        while steps < max_steps {
            if stop(z) {
                break;
            }
            let Some((dz, decrement)) = self.newton(z, t) else {
                break;
            };
            if decrement / 2.0 <= NEWTON_TOL {
                return (steps, true);
            }
            let f0 = self.value(z, t).unwrap_or(f64::INFINITY);
            let mut step = 1.0;
            let mut moved = false;
            for _ in 0..60 {
                let cand = &*z + &dz * step;
                if let Some(fc) = self.value(&cand, t) {
                    if fc <= f0 - 0.25 * step * decrement {
                        moved = (&cand - &*z).amax() > 1e-12 * (1.0 + z.amax());
                        *z = cand;
                        break;
                    }
                }
                step *= 0.5;
            }
            steps += 1;
            if !moved {
                // no progress possible at working precision
                return (steps, true);
            }
        }
        (steps, false)
    }
}

/// Cholesky factor of `h` when it is positive definite by a relative
/// eigenvalue test; a singular matrix can factor through roundoff.
fn definite_cholesky(h: &DMatrix<f64>) -> Option<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    if is_pd(h) {
        h.clone().cholesky()
    } else {
        None
    }
}

fn regularized_solve(m: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let n = m.nrows();
    let scale = m.diagonal().amax().max(1.0);
    let mut reg = 0.0;
    for _ in 0..14 {
        let shifted = m + DMatrix::identity(n, n) * reg;
        if let Some(ch) = shifted.cholesky() {
            let x = ch.solve(rhs);
            if x.iter().all(|v| v.is_finite()) {
                return Some(x);
            }
        }
        reg = if reg == 0.0 { 1e-14 * scale } else { reg * 100.0 };
    }
    None
}

fn barrier(prog: &ConvexProgram) -> Result<Solution> {
    let n = prog.dim();
    let cons = constraints(prog);
    let ncons = cons.len();

    let mut z = match definite_cholesky(&prog.hobj) {
        Some(ch) => -ch.solve(&prog.fobj),
        None => DVector::zeros(n),
    };
    let mut iters = 0;

    if ncons == 0 {
        let Some(ch) = definite_cholesky(&prog.hobj) else {
            return Err(Error::Solver("objective is unbounded without constraints".into()));
        };
        let z = -ch.solve(&prog.fobj);
        let lambda = DVector::zeros(0);
        let kkt = kkt_report(prog, &z, &lambda).residual();
        return Ok(Solution {
            z,
            status: Status::Optimal,
            kkt_residual: kkt,
            multipliers: lambda,
            iterations: 0,
            certificate: None,
        });
    }

    let max_g = |z: &DVector<f64>| cons.iter().map(|c| c.value(z)).fold(f64::NEG_INFINITY, f64::max);

    if max_g(&z) < 0.0 && definite_cholesky(&prog.hobj).is_some() {
        // the unconstrained minimizer is strictly feasible
        let lambda = DVector::zeros(ncons);
        let kkt = kkt_report(prog, &z, &lambda).residual();
        return Ok(Solution {
            z,
            status: Status::Optimal,
            kkt_residual: kkt,
            multipliers: lambda,
            iterations: 0,
            certificate: None,
        });
    }

    // phase I: minimize s subject to g_i(z) <= s, from whichever of the
    // unconstrained minimizer and the origin violates less (a nearly
    // singular Hessian can put the former very far away)
    let origin = DVector::zeros(n);
    if max_g(&origin) < max_g(&z) || !z.iter().all(|v| v.is_finite()) {
        z = origin;
    }
    if max_g(&z) >= 0.0 {
        match phase_one(&cons, &z, &mut iters) {
            Some(zf) => z = zf,
            None => {
                let lambda = DVector::zeros(ncons);
                let kkt = kkt_report(prog, &z, &lambda).residual();
                return Ok(Solution {
                    z,
                    status: Status::Infeasible,
                    kkt_residual: kkt,
                    multipliers: lambda,
                    iterations: iters,
                    certificate: None,
                });
            }
        }
    }

    // phase II
    let problem = BarrierProblem {
        h: &prog.hobj,
        f: &prog.fobj,
        cons: &cons,
    };
    let mut t = initial_t(prog, &cons, &z);
    let best;
    loop {
        let (steps, centered) = problem.center(&mut z, t, CENTERING_STEPS.min(MAX_ITER.saturating_sub(iters)), &|_| false);
        iters += steps;
        let lambda = DVector::from_iterator(ncons, cons.iter().map(|c| 1.0 / (t * -c.value(&z))));
        if let Some((zp, lp)) = polish(prog, &cons, &z, &lambda, t) {
            let report = kkt_report(prog, &zp, &lp);
            if report.primal_infeasibility <= 1e-12 && report.residual() <= POLISH_ACCEPT {
                best = (zp, lp);
                break;
            }
        }
        let gap = ncons as f64 / t;
        if (centered && gap <= GAP_TOL * (1.0 + prog.objective(&z).abs())) || iters >= MAX_ITER {
            best = (z.clone(), lambda);
            break;
        }
        // an uncentered decade is repeated rather than pushed to the boundary
        if centered {
            t *= BARRIER_GROWTH;
        }
    }

    let (z, lambda): (DVector<f64>, DVector<f64>) = best;
    let report = kkt_report(prog, &z, &lambda);
    let status = if report.primal_infeasibility <= FEAS_TOL && report.residual() <= KKT_TOL {
        Status::Optimal
    } else {
        Status::MaxIter
    };
    Ok(Solution {
        z,
        status,
        kkt_residual: report.residual(),
        multipliers: lambda,
        iterations: iters,
        certificate: None,
    })
}

/// Barrier weight whose central-path condition `t ∇f + ∇φ = 0` best fits
/// the starting point in least squares, kept within `[1e-8, 1]`.
fn initial_t(prog: &ConvexProgram, cons: &[Con], z: &DVector<f64>) -> f64 {
    let grad_f = &prog.hobj * z + &prog.fobj;
    let mut grad_phi = DVector::zeros(z.len());
    for c in cons {
        grad_phi += c.grad(z) / (-c.value(z));
    }
    let denom = grad_f.norm_squared();
    if denom == 0.0 {
        return 1.0;
    }
    (-grad_f.dot(&grad_phi) / denom).clamp(1e-8, 1.0)
}

/// Finds a strictly feasible point, or `None` if the feasibility problem
/// stalls at a non-negative level. A point barely inside a curved boundary
/// makes a poor barrier start, so the search continues until every
/// constraint holds with a margin, falling back to the deepest strictly
/// feasible point seen.
///
/// The search is confined to a ball around `z0` so that every stage has a
/// centre even when some constraint decreases without bound. Ending on the
/// ball's edge without a feasible point widens it a hundredfold.
fn phase_one(cons: &[Con], z0: &DVector<f64>, iters: &mut usize) -> Option<DVector<f64>> {
    let n = z0.len();
    // rows are divided by their gradient norm at z0 so that violations
    // are compared roughly as distances
    let mut ext: Vec<Con> = cons
        .iter()
        .map(|c| {
            let norm = c.grad(z0).norm();
            let k = if norm > 1e-12 { 1.0 / norm } else { 1.0 };
            let mut lin = DVector::zeros(n + 1);
            lin.rows_mut(0, n).copy_from(&(&c.lin * k));
            lin[n] = -1.0;
            let p = c.p.as_ref().map(|p| {
                let mut pe = DMatrix::zeros(n + 1, n + 1);
                pe.view_mut((0, 0), (n, n)).copy_from(&(p * k));
                pe
            });
            Con { p, lin, r: c.r * k }
        })
        .collect();
    let mut w = DVector::zeros(n + 1);
    w.rows_mut(0, n).copy_from(z0);
    let start = ext.iter().map(|c| c.value(&w)).fold(f64::NEG_INFINITY, f64::max);
    w[n] = start.abs() + 1.0 + start;

    // ‖z - z0‖² <= radius²
    let mut ball_p = DMatrix::zeros(n + 1, n + 1);
    ball_p.view_mut((0, 0), (n, n)).fill_with_identity();
    let mut ball_lin = DVector::zeros(n + 1);
    ball_lin.rows_mut(0, n).copy_from(&(z0 * -2.0));
    let mut radius = 10.0 * (1.0 + z0.amax() + start.abs());
    ext.push(Con {
        p: Some(ball_p),
        lin: ball_lin,
        r: z0.norm_squared() - radius * radius,
    });
    let ball = ext.len() - 1;

    let h = DMatrix::zeros(n + 1, n + 1);
    let mut f = DVector::zeros(n + 1);
    f[n] = 1.0;

    let max_g = |z: &DVector<f64>| cons.iter().map(|c| c.value(z)).fold(f64::NEG_INFINITY, f64::max);
    let margin = PHASE_ONE_MARGIN * (1.0 + cons.iter().map(|c| c.r.abs()).fold(0.0, f64::max));
    let best: std::cell::RefCell<Option<(f64, DVector<f64>)>> = std::cell::RefCell::new(None);
    let deep_enough = |w: &DVector<f64>| {
        let z = w.rows(0, n).into_owned();
        let g = max_g(&z);
        if g < 0.0 {
            let mut b = best.borrow_mut();
            if b.as_ref().is_none_or(|(bg, _)| g < *bg) {
                *b = Some((g, z));
            }
        }
        g <= -margin
    };
    let mut widenings = 0;
    'widen: loop {
        // t only grows once a stage is centered
        let mut t = 1.0;
        loop {
            let final_stage = ext.len() as f64 / t <= GAP_TOL;
            let budget = if final_stage { MAX_ITER.saturating_sub(*iters) } else { CENTERING_STEPS };
            let problem = BarrierProblem { h: &h, f: &f, cons: &ext };
            let (steps, centered) =
                problem.center(&mut w, t, budget.min(MAX_ITER.saturating_sub(*iters)), &deep_enough);
            *iters += steps;
            if deep_enough(&w) {
                return Some(w.rows(0, n).into_owned());
            }
            if *iters >= MAX_ITER {
                break 'widen;
            }
            if final_stage {
                let dist = (w.rows(0, n) - z0).norm();
                if dist >= 0.5 * radius && best.borrow().is_none() && widenings < 4 {
                    widenings += 1;
                    radius *= 100.0;
                    ext[ball].r = z0.norm_squared() - radius * radius;
                    continue 'widen;
                }
                break 'widen;
            }
            if centered {
                t *= BARRIER_GROWTH;
            }
        }
    }
    best.into_inner().map(|(_, z)| z)
}

/// Newton iterations on the KKT equations of the constraints that look
/// active at the barrier solution. A constraint whose multiplier comes out
/// negative is dropped and the system solved again. Returns `None` unless
/// the result is a better certified point.
fn polish(
    prog: &ConvexProgram,
    cons: &[Con],
    z0: &DVector<f64>,
    lambda0: &DVector<f64>,
    t: f64,
) -> Option<(DVector<f64>, DVector<f64>)> {
    let threshold = 1.0 / t.sqrt();
    let mut act: Vec<usize> = (0..cons.len()).filter(|&i| -cons[i].value(z0) < threshold).collect();
    loop {
        let (z, lam) = kkt_newton(prog, cons, &act, z0, lambda0)?;
        let worst = lam.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1));
        match worst {
            Some((j, &l)) if l < -1e-12 => {
                act.remove(j);
            }
            _ => {
                let mut full = DVector::zeros(cons.len());
                for (j, &i) in act.iter().enumerate() {
                    full[i] = lam[j].max(0.0);
                }
                let before = kkt_report(prog, z0, lambda0);
                let after = kkt_report(prog, &z, &full);
                let better = after.primal_infeasibility <= 1e-12
                    && after.residual() <= before.residual()
                    && prog.objective(&z) <= prog.objective(z0) + 1e-9 * (1.0 + prog.objective(z0).abs());
                return better.then_some((z, full));
            }
        }
    }
}

/// Newton's method on stationarity plus `g_i(z) = 0` for `i` in `act`.
fn kkt_newton(
    prog: &ConvexProgram,
    cons: &[Con],
    act: &[usize],
    z0: &DVector<f64>,
    lambda0: &DVector<f64>,
) -> Option<(DVector<f64>, DVector<f64>)> {
    let n = prog.dim();
    let k = act.len();
    let mut z = z0.clone();
    let mut lam: DVector<f64> = DVector::from_iterator(k, act.iter().map(|&i| lambda0[i]));
    for _ in 0..30 {
        let mut resid = DVector::zeros(n + k);
        let mut jac = DMatrix::zeros(n + k, n + k);
        let mut stat = &prog.hobj * &z + &prog.fobj;
        let mut hess = prog.hobj.clone();
        for (j, &i) in act.iter().enumerate() {
            let g = cons[i].grad(&z);
            stat += &g * lam[j];
            if let Some(p) = &cons[i].p {
                hess += p * (2.0 * lam[j]);
            }
            jac.view_mut((0, n + j), (n, 1)).copy_from(&g);
            jac.view_mut((n + j, 0), (1, n)).copy_from(&g.transpose());
            resid[n + j] = cons[i].value(&z);
        }
        resid.rows_mut(0, n).copy_from(&stat);
        jac.view_mut((0, 0), (n, n)).copy_from(&hess);
        if resid.amax() <= 1e-14 * (1.0 + stat.amax()) {
            break;
        }
        // minimum-norm step: directions with no curvature (free slack
        // variables) stay where the barrier left them
        let tol = 1e-13 * jac.amax().max(1.0);
        let step = jac.svd(true, true).solve(&(-&resid), tol).ok()?;
        if step.iter().any(|v| !v.is_finite()) {
            return None;
        }
        z += step.rows(0, n);
        lam += step.rows(n, k);
    }
    Some((z, lam))
}

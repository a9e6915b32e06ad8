//! Slow, straightforward reference computations used as test oracles, plus
//! random instance generators. Nothing here shares code with `riskcbf`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn random_vector<R: Rng>(rng: &mut R, d: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(d, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

pub fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

/// `G G^T` with `G` of shape `d × rank`.
pub fn random_psd<R: Rng>(rng: &mut R, d: usize, rank: usize, scale: f64) -> DMatrix<f64> {
    let g = random_matrix(rng, d, rank, scale.sqrt());
    let m = &g * g.transpose();
    (&m + m.transpose()) * 0.5
}

/// Full-rank PSD plus `floor · I`.
pub fn random_spd<R: Rng>(rng: &mut R, d: usize, scale: f64, floor: f64) -> DMatrix<f64> {
    random_psd(rng, d, d, scale) + DMatrix::identity(d, d) * floor
}

/// Random symmetric (indefinite in general) matrix.
pub fn random_symmetric<R: Rng>(rng: &mut R, d: usize, scale: f64) -> DMatrix<f64> {
    let a = random_matrix(rng, d, d, scale);
    (&a + a.transpose()) * 0.5
}

/// Factor `F` with `F F^T = m` for symmetric PSD `m`, from an eigendecomposition.
fn psd_factor(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new((m + m.transpose()) * 0.5);
    let mut f = eig.eigenvectors.clone();
    for (j, lam) in eig.eigenvalues.iter().enumerate() {
        let s = lam.max(0.0).sqrt();
        f.column_mut(j).scale_mut(s);
    }
    f
}

fn positive_part_trace(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new((m + m.transpose()) * 0.5)
        .eigenvalues
        .iter()
        .filter(|v| **v > 0.0)
        .sum()
}

/// Objective `β + Tr((F^T M(β) F)_+)/ε` with `F F^T = [[Σ+μμ^T, μ], [μ^T, 1]]`,
/// evaluated from scratch.
pub fn oracle_threshold_objective(
    mu: &DVector<f64>,
    sigma: &DMatrix<f64>,
    p: &DMatrix<f64>,
    q: &DVector<f64>,
    r: f64,
    epsilon: f64,
    beta: f64,
) -> f64 {
    let d = mu.len();
    let mut omega = DMatrix::zeros(d + 1, d + 1);
    omega.view_mut((0, 0), (d, d)).copy_from(&(sigma + mu * mu.transpose()));
    for i in 0..d {
        omega[(i, d)] = mu[i];
        omega[(d, i)] = mu[i];
    }
    omega[(d, d)] = 1.0;
    let mut m = DMatrix::zeros(d + 1, d + 1);
    m.view_mut((0, 0), (d, d)).copy_from(p);
    for i in 0..d {
        m[(i, d)] = q[i];
        m[(d, i)] = q[i];
    }
    m[(d, d)] = r - beta;
    let f = psd_factor(&omega);
    beta + positive_part_trace(&(f.transpose() * m * f)) / epsilon
}

/// Worst-case CVaR of `ξ^T P ξ + 2 q^T ξ + r` as the minimum of `g` over a
/// `β` grid of the given step, followed by a finer local grid around the
/// best point. The search interval comes from the bounds
/// `β* ≤ g(E[L])` and `g(β) ≥ β + (E[L] - β)/ε`.
///
/// The grid is scanned on a sublattice of 64 steps first and then in full
/// within one coarse cell of the coarse minimum. Since `g` is convex the
/// result equals the minimum over the full grid.
pub fn oracle_wc_cvar_quadratic(
    mu: &DVector<f64>,
    sigma: &DMatrix<f64>,
    p: &DMatrix<f64>,
    q: &DVector<f64>,
    r: f64,
    epsilon: f64,
    step: f64,
) -> f64 {
    let g = |b: f64| oracle_threshold_objective(mu, sigma, p, q, r, epsilon, b);
    let mean = (p * (sigma + mu * mu.transpose())).trace() + 2.0 * q.dot(mu) + r;
    let hi = g(mean);
    let lo = if epsilon < 1.0 {
        (mean / epsilon - hi) / (1.0 / epsilon - 1.0)
    } else {
        mean
    };
    let lo = lo.min(mean) - step;
    let hi = hi.max(mean) + step;
    let coarse = 64.0 * step;
    let (b, _) = grid_min_1d(&g, lo, hi, coarse);
    let (mut best_b, mut best) = grid_min_1d(&g, (b - coarse).max(lo), (b + coarse).min(hi), step);
    let mut h = step;
    for _ in 0..3 {
        let (b, v) = grid_min_1d(&g, best_b - h, best_b + h, h / 100.0);
        if v < best {
            best = v;
            best_b = b;
        }
        h /= 100.0;
    }
    best
}

fn grid_min_1d(g: &impl Fn(f64) -> f64, lo: f64, hi: f64, step: f64) -> (f64, f64) {
    let n = ((hi - lo) / step).ceil() as usize;
    (0..=n)
        .map(|i| lo + i as f64 * step)
        .map(|b| (b, g(b)))
        .fold((lo, f64::INFINITY), |acc, cur| if cur.1 < acc.1 { cur } else { acc })
}

/// Joseph-form posterior covariance `(I-KH) P (I-KH)^T + K R K^T`; valid
/// for any gain.
pub fn joseph_covariance(p: &DMatrix<f64>, k: &DMatrix<f64>, h: &DMatrix<f64>, r: &DMatrix<f64>) -> DMatrix<f64> {
    let n = p.nrows();
    let a = DMatrix::identity(n, n) - k * h;
    &a * p * a.transpose() + k * r * k.transpose()
}

/// Best grid point found.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridMin {
    pub x: f64,
    pub y: f64,
    pub value: f64,
}

/// Minimizes `objective` over the feasible points of a square grid of the
/// given step and half width around `center`. Each refinement level then
/// re-grids a window of ten cells around the incumbent at a tenth of the
/// step, recentring until the incumbent stops moving (so the search can
/// slide along an active constraint).
pub fn grid_minimize_2d(
    objective: impl Fn(f64, f64) -> f64,
    feasible: impl Fn(f64, f64) -> bool,
    center: (f64, f64),
    half_width: f64,
    step: f64,
    refinements: usize,
) -> Option<GridMin> {
    let mut best = grid_pass(&objective, &feasible, center, half_width, step)?;
    let mut h = step;
    for _ in 0..refinements {
        for _ in 0..100_000 {
            match grid_pass(&objective, &feasible, (best.x, best.y), 10.0 * h, h / 10.0) {
                Some(b) if b.value < best.value => best = b,
                _ => break,
            }
        }
        h /= 10.0;
    }
    Some(best)
}

fn grid_pass(
    objective: &impl Fn(f64, f64) -> f64,
    feasible: &impl Fn(f64, f64) -> bool,
    center: (f64, f64),
    half_width: f64,
    step: f64,
) -> Option<GridMin> {
    let n = (half_width / step).round() as i64;
    let mut best: Option<GridMin> = None;
    for i in -n..=n {
        let x = center.0 + i as f64 * step;
        for j in -n..=n {
            let y = center.1 + j as f64 * step;
            if !feasible(x, y) {
                continue;
            }
            let value = objective(x, y);
            if best.is_none_or(|b| value < b.value) {
                best = Some(GridMin { x, y, value });
            }
        }
    }
    best
}

/// Sample mean and covariance of the columns' rows, i.e. of a list of draws.
pub fn sample_moments(draws: &[DVector<f64>]) -> (DVector<f64>, DMatrix<f64>) {
    let d = draws[0].len();
    let n = draws.len() as f64;
    let mean = draws.iter().fold(DVector::zeros(d), |acc, x| acc + x) / n;
    let cov = draws
        .iter()
        .fold(DMatrix::zeros(d, d), |acc, x| acc + (x - &mean) * (x - &mean).transpose())
        / (n - 1.0);
    (mean, cov)
}

//! Kalman prediction and update.
//!
//! The filter only carries moments: the belief is the pair
//! `(mean, covariance)` and never a sampled vector.

use nalgebra::{DMatrix, DVector};

use crate::linalg::{clip_psd, symmetrize};
use crate::model::{BeliefState, SystemModel};
use crate::{Error, Result};

/// One-step-ahead mean and covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedBelief {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    /// Time index of the prediction target.
    pub time_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub z: DVector<f64>,
    pub time_index: usize,
}

/// `mean = A x + B u`, `cov = A P A^T + Q`.
pub fn predict(belief: &BeliefState, model: &SystemModel, u: &DVector<f64>) -> Result<PredictedBelief> {
    if belief.dim() != model.n() {
        return Err(Error::dim("predict: belief", model.n(), belief.dim()));
    }
    if u.len() != model.m() {
        return Err(Error::dim("predict: input", model.m(), u.len()));
    }
    let a = model.a();
    let mean = a * &belief.mean + model.b() * u;
    let cov = symmetrize(&(a * &belief.cov * a.transpose() + model.q()));
    Ok(PredictedBelief {
        mean,
        cov,
        time_index: belief.time_index + 1,
    })
}

/// `K = P H^T S^{-1}` with `S = H P H^T + R`, solved through a Cholesky
/// factor of `S`.
pub fn gain(pred: &PredictedBelief, model: &SystemModel) -> Result<DMatrix<f64>> {
    if pred.cov.nrows() != model.n() {
        return Err(Error::dim("gain", model.n(), pred.cov.nrows()));
    }
    let h = model.h();
    let s = symmetrize(&(h * &pred.cov * h.transpose() + model.r()));
    let chol = s.cholesky().ok_or(Error::SingularInnovation)?;
    // K^T = S^{-1} H P, since S and P are symmetric
    let kt = chol.solve(&(h * &pred.cov));
    Ok(kt.transpose())
}

/// Measurement update with the given gain; the covariance uses
/// `(I - K H) P`, then is symmetrized and clipped to PSD.
pub fn update(
    pred: &PredictedBelief,
    k: &DMatrix<f64>,
    z: &Measurement,
    model: &SystemModel,
) -> Result<BeliefState> {
    let n = model.n();
    let ny = model.ny();
    if k.shape() != (n, ny) {
        return Err(Error::dim("update: gain", format!("{n}×{ny}"), format!("{:?}", k.shape())));
    }
    if z.z.len() != ny {
        return Err(Error::dim("update: measurement", ny, z.z.len()));
    }
    let h = model.h();
    let innovation = &z.z - h * &pred.mean;
    let mean = &pred.mean + k * innovation;
    let cov = (DMatrix::identity(n, n) - k * h) * &pred.cov;
    Ok(BeliefState {
        mean,
        cov: clip_psd(&cov),
        time_index: pred.time_index,
    })
}

/// Predict, compute the optimal gain, and update in one call.
pub fn step(
    belief: &BeliefState,
    model: &SystemModel,
    u: &DVector<f64>,
    z: &Measurement,
) -> Result<BeliefState> {
    let pred = predict(belief, model, u)?;
    let k = gain(&pred, model)?;
    update(&pred, &k, z, model)
}

//! Least squares identification of the discretized plant.
//!
//! Each sample is one transition (x_k, u_k, x_{k+1}) at a fixed step. The
//! regression
//!
//! ```text
//! x_{k+1} = a_d x_k + b_d u_k + c + v_k
//! ```
//!
//! is solved by ordinary least squares. The constant term c is interpreted by
//! mode: as the discrete load increment (load disturbance mode) or, for a
//! constant sensor offset xi on the measurements, via c = (1 - a_d) xi
//! (sensor bias mode). The two interpretations are observationally
//! equivalent, so a fit commits to exactly one mode.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::sde::ContinuousModel;
use crate::util::expm1_over;

/// Singular value ratio below which the regressors are declared collinear.
const RANK_TOL: f64 = 1e-6;
/// |1 - a_d| below this leaves a sensor bias unidentifiable.
const BIAS_TOL: f64 = 1e-9;

/// One observed transition under a held input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub x: f64,
    pub u: f64,
    pub x_next: f64,
}

/// A batch of transitions sharing one sampling step.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub dt: f64,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidConfig(format!("dataset dt must be positive, got {dt}")));
        }
        Ok(Self { samples, dt })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Which physical explanation the constant regression term receives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitMode {
    /// Constant term is the discrete load increment.
    LoadDisturbance,
    /// Constant term stems from a sensor offset xi: c = (1 - a_d) xi.
    SensorBias,
}

/// Ordinary least squares estimate of the discrete model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LsEstimate {
    pub a_d: f64,
    pub b_d: f64,
    /// Discrete load increment (load mode) or sensor offset xi (bias mode).
    pub dist_term: f64,
    /// Sample variance of the fit residuals.
    pub resid_var: f64,
    /// Standard errors of the raw regression coefficients (a_d, b_d, constant
    /// term), from resid_var times the inverted Gram matrix. In sensor bias
    /// mode the third entry still refers to the constant term, not to xi.
    pub std_err: [f64; 3],
    pub mode: FitMode,
}

/// Fits the three-parameter regression by least squares.
///
/// Columns are scaled to unit norm before solving, and the scaled Gram matrix
/// is eigen-decomposed; a singular value ratio under 1e-6 (or any all-zero
/// column) is reported as rank deficient.
pub fn least_squares_fit(data: &Dataset, mode: FitMode) -> Result<LsEstimate> {
    let n = data.samples.len();
    if n < 3 {
        return Err(Error::RankDeficient);
    }

    let mut col_sq = [0.0f64; 3];
    for s in &data.samples {
        col_sq[0] += s.x * s.x;
        col_sq[1] += s.u * s.u;
        col_sq[2] += 1.0;
    }
    let scale = [col_sq[0].sqrt(), col_sq[1].sqrt(), col_sq[2].sqrt()];
    if scale.iter().any(|&s| s == 0.0 || !s.is_finite()) {
        return Err(Error::RankDeficient);
    }

    let mut gram: Matrix3<f64> = Matrix3::zeros();
    let mut rhs: Vector3<f64> = Vector3::zeros();
    for s in &data.samples {
        let r = [s.x / scale[0], s.u / scale[1], 1.0 / scale[2]];
        for i in 0..3 {
            for j in 0..3 {
                gram[(i, j)] += r[i] * r[j];
            }
            rhs[i] += r[i] * s.x_next;
        }
    }

    let eig = gram.symmetric_eigen();
    let lam_max = eig.eigenvalues.max();
    let lam_min = eig.eigenvalues.min();
    if !(lam_min > 0.0) || (lam_min / lam_max).sqrt() < RANK_TOL {
        return Err(Error::RankDeficient);
    }
    let proj = eig.eigenvectors.transpose() * rhs;
    let mut theta_scaled = Vector3::zeros();
    for i in 0..3 {
        theta_scaled += eig.eigenvectors.column(i) * (proj[i] / eig.eigenvalues[i]);
    }
    let theta = [theta_scaled[0] / scale[0], theta_scaled[1] / scale[1], theta_scaled[2] / scale[2]];

    let mut rss = 0.0;
    for s in &data.samples {
        let r = s.x_next - (theta[0] * s.x + theta[1] * s.u + theta[2]);
        rss += r * r;
    }
    let resid_var = if n > 3 { rss / (n - 3) as f64 } else { 0.0 };

    // cov(theta) = resid_var (X'X)^{-1}; with column scaling D this is
    // D^{-1} V L^{-1} V' D^{-1} in terms of the scaled Gram eigenpairs.
    let mut std_err = [0.0f64; 3];
    for j in 0..3 {
        let mut inv_jj = 0.0;
        for i in 0..3 {
            let v = eig.eigenvectors[(j, i)];
            inv_jj += v * v / eig.eigenvalues[i];
        }
        std_err[j] = (resid_var * inv_jj).sqrt() / scale[j];
    }

    let dist_term = match mode {
        FitMode::LoadDisturbance => theta[2],
        FitMode::SensorBias => {
            let denom = 1.0 - theta[0];
            if denom.abs() < BIAS_TOL {
                return Err(Error::BiasUnidentifiable { denom });
            }
            theta[2] / denom
        }
    };

    Ok(LsEstimate { a_d: theta[0], b_d: theta[1], dist_term, resid_var, std_err, mode })
}

/// Recovers the diffusion coefficient from the residual variance:
/// `q = sqrt(resid_var * 2 a / (e^{2 a dt} - 1))` with `a = ln(a_d)/dt`.
pub fn estimate_noise(est: &LsEstimate, dt: f64) -> Result<f64> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidConfig(format!("dt must be positive, got {dt}")));
    }
    if !(est.a_d > 0.0) {
        return Err(Error::NonInvertibleDiscretization { a_d: est.a_d });
    }
    let z = est.a_d.ln();
    Ok((est.resid_var.max(0.0) / (dt * expm1_over(2.0 * z))).sqrt())
}

/// Inverts the zero-order-hold discretization: `a = ln(a_d)/dt`,
/// `b = a b_d/(a_d - 1)` and likewise for the load term, with the
/// `b_d/dt` limits as `a_d -> 1`. The diffusion coefficient comes from
/// [`estimate_noise`]. In sensor bias mode the offset is a measurement
/// artifact, so the continuous model carries no load term.
pub fn to_continuous(est: &LsEstimate, dt: f64) -> Result<ContinuousModel> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidConfig(format!("dt must be positive, got {dt}")));
    }
    if !(est.a_d > 0.0) {
        return Err(Error::NonInvertibleDiscretization { a_d: est.a_d });
    }
    let z = est.a_d.ln();
    let denom = dt * expm1_over(z);
    let a = z / dt;
    let b = est.b_d / denom;
    let eps_eff = match est.mode {
        FitMode::LoadDisturbance => est.dist_term / denom,
        FitMode::SensorBias => 0.0,
    };
    let q = estimate_noise(est, dt)?;
    ContinuousModel::new(a, b, eps_eff, q)
}

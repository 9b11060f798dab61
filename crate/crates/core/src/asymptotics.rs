//! Limit-law constants: the universal constant `Γ`, the moment matrices `U`
//! and `V`, the reparametrization Jacobian `W`, the covariances `K` of
//! `(σ̂0², η̂)` and `J` of `(θ̂2, θ̂1)`, and the information `G(λ*)` of the
//! first-coordinate rate.

use std::f64::consts::PI;
use std::fmt;
use std::ops::Mul;

use serde::ser::{Serialize, SerializeSeq, Serializer};

use crate::error::{Error, Result};
use crate::model::ThetaParams;
use crate::pipeline::DriftEstimates;
use crate::warnings::Warning;

pub const DEFAULT_GAMMA_TOLERANCE: f64 = 1e-12;
/// Above this, `V` is treated as singular.
pub const MAX_CONDITION: f64 = 1e12;
/// Above this, a warning is attached.
pub const WARN_CONDITION: f64 = 1e8;

/// Row-major 2×2 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self([[a, b], [c, d]])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[i][j]
    }

    pub fn transpose(&self) -> Self {
        let [[a, b], [c, d]] = self.0;
        Self::new(a, c, b, d)
    }

    pub fn determinant(&self) -> f64 {
        let [[a, b], [c, d]] = self.0;
        a * d - b * c
    }

    /// Adjugate over determinant.
    pub fn inverse(&self) -> Result<Self> {
        let det = self.determinant();
        let scale = self.0.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        if det == 0.0 || !det.is_finite() || det.abs() <= f64::EPSILON * scale * scale {
            return Err(Error::Numerical(format!("singular 2x2 matrix (determinant {det:e})")));
        }
        let [[a, b], [c, d]] = self.0;
        Ok(Self::new(d / det, -b / det, -c / det, a / det))
    }

    /// `λ_max/λ_min` of a symmetric positive definite matrix; `∞` otherwise.
    pub fn condition_number(&self) -> f64 {
        let [[a, b], [_, d]] = self.0;
        let mean = 0.5 * (a + d);
        let radius = (0.25 * (a - d).powi(2) + b * b).sqrt();
        let (hi, lo) = (mean + radius, mean - radius);
        // the smaller root loses precision when the matrix is stiff
        let lo = if lo > 0.0 { self.determinant() / hi } else { lo };
        if lo > 0.0 {
            hi / lo
        } else {
            f64::INFINITY
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        let [[a, b], [c, d]] = self.0;
        Self::new(s * a, s * b, s * c, s * d)
    }

    /// Averages off-diagonal entries.
    pub fn symmetrized(&self) -> Self {
        let off = 0.5 * (self.0[0][1] + self.0[1][0]);
        Self::new(self.0[0][0], off, off, self.0[1][1])
    }
}

impl Mul for Mat2 {
    type Output = Mat2;

    fn mul(self, rhs: Mat2) -> Mat2 {
        let (l, r) = (self.0, rhs.0);
        Mat2(std::array::from_fn(|i| {
            std::array::from_fn(|j| l[i][0] * r[0][j] + l[i][1] * r[1][j])
        }))
    }
}

impl Serialize for Mat2 {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(2))?;
        for row in &self.0 {
            seq.serialize_element(row)?;
        }
        seq.end()
    }
}

impl fmt::Display for Mat2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [[a, b], [c, d]] = self.0;
        write!(f, "[[{a}, {b}], [{c}, {d}]]")
    }
}

/// `I(r) = 2√(r+1) - √(r+2) - √r`, rationalized to avoid cancellation.
pub fn second_difference(r: f64) -> f64 {
    let (s0, s1, s2) = (r.sqrt(), (r + 1.0).sqrt(), (r + 2.0).sqrt());
    2.0 / ((s2 + s0) * (s1 + s0) * (s2 + s1))
}

/// `Γ = (1/π) Σ_{r≥0} I(r)² + 2/π`.
///
/// `I(r) ≤ r^{-3/2}/4`, so the tail from `R` is at most
/// `(R^{-3} + R^{-2}/2)/(16π)`; summation stops once that drops below
/// `tolerance`.
pub fn gamma_const(tolerance: f64) -> Result<f64> {
    Ok(gamma_partial(gamma_terms(tolerance)?))
}

/// Smallest `R` whose tail bound is below `tolerance`.
pub fn gamma_terms(tolerance: f64) -> Result<usize> {
    if !(tolerance > 0.0) {
        return Err(Error::domain(format!("tolerance must be positive, got {tolerance}")));
    }
    let tail = |r: f64| (r.powi(-3) + 0.5 * r.powi(-2)) / (16.0 * PI);
    let mut terms = 1usize;
    while tail(terms as f64) >= tolerance {
        terms *= 2;
    }
    let (mut lo, mut hi) = (terms / 2, terms);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if tail(mid as f64) < tolerance {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi.max(1))
}

/// `(1/π) Σ_{r<terms} I(r)² + 2/π`, summed from the small end.
pub fn gamma_partial(terms: usize) -> f64 {
    let sum: f64 = (0..terms).rev().map(|r| second_difference(r as f64).powi(2)).sum();
    (sum + 2.0) / PI
}

/// `∫_lo^hi y^p e^{-a y} dy`, `p ∈ {0, 1, 2}`.
fn exp_moment(p: i32, a: f64, lo: f64, hi: f64) -> f64 {
    if a.abs() * hi.max(lo.abs()) < 1.0 {
        // Taylor series in a; the closed form cancels badly here
        let mut sum = 0.0;
        let mut coef = 1.0;
        for n in 0..60 {
            let q = p + n + 1;
            let term = coef * (hi.powi(q) - lo.powi(q)) / q as f64;
            sum += term;
            if term.abs() <= 1e-18 * sum.abs() {
                break;
            }
            coef *= -a / (n + 1) as f64;
        }
        sum
    } else {
        let antiderivative = |y: f64| {
            let poly = match p {
                0 => 1.0 / a,
                1 => y / a + 1.0 / (a * a),
                _ => y * y / a + 2.0 * y / (a * a) + 2.0 / (a * a * a),
            };
            -(-a * y).exp() * poly
        };
        antiderivative(hi) - antiderivative(lo)
    }
}

fn moment_matrix(a: f64, theta2: f64, delta: f64) -> Mat2 {
    let (lo, hi) = (delta, 1.0 - delta);
    let s = 1.0 / theta2.sqrt();
    let off = -s * exp_moment(1, a, lo, hi);
    Mat2::new(exp_moment(0, a, lo, hi), off, off, s * s * exp_moment(2, a, lo, hi))
}

/// `U` (weight `e^{-4η y}`) and `V` (weight `e^{-2η y}`) over `[δ, 1-δ]`,
/// with off-diagonals scaled by `-1/√θ2` and the lower diagonal by `1/θ2`.
pub fn uv_matrices(eta: f64, theta2: f64, delta: f64) -> Result<(Mat2, Mat2)> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::domain(format!("delta must lie in (0, 1/2), got {delta}")));
    }
    if !(theta2 > 0.0) {
        return Err(Error::domain(format!("theta2 must be positive, got {theta2}")));
    }
    Ok((moment_matrix(4.0 * eta, theta2, delta), moment_matrix(2.0 * eta, theta2, delta)))
}

/// Jacobian of `(θ2, θ1)` with respect to `(σ0², η)` at the true point.
pub fn w_matrix(theta1: f64, theta2: f64) -> Result<Mat2> {
    if !(theta2 > 0.0) {
        return Err(Error::domain(format!("theta2 must be positive, got {theta2}")));
    }
    Ok(Mat2::new(
        -2.0 * theta2.powf(1.5),
        0.0,
        -2.0 * theta1 * theta2.sqrt(),
        theta2,
    ))
}

/// Everything in the joint law of `(θ̂2, θ̂1)`.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ContrastCovariance {
    pub gamma: f64,
    pub u_mat: Mat2,
    pub v_mat: Mat2,
    pub w_mat: Mat2,
    /// Covariance of `√(Nm)(θ̂2 - θ2*, θ̂1 - θ1*)`.
    pub j_mat: Mat2,
    /// Covariance of `√(Nm)(σ̂0² - σ0*², η̂ - η*)`.
    pub k_mat: Mat2,
    pub v_condition: f64,
    pub delta: f64,
}

/// `K = (πΓ/θ2) V⁻¹UV⁻¹` and `J = WKWᵀ`.
pub fn covariance_matrices(theta: &ThetaParams, delta: f64) -> Result<ContrastCovariance> {
    let gamma = gamma_const(DEFAULT_GAMMA_TOLERANCE)?;
    let (u_mat, v_mat) = uv_matrices(theta.eta(), theta.theta2, delta)?;
    let v_condition = v_mat.condition_number();
    if !(v_condition <= MAX_CONDITION) {
        return Err(Error::Numerical(format!("V is near singular (condition number {v_condition:e})")));
    }
    let v_inv = v_mat.inverse()?;
    let k_mat = (v_inv * u_mat * v_inv).scale(PI * gamma / theta.theta2).symmetrized();
    let w_mat = w_matrix(theta.theta1, theta.theta2)?;
    let j_mat = (w_mat * k_mat * w_mat.transpose()).symmetrized();
    Ok(ContrastCovariance {
        gamma,
        u_mat,
        v_mat,
        w_mat,
        j_mat,
        k_mat,
        v_condition,
        delta,
    })
}

/// `G(λ) = x1(0)²(1 - e^{-2λ})/(2λ)`.
pub fn g_fisher(lambda: f64, x1_0: f64) -> Result<f64> {
    g_fisher_horizon(lambda, x1_0, 1.0)
}

/// `x1(0)²(1 - e^{-2λT})/(2λ)`; equals [`g_fisher`] at `T = 1`.
pub fn g_fisher_horizon(lambda: f64, x1_0: f64, horizon: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::domain(format!("lambda_1 must be positive, got {lambda}")));
    }
    if !(horizon > 0.0) {
        return Err(Error::domain(format!("horizon must be positive, got {horizon}")));
    }
    Ok(x1_0 * x1_0 * -(-2.0 * lambda * horizon).exp_m1() / (2.0 * lambda))
}

/// Full report for a true parameter, cutoff, initial coefficient and horizon.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct AsymptoticCovariance {
    pub theta: ThetaParams,
    pub sigma0_sq: f64,
    pub eta: f64,
    pub lambda1: f64,
    pub x1_0: f64,
    pub horizon: f64,
    #[serde(flatten)]
    pub contrast: ContrastCovariance,
    pub g_fisher: f64,
    /// Limit variances of the three standardized errors.
    pub variances: [f64; 3],
    pub warnings: Vec<Warning>,
}

impl AsymptoticCovariance {
    pub fn assemble(theta: &ThetaParams, delta: f64, x1_0: f64, horizon: f64) -> Result<Self> {
        let contrast = covariance_matrices(theta, delta)?;
        let lambda1 = theta.lambda(1);
        let mut warnings = Vec::new();
        if contrast.v_condition > WARN_CONDITION {
            warnings.push(Warning::IllConditioned {
                condition: contrast.v_condition,
            });
        }
        if horizon != 1.0 {
            warnings.push(Warning::FisherHorizon { horizon });
        }
        let g_fisher = if lambda1 > 0.0 {
            g_fisher_horizon(lambda1, x1_0, horizon)?
        } else {
            warnings.push(Warning::NonPositiveLambda { lambda: lambda1 });
            f64::NAN
        };
        if x1_0.abs() <= crate::model::DEGENERATE_COEFFICIENT {
            warnings.push(Warning::DegenerateFirstCoefficient { value: x1_0 });
        }
        let variances = [contrast.j_mat.get(0, 0), contrast.j_mat.get(1, 1), 1.0 / g_fisher];
        Ok(Self {
            theta: *theta,
            sigma0_sq: theta.sigma0_sq(),
            eta: theta.eta(),
            lambda1,
            x1_0,
            horizon,
            contrast,
            g_fisher,
            variances,
            warnings,
        })
    }
}

/// `(√(Nm)(θ̂2-θ2*), √(Nm)(θ̂1-θ1*), ε⁻¹(θ̂0-θ0*))`.
pub fn standardize(
    est: &DriftEstimates,
    truth: &ThetaParams,
    time_steps: usize,
    sites: usize,
    epsilon: f64,
) -> [f64; 3] {
    let root = ((time_steps * sites) as f64).sqrt();
    [
        root * (est.theta2 - truth.theta2),
        root * (est.theta1 - truth.theta1),
        (est.theta0 - truth.theta0) / epsilon,
    ]
}

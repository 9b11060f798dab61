//! Parametrization of the drift operator `θ2 ∂²/∂y² + θ1 ∂/∂y + θ0` on `[0, 1]`
//! with Dirichlet boundaries, its eigen-structure and the weighted inner
//! product under which the eigenfunctions are orthonormal.
//!
//! The eigenfunctions are `e_k(y) = √2 sin(πky) exp(-η y / 2)` with
//! `η = θ1/θ2`, and the corresponding eigenvalues are `-λ_k` with
//! `λ_k = -θ0 + θ1²/(4θ2) + π²k²θ2`. The inner product is
//! `⟨f, g⟩_θ = ∫₀¹ exp(η y) f(y) g(y) dy`.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of Simpson intervals for [`weighted_inner_product`].
pub const DEFAULT_QUADRATURE_NODES: usize = 2048;

/// Projections whose magnitude falls below this are treated as violating the
/// non-degeneracy requirement on the first coordinate.
pub const DEGENERATE_COEFFICIENT: f64 = 1e-12;

/// Drift coefficients `(θ0, θ1, θ2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTheta", deny_unknown_fields)]
pub struct ThetaParams {
    pub theta0: f64,
    pub theta1: f64,
    pub theta2: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTheta {
    theta0: f64,
    theta1: f64,
    theta2: f64,
}

impl TryFrom<RawTheta> for ThetaParams {
    type Error = Error;

    fn try_from(raw: RawTheta) -> Result<Self> {
        ThetaParams::new(raw.theta0, raw.theta1, raw.theta2)
    }
}

impl ThetaParams {
    pub fn new(theta0: f64, theta1: f64, theta2: f64) -> Result<Self> {
        if !(theta2 > 0.0) || !theta2.is_finite() {
            return Err(Error::domain(format!("theta2 must be positive, got {theta2}")));
        }
        if !theta0.is_finite() || !theta1.is_finite() {
            return Err(Error::domain("theta0 and theta1 must be finite"));
        }
        Ok(Self {
            theta0,
            theta1,
            theta2,
        })
    }

    /// `η = θ1/θ2`.
    pub fn eta(&self) -> f64 {
        self.theta1 / self.theta2
    }

    /// `σ0² = 1/√θ2`.
    pub fn sigma0_sq(&self) -> f64 {
        1.0 / self.theta2.sqrt()
    }

    pub fn lambda(&self, k: usize) -> f64 {
        lambda_k(self, k)
    }
}

/// Known dispersion `ε ∈ (0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct NoiseLevel(f64);

impl NoiseLevel {
    pub fn new(epsilon: f64) -> Result<Self> {
        if epsilon > 0.0 && epsilon <= 1.0 {
            Ok(Self(epsilon))
        } else {
            Err(Error::domain(format!("epsilon must lie in (0, 1], got {epsilon}")))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }

    pub fn squared(self) -> f64 {
        self.0 * self.0
    }
}

/// Deterministic initial field `ξ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    /// `ξ(y) = c·y(1-y)`.
    Parabola { c: f64 },
    /// Values of `ξ` on the uniform grid `y_i = i/L`, `i = 0..=L`, linearly
    /// interpolated in between.
    Tabulated { values: Vec<f64> },
    /// Coordinates `x_k(0)`, `k = 1, 2, ...` given directly; missing modes are zero.
    Coefficients { values: Vec<f64> },
}

impl InitialCondition {
    pub fn validate(&self) -> Result<()> {
        match self {
            InitialCondition::Parabola { c } if !c.is_finite() => {
                Err(Error::domain("parabola coefficient must be finite"))
            }
            InitialCondition::Tabulated { values } => {
                if values.len() < 2 {
                    return Err(Error::domain("tabulated initial condition needs at least 2 values"));
                }
                let (first, last) = (values[0], values[values.len() - 1]);
                if first != 0.0 || last != 0.0 {
                    return Err(Error::domain(format!(
                        "tabulated initial condition must vanish at y = 0 and y = 1 (got {first}, {last})"
                    )));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::domain("tabulated initial condition has non-finite values"));
                }
                Ok(())
            }
            InitialCondition::Coefficients { values } if values.iter().any(|v| !v.is_finite()) => {
                Err(Error::domain("initial coefficients must be finite"))
            }
            _ => Ok(()),
        }
    }

    /// Pointwise value `ξ(y)`. For the coefficient form the expansion needs the
    /// eigenfunction shape, hence `eta`.
    pub fn evaluate(&self, eta: f64, y: f64) -> f64 {
        match self {
            InitialCondition::Parabola { c } => c * y * (1.0 - y),
            InitialCondition::Tabulated { values } => {
                let intervals = values.len() - 1;
                let pos = (y.clamp(0.0, 1.0)) * intervals as f64;
                let i = (pos.floor() as usize).min(intervals - 1);
                let frac = pos - i as f64;
                values[i] + (values[i + 1] - values[i]) * frac
            }
            InitialCondition::Coefficients { values } => values
                .iter()
                .enumerate()
                .map(|(i, c)| c * eigenfunction(eta, i + 1, y))
                .sum(),
        }
    }
}

/// `λ_k = -θ0 + θ1²/(4θ2) + π²k²θ2`.
pub fn lambda_k(theta: &ThetaParams, k: usize) -> f64 {
    debug_assert!(k >= 1, "modes are numbered from 1");
    let k = k as f64;
    -theta.theta0 + theta.theta1 * theta.theta1 / (4.0 * theta.theta2) + PI * PI * k * k * theta.theta2
}

/// `e_k(y) = √2 sin(πky) exp(-η y/2)`.
pub fn eigenfunction(eta: f64, k: usize, y: f64) -> f64 {
    SQRT_2 * (PI * k as f64 * y).sin() * (-0.5 * eta * y).exp()
}

/// Composite Simpson approximation of `∫₀¹ exp(η y) f(y) g(y) dy` on
/// `quadrature_n` intervals (rounded up to an even count).
pub fn weighted_inner_product<F, G>(f: F, g: G, eta: f64, quadrature_n: usize) -> f64
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    let n = quadrature_n.max(2);
    let n = n + n % 2;
    let h = 1.0 / n as f64;
    let integrand = |y: f64| (eta * y).exp() * f(y) * g(y);
    let mut odd = 0.0;
    let mut even = 0.0;
    for i in 1..n {
        let y = i as f64 * h;
        if i % 2 == 1 {
            odd += integrand(y);
        } else {
            even += integrand(y);
        }
    }
    h / 3.0 * (integrand(0.0) + integrand(1.0) + 4.0 * odd + 2.0 * even)
}

/// `x_k(0) = ⟨ξ, e_k⟩_θ` by Simpson quadrature. The node count grows with `k`
/// so the oscillation of `e_k` stays resolved.
pub fn initial_coefficient(xi: &InitialCondition, theta: &ThetaParams, k: usize) -> f64 {
    if let InitialCondition::Coefficients { values } = xi {
        return values.get(k - 1).copied().unwrap_or(0.0);
    }
    let eta = theta.eta();
    let nodes = DEFAULT_QUADRATURE_NODES.max(64 * k);
    weighted_inner_product(|y| xi.evaluate(eta, y), |y| eigenfunction(eta, k, y), eta, nodes)
}

/// All coordinates `x_1(0), ..., x_modes(0)`.
///
/// Parabolic and tabulated initial conditions are projected exactly (the
/// tabulated form through its piecewise-linear interpolant), which stays
/// accurate for mode numbers far beyond what a fixed quadrature grid resolves.
pub fn initial_coefficients(xi: &InitialCondition, theta: &ThetaParams, modes: usize) -> Vec<f64> {
    let half_eta = 0.5 * theta.eta();
    match xi {
        InitialCondition::Coefficients { values } => {
            (0..modes).map(|i| values.get(i).copied().unwrap_or(0.0)).collect()
        }
        InitialCondition::Parabola { c } => (1..=modes)
            .map(|k| {
                let z = Complex64::new(half_eta, PI * k as f64);
                let ez = z.exp();
                let m0 = (ez - 1.0) / z;
                let m1 = (ez - m0) / z;
                let m2 = (ez - 2.0 * m1) / z;
                c * SQRT_2 * (m1 - m2).im
            })
            .collect(),
        InitialCondition::Tabulated { values } => {
            let intervals = values.len() - 1;
            let h = 1.0 / intervals as f64;
            let slopes: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]) / h).collect();
            (1..=modes)
                .map(|k| {
                    // ∫ g e^{zy} = [g e^{zy}/z]₀¹ - z⁻² Σ s_i (e^{z y_{i+1}} - e^{z y_i})
                    let z = Complex64::new(half_eta, PI * k as f64);
                    let step = (z * h).exp();
                    let mut node = Complex64::new(1.0, 0.0);
                    let mut acc = Complex64::new(0.0, 0.0);
                    for s in &slopes {
                        let next = node * step;
                        acc += *s * (next - node);
                        node = next;
                    }
                    let ez = z.exp();
                    let boundary = (values[intervals] * ez - values[0]) / z;
                    SQRT_2 * (boundary - acc / (z * z)).im
                })
                .collect()
        }
    }
}

/// Inverts `σ0² = 1/√θ2`, `η = θ1/θ2`, returning `(θ2, θ1)`.
pub fn theta_from_reparam(sigma0_sq: f64, eta: f64) -> Result<(f64, f64)> {
    if !(sigma0_sq > 0.0) || !sigma0_sq.is_finite() {
        return Err(Error::domain(format!("sigma0_sq must be positive, got {sigma0_sq}")));
    }
    let theta2 = 1.0 / (sigma0_sq * sigma0_sq);
    Ok((theta2, eta * theta2))
}

//! First stage: realized temporal variations on a thinned set of interior
//! sites, and the minimum-contrast fit of `(σ0², η)`.
//!
//! For small time steps, `Z_j/ε²` is close to `(σ0²/√π)·exp(-η ỹ_j)`. The fit
//! runs in `(σ0², η)` and is mapped back to `(θ2, θ1) = (σ0⁻⁴, η σ0⁻⁴)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{theta_from_reparam, NoiseLevel};
use crate::optimize::{nelder_mead, SimplexOptions};
use crate::warnings::Warning;

pub const DEFAULT_DELTA: f64 = 0.05;
pub const DEFAULT_SCAN_POINTS: usize = 64;

/// Sites `ỹ_j = δ + ⌊M̄/m⌋(j-1)/M`, `j = 1..=m`, with `M̄ = 1 + ⌊(1-2δ)M⌋`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThinnedSpatialGrid {
    delta: f64,
    sites: usize,
    space_steps: usize,
    stride: usize,
}

impl ThinnedSpatialGrid {
    pub fn new(delta: f64, sites: usize, space_steps: usize) -> Result<Self> {
        if !(delta > 0.0 && delta < 0.5) {
            return Err(Error::config(format!("delta must lie in (0, 1/2), got {delta}")));
        }
        if sites == 0 || space_steps == 0 {
            return Err(Error::config("thinned site count and space steps must be positive"));
        }
        let m_bar = Self::window_points(delta, space_steps);
        if sites > m_bar {
            return Err(Error::config(format!(
                "m = {sites} exceeds the {m_bar} grid points inside [delta, 1 - delta]"
            )));
        }
        Ok(Self {
            delta,
            sites,
            space_steps,
            stride: m_bar / sites,
        })
    }

    /// `M̄ = 1 + ⌊(1-2δ)M⌋`. The floor absorbs representation error such as
    /// `(1 - 2·0.05)·2000 = 1799.9999…`.
    pub fn window_points(delta: f64, space_steps: usize) -> usize {
        1 + ((1.0 - 2.0 * delta) * space_steps as f64 + 1e-9).floor() as usize
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn len(&self) -> usize {
        self.sites
    }

    pub fn is_empty(&self) -> bool {
        self.sites == 0
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn positions(&self) -> Vec<f64> {
        let m = self.space_steps as f64;
        (0..self.sites)
            .map(|j| self.delta + (self.stride * j) as f64 / m)
            .collect()
    }
}

/// `(1/(N√(T/N))) Σ_{i=1}^{N} (X_{t_i} - X_{t_{i-1}})²` over a column holding
/// `X_{t_0}, ..., X_{t_N}`.
pub fn realized_variation(column: &[f64], time_steps: usize, horizon: f64) -> f64 {
    debug_assert_eq!(column.len(), time_steps + 1);
    let dt = horizon / time_steps as f64;
    let sum: f64 = column.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    sum / (time_steps as f64 * dt.sqrt())
}

/// `Z_j` at each thinned site together with the known noise level.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizedVariations {
    pub z: Vec<f64>,
    pub sites: Vec<f64>,
    pub epsilon: NoiseLevel,
}

impl RealizedVariations {
    pub fn from_columns(
        columns: &[Vec<f64>],
        sites: &[f64],
        time_steps: usize,
        horizon: f64,
        epsilon: NoiseLevel,
    ) -> Result<Self> {
        if columns.len() != sites.len() || columns.is_empty() {
            return Err(Error::domain("need one non-empty column per site"));
        }
        if columns.iter().any(|c| c.len() != time_steps + 1) {
            return Err(Error::domain(format!("columns must hold {} time points", time_steps + 1)));
        }
        Ok(Self {
            z: columns.iter().map(|c| realized_variation(c, time_steps, horizon)).collect(),
            sites: sites.to_vec(),
            epsilon,
        })
    }

    /// `Z_j/ε²`.
    pub fn normalized(&self) -> impl Iterator<Item = f64> + '_ {
        let eps2 = self.epsilon.squared();
        self.z.iter().map(move |z| z / eps2)
    }
}

/// `(σ0²/√π)·exp(-η y)`.
pub fn target_curve(sigma0_sq: f64, eta: f64, y: f64) -> f64 {
    sigma0_sq / PI.sqrt() * (-eta * y).exp()
}

/// `(1/m) Σ_j (Z_j/ε² - (σ0²/√π) e^{-η ỹ_j})²`.
pub fn contrast(sigma0_sq: f64, eta: f64, rv: &RealizedVariations) -> Result<f64> {
    if !(sigma0_sq > 0.0) {
        return Err(Error::domain(format!("sigma0_sq must be positive, got {sigma0_sq}")));
    }
    let m = rv.z.len() as f64;
    Ok(rv
        .normalized()
        .zip(&rv.sites)
        .map(|(z, &y)| (z - target_curve(sigma0_sq, eta, y)).powi(2))
        .sum::<f64>()
        / m)
}

/// Rectangle in `(σ0², η)` for the contrast search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchBox {
    pub sigma0_sq: [f64; 2],
    pub eta: [f64; 2],
}

impl Default for SearchBox {
    fn default() -> Self {
        Self {
            sigma0_sq: [1e-2, 1e2],
            eta: [-20.0, 20.0],
        }
    }
}

impl SearchBox {
    pub fn validate(&self) -> Result<()> {
        let [s_lo, s_hi] = self.sigma0_sq;
        let [e_lo, e_hi] = self.eta;
        if !(s_hi > 0.0 && s_lo < s_hi) || !(e_lo < e_hi) || ![s_lo, s_hi, e_lo, e_hi].iter().all(|v| v.is_finite()) {
            return Err(Error::config(format!("invalid contrast search box {self:?}")));
        }
        Ok(())
    }

    fn contains(&self, sigma0_sq: f64, eta: f64) -> bool {
        sigma0_sq > 0.0
            && sigma0_sq >= self.sigma0_sq[0]
            && sigma0_sq <= self.sigma0_sq[1]
            && eta >= self.eta[0]
            && eta <= self.eta[1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizerTrace {
    pub evaluations: usize,
    pub iterations: usize,
    /// Best contrast value after each refinement iteration.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContrastEstimate {
    pub sigma0_sq_hat: f64,
    pub eta_hat: f64,
    pub theta1_hat: f64,
    pub theta2_hat: f64,
    pub contrast_value: f64,
    /// Best value found by the coarse scan, before refinement.
    pub scan_value: f64,
    pub trace: OptimizerTrace,
    pub warnings: Vec<Warning>,
}

/// Coarse scan over a `scan_points × scan_points` grid (log-spaced in `σ0²`,
/// linear in `η`), then Nelder–Mead refinement from the best grid point.
pub fn minimize_contrast(rv: &RealizedVariations, search: &SearchBox) -> Result<ContrastEstimate> {
    minimize_contrast_with(rv, search, DEFAULT_SCAN_POINTS, SimplexOptions::default())
}

pub fn minimize_contrast_with(
    rv: &RealizedVariations,
    search: &SearchBox,
    scan_points: usize,
    options: SimplexOptions,
) -> Result<ContrastEstimate> {
    search.validate()?;
    if rv.z.is_empty() {
        return Err(Error::domain("no realized variations"));
    }
    let scan_points = scan_points.max(2);
    let [s_hi, e_lo, e_hi] = [search.sigma0_sq[1], search.eta[0], search.eta[1]];
    let s_lo = if search.sigma0_sq[0] > 0.0 {
        search.sigma0_sq[0]
    } else {
        s_hi * 1e-6
    };
    let log_step = (s_hi / s_lo).ln() / (scan_points - 1) as f64;
    let eta_step = (e_hi - e_lo) / (scan_points - 1) as f64;
    let sigma_at = |i: usize| s_lo * (log_step * i as f64).exp();
    let eta_at = |i: usize| e_lo + eta_step * i as f64;

    let eval = |s: f64, e: f64| contrast(s, e, rv).unwrap_or(f64::INFINITY);
    // η ascending outside, σ0² ascending inside, strict improvement only:
    // ties resolve to the smallest η, then the smallest σ0².
    let mut best = (sigma_at(0), eta_at(0), f64::INFINITY);
    for ie in 0..scan_points {
        for is in 0..scan_points {
            let (s, e) = (sigma_at(is), eta_at(ie));
            let value = eval(s, e);
            if value < best.2 {
                best = (s, e, value);
            }
        }
    }
    let (s0, e0, scan_value) = best;
    if !scan_value.is_finite() {
        return Err(Error::Optimizer("contrast is not finite anywhere on the scan grid".into()));
    }

    let objective = |p: &[f64; 2]| {
        if search.contains(p[0], p[1]) {
            eval(p[0], p[1])
        } else {
            f64::INFINITY
        }
    };
    let sigma_cell = s0 * (log_step.exp() - 1.0);
    let refined = nelder_mead(objective, [s0, e0], [sigma_cell, eta_step], options);
    if refined.value > scan_value {
        return Err(Error::Optimizer(format!(
            "refinement ended at {} above the best scan value {scan_value}",
            refined.value
        )));
    }
    let [sigma0_sq_hat, eta_hat] = refined.x;
    let (theta2_hat, theta1_hat) = theta_from_reparam(sigma0_sq_hat, eta_hat)?;

    let mut warnings = Vec::new();
    if rv.z.len() < 2 {
        warnings.push(Warning::Unidentifiable { sites: rv.z.len() });
    }
    let near = |v: f64, lo: f64, hi: f64| {
        let margin = 0.01 * (hi - lo);
        v - lo <= margin || hi - v <= margin
    };
    // σ0² is searched on a log scale, so its margin is relative.
    if near(sigma0_sq_hat.ln(), s_lo.ln(), s_hi.ln()) {
        warnings.push(Warning::ContrastBoundary {
            parameter: "sigma0_sq".into(),
            value: sigma0_sq_hat,
        });
    }
    if near(eta_hat, e_lo, e_hi) {
        warnings.push(Warning::ContrastBoundary {
            parameter: "eta".into(),
            value: eta_hat,
        });
    }

    Ok(ContrastEstimate {
        sigma0_sq_hat,
        eta_hat,
        theta1_hat,
        theta2_hat,
        contrast_value: refined.value,
        scan_value,
        trace: OptimizerTrace {
            evaluations: refined.evaluations + scan_points * scan_points,
            iterations: refined.iterations,
            values: refined.trace,
        },
        warnings,
    })
}

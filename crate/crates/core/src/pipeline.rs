//! The two-stage estimator applied to one set of observations.

use serde::{Deserialize, Serialize};

use crate::adaptive::{maximize_loglik, theta0_hat, ApproxCoordinateSeries, LambdaInterval, ThinnedTimeGrid};
use crate::contrast::{minimize_contrast, ContrastEstimate, RealizedVariations, SearchBox};
use crate::error::{Error, Result};
use crate::model::NoiseLevel;
use crate::observations::FieldObservations;
use crate::warnings::Warning;

/// Search ranges for both stages.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorSettings {
    pub search_box: SearchBox,
    pub lambda_interval: LambdaInterval,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriftEstimates {
    pub theta1: f64,
    pub theta2: f64,
    pub lambda1: f64,
    pub theta0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimationResult {
    pub estimates: DriftEstimates,
    pub sigma0_sq_hat: f64,
    pub eta_hat: f64,
    pub contrast_value: f64,
    pub loglik_value: f64,
    pub contrast_evaluations: usize,
    pub warnings: Vec<Warning>,
}

/// Contrast fit on the site columns, then the rate of the first coordinate
/// recovered from the time rows with the fitted `η̂`.
pub fn estimate(obs: &FieldObservations, epsilon: NoiseLevel, settings: &EstimatorSettings) -> Result<EstimationResult> {
    let rv = RealizedVariations::from_columns(&obs.site_columns, &obs.sites, obs.time_steps, obs.horizon, epsilon)?;
    let fit: ContrastEstimate = minimize_contrast(&rv, &settings.search_box)?;

    let grid = ThinnedTimeGrid::new(obs.time_steps, obs.thinned_times(), obs.horizon)?;
    if grid.stride() != obs.row_stride {
        return Err(Error::domain(format!(
            "time rows are {} steps apart but {} rows over {} steps imply {}",
            obs.row_stride,
            obs.thinned_times(),
            obs.time_steps,
            grid.stride()
        )));
    }
    let series = ApproxCoordinateSeries::from_rows(&obs.time_rows, fit.eta_hat, 1, obs.space_steps);
    let lik = maximize_loglik(&series, epsilon, &grid, settings.lambda_interval)?;

    let estimates = DriftEstimates {
        theta1: fit.theta1_hat,
        theta2: fit.theta2_hat,
        lambda1: lik.lambda_hat,
        theta0: theta0_hat(lik.lambda_hat, fit.theta1_hat, fit.theta2_hat),
    };
    let mut warnings = fit.warnings.clone();
    warnings.extend(lik.warnings.iter().cloned());
    Ok(EstimationResult {
        estimates,
        sigma0_sq_hat: fit.sigma0_sq_hat,
        eta_hat: fit.eta_hat,
        contrast_value: fit.contrast_value,
        loglik_value: lik.loglik,
        contrast_evaluations: fit.trace.evaluations,
        warnings,
    })
}

use std::fmt;

use serde::Serialize;

/// Non-fatal conditions raised while simulating or estimating.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warning {
    /// The contrast minimizer ended within 1% of an edge of its search box.
    ContrastBoundary { parameter: String, value: f64 },
    /// Fewer than two sites: the contrast cannot separate `σ0²` from `η`.
    Unidentifiable { sites: usize },
    /// `λ̂1` is pinned at an end of the search interval.
    LikelihoodBoundary { lambda: f64 },
    /// More thinned sites than `√N`.
    SiteRate { sites: usize, time_steps: usize },
    /// Explicit `x_1(0)` differs from the projection of `ξ` by more than 5%.
    InitialCoefficientMismatch { explicit: f64, projected: f64 },
    /// `|x_1(0)|` is numerically zero, so the first coordinate carries no
    /// drift information.
    DegenerateFirstCoefficient { value: f64 },
    /// Zero dispersion; the estimators need `ε > 0`.
    ZeroNoise,
    /// The first eigenvalue is not positive.
    NonPositiveLambda { lambda: f64 },
    /// The information constant was extended to a horizon other than 1.
    FisherHorizon { horizon: f64 },
    /// `V` is close to singular.
    IllConditioned { condition: f64 },
}

impl Warning {
    /// Short tag used in CSV flag columns.
    pub fn code(&self) -> &'static str {
        match self {
            Warning::ContrastBoundary { .. } => "contrast_boundary",
            Warning::Unidentifiable { .. } => "unidentifiable",
            Warning::LikelihoodBoundary { .. } => "likelihood_boundary",
            Warning::SiteRate { .. } => "site_rate",
            Warning::InitialCoefficientMismatch { .. } => "x1_0_mismatch",
            Warning::DegenerateFirstCoefficient { .. } => "degenerate_x1_0",
            Warning::ZeroNoise => "zero_noise",
            Warning::NonPositiveLambda { .. } => "nonpositive_lambda",
            Warning::FisherHorizon { .. } => "fisher_horizon",
            Warning::IllConditioned { .. } => "ill_conditioned",
        }
    }
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::ContrastBoundary { parameter, value } => {
                write!(f, "contrast optimum {parameter} = {value} is near the search box edge")
            }
            Warning::Unidentifiable { sites } => write!(f, "{sites} site(s) cannot identify two parameters"),
            Warning::LikelihoodBoundary { lambda } => {
                write!(f, "likelihood optimum lambda = {lambda} sits at the search interval edge")
            }
            Warning::SiteRate { sites, time_steps } => {
                write!(f, "m = {sites} exceeds sqrt(N) = {:.1}", (*time_steps as f64).sqrt())
            }
            Warning::InitialCoefficientMismatch { explicit, projected } => {
                write!(f, "explicit x_1(0) = {explicit} differs from projected {projected} by more than 5%")
            }
            Warning::DegenerateFirstCoefficient { value } => write!(f, "x_1(0) = {value} is numerically zero"),
            Warning::ZeroNoise => write!(f, "epsilon = 0; estimators require positive noise"),
            Warning::NonPositiveLambda { lambda } => write!(f, "lambda_1 = {lambda} is not positive"),
            Warning::FisherHorizon { horizon } => {
                write!(f, "information constant evaluated at horizon T = {horizon} instead of 1")
            }
            Warning::IllConditioned { condition } => write!(f, "V has condition number {condition:e}"),
        }
    }
}

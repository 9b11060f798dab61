//! Second stage: the first coordinate is recovered from full spatial rows at
//! thinned times using the plug-in `η̂`, and its Ornstein–Uhlenbeck rate is
//! fitted by maximizing the Gaussian transition quasi-likelihood. `θ̂0`
//! follows by inverting the eigenvalue formula.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::NoiseLevel;
use crate::optimize::brent_minimize;
use crate::warnings::Warning;

pub const DEFAULT_THINNED_TIMES: usize = 500;
pub const DEFAULT_SCAN_POINTS: usize = 256;
pub const LAMBDA_TOLERANCE: f64 = 1e-8;

/// Below this `|λ·δ̄|` the variance factor uses its Taylor expansion.
pub const SMALL_RATE_THRESHOLD: f64 = 1e-6;

/// Times `s_i = i⌊N/N2⌋·T/N`, `i = 0..=N2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThinnedTimeGrid {
    time_steps: usize,
    thinned: usize,
    horizon: f64,
}

impl ThinnedTimeGrid {
    pub fn new(time_steps: usize, thinned: usize, horizon: f64) -> Result<Self> {
        if thinned == 0 || thinned > time_steps {
            return Err(Error::config(format!(
                "thinned time count must lie in 1..={time_steps}, got {thinned}"
            )));
        }
        if !(horizon > 0.0) {
            return Err(Error::config("horizon must be positive"));
        }
        Ok(Self {
            time_steps,
            thinned,
            horizon,
        })
    }

    pub fn thinned(&self) -> usize {
        self.thinned
    }

    /// `⌊N/N2⌋`, the spacing in fine time steps.
    pub fn stride(&self) -> usize {
        self.time_steps / self.thinned
    }

    /// `δ̄ = ⌊N/N2⌋·T/N`.
    pub fn delta_bar(&self) -> f64 {
        self.stride() as f64 * self.horizon / self.time_steps as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.delta_bar()
    }
}

/// `(1/M) Σ_j X_t(y_j) √2 sin(πk y_j) exp(η̂ y_j/2)` over `y_j = j/M`.
pub fn approx_coordinate(row: &[f64], eta_hat: f64, k: usize, space_steps: usize) -> f64 {
    debug_assert_eq!(row.len(), space_steps);
    let m = space_steps as f64;
    row.iter()
        .enumerate()
        .map(|(idx, x)| {
            let y = (idx + 1) as f64 / m;
            x * SQRT_2 * (PI * k as f64 * y).sin() * (0.5 * eta_hat * y).exp()
        })
        .sum::<f64>()
        / m
}

/// `x̂_k(s_i)`, `i = 0..=N2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApproxCoordinateSeries {
    pub k: usize,
    pub eta_hat: f64,
    pub values: Vec<f64>,
}

impl ApproxCoordinateSeries {
    pub fn from_rows(rows: &[Vec<f64>], eta_hat: f64, k: usize, space_steps: usize) -> Self {
        Self {
            k,
            eta_hat,
            values: rows.iter().map(|r| approx_coordinate(r, eta_hat, k, space_steps)).collect(),
        }
    }

    pub fn transitions(&self) -> usize {
        self.values.len().saturating_sub(1)
    }
}

/// `Ξ(λ) = (1 - e^{-2λδ̄})/(2λδ̄)`, with `Ξ(0) = 1`.
pub fn xi_factor(lambda: f64, delta_bar: f64) -> f64 {
    let a = lambda * delta_bar;
    if a.abs() < SMALL_RATE_THRESHOLD {
        1.0 - a + 2.0 / 3.0 * a * a
    } else {
        -(-2.0 * a).exp_m1() / (2.0 * a)
    }
}

/// Gaussian transition log-likelihood of the series under rate `λ`, with
/// one-step variance `ε²·δ̄·Ξ(λ)`.
pub fn quasi_loglik(lambda: f64, series: &ApproxCoordinateSeries, epsilon: NoiseLevel, grid: &ThinnedTimeGrid) -> f64 {
    let delta_bar = grid.delta_bar();
    let variance = epsilon.squared() * delta_bar * xi_factor(lambda, delta_bar);
    let decay = (-lambda * delta_bar).exp();
    let log_var = variance.ln();
    -0.5 * series
        .values
        .windows(2)
        .map(|w| {
            let r = w[1] - decay * w[0];
            log_var + r * r / variance
        })
        .sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaInterval {
    pub lo: f64,
    pub hi: f64,
}

impl Default for LambdaInterval {
    fn default() -> Self {
        Self { lo: 1e-6, hi: 200.0 }
    }
}

impl LambdaInterval {
    pub fn validate(&self) -> Result<()> {
        if self.lo < self.hi && self.lo.is_finite() && self.hi.is_finite() {
            Ok(())
        } else {
            Err(Error::config(format!("invalid lambda interval [{}, {}]", self.lo, self.hi)))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LikelihoodMaximum {
    pub lambda_hat: f64,
    pub loglik: f64,
    /// `(λ, l(λ))` on the seeding scan.
    #[serde(skip)]
    pub scan: Vec<(f64, f64)>,
    pub warnings: Vec<Warning>,
}

/// `arg sup_λ l(λ)` on `interval`: a uniform scan seeds a Brent refinement
/// between the neighbours of the best scan point.
pub fn maximize_loglik(
    series: &ApproxCoordinateSeries,
    epsilon: NoiseLevel,
    grid: &ThinnedTimeGrid,
    interval: LambdaInterval,
) -> Result<LikelihoodMaximum> {
    interval.validate()?;
    if series.transitions() == 0 {
        return Err(Error::domain("series needs at least one transition"));
    }
    let loglik = |lambda: f64| quasi_loglik(lambda, series, epsilon, grid);
    let n = DEFAULT_SCAN_POINTS;
    let step = (interval.hi - interval.lo) / (n - 1) as f64;
    let scan: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let lambda = if i == n - 1 { interval.hi } else { interval.lo + step * i as f64 };
            (lambda, loglik(lambda))
        })
        .collect();
    let best = scan
        .iter()
        .enumerate()
        .filter(|(_, (_, l))| l.is_finite())
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
        .ok_or_else(|| Error::Optimizer("quasi log-likelihood is not finite on the scan".into()))?;
    let lo = scan[best.saturating_sub(1)].0;
    let hi = scan[(best + 1).min(n - 1)].0;
    let refined = brent_minimize(|l| -loglik(l), lo, hi, LAMBDA_TOLERANCE, 500);
    let (lambda_hat, value) = if -refined.value >= scan[best].1 {
        (refined.x, -refined.value)
    } else {
        scan[best]
    };

    let mut warnings = Vec::new();
    // pinned at an end, not merely close to a wide interval's edge
    let margin = 1e-6 * (interval.hi - interval.lo) + 10.0 * LAMBDA_TOLERANCE;
    if lambda_hat - interval.lo <= margin || interval.hi - lambda_hat <= margin {
        warnings.push(Warning::LikelihoodBoundary { lambda: lambda_hat });
    }
    Ok(LikelihoodMaximum {
        lambda_hat,
        loglik: value,
        scan,
        warnings,
    })
}

/// `θ̂0 = -λ̂1 + θ̂1²/(4θ̂2) + π²θ̂2`.
pub fn theta0_hat(lambda1_hat: f64, theta1_hat: f64, theta2_hat: f64) -> f64 {
    -lambda1_hat + theta1_hat * theta1_hat / (4.0 * theta2_hat) + PI * PI * theta2_hat
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{eigenfunction, lambda_k, ThetaParams};
    use crate::simulator::ou_step;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn eps(v: f64) -> NoiseLevel {
        NoiseLevel::new(v).unwrap()
    }

    fn row_of(f: impl Fn(f64) -> f64, m: usize) -> Vec<f64> {
        (1..=m).map(|j| f(j as f64 / m as f64)).collect()
    }

    #[test]
    fn thinned_time_grid() {
        let g = ThinnedTimeGrid::new(10_000, 500, 1.0).unwrap();
        assert_eq!(g.stride(), 20);
        assert_abs_diff_eq!(g.delta_bar(), 0.002, epsilon = 1e-16);
        assert!(g.time(500) <= 1.0 + 1e-15);
        let uneven = ThinnedTimeGrid::new(2000, 300, 1.0).unwrap();
        assert_eq!(uneven.stride(), 6);
        assert!(uneven.time(300) <= 1.0);
        assert!(ThinnedTimeGrid::new(10, 11, 1.0).is_err());
        assert!(ThinnedTimeGrid::new(10, 0, 1.0).is_err());
    }

    #[test]
    fn approx_coordinate_examples() {
        let m = 400;
        assert_eq!(approx_coordinate(&vec![0.0; m], 2.0, 1, m), 0.0);
        let eta = 5.0;
        let single = row_of(|y| 1.7 * eigenfunction(eta, 1, y), m);
        assert_abs_diff_eq!(approx_coordinate(&single, eta, 1, m), 1.7, epsilon = 1e-13);
        let second = row_of(|y| eigenfunction(eta, 2, y), m);
        assert_abs_diff_eq!(approx_coordinate(&second, eta, 1, m), 0.0, epsilon = 1e-10);
        // trig identity (1/M) Σ 2 sin²(πj/M) = 1
        let s: f64 = (1..=m).map(|j| 2.0 * (PI * j as f64 / m as f64).sin().powi(2)).sum::<f64>() / m as f64;
        assert_abs_diff_eq!(s, 1.0, epsilon = 1e-13);
    }

    #[test]
    fn xi_factor_values() {
        assert_eq!(xi_factor(0.0, 0.01), 1.0);
        assert_abs_diff_eq!(xi_factor(1e-9, 0.01), 1.0, epsilon = 1e-10);
        // λδ̄ = ln2/2 gives (1 - 1/2)/ln 2
        let delta_bar = 0.002;
        let lambda = std::f64::consts::LN_2 / 2.0 / delta_bar;
        assert_abs_diff_eq!(xi_factor(lambda, delta_bar), 0.5 / std::f64::consts::LN_2, epsilon = 1e-14);
        // 40-digit oracle at λδ̄ = 3.22·0.002
        assert_abs_diff_eq!(xi_factor(3.22, 0.002), XI_3_22, epsilon = 1e-14);
        for lambda in [0.01, 1.0, 3.22, 50.0, 1e4] {
            let v = xi_factor(lambda, delta_bar);
            assert!(v > 0.0 && v < 1.0);
        }
    }

    const XI_3_22: f64 = 0.9935875602655219;

    #[test]
    fn xi_factor_decreases() {
        let values: Vec<f64> = (0..200).map(|i| xi_factor(i as f64 * 0.5, 0.002)).collect();
        assert!(values.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn loglik_without_residuals() {
        let grid = ThinnedTimeGrid::new(1, 1, 0.5).unwrap();
        let series = ApproxCoordinateSeries {
            k: 1,
            eta_hat: 0.0,
            values: vec![0.0, 0.0],
        };
        let e = eps(0.1);
        for lambda in [0.3, 2.0, 10.0] {
            let expected = -0.5 * (0.01 * 0.5 * xi_factor(lambda, 0.5)).ln();
            assert_abs_diff_eq!(quasi_loglik(lambda, &series, e, &grid), expected, epsilon = 1e-14);
        }
        let lambda = 1.3;
        let decay = (-lambda * 0.5f64).exp();
        let exact = ApproxCoordinateSeries {
            k: 1,
            eta_hat: 0.0,
            values: vec![2.0, 2.0 * decay],
        };
        let expected = -0.5 * (0.01 * 0.5 * xi_factor(lambda, 0.5)).ln();
        assert_abs_diff_eq!(quasi_loglik(lambda, &exact, e, &grid), expected, epsilon = 1e-12);
    }

    #[test]
    fn score_is_centred_on_true_data() {
        let (lambda, x0, epsilon, n2) = (3.22, 3.0, 0.1, 500);
        let grid = ThinnedTimeGrid::new(n2, n2, 1.0).unwrap();
        let e = eps(epsilon);
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let h = 1e-5;
        let scores: Vec<f64> = (0..1000)
            .map(|_| {
                let mut x = x0;
                let mut values = vec![x];
                for _ in 0..n2 {
                    x = ou_step(x, lambda, epsilon, grid.delta_bar(), rng.sample(StandardNormal));
                    values.push(x);
                }
                let s = ApproxCoordinateSeries { k: 1, eta_hat: 0.0, values };
                (quasi_loglik(lambda + h, &s, e, &grid) - quasi_loglik(lambda - h, &s, e, &grid)) / (2.0 * h)
            })
            .collect();
        let n = scores.len() as f64;
        let mean = scores.iter().sum::<f64>() / n;
        let sd = (scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!(mean.abs() < 4.0 * sd / n.sqrt(), "mean={mean} sd={sd}");
    }

    fn decay_series(lambda: f64, x0: f64, grid: &ThinnedTimeGrid) -> ApproxCoordinateSeries {
        ApproxCoordinateSeries {
            k: 1,
            eta_hat: 0.0,
            values: (0..=grid.thinned()).map(|i| x0 * (-lambda * grid.time(i)).exp()).collect(),
        }
    }

    #[test]
    fn deterministic_decay_is_inverted() {
        let grid = ThinnedTimeGrid::new(10_000, 500, 1.0).unwrap();
        for lambda in [0.12, 3.22, 17.5] {
            let series = decay_series(lambda, 3.0, &grid);
            let fit = maximize_loglik(&series, eps(1e-4), &grid, LambdaInterval::default()).unwrap();
            assert!((fit.lambda_hat - lambda).abs() < 1e-6, "{lambda}: {}", fit.lambda_hat);
        }
    }

    #[test]
    fn variance_term_biases_upward_at_finite_noise() {
        // The log-variance term pulls the maximizer above λ* by roughly
        // T ε² / (2 ∫ x²), so "any ε" inversion only holds as ε → 0.
        let grid = ThinnedTimeGrid::new(500, 500, 1.0).unwrap();
        let lambda = 3.22;
        let series = decay_series(lambda, 3.0, &grid);
        let fit = maximize_loglik(&series, eps(0.1), &grid, LambdaInterval::default()).unwrap();
        let energy = 9.0 * (1.0 - (-2.0 * lambda).exp()) / (2.0 * lambda);
        let predicted = 0.01 / (2.0 * energy);
        let bias = fit.lambda_hat - lambda;
        assert!(bias > 0.0);
        assert!((bias / predicted - 1.0).abs() < 0.1, "bias={bias} predicted={predicted}");
    }

    #[test]
    fn boundary_fit_is_flagged() {
        let grid = ThinnedTimeGrid::new(500, 500, 1.0).unwrap();
        let series = decay_series(3.22, 3.0, &grid);
        let fit = maximize_loglik(&series, eps(1e-3), &grid, LambdaInterval { lo: 5.0, hi: 50.0 }).unwrap();
        assert!(fit.warnings.iter().any(|w| matches!(w, Warning::LikelihoodBoundary { .. })));
        let small = maximize_loglik(&decay_series(0.12, 3.0, &grid), eps(1e-3), &grid, LambdaInterval::default()).unwrap();
        assert!(small.warnings.is_empty());
        assert!(maximize_loglik(&series, eps(0.1), &grid, LambdaInterval { lo: 2.0, hi: 1.0 }).is_err());
    }

    #[test]
    fn theta0_examples() {
        let ex1 = ThetaParams::new(0.0, 1.0, 0.2).unwrap();
        assert_abs_diff_eq!(theta0_hat(lambda_k(&ex1, 1), 1.0, 0.2), 0.0, epsilon = 1e-14);
        let ex2 = ThetaParams::new(3.1, 1.0, 0.2).unwrap();
        assert_abs_diff_eq!(theta0_hat(lambda_k(&ex2, 1), 1.0, 0.2), 3.1, epsilon = 1e-14);
        assert_abs_diff_eq!(theta0_hat(PI * PI * 0.7, 0.0, 0.7), 0.0, epsilon = 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn plug_in_inverts_first_eigenvalue(l in -5.0..50.0f64, t1 in -5.0..5.0f64, t2 in 0.01..5.0f64) {
            let t0 = theta0_hat(l, t1, t2);
            let theta = ThetaParams::new(t0, t1, t2).unwrap();
            prop_assert!((lambda_k(&theta, 1) - l).abs() <= 1e-12 * (1.0 + l.abs() + t0.abs()));
        }

        #[test]
        fn xi_bounds(lambda in 0.0..1e4f64, delta_bar in 1e-5..0.1f64) {
            let v = xi_factor(lambda, delta_bar);
            prop_assert!(v > 0.0 && v <= 1.0);
        }
    }

    #[test]
    fn argmax_invariant_under_joint_rescaling() {
        let grid = ThinnedTimeGrid::new(200, 200, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut x = 2.0;
        let mut values = vec![x];
        for _ in 0..200 {
            x = ou_step(x, 2.0, 0.1, grid.delta_bar(), rng.sample(StandardNormal));
            values.push(x);
        }
        let series = ApproxCoordinateSeries { k: 1, eta_hat: 0.0, values };
        let scaled = ApproxCoordinateSeries {
            values: series.values.iter().map(|v| v * 4.0).collect(),
            ..series.clone()
        };
        let a = maximize_loglik(&series, eps(0.1), &grid, LambdaInterval::default()).unwrap();
        let b = maximize_loglik(&scaled, eps(0.4), &grid, LambdaInterval::default()).unwrap();
        assert!((a.lambda_hat - b.lambda_hat).abs() < 1e-7);
    }
}

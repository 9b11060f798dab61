//! Monte-Carlo replications of the full pipeline: simulate, estimate,
//! standardize, and summarize against the limit law.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adaptive::ThinnedTimeGrid;
use crate::asymptotics::{standardize, AsymptoticCovariance};
use crate::contrast::{realized_variation, ThinnedSpatialGrid, DEFAULT_DELTA};
use crate::diagnostics::{normality_diagnostics, NormalityDiagnostics};
use crate::error::{Error, Result};
use crate::model::{initial_coefficients, InitialCondition, NoiseLevel, ThetaParams, DEGENERATE_COEFFICIENT};
use crate::observations::FieldObservations;
use crate::pipeline::{estimate, DriftEstimates, EstimatorSettings};
use crate::simulator::{simulate_observations, ObservationLayout, SimGrid, DEFAULT_MEMORY_CAP};
use crate::warnings::Warning;

pub const REPLICATES_FILE: &str = "replicates.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const REPLICATES_HEADER: &str = "rep,theta1_hat,theta2_hat,lambda1_hat,theta0_hat,z1,z2,z3,flags";
/// Relative gap between an explicit `x_1(0)` and the projection of `ξ`
/// above which a warning is raised.
pub const X1_MISMATCH_TOLERANCE: f64 = 0.05;

/// Short names accepted for grid sizes.
pub const KEY_ALIASES: [(&str, &str); 7] = [
    ("N", "n_time"),
    ("M", "n_space"),
    ("K", "n_modes"),
    ("N2", "n_thin_time"),
    ("m", "m_sites"),
    ("T", "horizon"),
    ("x1_0", "x1_0_override"),
];

fn canonical_key(key: &str) -> &str {
    KEY_ALIASES
        .iter()
        .find(|(alias, _)| *alias == key)
        .map_or(key, |(_, name)| name)
}

/// One Monte-Carlo study. Field names are the JSON keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub theta_star: ThetaParams,
    /// Dispersion `ε ∈ [0, 1]`; zero simulates but cannot be estimated.
    pub epsilon: f64,
    /// `N`, time steps on `[0, T]`.
    #[serde(alias = "N")]
    pub n_time: usize,
    /// `M`, space steps on `[0, 1]`.
    #[serde(alias = "M")]
    pub n_space: usize,
    /// `K`, simulated modes.
    #[serde(alias = "K")]
    pub n_modes: usize,
    /// `N2`, thinned times for the rate fit.
    #[serde(alias = "N2")]
    pub n_thin_time: usize,
    /// `m`, thinned sites for the contrast.
    #[serde(alias = "m")]
    pub m_sites: usize,
    #[serde(alias = "T")]
    pub horizon: f64,
    /// Spatial cutoff: sites stay in `[δ, 1-δ]`.
    pub delta: f64,
    pub xi: InitialCondition,
    /// Explicit `x_1(0)`; replaces the projection of `ξ` onto `e_1`.
    #[serde(alias = "x1_0")]
    pub x1_0_override: Option<f64>,
    pub replicates: usize,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub estimator: EstimatorSettings,
    /// Bytes allowed for the observation slices of one replicate.
    pub memory_cap: u64,
}

impl Default for ExperimentConfig {
    /// The reference study (`θ = (0, 1, 0.2)`, `ε = 0.1`) at desk scale.
    fn default() -> Self {
        Self {
            theta_star: ThetaParams {
                theta0: 0.0,
                theta1: 1.0,
                theta2: 0.2,
            },
            epsilon: 0.1,
            n_time: 2000,
            n_space: 2000,
            n_modes: 20_000,
            n_thin_time: 200,
            m_sites: 63,
            horizon: 1.0,
            delta: DEFAULT_DELTA,
            xi: InitialCondition::Parabola { c: 4.2 },
            x1_0_override: Some(3.0),
            replicates: 100,
            seed: 1,
            output_dir: None,
            estimator: EstimatorSettings::default(),
            memory_cap: DEFAULT_MEMORY_CAP,
        }
    }
}

/// Every key accepted in a config file or override, with its meaning.
pub const CONFIG_KEYS: [(&str, &str); 17] = [
    ("theta_star.theta0", "true theta0 (real)"),
    ("theta_star.theta1", "true theta1 (real)"),
    ("theta_star.theta2", "true theta2 (> 0)"),
    ("epsilon", "noise level in [0, 1]"),
    ("n_time | N", "time steps"),
    ("n_space | M", "space steps"),
    ("n_modes | K", "simulated modes"),
    ("n_thin_time | N2", "thinned times for the rate fit (<= N)"),
    ("m_sites | m", "thinned sites for the contrast"),
    ("horizon | T", "time horizon (> 0)"),
    ("delta", "spatial cutoff in (0, 1/2)"),
    ("xi", "initial condition: {\"kind\":\"parabola\",\"c\":..} | tabulated | coefficients"),
    ("x1_0_override | x1_0", "explicit x_1(0) or null"),
    ("replicates", "Monte-Carlo replicates (>= 1)"),
    ("seed", "64-bit seed"),
    ("estimator", "{\"search_box\":{\"sigma0_sq\":[lo,hi],\"eta\":[lo,hi]},\"lambda_interval\":{\"lo\":..,\"hi\":..}}"),
    ("memory_cap", "bytes allowed for one replicate's observation slices"),
];

/// Ratios from the joint rate conditions of the limit theorem, reported so
/// a run can be judged against its regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateDiagnostics {
    /// `m/√N`; the theorem wants `m = O(N^ρ)`, `ρ < 1/2`.
    pub m_over_sqrt_n: f64,
    /// `N2/(ε²Nm)`, should be small.
    pub n2_over_eps2_nm: f64,
    /// `log N2 / log M`, must stay below `1 - ρ1`.
    pub n2_exponent_in_m: f64,
    /// `Nm/M²`, should stay bounded.
    pub nm_over_m2: f64,
    /// `ε√N2`, should stay of order one.
    pub eps_sqrt_n2: f64,
}

impl ExperimentConfig {
    /// The reference study at full scale: `N = M = 10⁴`, `K = 10⁵`, `m = 99`, `N2 = 500`,
    /// 300 replicates.
    pub fn full_scale() -> Self {
        Self {
            n_time: 10_000,
            n_space: 10_000,
            n_modes: 100_000,
            n_thin_time: 500,
            m_sites: 99,
            replicates: 300,
            ..Self::default()
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config(format!("invalid config: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    /// Overlays the top-level keys of a JSON object onto `self`; aliases are
    /// accepted and unknown keys rejected.
    pub fn merge_json(&self, overlay: &serde_json::Value) -> Result<Self> {
        let map = overlay
            .as_object()
            .ok_or_else(|| Error::config("config must be a JSON object"))?;
        let mut doc = serde_json::to_value(self).map_err(|e| Error::config(e.to_string()))?;
        let fields = doc.as_object_mut().expect("config serializes to an object");
        for (key, value) in map {
            let canonical = canonical_key(key);
            if !fields.contains_key(canonical) {
                return Err(Error::config(format!("unknown config key `{key}`")));
            }
            fields.insert(canonical.to_string(), value.clone());
        }
        serde_json::from_value(doc).map_err(|e| Error::config(format!("invalid config: {e}")))
    }

    /// Applies `key=value`. `key` may be dotted (`theta_star.theta0`) or a
    /// short alias; `value` is parsed as JSON, falling back to a string.
    pub fn with_override(&self, assignment: &str) -> Result<Self> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| Error::config(format!("override `{assignment}` is not key=value")))?;
        let canonical = canonical_key(key.trim());
        let value: serde_json::Value =
            serde_json::from_str(raw.trim()).unwrap_or_else(|_| serde_json::Value::String(raw.trim().to_string()));
        let mut doc = serde_json::to_value(self).map_err(|e| Error::config(e.to_string()))?;
        let mut slot = &mut doc;
        let parts: Vec<&str> = canonical.split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            let map = slot
                .as_object_mut()
                .ok_or_else(|| Error::config(format!("`{canonical}` does not name a config field")))?;
            if !map.contains_key(*part) {
                return Err(Error::config(format!("unknown config key `{canonical}`")));
            }
            slot = map.get_mut(*part).unwrap();
            if i + 1 == parts.len() {
                *slot = value.clone();
            }
        }
        serde_json::from_value(doc).map_err(|e| Error::config(format!("override `{assignment}`: {e}")))
    }

    /// Checks ranges; returns rate warnings that do not stop a run.
    pub fn validate(&self) -> Result<Vec<Warning>> {
        let fail = |msg: String| Err(Error::config(msg));
        ThetaParams::new(self.theta_star.theta0, self.theta_star.theta1, self.theta_star.theta2)?;
        if !(0.0..=1.0).contains(&self.epsilon) {
            return fail(format!("epsilon must lie in [0, 1], got {}", self.epsilon));
        }
        if self.replicates == 0 {
            return fail("replicates must be at least 1".into());
        }
        if self.n_space < 2 || self.n_modes == 0 {
            return fail("need n_space >= 2 and n_modes >= 1".into());
        }
        SimGrid::new(self.n_time, self.n_space, self.horizon, self.n_modes)?;
        ThinnedTimeGrid::new(self.n_time, self.n_thin_time, self.horizon)?;
        ThinnedSpatialGrid::new(self.delta, self.m_sites, self.n_space)?;
        self.xi.validate()?;
        if self.x1_0_override.is_some_and(|v| !v.is_finite()) {
            return fail("x1_0_override must be finite".into());
        }
        self.estimator.search_box.validate()?;
        self.estimator.lambda_interval.validate()?;

        let mut warnings = Vec::new();
        if self.m_sites as f64 > (self.n_time as f64).sqrt() {
            warnings.push(Warning::SiteRate {
                sites: self.m_sites,
                time_steps: self.n_time,
            });
        }
        if self.epsilon == 0.0 {
            warnings.push(Warning::ZeroNoise);
        }
        let lambda1 = self.theta_star.lambda(1);
        if lambda1 <= 0.0 {
            warnings.push(Warning::NonPositiveLambda { lambda: lambda1 });
        }
        Ok(warnings)
    }

    pub fn rate_diagnostics(&self) -> RateDiagnostics {
        let (n, m, big_m, n2) = (
            self.n_time as f64,
            self.m_sites as f64,
            self.n_space as f64,
            self.n_thin_time as f64,
        );
        RateDiagnostics {
            m_over_sqrt_n: m / n.sqrt(),
            n2_over_eps2_nm: n2 / (self.epsilon * self.epsilon * n * m),
            n2_exponent_in_m: n2.ln() / big_m.ln(),
            nm_over_m2: n * m / (big_m * big_m),
            eps_sqrt_n2: self.epsilon * n2.sqrt(),
        }
    }

    pub fn grid(&self) -> Result<SimGrid> {
        SimGrid::new(self.n_time, self.n_space, self.horizon, self.n_modes)
    }

    pub fn layout(&self) -> Result<ObservationLayout> {
        let sites = ThinnedSpatialGrid::new(self.delta, self.m_sites, self.n_space)?.positions();
        let times = ThinnedTimeGrid::new(self.n_time, self.n_thin_time, self.horizon)?;
        Ok(ObservationLayout {
            sites,
            row_stride: times.stride(),
            rows: self.n_thin_time,
        })
    }

    /// `x_k(0)` for every simulated mode, with `x_1(0)` replaced by the
    /// override when one is given.
    pub fn initial_state(&self) -> (Vec<f64>, Vec<Warning>) {
        let mut x0 = initial_coefficients(&self.xi, &self.theta_star, self.n_modes);
        let mut warnings = Vec::new();
        if let Some(explicit) = self.x1_0_override {
            let projected = x0[0];
            if (explicit - projected).abs() > X1_MISMATCH_TOLERANCE * projected.abs() {
                warnings.push(Warning::InitialCoefficientMismatch { explicit, projected });
            }
            x0[0] = explicit;
        }
        if x0[0].abs() <= DEGENERATE_COEFFICIENT {
            warnings.push(Warning::DegenerateFirstCoefficient { value: x0[0] });
        }
        (x0, warnings)
    }

    /// Observation slices for replicate `rep`.
    pub fn simulate(&self, rep: u64) -> Result<(FieldObservations, Vec<Warning>)> {
        let (x0, warnings) = self.initial_state();
        let obs = simulate_observations(
            &self.theta_star,
            self.epsilon,
            &self.grid()?,
            &x0,
            &self.layout()?,
            self.seed,
            rep,
            self.memory_cap,
        )?;
        Ok((obs, warnings))
    }

    pub fn asymptotics(&self) -> Result<AsymptoticCovariance> {
        let (x0, _) = self.initial_state();
        AsymptoticCovariance::assemble(&self.theta_star, self.delta, x0[0], self.horizon)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateResult {
    pub rep: u64,
    pub estimates: Option<DriftEstimates>,
    /// `(√(Nm)(θ̂2-θ2*), √(Nm)(θ̂1-θ1*), ε⁻¹(θ̂0-θ0*))`.
    pub standardized: Option<[f64; 3]>,
    pub contrast_value: Option<f64>,
    pub loglik_value: Option<f64>,
    pub warnings: Vec<Warning>,
    /// Why the replicate produced no estimate.
    pub error: Option<String>,
    pub wall_time: f64,
}

impl ReplicateResult {
    pub fn failed(&self) -> bool {
        match (&self.estimates, &self.standardized) {
            (Some(e), Some(z)) => ![e.theta1, e.theta2, e.lambda1, e.theta0].iter().chain(z).all(|v| v.is_finite()),
            _ => true,
        }
    }

    /// `;`-joined warning codes, plus `failed` when there is no estimate.
    pub fn flags(&self) -> String {
        let mut codes: Vec<&str> = self.warnings.iter().map(Warning::code).collect();
        if self.failed() {
            codes.push("failed");
        }
        codes.join(";")
    }

    pub fn csv_line(&self) -> String {
        let num = |v: Option<f64>| v.map_or_else(|| "NaN".to_string(), |x| x.to_string());
        let e = self.estimates;
        let z = self.standardized;
        let mut line = self.rep.to_string();
        for v in [
            e.map(|e| e.theta1),
            e.map(|e| e.theta2),
            e.map(|e| e.lambda1),
            e.map(|e| e.theta0),
            z.map(|z| z[0]),
            z.map(|z| z[1]),
            z.map(|z| z[2]),
        ] {
            let _ = write!(line, ",{}", num(v));
        }
        let _ = write!(line, ",{}", self.flags());
        line
    }
}

/// Simulates and estimates replicate `rep`. Estimation failures are recorded
/// in the result; only invalid configurations are errors.
pub fn run_replicate(config: &ExperimentConfig, rep: u64) -> Result<ReplicateResult> {
    let start = Instant::now();
    let (obs, mut warnings) = config.simulate(rep)?;
    let mut result = ReplicateResult {
        rep,
        estimates: None,
        standardized: None,
        contrast_value: None,
        loglik_value: None,
        warnings: Vec::new(),
        error: None,
        wall_time: 0.0,
    };
    match NoiseLevel::new(config.epsilon) {
        Err(_) => {
            // Z_j is then pure drift variation; nothing to normalize by
            warnings.push(Warning::ZeroNoise);
            let z_max = obs
                .site_columns
                .iter()
                .map(|c| realized_variation(c, obs.time_steps, obs.horizon))
                .fold(0.0, f64::max);
            result.error = Some(format!("epsilon = 0: estimators undefined (max Z_j = {z_max:e})"));
        }
        Ok(eps) => match estimate(&obs, eps, &config.estimator) {
            Ok(fit) => {
                warnings.extend(fit.warnings);
                result.standardized = Some(standardize(
                    &fit.estimates,
                    &config.theta_star,
                    config.n_time,
                    config.m_sites,
                    config.epsilon,
                ));
                result.estimates = Some(fit.estimates);
                result.contrast_value = Some(fit.contrast_value);
                result.loglik_value = Some(fit.loglik_value);
            }
            Err(e) => result.error = Some(e.to_string()),
        },
    }
    result.warnings = warnings;
    result.wall_time = start.elapsed().as_secs_f64();
    Ok(result)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParameterStats {
    pub mean: f64,
    /// Sample standard deviation; 0 when fewer than two successes.
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentSummary {
    pub name: String,
    pub target_variance: f64,
    pub diagnostics: NormalityDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryStats {
    pub replicates: usize,
    pub successes: usize,
    pub failures: usize,
    pub theta1: ParameterStats,
    pub theta2: ParameterStats,
    pub lambda1: ParameterStats,
    pub theta0: ParameterStats,
    /// Standardized errors, in the order `(θ2, θ1, θ0)`.
    pub standardized: [ParameterStats; 3],
    /// Set when fewer than two replicates succeeded.
    pub sd_undefined: bool,
    pub normality: Vec<ComponentSummary>,
    pub asymptotics: Option<AsymptoticCovariance>,
    pub rate_diagnostics: RateDiagnostics,
    pub config_warnings: Vec<Warning>,
    /// Replicates carrying each warning code.
    pub warning_counts: std::collections::BTreeMap<String, usize>,
}

fn stats(values: &[f64]) -> ParameterStats {
    let n = values.len() as f64;
    if values.is_empty() {
        return ParameterStats { mean: f64::NAN, sd: 0.0 };
    }
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    ParameterStats { mean, sd }
}

pub const COMPONENT_NAMES: [&str; 3] = ["theta2", "theta1", "theta0"];

/// Aggregates replicates in `rep` order.
pub fn summarize(config: &ExperimentConfig, results: &[ReplicateResult]) -> Result<SummaryStats> {
    let config_warnings = config.validate()?;
    let ok: Vec<&ReplicateResult> = results.iter().filter(|r| !r.failed()).collect();
    let est: Vec<DriftEstimates> = ok.iter().filter_map(|r| r.estimates).collect();
    let z: Vec<[f64; 3]> = ok.iter().filter_map(|r| r.standardized).collect();
    let column = |f: &dyn Fn(&DriftEstimates) -> f64| stats(&est.iter().map(f).collect::<Vec<_>>());

    let asymptotics = config.asymptotics().ok();
    let mut normality = Vec::new();
    if let Some(a) = &asymptotics {
        for (c, name) in COMPONENT_NAMES.iter().enumerate() {
            let samples: Vec<f64> = z.iter().map(|v| v[c]).collect();
            let variance = a.variances[c];
            if let Ok(diagnostics) = normality_diagnostics(&samples, variance) {
                normality.push(ComponentSummary {
                    name: name.to_string(),
                    target_variance: variance,
                    diagnostics,
                });
            }
        }
    }
    let mut warning_counts = std::collections::BTreeMap::new();
    for r in results {
        let mut codes: Vec<&str> = r.warnings.iter().map(Warning::code).collect();
        codes.sort_unstable();
        codes.dedup();
        for code in codes {
            *warning_counts.entry(code.to_string()).or_insert(0) += 1;
        }
    }

    Ok(SummaryStats {
        replicates: results.len(),
        successes: ok.len(),
        failures: results.len() - ok.len(),
        theta1: column(&|e| e.theta1),
        theta2: column(&|e| e.theta2),
        lambda1: column(&|e| e.lambda1),
        theta0: column(&|e| e.theta0),
        standardized: std::array::from_fn(|c| stats(&z.iter().map(|v| v[c]).collect::<Vec<_>>())),
        sd_undefined: ok.len() < 2,
        normality,
        asymptotics,
        rate_diagnostics: config.rate_diagnostics(),
        config_warnings,
        warning_counts,
    })
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub results: Vec<ReplicateResult>,
    pub summary: SummaryStats,
}

/// Runs every replicate on a pool of `threads` workers (all cores when
/// `None`). Output is ordered by replicate and independent of `threads`.
/// Files are written when `config.output_dir` is set.
pub fn run_experiment(config: &ExperimentConfig, threads: Option<usize>) -> Result<ExperimentOutcome> {
    for w in config.validate()? {
        log::warn!("{w}");
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::config(format!("cannot build worker pool: {e}")))?;
    let start = Instant::now();
    let results: Vec<ReplicateResult> = pool.install(|| {
        (0..config.replicates as u64)
            .into_par_iter()
            .map(|rep| {
                let r = run_replicate(config, rep);
                if let Ok(r) = &r {
                    log::debug!("replicate {rep} done in {:.2}s [{}]", r.wall_time, r.flags());
                }
                r
            })
            .collect::<Result<Vec<_>>>()
    })?;
    log::info!("{} replicates in {:.1}s", results.len(), start.elapsed().as_secs_f64());
    let summary = summarize(config, &results)?;
    if let Some(dir) = &config.output_dir {
        write_outputs(dir, &results, &summary)?;
    }
    Ok(ExperimentOutcome { results, summary })
}

pub fn write_replicates_csv(path: &Path, results: &[ReplicateResult]) -> Result<()> {
    let io_err = |e| Error::io(path, e);
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
    writeln!(out, "{REPLICATES_HEADER}").map_err(io_err)?;
    for r in results {
        writeln!(out, "{}", r.csv_line()).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

pub fn write_outputs(dir: &Path, results: &[ReplicateResult], summary: &SummaryStats) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_replicates_csv(&dir.join(REPLICATES_FILE), results)?;
    let path = dir.join(SUMMARY_FILE);
    let text = serde_json::to_string_pretty(summary).map_err(|e| Error::Numerical(e.to_string()))?;
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    for c in &summary.normality {
        c.diagnostics.write_tables(dir, &c.name)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        ExperimentConfig {
            n_time: 400,
            n_space: 200,
            n_modes: 400,
            n_thin_time: 40,
            m_sites: 15,
            replicates: 3,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn defaults_validate() {
        // m = 63 exceeds √2000 at desk scale
        let desk = ExperimentConfig::default().validate().unwrap();
        assert!(matches!(desk[..], [Warning::SiteRate { sites: 63, .. }]));
        assert!(ExperimentConfig::full_scale().validate().unwrap().is_empty());
    }

    #[test]
    fn json_aliases_and_unknown_keys() {
        let c = ExperimentConfig::from_json_str(r#"{"N": 100, "M": 50, "m": 5, "N2": 10, "K": 60}"#).unwrap();
        assert_eq!((c.n_time, c.n_space, c.m_sites, c.n_thin_time, c.n_modes), (100, 50, 5, 10, 60));
        assert!(ExperimentConfig::from_json_str(r#"{"bogus": 1}"#).is_err());
        let round = serde_json::to_string(&c).unwrap();
        assert_eq!(ExperimentConfig::from_json_str(&round).unwrap(), c);
    }

    #[test]
    fn merge_keeps_unmentioned_fields() {
        let base = ExperimentConfig::full_scale();
        let merged = base.merge_json(&serde_json::json!({"epsilon": 0.25, "N2": 400})).unwrap();
        assert_eq!((merged.epsilon, merged.n_thin_time, merged.n_time), (0.25, 400, 10_000));
        assert!(base.merge_json(&serde_json::json!({"nope": 1})).is_err());
        assert!(base.merge_json(&serde_json::json!([1])).is_err());
    }

    #[test]
    fn overrides_are_type_checked() {
        let c = ExperimentConfig::default();
        assert_eq!(c.with_override("N=500").unwrap().n_time, 500);
        assert_eq!(c.with_override("theta_star.theta0=3.1").unwrap().theta_star.theta0, 3.1);
        assert_eq!(c.with_override("x1_0=null").unwrap().x1_0_override, None);
        assert!(c.with_override("N=abc").is_err());
        assert!(c.with_override("nope=1").is_err());
        assert!(c.with_override("theta_star.theta2=-1").is_err());
        assert!(c.with_override("novalue").is_err());
    }

    #[test]
    fn validation_rejects_bad_ranges() {
        let c = ExperimentConfig::default();
        for bad in ["replicates=0", "epsilon=1.5", "n_thin_time=5000", "m_sites=5000", "delta=0.5"] {
            let cfg = c.with_override(bad).unwrap();
            assert!(matches!(cfg.validate(), Err(Error::Config(_))), "{bad}");
        }
        let warned = c.with_override("m=60").unwrap().with_override("N=400").unwrap();
        assert!(warned.validate().unwrap().iter().any(|w| matches!(w, Warning::SiteRate { .. })));
    }

    #[test]
    fn override_wins_and_mismatch_is_flagged() {
        let c = ExperimentConfig::default();
        let (x0, w) = c.initial_state();
        assert_eq!(x0[0], 3.0);
        assert!(w.is_empty());
        let far = c.with_override("x1_0=4").unwrap();
        let (x0, w) = far.initial_state();
        assert_eq!(x0[0], 4.0);
        assert!(matches!(w[0], Warning::InitialCoefficientMismatch { .. }));
    }

    #[test]
    fn replicate_is_deterministic() {
        let c = tiny();
        let a = run_replicate(&c, 1).unwrap();
        let b = run_replicate(&c, 1).unwrap();
        assert_eq!(a.estimates, b.estimates);
        assert_eq!(a.csv_line(), b.csv_line());
        assert!(!a.failed(), "{:?}", a.error);
    }

    #[test]
    fn zero_noise_is_flagged() {
        let c = tiny().with_override("epsilon=0").unwrap();
        let r = run_replicate(&c, 0).unwrap();
        assert!(r.failed());
        assert!(r.flags().contains("zero_noise"));
    }

    #[test]
    fn single_replicate_summary() {
        let c = ExperimentConfig { replicates: 1, ..tiny() };
        let out = run_experiment(&c, Some(1)).unwrap();
        let s = &out.summary;
        assert_eq!((s.replicates, s.successes + s.failures), (1, 1));
        assert!(s.sd_undefined);
        assert_eq!(s.theta1.sd, 0.0);
        assert_eq!(s.theta1.mean, out.results[0].estimates.unwrap().theta1);
    }

    #[test]
    fn outputs_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let c = ExperimentConfig {
            output_dir: Some(dir.path().to_path_buf()),
            ..tiny()
        };
        let out = run_experiment(&c, Some(2)).unwrap();
        let text = std::fs::read_to_string(dir.path().join(REPLICATES_FILE)).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(REPLICATES_HEADER));
        assert_eq!(lines.count(), 3);
        for name in COMPONENT_NAMES {
            assert!(dir.path().join(format!("qq_{name}.csv")).exists());
        }
        let json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join(SUMMARY_FILE)).unwrap()).unwrap();
        assert_eq!(json["successes"].as_u64().unwrap() as usize, out.summary.successes);
    }
}

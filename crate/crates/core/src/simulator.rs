//! Spectral simulation of the field: every eigen-coordinate is an
//! Ornstein–Uhlenbeck process advanced with its exact Gaussian transition,
//! and the field is the truncated expansion `Σ_{k≤K} x_k(t) e_k(y)`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{eigenfunction, ThetaParams};
use crate::observations::FieldObservations;
use crate::rng::{mode_stream, mode_streams};
use crate::synthesis::SineSynthesizer;

/// Below this `|λ·dt|` the transition variance uses its Taylor expansion.
pub const SMALL_RATE_THRESHOLD: f64 = 1e-6;

/// Default ceiling on the bytes a single simulation may allocate for paths.
pub const DEFAULT_MEMORY_CAP: u64 = 1 << 30;

/// Time steps advanced per mode before synthesis.
const TIME_BLOCK: usize = 64;

/// Space–time grid `t_i = iT/N`, `y_j = j/M` and spectral truncation `K`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimGrid {
    pub time_steps: usize,
    pub space_steps: usize,
    pub horizon: f64,
    pub modes: usize,
}

impl SimGrid {
    pub fn new(time_steps: usize, space_steps: usize, horizon: f64, modes: usize) -> Result<Self> {
        if time_steps == 0 || space_steps == 0 || modes == 0 {
            return Err(Error::config("time_steps, space_steps and modes must all be at least 1"));
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::config(format!("horizon must be positive, got {horizon}")));
        }
        Ok(Self {
            time_steps,
            space_steps,
            horizon,
            modes,
        })
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.time_steps as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.horizon / self.time_steps as f64
    }

    pub fn space(&self, j: usize) -> f64 {
        j as f64 / self.space_steps as f64
    }
}

/// `(1 - e^{-2λ dt}) / (2λ)`, equal to `dt` at `λ = 0`.
pub fn ou_variance(lambda: f64, dt: f64) -> f64 {
    let a = lambda * dt;
    if a.abs() < SMALL_RATE_THRESHOLD {
        dt * (1.0 - a + 2.0 / 3.0 * a * a)
    } else {
        -(-2.0 * a).exp_m1() / (2.0 * lambda)
    }
}

/// One exact transition of `dx = -λx dt + ε dw` over `dt`, driven by the
/// standard normal draw `z`.
pub fn ou_step(x_prev: f64, lambda: f64, epsilon: f64, dt: f64, z: f64) -> f64 {
    OuTransition::new(lambda, epsilon, dt).step(x_prev, z)
}

#[derive(Debug, Clone, Copy)]
struct OuTransition {
    decay: f64,
    scale: f64,
}

impl OuTransition {
    fn new(lambda: f64, epsilon: f64, dt: f64) -> Self {
        Self {
            decay: (-lambda * dt).exp(),
            scale: epsilon * ou_variance(lambda, dt).sqrt(),
        }
    }

    #[inline]
    fn step(&self, x: f64, z: f64) -> f64 {
        self.decay * x + self.scale * z
    }
}

/// Stationary standard deviation `ε/√(2λ_K)` of the last retained mode; a
/// rough gauge of what the truncation throws away.
pub fn last_mode_stationary_sd(theta: &ThetaParams, epsilon: f64, modes: usize) -> f64 {
    let lambda = theta.lambda(modes);
    if lambda > 0.0 {
        epsilon / (2.0 * lambda).sqrt()
    } else {
        f64::INFINITY
    }
}

fn validate_epsilon(epsilon: f64) -> Result<()> {
    if (0.0..=1.0).contains(&epsilon) {
        Ok(())
    } else {
        Err(Error::domain(format!("epsilon must lie in [0, 1], got {epsilon}")))
    }
}

fn padded(x0: &[f64], modes: usize) -> Vec<f64> {
    (0..modes).map(|i| x0.get(i).copied().unwrap_or(0.0)).collect()
}

/// Coordinate trajectories `x_k(t_i)`, `k = 1..=K`, `i = 0..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinatePaths {
    time_points: usize,
    values: Vec<f64>,
    lambda: Vec<f64>,
    x0: Vec<f64>,
}

impl CoordinatePaths {
    /// Builds paths from a mode-major matrix (`paths[k-1][i]`).
    pub fn from_paths(paths: Vec<Vec<f64>>, lambda: Vec<f64>) -> Result<Self> {
        let time_points = paths.first().map_or(0, Vec::len);
        if time_points == 0 || paths.len() != lambda.len() || paths.iter().any(|p| p.len() != time_points) {
            return Err(Error::domain("coordinate paths must form a non-empty K x (N+1) matrix"));
        }
        let x0 = paths.iter().map(|p| p[0]).collect();
        Ok(Self {
            time_points,
            values: paths.into_iter().flatten().collect(),
            lambda,
            x0,
        })
    }

    pub fn modes(&self) -> usize {
        self.lambda.len()
    }

    pub fn time_steps(&self) -> usize {
        self.time_points - 1
    }

    /// Path of mode `k` (1-based).
    pub fn path(&self, k: usize) -> &[f64] {
        &self.values[(k - 1) * self.time_points..k * self.time_points]
    }

    pub fn value(&self, k: usize, i: usize) -> f64 {
        self.values[(k - 1) * self.time_points + i]
    }

    /// `(x_1(t_i), ..., x_K(t_i))`.
    pub fn coefficients_at(&self, i: usize) -> Vec<f64> {
        (1..=self.modes()).map(|k| self.value(k, i)).collect()
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }
}

/// Simulates all `K` coordinates on the time grid. Mode `k` draws from
/// substream `(seed, replicate, k)`.
pub fn simulate_coordinates(
    theta: &ThetaParams,
    epsilon: f64,
    grid: &SimGrid,
    x0: &[f64],
    seed: u64,
    replicate: u64,
    memory_cap: u64,
) -> Result<CoordinatePaths> {
    validate_epsilon(epsilon)?;
    let time_points = grid.time_steps + 1;
    let requested = (grid.modes as u64)
        .saturating_mul(time_points as u64)
        .saturating_mul(std::mem::size_of::<f64>() as u64);
    if requested > memory_cap {
        return Err(Error::Resource {
            requested,
            cap: memory_cap,
        });
    }
    let dt = grid.dt();
    let x0 = padded(x0, grid.modes);
    let lambda: Vec<f64> = (1..=grid.modes).map(|k| theta.lambda(k)).collect();
    let mut values = Vec::with_capacity(grid.modes * time_points);
    for (k, (&lam, &start)) in lambda.iter().zip(&x0).enumerate() {
        let transition = OuTransition::new(lam, epsilon, dt);
        let mut rng = mode_stream(seed, replicate, k + 1);
        let mut x = start;
        values.push(x);
        for _ in 0..grid.time_steps {
            let z: f64 = rng.sample(StandardNormal);
            x = transition.step(x, z);
            values.push(x);
        }
    }
    Ok(CoordinatePaths {
        time_points,
        values,
        lambda,
        x0,
    })
}

/// Naive `Σ_k x_k(t_i) e_k(y)` at arbitrary sites.
pub fn synthesize_field_at(coords: &CoordinatePaths, eta: f64, time_index: usize, sites: &[f64]) -> Vec<f64> {
    sites
        .iter()
        .map(|&y| {
            (1..=coords.modes())
                .map(|k| coords.value(k, time_index) * eigenfunction(eta, k, y))
                .sum()
        })
        .collect()
}

/// Field row at `y_j = j/M`, `j = 1..=M`, through the folded sine transform.
pub fn synthesize_row_fast(coords: &CoordinatePaths, eta: f64, time_index: usize, space_steps: usize) -> Vec<f64> {
    let mut synth = SineSynthesizer::new(space_steps);
    let mut out = vec![0.0; space_steps];
    synth.row(&coords.coefficients_at(time_index), eta, &mut out);
    out
}

/// Which slices of the field to keep: time series at `sites` over every
/// `t_i`, and full spatial rows at `t_{r·row_stride}` for `r = 0..=rows`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationLayout {
    pub sites: Vec<f64>,
    pub row_stride: usize,
    pub rows: usize,
}

enum SiteSampler {
    /// Sites coincide with grid points; values are read off the synthesized row.
    Grid(Vec<usize>),
    /// Off-grid sites: `e_k(site)` tabulated, site-major.
    Table(Vec<f64>),
}

impl SiteSampler {
    fn new(sites: &[f64], eta: f64, space_steps: usize, modes: usize) -> Self {
        let m = space_steps as f64;
        let on_grid: Option<Vec<usize>> = sites
            .iter()
            .map(|&y| {
                let pos = y * m;
                let j = pos.round();
                ((pos - j).abs() < 1e-9 && j >= 1.0 && j <= m).then_some(j as usize)
            })
            .collect();
        match on_grid {
            Some(indices) => SiteSampler::Grid(indices),
            None => SiteSampler::Table(
                sites
                    .iter()
                    .flat_map(|&y| (1..=modes).map(move |k| eigenfunction(eta, k, y)))
                    .collect(),
            ),
        }
    }

    fn needs_row(&self) -> bool {
        matches!(self, SiteSampler::Grid(_))
    }

    fn sample(&self, state: &[f64], row: &[f64], columns: &mut [Vec<f64>]) {
        match self {
            SiteSampler::Grid(indices) => {
                for (col, &j) in columns.iter_mut().zip(indices) {
                    col.push(row[j - 1]);
                }
            }
            SiteSampler::Table(table) => {
                for (col, basis) in columns.iter_mut().zip(table.chunks_exact(state.len())) {
                    col.push(state.iter().zip(basis).map(|(x, e)| x * e).sum());
                }
            }
        }
    }
}

/// Streams the coordinates forward in time and keeps only the slices named
/// by `layout`, never holding the full `K × (N+1)` path matrix. Produces the
/// same coordinate values as [`simulate_coordinates`] for the same indices.
#[allow(clippy::too_many_arguments)]
pub fn simulate_observations(
    theta: &ThetaParams,
    epsilon: f64,
    grid: &SimGrid,
    x0: &[f64],
    layout: &ObservationLayout,
    seed: u64,
    replicate: u64,
    memory_cap: u64,
) -> Result<FieldObservations> {
    validate_epsilon(epsilon)?;
    if layout.row_stride == 0 || layout.rows * layout.row_stride > grid.time_steps {
        return Err(Error::config("thinned rows must lie inside the time grid"));
    }
    if layout.sites.iter().any(|&y| !(y > 0.0 && y < 1.0)) {
        return Err(Error::config("observation sites must lie in (0, 1)"));
    }
    let words = layout.sites.len() as u64 * (grid.time_steps as u64 + 1)
        + (layout.rows as u64 + 1) * grid.space_steps as u64
        + 3 * grid.modes as u64
        + TIME_BLOCK as u64 * (grid.space_steps + layout.sites.len()) as u64;
    let requested = words * std::mem::size_of::<f64>() as u64
        + grid.modes as u64 * std::mem::size_of::<rand_chacha::ChaCha8Rng>() as u64;
    if requested > memory_cap {
        return Err(Error::Resource {
            requested,
            cap: memory_cap,
        });
    }

    let eta = theta.eta();
    let dt = grid.dt();
    let (m, modes) = (grid.space_steps, grid.modes);
    let mut state = padded(x0, modes);
    let transitions: Vec<OuTransition> = (1..=modes)
        .map(|k| OuTransition::new(theta.lambda(k), epsilon, dt))
        .collect();
    let mut streams = mode_streams(seed, replicate, modes);
    let sampler = SiteSampler::new(&layout.sites, eta, m, modes);
    let mut synth = SineSynthesizer::new(m);
    let targets: Vec<Option<(usize, f64)>> = (1..=modes).map(|k| synth.fold_target(k)).collect();
    let mut row = vec![0.0; m];
    let mut site_columns: Vec<Vec<f64>> = layout
        .sites
        .iter()
        .map(|_| Vec::with_capacity(grid.time_steps + 1))
        .collect();
    let mut time_rows = Vec::with_capacity(layout.rows + 1);
    let keep_row = |i: usize| i.is_multiple_of(layout.row_stride) && i / layout.row_stride <= layout.rows;

    synth.row(&state, eta, &mut row);
    sampler.sample(&state, &row, &mut site_columns);
    if keep_row(0) {
        time_rows.push(row.clone());
    }

    // Each mode advances a whole block of steps at once, folding straight
    // into per-step bins, so every RNG state is loaded once per block
    // instead of once per step.
    let sites = layout.sites.len();
    let mut folded = vec![0.0; TIME_BLOCK * m];
    let mut site_sums = vec![0.0; TIME_BLOCK * sites];
    let mut start = 1;
    while start <= grid.time_steps {
        let len = TIME_BLOCK.min(grid.time_steps + 1 - start);
        folded.iter_mut().for_each(|v| *v = 0.0);
        site_sums.iter_mut().for_each(|v| *v = 0.0);
        for k in 0..modes {
            let (transition, rng) = (transitions[k], &mut streams[k]);
            let mut x = state[k];
            for b in 0..len {
                let z: f64 = rng.sample(StandardNormal);
                x = transition.step(x, z);
                if let Some((bin, sign)) = targets[k] {
                    folded[b * m + bin] += sign * x;
                }
                if let SiteSampler::Table(table) = &sampler {
                    for (s, acc) in site_sums[b * sites..(b + 1) * sites].iter_mut().enumerate() {
                        *acc += x * table[s * modes + k];
                    }
                }
            }
            state[k] = x;
        }
        for b in 0..len {
            let i = start + b;
            let keep = keep_row(i);
            if keep || sampler.needs_row() {
                synth.row_folded(&folded[b * m..(b + 1) * m], eta, &mut row);
            }
            match &sampler {
                SiteSampler::Grid(_) => sampler.sample(&state, &row, &mut site_columns),
                SiteSampler::Table(_) => {
                    for (col, v) in site_columns.iter_mut().zip(&site_sums[b * sites..(b + 1) * sites]) {
                        col.push(*v);
                    }
                }
            }
            if keep {
                time_rows.push(row.clone());
            }
        }
        start += len;
    }

    Ok(FieldObservations {
        time_steps: grid.time_steps,
        space_steps: grid.space_steps,
        horizon: grid.horizon,
        epsilon,
        modes: grid.modes,
        sites: layout.sites.clone(),
        site_columns,
        row_stride: layout.row_stride,
        time_rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use std::f64::consts::PI;
    use rand_chacha::ChaCha8Rng;

    fn example1() -> ThetaParams {
        ThetaParams::new(0.0, 1.0, 0.2).unwrap()
    }

    #[test]
    fn noiseless_step_is_pure_decay() {
        for (x, lambda, dt) in [(3.0, 3.22, 0.01), (-1.5, -0.8, 0.1), (2.0, 0.0, 0.5)] {
            assert_eq!(ou_step(x, lambda, 0.0, dt, 1.234), (-lambda * dt).exp() * x);
        }
    }

    #[test]
    fn variance_limit_at_zero_rate() {
        assert_eq!(ou_variance(0.0, 0.01), 0.01);
        assert_abs_diff_eq!(ou_variance(1e-7, 0.01), 0.01, epsilon = 1e-10);
        // series and closed form agree near the threshold
        let dt = 0.01;
        for a in [0.5e-6f64, 0.99e-6, 1.01e-6, 2e-6] {
            let lambda = a / dt;
            let series = dt * (1.0 - a + 2.0 / 3.0 * a * a);
            let closed = -(-2.0 * a).exp_m1() / (2.0 * lambda);
            assert!(((series - closed) / closed).abs() < 1e-14);
            assert!(((ou_variance(lambda, dt) - closed) / closed).abs() < 1e-14);
        }
    }

    #[test]
    fn one_step_variance_matches_oracle() {
        // 0.01·(1-e^{-6.44e-4})/6.44, 40-digit evaluation
        let v = 0.01 * ou_variance(3.22, 1e-4);
        assert_abs_diff_eq!(v, ONE_STEP_VARIANCE, epsilon = 1e-20);
        assert!(((v - ONE_STEP_VARIANCE) / ONE_STEP_VARIANCE).abs() < 1e-14);
    }

    const ONE_STEP_VARIANCE: f64 = 9.996780691115394e-7;

    #[test]
    fn exact_transition_moments() {
        let (lambda, eps, dt, x_prev) = (3.22, 0.3, 0.05, 1.7);
        let transition = OuTransition::new(lambda, eps, dt);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| transition.step(x_prev, rng.sample(StandardNormal))).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let target_var = eps * eps * ou_variance(lambda, dt);
        let se = (target_var / n as f64).sqrt();
        assert!((mean - (-lambda * dt).exp() * x_prev).abs() < 4.0 * se);
        assert!((var / target_var - 1.0).abs() < 0.05);
    }

    #[test]
    fn zero_paths_stay_zero() {
        let grid = SimGrid::new(20, 8, 1.0, 5).unwrap();
        let paths = simulate_coordinates(&example1(), 0.0, &grid, &[], 1, 0, DEFAULT_MEMORY_CAP).unwrap();
        for k in 1..=5 {
            assert!(paths.path(k).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn deterministic_decay_of_first_mode() {
        let grid = SimGrid::new(50, 8, 1.0, 3).unwrap();
        let theta = example1();
        let paths = simulate_coordinates(&theta, 0.0, &grid, &[3.0], 1, 0, DEFAULT_MEMORY_CAP).unwrap();
        let lambda1 = theta.lambda(1);
        for (i, v) in paths.path(1).iter().enumerate() {
            let expected = 3.0 * (-lambda1 * grid.time(i)).exp();
            assert!((v - expected).abs() < 1e-13 * 3.0, "i={i}");
        }
    }

    #[test]
    fn reproducible_with_fixed_seed() {
        let grid = SimGrid::new(4, 8, 1.0, 2).unwrap();
        let a = simulate_coordinates(&example1(), 0.1, &grid, &[3.0], 42, 0, DEFAULT_MEMORY_CAP).unwrap();
        let b = simulate_coordinates(&example1(), 0.1, &grid, &[3.0], 42, 0, DEFAULT_MEMORY_CAP).unwrap();
        let bits = |p: &CoordinatePaths| -> Vec<u64> {
            (1..=2).flat_map(|k| p.path(k).iter().map(|v| v.to_bits()).collect::<Vec<_>>()).collect()
        };
        assert_eq!(bits(&a), bits(&b));
        let c = simulate_coordinates(&example1(), 0.1, &grid, &[3.0], 42, 1, DEFAULT_MEMORY_CAP).unwrap();
        assert_ne!(bits(&a), bits(&c));
    }

    #[test]
    fn memory_cap_is_enforced() {
        let grid = SimGrid::new(1000, 8, 1.0, 1000).unwrap();
        let err = simulate_coordinates(&example1(), 0.1, &grid, &[], 1, 0, 1024).unwrap_err();
        assert!(matches!(err, Error::Resource { .. }));
    }

    #[test]
    fn mode_increments_are_uncorrelated() {
        let grid = SimGrid::new(10_000, 8, 1.0, 2).unwrap();
        let paths = simulate_coordinates(&example1(), 0.5, &grid, &[1.0, 1.0], 5, 0, DEFAULT_MEMORY_CAP).unwrap();
        let inc = |k: usize| -> Vec<f64> { paths.path(k).windows(2).map(|w| w[1] - w[0]).collect() };
        let (a, b) = (inc(1), inc(2));
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        let corr = cov / (va * vb).sqrt();
        assert!(corr.abs() < 4.0 / 100.0, "corr={corr}");
    }

    #[test]
    fn single_mode_field() {
        let paths = CoordinatePaths::from_paths(vec![vec![2.0, 2.0], vec![0.0, 0.0]], vec![1.0, 2.0]).unwrap();
        let sites = [0.1, 0.37, 0.8];
        let field = synthesize_field_at(&paths, 1.5, 1, &sites);
        for (v, &y) in field.iter().zip(&sites) {
            assert_abs_diff_eq!(*v, 2.0 * eigenfunction(1.5, 1, y), epsilon = 1e-15);
        }
        let boundary = synthesize_field_at(&paths, 1.5, 0, &[0.0, 1.0]);
        assert!(boundary.iter().all(|v| v.abs() < 1e-14));
        let zero = CoordinatePaths::from_paths(vec![vec![0.0]; 3], vec![1.0; 3]).unwrap();
        assert!(synthesize_field_at(&zero, 0.3, 0, &sites).iter().all(|&v| v == 0.0));
        assert!(synthesize_row_fast(&zero, 0.3, 0, 16).iter().all(|&v| v == 0.0));
        let row = synthesize_row_fast(&paths, 1.5, 0, 10);
        for (j, v) in row.iter().enumerate() {
            assert_abs_diff_eq!(*v, 2.0 * eigenfunction(1.5, 1, (j + 1) as f64 / 10.0), epsilon = 1e-14);
        }
    }

    #[test]
    fn field_matches_reverse_order_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let paths = CoordinatePaths::from_paths(
            (0..3).map(|_| vec![rng.random_range(-2.0..2.0)]).collect(),
            vec![1.0, 2.0, 3.0],
        )
        .unwrap();
        let sites = [0.05, 0.2, 0.5, 0.71, 0.93];
        let eta = -3.3;
        let field = synthesize_field_at(&paths, eta, 0, &sites);
        for (v, &y) in field.iter().zip(&sites) {
            // independent oracle: reverse-order compensated summation
            let mut sum = 0.0f64;
            let mut comp = 0.0f64;
            for k in (1..=3).rev() {
                let term = paths.value(k, 0) * std::f64::consts::SQRT_2 * (PI * k as f64 * y).sin() * (-eta * y / 2.0).exp();
                let t = sum + term;
                comp += if sum.abs() >= term.abs() { (sum - t) + term } else { (term - t) + sum };
                sum = t;
            }
            assert!((v - (sum + comp)).abs() < 1e-12);
        }
    }

    #[test]
    fn streaming_observations_match_full_paths() {
        let theta = ThetaParams::new(0.5, -1.0, 0.3).unwrap();
        let grid = SimGrid::new(40, 20, 1.0, 60).unwrap();
        let x0: Vec<f64> = (1..=60).map(|k| 1.0 / (k * k) as f64).collect();
        let layout = ObservationLayout {
            sites: vec![0.1, 0.25, 0.6],
            row_stride: 8,
            rows: 5,
        };
        let obs = simulate_observations(&theta, 0.2, &grid, &x0, &layout, 9, 3, DEFAULT_MEMORY_CAP).unwrap();
        let paths = simulate_coordinates(&theta, 0.2, &grid, &x0, 9, 3, DEFAULT_MEMORY_CAP).unwrap();
        let eta = theta.eta();
        for i in 0..=40 {
            let naive = synthesize_field_at(&paths, eta, i, &layout.sites);
            for (s, v) in naive.iter().enumerate() {
                assert!((obs.site_columns[s][i] - v).abs() < 1e-10);
            }
        }
        assert_eq!(obs.time_rows.len(), 6);
        for r in 0..=5 {
            let fast = synthesize_row_fast(&paths, eta, r * 8, 20);
            for (a, b) in obs.time_rows[r].iter().zip(&fast) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        // off-grid sites take the tabulated path
        let off = ObservationLayout {
            sites: vec![0.123, 0.456],
            row_stride: 8,
            rows: 5,
        };
        let obs_off = simulate_observations(&theta, 0.2, &grid, &x0, &off, 9, 3, DEFAULT_MEMORY_CAP).unwrap();
        for i in [0, 17, 40] {
            let naive = synthesize_field_at(&paths, eta, i, &off.sites);
            for (s, v) in naive.iter().enumerate() {
                assert!((obs_off.site_columns[s][i] - v).abs() < 1e-12);
            }
        }
    }
}

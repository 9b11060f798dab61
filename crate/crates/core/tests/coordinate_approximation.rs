//! The Riemann-sum estimate of the first coordinate errs at order 1/M.

use spde_drift::adaptive::approx_coordinate;
use spde_drift::model::ThetaParams;
use spde_drift::simulator::{simulate_coordinates, synthesize_row_fast, SimGrid};

fn rms_error(space_steps: usize) -> f64 {
    let theta = ThetaParams::new(0.0, 1.0, 0.2).unwrap();
    let (modes, steps) = (4096, 200);
    let grid = SimGrid::new(steps, space_steps, 1.0, modes).unwrap();
    let mut x0 = vec![0.0; modes];
    x0[0] = 3.0;
    let paths = simulate_coordinates(&theta, 0.1, &grid, &x0, 3, 0, 1 << 30).unwrap();
    let sq: f64 = (1..=steps)
        .map(|i| {
            let row = synthesize_row_fast(&paths, theta.eta(), i, space_steps);
            (approx_coordinate(&row, theta.eta(), 1, space_steps) - paths.value(1, i)).powi(2)
        })
        .sum();
    (sq / steps as f64).sqrt()
}

#[test]
fn error_halves_as_the_spatial_grid_doubles() {
    let errors: Vec<f64> = [64, 128, 256].iter().map(|&m| rms_error(m)).collect();
    for w in errors.windows(2) {
        let ratio = w[0] / w[1];
        assert!((1.5..2.7).contains(&ratio), "errors {errors:?}");
    }
    // scaled error is of the order of the noise level
    assert!(errors[0] * 64.0 < 0.5, "{errors:?}");
}

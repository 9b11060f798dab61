//! Derivative-free minimizers: a Nelder–Mead simplex for the two-parameter
//! contrast and Brent's method for the scalar likelihood.

/// Stopping rules for [`nelder_mead`].
#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    /// Stop once `f_max - f_min ≤ f_tol · |f_min|` across the simplex.
    pub f_tol: f64,
    /// Or once every vertex lies within `x_tol · (1 + |x|)` of the best one.
    pub x_tol: f64,
    pub max_evaluations: usize,
    /// Fresh simplices built around the incumbent after convergence; each
    /// restart guards against a collapsed simplex.
    pub restarts: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            f_tol: 1e-10,
            x_tol: 1e-12,
            max_evaluations: 10_000,
            restarts: 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimplexMinimum<const D: usize> {
    pub x: [f64; D],
    pub value: f64,
    pub evaluations: usize,
    pub iterations: usize,
    /// Best value after each iteration; non-increasing.
    pub trace: Vec<f64>,
    pub converged: bool,
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// Minimizes `f` from `start` with initial edge lengths `steps`.
///
/// Standard coefficients (reflection 1, expansion 2, contraction 1/2,
/// shrink 1/2). NaN values are treated as `+∞`.
pub fn nelder_mead<const D: usize, F>(mut f: F, start: [f64; D], steps: [f64; D], options: SimplexOptions) -> SimplexMinimum<D>
where
    F: FnMut(&[f64; D]) -> f64,
{
    let mut evaluations = 0usize;
    let mut eval = |x: &[f64; D], evaluations: &mut usize| {
        *evaluations += 1;
        sanitize(f(x))
    };

    let mut best_x = start;
    let mut best_f = eval(&start, &mut evaluations);
    let mut trace = Vec::new();
    let mut iterations = 0usize;
    let mut converged = false;

    for round in 0..=options.restarts {
        let scale = 0.5f64.powi(round as i32 * 4);
        let mut simplex: Vec<([f64; D], f64)> = Vec::with_capacity(D + 1);
        simplex.push((best_x, best_f));
        for d in 0..D {
            let mut x = best_x;
            x[d] += steps[d] * scale;
            let fx = eval(&x, &mut evaluations);
            simplex.push((x, fx));
        }
        let round_start = best_f;
        converged = false;

        while evaluations < options.max_evaluations {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let (f_lo, f_hi) = (simplex[0].1, simplex[D].1);
            let spread_ok = f_hi - f_lo <= options.f_tol * f_lo.abs();
            let size_ok = simplex.iter().skip(1).all(|(x, _)| {
                x.iter()
                    .zip(&simplex[0].0)
                    .all(|(a, b)| (a - b).abs() <= options.x_tol * (1.0 + b.abs()))
            });
            if spread_ok || size_ok {
                converged = true;
                break;
            }
            iterations += 1;

            let mut centroid = [0.0; D];
            for (x, _) in &simplex[..D] {
                for d in 0..D {
                    centroid[d] += x[d] / D as f64;
                }
            }
            let worst = simplex[D];
            let along = |t: f64| -> [f64; D] {
                std::array::from_fn(|d| centroid[d] + t * (worst.0[d] - centroid[d]))
            };

            let reflected = along(-1.0);
            let f_r = eval(&reflected, &mut evaluations);
            if f_r < simplex[0].1 {
                let expanded = along(-2.0);
                let f_e = eval(&expanded, &mut evaluations);
                simplex[D] = if f_e < f_r { (expanded, f_e) } else { (reflected, f_r) };
            } else if f_r < simplex[D - 1].1 {
                simplex[D] = (reflected, f_r);
            } else {
                let (contracted, f_c) = if f_r < worst.1 {
                    let x = along(-0.5);
                    let fx = eval(&x, &mut evaluations);
                    (x, fx)
                } else {
                    let x = along(0.5);
                    let fx = eval(&x, &mut evaluations);
                    (x, fx)
                };
                if f_c < worst.1.min(f_r) {
                    simplex[D] = (contracted, f_c);
                } else {
                    let anchor = simplex[0].0;
                    for vertex in simplex.iter_mut().skip(1) {
                        let x: [f64; D] = std::array::from_fn(|d| anchor[d] + 0.5 * (vertex.0[d] - anchor[d]));
                        *vertex = (x, eval(&x, &mut evaluations));
                    }
                }
            }
            let current = simplex.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
            let last = trace.last().copied().unwrap_or(best_f);
            trace.push(current.min(last));
        }

        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if simplex[0].1 <= best_f {
            best_x = simplex[0].0;
            best_f = simplex[0].1;
        }
        let gained = round_start - best_f;
        if round > 0 && gained <= options.f_tol * best_f.abs() {
            break;
        }
        if evaluations >= options.max_evaluations {
            break;
        }
    }

    SimplexMinimum {
        x: best_x,
        value: best_f,
        evaluations,
        iterations,
        trace,
        converged,
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ScalarMinimum {
    pub x: f64,
    pub value: f64,
    pub evaluations: usize,
}

/// Brent's minimization on `[lo, hi]`: golden-section steps safeguarded with
/// parabolic interpolation, stopping when the bracket half-width drops to
/// about `x_tol`.
pub fn brent_minimize<F>(mut f: F, lo: f64, hi: f64, x_tol: f64, max_iterations: usize) -> ScalarMinimum
where
    F: FnMut(f64) -> f64,
{
    const GOLDEN: f64 = 0.381_966_011_250_105_1;
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut x = a + GOLDEN * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = sanitize(f(x));
    let (mut fw, mut fv) = (fx, fx);
    let mut evaluations = 1;
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;

    for _ in 0..max_iterations {
        let mid = 0.5 * (a + b);
        let tol1 = 1e-10 * x.abs() + x_tol / 3.0;
        let tol2 = 2.0 * tol1;
        if (x - mid).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let e_prev = e;
            if p.abs() < (0.5 * q * e_prev).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if mid >= x { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= mid { a - x } else { b - x };
            d = GOLDEN * e;
        }
        let u = if d.abs() >= tol1 {
            x + d
        } else {
            x + tol1.copysign(d)
        };
        let fu = sanitize(f(u));
        evaluations += 1;
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    ScalarMinimum {
        x,
        value: fx,
        evaluations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_finds_rosenbrock_minimum() {
        let rosen = |p: &[f64; 2]| (1.0 - p[0]).powi(2) + 100.0 * (p[1] - p[0] * p[0]).powi(2);
        let res = nelder_mead(rosen, [-1.2, 1.0], [0.1, 0.1], SimplexOptions::default());
        assert!((res.x[0] - 1.0).abs() < 1e-6, "{:?}", res.x);
        assert!((res.x[1] - 1.0).abs() < 1e-6);
        assert!(res.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn simplex_respects_evaluation_budget() {
        let res = nelder_mead(
            |p: &[f64; 2]| p[0].abs() + p[1].abs(),
            [5.0, 5.0],
            [1.0, 1.0],
            SimplexOptions {
                max_evaluations: 30,
                ..SimplexOptions::default()
            },
        );
        assert!(res.evaluations <= 30 + 3);
        assert!(res.value < 10.0);
    }

    #[test]
    fn simplex_treats_nan_as_infinite() {
        let f = |p: &[f64; 2]| if p[0] < 0.0 { f64::NAN } else { (p[0] - 0.5).powi(2) + p[1] * p[1] };
        let res = nelder_mead(f, [0.1, 0.3], [0.2, 0.2], SimplexOptions::default());
        assert!((res.x[0] - 0.5).abs() < 1e-6 && res.x[1].abs() < 1e-6);
    }

    #[test]
    fn brent_quadratic_and_cosine() {
        let res = brent_minimize(|x| (x - 0.3).powi(2) + 1.0, -2.0, 5.0, 1e-10, 200);
        assert!((res.x - 0.3).abs() < 1e-8);
        let res = brent_minimize(f64::cos, 2.0, 4.5, 1e-10, 200);
        assert!((res.x - std::f64::consts::PI).abs() < 1e-8);
    }

    #[test]
    fn brent_monotone_goes_to_edge() {
        let res = brent_minimize(|x| x, 1.0, 2.0, 1e-9, 200);
        assert!(res.x - 1.0 < 1e-7);
    }
}

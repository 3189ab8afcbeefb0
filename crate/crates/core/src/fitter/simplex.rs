//! Bounded Nelder-Mead simplex descent over the unit box.
//!
//! The fitter maps every parameter onto [0, 1] (log- or linear-scaled), so
//! the simplex only ever sees the unit box; candidate points are clamped
//! componentwise. Standard coefficients: reflection 1, expansion 2,
//! contraction 0.5, shrink 0.5.

#[derive(Debug, Clone)]
pub struct SimplexOptions {
    pub max_iters: usize,
    /// Stop when the simplex diameter (infinity norm to the best vertex)
    /// falls below this.
    pub diameter_tol: f64,
    /// Stop when the best objective improved by less than this over the
    /// last `stall_window` iterations.
    pub stall_tol: f64,
    pub stall_window: usize,
    /// Initial per-axis offset used to build the starting simplex.
    pub initial_step: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            max_iters: 2000,
            diameter_tol: 1e-10,
            stall_tol: 1e-12,
            stall_window: 50,
            initial_step: 0.05,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimplexOutcome {
    /// Best point found, inside the unit box.
    pub point: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    /// Whether either tolerance criterion was met before `max_iters`.
    pub converged: bool,
}

fn clamp_unit(x: &mut [f64]) {
    for v in x.iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }
}

/// Minimizes `f` over the unit box starting from `start`. `f` values that
/// are NaN are treated as +inf so infeasible regions repel the simplex.
pub fn minimize_unit_box<F>(f: F, start: &[f64], opts: &SimplexOptions) -> SimplexOutcome
where
    F: Fn(&[f64]) -> f64,
{
    let dim = start.len();
    let eval = |x: &[f64]| -> f64 {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    // Start simplex: the start point plus one vertex per axis, stepping
    // inward when the outward step would leave the box.
    let mut simplex: Vec<(f64, Vec<f64>)> = Vec::with_capacity(dim + 1);
    {
        let mut anchor = start.to_vec();
        clamp_unit(&mut anchor);
        simplex.push((eval(&anchor), anchor.clone()));
        for j in 0..dim {
            let mut v = anchor.clone();
            if v[j] + opts.initial_step <= 1.0 {
                v[j] += opts.initial_step;
            } else {
                v[j] -= opts.initial_step;
            }
            clamp_unit(&mut v);
            simplex.push((eval(&v), v));
        }
    }
    simplex.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut best_history = vec![simplex[0].0];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iters {
        iterations += 1;

        let diameter = simplex[1..]
            .iter()
            .flat_map(|(_, v)| v.iter().zip(&simplex[0].1).map(|(a, b)| (a - b).abs()))
            .fold(0.0f64, f64::max);
        if diameter < opts.diameter_tol {
            converged = true;
            break;
        }
        if best_history.len() > opts.stall_window {
            let prev = best_history[best_history.len() - 1 - opts.stall_window];
            if prev - simplex[0].0 < opts.stall_tol {
                converged = true;
                break;
            }
        }

        let mut centroid = vec![0.0; dim];
        for (_, v) in &simplex[..dim] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x;
            }
        }
        for c in centroid.iter_mut() {
            *c /= dim as f64;
        }

        let worst = simplex[dim].clone();
        let second_worst_val = simplex[dim - 1].0;
        let best_val = simplex[0].0;

        let mut reflection: Vec<f64> = centroid
            .iter()
            .zip(&worst.1)
            .map(|(c, w)| c + (c - w))
            .collect();
        clamp_unit(&mut reflection);
        let f_reflect = eval(&reflection);

        if f_reflect < best_val {
            let mut expansion: Vec<f64> = centroid
                .iter()
                .zip(&reflection)
                .map(|(c, r)| c + 2.0 * (r - c))
                .collect();
            clamp_unit(&mut expansion);
            let f_expand = eval(&expansion);
            if f_expand < f_reflect {
                simplex[dim] = (f_expand, expansion);
            } else {
                simplex[dim] = (f_reflect, reflection);
            }
        } else if f_reflect < second_worst_val {
            simplex[dim] = (f_reflect, reflection);
        } else {
            let contracted = if f_reflect < worst.0 {
                // Outside contraction toward the reflection point.
                let mut p: Vec<f64> = centroid
                    .iter()
                    .zip(&reflection)
                    .map(|(c, r)| c + 0.5 * (r - c))
                    .collect();
                clamp_unit(&mut p);
                let fp = eval(&p);
                (fp <= f_reflect).then_some((fp, p))
            } else {
                // Inside contraction toward the worst point.
                let mut p: Vec<f64> = centroid
                    .iter()
                    .zip(&worst.1)
                    .map(|(c, w)| c + 0.5 * (w - c))
                    .collect();
                clamp_unit(&mut p);
                let fp = eval(&p);
                (fp < worst.0).then_some((fp, p))
            };
            match contracted {
                Some(entry) => simplex[dim] = entry,
                None => {
                    // Shrink everything toward the best vertex.
                    let best_point = simplex[0].1.clone();
                    for (val, v) in simplex.iter_mut().skip(1) {
                        for (x, b) in v.iter_mut().zip(&best_point) {
                            *x = b + 0.5 * (*x - b);
                        }
                        clamp_unit(v);
                        *val = eval(v);
                    }
                }
            }
        }

        simplex.sort_by(|a, b| a.0.total_cmp(&b.0));
        // The best vertex can only improve; a regression here is a defect.
        debug_assert!(simplex[0].0 <= *best_history.last().unwrap() || simplex[0].0.is_nan());
        best_history.push(simplex[0].0);
    }

    SimplexOutcome {
        point: simplex[0].1.clone(),
        value: simplex[0].0,
        iterations,
        converged,
    }
}

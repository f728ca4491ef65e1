//! Derivative-free minimization used by the nested estimator's outer search.
//!
//! Plain Nelder-Mead with the standard reflection/expansion/contraction/
//! shrink coefficients and a hard evaluation budget. The inner objective
//! (weights as a function of the predictor-weighting matrix) is only
//! piecewise smooth, which is why a simplex search is used rather than a
//! gradient method.

/// Minimize `f` starting from `start`, spending at most `budget` evaluations
/// (the initial simplex counts against the budget). Returns the best point
/// and value seen. Fully deterministic: no randomness, ties keep the
/// incumbent.
pub fn nelder_mead<F>(f: &mut F, start: &[f64], step: f64, budget: usize) -> (Vec<f64>, f64)
where
    F: FnMut(&[f64]) -> f64,
{
    let dim = start.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| -> f64 {
        *evals += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    // Initial simplex: the start plus one step along each coordinate.
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    let f0 = eval(start, &mut evals);
    simplex.push((start.to_vec(), f0));
    let mut best = simplex[0].clone();
    for k in 0..dim {
        if evals >= budget {
            break;
        }
        let mut x = start.to_vec();
        x[k] += step;
        let v = eval(&x, &mut evals);
        if v < best.1 {
            best = (x.clone(), v);
        }
        simplex.push((x, v));
    }
    if simplex.len() < dim + 1 {
        return best;
    }

    const ALPHA: f64 = 1.0; // reflection
    const GAMMA: f64 = 2.0; // expansion
    const RHO: f64 = 0.5; // contraction
    const SIGMA: f64 = 0.5; // shrink

    while evals < budget {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        if simplex[0].1 < best.1 {
            best = simplex[0].clone();
        }

        // Centroid of all vertices but the worst.
        let mut centroid = vec![0.0; dim];
        for (x, _) in simplex.iter().take(dim) {
            for k in 0..dim {
                centroid[k] += x[k];
            }
        }
        for c in centroid.iter_mut() {
            *c /= dim as f64;
        }
        let worst = simplex[dim].clone();

        let reflected: Vec<f64> = (0..dim)
            .map(|k| centroid[k] + ALPHA * (centroid[k] - worst.0[k]))
            .collect();
        let fr = eval(&reflected, &mut evals);

        if fr < simplex[0].1 {
            if evals >= budget {
                if fr < best.1 {
                    best = (reflected, fr);
                }
                break;
            }
            let expanded: Vec<f64> = (0..dim)
                .map(|k| centroid[k] + GAMMA * (reflected[k] - centroid[k]))
                .collect();
            let fe = eval(&expanded, &mut evals);
            simplex[dim] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[dim - 1].1 {
            simplex[dim] = (reflected, fr);
        } else {
            if evals >= budget {
                break;
            }
            let contracted: Vec<f64> = (0..dim)
                .map(|k| centroid[k] + RHO * (worst.0[k] - centroid[k]))
                .collect();
            let fc = eval(&contracted, &mut evals);
            if fc < worst.1 {
                simplex[dim] = (contracted, fc);
            } else {
                // Shrink toward the best vertex.
                let anchor = simplex[0].0.clone();
                for v in simplex.iter_mut().skip(1) {
                    for k in 0..dim {
                        v.0[k] = anchor[k] + SIGMA * (v.0[k] - anchor[k]);
                    }
                    if evals >= budget {
                        v.1 = f64::INFINITY;
                        continue;
                    }
                    v.1 = eval(&v.0, &mut evals);
                }
            }
        }
    }

    for (x, v) in &simplex {
        if *v < best.1 {
            best = (x.clone(), *v);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_quadratic_minimum() {
        let mut f = |x: &[f64]| (x[0] - 1.5).powi(2) + 2.0 * (x[1] + 0.5).powi(2);
        let (x, v) = nelder_mead(&mut f, &[0.0, 0.0], 0.5, 400);
        assert!(v < 1e-6, "value {v}");
        assert!((x[0] - 1.5).abs() < 1e-3 && (x[1] + 0.5).abs() < 1e-3);
    }

    #[test]
    fn respects_budget_and_is_deterministic() {
        let mut count = 0usize;
        let mut f = |x: &[f64]| {
            count += 1;
            x.iter().map(|v| v * v).sum::<f64>()
        };
        let (a, va) = nelder_mead(&mut f, &[1.0, 2.0, 3.0], 0.25, 50);
        assert!(count <= 50);
        let mut f2 = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
        let (b, vb) = nelder_mead(&mut f2, &[1.0, 2.0, 3.0], 0.25, 50);
        assert_eq!(a, b);
        assert_eq!(va.to_bits(), vb.to_bits());
    }
}

//! Independent oracles used by the integration tests.
//!
//! Nothing here touches the library's solver path: objectives are evaluated
//! with naive loops, the grid oracle enumerates the simplex directly, and
//! the extended-precision oracle carries its own double-double arithmetic.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Mean squared residual evaluated with plain loops.
pub fn naive_objective(y0: &DVector<f64>, y: &DMatrix<f64>, w: &[f64]) -> f64 {
    let t = y.nrows();
    let j = y.ncols();
    let mut acc = 0.0;
    for r in 0..t {
        let mut fitted = 0.0;
        for c in 0..j {
            fitted += y[(r, c)] * w[c];
        }
        let resid = y0[r] - fitted;
        acc += resid * resid;
    }
    acc / t as f64
}

/// Brute-force minimum of the simplex QP on the grid with spacing `1/n`,
/// refined by pairwise-exchange polish. Supports `J <= 4`.
pub fn grid_oracle(y0: &DVector<f64>, y: &DMatrix<f64>, n: usize) -> (f64, Vec<f64>) {
    let j = y.ncols();
    assert!((1..=4).contains(&j), "grid oracle supports J in 1..=4");

    let mut best_w = vec![0.0; j];
    best_w[0] = 1.0;
    let mut best = naive_objective(y0, y, &best_w);

    let eval_grid = |coords: &[usize]| -> f64 {
        let mut w = vec![0.0; j];
        let mut used = 0usize;
        for (k, &c) in coords.iter().enumerate() {
            w[k] = c as f64 / n as f64;
            used += c;
        }
        w[j - 1] = (n - used) as f64 / n as f64;
        naive_objective(y0, y, &w)
    };

    match j {
        1 => {}
        2 => {
            for i in 0..=n {
                let v = eval_grid(&[i]);
                if v < best {
                    best = v;
                    best_w = vec![i as f64 / n as f64, (n - i) as f64 / n as f64];
                }
            }
        }
        3 => {
            for i in 0..=n {
                for jj in 0..=(n - i) {
                    let v = eval_grid(&[i, jj]);
                    if v < best {
                        best = v;
                        best_w = vec![
                            i as f64 / n as f64,
                            jj as f64 / n as f64,
                            (n - i - jj) as f64 / n as f64,
                        ];
                    }
                }
            }
        }
        4 => {
            // Quadratic-in-k inner loop evaluated by second differences:
            // three exact evaluations seed the recurrence for each (i, jj).
            for i in 0..=n {
                for jj in 0..=(n - i) {
                    let kmax = n - i - jj;
                    let f0 = eval_grid(&[i, jj, 0]);
                    if f0 < best {
                        best = f0;
                        best_w = vec![
                            i as f64 / n as f64,
                            jj as f64 / n as f64,
                            0.0,
                            kmax as f64 / n as f64,
                        ];
                    }
                    if kmax == 0 {
                        continue;
                    }
                    let f1 = eval_grid(&[i, jj, 1]);
                    if f1 < best {
                        best = f1;
                        best_w = vec![
                            i as f64 / n as f64,
                            jj as f64 / n as f64,
                            1.0 / n as f64,
                            (kmax - 1) as f64 / n as f64,
                        ];
                    }
                    if kmax == 1 {
                        continue;
                    }
                    let f2 = eval_grid(&[i, jj, 2]);
                    if f2 < best {
                        best = f2;
                        best_w = vec![
                            i as f64 / n as f64,
                            jj as f64 / n as f64,
                            2.0 / n as f64,
                            (kmax - 2) as f64 / n as f64,
                        ];
                    }
                    let mut delta = f2 - f1;
                    let dd = (f2 - f1) - (f1 - f0);
                    let mut fk = f2;
                    for k in 3..=kmax {
                        delta += dd;
                        fk += delta;
                        if fk < best {
                            // Re-evaluate exactly before accepting: the
                            // recurrence drifts at rounding level.
                            let exact = eval_grid(&[i, jj, k]);
                            if exact < best {
                                best = exact;
                                best_w = vec![
                                    i as f64 / n as f64,
                                    jj as f64 / n as f64,
                                    k as f64 / n as f64,
                                    (kmax - k) as f64 / n as f64,
                                ];
                            }
                        }
                    }
                }
            }
        }
        _ => unreachable!(),
    }

    // Pairwise-exchange polish: optimal mass transfer between coordinate
    // pairs, swept until no improvement.
    let mut w = best_w.clone();
    let mut current = best;
    loop {
        let mut improved = false;
        for a in 0..j {
            for b in 0..j {
                if a == b || w[a] <= 0.0 {
                    continue;
                }
                // Move t from a to b; f(t) is quadratic with
                // f'(0) = g_b - g_a and f''(0) = 2 (Q_aa - 2 Q_ab + Q_bb).
                let (slope, curve) = transfer_derivatives(y0, y, &w, a, b);
                if slope >= 0.0 {
                    continue;
                }
                let t = if curve > 0.0 {
                    (-slope / curve).min(w[a])
                } else {
                    w[a]
                };
                if t <= 0.0 {
                    continue;
                }
                let mut cand = w.clone();
                cand[a] -= t;
                cand[b] += t;
                let v = naive_objective(y0, y, &cand);
                if v < current - 1e-16 {
                    w = cand;
                    current = v;
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    (current, w)
}

/// First and second derivative of the objective along the transfer
/// direction `e_b - e_a` at the current point.
fn transfer_derivatives(
    y0: &DVector<f64>,
    y: &DMatrix<f64>,
    w: &[f64],
    a: usize,
    b: usize,
) -> (f64, f64) {
    let t = y.nrows();
    let mut slope = 0.0;
    let mut curve = 0.0;
    for r in 0..t {
        let mut fitted = 0.0;
        for (c, wc) in w.iter().enumerate() {
            fitted += y[(r, c)] * wc;
        }
        let resid = fitted - y0[r];
        let dir = y[(r, b)] - y[(r, a)];
        slope += 2.0 * resid * dir;
        curve += 2.0 * dir * dir;
    }
    (slope / t as f64, curve / t as f64)
}

/// Frank-Wolfe gap by central finite differences along vertex directions.
/// Central differences are exact for quadratics up to rounding.
pub fn fd_gap(y0: &DVector<f64>, y: &DMatrix<f64>, w: &[f64], h: f64) -> f64 {
    let j = y.ncols();
    let mut gap = f64::NEG_INFINITY;
    for v in 0..j {
        let mut plus = w.to_vec();
        let mut minus = w.to_vec();
        for k in 0..j {
            let dir = if k == v { 1.0 - w[k] } else { -w[k] };
            plus[k] += h * dir;
            minus[k] -= h * dir;
        }
        let dir_deriv =
            (naive_objective(y0, y, &plus) - naive_objective(y0, y, &minus)) / (2.0 * h);
        gap = gap.max(-dir_deriv);
    }
    gap
}

/// Double-double arithmetic (roughly 106-bit significand).
pub mod dd {
    /// Value represented as an unevaluated sum `hi + lo`.
    #[derive(Debug, Clone, Copy, PartialEq)]
    pub struct Dd {
        pub hi: f64,
        pub lo: f64,
    }

    impl Dd {
        pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

        pub fn from_f64(x: f64) -> Dd {
            Dd { hi: x, lo: 0.0 }
        }

        pub fn to_f64(self) -> f64 {
            self.hi + self.lo
        }

        pub fn abs(self) -> Dd {
            if self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0) {
                self.neg()
            } else {
                self
            }
        }

        pub fn neg(self) -> Dd {
            Dd {
                hi: -self.hi,
                lo: -self.lo,
            }
        }
    }

    fn two_sum(a: f64, b: f64) -> (f64, f64) {
        let s = a + b;
        let bb = s - a;
        let err = (a - (s - bb)) + (b - bb);
        (s, err)
    }

    fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
        let s = a + b;
        let err = b - (s - a);
        (s, err)
    }

    fn two_prod(a: f64, b: f64) -> (f64, f64) {
        let p = a * b;
        let err = a.mul_add(b, -p);
        (p, err)
    }

    pub fn add(a: Dd, b: Dd) -> Dd {
        let (s, e) = two_sum(a.hi, b.hi);
        let e = e + a.lo + b.lo;
        let (hi, lo) = quick_two_sum(s, e);
        Dd { hi, lo }
    }

    pub fn sub(a: Dd, b: Dd) -> Dd {
        add(a, b.neg())
    }

    pub fn mul(a: Dd, b: Dd) -> Dd {
        let (p, e) = two_prod(a.hi, b.hi);
        let e = e + a.hi * b.lo + a.lo * b.hi;
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }

    pub fn div(a: Dd, b: Dd) -> Dd {
        let q1 = a.hi / b.hi;
        let r = sub(a, mul(Dd::from_f64(q1), b));
        let q2 = r.hi / b.hi;
        let r = sub(r, mul(Dd::from_f64(q2), b));
        let q3 = r.hi / b.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        add(Dd { hi, lo }, Dd::from_f64(q3))
    }

    pub fn lt(a: Dd, b: Dd) -> bool {
        a.hi < b.hi || (a.hi == b.hi && a.lo < b.lo)
    }
}

/// Normal equations `(Y'Y) w = Y'y0` assembled and solved entirely in
/// double-double precision (Gaussian elimination, partial pivoting).
pub fn normal_equations_dd(y0: &DVector<f64>, y: &DMatrix<f64>) -> Vec<f64> {
    use dd::*;
    let t = y.nrows();
    let j = y.ncols();

    let mut a = vec![vec![Dd::ZERO; j + 1]; j];
    for r in 0..j {
        for c in 0..j {
            let mut acc = Dd::ZERO;
            for k in 0..t {
                acc = add(acc, mul(Dd::from_f64(y[(k, r)]), Dd::from_f64(y[(k, c)])));
            }
            a[r][c] = acc;
        }
        let mut acc = Dd::ZERO;
        for k in 0..t {
            acc = add(acc, mul(Dd::from_f64(y[(k, r)]), Dd::from_f64(y0[k])));
        }
        a[r][j] = acc;
    }

    for col in 0..j {
        let mut pivot = col;
        for r in (col + 1)..j {
            if lt(a[pivot][col].abs(), a[r][col].abs()) {
                pivot = r;
            }
        }
        a.swap(col, pivot);
        for r in (col + 1)..j {
            let factor = div(a[r][col], a[col][col]);
            for c in col..=j {
                let delta = mul(factor, a[col][c]);
                a[r][c] = sub(a[r][c], delta);
            }
        }
    }

    let mut w = vec![Dd::ZERO; j];
    for r in (0..j).rev() {
        let mut acc = a[r][j];
        for c in (r + 1)..j {
            acc = sub(acc, mul(a[r][c], w[c]));
        }
        w[r] = div(acc, a[r][r]);
    }
    w.into_iter().map(|x| x.to_f64()).collect()
}

/// Deterministic standard-normal test matrices.
pub fn random_instance(seed: u64, t: usize, j: usize) -> (DVector<f64>, DMatrix<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y = DMatrix::from_fn(t, j, |_, _| rng.sample::<f64, _>(StandardNormal));
    let y0 = DVector::from_fn(t, |_, _| rng.sample::<f64, _>(StandardNormal));
    (y0, y)
}

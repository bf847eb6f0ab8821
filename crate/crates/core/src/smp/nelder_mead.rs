//! Bounded-budget Nelder–Mead simplex search.
//!
//! Uses the dimension-adaptive coefficients of Gao and Han, which keep the
//! simplex from collapsing prematurely in a few dozen dimensions, and
//! rebuilds the simplex around the incumbent whenever it degenerates.

#[derive(Clone, Debug)]
pub struct SimplexOptions {
    /// Hard cap on objective evaluations.
    pub max_evals: usize,
    /// Stop as soon as the objective reaches this value.
    pub f_target: f64,
    /// Spread of objective values across the simplex treated as collapsed.
    pub f_tol: f64,
    /// Initial edge length along each coordinate.
    pub initial_step: f64,
    /// Smallest edge length a rebuilt simplex may use before giving up.
    pub min_step: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self { max_evals: 10_000, f_target: f64::NEG_INFINITY, f_tol: 1e-12, initial_step: 0.5, min_step: 1e-6 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimplexMinimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    pub reached_target: bool,
}

struct Counted<'a, F> {
    f: &'a mut F,
    evals: usize,
    max: usize,
}

impl<F: FnMut(&[f64]) -> f64> Counted<'_, F> {
    fn call(&mut self, x: &[f64]) -> f64 {
        if self.evals >= self.max {
            return f64::INFINITY;
        }
        self.evals += 1;
        let v = (self.f)(x);
        // NaN must never win a comparison
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }
}

pub fn minimize<F>(mut f: F, x0: &[f64], opts: &SimplexOptions) -> SimplexMinimum
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let nf = n.max(1) as f64;
    let (alpha, gamma, rho, sigma) = if n > 2 {
        (1.0, 1.0 + 2.0 / nf, 0.75 - 1.0 / (2.0 * nf), 1.0 - 1.0 / nf)
    } else {
        (1.0, 2.0, 0.5, 0.5)
    };

    let mut obj = Counted { f: &mut f, evals: 0, max: opts.max_evals };
    let mut best_x = x0.to_vec();
    let mut best_f = obj.call(&best_x);
    let mut step = opts.initial_step;

    'outer: while obj.evals < opts.max_evals && best_f > opts.f_target && step >= opts.min_step {
        let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
        let mut vals: Vec<f64> = Vec::with_capacity(n + 1);
        pts.push(best_x.clone());
        vals.push(best_f);
        for i in 0..n {
            if obj.evals >= opts.max_evals {
                break 'outer;
            }
            let mut p = best_x.clone();
            p[i] += step;
            vals.push(obj.call(&p));
            pts.push(p);
        }
        let start_f = best_f;

        loop {
            let mut order: Vec<usize> = (0..=n).collect();
            order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
            pts = order.iter().map(|&i| std::mem::take(&mut pts[i])).collect();
            vals = order.iter().map(|&i| vals[i]).collect();

            if vals[0] < best_f {
                best_f = vals[0];
                best_x.clone_from(&pts[0]);
            }
            if best_f <= opts.f_target || obj.evals >= opts.max_evals {
                break 'outer;
            }
            if vals[n] - vals[0] <= opts.f_tol {
                break;
            }

            let mut centroid = vec![0.0; n];
            for p in &pts[..n] {
                for (c, v) in centroid.iter_mut().zip(p) {
                    *c += v / nf;
                }
            }
            let toward = |t: f64, from: &[f64]| -> Vec<f64> {
                centroid.iter().zip(from).map(|(c, w)| c + t * (w - c)).collect()
            };

            let xr = toward(-alpha, &pts[n]);
            let fr = obj.call(&xr);
            if fr < vals[0] {
                let xe = toward(-alpha * gamma, &pts[n]);
                let fe = obj.call(&xe);
                if fe < fr {
                    pts[n] = xe;
                    vals[n] = fe;
                } else {
                    pts[n] = xr;
                    vals[n] = fr;
                }
                continue;
            }
            if fr < vals[n - 1] {
                pts[n] = xr;
                vals[n] = fr;
                continue;
            }
            let (xc, fc, accept) = if fr < vals[n] {
                let xc = toward(-alpha * rho, &pts[n]);
                let fc = obj.call(&xc);
                (xc, fc, fc <= fr)
            } else {
                let xc = toward(rho, &pts[n]);
                let fc = obj.call(&xc);
                (xc, fc, fc < vals[n])
            };
            if accept {
                pts[n] = xc;
                vals[n] = fc;
                continue;
            }
            let anchor = pts[0].clone();
            for i in 1..=n {
                if obj.evals >= opts.max_evals {
                    break;
                }
                let shrunk: Vec<f64> = anchor.iter().zip(&pts[i]).map(|(a, p)| a + sigma * (p - a)).collect();
                vals[i] = obj.call(&shrunk);
                pts[i] = shrunk;
            }
        }

        // a rebuilt simplex that bought nothing gets a smaller edge next time
        if best_f >= start_f - opts.f_tol {
            step *= 0.5;
        }
    }

    SimplexMinimum { reached_target: best_f <= opts.f_target, x: best_x, f: best_f, evals: obj.evals }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> f64 {
        x.windows(2).map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2)).sum()
    }

    #[test]
    fn finds_quadratic_minimum() {
        let f = |x: &[f64]| x.iter().enumerate().map(|(i, v)| (v - i as f64).powi(2)).sum::<f64>();
        let m = minimize(f, &[5.0; 6], &SimplexOptions { max_evals: 20_000, ..Default::default() });
        for (i, v) in m.x.iter().enumerate() {
            assert!((v - i as f64).abs() < 1e-4, "{:?}", m.x);
        }
    }

    #[test]
    fn solves_rosenbrock() {
        let m = minimize(rosenbrock, &[-1.2, 1.0], &SimplexOptions { max_evals: 5_000, ..Default::default() });
        assert!(m.f < 1e-8, "{}", m.f);
    }

    #[test]
    fn respects_budget_and_target() {
        let mut calls = 0;
        let m = minimize(
            |x: &[f64]| {
                calls += 1;
                rosenbrock(x)
            },
            &[-1.2, 1.0, 0.3, 2.0],
            &SimplexOptions { max_evals: 57, ..Default::default() },
        );
        assert_eq!(m.evals, 57);
        assert_eq!(m.evals, calls);

        let m = minimize(|x: &[f64]| x[0] * x[0], &[3.0], &SimplexOptions { f_target: 0.5, ..Default::default() });
        assert!(m.reached_target);
        assert!(m.f <= 0.5);
    }

    #[test]
    fn nan_objective_is_never_preferred() {
        let f = |x: &[f64]| if x[0] > 1.0 { f64::NAN } else { (x[0] - 1.0).powi(2) + x[1] * x[1] };
        let m = minimize(f, &[0.0, 0.5], &SimplexOptions::default());
        assert!(m.f.is_finite());
        assert!(m.x[0] <= 1.0);
    }

    #[test]
    fn deterministic() {
        let a = minimize(rosenbrock, &[0.1, 0.2, 0.3], &SimplexOptions { max_evals: 999, ..Default::default() });
        let b = minimize(rosenbrock, &[0.1, 0.2, 0.3], &SimplexOptions { max_evals: 999, ..Default::default() });
        assert_eq!(a, b);
    }
}

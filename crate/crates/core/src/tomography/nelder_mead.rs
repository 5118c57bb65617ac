//! Nelder-Mead simplex minimization with dimension-adaptive coefficients
//! (reflection 1, expansion 1 + 2/n, contraction 3/4 − 1/(2n),
//! shrink 1 − 1/n).

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMead {
    /// Evaluation budget across all simplex restarts.
    pub max_evals: usize,
    /// A simplex run ends when `f_worst − f_best ≤ rel_tol·|f_best| + abs_tol`.
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Initial edge length relative to the largest coordinate of the start.
    pub initial_step: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        NelderMead {
            max_evals: 100_000,
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            initial_step: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Best objective value after each iteration.
    pub history: Vec<f64>,
}

impl NelderMead {
    /// Minimizes `f` from `x0`.
    ///
    /// The simplex is rebuilt around the incumbent each time it collapses,
    /// and the search stops once a rebuilt simplex improves the objective by
    /// less than the tolerance (or the evaluation budget is spent).
    pub fn minimize(&self, mut f: impl FnMut(&[f64]) -> f64, x0: &[f64]) -> Minimum {
        let n = x0.len();
        assert!(n >= 1, "empty parameter vector");
        let mut evals = 0usize;
        let mut eval = |x: &[f64], evals: &mut usize| {
            *evals += 1;
            let v = f(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };

        let mut best_x = x0.to_vec();
        let mut best_f = eval(x0, &mut evals);
        let mut history = vec![best_f];
        let mut iterations = 0usize;
        let mut converged = false;
        let mut step_scale = self.initial_step;

        while evals < self.max_evals {
            let before = best_f;
            let run = self.run_simplex(&mut eval, &mut evals, &best_x, best_f, step_scale);
            iterations += run.iterations;
            for v in run.history {
                let last = *history.last().unwrap();
                history.push(v.min(last));
            }
            if run.f < best_f {
                best_f = run.f;
                best_x = run.x;
            }
            if !run.converged {
                break;
            }
            if before - best_f <= self.rel_tol * best_f.abs() + self.abs_tol {
                converged = true;
                break;
            }
            step_scale = (step_scale * 0.5).max(self.initial_step * 1e-3);
        }

        Minimum {
            x: best_x,
            f: best_f,
            iterations,
            evaluations: evals,
            converged,
            history,
        }
    }

    fn run_simplex(
        &self,
        eval: &mut impl FnMut(&[f64], &mut usize) -> f64,
        evals: &mut usize,
        x0: &[f64],
        f0: f64,
        step_scale: f64,
    ) -> Minimum {
        let n = x0.len();
        let nf = n as f64;
        let (alpha, gamma, rho, sigma) =
            (1.0, 1.0 + 2.0 / nf, 0.75 - 1.0 / (2.0 * nf), 1.0 - 1.0 / nf);

        let scale = x0.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-3);
        let step = step_scale * scale;
        let mut points: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
        let mut values: Vec<f64> = Vec::with_capacity(n + 1);
        points.push(x0.to_vec());
        values.push(f0);
        for i in 0..n {
            let mut p = x0.to_vec();
            p[i] += step;
            values.push(eval(&p, evals));
            points.push(p);
        }

        let mut history = Vec::new();
        let mut iterations = 0;
        let mut converged = false;
        let mut order: Vec<usize> = (0..=n).collect();
        let mut centroid = vec![0.0; n];
        let mut trial = vec![0.0; n];
        let mut trial2 = vec![0.0; n];

        while *evals < self.max_evals {
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            let best = order[0];
            let worst = order[n];
            let second_worst = order[n - 1];
            let (f_best, f_worst) = (values[best], values[worst]);
            if f_worst - f_best <= self.rel_tol * f_best.abs() + self.abs_tol {
                converged = true;
                break;
            }
            let diameter = points
                .iter()
                .map(|p| {
                    p.iter()
                        .zip(&points[best])
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max)
                })
                .fold(0.0, f64::max);
            if diameter <= 1e-15 * scale {
                converged = true;
                break;
            }
            iterations += 1;

            centroid.iter_mut().for_each(|c| *c = 0.0);
            for &idx in &order[..n] {
                for (c, v) in centroid.iter_mut().zip(&points[idx]) {
                    *c += v;
                }
            }
            centroid.iter_mut().for_each(|c| *c /= nf);

            let along = |coef: f64, out: &mut Vec<f64>, worst_pt: &[f64], centroid: &[f64]| {
                for ((o, c), w) in out.iter_mut().zip(centroid).zip(worst_pt) {
                    *o = c + coef * (c - w);
                }
            };

            along(alpha, &mut trial, &points[worst], &centroid);
            let f_reflect = eval(&trial, evals);

            if f_reflect < f_best {
                along(alpha * gamma, &mut trial2, &points[worst], &centroid);
                let f_expand = eval(&trial2, evals);
                if f_expand < f_reflect {
                    points[worst].copy_from_slice(&trial2);
                    values[worst] = f_expand;
                } else {
                    points[worst].copy_from_slice(&trial);
                    values[worst] = f_reflect;
                }
            } else if f_reflect < values[second_worst] {
                points[worst].copy_from_slice(&trial);
                values[worst] = f_reflect;
            } else {
                let outside = f_reflect < f_worst;
                let coef = if outside { alpha * rho } else { -rho };
                along(coef, &mut trial2, &points[worst], &centroid);
                let f_contract = eval(&trial2, evals);
                let accept = if outside {
                    f_contract <= f_reflect
                } else {
                    f_contract < f_worst
                };
                if accept {
                    points[worst].copy_from_slice(&trial2);
                    values[worst] = f_contract;
                } else {
                    let anchor = points[best].clone();
                    for &idx in &order[1..] {
                        for (p, a) in points[idx].iter_mut().zip(&anchor) {
                            *p = a + sigma * (*p - a);
                        }
                        values[idx] = eval(&points[idx], evals);
                    }
                }
            }
            history.push(values.iter().copied().fold(f64::INFINITY, f64::min));
        }

        let best = (0..=n)
            .min_by(|&a, &b| values[a].total_cmp(&values[b]))
            .expect("non-empty simplex");
        Minimum {
            x: points[best].clone(),
            f: values[best],
            iterations,
            evaluations: *evals,
            converged,
            history,
        }
    }
}

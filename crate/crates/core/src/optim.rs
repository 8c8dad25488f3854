//! Nelder–Mead simplex minimization.

/// Result of one simplex run.
#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMead {
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    pub max_iterations: usize,
    /// Stop when `f(worst) - f(best)` drops below this.
    pub value_tolerance: f64,
    /// Side length of the axis-aligned starting simplex.
    pub initial_step: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
            max_iterations: 500,
            value_tolerance: 1e-8,
            initial_step: 0.5,
        }
    }
}

impl NelderMead {
    /// Minimizes `f` from `start`. Non-finite function values are treated
    /// as `+inf`, so the simplex steps away from them.
    pub fn minimize<F>(&self, mut f: F, start: &[f64]) -> Minimum
    where
        F: FnMut(&[f64]) -> f64,
    {
        let n = start.len();
        let mut eval = |x: &[f64]| {
            let v = f(x);
            if v.is_finite() {
                v
            } else {
                f64::INFINITY
            }
        };
        let mut simplex: Vec<(f64, Vec<f64>)> = Vec::with_capacity(n + 1);
        simplex.push((eval(start), start.to_vec()));
        for i in 0..n {
            let mut p = start.to_vec();
            p[i] += self.initial_step;
            simplex.push((eval(&p), p));
        }

        let mut iterations = 0;
        let mut converged = false;
        while iterations < self.max_iterations {
            simplex.sort_by(|a, b| a.0.total_cmp(&b.0));
            let best = simplex[0].0;
            let worst = simplex[n].0;
            if best.is_finite() && worst - best <= self.value_tolerance {
                converged = true;
                break;
            }
            iterations += 1;

            let mut centroid = vec![0.0; n];
            for (_, p) in &simplex[..n] {
                for (c, v) in centroid.iter_mut().zip(p) {
                    *c += v / n as f64;
                }
            }
            let along = |t: f64, from: &[f64]| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(from)
                    .map(|(c, w)| c + t * (c - w))
                    .collect()
            };
            let worst_p = simplex[n].1.clone();
            let second = simplex[n - 1].0;

            let xr = along(self.reflection, &worst_p);
            let fr = eval(&xr);
            if fr < best {
                let xe = along(self.reflection * self.expansion, &worst_p);
                let fe = eval(&xe);
                simplex[n] = if fe < fr { (fe, xe) } else { (fr, xr) };
                continue;
            }
            if fr < second {
                simplex[n] = (fr, xr);
                continue;
            }
            let (xc, fc) = if fr < worst {
                let xc = along(self.reflection * self.contraction, &worst_p);
                let fc = eval(&xc);
                (xc, fc)
            } else {
                let xc = along(-self.contraction, &worst_p);
                let fc = eval(&xc);
                (xc, fc)
            };
            if fc < fr.min(worst) {
                simplex[n] = (fc, xc);
                continue;
            }
            let anchor = simplex[0].1.clone();
            for (fv, p) in simplex.iter_mut().skip(1) {
                for (v, a) in p.iter_mut().zip(&anchor) {
                    *v = a + self.shrink * (*v - a);
                }
                *fv = eval(p);
            }
        }
        simplex.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (value, x) = simplex.swap_remove(0);
        Minimum {
            x,
            value,
            iterations,
            converged,
        }
    }
}

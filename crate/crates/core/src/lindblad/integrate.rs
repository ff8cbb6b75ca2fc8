//! Adaptive Dormand–Prince 5(4) integrator for complex linear systems.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

type State = DVector<Complex64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on a single step.
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-12,
            max_step: 10.0,
            max_steps: 50_000_000,
        }
    }
}

// Butcher tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Difference between the 5th- and 4th-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Stateful stepper; keeps the step size and FSAL derivative between calls
/// to [`Dopri5::advance`].
pub struct Dopri5<F> {
    rhs: F,
    opts: IntegratorOptions,
    h: Option<f64>,
    k: [State; 7],
    tmp: State,
    err: State,
    steps: usize,
    /// Derivative at the current point, valid while the RHS is unchanged.
    fsal: Option<f64>,
}

fn axpy(out: &mut State, y: &State, h: f64, terms: &[(f64, &State)]) {
    out.copy_from(y);
    for &(c, k) in terms {
        if c != 0.0 {
            out.axpy(Complex64::new(h * c, 0.0), k, Complex64::new(1.0, 0.0));
        }
    }
}

impl<F> Dopri5<F>
where
    F: FnMut(f64, &State, &mut State),
{
    pub fn new(rhs: F, dim: usize, opts: IntegratorOptions) -> Self {
        let z = || DVector::from_element(dim, Complex64::new(0.0, 0.0));
        Self {
            rhs,
            opts,
            h: None,
            k: [z(), z(), z(), z(), z(), z(), z()],
            tmp: z(),
            err: z(),
            steps: 0,
            fsal: None,
        }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    fn error_norm(&self, y: &State, y_new: &State) -> f64 {
        let n = y.len().max(1) as f64;
        let sum: f64 = (0..y.len())
            .map(|i| {
                let scale = self.opts.atol + self.opts.rtol * y[i].norm().max(y_new[i].norm());
                (self.err[i].norm() / scale).powi(2)
            })
            .sum();
        (sum / n).sqrt()
    }

    fn initial_step(&self, y: &State) -> f64 {
        let f0 = &self.k[0];
        let d0 = y.norm() / (y.len() as f64).sqrt();
        let d1 = f0.norm() / (y.len() as f64).sqrt();
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h0.min(self.opts.max_step)
    }

    /// Integrate `y` from `t` to exactly `t_end`.
    pub fn advance(&mut self, t: &mut f64, y: &mut State, t_end: f64) -> Result<()> {
        if t_end < *t {
            return Err(Error::InvalidGrid(format!("cannot integrate backwards from {t} to {t_end}")));
        }
        if self.fsal != Some(*t) {
            (self.rhs)(*t, y, &mut self.k[0]);
            self.fsal = Some(*t);
        }
        let mut h = match self.h {
            Some(h) => h,
            None => self.initial_step(y),
        };
        let mut y_new = y.clone();
        while *t < t_end {
            if self.steps >= self.opts.max_steps {
                return Err(Error::TooManySteps { t: *t });
            }
            let remaining = t_end - *t;
            let last = h >= remaining;
            let step = if last { remaining } else { h };
            let h_min = 1e-14 * t.abs().max(1.0);
            if step < h_min && !last {
                return Err(Error::StepUnderflow { t: *t, h: step });
            }
            let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
            axpy(&mut self.tmp, y, step, &[(A21, k1)]);
            (self.rhs)(*t + C2 * step, &self.tmp, k2);
            axpy(&mut self.tmp, y, step, &[(A31, k1), (A32, k2)]);
            (self.rhs)(*t + C3 * step, &self.tmp, k3);
            axpy(&mut self.tmp, y, step, &[(A41, k1), (A42, k2), (A43, k3)]);
            (self.rhs)(*t + C4 * step, &self.tmp, k4);
            axpy(&mut self.tmp, y, step, &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)]);
            (self.rhs)(*t + C5 * step, &self.tmp, k5);
            axpy(&mut self.tmp, y, step, &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)]);
            (self.rhs)(*t + step, &self.tmp, k6);
            axpy(&mut y_new, y, step, &[(B1, k1), (B3, k3), (B4, k4), (B5, k5), (B6, k6)]);
            (self.rhs)(*t + step, &y_new, k7);
            self.err.fill(Complex64::new(0.0, 0.0));
            for (c, k) in [(E1, &*k1), (E3, &*k3), (E4, &*k4), (E5, &*k5), (E6, &*k6), (E7, &*k7)] {
                self.err.axpy(Complex64::new(step * c, 0.0), k, Complex64::new(1.0, 0.0));
            }
            let en = self.error_norm(y, &y_new);
            self.steps += 1;

            let factor = if en == 0.0 { 5.0 } else { (0.9 * en.powf(-0.2)).clamp(0.2, 5.0) };
            if en <= 1.0 {
                *t = if last { t_end } else { *t + step };
                y.copy_from(&y_new);
                self.k.swap(0, 6);
                self.fsal = Some(*t);
                // A clipped final step says nothing about the natural step size.
                if !last || factor < 1.0 {
                    h = (step * factor).min(self.opts.max_step);
                }
            } else {
                h = step * factor.min(1.0);
                if h < h_min {
                    return Err(Error::StepUnderflow { t: *t, h });
                }
            }
        }
        self.h = Some(h);
        Ok(())
    }

    /// Forget the cached derivative; call after the right-hand side changes
    /// behaviour (e.g. a drive switch-off at the current time).
    pub fn invalidate(&mut self) {
        self.fsal = None;
    }
}

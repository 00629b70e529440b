//! Adaptive Dormand–Prince 5(4) integrator for real state vectors.
//!
//! Complex systems are integrated by interleaving real and imaginary parts.

use crate::error::{Error, Result};

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
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// error coefficients: 5th-order minus embedded 4th-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Debug, Clone, Copy)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Self { rtol: 1e-9, atol: 1e-12, max_steps: 5_000_000 }
    }
}

/// Step-size memory carried between successive calls on adjacent intervals.
#[derive(Debug, Clone, Copy, Default)]
pub struct StepState {
    pub h: f64,
    pub accepted: usize,
    pub rejected: usize,
}

impl Dopri5 {
    pub fn with_tolerance(rtol: f64) -> Self {
        Self { rtol, atol: rtol * 1e-3, ..Self::default() }
    }

    /// Advances `y` from `t0` to `t1`, landing exactly on `t1`.
    pub fn integrate<F>(
        &self,
        mut f: F,
        t0: f64,
        t1: f64,
        y: &mut [f64],
        state: &mut StepState,
    ) -> Result<()>
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let n = y.len();
        let span = t1 - t0;
        if span == 0.0 {
            return Ok(());
        }
        let dir = span.signum();
        let mut k = vec![vec![0.0; n]; 7];
        let mut tmp = vec![0.0; n];
        let mut y_new = vec![0.0; n];

        let mut t = t0;
        let mut h = if state.h > 0.0 { state.h.min(span.abs()) } else { span.abs() * 1e-2 };
        let h_floor = 1e-13 * t0.abs().max(t1.abs()).max(span.abs());
        f(t, y, &mut k[0]);

        let mut steps = 0usize;
        while (t1 - t) * dir > 0.0 {
            steps += 1;
            if steps > self.max_steps {
                return Err(Error::Convergence(format!(
                    "integrator exceeded {} steps at t = {t:e}",
                    self.max_steps
                )));
            }
            let remaining = (t1 - t).abs();
            let last = h >= remaining;
            let hs = if last { remaining } else { h } * dir;

            for i in 0..n {
                tmp[i] = y[i] + hs * A21 * k[0][i];
            }
            f(t + C2 * hs, &tmp, &mut k[1]);
            for i in 0..n {
                tmp[i] = y[i] + hs * (A31 * k[0][i] + A32 * k[1][i]);
            }
            f(t + C3 * hs, &tmp, &mut k[2]);
            for i in 0..n {
                tmp[i] = y[i] + hs * (A41 * k[0][i] + A42 * k[1][i] + A43 * k[2][i]);
            }
            f(t + C4 * hs, &tmp, &mut k[3]);
            for i in 0..n {
                tmp[i] = y[i]
                    + hs * (A51 * k[0][i] + A52 * k[1][i] + A53 * k[2][i] + A54 * k[3][i]);
            }
            f(t + C5 * hs, &tmp, &mut k[4]);
            for i in 0..n {
                tmp[i] = y[i]
                    + hs * (A61 * k[0][i]
                        + A62 * k[1][i]
                        + A63 * k[2][i]
                        + A64 * k[3][i]
                        + A65 * k[4][i]);
            }
            f(t + hs, &tmp, &mut k[5]);
            for i in 0..n {
                y_new[i] = y[i]
                    + hs * (A71 * k[0][i]
                        + A73 * k[2][i]
                        + A74 * k[3][i]
                        + A75 * k[4][i]
                        + A76 * k[5][i]);
            }
            f(t + hs, &y_new, &mut k[6]);

            let mut err = 0.0;
            for i in 0..n {
                let e = hs
                    * (E1 * k[0][i]
                        + E3 * k[2][i]
                        + E4 * k[3][i]
                        + E5 * k[4][i]
                        + E6 * k[5][i]
                        + E7 * k[6][i]);
                let sc = self.atol + self.rtol * y[i].abs().max(y_new[i].abs());
                err += (e / sc).powi(2);
            }
            let err = (err / n as f64).sqrt();

            if err <= 1.0 {
                t = if last { t1 } else { t + hs };
                y.copy_from_slice(&y_new);
                k.swap(0, 6);
                state.accepted += 1;
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !last {
                    h *= fac;
                } else {
                    // keep the untruncated step proposal for the next interval
                    h = h.max(remaining * fac);
                }
            } else {
                state.rejected += 1;
                let fac = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.1, 1.0) } else { 0.1 };
                h = hs.abs() * fac;
                if h < h_floor {
                    return Err(Error::Stiffness { t });
                }
            }
        }
        state.h = h;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_to_tolerance() {
        let ode = Dopri5::with_tolerance(1e-10);
        let mut y = [1.0];
        let mut st = StepState::default();
        ode.integrate(|_, y, dy| dy[0] = -2.0 * y[0], 0.0, 3.0, &mut y, &mut st).unwrap();
        assert!((y[0] - (-6.0f64).exp()).abs() < 1e-11);
    }

    #[test]
    fn harmonic_oscillator_over_many_periods() {
        let ode = Dopri5::with_tolerance(1e-10);
        let mut y = [1.0, 0.0];
        let mut st = StepState::default();
        let t1 = 20.0 * std::f64::consts::PI;
        ode.integrate(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            0.0,
            t1,
            &mut y,
            &mut st,
        )
        .unwrap();
        assert!((y[0] - 1.0).abs() < 1e-8);
        assert!(y[1].abs() < 1e-8);
    }

    #[test]
    fn chained_intervals_match_single_call() {
        let ode = Dopri5::with_tolerance(1e-10);
        let rhs = |t: f64, y: &[f64], dy: &mut [f64]| dy[0] = t.cos() * y[0];
        let mut a = [1.0];
        let mut st = StepState::default();
        ode.integrate(rhs, 0.0, 4.0, &mut a, &mut st).unwrap();
        let mut b = [1.0];
        let mut st = StepState::default();
        for i in 0..40 {
            let t0 = i as f64 * 0.1;
            ode.integrate(rhs, t0, t0 + 0.1, &mut b, &mut st).unwrap();
        }
        let exact = 4f64.sin().exp();
        assert!((a[0] - exact).abs() < 1e-8);
        assert!((b[0] - exact).abs() < 1e-8);
    }
}

//! Adaptive Dormand-Prince 5(4) integration for first-order systems with a
//! runtime state size.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Step-size control settings.
#[derive(Debug, Clone, Copy)]
pub struct OdeOptions<T> {
    pub atol: T,
    pub rtol: T,
    pub h_init: Option<T>,
    pub h_max: Option<T>,
    /// Smallest admissible step, relative to the integration interval.
    pub h_min_rel: T,
    pub max_steps: usize,
}

impl<T: Real> OdeOptions<T> {
    pub fn new(tol: T) -> Self {
        OdeOptions { atol: tol, rtol: tol, h_init: None, h_max: None, h_min_rel: T::lit(1e-13), max_steps: 200_000 }
    }

    pub fn with_max_step(mut self, h: T) -> Self {
        self.h_max = Some(h);
        self
    }
}

/// What the per-step hook wants the integrator to do next.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepControl {
    Continue,
    /// The hook altered the state in place; its derivative is recomputed.
    Modified,
    /// Discard the step and retry with half the step size.
    Reject,
    Stop,
}

/// Accepted nodes with states and derivatives, enough for Hermite dense output.
#[derive(Debug, Clone)]
pub struct Trajectory<T> {
    pub ts: Vec<T>,
    pub ys: Vec<Vec<T>>,
    pub dys: Vec<Vec<T>>,
    pub stopped_early: bool,
    pub rejected: usize,
}

impl<T: Real> Trajectory<T> {
    pub fn last_state(&self) -> &[T] {
        self.ys.last().expect("trajectory has a start node")
    }

    /// Cubic Hermite interpolation of the state at `t`.
    pub fn interpolate(&self, t: T) -> Vec<T> {
        let n = self.ts.len();
        if n == 1 {
            return self.ys[0].clone();
        }
        let t = t.max(self.ts[0]).min(self.ts[n - 1]);
        let i = match self.ts.binary_search_by(|s| s.partial_cmp(&t).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        };
        hermite(self.ts[i], &self.ys[i], &self.dys[i], self.ts[i + 1], &self.ys[i + 1], &self.dys[i + 1], t)
    }
}

/// Cubic Hermite interpolant through `(t0, y0, d0)` and `(t1, y1, d1)`.
pub fn hermite<T: Real>(t0: T, y0: &[T], d0: &[T], t1: T, y1: &[T], d1: &[T], t: T) -> Vec<T> {
    let h = t1 - t0;
    let u = (t - t0) / h;
    let (two, three) = (T::lit(2.0), T::lit(3.0));
    let u2 = u * u;
    let u3 = u2 * u;
    let h00 = two * u3 - three * u2 + T::one();
    let h10 = u3 - two * u2 + u;
    let h01 = three * u2 - two * u3;
    let h11 = u3 - u2;
    (0..y0.len())
        .map(|k| h00 * y0[k] + h10 * h * d0[k] + h01 * y1[k] + h11 * h * d1[k])
        .collect()
}

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
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn combo<T: Real>(y: &[T], h: T, terms: &[(f64, &[T])], out: &mut [T]) {
    for k in 0..y.len() {
        let mut s = T::zero();
        for (c, v) in terms {
            s = s + T::lit(*c) * v[k];
        }
        out[k] = y[k] + h * s;
    }
}

/// Integrates `y' = rhs(t, y)` from `t0` to `t1` (`t1 > t0`).
///
/// `hook` runs on every step that passes the error test and may project the
/// state, reject the step or stop the integration. A failing right-hand side counts as a rejected step. Step-size
/// underflow or exhausting `max_steps` yields [`Error::IntegrationFailure`]
/// carrying the accepted states.
pub fn dormand_prince<T: Real>(
    rhs: &mut dyn FnMut(T, &[T], &mut [T]) -> std::result::Result<(), String>,
    t0: T,
    t1: T,
    y0: &[T],
    opts: &OdeOptions<T>,
    hook: &mut dyn FnMut(T, &mut Vec<T>) -> StepControl,
) -> Result<Trajectory<T>> {
    let n = y0.len();
    let span = t1 - t0;
    let failure = |traj: &Trajectory<T>, reason: String| Error::IntegrationFailure {
        steps: traj.ts.len() - 1,
        reason,
        partial: traj.ys.iter().map(|y| y.iter().map(|v| v.to_f64_lossy()).collect()).collect(),
    };
    let mut k1 = vec![T::zero(); n];
    rhs(t0, y0, &mut k1).map_err(|r| Error::IntegrationFailure { steps: 0, reason: r, partial: vec![] })?;
    let mut traj = Trajectory {
        ts: vec![t0],
        ys: vec![y0.to_vec()],
        dys: vec![k1.clone()],
        stopped_early: false,
        rejected: 0,
    };
    let h_max = opts.h_max.unwrap_or(span).min(span);
    let h_min = opts.h_min_rel * span;
    let mut h = opts.h_init.unwrap_or(span * T::lit(1e-2)).min(h_max);
    let mut t = t0;
    let mut y = y0.to_vec();
    let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) =
        (vec![T::zero(); n], vec![T::zero(); n], vec![T::zero(); n], vec![T::zero(); n], vec![T::zero(); n], vec![T::zero(); n]);
    let mut tmp = vec![T::zero(); n];
    let mut y_new = vec![T::zero(); n];
    let fifth = T::lit(0.2);
    let mut steps = 0usize;

    while t < t1 {
        if steps >= opts.max_steps {
            return Err(failure(&traj, format!("exceeded {} steps", opts.max_steps)));
        }
        steps += 1;
        let last = t + h >= t1;
        if last {
            h = t1 - t;
        }
        let stages = (|| -> std::result::Result<(), String> {
            combo(&y, h, &[(A21, &k1)], &mut tmp);
            rhs(t + T::lit(C2) * h, &tmp, &mut k2)?;
            combo(&y, h, &[(A31, &k1), (A32, &k2)], &mut tmp);
            rhs(t + T::lit(C3) * h, &tmp, &mut k3)?;
            combo(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)], &mut tmp);
            rhs(t + T::lit(C4) * h, &tmp, &mut k4)?;
            combo(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], &mut tmp);
            rhs(t + T::lit(C5) * h, &tmp, &mut k5)?;
            combo(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)], &mut tmp);
            rhs(t + h, &tmp, &mut k6)?;
            combo(&y, h, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)], &mut y_new);
            rhs(t + h, &y_new, &mut k7)?;
            Ok(())
        })();
        let err = match stages {
            Ok(()) => {
                let mut acc = T::zero();
                for k in 0..n {
                    let e = h
                        * (T::lit(E1) * k1[k]
                            + T::lit(E3) * k3[k]
                            + T::lit(E4) * k4[k]
                            + T::lit(E5) * k5[k]
                            + T::lit(E6) * k6[k]
                            + T::lit(E7) * k7[k]);
                    let sc = opts.atol + opts.rtol * y[k].abs().max(y_new[k].abs());
                    acc = acc + (e / sc) * (e / sc);
                }
                (acc / T::from_count(n.max(1))).sqrt()
            }
            Err(_) => T::infinity(),
        };
        if err.is_finite() && err <= T::one() {
            let t_new = if last { t1 } else { t + h };
            let control = hook(t_new, &mut y_new);
            if control == StepControl::Reject {
                traj.rejected += 1;
                h = h * T::lit(0.5);
                if h < h_min {
                    return Err(failure(&traj, "step size underflow after hook rejection".into()));
                }
                continue;
            }
            t = t_new;
            std::mem::swap(&mut y, &mut y_new);
            std::mem::swap(&mut k1, &mut k7);
            if control == StepControl::Modified {
                rhs(t, &y, &mut k1).map_err(|r| failure(&traj, r))?;
            }
            traj.ts.push(t);
            traj.ys.push(y.clone());
            traj.dys.push(k1.clone());
            if control == StepControl::Stop {
                traj.stopped_early = true;
                break;
            }
            let factor = if err == T::zero() { T::lit(5.0) } else { (T::lit(0.9) * err.powf(-fifth)).min(T::lit(5.0)) };
            h = (h * factor.max(T::lit(0.2))).min(h_max);
        } else {
            traj.rejected += 1;
            let factor = if err.is_finite() { (T::lit(0.9) * err.powf(-fifth)).max(T::lit(0.1)) } else { T::lit(0.25) };
            h = h * factor.min(T::lit(0.9));
            if h < h_min {
                return Err(failure(&traj, "step size underflow".into()));
            }
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let mut rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = -y[0];
            Ok(())
        };
        let traj = dormand_prince(&mut rhs, 0.0, 2.0, &[1.0], &OdeOptions::new(1e-10), &mut |_, _| StepControl::Continue)
            .unwrap();
        assert!((traj.last_state()[0] - (-2.0f64).exp()).abs() < 1e-9);
        assert!((traj.interpolate(1.0)[0] - (-1.0f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn harmonic_oscillator_period() {
        let mut rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = -y[0];
            Ok(())
        };
        let tau = 2.0 * std::f64::consts::PI;
        let traj =
            dormand_prince(&mut rhs, 0.0, tau, &[1.0, 0.0], &OdeOptions::new(1e-11), &mut |_, _| StepControl::Continue)
                .unwrap();
        let y = traj.last_state();
        assert!((y[0] - 1.0).abs() < 1e-9 && y[1].abs() < 1e-9);
    }

    #[test]
    fn underflow_reports_partial_trajectory() {
        // blows up at t = 1
        let mut rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[0] * y[0];
            Ok(())
        };
        let r = dormand_prince(&mut rhs, 0.0, 2.0, &[1.0], &OdeOptions::new(1e-9), &mut |_, _| StepControl::Continue);
        match r {
            Err(Error::IntegrationFailure { partial, .. }) => assert!(partial.len() > 1),
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn hook_can_stop() {
        let mut rhs = |_t: f64, _y: &[f64], dy: &mut [f64]| {
            dy[0] = 1.0;
            Ok(())
        };
        let traj = dormand_prince(
            &mut rhs,
            0.0,
            10.0,
            &[0.0],
            &OdeOptions::new(1e-9).with_max_step(0.5),
            &mut |_, y| if y[0] > 3.0 { StepControl::Stop } else { StepControl::Continue },
        )
        .unwrap();
        assert!(traj.stopped_early && traj.last_state()[0] > 3.0 && traj.last_state()[0] <= 3.5 + 1e-12);
    }
}

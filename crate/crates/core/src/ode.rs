//! Adaptive Dormand–Prince 5(4) integration and steady-state detection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Autonomous first-order system `dy/dt = f(y)`.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, y: &[f64], dy: &mut [f64]);
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { rtol: 1e-9, atol: 1e-12 }
    }
}

impl Tolerances {
    pub fn uniform(tol: f64) -> Self {
        Tolerances { rtol: tol, atol: tol * 1e-3 }
    }
}

pub const DEFAULT_STEADY_EPS: f64 = 1e-10;
pub const DEFAULT_T_MAX: f64 = 1e5;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn last(&self) -> Option<(f64, &[f64])> {
        Some((*self.times.last()?, self.states.last()?.as_slice()))
    }

    fn push(&mut self, t: f64, y: &[f64], clip: f64) {
        self.times.push(t);
        self.states.push(clipped(y, clip));
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyOutcome {
    pub state: Vec<f64>,
    pub t: f64,
    /// `max_i |dy_i/dt|` at the returned state.
    pub residual: f64,
    pub converged: bool,
}

// Dormand–Prince tableau.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

struct Stepper<'a, S: OdeSystem + ?Sized> {
    sys: &'a S,
    tol: Tolerances,
    t: f64,
    h: f64,
    y: Vec<f64>,
    k: [Vec<f64>; 7],
    y_new: Vec<f64>,
    scratch: Vec<f64>,
}

impl<'a, S: OdeSystem + ?Sized> Stepper<'a, S> {
    fn new(sys: &'a S, y0: &[f64], tol: Tolerances) -> Result<Self> {
        let n = sys.dim();
        if y0.len() != n {
            return Err(Error::contract(format!(
                "initial state has length {}, system dimension is {n}",
                y0.len()
            )));
        }
        if !(tol.rtol > 0.0 && tol.atol > 0.0) {
            return Err(Error::contract("tolerances must be positive"));
        }
        let mut st = Stepper {
            sys,
            tol,
            t: 0.0,
            h: 0.0,
            y: y0.to_vec(),
            k: std::array::from_fn(|_| vec![0.0; n]),
            y_new: vec![0.0; n],
            scratch: vec![0.0; n],
        };
        st.sys.rhs(&st.y, &mut st.k[0]);
        st.h = st.initial_step();
        Ok(st)
    }

    fn weight(&self, i: usize) -> f64 {
        self.tol.atol + self.tol.rtol * self.y[i].abs()
    }

    fn initial_step(&self) -> f64 {
        let n = self.y.len().max(1) as f64;
        let (mut d0, mut d1) = (0.0, 0.0);
        for i in 0..self.y.len() {
            let w = self.weight(i);
            d0 += (self.y[i] / w).powi(2);
            d1 += (self.k[0][i] / w).powi(2);
        }
        let (d0, d1) = ((d0 / n).sqrt(), (d1 / n).sqrt());
        let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h.clamp(1e-8, 1.0)
    }

    fn residual(&self) -> f64 {
        self.k[0].iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Takes one accepted step, never passing `t_limit`.
    fn step(&mut self, t_limit: f64) -> Result<()> {
        let n = self.y.len();
        loop {
            let mut h = self.h;
            let last = self.t + h >= t_limit;
            if last {
                h = t_limit - self.t;
            }
            let h_min = 1e-14 * self.t.abs().max(1.0);
            if h < h_min {
                return Err(Error::Stiffness { t: self.t, h, state: self.y.clone() });
            }
            for s in 1..7 {
                for i in 0..n {
                    let mut acc = self.y[i];
                    for (j, a) in A[s][..s].iter().enumerate() {
                        acc += h * a * self.k[j][i];
                    }
                    self.scratch[i] = acc;
                }
                self.sys.rhs(&self.scratch, &mut self.k[s]);
            }
            // Last stage is evaluated at the 5th-order solution (FSAL).
            self.y_new.copy_from_slice(&self.scratch);

            let mut err = 0.0;
            for i in 0..n {
                let mut e = 0.0;
                for (j, ej) in E.iter().enumerate() {
                    e += ej * self.k[j][i];
                }
                let w = self.tol.atol + self.tol.rtol * self.y[i].abs().max(self.y_new[i].abs());
                err += (h * e / w).powi(2);
            }
            let err = (err / n.max(1) as f64).sqrt();
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if err <= 1.0 {
                self.t = if last { t_limit } else { self.t + h };
                std::mem::swap(&mut self.y, &mut self.y_new);
                self.k.swap(0, 6);
                if !last || factor < 1.0 {
                    self.h = h * factor;
                }
                return Ok(());
            }
            self.h = h * factor.min(1.0);
        }
    }
}

fn clipped(y: &[f64], clip: f64) -> Vec<f64> {
    y.iter().map(|&v| if v < 0.0 && v > -clip { 0.0 } else { v }).collect()
}

/// Integrates from `t = 0` to `t_end`, recording every accepted step.
pub fn integrate<S: OdeSystem + ?Sized>(
    sys: &S,
    y0: &[f64],
    t_end: f64,
    tol: Tolerances,
) -> Result<Trajectory> {
    let mut st = Stepper::new(sys, y0, tol)?;
    let mut traj = Trajectory::default();
    traj.push(0.0, &st.y, tol.atol);
    while st.t < t_end {
        st.step(t_end)?;
        traj.push(st.t, &st.y, tol.atol);
    }
    Ok(traj)
}

/// Integrates and reports the state at each of the ascending `times`.
pub fn integrate_at<S: OdeSystem + ?Sized>(
    sys: &S,
    y0: &[f64],
    times: &[f64],
    tol: Tolerances,
) -> Result<Trajectory> {
    if times.windows(2).any(|w| w[1] <= w[0]) || times.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::contract("output times must be non-negative and strictly increasing"));
    }
    let mut st = Stepper::new(sys, y0, tol)?;
    let mut traj = Trajectory::default();
    for &t in times {
        while st.t < t {
            st.step(t)?;
        }
        traj.push(t, &st.y, tol.atol);
    }
    Ok(traj)
}

/// Integrates until `max|dy/dt| < eps` or `t_max` is reached.
pub fn steady_state<S: OdeSystem + ?Sized>(
    sys: &S,
    y0: &[f64],
    eps: f64,
    t_max: f64,
    tol: Tolerances,
) -> Result<SteadyOutcome> {
    if eps <= 0.0 {
        return Err(Error::contract("steady-state eps must be positive"));
    }
    let mut st = Stepper::new(sys, y0, tol)?;
    let mut converged = st.residual() < eps;
    while !converged && st.t < t_max {
        st.step(t_max)?;
        converged = st.residual() < eps;
    }
    Ok(SteadyOutcome {
        residual: st.residual(),
        state: clipped(&st.y, tol.atol),
        t: st.t,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Decay(f64);
    impl OdeSystem for Decay {
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&self, y: &[f64], dy: &mut [f64]) {
            dy[0] = -self.0 * y[0];
        }
    }

    struct Oscillator;
    impl OdeSystem for Oscillator {
        fn dim(&self) -> usize {
            2
        }
        fn rhs(&self, y: &[f64], dy: &mut [f64]) {
            dy[0] = y[1];
            dy[1] = -y[0];
        }
    }

    #[test]
    fn exponential_decay_matches_closed_form() {
        let tr = integrate_at(&Decay(0.7), &[2.0], &[1.0, 3.0, 10.0], Tolerances::default()).unwrap();
        for (t, y) in tr.times.iter().zip(&tr.states) {
            let exact = 2.0 * (-0.7 * t).exp();
            assert!((y[0] - exact).abs() < 1e-9, "t={t}: {} vs {exact}", y[0]);
        }
    }

    #[test]
    fn oscillator_keeps_phase() {
        let t = 20.0 * std::f64::consts::PI;
        let tr = integrate_at(&Oscillator, &[1.0, 0.0], &[t], Tolerances::default()).unwrap();
        let y = &tr.states[0];
        assert!((y[0] - 1.0).abs() < 1e-7 && y[1].abs() < 1e-7, "{y:?}");
    }

    #[test]
    fn times_strictly_increase() {
        let tr = integrate(&Decay(1.0), &[1.0], 5.0, Tolerances::default()).unwrap();
        assert!(tr.times.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(*tr.times.last().unwrap(), 5.0);
    }

    #[test]
    fn steady_state_detects_fixed_point() {
        let out = steady_state(&Decay(1.0), &[1.0], 1e-10, 1e5, Tolerances::default()).unwrap();
        assert!(out.converged);
        assert!(out.state[0].abs() < 1e-10);
        let capped = steady_state(&Decay(1e-4), &[1.0], 1e-10, 10.0, Tolerances::default()).unwrap();
        assert!(!capped.converged);
        assert_eq!(capped.t, 10.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(integrate(&Decay(1.0), &[1.0, 2.0], 1.0, Tolerances::default()).is_err());
        assert!(integrate_at(&Decay(1.0), &[1.0], &[2.0, 1.0], Tolerances::default()).is_err());
        assert!(steady_state(&Decay(1.0), &[1.0], 0.0, 1.0, Tolerances::default()).is_err());
    }
}

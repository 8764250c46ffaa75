//! Explicit Runge–Kutta integration with cubic Hermite dense output.
//!
//! The adaptive method is Dormand–Prince 5(4); fixed-step RK4 is the
//! deterministic fallback. Backward integration runs the time-reversed
//! field forward and relabels the nodes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::Rhs;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Rk4,
    Dopri5,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub method: Method,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { rel_tol: 1e-10, abs_tol: 1e-12, max_step: 0.02, method: Method::Dopri5, max_steps: 2_000_000 }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0 && self.max_step > 0.0) {
            return Err(Error::InvalidInput("tolerances and max_step must be positive".into()));
        }
        Ok(())
    }

    /// Same configuration with both tolerances multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self { rel_tol: self.rel_tol * factor, abs_tol: self.abs_tol * factor, ..*self }
    }
}

/// Trajectory samples on an increasing time grid with cubic Hermite interpolation.
#[derive(Clone, Debug)]
pub struct DenseTrajectory {
    dim: usize,
    times: Vec<f64>,
    states: Vec<f64>,
    derivs: Vec<f64>,
}

impl DenseTrajectory {
    fn with_capacity(dim: usize, cap: usize) -> Self {
        Self {
            dim,
            times: Vec::with_capacity(cap),
            states: Vec::with_capacity(cap * dim),
            derivs: Vec::with_capacity(cap * dim),
        }
    }

    fn push(&mut self, t: f64, y: &[f64], dy: &[f64]) {
        self.times.push(t);
        self.states.extend_from_slice(y);
        self.derivs.extend_from_slice(dy);
    }

    /// Build from explicit samples; times must be strictly increasing.
    pub fn from_samples(dim: usize, times: Vec<f64>, states: Vec<f64>, derivs: Vec<f64>) -> Result<Self> {
        if times.is_empty() || states.len() != times.len() * dim || derivs.len() != states.len() {
            return Err(Error::InvalidInput("inconsistent trajectory sample sizes".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("trajectory times must be strictly increasing".into()));
        }
        Ok(Self { dim, times, states, derivs })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn t_first(&self) -> f64 {
        self.times[0]
    }

    pub fn t_last(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn deriv(&self, i: usize) -> &[f64] {
        &self.derivs[i * self.dim..(i + 1) * self.dim]
    }

    /// Index `i` with `times[i] <= t < times[i+1]`, clamped to valid segments.
    fn segment(&self, t: f64) -> usize {
        let m = self.times.len();
        if m < 2 || t <= self.times[0] {
            return 0;
        }
        match self.times.binary_search_by(|v| v.partial_cmp(&t).unwrap()) {
            Ok(i) => i.min(m - 2),
            Err(i) => (i - 1).min(m - 2),
        }
    }

    /// Evaluate all components at `t`. Outside the covered range the end
    /// segment polynomial is extended.
    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        let d = self.dim;
        if self.times.len() == 1 {
            out.copy_from_slice(self.state(0));
            return;
        }
        let i = self.segment(t);
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        if t == t0 {
            out.copy_from_slice(self.state(i));
            return;
        }
        if t == t1 {
            out.copy_from_slice(self.state(i + 1));
            return;
        }
        let h = t1 - t0;
        let s = (t - t0) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = (s3 - 2.0 * s2 + s) * h;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = (s3 - s2) * h;
        let (y0, y1) = (&self.states[i * d..], &self.states[(i + 1) * d..]);
        let (d0, d1) = (&self.derivs[i * d..], &self.derivs[(i + 1) * d..]);
        for k in 0..d {
            out[k] = h00 * y0[k] + h10 * d0[k] + h01 * y1[k] + h11 * d1[k];
        }
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, &mut out);
        out
    }

    /// Evaluate a `period`-periodic trajectory stored over `[t_first, t_first + period]`.
    pub fn eval_periodic_into(&self, t: f64, period: f64, out: &mut [f64]) {
        self.eval_into(self.t_first() + reduce_mod(t - self.t_first(), period), out)
    }

    /// Grid nodes strictly inside `(a, b)` together with `a` and `b`, increasing.
    pub fn breakpoints(&self, a: f64, b: f64) -> Vec<f64> {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let mut pts = vec![lo];
        pts.extend(self.times.iter().copied().filter(|&t| t > lo && t < hi));
        pts.push(hi);
        pts
    }
}

/// Floor-based reduction to `[0, period)`.
pub fn reduce_mod(t: f64, period: f64) -> f64 {
    let r = t - period * (t / period).floor();
    if r >= period || r < 0.0 {
        0.0
    } else {
        r
    }
}

struct Reversed<'a> {
    inner: &'a dyn Rhs,
    t0: f64,
}

impl Rhs for Reversed<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn eval(&self, s: f64, y: &[f64], dy: &mut [f64]) {
        self.inner.eval(self.t0 - s, y, dy);
        dy.iter_mut().for_each(|v| *v = -*v);
    }
}

/// Integrate `y' = rhs(t, y)` from `t0` to `t1` (either order).
pub fn integrate(rhs: &dyn Rhs, t0: f64, t1: f64, y0: &[f64], cfg: &IntegratorConfig) -> Result<DenseTrajectory> {
    cfg.validate()?;
    let n = rhs.dim();
    if y0.len() != n {
        return Err(Error::Dimension { expected: n, got: y0.len() });
    }
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { t: t0 });
    }
    if t1 == t0 {
        let mut traj = DenseTrajectory::with_capacity(n, 1);
        let mut dy = vec![0.0; n];
        rhs.eval(t0, y0, &mut dy);
        traj.push(t0, y0, &dy);
        return Ok(traj);
    }
    if t1 > t0 {
        let mut traj = forward(rhs, t0, t1, y0, cfg)?;
        *traj.times.last_mut().unwrap() = t1;
        return Ok(traj);
    }
    let rev = Reversed { inner: rhs, t0 };
    let span = t0 - t1;
    let fwd = forward(&rev, 0.0, span, y0, cfg).map_err(|e| match e {
        Error::StepUnderflow { t } => Error::StepUnderflow { t: t0 - t },
        Error::NonFinite { t } => Error::NonFinite { t: t0 - t },
        Error::TooManySteps { steps, t } => Error::TooManySteps { steps, t: t0 - t },
        other => other,
    })?;
    let m = fwd.len();
    let mut traj = DenseTrajectory::with_capacity(n, m);
    for i in (0..m).rev() {
        let t = if i == m - 1 {
            t1
        } else if i == 0 {
            t0
        } else {
            t0 - fwd.times[i]
        };
        let dy: Vec<f64> = fwd.deriv(i).iter().map(|v| -v).collect();
        traj.push(t, fwd.state(i), &dy);
    }
    Ok(traj)
}

/// State at `t1` of the solution starting at `(t0, y0)`.
pub fn flow_end(rhs: &dyn Rhs, t0: f64, t1: f64, y0: &[f64], cfg: &IntegratorConfig) -> Result<Vec<f64>> {
    let traj = integrate(rhs, t0, t1, y0, cfg)?;
    let i = if t1 >= t0 { traj.len() - 1 } else { 0 };
    Ok(traj.state(i).to_vec())
}

fn forward(rhs: &dyn Rhs, t0: f64, t1: f64, y0: &[f64], cfg: &IntegratorConfig) -> Result<DenseTrajectory> {
    match cfg.method {
        Method::Rk4 => rk4(rhs, t0, t1, y0, cfg),
        Method::Dopri5 => dopri5(rhs, t0, t1, y0, cfg),
    }
}

fn rk4(rhs: &dyn Rhs, t0: f64, t1: f64, y0: &[f64], cfg: &IntegratorConfig) -> Result<DenseTrajectory> {
    let n = y0.len();
    let span = t1 - t0;
    let steps = (span / cfg.max_step).ceil().max(1.0) as usize;
    if steps > cfg.max_steps {
        return Err(Error::TooManySteps { steps: cfg.max_steps, t: t0 });
    }
    let h = span / steps as f64;
    let mut traj = DenseTrajectory::with_capacity(n, steps + 1);
    let mut y = y0.to_vec();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    rhs.eval(t0, &y, &mut k1);
    traj.push(t0, &y, &k1);
    for i in 0..steps {
        let t = t0 + i as f64 * h;
        for j in 0..n {
            tmp[j] = y[j] + 0.5 * h * k1[j];
        }
        rhs.eval(t + 0.5 * h, &tmp, &mut k2);
        for j in 0..n {
            tmp[j] = y[j] + 0.5 * h * k2[j];
        }
        rhs.eval(t + 0.5 * h, &tmp, &mut k3);
        for j in 0..n {
            tmp[j] = y[j] + h * k3[j];
        }
        rhs.eval(t + h, &tmp, &mut k4);
        for j in 0..n {
            y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        let tn = if i + 1 == steps { t1 } else { t0 + (i + 1) as f64 * h };
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { t: tn });
        }
        rhs.eval(tn, &y, &mut k1);
        traj.push(tn, &y, &k1);
    }
    Ok(traj)
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
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

fn dopri5(rhs: &dyn Rhs, t0: f64, t1: f64, y0: &[f64], cfg: &IntegratorConfig) -> Result<DenseTrajectory> {
    let n = y0.len();
    let span = t1 - t0;
    let mut traj = DenseTrajectory::with_capacity(n, 64);
    let mut k = vec![vec![0.0; n]; 7];
    let mut y = y0.to_vec();
    let mut ynew = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    rhs.eval(t0, &y, &mut k[0]);
    traj.push(t0, &y, &k[0]);

    let wnorm = |v: &[f64], y: &[f64]| -> f64 {
        let s: f64 = v
            .iter()
            .zip(y)
            .map(|(a, b)| {
                let sc = cfg.abs_tol + cfg.rel_tol * b.abs();
                (a / sc).powi(2)
            })
            .sum();
        (s / n as f64).sqrt()
    };
    let mut h = {
        let d0 = wnorm(&y, &y);
        let d1 = wnorm(&k[0], &y);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        for j in 0..n {
            tmp[j] = y[j] + h0 * k[0][j];
        }
        rhs.eval(t0 + h0, &tmp, &mut k[1]);
        let diff: Vec<f64> = k[1].iter().zip(&k[0]).map(|(a, b)| a - b).collect();
        let d2 = wnorm(&diff, &y) / h0;
        let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
        (100.0 * h0).min(h1).min(cfg.max_step).min(span)
    };

    let mut t = t0;
    let mut steps = 0usize;
    let mut rejected_last = false;
    loop {
        steps += 1;
        if steps > cfg.max_steps {
            return Err(Error::TooManySteps { steps: cfg.max_steps, t });
        }
        let mut last = false;
        if t + 1.01 * h >= t1 {
            h = t1 - t;
            last = true;
        }
        if h <= 1e-14 * t.abs().max(1.0) {
            return Err(Error::StepUnderflow { t });
        }
        for s in 1..7 {
            for j in 0..n {
                let mut acc = y[j];
                for (r, kr) in k.iter().enumerate().take(s) {
                    acc += h * A[s][r] * kr[j];
                }
                tmp[j] = acc;
            }
            rhs.eval(t + C[s] * h, &tmp, &mut k[s]);
            if s == 6 {
                ynew.copy_from_slice(&tmp);
            }
        }
        let mut errv = vec![0.0; n];
        for j in 0..n {
            errv[j] = h * (0..7).map(|s| E[s] * k[s][j]).sum::<f64>();
        }
        let finite = ynew.iter().all(|v| v.is_finite());
        let err = if finite {
            let s: f64 = (0..n)
                .map(|j| {
                    let sc = cfg.abs_tol + cfg.rel_tol * y[j].abs().max(ynew[j].abs());
                    (errv[j] / sc).powi(2)
                })
                .sum();
            (s / n as f64).sqrt()
        } else {
            f64::INFINITY
        };
        if err <= 1.0 {
            t = if last { t1 } else { t + h };
            y.copy_from_slice(&ynew);
            let k6 = k[6].clone();
            k[0].copy_from_slice(&k6);
            traj.push(t, &y, &k[0]);
            if last {
                return Ok(traj);
            }
            let mut fac = if err == 0.0 { 5.0 } else { 0.9 * err.powf(-0.2) };
            fac = fac.clamp(0.2, 5.0);
            if rejected_last {
                fac = fac.min(1.0);
            }
            rejected_last = false;
            h = (h * fac).min(cfg.max_step);
        } else {
            if !finite && h <= 1e-12 * t.abs().max(1.0) {
                return Err(Error::NonFinite { t });
            }
            let fac = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.2, 1.0) } else { 0.1 };
            rejected_last = true;
            h *= fac;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::OdeSystem;
    use std::f64::consts::PI;

    fn harmonic() -> OdeSystem {
        OdeSystem::new("harmonic", 2, 2.0 * PI, true, |_, x, o| {
            o[0] = x[1];
            o[1] = -x[0];
        })
    }

    #[test]
    fn zero_field_is_constant() {
        let s = OdeSystem::new("zero", 1, 1.0, true, |_, _, o| o[0] = 0.0);
        let tr = integrate(&s, 0.0, 5.0, &[3.0], &IntegratorConfig::default()).unwrap();
        assert_eq!(tr.t_last(), 5.0);
        assert_eq!(tr.eval(5.0), vec![3.0]);
        assert_eq!(tr.eval(2.7), vec![3.0]);
    }

    #[test]
    fn exponential_growth() {
        let s = OdeSystem::new("exp", 1, 1.0, true, |_, x, o| o[0] = x[0]);
        for method in [Method::Dopri5, Method::Rk4] {
            let cfg = IntegratorConfig { method, max_step: 0.01, ..Default::default() };
            let x = flow_end(&s, 0.0, 1.0, &[1.0], &cfg).unwrap();
            let tol = if method == Method::Rk4 { 1e-9 } else { 1e-9 };
            assert!((x[0] - std::f64::consts::E).abs() < tol, "{method:?}: {}", x[0]);
        }
    }

    #[test]
    fn harmonic_closes_after_two_pi() {
        let x = flow_end(&harmonic(), 0.0, 2.0 * PI, &[0.0, 1.0], &IntegratorConfig::default()).unwrap();
        assert!(x[0].abs() < 1e-9 && (x[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn backward_integration_inverts_forward() {
        let cfg = IntegratorConfig::default();
        let s = harmonic();
        let tr = integrate(&s, 1.0, -2.0, &[0.3, 0.4], &cfg).unwrap();
        assert_eq!(tr.t_first(), -2.0);
        assert_eq!(tr.t_last(), 1.0);
        assert_eq!(tr.eval(1.0), vec![0.3, 0.4]);
        let back = flow_end(&s, -2.0, 1.0, tr.state(0), &cfg).unwrap();
        assert!((back[0] - 0.3).abs() < 1e-9 && (back[1] - 0.4).abs() < 1e-9);
    }

    #[test]
    fn dense_output_is_accurate_between_nodes() {
        let tr = integrate(&harmonic(), 0.0, 10.0, &[0.0, 1.0], &IntegratorConfig::default()).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..1000 {
            let t = 10.0 * i as f64 / 999.0;
            let x = tr.eval(t);
            worst = worst.max((x[0] - t.sin()).abs()).max((x[1] - t.cos()).abs());
        }
        assert!(worst < 1e-9, "{worst}");
    }

    #[test]
    fn blow_up_reports_last_time() {
        let s = OdeSystem::new("blowup", 1, 1.0, true, |_, x, o| o[0] = x[0] * x[0]);
        match integrate(&s, 0.0, 2.0, &[1.0], &IntegratorConfig::default()) {
            Err(Error::StepUnderflow { t }) | Err(Error::NonFinite { t }) | Err(Error::TooManySteps { t, .. }) => {
                assert!(t > 0.9 && t <= 1.0, "{t}")
            }
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn reduce_mod_is_floor_based() {
        assert_eq!(reduce_mod(-0.5, 2.0), 1.5);
        assert_eq!(reduce_mod(4.0, 2.0), 0.0);
        assert!((reduce_mod(5.25, 2.0) - 1.25).abs() < 1e-15);
    }
}

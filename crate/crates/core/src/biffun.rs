//! Bifurcation functions along a cycle: Malkin and Melnikov functions, their
//! sinusoidal decomposition, the generalized averaging operator `Phi^s` and
//! its planar decomposition, and the symmetric-case integrals.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cycles::{AdjointFrame, Cycle};
use crate::error::{Error, Result};
use crate::flow::{adjoint_weighted_integral, flow_map};
use crate::integrate::{reduce_mod, IntegratorConfig};
use crate::quad::integrate_vec;
use crate::system::{PerturbationForm, PerturbedSystem};

/// Quadrature and grid settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BifConfig {
    /// Absolute quadrature error target per unit length.
    pub quad_tol: f64,
    /// Grid points per period.
    pub grid_points: usize,
    /// Bisection width for zero refinement.
    pub zero_tol: f64,
    /// Relative threshold (to the largest sample) for tangency suspects.
    pub tangency_rel: f64,
    /// `P_0(xi) = xi` tolerance selecting the fast `Phi` path.
    pub closure_tol: f64,
}

impl Default for BifConfig {
    fn default() -> Self {
        Self { quad_tol: 1e-12, grid_points: 256, zero_tol: 1e-10, tangency_rel: 1e-6, closure_tol: 1e-8 }
    }
}

/// Strictly increasing grid on `[start, end]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaGrid {
    pub values: Vec<f64>,
    pub max_spacing: f64,
}

impl ThetaGrid {
    /// `count + 1` equally spaced nodes on `[0, period]`.
    pub fn uniform(period: f64, count: usize) -> Self {
        Self::span(0.0, period, count)
    }

    pub fn span(start: f64, end: f64, count: usize) -> Self {
        let count = count.max(1);
        let values = (0..=count).map(|i| start + (end - start) * i as f64 / count as f64).collect();
        Self { values, max_spacing: (end - start) / count as f64 }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZeroKind {
    SignChange,
    TangencySuspect,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroRecord {
    pub theta0: f64,
    pub kind: ZeroKind,
    pub local_slope: f64,
    /// Strictly monotone on the bracketing grid cell.
    pub monotone: bool,
}

/// Samples of a bifurcation function on a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BifSamples {
    pub grid: ThetaGrid,
    /// Scalar values, or norms for vector-valued samples.
    pub values: Vec<f64>,
    /// Components for vector-valued samples.
    pub vectors: Option<Vec<Vec<f64>>>,
    pub zeros: Vec<ZeroRecord>,
    pub period: f64,
}

impl BifSamples {
    /// Zeros of the sign-change kind.
    pub fn sign_change_zeros(&self) -> Vec<f64> {
        self.zeros.iter().filter(|z| z.kind == ZeroKind::SignChange).map(|z| z.theta0).collect()
    }

    /// CSV with header `theta,value[,v1,v2,...]`, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("theta,value");
        if let Some(v) = self.vectors.as_ref().and_then(|v| v.first()) {
            for i in 0..v.len() {
                s.push_str(&format!(",v{}", i + 1));
            }
        }
        s.push('\n');
        for (i, t) in self.grid.values.iter().enumerate() {
            s.push_str(&format!("{},{}", fmt17(*t), fmt17(self.values[i])));
            if let Some(v) = &self.vectors {
                for c in &v[i] {
                    s.push_str(&format!(",{}", fmt17(*c)));
                }
            }
            s.push('\n');
        }
        s
    }

    /// JSON sidecar with zeros and caller diagnostics.
    pub fn sidecar(&self, diagnostics: serde_json::Value) -> serde_json::Value {
        serde_json::json!({
            "period": self.period,
            "grid_points": self.grid.len(),
            "max_spacing": self.grid.max_spacing,
            "zeros": self.zeros,
            "diagnostics": diagnostics,
        })
    }
}

/// Shortest round-trip-safe form with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Sample `f` on `grid` in parallel and annotate its zeros.
pub fn sample_scalar(f: &(dyn Fn(f64) -> Result<f64> + Sync), grid: &ThetaGrid, period: f64, bcfg: &BifConfig) -> Result<BifSamples> {
    let values: Vec<f64> = grid.values.par_iter().map(|&t| f(t)).collect::<Result<_>>()?;
    let zeros = find_zeros(f, grid, &values, period, bcfg)?;
    Ok(BifSamples { grid: grid.clone(), values, vectors: None, zeros, period })
}

/// Sign-change zeros refined by bisection, plus tangency suspects.
///
/// Zeros are reported in `[0, period)` with duplicates modulo `period` merged.
pub fn find_zeros(
    f: &(dyn Fn(f64) -> Result<f64> + Sync),
    grid: &ThetaGrid,
    values: &[f64],
    period: f64,
    bcfg: &BifConfig,
) -> Result<Vec<ZeroRecord>> {
    let g = &grid.values;
    let vmax = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut out: Vec<ZeroRecord> = Vec::new();
    if vmax == 0.0 {
        return Ok(out);
    }
    let wrap = |t: f64| {
        let r = reduce_mod(t, period);
        if (period - r).abs() < 1e-9 * period.max(1.0) {
            0.0
        } else {
            r
        }
    };
    for i in 0..g.len().saturating_sub(1) {
        let (a, b) = (g[i], g[i + 1]);
        let (va, vb) = (values[i], values[i + 1]);
        let z = if va == 0.0 {
            let prev = if i > 0 { values[i - 1] } else { f64::NAN };
            if prev * vb < 0.0 {
                Some(a)
            } else {
                None
            }
        } else if va * vb < 0.0 {
            let (mut lo, mut hi, mut flo) = (a, b, va);
            while hi - lo > bcfg.zero_tol {
                let m = 0.5 * (lo + hi);
                let fm = f(m)?;
                if fm == 0.0 {
                    lo = m;
                    hi = m;
                    break;
                }
                if fm * flo < 0.0 {
                    hi = m;
                } else {
                    lo = m;
                    flo = fm;
                }
            }
            Some(0.5 * (lo + hi))
        } else {
            None
        };
        if let Some(t0) = z {
            let secant = (vb - va) / (b - a);
            let h = (b - a) / 8.0;
            let fd = (f(t0 + h)? - f(t0 - h)?) / (2.0 * h);
            let local_slope = if fd.signum() == secant.signum() || secant == 0.0 { fd } else { secant };
            let mut pts = Vec::with_capacity(9);
            for k in 0..=8 {
                pts.push(f(a + (b - a) * k as f64 / 8.0)?);
            }
            let monotone = pts.windows(2).all(|w| w[1] > w[0]) || pts.windows(2).all(|w| w[1] < w[0]);
            push_unique(&mut out, ZeroRecord { theta0: wrap(t0), kind: ZeroKind::SignChange, local_slope, monotone }, period);
        }
    }
    let tol = bcfg.tangency_rel * vmax;
    for i in 1..g.len().saturating_sub(1) {
        let v = values[i];
        if v.abs() < tol
            && v != 0.0
            && values[i - 1] * v > 0.0
            && values[i + 1] * v > 0.0
            && v.abs() <= values[i - 1].abs()
            && v.abs() <= values[i + 1].abs()
        {
            let slope = (values[i + 1] - values[i - 1]) / (g[i + 1] - g[i - 1]);
            push_unique(
                &mut out,
                ZeroRecord { theta0: wrap(g[i]), kind: ZeroKind::TangencySuspect, local_slope: slope, monotone: false },
                period,
            );
        }
    }
    out.sort_by(|x, y| x.theta0.partial_cmp(&y.theta0).unwrap());
    Ok(out)
}

fn push_unique(out: &mut Vec<ZeroRecord>, z: ZeroRecord, period: f64) {
    let close = |a: f64, b: f64| {
        let d = (a - b).abs();
        d.min(period - d) < 1e-8
    };
    if !out.iter().any(|o| close(o.theta0, z.theta0)) {
        out.push(z);
    }
}

/// Breakpoints for `[a, b]` from the cycle's integrator nodes repeated with period `T`.
pub(crate) fn periodic_breakpoints(frame: &AdjointFrame, a: f64, b: f64) -> Vec<f64> {
    let t = frame.period;
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let nodes = frame.fund.traj.times();
    let k0 = (lo / t).floor() as i64;
    let k1 = (hi / t).floor() as i64;
    let mut out = Vec::new();
    for k in k0..=k1 {
        for &s in nodes {
            let v = s + k as f64 * t;
            if v > lo && v < hi {
                out.push(v);
            }
        }
    }
    out
}

/// `x~(tau)` and `z~(tau)` at any `tau`.
fn cycle_and_adjoint(frame: &AdjointFrame, tau: f64) -> (DVector<f64>, DVector<f64>) {
    let r = reduce_mod(tau, frame.period);
    let (x, _, z) = frame.fund.all(r);
    (x, z * &frame.z0)
}

/// `f~(theta, t) = integral_t^T <z~(tau), g(tau - theta, x~(tau), 0)> dtau`.
pub fn f_tilde(psys: &PerturbedSystem, frame: &AdjointFrame, theta: f64, t: f64, bcfg: &BifConfig) -> f64 {
    let per = frame.period;
    let n = psys.dim();
    let bp = periodic_breakpoints(frame, t, per);
    integrate_vec(1, t, per, &bp, bcfg.quad_tol, |tau, o| {
        let (x, z) = cycle_and_adjoint(frame, tau);
        let mut gv = vec![0.0; n];
        psys.g(reduce_mod(tau - theta, per), x.as_slice(), 0.0, &mut gv);
        o[0] = z.iter().zip(&gv).map(|(a, b)| a * b).sum();
    })[0]
}

/// Unsigned Malkin integral `integral_0^T <z~(tau), g(tau - theta, x~(tau), 0)> dtau`.
///
/// Defined for any periodic adjoint solution, simple cycle or not.
pub fn malkin_integral(psys: &PerturbedSystem, frame: &AdjointFrame, theta: f64, bcfg: &BifConfig) -> f64 {
    f_tilde(psys, frame, theta, 0.0, bcfg)
}

/// Malkin function `sign<x~'(0), z~(0)> integral_0^T <z~, g(tau - theta, x~, 0)>`.
pub fn malkin(psys: &PerturbedSystem, frame: &AdjointFrame, theta: f64, bcfg: &BifConfig) -> Result<f64> {
    if frame.pairing_sign == 0 {
        return Err(Error::NotSimple { multiplicity: frame.unit_multiplicity });
    }
    Ok(frame.pairing_sign as f64 * malkin_integral(psys, frame, theta, bcfg))
}

/// Melnikov function `integral_0^T det(x~'(tau), g(tau - theta, x~(tau), 0)) dtau` (planar).
pub fn melnikov(psys: &PerturbedSystem, cycle: &Cycle, theta: f64, bcfg: &BifConfig) -> Result<f64> {
    if psys.dim() != 2 {
        return Err(Error::Dimension { expected: 2, got: psys.dim() });
    }
    let per = cycle.period;
    let sys = &psys.base;
    let bp: Vec<f64> = cycle.traj.times().to_vec();
    Ok(integrate_vec(1, 0.0, per, &bp, bcfg.quad_tol, |tau, o| {
        let x = cycle.at(tau);
        let xd = sys.f_vec(tau, x.as_slice());
        let gv = psys.g_vec(reduce_mod(tau - theta, per), x.as_slice(), 0.0);
        o[0] = xd[0] * gv[1] - xd[1] * gv[0];
    })[0])
}

/// Coefficients of `M(theta) = cos(w theta) M_sin - sin(w theta) M_cos`, `w = 2 pi k / T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SinusoidalDecomposition {
    pub m_sin: f64,
    pub m_cos: f64,
    pub k: u32,
    pub period: f64,
    /// Whether the Malkin sign factor was applied (false on non-simple cycles).
    pub signed: bool,
    /// `|M_cos| > 1e-6`.
    pub m_cos_nonzero: bool,
}

impl SinusoidalDecomposition {
    pub fn reconstruct(&self, theta: f64) -> f64 {
        let w = 2.0 * PI * self.k as f64 / self.period;
        (w * theta).cos() * self.m_sin - (w * theta).sin() * self.m_cos
    }
}

/// Sinusoidal decomposition for forcing `(0, .., sin(2 pi k t/T) g_scalar(x))`.
pub fn sinusoidal_decomposition(psys: &PerturbedSystem, frame: &AdjointFrame, bcfg: &BifConfig) -> Result<SinusoidalDecomposition> {
    let (k, gs) = match &psys.form {
        PerturbationForm::SinScalar { k, g_scalar } => (*k, g_scalar.clone()),
        _ => return Err(Error::FormMismatch("expected forcing (0, .., sin(2πkt/T) g(x))".into())),
    };
    let per = frame.period;
    let n = psys.dim();
    let w = 2.0 * PI * k as f64 / per;
    let bp = periodic_breakpoints(frame, 0.0, per);
    let v = integrate_vec(2, 0.0, per, &bp, bcfg.quad_tol, |tau, o| {
        let (x, z) = cycle_and_adjoint(frame, tau);
        let a = z[n - 1] * gs(x.as_slice());
        o[0] = a * (w * tau).sin();
        o[1] = a * (w * tau).cos();
    });
    let (sign, signed) = if frame.pairing_sign == 0 { (1.0, false) } else { (frame.pairing_sign as f64, true) };
    let m_cos = sign * v[1];
    Ok(SinusoidalDecomposition { m_sin: sign * v[0], m_cos, k, period: per, signed, m_cos_nonzero: m_cos.abs() > 1e-6 })
}

/// Phases `theta_j = (T arctan(M_sin/M_cos) + T pi j) / (2 pi k)`, `j = 1..2k`,
/// reduced to `(0, T]` and sorted.
pub fn predicted_phases(m_sin: f64, m_cos: f64, period: f64, k: u32) -> Result<Vec<f64>> {
    if m_cos == 0.0 {
        return Err(Error::PhaseFormulaInapplicable);
    }
    if k == 0 {
        return Err(Error::InvalidInput("harmonic k must be positive".into()));
    }
    let a = (m_sin / m_cos).atan();
    let mut out: Vec<f64> = (1..=2 * k)
        .map(|j| {
            let v = (period * a + period * PI * j as f64) / (2.0 * PI * k as f64);
            let r = v - period * (v / period).floor();
            if r <= 0.0 {
                r + period
            } else {
                r
            }
        })
        .collect();
    out.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Ok(out)
}

/// Which formula produced a `Phi` value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiPath {
    Generic,
    Fast,
}

/// `Phi^s(xi) = eta(T, s, xi) - eta(0, s, xi)`.
pub fn phi_generic(psys: &PerturbedSystem, s: f64, xi: &[f64], cfg: &IntegratorConfig) -> Result<DVector<f64>> {
    let per = psys.period();
    let n = psys.dim();
    let mut out = DVector::zeros(n);
    if s != per {
        let (q, y) = adjoint_weighted_integral(psys, xi, s, per, cfg)?;
        out += y * q;
    }
    if s != 0.0 {
        // eta(0, s, xi) = Y(0) integral_s^0 = -integral_0^s
        let (q, _) = adjoint_weighted_integral(psys, xi, 0.0, s, cfg)?;
        out += q;
    }
    Ok(out)
}

/// `Phi^s(xi) = integral_{s-T}^s Y(tau)^{-1} g(tau, Omega(tau, 0, xi), 0) dtau`, valid when `P_0(xi) = xi`.
pub fn phi_fast(psys: &PerturbedSystem, s: f64, xi: &[f64], cfg: &IntegratorConfig) -> Result<DVector<f64>> {
    let (q, _) = adjoint_weighted_integral(psys, xi, s - psys.period(), s, cfg)?;
    Ok(q)
}

/// `Phi^s(xi)`, using the fast formula when `xi` is a fixed point of `P_0`.
pub fn phi(psys: &PerturbedSystem, s: f64, xi: &[f64], bcfg: &BifConfig, cfg: &IntegratorConfig) -> Result<(DVector<f64>, PhiPath)> {
    if !(0.0..=psys.period()).contains(&s) {
        return Err(Error::InvalidInput(format!("s = {s} outside [0, T]")));
    }
    let p0 = flow_map(&psys.base, psys.period(), 0.0, xi, cfg)?;
    let closure = p0.iter().zip(xi).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    if closure <= bcfg.closure_tol {
        Ok((phi_fast(psys, s, xi, cfg)?, PhiPath::Fast))
    } else {
        Ok((phi_generic(psys, s, xi, cfg)?, PhiPath::Generic))
    }
}

/// `Phi^s(x~(theta)) = Y(theta) integral_{s+theta-T}^{s+theta} Z(v)^T g(v - theta, x~(v), 0) dv`
/// by quadrature on the stored frame.
pub fn phi_on_cycle(psys: &PerturbedSystem, frame: &AdjointFrame, s: f64, theta: f64, bcfg: &BifConfig) -> DVector<f64> {
    let per = frame.period;
    let n = psys.dim();
    let (a, b) = (s + theta - per, s + theta);
    let bp = periodic_breakpoints(frame, a, b);
    let q = integrate_vec(n, a, b, &bp, bcfg.quad_tol, |v, o| {
        let x = frame.fund.x(reduce_mod(v, per));
        let z = frame.z_at(v);
        let gv = psys.g_vec(v - theta, x.as_slice(), 0.0);
        let w = z.transpose() * gv;
        o.copy_from_slice(w.as_slice());
    });
    frame.y_at(theta) * DVector::from_vec(q)
}

/// Planar decomposition `Phi^s(x~(theta)) = coef_xdot x~'(theta) + coef_yhat y^(theta)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiDecomposition {
    pub coef_xdot: f64,
    pub coef_yhat: f64,
    /// `f~(theta, 0)`.
    pub f_tilde_theta_0: f64,
    /// `f^(theta)`.
    pub f_hat_theta: f64,
    /// `f~(theta, s + theta)`.
    pub f_tilde_theta_s: f64,
    /// `z^_2(T) / z~_2(0)` in rotated coordinates.
    pub kappa: f64,
}

impl PhiDecomposition {
    pub fn reconstruct(&self, psys: &PerturbedSystem, frame: &AdjointFrame, theta: f64) -> Result<DVector<f64>> {
        let x = frame.fund.x(reduce_mod(theta, frame.period));
        let xd = psys.base.f_vec(theta, x.as_slice());
        Ok(xd * self.coef_xdot + frame.y_hat(theta)? * self.coef_yhat)
    }
}

/// `f^(theta) = integral_0^T <z^(tau), g(tau - theta, x~(tau), 0)> dtau`.
pub fn f_hat(psys: &PerturbedSystem, frame: &AdjointFrame, theta: f64, bcfg: &BifConfig) -> Result<f64> {
    let pf = frame.planar()?;
    let per = frame.period;
    let bp = periodic_breakpoints(frame, 0.0, per);
    let zh0 = pf.z_hat0.clone();
    Ok(integrate_vec(1, 0.0, per, &bp, bcfg.quad_tol, |tau, o| {
        let (x, _, z) = frame.fund.all(tau);
        let zh = z * &zh0;
        let gv = psys.g_vec(reduce_mod(tau - theta, per), x.as_slice(), 0.0);
        o[0] = zh.dot(&gv);
    })[0])
}

/// Coefficients of the planar decomposition; requires condition (C).
pub fn phi_decomposition(psys: &PerturbedSystem, frame: &AdjointFrame, s: f64, theta: f64, bcfg: &BifConfig) -> Result<PhiDecomposition> {
    let pf = frame.planar()?;
    if !frame.condition_c() {
        return Err(Error::InvalidInput("decomposition requires multiplier +1 of algebraic multiplicity 2".into()));
    }
    let zh_t = &frame.z_t * &pf.z_hat0;
    let rz = &pf.rotation * zh_t;
    let rzt = &pf.rotation * &frame.z0;
    let kappa = rz[1] / rzt[1];
    let f0 = f_tilde(psys, frame, theta, 0.0, bcfg);
    let fs = f_tilde(psys, frame, theta, s + theta, bcfg);
    let fh = f_hat(psys, frame, theta, bcfg)?;
    Ok(PhiDecomposition {
        coef_xdot: fh - kappa * fs,
        coef_yhat: f0,
        f_tilde_theta_0: f0,
        f_hat_theta: fh,
        f_tilde_theta_s: fs,
        kappa,
    })
}

/// `xi~`, `xi^` and the frame constants used by the symmetric-case conditions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetryIntegrals {
    pub xi_tilde: [f64; 2],
    pub xi_hat: [f64; 2],
    /// `y^_1(2 pi / w)` in rotated coordinates.
    pub y_hat_1_t: f64,
    /// `x~'_1(0)` in rotated coordinates.
    pub x_dot_1_0: f64,
    pub xi_tilde_1_positive: bool,
}

/// Symmetric-case integrals for forcing `sin(w t) g(x)`:
/// `xi~ = 4 integral_0^{pi/(2w)} <(-x~'_2, x~'_1), g(x~)> (cos w tau, sin w tau)` and
/// `xi^ = integral_0^{2pi/w} <(y^_2, -y^_1), g(x~)> (cos w tau, sin w tau)`.
pub fn symmetry_integrals(psys: &PerturbedSystem, frame: &AdjointFrame, bcfg: &BifConfig) -> Result<SymmetryIntegrals> {
    let (w, gs) = match &psys.form {
        PerturbationForm::SinState { omega, g_state } => (*omega, g_state.clone()),
        _ => return Err(Error::FormMismatch("expected forcing sin(wt) g(x)".into())),
    };
    let pf = frame.planar()?;
    let sys = &psys.base;
    let quarter = PI / (2.0 * w);
    let full = 2.0 * PI / w;
    let gx = |x: &[f64]| {
        let mut o = [0.0; 2];
        gs(x, &mut o);
        o
    };
    let bp = periodic_breakpoints(frame, 0.0, full);
    let xt = integrate_vec(2, 0.0, quarter, &bp, bcfg.quad_tol, |tau, o| {
        let x = frame.fund.x(reduce_mod(tau, frame.period));
        let xd = sys.f_vec(tau, x.as_slice());
        let g = gx(x.as_slice());
        let d = xd[0] * g[1] - xd[1] * g[0];
        o[0] = 4.0 * d * (w * tau).cos();
        o[1] = 4.0 * d * (w * tau).sin();
    });
    let xh = integrate_vec(2, 0.0, full, &bp, bcfg.quad_tol, |tau, o| {
        let x = frame.fund.x(reduce_mod(tau, frame.period));
        let yh = frame.y_at(tau) * &pf.y_hat0;
        let g = gx(x.as_slice());
        let d = yh[1] * g[0] - yh[0] * g[1];
        o[0] = d * (w * tau).cos();
        o[1] = d * (w * tau).sin();
    });
    let yh_t = &pf.rotation * (frame.y_at(full) * &pf.y_hat0);
    let xd0 = &pf.rotation * &pf.x_dot0;
    Ok(SymmetryIntegrals {
        xi_tilde: [xt[0], xt[1]],
        xi_hat: [xh[0], xh[1]],
        y_hat_1_t: yh_t[0],
        x_dot_1_0: xd0[0],
        xi_tilde_1_positive: xt[0] > 0.0,
    })
}

/// Minimum of `|Phi^s(xi)|` over boundary points and an `s` grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NondegeneracyScan {
    pub min_norm: f64,
    pub argmin_s: f64,
    pub argmin_point: Vec<f64>,
    pub nd_tol: f64,
    pub nondegenerate: bool,
}

/// Scan `|Phi^s(xi)|` for `xi` on `boundary` and `s` in `s_grid`.
/// Threshold: `1e-4` times the median norm over the product grid.
pub fn phi_nondegeneracy_scan(
    psys: &PerturbedSystem,
    boundary: &[Vec<f64>],
    s_grid: &[f64],
    bcfg: &BifConfig,
    cfg: &IntegratorConfig,
) -> Result<NondegeneracyScan> {
    for xi in boundary {
        let p0 = flow_map(&psys.base, psys.period(), 0.0, xi, cfg)?;
        let res = p0.iter().zip(xi).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        if res > bcfg.closure_tol {
            return Err(Error::NotFixedPoint { residual: res });
        }
    }
    let jobs: Vec<(usize, f64)> = (0..boundary.len()).flat_map(|i| s_grid.iter().map(move |&s| (i, s))).collect();
    let norms: Vec<f64> =
        jobs.par_iter().map(|&(i, s)| phi_fast(psys, s, &boundary[i], cfg).map(|v| v.norm())).collect::<Result<_>>()?;
    let (k, min_norm) = norms
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(k, v)| (k, *v))
        .ok_or_else(|| Error::InvalidInput("empty scan".into()))?;
    let mut sorted = norms.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = sorted[sorted.len() / 2];
    let nd_tol = 1e-4 * median;
    Ok(NondegeneracyScan {
        min_norm,
        argmin_s: jobs[k].1,
        argmin_point: boundary[jobs[k].0].clone(),
        nd_tol,
        nondegenerate: min_norm > nd_tol,
    })
}

/// Central finite-difference estimates of `M'`, `M''`, `M'''` at `theta`.
pub fn derivatives(f: &dyn Fn(f64) -> Result<f64>, theta: f64, h: f64) -> Result<[f64; 3]> {
    let v: Vec<f64> = [-2.0, -1.0, 0.0, 1.0, 2.0].iter().map(|k| f(theta + k * h)).collect::<Result<_>>()?;
    Ok([
        (v[3] - v[1]) / (2.0 * h),
        (v[3] - 2.0 * v[2] + v[1]) / (h * h),
        (v[4] - 2.0 * v[3] + 2.0 * v[1] - v[0]) / (2.0 * h * h * h),
    ])
}

/// Sample the Malkin function on a uniform grid over one period.
pub fn malkin_samples(psys: &PerturbedSystem, frame: &AdjointFrame, bcfg: &BifConfig) -> Result<BifSamples> {
    let grid = ThetaGrid::uniform(frame.period, bcfg.grid_points);
    sample_scalar(&|t| malkin(psys, frame, t, bcfg), &grid, frame.period, bcfg)
}

/// Sample the unsigned Malkin integral on a uniform grid over one period.
pub fn malkin_integral_samples(psys: &PerturbedSystem, frame: &AdjointFrame, bcfg: &BifConfig) -> Result<BifSamples> {
    let grid = ThetaGrid::uniform(frame.period, bcfg.grid_points);
    sample_scalar(&|t| Ok(malkin_integral(psys, frame, t, bcfg)), &grid, frame.period, bcfg)
}

/// Sample the Melnikov function on a uniform grid over one period.
pub fn melnikov_samples(psys: &PerturbedSystem, cycle: &Cycle, bcfg: &BifConfig) -> Result<BifSamples> {
    let grid = ThetaGrid::uniform(cycle.period, bcfg.grid_points);
    sample_scalar(&|t| melnikov(psys, cycle, t, bcfg), &grid, cycle.period, bcfg)
}

/// `theta -> Phi^s(x~(theta))` on a uniform grid, norms as values.
pub fn phi_samples(psys: &PerturbedSystem, frame: &AdjointFrame, s: f64, bcfg: &BifConfig) -> BifSamples {
    let grid = ThetaGrid::uniform(frame.period, bcfg.grid_points);
    let vecs: Vec<DVector<f64>> = grid.values.par_iter().map(|&t| phi_on_cycle(psys, frame, s, t, bcfg)).collect();
    BifSamples {
        values: vecs.iter().map(|v| v.norm()).collect(),
        vectors: Some(vecs.iter().map(|v| v.iter().copied().collect()).collect()),
        grid,
        zeros: Vec::new(),
        period: frame.period,
    }
}

/// `Y(T)` as stored in the frame, for callers that need the monodromy alongside `Phi`.
pub fn frame_monodromy(frame: &AdjointFrame) -> DMatrix<f64> {
    frame.y_t.clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cycles::{periodic_adjoint, CycleConfig};
    use crate::system::OdeSystem;

    fn harmonic(g: impl Fn(f64, &[f64], f64, &mut [f64]) + Send + Sync + 'static) -> PerturbedSystem {
        let base = OdeSystem::new("harmonic", 2, 2.0 * PI, true, |_, x, o| {
            o[0] = x[1];
            o[1] = -x[0];
        })
        .with_jacobian(|_, _, j| j.copy_from_slice(&[0.0, 1.0, -1.0, 0.0]));
        PerturbedSystem::new(base, g)
    }

    fn frame_of(ps: &PerturbedSystem) -> (Cycle, AdjointFrame) {
        let cfg = IntegratorConfig::default();
        let c = Cycle::from_point(&ps.base, &[0.0, 1.0], 2.0 * PI, 2.0 * PI, &cfg).unwrap();
        let f = periodic_adjoint(&ps.base, &c, &CycleConfig::default(), &cfg).unwrap();
        (c, f)
    }

    #[test]
    fn phases_trivial_cases() {
        let p = predicted_phases(0.0, 1.0, 2.0 * PI, 1).unwrap();
        assert!((p[0] - PI).abs() < 1e-15 && (p[1] - 2.0 * PI).abs() < 1e-15);
        let p = predicted_phases(1.0, 1.0, 2.0 * PI, 1).unwrap();
        assert!((p[0] - PI / 4.0).abs() < 1e-14 && (p[1] - 5.0 * PI / 4.0).abs() < 1e-14);
        assert_eq!(predicted_phases(1.0, 0.0, 1.0, 1), Err(Error::PhaseFormulaInapplicable));
    }

    #[test]
    fn zero_perturbation_gives_zero_functions() {
        let ps = harmonic(|_, _, _, o| o.fill(0.0));
        let (c, fr) = frame_of(&ps);
        let b = BifConfig::default();
        assert_eq!(malkin_integral(&ps, &fr, 0.7, &b), 0.0);
        assert_eq!(melnikov(&ps, &c, 0.7, &b).unwrap(), 0.0);
        assert_eq!(phi_on_cycle(&ps, &fr, 1.0, 0.3, &b).norm(), 0.0);
    }

    #[test]
    fn constant_field_average() {
        // f = 0, g = (cos t, sin t): Phi^s = 0 for every s
        let base = OdeSystem::new("zero", 2, 2.0 * PI, true, |_, _, o| o.fill(0.0));
        let ps = PerturbedSystem::new(base, |t, _, _, o| {
            o[0] = t.cos();
            o[1] = t.sin();
        });
        let cfg = IntegratorConfig::default();
        for s in [0.0, 1.0, 2.0 * PI] {
            let (v, path) = phi(&ps, s, &[0.3, 0.4], &BifConfig::default(), &cfg).unwrap();
            assert_eq!(path, PhiPath::Fast);
            assert!(v.norm() < 1e-10);
            assert!(phi_generic(&ps, s, &[0.3, 0.4], &cfg).unwrap().norm() < 1e-10);
        }
    }

    #[test]
    fn zero_finder_on_sine() {
        let grid = ThetaGrid::uniform(2.0 * PI, 64);
        let f = |t: f64| Ok((t - 0.3).sin());
        let s = sample_scalar(&f, &grid, 2.0 * PI, &BifConfig::default()).unwrap();
        let z = s.sign_change_zeros();
        assert_eq!(z.len(), 2);
        assert!((z[0] - 0.3).abs() < 1e-9 && (z[1] - 0.3 - PI).abs() < 1e-9);
        assert!(s.zeros.iter().all(|z| z.monotone));
        assert!(s.zeros[0].local_slope > 0.0 && s.zeros[1].local_slope < 0.0);
    }

    #[test]
    fn tangency_is_not_a_certified_zero() {
        let grid = ThetaGrid::uniform(2.0 * PI, 64);
        let f = |t: f64| Ok((t - PI).powi(2) + 1e-12);
        let s = sample_scalar(&f, &grid, 2.0 * PI, &BifConfig::default()).unwrap();
        assert!(s.sign_change_zeros().is_empty());
        assert!(s.zeros.iter().any(|z| z.kind == ZeroKind::TangencySuspect));
    }

    #[test]
    fn csv_header_and_digits() {
        let grid = ThetaGrid::uniform(1.0, 2);
        let s = BifSamples { grid, values: vec![0.1, 0.2, 0.3], vectors: Some(vec![vec![1.0, 2.0]; 3]), zeros: vec![], period: 1.0 };
        let csv = s.to_csv();
        assert!(csv.starts_with("theta,value,v1,v2\n"));
        let first: f64 = csv.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(first, 0.1);
    }
}

//! Vector fields: the unperturbed system `x' = f(t, x)` and the perturbed
//! system `x' = f(t, x) + eps g(t, x, eps)`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

/// `(t, x, out)` writes a vector of length `dim` (or `dim*dim`, row-major, for Jacobians).
pub type VecFn = Arc<dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync>;
/// `(t, x, eps, out)`.
pub type PertFn = Arc<dyn Fn(f64, &[f64], f64, &mut [f64]) + Send + Sync>;
/// State-only vector function `(x, out)`.
pub type StateFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
/// State-only scalar function.
pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Right-hand side of a first-order ODE.
pub trait Rhs: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, t: f64, y: &[f64], dy: &mut [f64]);
}

/// A right-hand side with Jacobian access.
pub trait Field: Rhs {
    /// Row-major `dim x dim` Jacobian with respect to the state.
    fn jacobian(&self, t: f64, x: &[f64], out: &mut [f64]);
}

/// Central-difference Jacobian, step `max(1e-6, 1e-7 |x|)`.
pub fn fd_jacobian(
    n: usize,
    eval: &dyn Fn(f64, &[f64], &mut [f64]),
    t: f64,
    x: &[f64],
    out: &mut [f64],
) {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let h = (1e-7 * norm).max(1e-6);
    let mut xp = x.to_vec();
    let mut fp = vec![0.0; n];
    let mut fm = vec![0.0; n];
    for j in 0..n {
        xp[j] = x[j] + h;
        eval(t, &xp, &mut fp);
        xp[j] = x[j] - h;
        eval(t, &xp, &mut fm);
        xp[j] = x[j];
        for i in 0..n {
            out[i * n + j] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
}

/// Unperturbed system `x' = f(t, x)`, `T`-periodic in `t`.
#[derive(Clone)]
pub struct OdeSystem {
    pub name: String,
    pub dim: usize,
    pub period: f64,
    pub autonomous: bool,
    f: VecFn,
    jac: Option<VecFn>,
}

impl fmt::Debug for OdeSystem {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        fm.debug_struct("OdeSystem")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("period", &self.period)
            .field("autonomous", &self.autonomous)
            .field("analytic_jacobian", &self.jac.is_some())
            .finish()
    }
}

impl OdeSystem {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        period: f64,
        autonomous: bool,
        f: impl Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self { name: name.into(), dim, period, autonomous, f: Arc::new(f), jac: None }
    }

    pub fn with_jacobian(mut self, jac: impl Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.jac = Some(Arc::new(jac));
        self
    }

    pub fn with_period(mut self, period: f64) -> Self {
        self.period = period;
        self
    }

    pub fn has_jacobian(&self) -> bool {
        self.jac.is_some()
    }

    pub fn f_vec(&self, t: f64, x: &[f64]) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim);
        (self.f)(t, x, out.as_mut_slice());
        out
    }

    pub fn jac_matrix(&self, t: f64, x: &[f64]) -> DMatrix<f64> {
        let mut buf = vec![0.0; self.dim * self.dim];
        self.jacobian(t, x, &mut buf);
        DMatrix::from_row_slice(self.dim, self.dim, &buf)
    }

    /// Finite-difference Jacobian regardless of whether an analytic one exists.
    pub fn fd_jac_matrix(&self, t: f64, x: &[f64]) -> DMatrix<f64> {
        let mut buf = vec![0.0; self.dim * self.dim];
        fd_jacobian(self.dim, &|t, x, o| (self.f)(t, x, o), t, x, &mut buf);
        DMatrix::from_row_slice(self.dim, self.dim, &buf)
    }
}

impl Rhs for OdeSystem {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        (self.f)(t, y, dy)
    }
}

impl Field for OdeSystem {
    fn jacobian(&self, t: f64, x: &[f64], out: &mut [f64]) {
        match &self.jac {
            Some(j) => j(t, x, out),
            None => fd_jacobian(self.dim, &|t, x, o| (self.f)(t, x, o), t, x, out),
        }
    }
}

/// Known structure of the perturbation, used by the formulas that need it.
#[derive(Clone)]
pub enum PerturbationForm {
    Generic,
    /// `g(t, x) = sin(omega t) g_state(x)`.
    SinState { omega: f64, g_state: StateFn },
    /// `g(t, x) = (0, ..., 0, sin(2 pi k t / T) g_scalar(x))`.
    SinScalar { k: u32, g_scalar: ScalarFn },
}

impl fmt::Debug for PerturbationForm {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Generic => write!(fm, "Generic"),
            Self::SinState { omega, .. } => write!(fm, "SinState {{ omega: {omega} }}"),
            Self::SinScalar { k, .. } => write!(fm, "SinScalar {{ k: {k} }}"),
        }
    }
}

/// Perturbed system `x' = f(t, x) + eps g(t, x, eps)`.
#[derive(Clone)]
pub struct PerturbedSystem {
    pub base: OdeSystem,
    pub form: PerturbationForm,
    g: PertFn,
    g_jac: Option<PertFn>,
}

impl fmt::Debug for PerturbedSystem {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        fm.debug_struct("PerturbedSystem")
            .field("base", &self.base)
            .field("form", &self.form)
            .field("analytic_g_jacobian", &self.g_jac.is_some())
            .finish()
    }
}

impl PerturbedSystem {
    pub fn new(base: OdeSystem, g: impl Fn(f64, &[f64], f64, &mut [f64]) + Send + Sync + 'static) -> Self {
        Self { base, form: PerturbationForm::Generic, g: Arc::new(g), g_jac: None }
    }

    /// `g(t, x) = sin(omega t) g_state(x)`.
    pub fn sin_state(base: OdeSystem, omega: f64, g_state: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        let g_state: StateFn = Arc::new(g_state);
        let gs = g_state.clone();
        let g = move |t: f64, x: &[f64], _e: f64, out: &mut [f64]| {
            gs(x, out);
            let s = (omega * t).sin();
            out.iter_mut().for_each(|v| *v *= s);
        };
        Self { base, form: PerturbationForm::SinState { omega, g_state }, g: Arc::new(g), g_jac: None }
    }

    /// `g(t, x) = (0, .., 0, sin(2 pi k t / T) g_scalar(x))` with `T` the base period.
    pub fn sin_scalar(base: OdeSystem, k: u32, g_scalar: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        let g_scalar: ScalarFn = Arc::new(g_scalar);
        let gs = g_scalar.clone();
        let w = 2.0 * std::f64::consts::PI * k as f64 / base.period;
        let n = base.dim;
        let g = move |t: f64, x: &[f64], _e: f64, out: &mut [f64]| {
            out.iter_mut().for_each(|v| *v = 0.0);
            out[n - 1] = (w * t).sin() * gs(x);
        };
        Self { base, form: PerturbationForm::SinScalar { k, g_scalar }, g: Arc::new(g), g_jac: None }
    }

    /// Zero perturbation.
    pub fn zero(base: OdeSystem) -> Self {
        Self::new(base, |_, _, _, out| out.iter_mut().for_each(|v| *v = 0.0))
    }

    pub fn with_g_jacobian(mut self, gj: impl Fn(f64, &[f64], f64, &mut [f64]) + Send + Sync + 'static) -> Self {
        self.g_jac = Some(Arc::new(gj));
        self
    }

    pub fn dim(&self) -> usize {
        self.base.dim
    }

    pub fn period(&self) -> f64 {
        self.base.period
    }

    pub fn g(&self, t: f64, x: &[f64], eps: f64, out: &mut [f64]) {
        (self.g)(t, x, eps, out)
    }

    pub fn g_vec(&self, t: f64, x: &[f64], eps: f64) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim());
        (self.g)(t, x, eps, out.as_mut_slice());
        out
    }

    pub fn g_jacobian(&self, t: f64, x: &[f64], eps: f64, out: &mut [f64]) {
        match &self.g_jac {
            Some(j) => j(t, x, eps, out),
            None => fd_jacobian(self.dim(), &|t, x, o| (self.g)(t, x, eps, o), t, x, out),
        }
    }

    /// The perturbed field at a fixed `eps`.
    pub fn at(&self, eps: f64) -> PerturbedField<'_> {
        PerturbedField { sys: self, eps }
    }
}

/// `f + eps g` at a fixed `eps`.
#[derive(Clone, Copy)]
pub struct PerturbedField<'a> {
    pub sys: &'a PerturbedSystem,
    pub eps: f64,
}

impl Rhs for PerturbedField<'_> {
    fn dim(&self) -> usize {
        self.sys.dim()
    }
    fn eval(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        self.sys.base.eval(t, y, dy);
        if self.eps != 0.0 {
            let n = dy.len();
            let mut g = [0.0; 8];
            let mut gv;
            let g: &mut [f64] = if n <= 8 {
                &mut g[..n]
            } else {
                gv = vec![0.0; n];
                &mut gv
            };
            self.sys.g(t, y, self.eps, g);
            for i in 0..n {
                dy[i] += self.eps * g[i];
            }
        }
    }
}

impl Field for PerturbedField<'_> {
    fn jacobian(&self, t: f64, x: &[f64], out: &mut [f64]) {
        self.sys.base.jacobian(t, x, out);
        if self.eps != 0.0 {
            let n = self.dim();
            let mut gj = vec![0.0; n * n];
            self.sys.g_jacobian(t, x, self.eps, &mut gj);
            for (o, g) in out.iter_mut().zip(gj) {
                *o += self.eps * g;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pendulum() -> OdeSystem {
        OdeSystem::new("pendulum", 2, 1.0, true, |_, x, o| {
            o[0] = x[1];
            o[1] = -x[0].sin();
        })
    }

    #[test]
    fn fd_jacobian_matches_analytic() {
        let s = pendulum();
        let j = s.jac_matrix(0.0, &[0.3, -0.2]);
        assert!((j[(0, 1)] - 1.0).abs() < 1e-8);
        assert!((j[(1, 0)] + 0.3f64.cos()).abs() < 1e-8);
        assert!(j[(0, 0)].abs() < 1e-8 && j[(1, 1)].abs() < 1e-8);
    }

    #[test]
    fn sin_state_form_evaluates() {
        let p = PerturbedSystem::sin_state(pendulum(), 2.0, |_, o| {
            o[0] = 0.0;
            o[1] = 1.0;
        });
        let g = p.g_vec(0.25, &[0.0, 0.0], 0.0);
        assert!((g[1] - 0.5f64.sin()).abs() < 1e-15);
        let mut d = [0.0; 2];
        p.at(0.5).eval(0.25, &[0.0, 1.0], &mut d);
        assert!((d[0] - 1.0).abs() < 1e-15);
        assert!((d[1] - 0.5 * 0.5f64.sin()).abs() < 1e-15);
    }

    #[test]
    fn perturbed_jacobian_adds_eps_g_jacobian() {
        let p = PerturbedSystem::new(pendulum(), |_, x, _, o| {
            o[0] = x[0] * x[0];
            o[1] = 0.0;
        });
        let f = p.at(0.1);
        let mut j = [0.0; 4];
        f.jacobian(0.0, &[2.0, 0.0], &mut j);
        assert!((j[0] - 0.4).abs() < 1e-7);
    }
}

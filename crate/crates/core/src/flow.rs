//! Flow map, Poincaré map, variational and adjoint equations, and the
//! inhomogeneous variational solution `eta`.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::integrate::{flow_end, integrate, DenseTrajectory, IntegratorConfig};
use crate::system::{Field, PerturbedSystem, Rhs};

/// Joint system `x' = f`, `Y' = J Y` (`ny` columns), `Z' = -J^T Z` (`nz` columns)
/// and optionally `q' = Z^T g(t, x, 0)` (requires `nz == n`).
///
/// State layout: `x | Y (column-major) | Z (column-major) | q`.
pub struct Linearized<'a> {
    pub field: &'a dyn Field,
    pub ny: usize,
    pub nz: usize,
    pub source: Option<&'a PerturbedSystem>,
}

impl<'a> Linearized<'a> {
    pub fn new(field: &'a dyn Field, ny: usize, nz: usize) -> Self {
        Self { field, ny, nz, source: None }
    }

    pub fn with_source(mut self, psys: &'a PerturbedSystem) -> Self {
        assert_eq!(self.nz, self.field.dim(), "source term needs the full adjoint matrix");
        self.source = Some(psys);
        self
    }

    pub fn n(&self) -> usize {
        self.field.dim()
    }

    pub fn y_offset(&self) -> usize {
        self.n()
    }

    pub fn z_offset(&self) -> usize {
        self.n() * (1 + self.ny)
    }

    pub fn q_offset(&self) -> usize {
        self.n() * (1 + self.ny + self.nz)
    }

    /// Initial joint state with `Y = Ycols`, `Z = Zcols`, `q = 0`.
    pub fn initial(&self, x: &[f64], y: &DMatrix<f64>, z: &DMatrix<f64>) -> Vec<f64> {
        let mut v = x.to_vec();
        v.extend_from_slice(y.as_slice());
        v.extend_from_slice(z.as_slice());
        if self.source.is_some() {
            v.extend(std::iter::repeat(0.0).take(self.n()));
        }
        v
    }

    pub fn y_of(&self, state: &[f64]) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::from_column_slice(n, self.ny, &state[self.y_offset()..self.y_offset() + n * self.ny])
    }

    pub fn z_of(&self, state: &[f64]) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::from_column_slice(n, self.nz, &state[self.z_offset()..self.z_offset() + n * self.nz])
    }

    pub fn q_of(&self, state: &[f64]) -> DVector<f64> {
        let n = self.n();
        DVector::from_column_slice(&state[self.q_offset()..self.q_offset() + n])
    }
}

impl Rhs for Linearized<'_> {
    fn dim(&self) -> usize {
        self.q_offset() + if self.source.is_some() { self.n() } else { 0 }
    }

    fn eval(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        let n = self.n();
        let x = &y[..n];
        self.field.eval(t, x, &mut dy[..n]);
        let mut j = [0.0; 16];
        let mut jv;
        let jac: &mut [f64] = if n * n <= 16 {
            &mut j[..n * n]
        } else {
            jv = vec![0.0; n * n];
            &mut jv
        };
        self.field.jacobian(t, x, jac);
        for c in 0..self.ny {
            let off = n + c * n;
            for r in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += jac[r * n + k] * y[off + k];
                }
                dy[off + r] = acc;
            }
        }
        let zo = self.z_offset();
        for c in 0..self.nz {
            let off = zo + c * n;
            for r in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc -= jac[k * n + r] * y[off + k];
                }
                dy[off + r] = acc;
            }
        }
        if let Some(ps) = self.source {
            let mut g = vec![0.0; n];
            ps.g(t, x, 0.0, &mut g);
            let qo = self.q_offset();
            for i in 0..n {
                let col = zo + i * n;
                dy[qo + i] = (0..n).map(|k| y[col + k] * g[k]).sum();
            }
        }
    }
}

/// `Omega(t, t0, xi)`.
pub fn flow_map(system: &dyn Rhs, t: f64, t0: f64, xi: &[f64], cfg: &IntegratorConfig) -> Result<DVector<f64>> {
    Ok(DVector::from_vec(flow_end(system, t0, t, xi, cfg)?))
}

/// `P_eps(xi) = Omega_eps(T, 0, xi)`.
pub fn poincare_map(psys: &PerturbedSystem, eps: f64, xi: &[f64], cfg: &IntegratorConfig) -> Result<DVector<f64>> {
    flow_map(&psys.at(eps), psys.period(), 0.0, xi, cfg)
}

/// Fundamental matrix of `y' = f'_x(t, Omega(t, t0, xi)) y` with `Y(t0) = I`.
pub fn variational_matrix(field: &dyn Field, t: f64, t0: f64, xi: &[f64], cfg: &IntegratorConfig) -> Result<DMatrix<f64>> {
    let (_, y) = flow_with_variational(field, t, t0, xi, cfg)?;
    Ok(y)
}

/// End point and fundamental matrix in one integration.
pub fn flow_with_variational(
    field: &dyn Field,
    t: f64,
    t0: f64,
    xi: &[f64],
    cfg: &IntegratorConfig,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = field.dim();
    let lin = Linearized::new(field, n, 0);
    let y0 = lin.initial(xi, &DMatrix::identity(n, n), &DMatrix::zeros(n, 0));
    let end = flow_end(&lin, t0, t, &y0, cfg)?;
    Ok((DVector::from_column_slice(&end[..n]), lin.y_of(&end)))
}

/// Joint trajectory of `x`, `Y` and `Z = Y^{-T}`, normalized at `t_norm`, over `[a, b]`.
#[derive(Clone, Debug)]
pub struct FundamentalTrajectory {
    pub n: usize,
    pub traj: DenseTrajectory,
}

impl FundamentalTrajectory {
    /// Integrates from `t_norm` (where `x = xi`, `Y = Z = I`) to both `a` and `b`.
    pub fn compute(field: &dyn Field, xi: &[f64], t_norm: f64, a: f64, b: f64, cfg: &IntegratorConfig) -> Result<Self> {
        let n = field.dim();
        let lin = Linearized::new(field, n, n);
        let id = DMatrix::identity(n, n);
        let y0 = lin.initial(xi, &id, &id);
        let fwd = integrate(&lin, t_norm, b.max(t_norm), &y0, cfg)?;
        let traj = if a < t_norm {
            let bwd = integrate(&lin, t_norm, a, &y0, cfg)?;
            concat(&bwd, &fwd)
        } else {
            fwd
        };
        Ok(Self { n, traj })
    }

    fn lin_layout(&self) -> (usize, usize) {
        (self.n, self.n * (1 + self.n))
    }

    pub fn x(&self, t: f64) -> DVector<f64> {
        let s = self.traj.eval(t);
        DVector::from_column_slice(&s[..self.n])
    }

    pub fn y(&self, t: f64) -> DMatrix<f64> {
        let s = self.traj.eval(t);
        let (yo, _) = self.lin_layout();
        DMatrix::from_column_slice(self.n, self.n, &s[yo..yo + self.n * self.n])
    }

    pub fn z(&self, t: f64) -> DMatrix<f64> {
        let s = self.traj.eval(t);
        let (_, zo) = self.lin_layout();
        DMatrix::from_column_slice(self.n, self.n, &s[zo..zo + self.n * self.n])
    }

    /// `(x, Y, Z)` at `t` from a single interpolation.
    pub fn all(&self, t: f64) -> (DVector<f64>, DMatrix<f64>, DMatrix<f64>) {
        let s = self.traj.eval(t);
        let (yo, zo) = self.lin_layout();
        let n = self.n;
        (
            DVector::from_column_slice(&s[..n]),
            DMatrix::from_column_slice(n, n, &s[yo..yo + n * n]),
            DMatrix::from_column_slice(n, n, &s[zo..zo + n * n]),
        )
    }
}

/// Concatenate a trajectory ending at `t` with one starting at `t`.
fn concat(first: &DenseTrajectory, second: &DenseTrajectory) -> DenseTrajectory {
    let d = first.dim();
    let mut times = first.times().to_vec();
    let mut states = Vec::with_capacity((first.len() + second.len()) * d);
    let mut derivs = Vec::with_capacity(states.capacity());
    for i in 0..first.len() {
        states.extend_from_slice(first.state(i));
        derivs.extend_from_slice(first.deriv(i));
    }
    for i in 1..second.len() {
        times.push(second.times()[i]);
        states.extend_from_slice(second.state(i));
        derivs.extend_from_slice(second.deriv(i));
    }
    DenseTrajectory::from_samples(d, times, states, derivs).expect("concatenated grid is increasing")
}

/// Solve the adjoint equation `z' = -f'_x(x~(t))^T z` along a stored cycle
/// with `z(t0) = z0`. The cycle trajectory is taken as periodic over its span;
/// the base point is co-integrated from `x~(t0)`.
pub fn adjoint_solve(
    field: &dyn Field,
    cycle_traj: &DenseTrajectory,
    t: f64,
    t0: f64,
    z0: &[f64],
    cfg: &IntegratorConfig,
) -> Result<DVector<f64>> {
    let n = field.dim();
    let period = cycle_traj.t_last() - cycle_traj.t_first();
    let mut x0 = vec![0.0; cycle_traj.dim()];
    cycle_traj.eval_periodic_into(t0, period, &mut x0);
    let lin = Linearized::new(field, 0, 1);
    let mut y0 = x0[..n].to_vec();
    y0.extend_from_slice(z0);
    let end = flow_end(&lin, t0, t, &y0, cfg)?;
    Ok(DVector::from_column_slice(&end[n..2 * n]))
}

/// `( integral_a^b Z(tau)^T g(tau, Omega(tau, 0, xi), 0) dtau , Y(b) )` with
/// `Y`, `Z = Y^{-T}` normalized at 0.
pub fn adjoint_weighted_integral(
    psys: &PerturbedSystem,
    xi: &[f64],
    a: f64,
    b: f64,
    cfg: &IntegratorConfig,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = psys.dim();
    let base = &psys.base;
    let id = DMatrix::identity(n, n);
    let lin = Linearized::new(base, n, n);
    let start = lin.initial(xi, &id, &id);
    let at_a = if a == 0.0 { start } else { flow_end(&lin, 0.0, a, &start, cfg)? };
    let lq = Linearized::new(base, n, n).with_source(psys);
    let mut s = at_a;
    s.extend(std::iter::repeat(0.0).take(n));
    let end = flow_end(&lq, a, b, &s, cfg)?;
    Ok((lq.q_of(&end), lq.y_of(&end)))
}

/// `eta(t, s, xi) = Y(t) integral_s^t Y(tau)^{-1} g(tau, Omega(tau, 0, xi), 0) dtau`.
pub fn eta(psys: &PerturbedSystem, s: f64, xi: &[f64], t: f64, cfg: &IntegratorConfig) -> Result<DVector<f64>> {
    if t == s {
        return Ok(DVector::zeros(psys.dim()));
    }
    let (q, y) = adjoint_weighted_integral(psys, xi, s, t, cfg)?;
    Ok(y * q)
}

//! Periodic cycles of the unperturbed autonomous system: location, monodromy,
//! multipliers, simplicity, and the adjoint/variational frames.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{flow_with_variational, FundamentalTrajectory};
use crate::integrate::{flow_end, integrate, reduce_mod, DenseTrajectory, IntegratorConfig};
use crate::linalg::{align_rotation, lstsq, null_vector, unit_root_multiplicity};
use crate::system::{OdeSystem, Rhs};

/// Tolerances for cycle computations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CycleConfig {
    pub closure_tol: f64,
    pub unit_tol: f64,
    pub period_tol: f64,
    pub deg_tol: f64,
    pub max_time: f64,
    pub max_iter: usize,
}

impl Default for CycleConfig {
    fn default() -> Self {
        Self { closure_tol: 1e-8, unit_tol: 1e-6, period_tol: 1e-8, deg_tol: 1e-5, max_time: 1000.0, max_iter: 30 }
    }
}

/// A `T`-periodic orbit of the unperturbed system.
#[derive(Clone, Debug)]
pub struct Cycle {
    pub x0: DVector<f64>,
    pub period: f64,
    pub minimal_period: f64,
    pub traj: DenseTrajectory,
}

impl Cycle {
    /// Integrate `x0` over `[0, period]`; no closure check.
    pub fn from_point(sys: &OdeSystem, x0: &[f64], period: f64, minimal_period: f64, cfg: &IntegratorConfig) -> Result<Self> {
        let traj = integrate(sys, 0.0, period, x0, cfg)?;
        Ok(Self { x0: DVector::from_column_slice(x0), period, minimal_period, traj })
    }

    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    /// `x~(t)`, extended periodically.
    pub fn at(&self, t: f64) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim());
        self.traj.eval_periodic_into(t, self.period, out.as_mut_slice());
        out
    }

    /// `x~'(t) = f(x~(t))`.
    pub fn deriv(&self, sys: &OdeSystem, t: f64) -> DVector<f64> {
        sys.f_vec(t, self.at(t).as_slice())
    }

    pub fn closure_residual(&self) -> f64 {
        let end = self.traj.state(self.traj.len() - 1);
        end.iter().zip(self.x0.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
    }

    /// The same orbit started at phase `theta`.
    pub fn shifted(&self, sys: &OdeSystem, theta: f64, cfg: &IntegratorConfig) -> Result<Self> {
        let x = self.at(theta);
        Self::from_point(sys, x.as_slice(), self.period, self.minimal_period, cfg)
    }

    /// `count` samples `(t, x~(t))` equally spaced on `[0, T)`.
    pub fn samples(&self, count: usize) -> Vec<(f64, DVector<f64>)> {
        (0..count)
            .map(|i| {
                let t = self.period * i as f64 / count as f64;
                (t, self.at(t))
            })
            .collect()
    }

    /// Closed polyline through the stored nodes (last point equals the first).
    pub fn polyline(&self) -> Vec<[f64; 2]> {
        let mut pts: Vec<[f64; 2]> = (0..self.traj.len()).map(|i| [self.traj.state(i)[0], self.traj.state(i)[1]]).collect();
        if let Some(last) = pts.last_mut() {
            *last = [self.x0[0], self.x0[1]];
        }
        pts
    }

    pub fn to_record(&self) -> CycleRecord {
        CycleRecord {
            x0: self.x0.iter().copied().collect(),
            period: self.period,
            minimal_period: self.minimal_period,
            sample_count: self.traj.len(),
            samples: (0..self.traj.len())
                .map(|i| {
                    let mut row = vec![self.traj.times()[i]];
                    row.extend_from_slice(self.traj.state(i));
                    row
                })
                .collect(),
        }
    }

    /// Rebuild from a record; derivatives are recomputed from `sys`.
    pub fn from_record(rec: &CycleRecord, sys: &OdeSystem) -> Result<Self> {
        let n = rec.x0.len();
        if n != sys.dim || rec.samples.iter().any(|r| r.len() != n + 1) {
            return Err(Error::Dimension { expected: sys.dim, got: n });
        }
        let times: Vec<f64> = rec.samples.iter().map(|r| r[0]).collect();
        let mut states = Vec::with_capacity(times.len() * n);
        let mut derivs = Vec::with_capacity(times.len() * n);
        for r in &rec.samples {
            states.extend_from_slice(&r[1..]);
            derivs.extend(sys.f_vec(r[0], &r[1..]).iter());
        }
        let traj = DenseTrajectory::from_samples(n, times, states, derivs)?;
        Ok(Self { x0: DVector::from_vec(rec.x0.clone()), period: rec.period, minimal_period: rec.minimal_period, traj })
    }
}

/// JSON form of a cycle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CycleRecord {
    pub x0: Vec<f64>,
    #[serde(rename = "T")]
    pub period: f64,
    pub minimal_period: f64,
    pub sample_count: usize,
    pub samples: Vec<Vec<f64>>,
}

/// Options for [`find_cycle`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FindCycleOptions {
    /// Impose this period instead of the first-return time (selects a member of a family).
    pub target_period: Option<f64>,
    /// Analysis period as a multiple of the minimal period (default 1).
    pub multiple: Option<usize>,
}

fn section_value(normal: &[f64], p: &[f64], x: &[f64]) -> f64 {
    normal.iter().zip(p).zip(x).map(|((n, p), x)| n * (x - p)).sum()
}

/// First return time of the orbit through `p` to the hyperplane through `p`
/// with normal `normal`, crossing in the same direction as at `p`.
pub fn first_return_time(sys: &OdeSystem, p: &[f64], normal: &[f64], max_time: f64, cfg: &IntegratorConfig) -> Result<f64> {
    let fp = sys.f_vec(0.0, p);
    let dir: f64 = normal.iter().zip(fp.iter()).map(|(a, b)| a * b).sum();
    let nn = normal.iter().map(|v| v * v).sum::<f64>().sqrt();
    if dir.abs() <= 1e-10 * nn * fp.norm() || fp.norm() == 0.0 {
        return Err(Error::SectionDegenerate);
    }
    let sigma = dir.signum();
    let chunk = 20.0f64.min(max_time);
    let mut t0 = 0.0;
    let mut x = p.to_vec();
    let mut armed = false;
    while t0 < max_time {
        let t1 = (t0 + chunk).min(max_time);
        let tr = integrate(sys, t0, t1, &x, cfg)?;
        let mut prev = sigma * section_value(normal, p, tr.state(0));
        for i in 1..tr.len() {
            let cur = sigma * section_value(normal, p, tr.state(i));
            if prev > 0.0 || cur > 0.0 {
                armed = true;
            }
            if armed && prev < 0.0 && cur >= 0.0 {
                let (mut a, mut b) = (tr.times()[i - 1], tr.times()[i]);
                for _ in 0..200 {
                    let m = 0.5 * (a + b);
                    if sigma * section_value(normal, p, &tr.eval(m)) < 0.0 {
                        a = m;
                    } else {
                        b = m;
                    }
                    if b - a < 1e-15 * b.abs().max(1.0) {
                        break;
                    }
                }
                let mut tau = 0.5 * (a + b);
                for _ in 0..3 {
                    let xe = flow_end(sys, 0.0, tau, p, cfg)?;
                    let fe = sys.f_vec(tau, &xe);
                    let d: f64 = normal.iter().zip(fe.iter()).map(|(a, b)| a * b).sum();
                    if d == 0.0 {
                        break;
                    }
                    let step = section_value(normal, p, &xe) / d;
                    tau -= step;
                    if step.abs() < 1e-15 * tau.abs() {
                        break;
                    }
                }
                return Ok(tau);
            }
            prev = cur;
        }
        x = tr.state(tr.len() - 1).to_vec();
        t0 = t1;
    }
    Err(Error::NoRecurrence { max_time })
}

/// Locate a periodic orbit near `guess` by Newton iteration on the return map
/// restricted to the hyperplane through `guess` with normal `normal`.
pub fn find_cycle(
    sys: &OdeSystem,
    guess: &[f64],
    normal: &[f64],
    opts: &FindCycleOptions,
    ccfg: &CycleConfig,
    cfg: &IntegratorConfig,
) -> Result<Cycle> {
    let n = sys.dim;
    if guess.len() != n || normal.len() != n {
        return Err(Error::Dimension { expected: n, got: guess.len().min(normal.len()) });
    }
    let p = guess.to_vec();
    let mut x = DVector::from_column_slice(guess);
    let mut tau = match opts.target_period {
        Some(tp) => tp,
        None => first_return_time(sys, guess, normal, ccfg.max_time, cfg)?,
    };
    let nvec = DVector::from_column_slice(normal);
    let mut residual = f64::INFINITY;
    let mut extra_pass = false;
    for iter in 0..ccfg.max_iter + 1 {
        let (xe, y) = flow_with_variational(sys, tau, 0.0, x.as_slice(), cfg)?;
        let mut fvec = DVector::zeros(n + 1);
        for i in 0..n {
            fvec[i] = xe[i] - x[i];
        }
        fvec[n] = section_value(normal, &p, x.as_slice());
        residual = fvec.norm();
        let scale = x.norm().max(1.0);
        if residual <= 1e-12 * scale || (extra_pass && residual <= ccfg.closure_tol) {
            break;
        }
        if iter == ccfg.max_iter {
            break;
        }
        if residual <= ccfg.closure_tol {
            extra_pass = true;
        }
        let free = opts.target_period.is_none();
        let cols = if free { n + 1 } else { n };
        let mut jac = DMatrix::zeros(n + 1, cols);
        let ym = &y - DMatrix::<f64>::identity(n, n);
        jac.view_mut((0, 0), (n, n)).copy_from(&ym);
        for j in 0..n {
            jac[(n, j)] = nvec[j];
        }
        if free {
            let fe = sys.f_vec(tau, xe.as_slice());
            for i in 0..n {
                jac[(i, n)] = fe[i];
            }
        }
        let (step, ratio) = lstsq(&jac, &(-&fvec), 1e-10);
        if ratio == 0.0 && step.norm() == 0.0 {
            return Err(Error::SectionDegenerate);
        }
        // damped update: halve while the residual grows
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..8 {
            let xt = &x + step.rows(0, n) * lambda;
            let tt = if free { tau + step[n] * lambda } else { tau };
            if tt <= 0.0 {
                lambda *= 0.5;
                continue;
            }
            let xe_t = flow_end(sys, 0.0, tt, xt.as_slice(), cfg)?;
            let mut r = 0.0;
            for i in 0..n {
                r += (xe_t[i] - xt[i]).powi(2);
            }
            r += section_value(normal, &p, xt.as_slice()).powi(2);
            if r.sqrt() < residual || lambda < 0.01 {
                x = xt;
                tau = tt;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(Error::Nonconvergent { iters: iter + 1, residual });
        }
    }
    if residual > ccfg.closure_tol {
        return Err(Error::Nonconvergent { iters: ccfg.max_iter, residual });
    }
    let fx = sys.f_vec(0.0, x.as_slice());
    let minimal = if opts.target_period.is_some() {
        first_return_time(sys, x.as_slice(), fx.as_slice(), tau * 1.5 + 1.0, cfg)?
    } else {
        // the converged tau is a first return to the hyperplane; re-measure with
        // the section through x along f(x) to guard against multiple windings
        first_return_time(sys, x.as_slice(), fx.as_slice(), tau * 1.5 + 1.0, cfg)?
    };
    let period = match (opts.target_period, opts.multiple) {
        (Some(tp), _) => {
            let k = (tp / minimal).round();
            if k < 1.0 || (tp - k * minimal).abs() > ccfg.period_tol.max(1e-7) * tp {
                return Err(Error::InvalidInput(format!(
                    "target period {tp} is not a multiple of the minimal period {minimal}"
                )));
            }
            tp
        }
        (None, Some(m)) => minimal * m.max(1) as f64,
        (None, None) => minimal,
    };
    Cycle::from_point(sys, x.as_slice(), period, minimal, cfg)
}

/// Monodromy matrix and multiplier bookkeeping.
#[derive(Clone, Debug)]
pub struct MonodromyData {
    pub y_t: DMatrix<f64>,
    pub multipliers: Vec<Complex64>,
    pub unit_multiplicity: usize,
    pub beta: usize,
    pub unit_tol: f64,
}

/// JSON form of [`MonodromyData`]; multipliers as `[re, im]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonodromyRecord {
    pub y_t: Vec<Vec<f64>>,
    pub multipliers: Vec<[f64; 2]>,
    pub unit_multiplicity: usize,
    pub beta: usize,
}

impl MonodromyData {
    pub fn to_record(&self) -> MonodromyRecord {
        MonodromyRecord {
            y_t: self.y_t.row_iter().map(|r| r.iter().copied().collect()).collect(),
            multipliers: self.multipliers.iter().map(|z| [z.re, z.im]).collect(),
            unit_multiplicity: self.unit_multiplicity,
            beta: self.beta,
        }
    }

    /// Classify a given monodromy matrix.
    pub fn from_matrix(y_t: DMatrix<f64>, unit_tol: f64) -> Result<Self> {
        if !y_t.is_square() {
            return Err(Error::InvalidInput("monodromy matrix must be square".into()));
        }
        let ev = y_t.complex_eigenvalues();
        if ev.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::EigenFailure);
        }
        let mut multipliers: Vec<Complex64> = ev.iter().copied().collect();
        multipliers.sort_by(|a, b| {
            b.norm().partial_cmp(&a.norm()).unwrap().then(b.re.partial_cmp(&a.re).unwrap())
        });
        let unit_multiplicity = unit_root_multiplicity(&y_t, unit_tol);
        // drop the multipliers that represent +1, then count real ones > 1
        let mut idx: Vec<usize> = (0..multipliers.len()).collect();
        idx.sort_by(|&i, &j| {
            let di = (multipliers[i] - Complex64::new(1.0, 0.0)).norm();
            let dj = (multipliers[j] - Complex64::new(1.0, 0.0)).norm();
            di.partial_cmp(&dj).unwrap()
        });
        let rest: Vec<Complex64> = idx[unit_multiplicity..].iter().map(|&i| multipliers[i]).collect();
        let beta = rest
            .iter()
            .filter(|z| z.im.abs() <= unit_tol * z.norm().max(1.0) && z.re > 1.0 + unit_tol)
            .count();
        Ok(Self { y_t, multipliers, unit_multiplicity, beta, unit_tol })
    }
}

/// Monodromy of the cycle: `Y(T)` normalized at 0.
pub fn monodromy(sys: &OdeSystem, cycle: &Cycle, ccfg: &CycleConfig, cfg: &IntegratorConfig) -> Result<MonodromyData> {
    let (_, y) = flow_with_variational(sys, cycle.period, 0.0, cycle.x0.as_slice(), cfg)?;
    MonodromyData::from_matrix(y, ccfg.unit_tol)
}

/// Multiplier +1 has algebraic multiplicity exactly one.
pub fn is_simple_cycle(md: &MonodromyData) -> bool {
    md.unit_multiplicity == 1
}

/// Planar frame data at `t = 0`, in original coordinates.
#[derive(Clone, Debug)]
pub struct PlanarFrame {
    /// `R` with `R x~'(0) = (|x~'(0)|, 0)`.
    pub rotation: DMatrix<f64>,
    pub x_dot0: DVector<f64>,
    pub y_hat0: DVector<f64>,
    pub z_hat0: DVector<f64>,
    /// Adjoint initial value `(0, 1/y^_2(0))` in rotated coordinates; periodic under condition (C).
    pub z_perp0: DVector<f64>,
}

/// Adjoint and variational frame along a cycle.
#[derive(Clone, Debug)]
pub struct AdjointFrame {
    pub period: f64,
    pub fund: FundamentalTrajectory,
    pub y_t: DMatrix<f64>,
    pub z_t: DMatrix<f64>,
    /// Periodic adjoint initial value `z~(0)`.
    pub z0: DVector<f64>,
    /// `<x~'(0), z~(0)>`.
    pub pairing: f64,
    /// Sign of `pairing`; 0 when it vanishes (non-simple cycles).
    pub pairing_sign: i8,
    pub unit_multiplicity: usize,
    pub periodicity_residual: f64,
    pub planar: Option<PlanarFrame>,
}

impl AdjointFrame {
    fn floquet_split(&self, t: f64) -> (f64, i32) {
        let k = (t / self.period).floor();
        let mut r = t - k * self.period;
        let mut k = k as i32;
        if r >= self.period {
            r -= self.period;
            k += 1;
        }
        (r, k)
    }

    /// `Y(t)` for any real `t` via `Y(t + kT) = Y(t) Y(T)^k`.
    pub fn y_at(&self, t: f64) -> DMatrix<f64> {
        let (r, k) = self.floquet_split(t);
        let base = self.fund.y(r);
        if k == 0 {
            return base;
        }
        let m = if k > 0 { self.y_t.clone() } else { self.z_t.transpose() };
        let mut out = base;
        for _ in 0..k.unsigned_abs() {
            out = &out * &m;
        }
        out
    }

    /// `Z(t) = Y(t)^{-T}` for any real `t`.
    pub fn z_at(&self, t: f64) -> DMatrix<f64> {
        let (r, k) = self.floquet_split(t);
        let base = self.fund.z(r);
        if k == 0 {
            return base;
        }
        let m = if k > 0 { self.z_t.clone() } else { self.y_t.transpose() };
        let mut out = base;
        for _ in 0..k.unsigned_abs() {
            out = &out * &m;
        }
        out
    }

    /// Periodic adjoint `z~(t)`.
    pub fn z_tilde(&self, t: f64) -> DVector<f64> {
        self.fund.z(reduce_mod(t, self.period)) * &self.z0
    }

    /// Adjoint solution with `z(0) = z0`, any `t`.
    pub fn adjoint(&self, t: f64, z0: &DVector<f64>) -> DVector<f64> {
        self.z_at(t) * z0
    }

    /// Variational solution with `y(0) = y0`, any `t`.
    pub fn variational(&self, t: f64, y0: &DVector<f64>) -> DVector<f64> {
        self.y_at(t) * y0
    }

    pub fn planar(&self) -> Result<&PlanarFrame> {
        self.planar.as_ref().ok_or(Error::Dimension { expected: 2, got: self.fund.n })
    }

    /// `y^(t)` (planar frames).
    pub fn y_hat(&self, t: f64) -> Result<DVector<f64>> {
        Ok(self.y_at(t) * &self.planar()?.y_hat0)
    }

    /// `z^(t)` (planar frames).
    pub fn z_hat(&self, t: f64) -> Result<DVector<f64>> {
        Ok(self.z_at(t) * &self.planar()?.z_hat0)
    }

    /// Adjoint solution orthogonal to `x~'(0)` at 0 (planar frames).
    pub fn z_perp(&self, t: f64) -> Result<DVector<f64>> {
        Ok(self.z_at(t) * &self.planar()?.z_perp0)
    }

    /// Condition (C): multiplier +1 of algebraic multiplicity 2 in the plane.
    pub fn condition_c(&self) -> bool {
        self.planar.is_some() && self.unit_multiplicity == 2
    }
}

/// Periodic adjoint solution and, in 2D, the complementary frame with
/// `x~'(0)` rotated onto the first axis, `y^(0) = (0, 1/x~'_1(0))`,
/// `z^(0) = (1/x~'_1(0), 0)` and `z(0) = (0, 1/y^_2(0))` (rotated coordinates).
pub fn periodic_adjoint(sys: &OdeSystem, cycle: &Cycle, ccfg: &CycleConfig, cfg: &IntegratorConfig) -> Result<AdjointFrame> {
    let n = sys.dim;
    let fund = FundamentalTrajectory::compute(sys, cycle.x0.as_slice(), 0.0, 0.0, cycle.period, cfg)?;
    let (_, y_t, z_t) = fund.all(cycle.period);
    let md = MonodromyData::from_matrix(y_t.clone(), ccfg.unit_tol)?;
    let x_dot0 = sys.f_vec(0.0, cycle.x0.as_slice());

    let planar = if n == 2 {
        let r = align_rotation(x_dot0.as_slice());
        let c = x_dot0.norm();
        let rt = r.transpose();
        Some(PlanarFrame {
            y_hat0: &rt * DVector::from_vec(vec![0.0, 1.0 / c]),
            z_hat0: &rt * DVector::from_vec(vec![1.0 / c, 0.0]),
            z_perp0: &rt * DVector::from_vec(vec![0.0, c]),
            rotation: r,
            x_dot0: x_dot0.clone(),
        })
    } else {
        None
    };

    let z0 = match &planar {
        Some(pf) if md.unit_multiplicity >= 2 => pf.z_perp0.clone(),
        _ => {
            let a = z_t.clone() - DMatrix::<f64>::identity(n, n);
            let (v, _) = null_vector(&a);
            v
        }
    };
    let zt0 = &z_t * &z0;
    let periodicity_residual = (&zt0 - &z0).norm() / z0.norm();
    if periodicity_residual > ccfg.unit_tol.sqrt() * 1e-1 {
        return Err(Error::NoPeriodicAdjoint);
    }
    let pairing = x_dot0.dot(&z0);
    let pairing_sign = if pairing.abs() <= ccfg.unit_tol * x_dot0.norm() * z0.norm() {
        0
    } else if pairing > 0.0 {
        1
    } else {
        -1
    };
    Ok(AdjointFrame {
        period: cycle.period,
        fund,
        y_t,
        z_t,
        z0,
        pairing,
        pairing_sign,
        unit_multiplicity: md.unit_multiplicity,
        periodicity_residual,
        planar,
    })
}

/// Result of probing `T'(alpha_0)` along a cycle family.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DegeneracyReport {
    pub t_prime: f64,
    pub degenerate: bool,
    /// `|Y_T - I|_F` at `alpha_0`.
    pub monodromy_defect: f64,
    /// Whether the monodromy test agrees with the period-derivative test.
    pub consistent: bool,
}

/// Central-difference estimate of the period derivative along `family`.
pub fn degeneracy_report(
    sys: &OdeSystem,
    family: &dyn Fn(f64) -> Vec<f64>,
    alpha0: f64,
    ccfg: &CycleConfig,
    cfg: &IntegratorConfig,
) -> Result<DegeneracyReport> {
    let h = 1e-3 * alpha0.abs().max(1.0);
    let period_at = |a: f64| -> Result<f64> {
        let p = family(a);
        let fp = sys.f_vec(0.0, &p);
        first_return_time(sys, &p, fp.as_slice(), ccfg.max_time, cfg)
    };
    let tp = period_at(alpha0 + h)?;
    let tm = period_at(alpha0 - h)?;
    let t_prime = (tp - tm) / (2.0 * h);
    let t0 = period_at(alpha0)?;
    let p0 = family(alpha0);
    let (_, y) = flow_with_variational(sys, t0, 0.0, &p0, cfg)?;
    let n = sys.dim;
    let monodromy_defect = (y - DMatrix::<f64>::identity(n, n)).norm();
    let degenerate = t_prime.abs() <= ccfg.deg_tol;
    let identity = monodromy_defect <= ccfg.unit_tol * 10.0;
    Ok(DegeneracyReport { t_prime, degenerate, monodromy_defect, consistent: degenerate == identity })
}

/// Residual of `Omega(T, 0, x0) - x0` recomputed independently.
pub fn closure_check(sys: &OdeSystem, cycle: &Cycle, cfg: &IntegratorConfig) -> Result<f64> {
    let end = flow_end(sys, 0.0, cycle.period, cycle.x0.as_slice(), cfg)?;
    Ok(end.iter().zip(cycle.x0.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
}

/// `max_t |f(x~(t)) - d/dt x~(t)|` using the stored trajectory derivatives.
pub fn derivative_defect(sys: &OdeSystem, cycle: &Cycle) -> f64 {
    (0..cycle.traj.len())
        .map(|i| {
            let t = cycle.traj.times()[i];
            let mut f = vec![0.0; sys.dim];
            sys.eval(t, cycle.traj.state(i), &mut f);
            f.iter().zip(cycle.traj.deriv(i)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn harmonic() -> OdeSystem {
        OdeSystem::new("harmonic", 2, 2.0 * PI, true, |_, x, o| {
            o[0] = x[1];
            o[1] = -x[0];
        })
    }

    #[test]
    fn monodromy_of_diag_and_identity() {
        let md = MonodromyData::from_matrix(DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]), 1e-6).unwrap();
        assert_eq!((md.beta, md.unit_multiplicity), (1, 1));
        assert!(is_simple_cycle(&md));
        let re: Vec<f64> = md.multipliers.iter().map(|z| z.re).collect();
        assert!((re[0] - 2.0).abs() < 1e-12 && (re[1] - 1.0).abs() < 1e-12);
        let md = MonodromyData::from_matrix(DMatrix::identity(2, 2), 1e-6).unwrap();
        assert_eq!((md.beta, md.unit_multiplicity), (0, 2));
        assert!(!is_simple_cycle(&md));
    }

    #[test]
    fn complex_pair_outside_unit_circle_is_not_counted() {
        let a = DMatrix::from_row_slice(3, 3, &[1.5, -1.0, 0.0, 1.0, 1.5, 0.0, 0.0, 0.0, 1.0]);
        let md = MonodromyData::from_matrix(a, 1e-6).unwrap();
        assert_eq!((md.beta, md.unit_multiplicity), (0, 1));
    }

    #[test]
    fn harmonic_cycle_from_guess() {
        let sys = harmonic();
        let c = find_cycle(&sys, &[0.0, 2.0], &[1.0, 0.0], &Default::default(), &Default::default(), &Default::default())
            .unwrap();
        assert!((c.minimal_period - 2.0 * PI).abs() < 1e-8);
        assert!(c.closure_residual() < 1e-8);
        let fr = periodic_adjoint(&sys, &c, &Default::default(), &Default::default()).unwrap();
        assert!((fr.z_tilde(2.0 * PI) - fr.z_tilde(0.0)).norm() < 1e-8);
        assert!((fr.adjoint(2.0 * PI, &fr.z0) - &fr.z0).norm() < 1e-8);
    }

    #[test]
    fn section_tangent_to_flow_is_rejected() {
        let sys = harmonic();
        let r = first_return_time(&sys, &[0.0, 1.0], &[0.0, 1.0], 100.0, &Default::default());
        assert_eq!(r, Err(Error::SectionDegenerate));
    }

    #[test]
    fn equilibrium_has_no_recurrence() {
        let sys = OdeSystem::new("decay", 2, 1.0, true, |_, x, o| {
            o[0] = -x[0] + 1.0;
            o[1] = -x[1];
        });
        let r = first_return_time(&sys, &[0.0, 0.0], &[1.0, 0.0], 50.0, &Default::default());
        assert!(matches!(r, Err(Error::NoRecurrence { .. })));
    }

    #[test]
    fn cycle_record_roundtrip() {
        let sys = harmonic();
        let c = Cycle::from_point(&sys, &[0.0, 1.0], 2.0 * PI, 2.0 * PI, &Default::default()).unwrap();
        let json = serde_json::to_string(&c.to_record()).unwrap();
        let back = Cycle::from_record(&serde_json::from_str(&json).unwrap(), &sys).unwrap();
        assert_eq!(back.traj.len(), c.traj.len());
        assert!((back.at(1.234) - c.at(1.234)).norm() < 1e-14);
    }
}

//! Verification on the perturbed system: shooting for `T`-periodic solutions,
//! side classification against a reference cycle, `eps`-sweeps with rate fits,
//! the limit identities along a sweep, and the hypothesis evaluators that turn
//! bifurcation data into predictions.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::biffun::{
    f_hat, f_tilde, find_zeros, malkin_integral, phi, phi_on_cycle, predicted_phases, sample_scalar,
    sinusoidal_decomposition, symmetry_integrals, BifConfig, ThetaGrid, ZeroKind,
};
use crate::cycles::{degeneracy_report, periodic_adjoint, AdjointFrame, Cycle, CycleConfig, MonodromyData};
use crate::degree::{degree_1d, winding_number_param, BoundaryCycle, Point, SampledCurve};
use crate::error::{Error, Result};
use crate::flow::{flow_map, flow_with_variational};
use crate::integrate::{integrate, reduce_mod, DenseTrajectory, IntegratorConfig};
use crate::linalg::lstsq;
use crate::quad::integrate_vec;
use crate::system::{OdeSystem, PerturbationForm, PerturbedSystem};
use crate::systems::CurveFn;

/// Newton shooting settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShootConfig {
    /// Target `|P_eps(x0) - x0|`.
    pub tol: f64,
    /// Step reduction factor when the residual grows.
    pub damping: f64,
    pub max_iter: usize,
    /// Step reductions tried per iteration.
    pub max_halvings: usize,
    /// Smallest accepted `sigma_min / sigma_max` of the Newton matrix.
    pub sing_tol: f64,
}

impl Default for ShootConfig {
    fn default() -> Self {
        Self { tol: 1e-9, damping: 0.5, max_iter: 25, max_halvings: 10, sing_tol: 1e-12 }
    }
}

/// A `T`-periodic solution of the perturbed system.
#[derive(Clone, Debug)]
pub struct PeriodicSolution {
    pub eps: f64,
    pub x0: DVector<f64>,
    pub traj: DenseTrajectory,
    pub residual: f64,
    pub newton_iters: usize,
    /// Phase on the reference cycle (bordered shooting only).
    pub phase: Option<f64>,
}

/// JSON form of a solution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub eps: f64,
    pub x0: Vec<f64>,
    pub residual: f64,
    pub newton_iters: usize,
    pub phase: Option<f64>,
}

impl PeriodicSolution {
    fn build(psys: &PerturbedSystem, eps: f64, x0: DVector<f64>, iters: usize, phase: Option<f64>, cfg: &IntegratorConfig) -> Result<Self> {
        let traj = integrate(&psys.at(eps), 0.0, psys.period(), x0.as_slice(), cfg)?;
        let end = DVector::from_column_slice(traj.state(traj.len() - 1));
        let residual = (end - &x0).norm();
        Ok(Self { eps, x0, traj, residual, newton_iters: iters, phase })
    }

    pub fn period(&self) -> f64 {
        self.traj.t_last()
    }

    /// `x_eps(t)`, extended periodically.
    pub fn at(&self, t: f64) -> DVector<f64> {
        let mut out = DVector::zeros(self.x0.len());
        self.traj.eval_periodic_into(t, self.period(), out.as_mut_slice());
        out
    }

    /// `count` equally spaced samples on `[0, T)`.
    pub fn samples(&self, count: usize) -> Vec<DVector<f64>> {
        (0..count).map(|i| self.at(self.period() * i as f64 / count as f64)).collect()
    }

    pub fn to_record(&self) -> SolutionRecord {
        SolutionRecord {
            eps: self.eps,
            x0: self.x0.iter().copied().collect(),
            residual: self.residual,
            newton_iters: self.newton_iters,
            phase: self.phase,
        }
    }
}

fn shoot_residual(psys: &PerturbedSystem, eps: f64, x: &DVector<f64>, cfg: &IntegratorConfig) -> Result<f64> {
    let p = flow_map(&psys.at(eps), psys.period(), 0.0, x.as_slice(), cfg)?;
    Ok((p - x).norm())
}

/// Newton iteration on `xi -> P_eps(xi) - xi` with Jacobian `Y_eps(T) - I`.
pub fn shoot(psys: &PerturbedSystem, eps: f64, guess: &[f64], scfg: &ShootConfig, cfg: &IntegratorConfig) -> Result<PeriodicSolution> {
    let n = psys.dim();
    if guess.len() != n {
        return Err(Error::Dimension { expected: n, got: guess.len() });
    }
    if eps < 0.0 || guess.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("shooting needs eps >= 0 and a finite guess".into()));
    }
    let field = psys.at(eps);
    let per = psys.period();
    let mut x = DVector::from_column_slice(guess);
    let mut res = f64::INFINITY;
    for it in 0..=scfg.max_iter {
        let (xe, y) = flow_with_variational(&field, per, 0.0, x.as_slice(), cfg)?;
        let f = &xe - &x;
        res = f.norm();
        if res <= scfg.tol {
            return PeriodicSolution::build(psys, eps, x, it, None, cfg);
        }
        if it == scfg.max_iter {
            break;
        }
        let j = y - DMatrix::<f64>::identity(n, n);
        let (dx, ratio) = lstsq(&j, &(-&f), 0.0);
        if ratio < scfg.sing_tol {
            return Err(Error::JacobianNearSingular { ratio });
        }
        x = damped_step(&x, &dx, res, scfg, |c| shoot_residual(psys, eps, c, cfg))?;
    }
    Err(Error::Nonconvergent { iters: scfg.max_iter, residual: res })
}

/// Full Newton step, shrunk by `damping` while the residual grows.
fn damped_step(
    x: &DVector<f64>,
    dx: &DVector<f64>,
    res: f64,
    scfg: &ShootConfig,
    residual: impl Fn(&DVector<f64>) -> Result<f64>,
) -> Result<DVector<f64>> {
    let mut lambda = 1.0;
    let mut best: Option<(f64, DVector<f64>)> = None;
    for _ in 0..=scfg.max_halvings {
        let cand = x + dx * lambda;
        match residual(&cand) {
            Ok(r) if r < res => return Ok(cand),
            Ok(r) => {
                if best.as_ref().map_or(true, |b| r < b.0) {
                    best = Some((r, cand));
                }
            }
            Err(_) => {}
        }
        lambda *= scfg.damping;
    }
    best.map(|b| b.1).ok_or(Error::Nonconvergent { iters: 0, residual: res })
}

/// Smooth orthonormal complement of the cycle tangent, `x~(theta) + N(theta) v`.
struct NormalFrame {
    reference: DMatrix<f64>,
    orientation: f64,
}

impl NormalFrame {
    fn new(sys: &OdeSystem, cycle: &Cycle, theta: f64) -> Self {
        let n = cycle.dim();
        let u = cycle.deriv(sys, theta).normalize();
        let mut basis: Vec<DVector<f64>> = Vec::new();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|a, b| u[*a].abs().partial_cmp(&u[*b].abs()).unwrap());
        for &k in order.iter().take(n - 1) {
            let mut e = DVector::zeros(n);
            e[k] = 1.0;
            basis.push(e);
        }
        let orientation = if n == 2 { planar_orientation(cycle) } else { 1.0 };
        Self { reference: DMatrix::from_columns(&basis), orientation }
    }

    fn at(&self, sys: &OdeSystem, cycle: &Cycle, theta: f64) -> DMatrix<f64> {
        let n = cycle.dim();
        let u = cycle.deriv(sys, theta).normalize();
        if n == 2 {
            // outward for either traversal direction
            return DMatrix::from_column_slice(2, 1, &[u[1] * self.orientation, -u[0] * self.orientation]);
        }
        let mut cols: Vec<DVector<f64>> = Vec::with_capacity(n - 1);
        for c in self.reference.column_iter() {
            let mut v = c.clone_owned() - &u * u.dot(&c);
            for q in &cols {
                v -= q * q.dot(&v);
            }
            cols.push(v.normalize());
        }
        DMatrix::from_columns(&cols)
    }
}

/// `+1` when a planar cycle runs counterclockwise, `-1` otherwise.
pub fn planar_orientation(cycle: &Cycle) -> f64 {
    let pts = cycle.polyline();
    let a: f64 = pts.windows(2).map(|w| w[0][0] * w[1][1] - w[1][0] * w[0][1]).sum();
    if a >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Shooting in the unknowns `(theta, v)` with `x0 = x~(theta) + N(theta) v`,
/// `N(theta)` orthonormal to `x~'(theta)`; `v` starts at zero.
pub fn bordered_shoot(
    psys: &PerturbedSystem,
    eps: f64,
    cycle: &Cycle,
    phase_guess: f64,
    scfg: &ShootConfig,
    cfg: &IntegratorConfig,
) -> Result<PeriodicSolution> {
    let v0 = vec![0.0; psys.dim() - 1];
    bordered_shoot_from(psys, eps, cycle, phase_guess, &v0, scfg, cfg)
}

/// [`bordered_shoot`] with an explicit initial normal offset `v0`.
pub fn bordered_shoot_from(
    psys: &PerturbedSystem,
    eps: f64,
    cycle: &Cycle,
    phase_guess: f64,
    v0: &[f64],
    scfg: &ShootConfig,
    cfg: &IntegratorConfig,
) -> Result<PeriodicSolution> {
    let n = psys.dim();
    if cycle.dim() != n || v0.len() + 1 != n {
        return Err(Error::Dimension { expected: n, got: cycle.dim() });
    }
    if eps < 0.0 || !phase_guess.is_finite() {
        return Err(Error::InvalidInput("bordered shooting needs eps >= 0 and a finite phase".into()));
    }
    let sys = &psys.base;
    let frame = NormalFrame::new(sys, cycle, phase_guess);
    let point = |p: &DVector<f64>| -> DVector<f64> {
        let v = p.rows(1, n - 1).clone_owned();
        cycle.at(p[0]) + frame.at(sys, cycle, p[0]) * v
    };
    let field = psys.at(eps);
    let per = psys.period();
    let mut p = DVector::zeros(n);
    p[0] = phase_guess;
    p.rows_mut(1, n - 1).copy_from_slice(v0);
    let mut res = f64::INFINITY;
    for it in 0..=scfg.max_iter {
        let x = point(&p);
        let (xe, y) = flow_with_variational(&field, per, 0.0, x.as_slice(), cfg)?;
        let f = &xe - &x;
        res = f.norm();
        if res <= scfg.tol {
            let theta = reduce_mod(p[0], cycle.period);
            return PeriodicSolution::build(psys, eps, x, it, Some(theta), cfg);
        }
        if it == scfg.max_iter {
            break;
        }
        let h = 1e-6 * cycle.period.max(1.0);
        let mut pp = p.clone();
        pp[0] += h;
        let mut pm = p.clone();
        pm[0] -= h;
        let dtheta = (point(&pp) - point(&pm)) / (2.0 * h);
        let mut dx = DMatrix::zeros(n, n);
        dx.set_column(0, &dtheta);
        dx.columns_mut(1, n - 1).copy_from(&frame.at(sys, cycle, p[0]));
        let j = (y - DMatrix::<f64>::identity(n, n)) * dx;
        let (dp, ratio) = lstsq(&j, &(-&f), 0.0);
        if ratio < scfg.sing_tol {
            return Err(Error::JacobianNearSingular { ratio });
        }
        p = damped_step(&p, &dp, res, scfg, |c| shoot_residual(psys, eps, &point(c), cfg))?;
    }
    Err(Error::Nonconvergent { iters: scfg.max_iter, residual: res })
}

/// `|P_eps(x0) - x0|` recomputed with tolerances halved.
pub fn recheck_residual(psys: &PerturbedSystem, sol: &PeriodicSolution, cfg: &IntegratorConfig) -> Result<f64> {
    shoot_residual(psys, sol.eps, &sol.x0, &cfg.scaled(0.5))
}

/// Position of a solution relative to a planar Jordan curve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Inside,
    Outside,
    Crossing,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SideReport {
    pub side: Side,
    /// Smallest sample distance to the curve.
    pub margin: f64,
    /// Some sample lies within `1e-9` of the curve.
    pub indeterminate: bool,
}

/// Default number of cycle samples for polygon tests.
pub const CURVE_SAMPLES: usize = 2048;
/// Default number of solution samples.
pub const SOLUTION_SAMPLES: usize = 1024;

/// Polygon through `count` equally spaced points of a planar cycle.
pub fn cycle_curve(cycle: &Cycle, count: usize) -> Result<SampledCurve> {
    if cycle.dim() != 2 {
        return Err(Error::Dimension { expected: 2, got: cycle.dim() });
    }
    let pts: Vec<Point> = cycle.samples(count).iter().map(|(_, x)| [x[0], x[1]]).collect();
    SampledCurve::new(pts, 0.0)
}

/// Point-in-polygon test of every sample against the sampled cycle.
pub fn classify_side(solution: &PeriodicSolution, cycle: &Cycle) -> Result<SideReport> {
    let curve = cycle_curve(cycle, CURVE_SAMPLES)?;
    classify_side_with(solution, &curve, SOLUTION_SAMPLES)
}

/// [`classify_side`] against a prepared curve with `samples` solution samples.
pub fn classify_side_with(solution: &PeriodicSolution, curve: &SampledCurve, samples: usize) -> Result<SideReport> {
    if solution.x0.len() != 2 {
        return Err(Error::Dimension { expected: 2, got: solution.x0.len() });
    }
    let pts: Vec<Point> = solution.samples(samples).iter().map(|x| [x[0], x[1]]).collect();
    Ok(classify_points(&pts, curve))
}

pub fn classify_points(pts: &[Point], curve: &SampledCurve) -> SideReport {
    let res: Vec<(bool, f64)> = pts.par_iter().map(|p| (curve.contains(*p), curve.distance(*p))).collect();
    let ins = res.iter().filter(|r| r.0).count();
    let margin = res.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let side = if ins == res.len() {
        Side::Inside
    } else if ins == 0 {
        Side::Outside
    } else {
        Side::Crossing
    };
    SideReport { side, margin, indeterminate: margin <= 1e-9 }
}

/// Minimize `f` on `[a, b]` by golden-section search.
pub fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// `(theta, |p - x~(theta)|)` minimizing the distance from `p` to the cycle:
/// grid argmin over `grid` phases, then golden-section refinement.
pub fn nearest_phase(cycle: &Cycle, p: &DVector<f64>, grid: usize) -> (f64, f64) {
    let per = cycle.period;
    let h = per / grid as f64;
    let (k, _) = (0..grid)
        .map(|i| (i, (cycle.at(i as f64 * h) - p).norm_squared()))
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .unwrap();
    let t0 = k as f64 * h;
    let (t, d2) = golden_min(|t| (cycle.at(t) - p).norm_squared(), t0 - h, t0 + h, 1e-12 * per.max(1.0));
    (reduce_mod(t, per), d2.max(0.0).sqrt())
}

/// Per-`eps` entry of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub eps: f64,
    pub x0: Vec<f64>,
    pub residual: f64,
    pub newton_iters: usize,
    /// `max_t dist(x_eps(t), cycle)` over solution samples.
    pub dist: f64,
    /// `|x_eps(0) - x~(theta(eps))|`.
    pub dist0: f64,
    /// `theta(eps)`, in `[0, T)`.
    pub phase: f64,
    /// Phase found by the bordered solver.
    pub shoot_phase: f64,
    pub side: Option<Side>,
    pub side_margin: Option<f64>,
}

/// Record of a warm-started sweep down a decreasing `eps` list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub eps: Vec<f64>,
    pub entries: Vec<SweepEntry>,
    pub phase_guess: f64,
    pub period: f64,
    /// Set when a later `eps` failed and the record stops early.
    pub truncated: Option<String>,
}

impl SweepRecord {
    /// CSV `eps,dist,phase,side` with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("eps,dist,phase,side\n");
        for e in &self.entries {
            let side = match e.side {
                Some(Side::Inside) => "inside",
                Some(Side::Outside) => "outside",
                Some(Side::Crossing) => "crossing",
                None => "",
            };
            s.push_str(&format!(
                "{},{},{},{}\n",
                crate::biffun::fmt17(e.eps),
                crate::biffun::fmt17(e.dist),
                crate::biffun::fmt17(e.phase),
                side
            ));
        }
        s
    }
}

/// Distance data of a solution against the reference cycle.
pub fn solution_distances(sol: &PeriodicSolution, cycle: &Cycle, samples: usize) -> (f64, f64, f64) {
    let (phase, dist0) = nearest_phase(cycle, &sol.x0, 1024);
    let grid: Vec<DVector<f64>> = (0..1024).map(|i| cycle.at(cycle.period * i as f64 / 1024.0)).collect();
    let dist = sol
        .samples(samples)
        .par_iter()
        .map(|p| {
            let k = (0..grid.len())
                .min_by(|a, b| (&grid[*a] - p).norm_squared().partial_cmp(&(&grid[*b] - p).norm_squared()).unwrap())
                .unwrap();
            let h = cycle.period / grid.len() as f64;
            let t0 = k as f64 * h;
            golden_min(|t| (cycle.at(t) - p).norm_squared(), t0 - h, t0 + h, 1e-10 * cycle.period).1.max(0.0).sqrt()
        })
        .reduce(|| 0.0, f64::max);
    (phase, dist0, dist)
}

fn sweep_entry(sol: &PeriodicSolution, cycle: &Cycle, curve: Option<&SampledCurve>) -> Result<SweepEntry> {
    let (phase, dist0, dist) = solution_distances(sol, cycle, 512);
    let side = match curve {
        Some(c) => Some(classify_side_with(sol, c, SOLUTION_SAMPLES)?),
        None => None,
    };
    Ok(SweepEntry {
        eps: sol.eps,
        x0: sol.x0.iter().copied().collect(),
        residual: sol.residual,
        newton_iters: sol.newton_iters,
        dist,
        dist0,
        phase,
        shoot_phase: sol.phase.unwrap_or(phase),
        side: side.as_ref().map(|s| s.side),
        side_margin: side.map(|s| s.margin),
    })
}

/// Warm-started bordered shooting down `eps_list` (strictly decreasing).
pub fn epsilon_sweep(
    psys: &PerturbedSystem,
    cycle: &Cycle,
    phase_guess: f64,
    eps_list: &[f64],
    scfg: &ShootConfig,
    cfg: &IntegratorConfig,
) -> Result<SweepRecord> {
    epsilon_sweep_from(psys, cycle, phase_guess, &vec![0.0; psys.dim() - 1], eps_list, scfg, cfg)
}

/// [`epsilon_sweep`] with an initial normal offset for the first `eps`.
pub fn epsilon_sweep_from(
    psys: &PerturbedSystem,
    cycle: &Cycle,
    phase_guess: f64,
    v0: &[f64],
    eps_list: &[f64],
    scfg: &ShootConfig,
    cfg: &IntegratorConfig,
) -> Result<SweepRecord> {
    if eps_list.is_empty() || eps_list.iter().any(|e| !(*e > 0.0)) || eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidInput("eps list must be positive and strictly decreasing".into()));
    }
    let n = psys.dim();
    let curve = if n == 2 { Some(cycle_curve(cycle, CURVE_SAMPLES)?) } else { None };
    let frame = NormalFrame::new(&psys.base, cycle, phase_guess);
    let mut rec = SweepRecord {
        eps: eps_list.to_vec(),
        entries: Vec::new(),
        phase_guess,
        period: psys.period(),
        truncated: None,
    };
    let first = bordered_shoot_from(psys, eps_list[0], cycle, phase_guess, v0, scfg, cfg)?;
    rec.entries.push(sweep_entry(&first, cycle, curve.as_ref())?);
    let mut prev = first;
    for &eps in &eps_list[1..] {
        let theta = prev.phase.unwrap_or(phase_guess);
        let nf = frame.at(&psys.base, cycle, theta);
        let v_prev = nf.transpose() * (&prev.x0 - cycle.at(theta));
        let ratio = eps / prev.eps;
        let starts = [v_prev.clone() * ratio, v_prev.clone() * ratio.sqrt(), v_prev.clone(), DVector::zeros(n - 1)];
        let mut found = None;
        let mut last_err = None;
        for v in &starts {
            match bordered_shoot_from(psys, eps, cycle, theta, v.as_slice(), scfg, cfg) {
                Ok(s) => {
                    found = Some(s);
                    break;
                }
                Err(e) => last_err = Some(e),
            }
        }
        match found {
            Some(s) => {
                rec.entries.push(sweep_entry(&s, cycle, curve.as_ref())?);
                prev = s;
            }
            None => {
                rec.truncated = Some(format!("eps = {eps}: {}", last_err.map(|e| e.to_string()).unwrap_or_default()));
                break;
            }
        }
    }
    Ok(rec)
}

/// Which distance a rate fit uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    /// `|x_eps(0) - x~(theta(eps))|`.
    PhaseAligned,
    /// `max_t dist(x_eps(t), cycle)`.
    Hausdorff,
}

/// Least-squares fit of `log d = slope log eps + intercept`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub used: usize,
    /// `eps` values dropped because the distance was at the noise floor.
    pub excluded: Vec<f64>,
    /// Some distance sat at the noise floor (possible `o(eps)` behaviour).
    pub flagged: bool,
}

/// Distances below this are treated as numerical noise.
pub const DISTANCE_FLOOR: f64 = 1e-10;

/// Power-law fit on `(eps, d)` pairs; needs at least four pairs.
pub fn fit_power_law(eps: &[f64], d: &[f64]) -> Result<RateFit> {
    if eps.len() != d.len() || eps.len() < 4 {
        return Err(Error::InvalidInput("rate fit needs at least four (eps, distance) pairs".into()));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut excluded = Vec::new();
    for (e, v) in eps.iter().zip(d) {
        if *v > DISTANCE_FLOOR && *e > 0.0 {
            xs.push(e.ln());
            ys.push(v.ln());
        } else {
            excluded.push(*e);
        }
    }
    if xs.len() < 2 {
        return Err(Error::InvalidInput("fewer than two distances above the noise floor".into()));
    }
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok(RateFit { slope, intercept, r2, used: xs.len(), flagged: !excluded.is_empty(), excluded })
}

/// Convergence-rate fit of a sweep.
pub fn rate_fit(sweep: &SweepRecord, kind: DistanceKind) -> Result<RateFit> {
    let eps: Vec<f64> = sweep.entries.iter().map(|e| e.eps).collect();
    let d: Vec<f64> = sweep
        .entries
        .iter()
        .map(|e| match kind {
            DistanceKind::PhaseAligned => e.dist0,
            DistanceKind::Hausdorff => e.dist,
        })
        .collect();
    fit_power_law(&eps, &d)
}

/// Sign-change zero of the unsigned Malkin integral closest (mod `T`) to `theta`.
pub fn nearest_malkin_zero(psys: &PerturbedSystem, frame: &AdjointFrame, theta: f64, bcfg: &BifConfig) -> Result<Option<f64>> {
    let per = frame.period;
    let f = |t: f64| Ok(malkin_integral(psys, frame, t, bcfg));
    let s = sample_scalar(&f, &ThetaGrid::uniform(per, bcfg.grid_points), per, bcfg)?;
    let circ = |a: f64| {
        let d = reduce_mod(a - theta, per);
        d.min(per - d)
    };
    Ok(s.sign_change_zeros().into_iter().min_by(|a, b| circ(*a).partial_cmp(&circ(*b)).unwrap()))
}

/// Residuals of the limit identity at one `eps`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitIdentity {
    pub eps: f64,
    /// Limit phase the reference cycle was shifted to.
    pub theta0: f64,
    pub t_grid: Vec<f64>,
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    /// `max_residual / eps`.
    pub ratio: f64,
}

/// `(Y(T) - I)(x^(0) - Omega(0, t, x_eps(t)))/eps - Phi^t(x^(0))` over `t_grid`,
/// where `x^` is the reference cycle shifted to the limit phase `theta0`.
pub fn limit_identity_at(
    psys: &PerturbedSystem,
    cycle: &Cycle,
    theta0: f64,
    sol: &PeriodicSolution,
    t_grid: &[f64],
    bcfg: &BifConfig,
    cfg: &IntegratorConfig,
) -> Result<LimitIdentity> {
    let sys = &psys.base;
    let n = psys.dim();
    let per = psys.period();
    let x_hat0 = cycle.at(theta0);
    let (_, y_t) = flow_with_variational(sys, per, 0.0, x_hat0.as_slice(), cfg)?;
    let a = y_t - DMatrix::<f64>::identity(n, n);
    let residuals: Vec<f64> = t_grid
        .par_iter()
        .map(|&t| -> Result<f64> {
            let xt = sol.at(t);
            let nu = flow_map(sys, 0.0, t, xt.as_slice(), cfg)?;
            let lhs = &a * (&x_hat0 - nu) / sol.eps;
            let (rhs, _) = phi(psys, t, x_hat0.as_slice(), bcfg, cfg)?;
            Ok((lhs - rhs).norm())
        })
        .collect::<Result<_>>()?;
    let max_residual = residuals.iter().copied().fold(0.0, f64::max);
    Ok(LimitIdentity {
        eps: sol.eps,
        theta0,
        t_grid: t_grid.to_vec(),
        residuals,
        max_residual,
        ratio: max_residual / sol.eps,
    })
}

/// Limit identity for every sweep entry (smallest `eps` last), with the
/// limit phase taken as the Malkin-integral zero nearest to `theta(eps_min)`.
pub fn limit_identity_3_8(
    psys: &PerturbedSystem,
    cycle: &Cycle,
    sweep: &SweepRecord,
    t_grid: &[f64],
    ccfg: &CycleConfig,
    bcfg: &BifConfig,
    cfg: &IntegratorConfig,
) -> Result<Vec<LimitIdentity>> {
    let last = sweep.entries.last().ok_or_else(|| Error::InvalidInput("empty sweep".into()))?;
    let frame = periodic_adjoint(&psys.base, cycle, ccfg, cfg)?;
    let theta0 = nearest_malkin_zero(psys, &frame, last.phase, bcfg)?.unwrap_or(last.phase);
    sweep
        .entries
        .iter()
        .map(|e| {
            let sol = PeriodicSolution::build(psys, e.eps, DVector::from_vec(e.x0.clone()), e.newton_iters, Some(e.phase), cfg)?;
            limit_identity_at(psys, cycle, theta0, &sol, t_grid, bcfg, cfg)
        })
        .collect()
}

/// Non-periodic adjoint solutions `Z_{n-1}(t) = Z(t) W0` with `W0` orthogonal to `x~'(0)`.
#[derive(Clone, Debug)]
pub struct TransversalBasis {
    pub w0: DMatrix<f64>,
    /// `Z*_{n-1}(t) = D~ Z*_{n-1}(t + T)`.
    pub d_tilde: DMatrix<f64>,
    /// `max_t |Z*(t) - D~ Z*(t+T)| / |Z*(t)|` on a 16-point grid.
    pub d_tilde_residual: f64,
    /// `(I - D~)^{-1}`.
    pub d: DMatrix<f64>,
}

impl TransversalBasis {
    /// `Z*_{n-1}(t)`.
    pub fn z_star(&self, frame: &AdjointFrame, t: f64) -> DMatrix<f64> {
        (frame.z_at(t) * &self.w0).transpose()
    }
}

/// Basis of adjoint solutions transversal to the periodic one; simple cycles only.
pub fn transversal_basis(sys: &OdeSystem, frame: &AdjointFrame) -> Result<TransversalBasis> {
    if frame.unit_multiplicity != 1 {
        return Err(Error::NotSimple { multiplicity: frame.unit_multiplicity });
    }
    let n = frame.fund.n;
    let x0 = frame.fund.x(0.0);
    let u = sys.f_vec(0.0, x0.as_slice()).normalize();
    let w0 = if let Some(pf) = &frame.planar {
        DMatrix::from_column_slice(2, 1, pf.z_perp0.as_slice())
    } else {
        let proj = DMatrix::<f64>::identity(n, n) - &u * u.transpose();
        let svd = proj.svd(true, false);
        let uu = svd.u.unwrap();
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|a, b| svd.singular_values[*b].partial_cmp(&svd.singular_values[*a]).unwrap());
        DMatrix::from_columns(&idx[..n - 1].iter().map(|&k| uu.column(k).clone_owned()).collect::<Vec<_>>())
    };
    let zs0 = w0.transpose();
    let zs_t = (&frame.z_t * &w0).transpose();
    let pinv = zs_t.clone().pseudo_inverse(1e-14).map_err(|_| Error::EigenFailure)?;
    let d_tilde = &zs0 * pinv;
    let mut resid: f64 = 0.0;
    for i in 0..16 {
        let t = frame.period * i as f64 / 16.0;
        let a = (frame.z_at(t) * &w0).transpose();
        let b = (frame.z_at(t + frame.period) * &w0).transpose();
        resid = resid.max((&a - &d_tilde * b).norm() / a.norm());
    }
    let k = n - 1;
    let d = (DMatrix::<f64>::identity(k, k) - &d_tilde).try_inverse().ok_or(Error::SingularZero { index: 0 })?;
    Ok(TransversalBasis { w0, d_tilde, d_tilde_residual: resid, d })
}

/// `M_perp(s) = integral_{s-T}^s Z*_{n-1}(tau) g(tau, x~(tau), 0) dtau`.
pub fn transversal_melnikov(psys: &PerturbedSystem, frame: &AdjointFrame, basis: &TransversalBasis, s: f64, bcfg: &BifConfig) -> DVector<f64> {
    let per = frame.period;
    let k = basis.w0.ncols();
    let (a, b) = (s - per, s);
    let bp = crate::biffun::periodic_breakpoints(frame, a, b);
    DVector::from_vec(integrate_vec(k, a, b, &bp, bcfg.quad_tol, |tau, o| {
        let x = frame.fund.x(reduce_mod(tau, per));
        let g = psys.g_vec(tau, x.as_slice(), 0.0);
        let v = basis.z_star(frame, tau) * g;
        o.copy_from_slice(v.as_slice());
    }))
}

/// Observed against predicted transversal displacement at one phase.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionSample {
    pub theta: f64,
    pub m_perp: Vec<f64>,
    /// `Z*_{n-1}(theta)(x_eps(theta - Delta) - x~(theta))`.
    pub observed: Vec<f64>,
    /// `eps D M_perp(theta)`.
    pub predicted: Vec<f64>,
    /// `cos angle(z_i(theta), x_eps(theta - Delta) - x~(theta))`.
    pub cosines: Vec<f64>,
    /// `Delta` found on the section `<z~(theta), x - x~(theta)> = 0`.
    pub delta: f64,
    /// `|observed - predicted| / |predicted|`.
    pub rel_error: f64,
}

/// Transversal displacement test along a solution `sol` converging to the cycle
/// at phase zero (`x_eps(t) -> x~(t)`).
pub fn direction_test(
    psys: &PerturbedSystem,
    frame: &AdjointFrame,
    basis: &TransversalBasis,
    sol: &PeriodicSolution,
    thetas: &[f64],
    bcfg: &BifConfig,
) -> Result<Vec<DirectionSample>> {
    if frame.pairing_sign == 0 {
        return Err(Error::NotSimple { multiplicity: frame.unit_multiplicity });
    }
    let field = psys.at(sol.eps);
    thetas
        .par_iter()
        .map(|&theta| {
            let xt = frame.fund.x(reduce_mod(theta, frame.period));
            let zt = frame.z_tilde(theta) / frame.pairing;
            let h = |tau: f64| zt.dot(&(sol.at(tau) - &xt));
            // secant on the section through x~(theta)
            let (mut a, mut b) = (theta, theta + 1e-3 * frame.period);
            let (mut ha, mut hb) = (h(a), h(b));
            for _ in 0..60 {
                if (hb - ha).abs() < 1e-300 || hb.abs() < 1e-15 {
                    break;
                }
                let c = b - hb * (b - a) / (hb - ha);
                a = b;
                ha = hb;
                b = c;
                hb = h(b);
            }
            if hb.abs() > 1e-10 {
                return Err(Error::Nonconvergent { iters: 60, residual: hb.abs() });
            }
            let _ = &field;
            let diff = sol.at(b) - &xt;
            let zs = basis.z_star(frame, theta);
            let observed = &zs * &diff;
            let m = transversal_melnikov(psys, frame, basis, theta, bcfg);
            let predicted = &basis.d * &m * sol.eps;
            let cosines = (0..zs.nrows())
                .map(|i| {
                    let zi = zs.row(i).transpose();
                    zi.dot(&diff) / (zi.norm() * diff.norm())
                })
                .collect();
            let rel_error = (&observed - &predicted).norm() / predicted.norm();
            Ok(DirectionSample {
                theta,
                m_perp: m.iter().copied().collect(),
                observed: observed.iter().copied().collect(),
                predicted: predicted.iter().copied().collect(),
                cosines,
                delta: theta - b,
                rel_error,
            })
        })
        .collect()
}

/// How a cycle starting on the boundary of `U` meets it again.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitKind {
    /// Enters `U`, then crosses the boundary transversally.
    Crossing,
    /// Enters `U`, then touches the boundary without crossing.
    Tangency,
    /// Leaves `U` right after the start: the first-exit set is empty.
    LeavesImmediately,
    /// Stays in `U` until it closes up.
    NoRecontact,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FirstExit {
    /// `min Theta^U` when the first-exit set is non-empty.
    pub theta: Option<f64>,
    pub kind: ExitKind,
}

/// First positive time at which a cycle with `x~(0)` on the boundary returns
/// to the boundary after running inside `U`, sampled at integrator nodes.
pub fn first_exit(cycle: &Cycle, boundary: &SampledCurve, tol: f64) -> Result<FirstExit> {
    if cycle.dim() != 2 {
        return Err(Error::Dimension { expected: 2, got: cycle.dim() });
    }
    let sd = |t: f64| {
        let x = cycle.at(t);
        let p = [x[0], x[1]];
        let d = boundary.distance(p);
        if boundary.contains(p) {
            d
        } else {
            -d
        }
    };
    let times = cycle.traj.times();
    let last = times.len() - 1;
    let mut i = 1;
    while i < last && sd(times[i]).abs() <= tol {
        i += 1;
    }
    if i >= last {
        return Ok(FirstExit { theta: None, kind: ExitKind::NoRecontact });
    }
    if sd(times[i]) < 0.0 {
        return Ok(FirstExit { theta: None, kind: ExitKind::LeavesImmediately });
    }
    while i < last {
        let (ta, tb) = (times[i], times[i + 1]);
        let vb = sd(tb);
        if vb <= tol && i + 1 < last {
            // bracket the first contact
            let (mut a, mut b) = (ta, tb);
            for _ in 0..80 {
                let m = 0.5 * (a + b);
                if sd(m) > tol {
                    a = m;
                } else {
                    b = m;
                }
            }
            let theta = b;
            // crossing: the curve gets strictly outside before coming back in
            let mut j = i + 1;
            let mut crossed = vb < -tol;
            while !crossed && j < last && sd(times[j]) <= tol {
                crossed = sd(times[j]) < -tol;
                j += 1;
            }
            let kind = if crossed { ExitKind::Crossing } else { ExitKind::Tangency };
            return Ok(FirstExit { theta: Some(theta), kind });
        }
        i += 1;
    }
    Ok(FirstExit { theta: None, kind: ExitKind::NoRecontact })
}

/// Boundary-cycle data for the degree formula: `beta`, first exit and
/// `d(M, (0, min Theta^U))`. Returns `None` when the first-exit set is empty.
pub fn boundary_cycle_entry(
    psys: &PerturbedSystem,
    cycle: &Cycle,
    boundary: &SampledCurve,
    ccfg: &CycleConfig,
    bcfg: &BifConfig,
    cfg: &IntegratorConfig,
) -> Result<Option<BoundaryCycle>> {
    let fe = first_exit(cycle, boundary, 1e-8)?;
    let theta = match fe.theta {
        Some(t) => t,
        None => return Ok(None),
    };
    let frame = periodic_adjoint(&psys.base, cycle, ccfg, cfg)?;
    let md = MonodromyData::from_matrix(frame.y_t.clone(), ccfg.unit_tol)?;
    let sign = if frame.pairing_sign == 0 { 1.0 } else { frame.pairing_sign as f64 };
    let m = |t: f64| sign * malkin_integral(psys, &frame, t, bcfg);
    let deg = degree_1d(&m, 0.0, theta, bcfg.zero_tol)?;
    Ok(Some(BoundaryCycle { beta: md.beta, theta_first_exit: theta, degree_1d_malkin: deg, touches_only: fe.kind != ExitKind::Crossing }))
}

/// Outcome of a multistart search for solutions on both sides of a planar cycle.
#[derive(Clone, Debug)]
pub struct TwoSidedSearch {
    pub solutions: Vec<(PeriodicSolution, SideReport)>,
    pub attempts: usize,
}

impl TwoSidedSearch {
    pub fn inside(&self) -> Option<&(PeriodicSolution, SideReport)> {
        self.solutions.iter().find(|s| s.1.side == Side::Inside && !s.1.indeterminate)
    }

    pub fn outside(&self) -> Option<&(PeriodicSolution, SideReport)> {
        self.solutions.iter().find(|s| s.1.side == Side::Outside && !s.1.indeterminate)
    }

    pub fn found_both(&self) -> bool {
        self.inside().is_some() && self.outside().is_some()
    }

    /// `max_t |x_in(t) - x_out(t)|` of the two sides' solutions.
    pub fn separation(&self) -> Option<f64> {
        let (a, b) = (self.inside()?, self.outside()?);
        let per = a.0.period();
        Some((0..256).map(|i| (a.0.at(per * i as f64 / 256.0) - b.0.at(per * i as f64 / 256.0)).norm()).fold(0.0, f64::max))
    }
}

/// Relative offsets of the multistart policy.
pub const MULTISTART_OFFSETS: [f64; 6] = [-0.02, -0.01, -0.005, 0.005, 0.01, 0.02];

/// Bordered shots from every phase and every radial offset `±{0.5, 1, 2}%` of the
/// cycle scale; converged solutions further apart than `1e-4` of the scale are
/// kept and classified against the cycle. Near-degenerate cycles resolve the
/// phase of a solution only to about `sqrt(tol)`, hence the loose threshold.
pub fn two_sided_search(
    psys: &PerturbedSystem,
    eps: f64,
    cycle: &Cycle,
    phases: &[f64],
    scfg: &ShootConfig,
    cfg: &IntegratorConfig,
) -> Result<TwoSidedSearch> {
    let curve = cycle_curve(cycle, CURVE_SAMPLES)?;
    let samples = cycle.samples(256);
    let c = samples.iter().fold(DVector::zeros(2), |acc, (_, x)| acc + x) / samples.len() as f64;
    let scale = samples.iter().map(|(_, x)| (x - &c).norm()).fold(0.0, f64::max);
    let jobs: Vec<(f64, f64)> = phases.iter().flat_map(|&p| MULTISTART_OFFSETS.iter().map(move |&o| (p, o * scale))).collect();
    let sols: Vec<PeriodicSolution> =
        jobs.par_iter().filter_map(|&(p, v)| bordered_shoot_from(psys, eps, cycle, p, &[v], scfg, cfg).ok()).collect();
    let mut distinct: Vec<(PeriodicSolution, SideReport)> = Vec::new();
    for s in sols {
        let per = s.period();
        let dup = distinct.iter().any(|(d, _)| {
            (0..64).map(|i| (d.at(per * i as f64 / 64.0) - s.at(per * i as f64 / 64.0)).norm()).fold(0.0, f64::max)
                <= (10.0 * scfg.tol).max(1e-4 * scale)
        });
        if !dup {
            let side = classify_side_with(&s, &curve, SOLUTION_SAMPLES)?;
            distinct.push((s, side));
        }
    }
    Ok(TwoSidedSearch { solutions: distinct, attempts: jobs.len() })
}

/// One hypothesis of a theorem-style prediction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub name: String,
    pub passed: bool,
    pub margin: Option<f64>,
    pub detail: Option<String>,
}

impl Hypothesis {
    fn new(name: &str, passed: bool, margin: Option<f64>, detail: impl Into<Option<String>>) -> Self {
        Self { name: name.into(), passed, margin, detail: detail.into() }
    }
}

/// What a passing entry predicts.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Predicted {
    pub phases: Vec<f64>,
    pub min_count: Option<usize>,
    pub sides: Vec<Side>,
    /// Other `T`-periodic solutions stay off the cycle.
    pub no_crossing: bool,
}

/// Verdict of one existence statement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionEntry {
    pub name: String,
    pub statement: String,
    pub hypotheses: Vec<Hypothesis>,
    pub verdict: bool,
    pub conclusion: Option<String>,
    pub predicted: Option<Predicted>,
}

impl PredictionEntry {
    fn new(name: &str, statement: &str, hypotheses: Vec<Hypothesis>, conclusion: String, predicted: Predicted) -> Self {
        let verdict = !hypotheses.is_empty() && hypotheses.iter().all(|h| h.passed);
        Self {
            name: name.into(),
            statement: statement.into(),
            hypotheses,
            verdict,
            conclusion: verdict.then_some(conclusion),
            predicted: verdict.then_some(predicted),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleSummary {
    pub period: f64,
    pub minimal_period: f64,
    pub unit_multiplicity: usize,
    pub pairing_sign: i8,
    pub simple: bool,
    pub condition_c: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionReport {
    pub cycle: CycleSummary,
    pub entries: Vec<PredictionEntry>,
}

impl PredictionReport {
    pub fn entry(&self, name: &str) -> Option<&PredictionEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

/// Inputs of [`predict`] beyond the cycle and frame.
#[derive(Clone)]
pub struct PredictOptions {
    pub grid_points: usize,
    /// `s` samples for `Phi^s` scans.
    pub s_points: usize,
    /// Boundary samples for `Phi^s` scans and the isolation probe.
    pub boundary_points: usize,
    /// Normal offset of the isolation probe.
    pub isolation_offset: f64,
    /// `|P_0(xi) - xi|` above which a probe point is not `T`-periodic.
    pub isolation_tol: f64,
    /// Cycle family `alpha -> initial point` and the member `alpha0`.
    pub family: Option<(CurveFn, f64)>,
    /// Scenario-specific closed-form condition `(label, margin)`; passes when positive.
    pub closed_form_margin: Option<(String, f64)>,
    /// Half-width of the probe box for the symmetry conditions.
    pub probe_box: f64,
}

impl Default for PredictOptions {
    fn default() -> Self {
        Self {
            grid_points: 256,
            s_points: 16,
            boundary_points: 64,
            isolation_offset: 1e-3,
            isolation_tol: 1e-8,
            family: None,
            closed_form_margin: None,
            probe_box: 2.0,
        }
    }
}

impl std::fmt::Debug for PredictOptions {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PredictOptions")
            .field("grid_points", &self.grid_points)
            .field("s_points", &self.s_points)
            .field("boundary_points", &self.boundary_points)
            .field("family", &self.family.as_ref().map(|f| f.1))
            .field("closed_form_margin", &self.closed_form_margin)
            .finish()
    }
}

/// Probe of the isolation hypothesis: no `T`-periodic points at normal
/// offsets `±h` from boundary samples. Returns the smallest `|P_0(xi) - xi|`.
pub fn isolation_probe(psys: &PerturbedSystem, cycle: &Cycle, count: usize, h: f64, cfg: &IntegratorConfig) -> Result<f64> {
    let sys = &psys.base;
    let frame = NormalFrame::new(sys, cycle, 0.0);
    let per = psys.period();
    let jobs: Vec<(f64, f64)> =
        (0..count).flat_map(|i| [(cycle.period * i as f64 / count as f64, h), (cycle.period * i as f64 / count as f64, -h)]).collect();
    let vals: Vec<f64> = jobs
        .par_iter()
        .map(|&(t, o)| -> Result<f64> {
            let nrm = frame.at(sys, cycle, t);
            let xi = cycle.at(t) + nrm.column(0) * o;
            let p = flow_map(sys, per, 0.0, xi.as_slice(), cfg)?;
            Ok((p - xi).norm())
        })
        .collect::<Result<_>>()?;
    Ok(vals.into_iter().fold(f64::INFINITY, f64::min))
}

/// `d(-Phi^T, U)` for the interior `U` of a planar cycle.
pub fn minus_phi_degree(psys: &PerturbedSystem, frame: &AdjointFrame, cycle: &Cycle, samples: usize, bcfg: &BifConfig) -> Result<i32> {
    let per = frame.period;
    let f = |th: f64| -> Result<Point> {
        let v = phi_on_cycle(psys, frame, per, th, bcfg);
        Ok([-v[0], -v[1]])
    };
    let w = winding_number_param(&f, cycle.period, samples, 4096)?;
    Ok(w.value * planar_orientation(cycle) as i32)
}

/// Zeros of `f~(., 0)` and the smallest margin of `|f^(theta0)| - max_s |kappa f~(theta0, s + theta0)|`.
fn decomposition_margin(
    psys: &PerturbedSystem,
    frame: &AdjointFrame,
    zeros: &[f64],
    s_points: usize,
    bcfg: &BifConfig,
) -> Result<(f64, f64)> {
    let pf = frame.planar()?;
    let zh_t = &frame.z_t * &pf.z_hat0;
    let kappa = (&pf.rotation * zh_t)[1] / (&pf.rotation * &frame.z0)[1];
    let mut worst_general = f64::INFINITY;
    let mut worst_fhat = f64::INFINITY;
    for &th in zeros {
        let fh = f_hat(psys, frame, th, bcfg)?.abs();
        let m = (0..=s_points)
            .map(|i| {
                let s = frame.period * i as f64 / s_points as f64;
                (kappa * f_tilde(psys, frame, th, s + th, bcfg)).abs()
            })
            .fold(0.0, f64::max);
        worst_general = worst_general.min(fh - m);
        worst_fhat = worst_fhat.min(fh);
    }
    Ok((worst_general, worst_fhat))
}

fn symmetry_defects(psys: &PerturbedSystem, gs: &crate::system::StateFn, probe_box: f64) -> (f64, f64) {
    let sys = &psys.base;
    let m = 9;
    let mut f_def: f64 = 0.0;
    let mut g_def: f64 = 0.0;
    for i in 0..m {
        for j in 0..m {
            // off-axis lattice
            let a = probe_box * (2.0 * (i as f64 + 0.37) / m as f64 - 1.0);
            let b = probe_box * (2.0 * (j as f64 + 0.61) / m as f64 - 1.0);
            let f = |x: f64, y: f64| sys.f_vec(0.0, &[x, y]);
            let g = |x: f64, y: f64| {
                let mut o = [0.0; 2];
                gs(&[x, y], &mut o);
                o
            };
            let (v, vx, vy) = (f(a, b), f(-a, b), f(a, -b));
            let j0 = sys.jac_matrix(0.0, &[a, b]);
            f_def = f_def
                .max((v[0] - vx[0]).abs())
                .max((v[1] + vx[1]).abs())
                .max((v[0] + vy[0]).abs())
                .max((v[1] - vy[1]).abs())
                .max((j0[(0, 0)] + j0[(1, 1)]).abs());
            let (w, wx, wy) = (g(a, b), g(-a, b), g(a, -b));
            g_def = g_def.max((w[0] + wy[0]).abs()).max((w[1] - wy[1]).abs()).max((w[0] + wx[0]).abs()).max((w[1] - wx[1]).abs());
        }
    }
    (f_def, g_def)
}

/// Hypothesis evaluation for the existence statements applicable to `cycle`.
pub fn predict(
    psys: &PerturbedSystem,
    cycle: &Cycle,
    frame: &AdjointFrame,
    opts: &PredictOptions,
    ccfg: &CycleConfig,
    bcfg: &BifConfig,
    cfg: &IntegratorConfig,
) -> Result<PredictionReport> {
    let sys = &psys.base;
    let per = frame.period;
    let n = psys.dim();
    let simple = frame.unit_multiplicity == 1 && frame.pairing_sign != 0;
    let summary = CycleSummary {
        period: per,
        minimal_period: cycle.minimal_period,
        unit_multiplicity: frame.unit_multiplicity,
        pairing_sign: frame.pairing_sign,
        simple,
        condition_c: frame.condition_c(),
    };
    let mut entries = Vec::new();
    let grid = ThetaGrid::uniform(per, opts.grid_points);
    let m_int = |t: f64| Ok(malkin_integral(psys, frame, t, bcfg));
    let m_samples = sample_scalar(&m_int, &grid, per, bcfg)?;
    let sign_zeros: Vec<f64> = m_samples.sign_change_zeros();
    let h_simple = Hypothesis::new(
        "simple_cycle",
        simple,
        Some(frame.pairing),
        format!("unit multiplier multiplicity {}, pairing sign {}", frame.unit_multiplicity, frame.pairing_sign),
    );

    // sign change of the Malkin function within one minimal period
    {
        let sign = frame.pairing_sign as f64;
        let vals: Vec<f64> = m_samples.values.iter().map(|v| v * sign).collect();
        let pmin = cycle.minimal_period.min(per);
        let w = (pmin / grid.max_spacing).floor() as usize;
        let mut best: Option<(f64, f64, f64)> = None;
        for i in 0..vals.len() {
            for j in i + 1..vals.len().min(i + w + 1) {
                let prod = vals[i] * vals[j];
                if prod < 0.0 && best.map_or(true, |b| prod < b.2) {
                    best = Some((grid.values[i], grid.values[j], prod));
                }
            }
        }
        let h2 = Hypothesis::new(
            "malkin_sign_change",
            simple && best.is_some(),
            best.map(|b| -b.2),
            best.map(|b| format!("M(theta1) M(theta2) < 0 at theta1 = {}, theta2 = {}", b.0, b.1)),
        );
        let phases = best.map(|b| sign_zeros.iter().copied().filter(|z| *z > b.0 && *z < b.1).collect()).unwrap_or_default();
        entries.push(PredictionEntry::new(
            "malkin_sign_change",
            "A sign change of the Malkin function on an interval shorter than the minimal period yields a T-periodic solution converging to the cycle shifted by a zero in that interval.",
            vec![h_simple.clone(), h2],
            "for small eps a T-periodic solution converges to x~(t + theta) with theta a zero between the bracket ends".into(),
            Predicted { phases, min_count: Some(1), ..Default::default() },
        ));
    }

    // strictly monotone zeros
    {
        let monotone: Vec<f64> =
            m_samples.zeros.iter().filter(|z| z.kind == ZeroKind::SignChange && z.monotone).map(|z| z.theta0).collect();
        let h2 = Hypothesis::new(
            "monotone_zero",
            simple && !monotone.is_empty(),
            Some(monotone.len() as f64),
            format!("{} strictly monotone zeros", monotone.len()),
        );
        entries.push(PredictionEntry::new(
            "malkin_monotone_zero",
            "Each zero at which the Malkin function is strictly monotone is the limit phase of a T-periodic solution.",
            vec![h_simple.clone(), h2],
            "one T-periodic solution per listed phase, converging to x~(t + theta0)".into(),
            Predicted { min_count: Some(monotone.len()), phases: monotone, ..Default::default() },
        ));
    }

    // phase formula for sinusoidal forcing
    {
        let mut hyps = vec![h_simple.clone()];
        let mut phases = Vec::new();
        match sinusoidal_decomposition(psys, frame, bcfg) {
            Ok(sd) => {
                hyps.push(Hypothesis::new("m_cos_nonzero", sd.m_cos_nonzero, Some(sd.m_cos.abs()), format!("M_sin = {}, M_cos = {}", sd.m_sin, sd.m_cos)));
                if sd.m_cos_nonzero {
                    phases = predicted_phases(sd.m_sin, sd.m_cos, per, sd.k)?;
                }
            }
            Err(e) => hyps.push(Hypothesis::new("sinusoidal_forcing", false, None, e.to_string())),
        }
        let count = phases.len();
        entries.push(PredictionEntry::new(
            "sinusoidal_phases",
            "For forcing (0, sin(2 pi k t / T) g(x)) with M_cos != 0, each phase (T atan(M_sin/M_cos) + T pi j)/(2 pi k), j = 1..2k, is the limit phase of a T-periodic solution.",
            hyps,
            "2k T-periodic solutions with the listed limit phases".into(),
            Predicted { phases, min_count: Some(count), ..Default::default() },
        ));
    }

    if n == 2 {
        let boundary: Vec<Vec<f64>> =
            (0..opts.boundary_points).map(|i| cycle.at(cycle.period * i as f64 / opts.boundary_points as f64).iter().copied().collect()).collect();
        let s_grid: Vec<f64> = (0..=opts.s_points).map(|i| per * i as f64 / opts.s_points as f64).collect();
        let nd = nondegeneracy_on_cycle(psys, frame, cycle, &boundary, &s_grid, bcfg)?;
        let h_nd = Hypothesis::new(
            "phi_nonvanishing_on_boundary",
            nd.0 > nd.1,
            Some(nd.0),
            format!("min |Phi^s(xi)| over boundary x s grid, threshold {:e}", nd.1),
        );
        let iso = isolation_probe(psys, cycle, opts.boundary_points, opts.isolation_offset, cfg)?;
        let h_iso = Hypothesis::new(
            "isolated_cycle",
            iso > opts.isolation_tol,
            Some(iso),
            format!("min |P_0(xi) - xi| at normal offsets +-{:e}", opts.isolation_offset),
        );
        let deg = minus_phi_degree(psys, frame, cycle, 256, bcfg);
        let h_deg = match &deg {
            Ok(d) => Hypothesis::new("degree_not_one", *d != 1, Some(*d as f64), format!("d(-Phi^T, U) = {d}")),
            Err(e) => Hypothesis::new("degree_not_one", false, None, e.to_string()),
        };
        let two_sided = Predicted { min_count: Some(2), sides: vec![Side::Inside, Side::Outside], no_crossing: true, ..Default::default() };
        entries.push(PredictionEntry::new(
            "two_sided_degree",
            "If Phi^s does not vanish on the cycle, the cycle is isolated among T-periodic cycles and d(-Phi^T, U) != 1, there are two T-periodic solutions, one inside and one outside U, converging to the cycle.",
            vec![h_nd.clone(), h_iso.clone(), h_deg.clone()],
            "two T-periodic solutions, one inside U and one outside; other T-periodic solutions avoid the cycle".into(),
            two_sided.clone(),
        ));

        let h_c = Hypothesis::new(
            "condition_c",
            frame.condition_c(),
            Some(frame.unit_multiplicity as f64),
            "multiplier +1 of algebraic multiplicity 2".to_string(),
        );
        let margins = if frame.condition_c() { Some(decomposition_margin(psys, frame, &sign_zeros, opts.s_points, bcfg)?) } else { None };
        let h_dec = Hypothesis::new(
            "f_hat_dominates",
            margins.map_or(false, |m| m.0 > 0.0) && !sign_zeros.is_empty(),
            margins.map(|m| m.0),
            format!("min over zeros of f~(., 0) of |f^| - max_s |kappa f~(theta0, s + theta0)|; {} zeros", sign_zeros.len()),
        );
        entries.push(PredictionEntry::new(
            "decomposition_no_crossing",
            "Under isolation and condition (C), if |f^(theta0)| > |kappa f~(theta0, s + theta0)| at every zero theta0 of f~(., 0), no T-periodic solution meets the cycle.",
            vec![h_iso.clone(), h_c.clone(), h_dec.clone()],
            "every T-periodic solution stays off the cycle for small eps".into(),
            Predicted { no_crossing: true, ..Default::default() },
        ));
        entries.push(PredictionEntry::new(
            "decomposition_two_sided",
            "Adding d(-Phi^T, U) != 1 to the previous hypotheses gives two T-periodic solutions on opposite sides of the cycle.",
            vec![h_iso.clone(), h_c.clone(), h_dec, h_deg.clone()],
            "two T-periodic solutions, one inside U and one outside".into(),
            two_sided.clone(),
        ));

        // symmetric sinusoidal case
        let mut hyps = vec![h_iso.clone(), h_c.clone()];
        let mut sym = None;
        match &psys.form {
            PerturbationForm::SinState { omega, g_state } => {
                let w = *omega;
                let x0 = cycle.at(0.0);
                let xd0 = sys.f_vec(0.0, x0.as_slice());
                let scale = xd0.norm().max(1.0);
                hyps.push(Hypothesis::new(
                    "minimal_period_matches_forcing",
                    ((cycle.minimal_period - 2.0 * PI / w) / (2.0 * PI / w)).abs() < 1e-6,
                    Some(cycle.minimal_period - 2.0 * PI / w),
                    None,
                ));
                hyps.push(Hypothesis::new(
                    "tangent_horizontal_at_start",
                    xd0[0].abs() > 1e-8 * scale && xd0[1].abs() <= 1e-8 * scale,
                    Some(xd0[1].abs()),
                    format!("x~'(0) = ({}, {})", xd0[0], xd0[1]),
                ));
                hyps.push(Hypothesis::new(
                    "start_on_vertical_axis",
                    x0[0].abs() <= 1e-8 && x0[1].abs() > 1e-8,
                    Some(x0[0].abs()),
                    format!("x~(0) = ({}, {})", x0[0], x0[1]),
                ));
                let (fd, gd) = symmetry_defects(psys, g_state, opts.probe_box);
                hyps.push(Hypothesis::new("field_symmetries", fd <= 1e-9, Some(fd), "largest defect over probe lattice".to_string()));
                hyps.push(Hypothesis::new("forcing_symmetries", gd <= 1e-9, Some(gd), "largest defect over probe lattice".to_string()));
                let q1: Vec<DVector<f64>> = cycle
                    .samples(opts.boundary_points * 4)
                    .into_iter()
                    .map(|(_, x)| x)
                    .filter(|x| x[0] > 1e-6 && x[1] > 1e-6)
                    .collect();
                let axis = cycle.samples(opts.boundary_points * 4).windows(2).any(|w| w[0].1[1] * w[1].1[1] <= 0.0 && w[0].1[0] > 0.0);
                hyps.push(Hypothesis::new("crosses_positive_axis", axis, None, None));
                let fmin = q1.iter().map(|x| {
                    let f = sys.f_vec(0.0, x.as_slice());
                    f[0].min(-f[1])
                });
                let fmin = fmin.fold(f64::INFINITY, f64::min);
                hyps.push(Hypothesis::new("field_signs_first_quadrant", !q1.is_empty() && fmin > 0.0, Some(fmin), None));
                let gmins = q1.iter().fold((f64::INFINITY, f64::INFINITY), |acc, x| {
                    let mut o = [0.0; 2];
                    g_state(x.as_slice(), &mut o);
                    (acc.0.min(o[0]), acc.1.min(o[1]))
                });
                // g_1 > 0 strictly fails for forcing (0, 1); the non-strict form is used
                hyps.push(Hypothesis::new(
                    "forcing_signs_first_quadrant",
                    !q1.is_empty() && gmins.0 >= 0.0 && gmins.1 > 0.0,
                    Some(gmins.0.min(gmins.1)),
                    format!("min g_1 = {}, min g_2 = {} (g_1 >= 0, g_2 > 0)", gmins.0, gmins.1),
                ));
                match symmetry_integrals(psys, frame, bcfg) {
                    Ok(si) => {
                        let r = si.y_hat_1_t.abs() / si.x_dot_1_0;
                        let lhs = si.xi_hat[0].abs() + r * si.xi_tilde[0];
                        let b1 = si.xi_hat[1].abs() - r * si.xi_tilde[1] / 4.0;
                        let rhs = b1.min(si.xi_tilde[0]);
                        hyps.push(Hypothesis::new(
                            "symmetric_inequality",
                            lhs < rhs,
                            Some(rhs - lhs),
                            format!("xi~ = ({}, {}), xi^ = ({}, {}), |y^_1(T)|/x~'_1(0) = {}", si.xi_tilde[0], si.xi_tilde[1], si.xi_hat[0], si.xi_hat[1], r),
                        ));
                        sym = Some(si);
                    }
                    Err(e) => hyps.push(Hypothesis::new("symmetric_inequality", false, None, e.to_string())),
                }
                if let Some((label, m)) = &opts.closed_form_margin {
                    hyps.push(Hypothesis::new("closed_form_margin", *m > 0.0, Some(*m), label.clone()));
                }
            }
            _ => hyps.push(Hypothesis::new("sinusoidal_state_forcing", false, None, "forcing is not sin(w t) g(x)".to_string())),
        }
        entries.push(PredictionEntry::new(
            "symmetric_two_sided",
            "For a symmetric planar system with forcing sin(w t) g(x) and a cycle of least period 2 pi / w, the xi~/xi^ inequality gives two solutions on opposite sides of the cycle.",
            hyps,
            "two 2 pi / w-periodic solutions, one inside and one outside; others avoid the cycle".into(),
            two_sided.clone(),
        ));

        // degenerate cycles
        let deg_rep = match &opts.family {
            Some((fam, a0)) => {
                let f = fam.clone();
                Some(degeneracy_report(sys, &move |a| f(a), *a0, ccfg, cfg)?)
            }
            None => None,
        };
        let n2 = DMatrix::<f64>::identity(2, 2);
        let defect = (&frame.y_t - &n2).norm();
        let degenerate = match &deg_rep {
            Some(r) => r.degenerate,
            None => defect <= ccfg.unit_tol * 10.0,
        };
        let h_degen = Hypothesis::new(
            "degenerate_cycle",
            degenerate,
            Some(deg_rep.as_ref().map_or(defect, |r| r.t_prime)),
            match &deg_rep {
                Some(r) => format!("T'(alpha0) = {:e}, |Y_T - I| = {:e}", r.t_prime, r.monodromy_defect),
                None => format!("|Y_T - I| = {defect:e}"),
            },
        );
        entries.push(PredictionEntry::new(
            "degenerate_periodic_variations",
            "On a degenerate family member every solution of the linearized system is T-periodic.",
            vec![h_degen.clone()],
            "Y(T) = I".into(),
            Predicted::default(),
        ));
        let h_fhat = Hypothesis::new(
            "f_hat_nonzero_at_zeros",
            margins.map_or(false, |m| m.1 > bcfg.zero_tol.max(1e-8)) && !sign_zeros.is_empty(),
            margins.map(|m| m.1),
            format!("min |f^(theta0)| over {} zeros of f~(., 0)", sign_zeros.len()),
        );
        entries.push(PredictionEntry::new(
            "degenerate_no_crossing",
            "Under isolation and condition (C), on a degenerate cycle f^ != 0 at the zeros of f~(., 0) keeps T-periodic solutions off the cycle.",
            vec![h_iso.clone(), h_c.clone(), h_degen.clone(), h_fhat.clone()],
            "every T-periodic solution stays off the cycle for small eps".into(),
            Predicted { no_crossing: true, ..Default::default() },
        ));
        entries.push(PredictionEntry::new(
            "degenerate_two_sided",
            "Adding d(-Phi^T, U) != 1 gives two T-periodic solutions on opposite sides of the degenerate cycle.",
            vec![h_iso.clone(), h_c.clone(), h_degen.clone(), h_fhat, h_deg.clone()],
            "two T-periodic solutions, one inside U and one outside".into(),
            two_sided.clone(),
        ));
        let mut hyps = vec![h_iso, h_c, h_degen];
        match &sym {
            Some(si) => {
                let rhs = si.xi_hat[1].abs().min(si.xi_tilde[0].abs());
                hyps.push(Hypothesis::new(
                    "degenerate_symmetric_inequality",
                    si.xi_hat[0].abs() < rhs,
                    Some(rhs - si.xi_hat[0].abs()),
                    format!("|xi^_1| < min(|xi^_2|, xi~_1): {} < {}", si.xi_hat[0].abs(), rhs),
                ));
            }
            None => hyps.push(Hypothesis::new("degenerate_symmetric_inequality", false, None, "symmetric integrals unavailable".to_string())),
        }
        entries.push(PredictionEntry::new(
            "degenerate_symmetric_two_sided",
            "For a degenerate symmetric cycle, |xi^_1| < min(|xi^_2|, xi~_1) gives two solutions on opposite sides.",
            hyps,
            "two 2 pi / w-periodic solutions, one inside and one outside; others avoid the cycle".into(),
            two_sided,
        ));
    }
    Ok(PredictionReport { cycle: summary, entries })
}

/// `(min |Phi^s(xi)|, threshold)` over boundary samples and `s` grid, via the
/// cycle frame when the boundary is the cycle itself.
fn nondegeneracy_on_cycle(
    psys: &PerturbedSystem,
    frame: &AdjointFrame,
    cycle: &Cycle,
    boundary: &[Vec<f64>],
    s_grid: &[f64],
    bcfg: &BifConfig,
) -> Result<(f64, f64)> {
    let m = boundary.len();
    let jobs: Vec<(usize, f64)> = (0..m).flat_map(|i| s_grid.iter().map(move |&s| (i, s))).collect();
    let norms: Vec<f64> = jobs
        .par_iter()
        .map(|&(i, s)| phi_on_cycle(psys, frame, s, cycle.period * i as f64 / m as f64, bcfg).norm())
        .collect();
    let mut sorted = norms.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = sorted[sorted.len() / 2];
    Ok((sorted[0], 1e-4 * median))
}

/// Scenario-independent wrapper: the Malkin-integral zeros used as multistart phases.
pub fn multistart_phases(psys: &PerturbedSystem, frame: &AdjointFrame, bcfg: &BifConfig) -> Result<Vec<f64>> {
    let per = frame.period;
    let f = |t: f64| Ok(malkin_integral(psys, frame, t, bcfg));
    let grid = ThetaGrid::uniform(per, bcfg.grid_points);
    let s = sample_scalar(&f, &grid, per, bcfg)?;
    let z = find_zeros(&f, &grid, &s.values, per, bcfg)?;
    Ok(z.into_iter().filter(|z| z.kind == ZeroKind::SignChange).map(|z| z.theta0).collect())
}

/// Shared handle type for closed-form families.
pub type Family = (Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>, f64);

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::make_scenario;
    use serde_json::json;

    #[test]
    fn shoot_returns_equilibrium_at_zero_eps() {
        let sc = make_scenario("predator_prey", &json!({})).unwrap();
        let cfg = IntegratorConfig::default();
        let eq = sc.inner_equilibria[0].clone();
        let s = shoot(&sc.psys, 0.0, &eq, &ShootConfig::default(), &cfg).unwrap();
        assert_eq!(s.newton_iters, 0);
        assert!(s.residual < 1e-9);
        assert!((s.x0.clone() - DVector::from_vec(eq)).norm() == 0.0);
    }

    #[test]
    fn bordered_shoot_at_zero_eps_returns_cycle_point() {
        let sc = make_scenario("greenspan_holmes", &json!({})).unwrap();
        let cfg = IntegratorConfig::default();
        let c = sc.reference_cycle(&cfg).unwrap();
        let s = bordered_shoot(&sc.psys, 0.0, &c, 1.3, &ShootConfig::default(), &cfg).unwrap();
        assert!((s.x0 - c.at(1.3)).norm() < 1e-14);
        assert_eq!(s.phase, Some(1.3));
    }

    #[test]
    fn synthetic_power_laws() {
        let eps = [1e-2, 3e-3, 1e-3, 3e-4, 1e-4];
        let d: Vec<f64> = eps.iter().map(|e| 3.0 * e).collect();
        let r = fit_power_law(&eps, &d).unwrap();
        assert!((r.slope - 1.0).abs() < 1e-6 && r.r2 > 0.9999);
        let d: Vec<f64> = eps.iter().map(|e| e * e).collect();
        let r = fit_power_law(&eps, &d).unwrap();
        assert!((r.slope - 2.0).abs() < 1e-6);
        let d = [1e-3, 3e-4, 1e-4, 1e-14, 0.0];
        let r = fit_power_law(&eps, &d).unwrap();
        assert!(r.flagged && r.used == 3);
        assert!(fit_power_law(&eps[..3], &d[..3]).is_err());
    }

    #[test]
    fn side_of_scaled_circles() {
        let curve = SampledCurve::circle([0.0, 0.0], 1.0, 2048);
        let ring = |r: f64| -> Vec<Point> { (0..500).map(|i| 2.0 * PI * i as f64 / 500.0).map(|a| [r * a.cos(), r * a.sin()]).collect() };
        assert_eq!(classify_points(&ring(0.9), &curve).side, Side::Inside);
        assert_eq!(classify_points(&ring(1.1), &curve).side, Side::Outside);
        let mut mixed = ring(0.9);
        mixed.extend(ring(1.1));
        assert_eq!(classify_points(&mixed, &curve).side, Side::Crossing);
        assert!(classify_points(&[[1.0, 0.0]], &curve).indeterminate);
    }

    #[test]
    fn golden_section_finds_minimum() {
        let (x, v) = golden_min(|t| (t - 0.3).powi(2) + 1.0, -1.0, 2.0, 1e-10);
        // flat minimum: the argmin is only resolved to about sqrt(machine eps)
        assert!((x - 0.3).abs() < 1e-7 && (v - 1.0).abs() < 1e-14);
    }

    #[test]
    fn first_exit_on_shifted_circle() {
        // unit circle from (1, 0) against the unit disk centred at (1, 1): inside
        // while cos t + sin t > 1, leaving transversally at t = pi / 2.
        let sys = OdeSystem::new("rot", 2, 2.0 * PI, true, |_, x, o| {
            o[0] = -x[1];
            o[1] = x[0];
        });
        let cfg = IntegratorConfig::default();
        let c = Cycle::from_point(&sys, &[1.0, 0.0], 2.0 * PI, 2.0 * PI, &cfg).unwrap();
        let b = SampledCurve::circle([1.0, 1.0], 1.0, 4096);
        let fe = first_exit(&c, &b, 1e-8).unwrap();
        assert_eq!(fe.kind, ExitKind::Crossing);
        assert!((fe.theta.unwrap() - PI / 2.0).abs() < 1e-5);
        let b = SampledCurve::circle([1.0, -1.0], 1.0, 4096);
        assert_eq!(first_exit(&c, &b, 1e-8).unwrap().kind, ExitKind::LeavesImmediately);
    }
}

//! Topological degree in one and two dimensions: interval degree, winding
//! numbers of planar fields on sampled Jordan curves, regular-zero sums,
//! the assembled boundary-cycle formula and the two-zero certificate.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::biffun::{find_zeros, BifConfig, ThetaGrid, ZeroKind};
use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Closed polygon with last point equal to the first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledCurve {
    pub points: Vec<Point>,
    /// +1 counterclockwise, −1 clockwise.
    pub orientation: i8,
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn segments_intersect(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d1 = cross(q1, q2, p1);
    let d2 = cross(q1, q2, p2);
    let d3 = cross(p1, p2, q1);
    let d4 = cross(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    let on = |a: Point, b: Point, p: Point, d: f64| {
        d == 0.0 && p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
    };
    on(q1, q2, p1, d1) || on(q1, q2, p2, d2) || on(p1, p2, q1, d3) || on(p1, p2, q2, d4)
}

impl SampledCurve {
    /// Close the polygon (appending the first point when the last differs by
    /// more than `closure_tol`), check simplicity and record the orientation.
    pub fn new(mut points: Vec<Point>, closure_tol: f64) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::InvalidInput("curve needs at least 3 points".into()));
        }
        let (f, l) = (points[0], *points.last().unwrap());
        if ((f[0] - l[0]).powi(2) + (f[1] - l[1]).powi(2)).sqrt() > closure_tol {
            points.push(f);
        } else {
            *points.last_mut().unwrap() = f;
        }
        if points.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(Error::InvalidInput("non-finite curve point".into()));
        }
        let area = signed_area(&points);
        if area == 0.0 {
            return Err(Error::InvalidInput("curve encloses zero area".into()));
        }
        let c = Self { points, orientation: if area > 0.0 { 1 } else { -1 } };
        if !c.is_simple() {
            return Err(Error::InvalidInput("curve self-intersects".into()));
        }
        Ok(c)
    }

    /// Counterclockwise circle with `n` distinct samples.
    pub fn circle(center: Point, radius: f64, n: usize) -> Self {
        let pts: Vec<Point> = (0..=n)
            .map(|i| {
                let a = 2.0 * PI * (i % n) as f64 / n as f64;
                [center[0] + radius * a.cos(), center[1] + radius * a.sin()]
            })
            .collect();
        Self { points: pts, orientation: 1 }
    }

    /// Number of segments.
    pub fn segments(&self) -> usize {
        self.points.len() - 1
    }

    pub fn reversed(&self) -> Self {
        let mut p = self.points.clone();
        p.reverse();
        Self { points: p, orientation: -self.orientation }
    }

    pub fn signed_area(&self) -> f64 {
        signed_area(&self.points)
    }

    /// No two non-adjacent segments intersect.
    pub fn is_simple(&self) -> bool {
        let m = self.segments();
        for i in 0..m {
            for j in i + 2..m {
                if i == 0 && j == m - 1 {
                    continue;
                }
                if segments_intersect(self.points[i], self.points[i + 1], self.points[j], self.points[j + 1]) {
                    return false;
                }
            }
        }
        true
    }

    /// Even–odd point-in-polygon test.
    pub fn contains(&self, p: Point) -> bool {
        let mut inside = false;
        for w in self.points.windows(2) {
            let (a, b) = (w[0], w[1]);
            if (a[1] > p[1]) != (b[1] > p[1]) {
                let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
                if p[0] < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Euclidean distance from `p` to the polygon.
    pub fn distance(&self, p: Point) -> f64 {
        self.points
            .windows(2)
            .map(|w| {
                let (a, b) = (w[0], w[1]);
                let d = [b[0] - a[0], b[1] - a[1]];
                let l2 = d[0] * d[0] + d[1] * d[1];
                let t = if l2 > 0.0 { (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / l2).clamp(0.0, 1.0) } else { 0.0 };
                ((a[0] + t * d[0] - p[0]).powi(2) + (a[1] + t * d[1] - p[1]).powi(2)).sqrt()
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Parse CSV rows `x,y` (an optional non-numeric header is skipped); closed implicitly.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut pts = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            let parsed: std::result::Result<Vec<f64>, _> = cols.iter().map(|c| c.parse::<f64>()).collect();
            match parsed {
                Ok(v) if v.len() == 2 => pts.push([v[0], v[1]]),
                _ if i == 0 => continue,
                _ => return Err(Error::InvalidInput(format!("curve CSV line {}: expected `x,y`", i + 1))),
            }
        }
        Self::new(pts, 1e-12)
    }
}

fn signed_area(p: &[Point]) -> f64 {
    0.5 * p.windows(2).map(|w| w[0][0] * w[1][1] - w[1][0] * w[0][1]).sum::<f64>()
}

/// Winding number with diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegreeResult {
    pub value: i32,
    pub min_field_norm: f64,
    /// Every angle increment below π/2 and no degenerate field value.
    pub reliable: bool,
    /// Field evaluations used, including refinement.
    pub evaluations: usize,
}

/// `(sign M(b) − sign M(a)) / 2`; `tol` is the zero tolerance at the endpoints.
pub fn degree_1d(m: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<i32> {
    let (ma, mb) = (m(a), m(b));
    if ma.abs() <= tol {
        return Err(Error::DegreeUndefinedAtBoundary { at: a, value: ma });
    }
    if mb.abs() <= tol {
        return Err(Error::DegreeUndefinedAtBoundary { at: b, value: mb });
    }
    Ok(((mb.signum() - ma.signum()) / 2.0) as i32)
}

fn wrap_angle(d: f64) -> f64 {
    let mut d = d % (2.0 * PI);
    if d > PI {
        d -= 2.0 * PI;
    } else if d <= -PI {
        d += 2.0 * PI;
    }
    d
}

fn angle_between(a: Point, b: Point) -> f64 {
    wrap_angle(b[1].atan2(b[0]) - a[1].atan2(a[0]))
}

/// Winding of `path(u)` for `u` in `[u0, u1]` given initial samples at `us`,
/// bisecting intervals whose angle increment reaches π/2.
fn wind_along(path: &dyn Fn(f64) -> Result<Point>, us: &[f64], budget: usize) -> Result<DegreeResult> {
    let vals: Vec<Point> = us.iter().map(|&u| path(u)).collect::<Result<_>>()?;
    let norms: Vec<f64> = vals.iter().map(|v| v[0].hypot(v[1])).collect();
    let mut sorted = norms.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = sorted[sorted.len() / 2];
    let threshold = 1e-3 * median;
    for (i, n) in norms.iter().enumerate() {
        if !(*n > threshold) {
            return Err(Error::FieldDegenerate { index: i, norm: *n });
        }
    }
    let mut evaluations = vals.len();
    let mut min_norm = sorted[0];
    let mut reliable = true;
    let mut total = 0.0;
    let mut budget_left = budget;
    for i in 0..us.len() - 1 {
        // depth-first refinement of [us[i], us[i+1]]
        let mut stack = vec![(us[i], vals[i], us[i + 1], vals[i + 1], 0u32)];
        while let Some((ua, va, ub, vb, depth)) = stack.pop() {
            let d = angle_between(va, vb);
            if d.abs() < PI / 2.0 {
                total += d;
                continue;
            }
            if budget_left == 0 || depth > 50 {
                reliable = false;
                total += d;
                continue;
            }
            budget_left -= 1;
            let um = 0.5 * (ua + ub);
            let vm = path(um)?;
            evaluations += 1;
            let nm = vm[0].hypot(vm[1]);
            if !(nm > threshold) {
                return Err(Error::FieldDegenerate { index: i, norm: nm });
            }
            min_norm = min_norm.min(nm);
            // push right half first so the left half is processed first
            stack.push((um, vm, ub, vb, depth + 1));
            stack.push((ua, va, um, vm, depth + 1));
        }
    }
    Ok(DegreeResult { value: (total / (2.0 * PI)).round() as i32, min_field_norm: min_norm, reliable, evaluations })
}

/// Winding number of `f` along `curve` in its traversal order; segments of the
/// polygon are bisected until every angle increment is below π/2.
pub fn winding_number(f: &dyn Fn(Point) -> Result<Point>, curve: &SampledCurve, refine_budget: usize) -> Result<DegreeResult> {
    let m = curve.segments();
    let us: Vec<f64> = (0..=m).map(|i| i as f64).collect();
    let pts = &curve.points;
    let path = |u: f64| {
        let i = (u.floor() as usize).min(m - 1);
        let t = u - i as f64;
        let p = [pts[i][0] + t * (pts[i + 1][0] - pts[i][0]), pts[i][1] + t * (pts[i + 1][1] - pts[i][1])];
        f(p)
    };
    wind_along(&path, &us, refine_budget)
}

/// `d(f, U)` for the region bounded by `curve`: the winding number taken counterclockwise.
pub fn degree_on_region(f: &dyn Fn(Point) -> Result<Point>, curve: &SampledCurve, refine_budget: usize) -> Result<DegreeResult> {
    let mut r = winding_number(f, curve, refine_budget)?;
    r.value *= curve.orientation as i32;
    Ok(r)
}

/// Winding number of a field given along a parametrized closed curve
/// `theta -> field(gamma(theta))` for `theta` in `[0, period]`, refined in `theta`.
pub fn winding_number_param(
    field_at: &dyn Fn(f64) -> Result<Point>,
    period: f64,
    samples: usize,
    refine_budget: usize,
) -> Result<DegreeResult> {
    let n = samples.max(4);
    let us: Vec<f64> = (0..=n).map(|i| period * i as f64 / n as f64).collect();
    wind_along(field_at, &us, refine_budget)
}

/// Sum of `sign det J` over the given zeros.
pub fn brouwer_degree_regular(jac: &dyn Fn(&[f64]) -> DMatrix<f64>, zeros: &[Vec<f64>], sing_tol: f64) -> Result<i32> {
    let mut d = 0;
    for (i, z) in zeros.iter().enumerate() {
        let j = jac(z);
        let det = j.determinant();
        let scale = j.norm().max(1e-300).powi(j.nrows() as i32);
        if det.abs() <= sing_tol * scale {
            return Err(Error::SingularZero { index: i });
        }
        d += if det > 0.0 { 1 } else { -1 };
    }
    Ok(d)
}

/// Contribution data for one cycle on the boundary of `U`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCycle {
    pub beta: usize,
    pub theta_first_exit: f64,
    pub degree_1d_malkin: i32,
    pub touches_only: bool,
}

/// `(−1)^n d(f, U) − Σ (−1)^β d(M, (0, min Θ^U))` over the non-tangential cycles.
pub fn assemble_degree_1_60(n: usize, deg_f_u: i32, boundary_cycles: &[BoundaryCycle]) -> i32 {
    let sgn = |k: usize| if k % 2 == 0 { 1 } else { -1 };
    let mut d = sgn(n) * deg_f_u;
    for c in boundary_cycles.iter().filter(|c| !c.touches_only) {
        d -= sgn(c.beta) * c.degree_1d_malkin;
    }
    d
}

/// Outcome of the two-zero certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BorsukCertificate {
    pub holds: bool,
    /// Condition 1: `<z, x~'>` keeps a strict sign.
    pub directing_transversal: bool,
    /// Sign-change zeros of `<F(x~(θ)), z(θ)>`.
    pub zeros: Vec<f64>,
    /// Condition 3 at the two zeros.
    pub opposite_orthogonal_signs: bool,
    /// `Some([0, 2])` when the certificate holds.
    pub certified_degree_set: Option<[i32; 2]>,
    /// `d(F, U)` from the winding number, when computed.
    pub degree: Option<i32>,
    pub degree_in_set: Option<bool>,
    pub failure: Option<String>,
}

/// Check conditions 1)–3) of the two-zero lemma for `F` on a Jordan curve
/// `x~(θ)`, `θ ∈ [0, period]`, with tangent `xdot` and directing function `z`.
/// `orientation` is +1 when increasing `θ` runs counterclockwise.
pub fn borsuk_two_zero_certificate(
    f: &(dyn Fn(f64) -> Result<Point> + Sync),
    xdot: &dyn Fn(f64) -> Point,
    z: &(dyn Fn(f64) -> Point + Sync),
    period: f64,
    orientation: i8,
    grid_points: usize,
) -> Result<BorsukCertificate> {
    let grid = ThetaGrid::uniform(period, grid_points);
    let mut cert = BorsukCertificate {
        holds: false,
        directing_transversal: false,
        zeros: Vec::new(),
        opposite_orthogonal_signs: false,
        certified_degree_set: None,
        degree: None,
        degree_in_set: None,
        failure: None,
    };
    let c1: Vec<f64> = grid
        .values
        .iter()
        .map(|&t| {
            let (a, b) = (z(t), xdot(t));
            a[0] * b[0] + a[1] * b[1]
        })
        .collect();
    let scale = c1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    cert.directing_transversal = scale > 0.0 && (c1.iter().all(|v| *v > 1e-9 * scale) || c1.iter().all(|v| *v < -1e-9 * scale));
    if !cert.directing_transversal {
        cert.failure = Some("condition 1: <z, x~'> vanishes on the curve".into());
        return Ok(cert);
    }
    let pairing = |t: f64| -> Result<f64> {
        let (a, b) = (f(t)?, z(t));
        Ok(a[0] * b[0] + a[1] * b[1])
    };
    let values: Vec<f64> = grid.values.iter().map(|&t| pairing(t)).collect::<Result<_>>()?;
    let zeros = find_zeros(&pairing, &grid, &values, period, &BifConfig::default())?;
    if zeros.iter().any(|z| z.kind == ZeroKind::TangencySuspect) {
        cert.failure = Some("condition 2: zero without strict sign change".into());
        cert.zeros = zeros.iter().map(|z| z.theta0).collect();
        return Ok(cert);
    }
    cert.zeros = zeros.iter().map(|z| z.theta0).collect();
    if cert.zeros.len() != 2 {
        cert.failure = Some(format!("condition 2: {} sign-change zeros, expected 2", cert.zeros.len()));
        return Ok(cert);
    }
    let orth = |t: f64| -> Result<f64> {
        let (a, b) = (f(t)?, z(t));
        Ok(a[0] * b[1] - a[1] * b[0])
    };
    let (o1, o2) = (orth(cert.zeros[0])?, orth(cert.zeros[1])?);
    cert.opposite_orthogonal_signs = o1 * o2 < 0.0;
    if !cert.opposite_orthogonal_signs {
        cert.failure = Some("condition 3: orthogonal pairings have equal signs".into());
        return Ok(cert);
    }
    cert.holds = true;
    cert.certified_degree_set = Some([0, 2]);
    let w = winding_number_param(f, period, grid_points, 10_000)?;
    let d = w.value * orientation as i32;
    cert.degree = Some(d);
    cert.degree_in_set = Some(d == 0 || d == 2);
    Ok(cert)
}

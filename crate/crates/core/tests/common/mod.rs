//! Scenario fixtures and invariant checks shared by the property and acceptance suites.
#![allow(dead_code)]

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use pertorb::biffun::{malkin, malkin_integral, melnikov, phi_on_cycle, BifConfig};
use pertorb::cycles::{periodic_adjoint, AdjointFrame, Cycle, CycleConfig};
use pertorb::degree::{degree_on_region, winding_number, Point, SampledCurve};
use pertorb::flow::{flow_map, variational_matrix};
use pertorb::systems::{make_scenario, Scenario, SCENARIOS};
use pertorb::IntegratorConfig;
use serde_json::Value;

pub type Check = Result<(), String>;

pub struct Fixture {
    pub sc: Scenario,
    pub cycle: Cycle,
    pub frame: AdjointFrame,
}

/// One fixture per built-in scenario with default parameters, built once per test binary.
pub fn fixtures() -> &'static [Fixture] {
    static F: OnceLock<Vec<Fixture>> = OnceLock::new();
    F.get_or_init(|| {
        let cfg = IntegratorConfig::default();
        SCENARIOS
            .iter()
            .map(|name| {
                let sc = make_scenario(name, &Value::Null).unwrap();
                let cycle = sc.reference_cycle(&cfg).unwrap();
                let frame = periodic_adjoint(sc.system(), &cycle, &CycleConfig::default(), &cfg).unwrap();
                Fixture { sc, cycle, frame }
            })
            .collect()
    })
}

/// The cycle point at phase `u * T` shifted by `(dx, dy)`.
pub fn near_cycle(fx: &Fixture, u: f64, dx: f64, dy: f64) -> Vec<f64> {
    let mut p = fx.cycle.at(u * fx.cycle.period);
    p[0] += dx;
    p[1] += dy;
    p.iter().copied().collect()
}

fn rel_close(a: &DVector<f64>, b: &DVector<f64>, tol: f64) -> bool {
    (a - b).norm() <= tol * (1.0 + a.norm().max(b.norm()))
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Check {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

/// `Omega(t2, t1, Omega(t1, t0, x)) = Omega(t2, t0, x)` and `Omega(t0, t1, Omega(t1, t0, x)) = x`.
pub fn flow_group(fx: &Fixture, x: &[f64], t0: f64, s1: f64, s2: f64, eps: f64) -> Check {
    let cfg = IntegratorConfig::default();
    let field = fx.sc.psys.at(eps);
    let (t1, t2) = (t0 + s1, t0 + s1 + s2);
    let e = |r: pertorb::Result<DVector<f64>>| r.map_err(|e| e.to_string());
    let a = e(flow_map(&field, t1, t0, x, &cfg))?;
    let b = e(flow_map(&field, t2, t1, a.as_slice(), &cfg))?;
    let direct = e(flow_map(&field, t2, t0, x, &cfg))?;
    ensure(rel_close(&b, &direct, 1e-7), || format!("group law: {b} vs {direct}"))?;
    let back = e(flow_map(&field, t0, t1, a.as_slice(), &cfg))?;
    let x = DVector::from_column_slice(x);
    ensure(rel_close(&back, &x, 1e-7), || format!("inverse: {back} vs {x}"))
}

/// Variational matrix against central differences of the flow.
pub fn variational_vs_fd(fx: &Fixture, x: &[f64], t: f64, eps: f64) -> Check {
    let cfg = IntegratorConfig::default();
    let field = fx.sc.psys.at(eps);
    let y = variational_matrix(&field, t, 0.0, x, &cfg).map_err(|e| e.to_string())?;
    let n = x.len();
    // tighter tolerances keep the difference quotient smooth across kinks of g
    let fine = IntegratorConfig { rel_tol: 1e-13, abs_tol: 1e-15, ..cfg };
    let h = 1e-4;
    let mut fd = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut p = x.to_vec();
        let mut m = x.to_vec();
        p[j] += h;
        m[j] -= h;
        let fp = flow_map(&field, t, 0.0, &p, &fine).map_err(|e| e.to_string())?;
        let fm = flow_map(&field, t, 0.0, &m, &fine).map_err(|e| e.to_string())?;
        fd.set_column(j, &((fp - fm) / (2.0 * h)));
    }
    ensure((&y - &fd).norm() <= 1e-5 * (1.0 + y.norm()), || format!("Y {y} vs FD {fd}"))
}

/// `<Y(t) y0, Z(t) z0> = <y0, z0>` for any `t`.
pub fn perron_pairing(fx: &Fixture, t: f64, y0: [f64; 2], z0: [f64; 2]) -> Check {
    let y0 = DVector::from_column_slice(&y0);
    let z0 = DVector::from_column_slice(&z0);
    let now = fx.frame.variational(t, &y0).dot(&fx.frame.adjoint(t, &z0));
    let start = y0.dot(&z0);
    ensure((now - start).abs() <= 1e-7 * (1.0 + y0.norm() * z0.norm()), || format!("{now} vs {start}"))
}

/// Malkin integral, Melnikov function and `Phi^s(x~(theta))` repeat after one period in `theta`.
pub fn theta_periodicity(fx: &Fixture, theta: f64, s_frac: f64) -> Check {
    let b = BifConfig::default();
    let per = fx.frame.period;
    let psys = &fx.sc.psys;
    let m0 = malkin_integral(psys, &fx.frame, theta, &b);
    let m1 = malkin_integral(psys, &fx.frame, theta + per, &b);
    ensure((m0 - m1).abs() <= 1e-8 * (1.0 + m0.abs()), || format!("Malkin {m0} vs {m1}"))?;
    let n0 = melnikov(psys, &fx.cycle, theta, &b).map_err(|e| e.to_string())?;
    let n1 = melnikov(psys, &fx.cycle, theta + per, &b).map_err(|e| e.to_string())?;
    ensure((n0 - n1).abs() <= 1e-8 * (1.0 + n0.abs()), || format!("Melnikov {n0} vs {n1}"))?;
    let s = s_frac * per;
    let p0 = phi_on_cycle(psys, &fx.frame, s, theta, &b);
    let p1 = phi_on_cycle(psys, &fx.frame, s, theta + per, &b);
    ensure(rel_close(&p0, &p1, 1e-7), || format!("Phi {p0} vs {p1}"))
}

/// Scaling the periodic adjoint by `c` scales the integral by `c` and leaves the signed Malkin function's sign alone.
pub fn adjoint_rescaling(fx: &Fixture, c: f64) -> Check {
    let b = BifConfig::default();
    let mut scaled = fx.frame.clone();
    scaled.z0 *= c;
    scaled.pairing *= c;
    if c < 0.0 {
        scaled.pairing_sign = -scaled.pairing_sign;
    }
    let per = fx.frame.period;
    let psys = &fx.sc.psys;
    for i in 0..16 {
        let th = per * i as f64 / 16.0;
        let a = malkin_integral(psys, &fx.frame, th, &b);
        let s = malkin_integral(psys, &scaled, th, &b);
        ensure((s - c * a).abs() <= 1e-9 * (1.0 + a.abs() * c.abs()), || format!("unsigned {s} vs {c} * {a}"))?;
        if fx.frame.pairing_sign != 0 {
            let ma = malkin(psys, &fx.frame, th, &b).map_err(|e| e.to_string())?;
            let ms = malkin(psys, &scaled, th, &b).map_err(|e| e.to_string())?;
            ensure(ma.abs() < 1e-9 || ma.signum() == ms.signum(), || format!("sign of M changed at {th}: {ma} vs {ms}"))?;
        }
    }
    Ok(())
}

pub fn poly_field(c: [f64; 6]) -> impl Fn(Point) -> pertorb::Result<Point> {
    move |p: Point| {
        let [x, y] = p;
        Ok([c[0] + c[1] * x + c[2] * y + x * x - y * y, c[3] + c[4] * x + c[5] * y + 2.0 * x * y])
    }
}

/// Reversal negates the winding number; positive scaling and negation of a planar field keep it.
/// Returns `Ok(false)` when the field nearly vanishes on the circle and the case is skipped.
pub fn winding_invariances(c: [f64; 6], center: Point, r: f64, lam: f64) -> Result<bool, String> {
    let f = poly_field(c);
    let curve = SampledCurve::circle(center, r, 128);
    let base = match winding_number(&f, &curve, 4096) {
        Ok(d) if d.reliable && d.min_field_norm > 1e-3 => d,
        _ => return Ok(false),
    };
    let w = |g: &dyn Fn(Point) -> pertorb::Result<Point>, cv: &SampledCurve| winding_number(g, cv, 4096).map(|d| d.value).map_err(|e| e.to_string());
    let rev = w(&f, &curve.reversed())?;
    ensure(rev == -base.value, || format!("reversed {rev} vs {}", base.value))?;
    let region = degree_on_region(&f, &curve, 4096).map_err(|e| e.to_string())?.value;
    let region_rev = degree_on_region(&f, &curve.reversed(), 4096).map_err(|e| e.to_string())?.value;
    ensure(region == region_rev, || format!("region degree depends on traversal: {region} vs {region_rev}"))?;
    let scaled = |p: Point| f(p).map(|v| [lam * v[0], lam * v[1]]);
    let sv = w(&scaled, &curve)?;
    ensure(sv == base.value, || format!("scaled by {lam}: {sv} vs {}", base.value))?;
    let neg = |p: Point| f(p).map(|v| [-v[0], -v[1]]);
    let nv = w(&neg, &curve)?;
    ensure(nv == base.value, || format!("negated: {nv} vs {}", base.value))?;
    ensure((0..=2).contains(&region), || format!("degree {region} of a quadratic map"))?;
    Ok(true)
}

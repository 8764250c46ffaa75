//! Built-in example systems with analytic Jacobians and closed-form oracles.
//!
//! `x⁺ = max(x, 0)` and `x⁻ = max(-x, 0)`; this is the convention under which
//! the linear oscillator's averaged field is
//! `(π/2)(−μ+ν−2 sin θ)(cos θ, −sin θ) + π cos θ (sin θ, cos θ)`.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::cycles::{find_cycle, Cycle, CycleConfig, FindCycleOptions};
use crate::error::{Error, Result};
use crate::integrate::{flow_end, IntegratorConfig};
use crate::system::{OdeSystem, PerturbedSystem};

pub type CurveFn = Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>;
pub type PhiFn = Arc<dyn Fn(f64, f64) -> [f64; 2] + Send + Sync>;

pub fn pos(x: f64) -> f64 {
    x.max(0.0)
}

pub fn neg(x: f64) -> f64 {
    (-x).max(0.0)
}

/// Closed-form artifacts a scenario may supply.
#[derive(Clone, Default)]
pub struct ClosedForms {
    /// Reference cycle `x~(t)` and its derivative.
    pub cycle: Option<(CurveFn, CurveFn)>,
    /// Second variational solution `y^(t)`.
    pub y_hat: Option<CurveFn>,
    /// `Phi^s(x~(theta))` as a function of `(s, theta)`.
    pub phi: Option<PhiFn>,
    pub xi_tilde: Option<[f64; 2]>,
    pub xi_hat: Option<[f64; 2]>,
    /// Cycle family `alpha -> initial point` and its period function.
    pub family: Option<CurveFn>,
    pub family_period: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
    pub family_alpha: Option<f64>,
}

/// A fully wired example system.
#[derive(Clone)]
pub struct Scenario {
    pub name: String,
    /// Resolved parameters.
    pub params: Value,
    pub psys: PerturbedSystem,
    /// Initial point of the reference cycle (exact when a closed form exists).
    pub cycle_point: Vec<f64>,
    pub section_normal: Vec<f64>,
    /// Equilibria enclosed by the reference cycle.
    pub inner_equilibria: Vec<Vec<f64>>,
    pub closed: ClosedForms,
    /// Reference cycle found numerically at construction, when no closed form exists.
    pub numeric_cycle: Option<Cycle>,
}

impl std::fmt::Debug for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Scenario").field("name", &self.name).field("params", &self.params).finish()
    }
}

impl Scenario {
    pub fn system(&self) -> &OdeSystem {
        &self.psys.base
    }

    pub fn period(&self) -> f64 {
        self.psys.period()
    }

    /// The reference `T`-periodic cycle.
    pub fn reference_cycle(&self, cfg: &IntegratorConfig) -> Result<Cycle> {
        if let Some(c) = &self.numeric_cycle {
            return Ok(c.clone());
        }
        Cycle::from_point(self.system(), &self.cycle_point, self.period(), self.period(), cfg)
    }

    /// `max |x~'(t) - f(x~(t))|` of the closed-form cycle at 32 times.
    pub fn closed_cycle_residual(&self) -> Option<f64> {
        let (x, xd) = self.closed.cycle.as_ref()?;
        let t_max = self.period();
        let mut worst: f64 = 0.0;
        for i in 0..32 {
            let t = t_max * i as f64 / 32.0;
            let f = self.system().f_vec(t, &x(t));
            let d = xd(t);
            for k in 0..d.len() {
                worst = worst.max((f[k] - d[k]).abs());
            }
        }
        Some(worst)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinearAsymParams {
    pub mu: f64,
    pub nu: f64,
}

impl Default for LinearAsymParams {
    fn default() -> Self {
        Self { mu: 1.0, nu: 0.0 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DuffingParams {
    pub delta: f64,
}

impl Default for DuffingParams {
    fn default() -> Self {
        Self { delta: 0.05 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GreenspanHolmesParams {
    pub delta: f64,
}

impl Default for GreenspanHolmesParams {
    fn default() -> Self {
        Self { delta: 0.02 }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DegenerateRingParams {
    pub mu: f64,
    pub nu: f64,
    pub delta: f64,
    /// Family member used as reference cycle; defaults to the member whose
    /// period matches the forcing period `2π/(1+δ)`.
    pub alpha: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PredatorPreyParams {
    pub k0: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
    pub k5: f64,
    pub mu: f64,
    pub nu: f64,
    pub harmonic: u32,
}

/// Non-canonical defaults: the interior equilibrium sits left of the hump of
/// the prey isocline, so a stable limit cycle surrounds it.
impl Default for PredatorPreyParams {
    fn default() -> Self {
        Self { k0: 1.0, k1: 1.0, k2: 1.0, k3: 1.0 / 3.0, k4: 1.0, k5: 0.4, mu: 1.0, nu: 0.0, harmonic: 1 }
    }
}

fn parse<T: for<'de> Deserialize<'de> + Default>(v: &Value) -> Result<T> {
    if v.is_null() {
        return Ok(T::default());
    }
    serde_json::from_value(v.clone()).map_err(|e| Error::InvalidInput(format!("scenario parameters: {e}")))
}

/// Names accepted by [`make_scenario`].
pub const SCENARIOS: [&str; 5] = ["linear_asym", "duffing", "greenspan_holmes", "degenerate_ring", "predator_prey"];

/// Build a scenario by name from a JSON parameter object (`null` for defaults).
pub fn make_scenario(name: &str, params: &Value) -> Result<Scenario> {
    let sc = match name {
        "linear_asym" => linear_asym(parse(params)?),
        "duffing" => duffing(parse(params)?),
        "greenspan_holmes" => greenspan_holmes(parse(params)?),
        "degenerate_ring" => degenerate_ring(parse(params)?),
        "predator_prey" => predator_prey(parse(params)?),
        other => Err(Error::UnknownScenario(other.to_string())),
    }?;
    if let Some(r) = sc.closed_cycle_residual() {
        if r > 1e-9 {
            return Err(Error::InvalidInput(format!("closed-form cycle residual {r:e} for {name}")));
        }
    }
    Ok(sc)
}

fn harmonic_base(name: &str, period: f64) -> OdeSystem {
    OdeSystem::new(name, 2, period, true, |_, x, o| {
        o[0] = x[1];
        o[1] = -x[0];
    })
    .with_jacobian(|_, _, j| j.copy_from_slice(&[0.0, 1.0, -1.0, 0.0]))
}

/// `x1' = x2`, `x2' = -x1 + eps (mu x1⁺ + nu x1⁻ + cos t)`.
pub fn linear_asym(p: LinearAsymParams) -> Result<Scenario> {
    let (mu, nu) = (p.mu, p.nu);
    let base = harmonic_base("linear_asym", 2.0 * PI);
    let psys = PerturbedSystem::new(base, move |t, x, _, o| {
        o[0] = 0.0;
        o[1] = mu * pos(x[0]) + nu * neg(x[0]) + t.cos();
    })
    .with_g_jacobian(move |_, x, _, j| {
        let d = if x[0] > 0.0 { mu } else if x[0] < 0.0 { -nu } else { 0.5 * (mu - nu) };
        j.copy_from_slice(&[0.0, 0.0, d, 0.0]);
    });
    let phi: PhiFn = Arc::new(move |_s, th: f64| {
        let a = 0.5 * PI * (-mu + nu - 2.0 * th.sin());
        let b = PI * th.cos();
        [a * th.cos() + b * th.sin(), -a * th.sin() + b * th.cos()]
    });
    Ok(Scenario {
        name: "linear_asym".into(),
        params: serde_json::to_value(&p).unwrap(),
        psys,
        cycle_point: vec![0.0, 1.0],
        section_normal: vec![1.0, 0.0],
        inner_equilibria: vec![vec![0.0, 0.0]],
        closed: ClosedForms {
            cycle: Some((Arc::new(|t: f64| vec![t.sin(), t.cos()]), Arc::new(|t: f64| vec![t.cos(), -t.sin()]))),
            y_hat: Some(Arc::new(|t: f64| vec![t.sin(), t.cos()])),
            phi: Some(phi),
            ..Default::default()
        },
        numeric_cycle: None,
    })
}

/// Period of the Duffing orbit `u'' + u + u³ = 0` with amplitude `a`.
pub fn duffing_period(a: f64) -> f64 {
    // T(A) = 4 ∫_0^{π/2} dφ / sqrt(1 + A²(1 + sin²φ)/2)
    crate::quad::integrate_scalar(0.0, PI / 2.0, &crate::quad::uniform_breakpoints(0.0, PI / 2.0, 0.1), 1e-15, |phi| {
        4.0 / (1.0 + 0.5 * a * a * (1.0 + phi.sin().powi(2))).sqrt()
    })
}

/// Amplitude of the Duffing orbit with period `t`, `0 < t < 2π`.
pub fn duffing_amplitude(t: f64) -> Result<f64> {
    if !(t > 0.0 && t < 2.0 * PI) {
        return Err(Error::ParameterOutOfRange(format!("Duffing period {t} must lie in (0, 2π)")));
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while duffing_period(hi) > t {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let m = 0.5 * (lo + hi);
        if duffing_period(m) > t {
            lo = m;
        } else {
            hi = m;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `v1' = v2`, `v2' = -v1 - v1³ + eps cos((1+δ) t)`; reference cycle of period `2π/(1+δ)`.
pub fn duffing(p: DuffingParams) -> Result<Scenario> {
    let d = p.delta;
    if !(d > 0.0) {
        return Err(Error::ParameterOutOfRange(format!("duffing delta {d} must be > 0 (the δ = 0 cycle is the origin)")));
    }
    let period = 2.0 * PI / (1.0 + d);
    let base = OdeSystem::new("duffing", 2, period, true, |_, x, o| {
        o[0] = x[1];
        o[1] = -x[0] - x[0].powi(3);
    })
    .with_jacobian(|_, x, j| j.copy_from_slice(&[0.0, 1.0, -1.0 - 3.0 * x[0] * x[0], 0.0]));
    let w = 1.0 + d;
    let psys = PerturbedSystem::new(base, move |t, _, _, o| {
        o[0] = 0.0;
        o[1] = (w * t).cos();
    })
    .with_g_jacobian(|_, _, _, j| j.fill(0.0));
    let a = duffing_amplitude(period)?;
    let v = (a * a + 0.5 * a.powi(4)).sqrt();
    let family: CurveFn = Arc::new(|amp: f64| vec![0.0, (amp * amp + 0.5 * amp.powi(4)).sqrt()]);
    Ok(Scenario {
        name: "duffing".into(),
        params: serde_json::to_value(&p).unwrap(),
        psys,
        cycle_point: vec![0.0, v],
        section_normal: vec![1.0, 0.0],
        inner_equilibria: vec![vec![0.0, 0.0]],
        closed: ClosedForms {
            family: Some(family),
            family_period: Some(Arc::new(duffing_period)),
            family_alpha: Some(a),
            ..Default::default()
        },
        numeric_cycle: None,
    })
}

/// `x1' = x2(1 - δ|x|²)`, `x2' = -x1(1 - δ|x|²) + eps sin((1-δ)t)`.
pub fn greenspan_holmes(p: GreenspanHolmesParams) -> Result<Scenario> {
    let d = p.delta;
    if !(d > 0.0 && d < 1.0) {
        return Err(Error::ParameterOutOfRange(format!("greenspan_holmes delta {d} must lie in (0, 1)")));
    }
    let w = 1.0 - d;
    let period = 2.0 * PI / w;
    let base = OdeSystem::new("greenspan_holmes", 2, period, true, move |_, x, o| {
        let s = 1.0 - d * (x[0] * x[0] + x[1] * x[1]);
        o[0] = x[1] * s;
        o[1] = -x[0] * s;
    })
    .with_jacobian(move |_, x, j| {
        let s = 1.0 - d * (x[0] * x[0] + x[1] * x[1]);
        j[0] = -2.0 * d * x[0] * x[1];
        j[1] = s - 2.0 * d * x[1] * x[1];
        j[2] = -s + 2.0 * d * x[0] * x[0];
        j[3] = 2.0 * d * x[0] * x[1];
    });
    let psys = PerturbedSystem::sin_state(base, w, |_, o| {
        o[0] = 0.0;
        o[1] = 1.0;
    })
    .with_g_jacobian(|_, _, _, j| j.fill(0.0));
    let y_hat: CurveFn = Arc::new(move |t: f64| {
        let (s, c) = (w * t).sin_cos();
        vec![(-2.0 * d * t * c + s) / w, (2.0 * d * t * s + c) / w]
    });
    let family: CurveFn = Arc::new(|a: f64| vec![0.0, a]);
    Ok(Scenario {
        name: "greenspan_holmes".into(),
        params: serde_json::to_value(&p).unwrap(),
        psys,
        cycle_point: vec![0.0, 1.0],
        section_normal: vec![1.0, 0.0],
        inner_equilibria: vec![vec![0.0, 0.0]],
        closed: ClosedForms {
            cycle: Some((
                Arc::new(move |t: f64| vec![(w * t).sin(), (w * t).cos()]),
                Arc::new(move |t: f64| vec![w * (w * t).cos(), -w * (w * t).sin()]),
            )),
            y_hat: Some(y_hat),
            xi_tilde: Some([4.0 / 3.0, 4.0 / 3.0]),
            xi_hat: Some([2.0 * d * PI * PI / w.powi(3), -PI / w.powi(3)]),
            family: Some(family),
            family_period: Some(Arc::new(move |a: f64| 2.0 * PI / (1.0 - d * a * a))),
            family_alpha: Some(1.0),
            ..Default::default()
        },
        numeric_cycle: None,
    })
}

/// Margin of the Greenspan–Holmes two-solution condition `2(1−δ)³ − (3π² + 8π)δ`.
pub fn greenspan_holmes_margin(delta: f64) -> f64 {
    2.0 * (1.0 - delta).powi(3) - (3.0 * PI * PI + 8.0 * PI) * delta
}

/// `x1' = x2((r-1)²+1)`, `x2' = -x1((r-1)²+1) + eps(mu x1⁺ + nu x1⁻ + cos((1+δ)t))`.
pub fn degenerate_ring(p: DegenerateRingParams) -> Result<Scenario> {
    let (mu, nu, d) = (p.mu, p.nu, p.delta);
    if d < 0.0 {
        return Err(Error::ParameterOutOfRange(format!("degenerate_ring delta {d} must be >= 0")));
    }
    let alpha = p.alpha.unwrap_or(1.0 + d.sqrt());
    if !(alpha > 0.0) {
        return Err(Error::ParameterOutOfRange(format!("degenerate_ring alpha {alpha} must be > 0")));
    }
    let om = |a: f64| (a - 1.0).powi(2) + 1.0;
    let w = om(alpha);
    let period = 2.0 * PI / w;
    let base = OdeSystem::new("degenerate_ring", 2, period, true, move |_, x, o| {
        let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
        let s = (r - 1.0).powi(2) + 1.0;
        o[0] = x[1] * s;
        o[1] = -x[0] * s;
    })
    .with_jacobian(|_, x, j| {
        let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
        let s = (r - 1.0).powi(2) + 1.0;
        let (d0, d1) = if r > 0.0 { (2.0 * (r - 1.0) * x[0] / r, 2.0 * (r - 1.0) * x[1] / r) } else { (0.0, 0.0) };
        j[0] = x[1] * d0;
        j[1] = s + x[1] * d1;
        j[2] = -s - x[0] * d0;
        j[3] = -x[0] * d1;
    });
    let wf = 1.0 + d;
    let psys = PerturbedSystem::new(base, move |t, x, _, o| {
        o[0] = 0.0;
        o[1] = mu * pos(x[0]) + nu * neg(x[0]) + (wf * t).cos();
    })
    .with_g_jacobian(move |_, x, _, j| {
        let dd = if x[0] > 0.0 { mu } else if x[0] < 0.0 { -nu } else { 0.5 * (mu - nu) };
        j.copy_from_slice(&[0.0, 0.0, dd, 0.0]);
    });
    let phi = if d == 0.0 && alpha == 1.0 {
        let phi: PhiFn = Arc::new(move |_s, th: f64| {
            let a = 0.5 * PI * (-mu + nu - 2.0 * th.sin());
            let b = PI * th.cos();
            [a * th.cos() + b * th.sin(), -a * th.sin() + b * th.cos()]
        });
        Some(phi)
    } else {
        None
    };
    let y_hat: Option<CurveFn> =
        if alpha == 1.0 { Some(Arc::new(|t: f64| vec![t.sin(), t.cos()])) } else { None };
    let mut params = serde_json::to_value(&p).unwrap();
    params["alpha"] = serde_json::json!(alpha);
    Ok(Scenario {
        name: "degenerate_ring".into(),
        params,
        psys,
        cycle_point: vec![0.0, alpha],
        section_normal: vec![1.0, 0.0],
        inner_equilibria: vec![vec![0.0, 0.0]],
        closed: ClosedForms {
            cycle: Some((
                Arc::new(move |t: f64| vec![alpha * (w * t).sin(), alpha * (w * t).cos()]),
                Arc::new(move |t: f64| vec![alpha * w * (w * t).cos(), -alpha * w * (w * t).sin()]),
            )),
            y_hat,
            phi,
            family: Some(Arc::new(|a: f64| vec![0.0, a])),
            family_period: Some(Arc::new(move |a: f64| 2.0 * PI / om(a))),
            family_alpha: Some(alpha),
            ..Default::default()
        },
        numeric_cycle: None,
    })
}

/// Generalized predator–prey system with forcing `eps (mu x1⁺ + nu x1⁻) sin(2πkt/T)`
/// in the predator equation; `T` is the period of the numerically located limit cycle.
pub fn predator_prey(p: PredatorPreyParams) -> Result<Scenario> {
    let PredatorPreyParams { k0, k1, k2, k3, k4, k5, mu, nu, harmonic } = p.clone();
    if [k0, k1, k2, k3, k4, k5].iter().any(|v| !(*v > 0.0)) || harmonic == 0 {
        return Err(Error::ParameterOutOfRange("predator_prey rates must be positive".into()));
    }
    let f = move |_t: f64, x: &[f64], o: &mut [f64]| {
        let h = x[0] / (k0 + x[0]);
        o[0] = k1 * x[0] - k2 * h * x[1] - k3 * x[0] * x[0];
        o[1] = k4 * h * x[1] - k5 * x[1];
    };
    let jac = move |_t: f64, x: &[f64], j: &mut [f64]| {
        let dh = k0 / (k0 + x[0]).powi(2);
        let h = x[0] / (k0 + x[0]);
        j[0] = k1 - k2 * dh * x[1] - 2.0 * k3 * x[0];
        j[1] = -k2 * h;
        j[2] = k4 * dh * x[1];
        j[3] = k4 * h - k5;
    };
    // interior equilibrium: k4 h = k5
    if k4 <= k5 {
        return Err(Error::ParameterOutOfRange("predator_prey needs k4 > k5 for an interior equilibrium".into()));
    }
    let xe = k5 * k0 / (k4 - k5);
    let ye = (k1 - k3 * xe) * (k0 + xe) / k2;
    if ye <= 0.0 {
        return Err(Error::ParameterOutOfRange("predator_prey interior equilibrium not positive".into()));
    }
    let provisional = OdeSystem::new("predator_prey", 2, 1.0, true, f).with_jacobian(jac);
    let cfg = IntegratorConfig::default();
    // settle onto the attracting cycle
    let start = [xe * 1.2, ye];
    let settled = flow_end(&provisional, 0.0, 400.0, &start, &cfg)?;
    let dist = ((settled[0] - xe).powi(2) + (settled[1] - ye).powi(2)).sqrt();
    if dist < 1e-3 {
        return Err(Error::ParameterOutOfRange("predator_prey: no limit cycle (orbit settles on the equilibrium)".into()));
    }
    let fs = provisional.f_vec(0.0, &settled);
    let cycle = find_cycle(&provisional, &settled, fs.as_slice(), &FindCycleOptions::default(), &CycleConfig::default(), &cfg)?;
    let period = cycle.minimal_period;
    let base = provisional.with_period(period);
    let psys = PerturbedSystem::sin_scalar(base, harmonic, move |x| mu * pos(x[0]) + nu * neg(x[0])).with_g_jacobian(
        move |t, x, _, j| {
            let s = (2.0 * PI * harmonic as f64 * t / period).sin();
            let dd = if x[0] > 0.0 { mu } else if x[0] < 0.0 { -nu } else { 0.5 * (mu - nu) };
            j.copy_from_slice(&[0.0, 0.0, s * dd, 0.0]);
        },
    );
    let point = cycle.x0.iter().copied().collect::<Vec<_>>();
    let normal = fs.iter().copied().collect();
    Ok(Scenario {
        name: "predator_prey".into(),
        params: serde_json::to_value(&p).unwrap(),
        psys,
        cycle_point: point,
        section_normal: normal,
        inner_equilibria: vec![vec![xe, ye]],
        closed: ClosedForms::default(),
        numeric_cycle: Some(cycle),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_scenario_is_rejected() {
        assert!(matches!(make_scenario("nope", &Value::Null), Err(Error::UnknownScenario(_))));
    }

    #[test]
    fn unknown_parameter_is_rejected() {
        let r = make_scenario("greenspan_holmes", &serde_json::json!({"delta": 0.02, "gamma": 1}));
        assert!(matches!(r, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn out_of_range_delta() {
        let r = make_scenario("greenspan_holmes", &serde_json::json!({"delta": 1.5}));
        assert!(matches!(r, Err(Error::ParameterOutOfRange(_))));
    }

    #[test]
    fn gh_reference_cycle() {
        let sc = make_scenario("greenspan_holmes", &serde_json::json!({"delta": 0.02})).unwrap();
        assert_eq!(sc.cycle_point, vec![0.0, 1.0]);
        assert!((sc.period() - 2.0 * PI / 0.98).abs() < 1e-15);
        assert!(sc.closed_cycle_residual().unwrap() < 1e-12);
    }

    #[test]
    fn ring_alpha_one_has_period_two_pi() {
        let sc = make_scenario("degenerate_ring", &serde_json::json!({"delta": 0.0})).unwrap();
        assert!((sc.period() - 2.0 * PI).abs() < 1e-15);
        assert!(((sc.closed.family_period.as_ref().unwrap())(1.0) - 2.0 * PI).abs() < 1e-15);
    }

    #[test]
    fn duffing_period_limits() {
        assert!((duffing_period(0.0) - 2.0 * PI).abs() < 1e-13);
        assert!(duffing_period(1.0) < duffing_period(0.5));
        // amplitude shrinks to zero as the detuning vanishes
        let a1 = duffing_amplitude(2.0 * PI / 1.01).unwrap();
        let a2 = duffing_amplitude(2.0 * PI / 1.0001).unwrap();
        assert!(a2 < a1 && a2 < 0.02);
    }

    #[test]
    fn margin_values() {
        assert!((greenspan_holmes_margin(1.0 / 40.0) - 0.485_18).abs() < 1e-4);
        assert!(greenspan_holmes_margin(0.1) < 0.0);
    }
}

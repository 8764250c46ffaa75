use std::path::PathBuf;

use anyhow::Context;
use pertorb::biffun::{
    malkin_integral_samples, malkin_samples, melnikov_samples, phi_on_cycle, phi_samples, sinusoidal_decomposition,
    symmetry_integrals, BifSamples,
};
use pertorb::continuation::{
    boundary_cycle_entry, cycle_curve, direction_test, epsilon_sweep, limit_identity_3_8, minus_phi_degree,
    multistart_phases, planar_orientation, predict, rate_fit, shoot, transversal_basis, two_sided_search, DistanceKind,
    PredictOptions,
};
use pertorb::cycles::{degeneracy_report, find_cycle, monodromy, periodic_adjoint, AdjointFrame, Cycle, FindCycleOptions};
use pertorb::degree::{assemble_degree_1_60, borsuk_two_zero_certificate, degree_on_region, Point, SampledCurve};
use pertorb::flow::flow_map;
use pertorb::integrate::reduce_mod;
use pertorb::systems::{greenspan_holmes_margin, make_scenario, Scenario};
use pertorb::{Error, PerturbationForm, PerturbedSystem};
use serde_json::{json, Value};

use crate::config::{config_err, RunConfig};
use crate::svg::{line_chart, Series};

/// Resolved inputs shared by all commands.
pub struct Ctx {
    pub cfg: RunConfig,
    pub sc: Scenario,
    pub psys: PerturbedSystem,
    pub out: PathBuf,
}

impl Ctx {
    pub fn new(cfg: RunConfig) -> anyhow::Result<Self> {
        let sc = make_scenario(&cfg.scenario.name, &cfg.scenario.params).map_err(|e| match e {
            Error::UnknownScenario(_) | Error::ParameterOutOfRange(_) | Error::InvalidInput(_) => config_err(e.to_string()),
            other => other.into(),
        })?;
        let psys = if cfg.scenario.zero_forcing { PerturbedSystem::zero(sc.system().clone()) } else { sc.psys.clone() };
        let out = cfg.output_dir.clone();
        Ok(Self { cfg, sc, psys, out })
    }

    /// Same context writing below `sub`.
    fn in_subdir(&self, sub: &str) -> Self {
        Self { cfg: self.cfg.clone(), sc: self.sc.clone(), psys: self.psys.clone(), out: self.out.join(sub) }
    }

    fn write(&self, name: &str, contents: &str) -> anyhow::Result<PathBuf> {
        std::fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        let p = self.out.join(name);
        std::fs::write(&p, contents).with_context(|| format!("writing {}", p.display()))?;
        Ok(p)
    }

    /// Report document with the resolved configuration embedded.
    fn report(&self, command: &str, result: Value) -> anyhow::Result<Value> {
        let doc = json!({
            "command": command,
            "scenario": self.sc.name,
            "scenario_params": self.sc.params,
            "config": self.cfg.to_json(),
            "result": result,
        });
        self.write(&format!("{command}_report.json"), &serde_json::to_string_pretty(&doc)?)?;
        Ok(doc)
    }

    fn cycle(&self) -> anyhow::Result<Cycle> {
        let c = &self.cfg.cycle;
        match &c.guess {
            Some(g) => {
                let normal = c.normal.clone().unwrap_or_else(|| self.sc.section_normal.clone());
                let opts = FindCycleOptions { target_period: c.target_period, multiple: None };
                Ok(find_cycle(self.sc.system(), g, &normal, &opts, &c.tolerances, &self.cfg.integrator)?)
            }
            None => Ok(self.sc.reference_cycle(&self.cfg.integrator)?),
        }
    }

    fn frame(&self, cycle: &Cycle) -> anyhow::Result<AdjointFrame> {
        Ok(periodic_adjoint(self.sc.system(), cycle, &self.cfg.cycle.tolerances, &self.cfg.integrator)?)
    }

    fn svg(&self, name: &str, title: &str, series: &[Series], log_log: bool) -> anyhow::Result<()> {
        if self.cfg.svg {
            self.write(name, &line_chart(title, series, log_log))?;
        }
        Ok(())
    }
}

fn fmt17(v: f64) -> String {
    pertorb::biffun::fmt17(v)
}

/// Cycle, multipliers and degeneracy data.
pub fn cmd_cycle(ctx: &Ctx) -> anyhow::Result<Value> {
    let cfg = &ctx.cfg;
    let sys = ctx.sc.system();
    let cycle = ctx.cycle()?;
    let md = monodromy(sys, &cycle, &cfg.cycle.tolerances, &cfg.integrator)?;
    let rec = cycle.to_record();
    ctx.write("cycle.json", &serde_json::to_string_pretty(&rec)?)?;
    let mut table = String::from("index,re,im,abs\n");
    for (i, m) in md.multipliers.iter().enumerate() {
        table.push_str(&format!("{i},{},{},{}\n", fmt17(m.re), fmt17(m.im), fmt17(m.norm())));
    }
    ctx.write("multipliers.csv", &table)?;
    let count = cfg.cycle.samples.unwrap_or(256);
    let samples = cycle.samples(count);
    let mut csv = String::from("t");
    for i in 0..cycle.dim() {
        csv.push_str(&format!(",x{}", i + 1));
    }
    csv.push('\n');
    for (t, x) in &samples {
        csv.push_str(&fmt17(*t));
        for v in x.iter() {
            csv.push_str(&format!(",{}", fmt17(*v)));
        }
        csv.push('\n');
    }
    ctx.write("cycle.csv", &csv)?;
    if cycle.dim() >= 2 {
        let mut pts: Vec<(f64, f64)> = samples.iter().map(|(_, x)| (x[0], x[1])).collect();
        pts.push(pts[0]);
        ctx.svg("cycle.svg", "cycle (x1, x2)", &[Series { label: "cycle", points: pts }], false)?;
    }
    let degeneracy = match (&ctx.sc.closed.family, ctx.sc.closed.family_alpha) {
        (Some(fam), Some(a0)) if cfg.cycle.guess.is_none() => {
            match degeneracy_report(sys, &**fam, a0, &cfg.cycle.tolerances, &cfg.integrator) {
                Ok(r) => json!({"alpha0": a0, "report": r}),
                Err(e) => json!({"alpha0": a0, "error": e.to_string()}),
            }
        }
        _ => Value::Null,
    };
    let result = json!({
        "period": cycle.period,
        "minimal_period": cycle.minimal_period,
        "x0": rec.x0,
        "closure_residual": cycle.closure_residual(),
        "monodromy": md.to_record(),
        "simple": md.unit_multiplicity == 1,
        "inner_equilibria": ctx.sc.inner_equilibria,
        "degeneracy": degeneracy,
    });
    ctx.report("cycle", result)
}

fn write_samples(ctx: &Ctx, stem: &str, s: &BifSamples, diag: Value) -> anyhow::Result<Value> {
    ctx.write(&format!("{stem}.csv"), &s.to_csv())?;
    let side = s.sidecar(diag);
    ctx.write(&format!("{stem}.json"), &serde_json::to_string_pretty(&side)?)?;
    Ok(json!({"zeros": s.sign_change_zeros(), "max_abs": s.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))}))
}

/// Malkin, Melnikov and `Phi^s` tables with zeros.
pub fn cmd_biffun(ctx: &Ctx) -> anyhow::Result<Value> {
    let cfg = &ctx.cfg;
    let b = &cfg.biffun;
    let cycle = ctx.cycle()?;
    let frame = ctx.frame(&cycle)?;
    let psys = &ctx.psys;
    let mut result = serde_json::Map::new();
    result.insert("period".into(), json!(frame.period));
    result.insert("unit_multiplicity".into(), json!(frame.unit_multiplicity));
    result.insert("pairing_sign".into(), json!(frame.pairing_sign));
    let mi = malkin_integral_samples(psys, &frame, b)?;
    result.insert("malkin_integral".into(), write_samples(ctx, "malkin_integral", &mi, json!({"signed": false}))?);
    let mut series = vec![Series { label: "malkin integral", points: mi.grid.values.iter().copied().zip(mi.values.iter().copied()).collect() }];
    if frame.pairing_sign != 0 && frame.unit_multiplicity == 1 {
        let m = malkin_samples(psys, &frame, b)?;
        result.insert("malkin".into(), write_samples(ctx, "malkin", &m, json!({"signed": true}))?);
    }
    if psys.dim() == 2 {
        let m = melnikov_samples(psys, &cycle, b)?;
        result.insert("melnikov".into(), write_samples(ctx, "melnikov", &m, json!({}))?);
        series.push(Series { label: "melnikov", points: m.grid.values.iter().copied().zip(m.values.iter().copied()).collect() });
    }
    ctx.svg("biffun.svg", "bifurcation functions", &series, false)?;
    let mut phis = Vec::new();
    for (i, f) in cfg.grids.s_fractions.iter().enumerate() {
        let s = f * frame.period;
        let p = phi_samples(psys, &frame, s, b);
        ctx.write(&format!("phi_s{i}.csv"), &p.to_csv())?;
        let mut entry = json!({"s": s, "file": format!("phi_s{i}.csv"), "min_norm": p.values.iter().copied().fold(f64::INFINITY, f64::min)});
        if let (Some(closed), Some(vecs), false) = (&ctx.sc.closed.phi, &p.vectors, ctx.cfg.scenario.zero_forcing) {
            let dev = p
                .grid
                .values
                .iter()
                .zip(vecs)
                .map(|(&th, v)| {
                    let c = closed(s, th);
                    (v[0] - c[0]).hypot(v[1] - c[1])
                })
                .fold(0.0f64, f64::max);
            entry["closed_form_deviation"] = json!(dev);
        }
        phis.push(entry);
    }
    result.insert("phi".into(), Value::Array(phis));
    match &psys.form {
        PerturbationForm::SinScalar { .. } => {
            result.insert("sinusoidal".into(), to_json_or_err(sinusoidal_decomposition(psys, &frame, b)));
        }
        PerturbationForm::SinState { .. } => {
            result.insert("symmetry_integrals".into(), to_json_or_err(symmetry_integrals(psys, &frame, b)));
        }
        _ => {}
    }
    ctx.report("biffun", Value::Object(result))
}

fn to_json_or_err<T: serde::Serialize>(r: pertorb::Result<T>) -> Value {
    match r {
        Ok(v) => serde_json::to_value(v).unwrap_or(Value::Null),
        Err(e) => json!({"error": e.to_string()}),
    }
}

fn boundary_curve(ctx: &Ctx) -> anyhow::Result<Option<SampledCurve>> {
    let d = &ctx.cfg.degree;
    if let Some(p) = &d.curve_csv {
        let text = std::fs::read_to_string(p).map_err(|e| config_err(format!("degree.curve_csv {}: {e}", p.display())))?;
        return Ok(Some(SampledCurve::from_csv(&text).map_err(|e| config_err(format!("degree.curve_csv: {e}")))?));
    }
    Ok(d.circle.as_ref().map(|c| SampledCurve::circle(c.center, c.radius, c.points)))
}

/// Phases where the cycle crosses `curve`.
fn crossing_phases(cycle: &Cycle, curve: &SampledCurve) -> Vec<f64> {
    let n = 2048;
    let sd = |t: f64| {
        let x = cycle.at(t);
        let p = [x[0], x[1]];
        let d = curve.distance(p);
        if curve.contains(p) {
            d
        } else {
            -d
        }
    };
    let h = cycle.period / n as f64;
    let mut out = Vec::new();
    for i in 0..n {
        let (a, b) = (i as f64 * h, (i + 1) as f64 * h);
        if sd(a) * sd(b) < 0.0 {
            let (mut lo, mut hi) = (a, b);
            let flo = sd(lo);
            for _ in 0..80 {
                let m = 0.5 * (lo + hi);
                if sd(m) * flo > 0.0 {
                    lo = m;
                } else {
                    hi = m;
                }
            }
            out.push(reduce_mod(0.5 * (lo + hi), cycle.period));
        }
    }
    out
}

/// Winding numbers, the two-zero certificate and the degree formula.
pub fn cmd_degree(ctx: &Ctx) -> anyhow::Result<Value> {
    let cfg = &ctx.cfg;
    let sys = ctx.sc.system();
    if sys.dim != 2 {
        return Err(config_err("the degree command needs a planar system"));
    }
    let cycle = ctx.cycle()?;
    let frame = ctx.frame(&cycle)?;
    let psys = &ctx.psys;
    let budget = cfg.degree.budget;
    let field = |p: Point| -> pertorb::Result<Point> {
        let v = sys.f_vec(0.0, &p);
        Ok([v[0], v[1]])
    };
    let cycle_poly = cycle_curve(&cycle, 1024)?;
    let f_on_cycle = degree_on_region(&field, &cycle_poly, budget)?;
    let mut result = serde_json::Map::new();
    result.insert("field_on_cycle".into(), serde_json::to_value(&f_on_cycle)?);

    let orient = planar_orientation(&cycle);
    let per = frame.period;
    let minus_phi = minus_phi_degree(psys, &frame, &cycle, 256, &cfg.biffun);
    result.insert("minus_phi_t".into(), match &minus_phi {
        Ok(d) => json!({"degree": d}),
        Err(e) => json!({"error": e.to_string()}),
    });
    let fphi = |th: f64| -> pertorb::Result<Point> {
        let v = phi_on_cycle(psys, &frame, per, th, &cfg.biffun);
        Ok([-v[0], -v[1]])
    };
    let xdot = |th: f64| -> Point {
        let v = cycle.deriv(sys, th);
        [v[0], v[1]]
    };
    // directing function: the cycle tangent itself
    let cert = borsuk_two_zero_certificate(&fphi, &xdot, &xdot, per, orient as i8, 512);
    result.insert("two_zero_certificate".into(), to_json_or_err(cert));

    if let Some(curve) = boundary_curve(ctx)? {
        let mut sub = serde_json::Map::new();
        let f_deg = degree_on_region(&field, &curve, budget);
        sub.insert("field_degree".into(), to_json_or_err(f_deg.clone()));
        let phases = crossing_phases(&cycle, &curve);
        let mut entries = Vec::new();
        for &th in &phases {
            let shifted = cycle.shifted(sys, th, &cfg.integrator)?;
            match boundary_cycle_entry(psys, &shifted, &curve, &cfg.cycle.tolerances, &cfg.biffun, &cfg.integrator) {
                Ok(Some(e)) => entries.push(e),
                Ok(None) => {}
                Err(e) => {
                    sub.insert("boundary_cycle_error".into(), json!(e.to_string()));
                }
            }
        }
        sub.insert("boundary_cycles".into(), serde_json::to_value(&entries)?);
        if let Ok(fd) = &f_deg {
            let assembled = assemble_degree_1_60(2, fd.value, &entries);
            sub.insert("formula_degree".into(), json!(assembled));
            if let Some(eps) = cfg.degree.eps {
                let pe = psys.at(eps);
                let t = psys.period();
                let icfg = cfg.integrator;
                let disp = |p: Point| -> pertorb::Result<Point> {
                    let q = flow_map(&pe, t, 0.0, &p, &icfg)?;
                    Ok([p[0] - q[0], p[1] - q[1]])
                };
                let direct = degree_on_region(&disp, &curve, budget);
                sub.insert("eps".into(), json!(eps));
                sub.insert("direct_degree".into(), to_json_or_err(direct.clone()));
                if let Ok(d) = direct {
                    sub.insert("formula_matches_direct".into(), json!(d.value == assembled));
                }
            }
        }
        result.insert("boundary".into(), Value::Object(sub));
    }
    ctx.report("degree", Value::Object(result))
}

fn predict_options(ctx: &Ctx) -> PredictOptions {
    let p = &ctx.cfg.predict;
    let family = match (&ctx.sc.closed.family, ctx.sc.closed.family_alpha) {
        (Some(f), Some(a)) if ctx.cfg.cycle.guess.is_none() => Some((f.clone(), a)),
        _ => None,
    };
    let closed_form_margin = if ctx.sc.name == "greenspan_holmes" {
        ctx.sc.params.get("delta").and_then(Value::as_f64).map(|d| ("printed closed-form margin 2(1-d)^3 - (3 pi^2 + 8 pi) d".to_string(), greenspan_holmes_margin(d)))
    } else {
        None
    };
    PredictOptions {
        grid_points: ctx.cfg.biffun.grid_points,
        s_points: p.s_points,
        boundary_points: p.boundary_points,
        isolation_offset: p.isolation_offset,
        isolation_tol: p.isolation_tol,
        family,
        closed_form_margin,
        probe_box: p.probe_box,
    }
}

/// Hypothesis evaluation for every applicable existence statement.
pub fn cmd_predict(ctx: &Ctx) -> anyhow::Result<Value> {
    let cfg = &ctx.cfg;
    let cycle = ctx.cycle()?;
    let frame = ctx.frame(&cycle)?;
    let rep = predict(&ctx.psys, &cycle, &frame, &predict_options(ctx), &cfg.cycle.tolerances, &cfg.biffun, &cfg.integrator)?;
    let v = serde_json::to_value(&rep)?;
    ctx.write("prediction.json", &serde_json::to_string_pretty(&v)?)?;
    ctx.report("predict", v)
}

/// Sweep, rate fits, limit identity, two-sided search and direction test.
pub fn cmd_verify(ctx: &Ctx) -> anyhow::Result<Value> {
    let cfg = &ctx.cfg;
    let sys = ctx.sc.system();
    let psys = &ctx.psys;
    let cycle = ctx.cycle()?;
    let frame = ctx.frame(&cycle)?;
    let per = frame.period;
    let zeros = multistart_phases(psys, &frame, &cfg.biffun).unwrap_or_default();
    let circ = |a: f64, b: f64| {
        let d = reduce_mod(a - b, per);
        d.min(per - d)
    };
    let phase = cfg
        .verify
        .phase
        .or_else(|| zeros.iter().copied().min_by(|a, b| circ(*a, 0.0).partial_cmp(&circ(*b, 0.0)).unwrap()))
        .unwrap_or(0.0);
    let mut result = serde_json::Map::new();
    result.insert("malkin_zeros".into(), json!(zeros));
    result.insert("start_phase".into(), json!(phase));

    let sweep = epsilon_sweep(psys, &cycle, phase, &cfg.grids.eps, &cfg.shoot, &cfg.integrator)?;
    ctx.write("sweep.csv", &sweep.to_csv())?;
    ctx.write("sweep.json", &serde_json::to_string_pretty(&sweep)?)?;
    ctx.svg(
        "sweep.svg",
        "distance against eps (log-log)",
        &[
            Series { label: "phase-aligned", points: sweep.entries.iter().map(|e| (e.eps, e.dist0)).collect() },
            Series { label: "max over t", points: sweep.entries.iter().map(|e| (e.eps, e.dist)).collect() },
        ],
        true,
    )?;
    result.insert("sweep".into(), serde_json::to_value(&sweep)?);
    let fits = json!({
        "selected": format!("{:?}", cfg.verify.distance),
        "phase_aligned": to_json_or_err(rate_fit(&sweep, DistanceKind::PhaseAligned)),
        "hausdorff": to_json_or_err(rate_fit(&sweep, DistanceKind::Hausdorff)),
    });
    result.insert("rate_fit".into(), fits);
    let t_grid: Vec<f64> = (0..cfg.grids.t_points).map(|j| per * j as f64 / cfg.grids.t_points as f64).collect();
    let li = limit_identity_3_8(psys, &cycle, &sweep, &t_grid, &cfg.cycle.tolerances, &cfg.biffun, &cfg.integrator);
    result.insert("limit_identity".into(), to_json_or_err(li));

    if psys.dim() == 2 {
        let phases = if zeros.is_empty() { vec![phase] } else { zeros.clone() };
        let mut searches = Vec::new();
        for &eps in &cfg.verify.two_sided_eps {
            match two_sided_search(psys, eps, &cycle, &phases, &cfg.shoot, &cfg.integrator) {
                Ok(s) => {
                    let sols: Vec<Value> = s
                        .solutions
                        .iter()
                        .map(|(sol, side)| json!({"solution": sol.to_record(), "side": side}))
                        .collect();
                    searches.push(json!({
                        "eps": eps,
                        "attempts": s.attempts,
                        "found_both": s.found_both(),
                        "separation": s.separation(),
                        "solutions": sols,
                    }));
                }
                Err(e) => searches.push(json!({"eps": eps, "error": e.to_string()})),
            }
        }
        result.insert("two_sided".into(), Value::Array(searches));
    }

    if frame.unit_multiplicity == 1 && frame.pairing_sign != 0 {
        let dir = (|| -> anyhow::Result<Value> {
            let last = sweep.entries.last().context("empty sweep")?;
            let th0 = zeros.iter().copied().min_by(|a, b| circ(*a, last.phase).partial_cmp(&circ(*b, last.phase)).unwrap()).unwrap_or(last.phase);
            let shifted = cycle.shifted(sys, th0, &cfg.integrator)?;
            let fh = ctx.frame(&shifted)?;
            let basis = transversal_basis(sys, &fh)?;
            let sol = shoot(psys, last.eps, &last.x0, &cfg.shoot, &cfg.integrator)?;
            let k = cfg.verify.direction_points.max(1);
            let thetas: Vec<f64> = (0..k).map(|j| per * j as f64 / k as f64).collect();
            let samples = direction_test(psys, &fh, &basis, &sol, &thetas, &cfg.biffun)?;
            Ok(json!({
                "theta0": th0,
                "d_tilde": basis.d_tilde.iter().copied().collect::<Vec<f64>>(),
                "d_tilde_residual": basis.d_tilde_residual,
                "samples": samples,
            }))
        })();
        result.insert("direction_test".into(), dir.unwrap_or_else(|e| json!({"error": e.to_string()})));
    }
    ctx.report("verify", Value::Object(result))
}

/// Full pipeline for one built-in scenario, one subdirectory per stage.
pub fn cmd_demo(base: &RunConfig, name: &str) -> anyhow::Result<Value> {
    let mut cfg = base.clone();
    if cfg.scenario.name != name {
        cfg.scenario.name = name.to_string();
        cfg.scenario.params = demo_params(name);
    }
    cfg.output_dir = base.output_dir.join(format!("demo-{name}"));
    let ctx = Ctx::new(cfg)?;
    let mut stages = serde_json::Map::new();
    type Stage = fn(&Ctx) -> anyhow::Result<Value>;
    let plan: [(&str, Stage); 5] =
        [("cycle", cmd_cycle), ("biffun", cmd_biffun), ("degree", cmd_degree), ("predict", cmd_predict), ("verify", cmd_verify)];
    for (stage, run) in plan {
        let sub = ctx.in_subdir(stage);
        let r = run(&sub)?;
        stages.insert(stage.into(), r["result"].clone());
    }
    let summary = demo_summary(&stages);
    ctx.report("demo", json!({"stages": stages, "summary": summary}))
}

/// Parameters used by `demo` when the configuration names another scenario.
pub fn demo_params(name: &str) -> Value {
    match name {
        "greenspan_holmes" => json!({"delta": 1.0 / 40.0}),
        "degenerate_ring" => json!({"mu": 1.0, "nu": 0.0}),
        _ => Value::Null,
    }
}

fn demo_summary(stages: &serde_json::Map<String, Value>) -> Value {
    let passing: Vec<Value> = stages["predict"]["entries"]
        .as_array()
        .map(|a| a.iter().filter(|e| e["verdict"] == json!(true)).map(|e| e["name"].clone()).collect())
        .unwrap_or_default();
    let two_sided: Vec<Value> = stages["verify"]["two_sided"]
        .as_array()
        .map(|a| a.iter().map(|s| json!({"eps": s["eps"], "found_both": s["found_both"]})).collect())
        .unwrap_or_default();
    json!({
        "period": stages["cycle"]["period"],
        "simple": stages["cycle"]["simple"],
        "passing_predictions": passing,
        "two_sided": two_sided,
        "rate_slope": stages["verify"]["rate_fit"]["phase_aligned"]["slope"],
    })
}

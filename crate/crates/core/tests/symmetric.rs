use std::f64::consts::PI;

use pertorb::biffun::{melnikov, symmetry_integrals, BifConfig};
use pertorb::continuation::planar_orientation;
use pertorb::cycles::{periodic_adjoint, CycleConfig};
use pertorb::degree::{borsuk_two_zero_certificate, Point};
use pertorb::systems::make_scenario;
use pertorb::IntegratorConfig;
use serde_json::json;

#[test]
fn xi_tilde_from_its_defining_integral() {
    // with x~ = (sin wt, cos wt) and g = (0, 1) the integrand is w cos wt (cos wt, sin wt)
    let cfg = IntegratorConfig::default();
    let b = BifConfig::default();
    for delta in [0.02, 1.0 / 40.0, 0.3] {
        let sc = make_scenario("greenspan_holmes", &json!({ "delta": delta })).unwrap();
        let c = sc.reference_cycle(&cfg).unwrap();
        let fr = periodic_adjoint(sc.system(), &c, &CycleConfig::default(), &cfg).unwrap();
        let s = symmetry_integrals(&sc.psys, &fr, &b).unwrap();
        assert!((s.xi_tilde[0] - PI).abs() < 1e-8, "{:?}", s.xi_tilde);
        assert!((s.xi_tilde[1] - 2.0).abs() < 1e-8, "{:?}", s.xi_tilde);
        let w = 1.0 - delta;
        for i in 0..12 {
            let th = c.period * i as f64 / 12.0;
            let m = melnikov(&sc.psys, &c, th, &b).unwrap();
            assert!((m + s.xi_tilde[0] * (w * th).sin()).abs() < 1e-8, "theta {th}: {m}");
        }
    }
}

#[test]
fn auxiliary_field_zeros_on_the_symmetric_cycle() {
    let delta = 1.0 / 40.0;
    let w = 1.0 - delta;
    let cfg = IntegratorConfig::default();
    let sc = make_scenario("greenspan_holmes", &json!({ "delta": delta })).unwrap();
    let c = sc.reference_cycle(&cfg).unwrap();
    let fr = periodic_adjoint(sc.system(), &c, &CycleConfig::default(), &cfg).unwrap();
    let s = symmetry_integrals(&sc.psys, &fr, &BifConfig::default()).unwrap();
    let (_, xd) = sc.closed.cycle.clone().unwrap();
    let y_hat = sc.closed.y_hat.clone().unwrap();
    let sign = s.xi_hat[1].signum();
    let field = |th: f64| -> pertorb::Result<Point> {
        let (y, d) = (y_hat(th), xd(th));
        let (cw, sw) = ((w * th).cos(), (w * th).sin());
        Ok([sign * cw * y[1] + sw * d[1], -sign * cw * y[0] - sw * d[0]])
    };
    let tangent = |th: f64| -> Point {
        let d = xd(th);
        [d[0], d[1]]
    };
    let cert = borsuk_two_zero_certificate(&field, &tangent, &tangent, c.period, planar_orientation(&c) as i8, 512).unwrap();
    assert!(cert.holds, "{cert:?}");
    assert_eq!(cert.zeros.len(), 2);
    // the zeros sit at pi/(2w) and 3pi/(2w); 3pi/w lies outside [0, 2pi/w)
    assert!((cert.zeros[0] - PI / (2.0 * w)).abs() < 1e-8, "{:?}", cert.zeros);
    assert!((cert.zeros[1] - 3.0 * PI / (2.0 * w)).abs() < 1e-8, "{:?}", cert.zeros);
    assert!(3.0 * PI / w >= c.period);
    assert!(matches!(cert.degree, Some(0) | Some(2)));
}

//! Adaptive Gauss–Kronrod (7/15) quadrature over breakpoint panels.

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

const MAX_DEPTH: u32 = 14;

fn gk15(a: f64, b: f64, m: usize, f: &mut dyn FnMut(f64, &mut [f64]), buf: &mut [f64], k: &mut [f64], err: &mut f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut g = vec![0.0; m];
    k.iter_mut().for_each(|v| *v = 0.0);
    for (i, &x) in XGK.iter().enumerate() {
        let pts: &[f64] = if x == 0.0 { &[0.0] } else { &[-1.0, 1.0] };
        for &sgn in pts {
            f(c + sgn * h * x, buf);
            for j in 0..m {
                k[j] += WGK[i] * buf[j];
                if i % 2 == 1 {
                    g[j] += WG[i / 2] * buf[j];
                }
            }
        }
    }
    *err = 0.0;
    for j in 0..m {
        k[j] *= h;
        *err = err.max((k[j] - g[j] * h).abs());
    }
}

fn adapt(
    a: f64,
    b: f64,
    m: usize,
    tol: f64,
    depth: u32,
    f: &mut dyn FnMut(f64, &mut [f64]),
    acc: &mut [f64],
) {
    let mut buf = vec![0.0; m];
    let mut k = vec![0.0; m];
    let mut err = 0.0;
    gk15(a, b, m, f, &mut buf, &mut k, &mut err);
    if err <= tol || depth >= MAX_DEPTH || (b - a).abs() < 1e-13 * a.abs().max(1.0) {
        for j in 0..m {
            acc[j] += k[j];
        }
        return;
    }
    let mid = 0.5 * (a + b);
    adapt(a, mid, m, 0.5 * tol, depth + 1, f, acc);
    adapt(mid, b, m, 0.5 * tol, depth + 1, f, acc);
}

/// `integral_a^b f(t) dt` for an `m`-vector integrand, split at the
/// `breakpoints` inside `(a, b)`. `tol` is an absolute error target per unit length.
pub fn integrate_vec(
    m: usize,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    tol: f64,
    mut f: impl FnMut(f64, &mut [f64]),
) -> Vec<f64> {
    let mut acc = vec![0.0; m];
    if a == b {
        return acc;
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut pts = vec![lo];
    pts.extend(breakpoints.iter().copied().filter(|&t| t > lo && t < hi));
    pts.push(hi);
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    pts.dedup();
    for w in pts.windows(2) {
        let len = w[1] - w[0];
        if len <= 0.0 {
            continue;
        }
        adapt(w[0], w[1], m, tol * len, 0, &mut f, &mut acc);
    }
    acc.iter_mut().for_each(|v| *v *= sign);
    acc
}

/// Scalar version of [`integrate_vec`].
pub fn integrate_scalar(a: f64, b: f64, breakpoints: &[f64], tol: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    integrate_vec(1, a, b, breakpoints, tol, |t, o| o[0] = f(t))[0]
}

/// Uniform breakpoints with spacing at most `h` on `[a, b]`.
pub fn uniform_breakpoints(a: f64, b: f64, h: f64) -> Vec<f64> {
    let n = ((b - a).abs() / h).ceil().max(1.0) as usize;
    (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_exact() {
        let v = integrate_scalar(0.0, 2.0, &[], 1e-14, |t| t.powi(5) - 3.0 * t);
        assert!((v - (64.0 / 6.0 - 6.0)).abs() < 1e-13);
    }

    #[test]
    fn reversed_limits_negate() {
        let v = integrate_scalar(PI, 0.0, &[1.0], 1e-14, f64::sin);
        assert!((v + 2.0).abs() < 1e-13);
    }

    #[test]
    fn kink_is_resolved_adaptively() {
        // integral of max(sin t, 0) over [0, 2 pi] = 2, with the kink at pi off-panel
        let bp = uniform_breakpoints(0.0, 2.0 * PI, 0.3);
        let v = integrate_scalar(0.0, 2.0 * PI, &bp, 1e-13, |t| t.sin().max(0.0));
        assert!((v - 2.0).abs() < 1e-11, "{v}");
    }

    #[test]
    fn vector_integrand() {
        let v = integrate_vec(2, 0.0, PI / 2.0, &[], 1e-14, |t, o| {
            o[0] = t.cos();
            o[1] = t.sin() * t.cos();
        });
        assert!((v[0] - 1.0).abs() < 1e-13 && (v[1] - 0.5).abs() < 1e-13);
    }
}

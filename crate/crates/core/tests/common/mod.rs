#![allow(dead_code)]

use std::f64::consts::PI;

/// Composite Simpson rule with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// `∫_a^b g(r) r² min(r,1)^α e^{-r} dr` through `r = s²` to tame the `r^α` cusp.
pub fn radial_integral(g: impl Fn(f64) -> f64, alpha: f64, a: f64, b: f64) -> f64 {
    let w = |r: f64| r * r * r.min(1.0).powf(alpha) * (-r).exp();
    simpson(|s| 2.0 * s * g(s * s) * w(s * s), a.max(1e-30).sqrt(), b.sqrt(), 200_000)
}

/// Expectation of `g(|x|)` under the default spatial law `∝ min(r,1)^α e^{-r}`.
pub fn spatial_mean(g: impl Fn(f64) -> f64, alpha: f64) -> f64 {
    radial_integral(g, alpha, 0.0, 60.0) / radial_integral(|_| 1.0, alpha, 0.0, 60.0)
}

/// `P(|v - shift| < n)` for a standard normal `v` in 3D with `|shift| = u`.
pub fn shifted_ball_probability(u: f64, n: f64) -> f64 {
    let dens = |w: f64| {
        let radial = 4.0 * PI * w * w * (-(w * w + u * u) / 2.0).exp() / (2.0 * PI).powf(1.5);
        let ang = if w * u == 0.0 { 1.0 } else { (w * u).sinh() / (w * u) };
        radial * ang
    };
    simpson(dens, 0.0, n, 20_000)
}

//! Composite Gauss-Legendre quadrature on finite and half-infinite intervals.

const GL_NODES: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_26,
    0.222_381_034_453_374_47,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_47,
    0.101_228_536_290_376_26,
];

/// 8-point Gauss-Legendre on each of `panels` equal sub-intervals of `[a, b]`.
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        let half = 0.5 * h;
        let mut s = 0.0;
        for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
            s += w * f(mid + half * x);
        }
        total += s * half;
    }
    total
}

/// Integral over `[a, b]` on panels graded geometrically towards `a`, for
/// integrands with an integrable power singularity or kink at the left end.
pub fn graded<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, levels: usize, panels: usize) -> f64 {
    let mut total = 0.0;
    let mut hi = b;
    for _ in 0..levels {
        let lo = a + (hi - a) * 0.5;
        total += gauss_legendre(&f, lo, hi, panels);
        hi = lo;
    }
    total + gauss_legendre(&f, a, hi, panels)
}

/// Integral over `[a, inf)` via graded panels on `[a, a + tail]` and
/// exponentially widening panels beyond.
pub fn half_line<F: Fn(f64) -> f64>(f: F, a: f64, tail: f64) -> f64 {
    let mut total = gauss_legendre(&f, a, a + tail, 64);
    let mut lo = a + tail;
    let mut width = tail;
    for _ in 0..60 {
        let piece = gauss_legendre(&f, lo, lo + width, 16);
        total += piece;
        if piece.abs() < 1e-18 * total.abs().max(1e-300) {
            break;
        }
        lo += width;
        width *= 1.5;
    }
    total
}

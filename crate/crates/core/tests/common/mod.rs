#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::DVector;
use phaselab_core::field::random_vector;
use phaselab_core::Scalar;
use rand::Rng;

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Composite Simpson rule on `[a, b]` with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// `E f(g)` for `g ~ N(0, 1)`.
pub fn gauss_1d(f: impl Fn(f64) -> f64) -> f64 {
    simpson(|x| f(x) * normal_pdf(x), -12.0, 12.0, 4000)
}

/// Simpson over consecutive intervals of `breaks`, so integrands with
/// kinks at the breakpoints stay accurate.
pub fn simpson_pieces(f: impl Fn(f64) -> f64, breaks: &[f64], n: usize) -> f64 {
    breaks.windows(2).map(|w| simpson(&f, w[0], w[1], n)).sum()
}

/// `E f(g1, g2)` for independent standard normals, where `f(x, .)` may
/// have kinks at `y = +-|x|`.
pub fn gauss_2d(f: impl Fn(f64, f64) -> f64) -> f64 {
    let inner = |x: f64| {
        let a = x.abs().min(10.0);
        simpson_pieces(|y| f(x, y) * normal_pdf(y), &[-10.0, -a, a, 10.0], 400)
    };
    simpson_pieces(|x| normal_pdf(x) * inner(x), &[-10.0, 0.0, 10.0], 400)
}

pub fn unit<T: Scalar, R: Rng>(n: usize, rng: &mut R) -> DVector<T> {
    let v: DVector<T> = random_vector(n, rng);
    let norm = v.norm();
    v.unscale(norm)
}

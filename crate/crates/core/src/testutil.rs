//! Oracles shared by unit tests.

/// Golden-section search driven by `diff(a, b) = f(a) - f(b)`, which
/// callers evaluate without the cancellation of two nearly equal values.
pub fn golden_section(diff: impl Fn(f64, f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - g * (hi - lo);
    let mut b = lo + g * (hi - lo);
    while hi - lo > 1e-13 {
        if diff(a, b) < 0.0 {
            hi = b;
            b = a;
            a = hi - g * (hi - lo);
        } else {
            lo = a;
            a = b;
            b = lo + g * (hi - lo);
        }
    }
    (lo + hi) / 2.0
}

/// Exact difference of the scalar hinge-prox objective
/// `c max(-x, 0) + (x - p)^2 / 2` between `a` and `b`.
pub fn prox_hinge_diff(p: f64, c: f64) -> impl Fn(f64, f64) -> f64 {
    move |a, b| c * ((-a).max(0.0) - (-b).max(0.0)) + 0.5 * (a - b) * (a + b - 2.0 * p)
}

//! Five-point central difference stencils.

/// First derivative, O(h^4).
pub fn d1<F: Fn(f64) -> f64>(f: &F, x: f64, h: f64) -> f64 {
    (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h)
}

/// Second derivative, O(h^4).
pub fn d2<F: Fn(f64) -> f64>(f: &F, x: f64, h: f64) -> f64 {
    (-f(x + 2.0 * h) + 16.0 * f(x + h) - 30.0 * f(x) + 16.0 * f(x - h) - f(x - 2.0 * h))
        / (12.0 * h * h)
}

/// Third derivative, O(h^2).
pub fn d3<F: Fn(f64) -> f64>(f: &F, x: f64, h: f64) -> f64 {
    (f(x + 2.0 * h) - 2.0 * f(x + h) + 2.0 * f(x - h) - f(x - 2.0 * h)) / (2.0 * h * h * h)
}

/// Third derivative with one Richardson step on (h, h/2), O(h^4).
pub fn d3_richardson<F: Fn(f64) -> f64>(f: &F, x: f64, h: f64) -> f64 {
    let coarse = d3(f, x, h);
    let fine = d3(f, x, 0.5 * h);
    (4.0 * fine - coarse) / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stencils_on_exp() {
        let f = |x: f64| x.exp();
        assert!((d1(&f, 0.0, 1e-3) - 1.0).abs() < 1e-11);
        assert!((d2(&f, 0.0, 1e-3) - 1.0).abs() < 1e-8);
        assert!((d3_richardson(&f, 0.0, 1e-2) - 1.0).abs() < 1e-7);
    }
}

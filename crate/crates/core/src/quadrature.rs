//! Quadrature rules: Gauss-Legendre nodes and composite Simpson weights.

use crate::scalar::Real;

/// `(P_m(x), P_m'(x))` by the three-term recurrence.
fn legendre(m: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0f64, x);
    for j in 2..=m {
        let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
        p0 = p1;
        p1 = p2;
    }
    if m == 0 {
        return (1.0, 0.0);
    }
    (p1, m as f64 * (x * p1 - p0) / (x * x - 1.0))
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, ascending.
pub fn gauss_legendre<T: Real>(m: usize) -> (Vec<T>, Vec<T>) {
    assert!(m >= 1, "Gauss-Legendre needs at least one node");
    let mut nodes = vec![0.0f64; m];
    let mut weights = vec![0.0f64; m];
    for i in 0..m.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(m, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(m, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[m - 1 - i] = x;
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    (nodes.into_iter().map(T::lit).collect(), weights.into_iter().map(T::lit).collect())
}

/// Gauss-Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on<T: Real>(m: usize, a: T, b: T) -> (Vec<T>, Vec<T>) {
    let (x, w) = gauss_legendre::<T>(m);
    let half = (b - a) / T::lit(2.0);
    let mid = (a + b) / T::lit(2.0);
    (x.iter().map(|&xi| mid + half * xi).collect(), w.iter().map(|&wi| wi * half).collect())
}

/// Composite Simpson weights for `count` equispaced nodes with spacing `h`.
///
/// An even node count closes the last three intervals with the 3/8 rule.
pub fn simpson_weights<T: Real>(count: usize, h: T) -> Vec<T> {
    assert!(count >= 4, "Simpson weights need at least four nodes");
    let mut w = vec![T::zero(); count];
    let simpson_end = if count % 2 == 1 { count - 1 } else { count - 4 };
    let third = h / T::lit(3.0);
    let mut i = 0;
    while i < simpson_end {
        w[i] += third;
        w[i + 1] += T::lit(4.0) * third;
        w[i + 2] += third;
        i += 2;
    }
    if count.is_multiple_of(2) {
        let e = T::lit(3.0) * h / T::lit(8.0);
        let s = count - 4;
        w[s] += e;
        w[s + 1] += T::lit(3.0) * e;
        w[s + 2] += T::lit(3.0) * e;
        w[s + 3] += e;
    }
    w
}

/// Integrate `f` over `[a, b]` with `panels` Gauss-Legendre panels of `m` nodes each.
pub fn integrate_panels(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, panels: usize, m: usize) -> f64 {
    let (x, w) = gauss_legendre::<f64>(m);
    let h = (b - a) / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        for (xi, wi) in x.iter().zip(&w) {
            acc += wi * f(lo + 0.5 * h * (xi + 1.0));
        }
    }
    acc * 0.5 * h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for m in [1usize, 2, 5, 16] {
            let (x, w) = gauss_legendre::<f64>(m);
            for p in 0..(2 * m) {
                let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p as i32)).sum();
                let exact = if p % 2 == 0 { 2.0 / (p as f64 + 1.0) } else { 0.0 };
                assert!((got - exact).abs() < 1e-13, "m={m} p={p}: {got} vs {exact}");
            }
        }
    }

    #[test]
    fn simpson_exact_for_cubics() {
        for count in [5usize, 6, 17, 18] {
            let h = 1.0 / (count - 1) as f64;
            let w = simpson_weights::<f64>(count, h);
            let got: f64 = (0..count).map(|i| w[i] * (i as f64 * h).powi(3)).sum();
            assert!((got - 0.25).abs() < 1e-14, "count={count}: {got}");
        }
    }

    #[test]
    fn panels_integrate_smooth_function() {
        let got = integrate_panels(f64::exp, 0.0, 1.0, 4, 8);
        assert!((got - (std::f64::consts::E - 1.0)).abs() < 1e-14);
    }
}

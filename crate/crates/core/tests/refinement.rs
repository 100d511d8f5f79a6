use sigma_flow::geometry::{ConformalField, Geometry};
use std::f64::consts::PI;

type Profile = fn(f64) -> (f64, f64, f64);

fn max_eigen_error(g: &Geometry<f64>, f: Profile) -> f64 {
    let x = g.nodes();
    let u: Vec<f64> = x.iter().map(|&t| f(t).0).collect();
    let fd = g.schouten_eigenvalues(&g.derivatives(&u));
    let exact = ConformalField::from_parts(
        u.clone(),
        x.iter().map(|&t| f(t).1).collect(),
        x.iter().map(|&t| f(t).2).collect(),
    )
    .unwrap();
    let ex = g.schouten_eigenvalues(&exact);
    (0..x.len())
        .map(|i| (fd.radial[i] - ex.radial[i]).abs().max((fd.tangential[i] - ex.tangential[i]).abs()))
        .fold(0.0, f64::max)
}

fn assert_rate(errs: &[f64], min_ratio: f64) {
    for w in errs.windows(2) {
        assert!(w[0] / w[1] >= min_ratio, "{errs:?}");
    }
}

#[test]
fn sphere_refinement() {
    let f: Profile = |t| (0.3 * t.cos() + 0.1 * (2.0 * t).cos(), -0.3 * t.sin() - 0.2 * (2.0 * t).sin(), -0.3 * t.cos() - 0.4 * (2.0 * t).cos());
    let errs: Vec<f64> = [32, 64, 128, 256].iter().map(|&m| max_eigen_error(&Geometry::round_sphere(5, m).unwrap(), f)).collect();
    assert_rate(&errs, 8.0);
}

#[test]
fn product_refinement() {
    let l = 2.0 * PI;
    let f: Profile = |t| (0.1 * t.sin(), 0.1 * t.cos(), -0.1 * t.sin());
    let errs: Vec<f64> = [32, 64, 128, 256]
        .iter()
        .map(|&m| max_eigen_error(&Geometry::product_circle_sphere(5, m, l).unwrap(), f))
        .collect();
    assert_rate(&errs, 8.0);
}

#[test]
fn radial_refinement() {
    let f: Profile = |r| (0.3 * (1.0 + r * r).ln(), 0.6 * r / (1.0 + r * r), 0.6 * (1.0 - r * r) / (1.0 + r * r).powi(2));
    let errs: Vec<f64> = [33, 65, 129, 257]
        .iter()
        .map(|&m| max_eigen_error(&Geometry::radial_euclidean(5, m, 0.2, 3.0).unwrap(), f))
        .collect();
    assert_rate(&errs, 8.0);
}

#[test]
fn sphere_pole_values_stay_bounded() {
    // smooth even u: the first node's eigenvalues converge instead of blowing up
    let first = |m: usize| {
        let g = Geometry::<f64>::round_sphere(4, m).unwrap();
        let u: Vec<f64> = g.nodes().iter().map(|t| 0.3 * t.cos()).collect();
        let w = g.schouten_eigenvalues(&g.derivatives(&u));
        (w.radial[0], w.tangential[0])
    };
    // exact limit at theta = 0: u'' = -0.3, cot(theta) u' -> u''
    let (a, b) = (0.5 - 0.3, 0.5 - 0.3);
    let mut prev = f64::INFINITY;
    for m in [64, 128, 256, 512] {
        let (r, t) = first(m);
        let err = (r - a).abs().max((t - b).abs());
        assert!(err < prev && err < 1e-3, "m={m}: {r} {t}");
        prev = err;
    }
}

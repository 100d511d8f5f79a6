#![allow(clippy::needless_range_loop)]

use nalgebra::DMatrix;
use proptest::prelude::*;
use sigma_flow::sampling::ConeSampler;
use sigma_flow::symfun::{
    deleted_symmetric, elementary_symmetric, garding_gap, newton_transform, quotient_coefficients, quotient_value,
    tilde_newton_diag, EigenvalueVector, SquareMatrix, SymmetricTable,
};

fn brute(v: &[f64], k: usize) -> (f64, f64) {
    let n = v.len();
    let (mut s, mut scale) = (0.0, 0.0);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize == k {
            let p: f64 = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| v[i]).product();
            s += p;
            scale += p.abs();
        }
    }
    (s, scale.max(1e-300))
}

fn spectrum() -> impl Strategy<Value = Vec<f64>> {
    (1usize..=6).prop_flat_map(|n| prop::collection::vec(-3.0f64..3.0, n))
}

/// `(n, k, seed)` with `1 <= k <= n`.
fn cone_case() -> impl Strategy<Value = (usize, usize, u64)> {
    (3usize..=6).prop_flat_map(|n| (Just(n), 1..=n, any::<u64>()))
}

fn to_square(m: &DMatrix<f64>) -> SquareMatrix<f64> {
    let rows: Vec<Vec<f64>> = (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect();
    SquareMatrix::from_rows(&rows).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn elementary_matches_subset_sums(v in spectrum()) {
        let s = elementary_symmetric(&v);
        for k in 0..=v.len() {
            let (b, scale) = brute(&v, k);
            prop_assert!((s[k] - b).abs() <= 1e-13 * scale, "k={} {} vs {}", k, s[k], b);
        }
    }

    #[test]
    fn deleted_matches_removal(v in spectrum()) {
        let d = deleted_symmetric(&v);
        for i in 0..v.len() {
            let rest: Vec<f64> = v.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, x)| *x).collect();
            for k in 0..v.len() {
                let (b, scale) = brute(&rest, k);
                prop_assert!((d[i][k] - b).abs() <= 1e-13 * scale);
            }
        }
    }

    #[test]
    fn newton_transform_is_equivariant(v in prop::collection::vec(-2.0f64..2.0, 2..=6), seed in prop::collection::vec(-1.0f64..1.0, 36)) {
        let n = v.len();
        let q = DMatrix::from_fn(n, n, |i, j| seed[i * 6 + j] + if i == j { 2.0 } else { 0.0 }).qr().q();
        let a = &q * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(v.clone())) * q.transpose();
        let a = (&a + a.transpose()) * 0.5;
        let sq = to_square(&a);
        let sig = sq.symmetric_functions();
        let exact = elementary_symmetric(&v);
        let d = deleted_symmetric(&v);
        for k in 0..n {
            prop_assert!((sig[k] - exact[k]).abs() < 1e-10 * (1.0 + exact[k].abs()));
            let t = newton_transform(&sq, k).unwrap();
            let expect = &q * DMatrix::from_fn(n, n, |i, j| if i == j { d[i][k] } else { 0.0 }) * q.transpose();
            for i in 0..n {
                for j in 0..n {
                    prop_assert!((t.get(i, j) - expect[(i, j)]).abs() < 1e-10 * (1.0 + expect.amax()));
                }
            }
            let tr = (n - k) as f64 * exact[k];
            prop_assert!((t.trace() - tr).abs() < 1e-10 * (1.0 + tr.abs()));
        }
    }

    #[test]
    fn quotient_is_homogeneous_and_euler((n, k, seed) in cone_case(), t in 0.1f64..10.0) {
        let mut s = ConeSampler::new(seed, n, k);
        let v = s.sample();
        for l in 0..k {
            let f = quotient_value(&v, k, l);
            let scaled: Vec<f64> = v.iter().map(|x| t * x).collect();
            prop_assert!((quotient_value(&scaled, k, l) / (t * f) - 1.0).abs() < 1e-12);
            let q = quotient_coefficients(&EigenvalueVector::new(v.clone()).unwrap(), k, l).unwrap();
            let euler: f64 = q.diag.iter().zip(&v).map(|(a, b)| a * b).sum();
            prop_assert!((euler / f - 1.0).abs() < 1e-10);
            prop_assert!(q.diag.iter().all(|d| *d > 0.0));
            let table = SymmetricTable::new(&v);
            let td = tilde_newton_diag(&table, k, l);
            let e: f64 = td.iter().zip(&v).map(|(a, b)| a * b).sum();
            prop_assert!((e - (k - l) as f64).abs() < 1e-10 * (k - l) as f64);
            prop_assert!(td.iter().all(|d| *d > 0.0));
        }
    }

    #[test]
    fn garding_vanishes_on_rays((n, k, seed) in cone_case(), t in 0.1f64..10.0) {
        let mut s = ConeSampler::new(seed, n, k);
        let v = s.sample();
        let la = EigenvalueVector::new(v.clone()).unwrap();
        let lb = EigenvalueVector::new(v.iter().map(|x| t * x).collect()).unwrap();
        for l in 0..k {
            prop_assert!(garding_gap(&la, &lb, k, l).unwrap().abs() < 1e-10 * t);
        }
    }
}

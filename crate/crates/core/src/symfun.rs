//! Elementary symmetric functions of spectra, Garding cones and the
//! ellipticity coefficients of the quotient operator `(sigma_k / sigma_l)^{1/(k-l)}`.
//!
//! All `sigma_j` values are read off the coefficients of `prod_i (x + lambda_i)`.
//! The product is expanded as a balanced tree of polynomial multiplications so
//! that rounding accumulates like pairwise summation. The symmetric functions of
//! a deleted vector `Lambda_i` are obtained from prefix/suffix products, which
//! never subtracts `lambda_i` back out of the full expansion.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Ordered Schouten eigenvalues at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenvalueVector<T> {
    values: Vec<T>,
}

impl<T: Real> EigenvalueVector<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.len() < 3 {
            return Err(Error::domain(format!(
                "eigenvalue vector needs n >= 3 entries, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("eigenvalue vector has non-finite entries"));
        }
        Ok(Self { values })
    }

    pub fn from_slice(values: &[T]) -> Result<Self> {
        Self::new(values.to_vec())
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn l1_norm(&self) -> T {
        self.values.iter().fold(T::zero(), |acc, v| acc + v.abs())
    }

    /// Index of the largest entry (first one on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        best
    }
}

impl<T: Real> AsRef<[T]> for EigenvalueVector<T> {
    fn as_ref(&self) -> &[T] {
        &self.values
    }
}

fn poly_mul<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Coefficients of `prod (1 + lambda_i x)` in increasing powers, i.e. `sigma_0..sigma_m`.
fn expand<T: Real>(values: &[T]) -> Vec<T> {
    match values.len() {
        0 => vec![T::one()],
        1 => vec![T::one(), values[0]],
        m => {
            let (lo, hi) = values.split_at(m / 2);
            poly_mul(&expand(lo), &expand(hi))
        }
    }
}

/// All elementary symmetric functions `sigma_0, ..., sigma_n` of `values`.
pub fn elementary_symmetric<T: Real>(values: &[T]) -> Vec<T> {
    expand(values)
}

/// `sigma_j(Lambda_i)` for every deleted index `i` and `j = 0..n-1`.
///
/// Built from prefix and suffix expansions so no cancellation against
/// `lambda_i` occurs.
pub fn deleted_symmetric<T: Real>(values: &[T]) -> Vec<Vec<T>> {
    let n = values.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(vec![T::one()]);
    for &v in values {
        let last = prefix.last().unwrap();
        prefix.push(poly_mul(last, &[T::one(), v]));
    }
    let mut suffix = vec![vec![T::one()]; n + 1];
    for i in (0..n).rev() {
        suffix[i] = poly_mul(&suffix[i + 1], &[T::one(), values[i]]);
    }
    (0..n).map(|i| poly_mul(&prefix[i], &suffix[i + 1])).collect()
}

/// `sigma_k(Lambda)`; `sigma_0 = 1`.
pub fn sigma_k<T: Real>(lambda: &EigenvalueVector<T>, k: usize) -> Result<T> {
    let n = lambda.n();
    if k > n {
        return Err(Error::domain(format!("sigma_k needs 0 <= k <= n = {n}, got k = {k}")));
    }
    Ok(elementary_symmetric(lambda.values())[k])
}

/// `sigma_k(Lambda_i)`, the symmetric function with entry `i` removed.
pub fn sigma_k_deleted<T: Real>(lambda: &EigenvalueVector<T>, k: usize, i: usize) -> Result<T> {
    let n = lambda.n();
    if k > n - 1 {
        return Err(Error::domain(format!("sigma_k(Lambda_i) needs k <= n-1 = {}, got {k}", n - 1)));
    }
    if i >= n {
        return Err(Error::domain(format!("deleted index {i} out of range for n = {n}")));
    }
    let rest: Vec<T> = lambda
        .values()
        .iter()
        .enumerate()
        .filter_map(|(j, &v)| (j != i).then_some(v))
        .collect();
    Ok(elementary_symmetric(&rest)[k])
}

/// Cached symmetric functions of a spectrum and of all its deletions.
#[derive(Debug, Clone)]
pub struct SymmetricTable<T> {
    pub sigma: Vec<T>,
    pub deleted: Vec<Vec<T>>,
}

impl<T: Real> SymmetricTable<T> {
    pub fn new(values: &[T]) -> Self {
        Self { sigma: elementary_symmetric(values), deleted: deleted_symmetric(values) }
    }

    pub fn n(&self) -> usize {
        self.sigma.len() - 1
    }

    /// `sigma_j`, with `sigma_{-1} = 0` encoded by `j = None`.
    fn s(&self, j: Option<usize>) -> T {
        j.map_or(T::zero(), |j| self.sigma[j])
    }

    fn sd(&self, i: usize, j: Option<usize>) -> T {
        j.map_or(T::zero(), |j| self.deleted[i][j])
    }
}

/// Dense square matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Real> SquareMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![T::zero(); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    pub fn from_diagonal(d: &[T]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &v) in d.iter().enumerate() {
            m.data[i * d.len() + i] = v;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::domain("matrix rows must all have length n"));
        }
        Ok(Self { n, data: rows.iter().flatten().copied().collect() })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] = v;
    }

    pub fn trace(&self) -> T {
        (0..self.n).fold(T::zero(), |acc, i| acc + self.get(i, i))
    }

    pub fn mul(&self, other: &Self) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                for j in 0..n {
                    out.data[i * n + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    fn axpy(&mut self, alpha: T, other: &Self) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * *b;
        }
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        let scale = self.data.iter().fold(T::one(), |m, v| m.max(v.abs()));
        (0..self.n).all(|i| (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol * scale))
    }

    /// `sigma_0..sigma_n` of the eigenvalues.
    ///
    /// Sums of principal minors up to `MINOR_EXPANSION_MAX_N`, Newton's identities on
    /// traces of powers beyond that.
    pub fn symmetric_functions(&self) -> Vec<T> {
        let n = self.n;
        if n <= MINOR_EXPANSION_MAX_N {
            let mut e = vec![T::zero(); n + 1];
            e[0] = T::one();
            for mask in 1u32..(1 << n) {
                let idx = mask_indices(mask);
                e[idx.len()] += self.minor_det(&idx, &idx);
            }
            return e;
        }
        let mut power = Self::identity(n);
        let mut p = vec![T::zero(); n + 1];
        for pj in p.iter_mut().skip(1) {
            power = power.mul(self);
            *pj = power.trace();
        }
        let mut e = vec![T::zero(); n + 1];
        e[0] = T::one();
        for k in 1..=n {
            let mut acc = T::zero();
            for i in 1..=k {
                let term = e[k - i] * p[i];
                if i % 2 == 1 {
                    acc += term;
                } else {
                    acc -= term;
                }
            }
            e[k] = acc / T::from_usize_lossy(k);
        }
        e
    }

    /// Determinant of the submatrix on `rows x cols`, LU with partial pivoting.
    fn minor_det(&self, rows: &[usize], cols: &[usize]) -> T {
        let m = rows.len();
        let mut a: Vec<T> = rows.iter().flat_map(|&i| cols.iter().map(move |&j| self.get(i, j))).collect();
        let mut det = T::one();
        for c in 0..m {
            let piv = (c..m).max_by(|&x, &y| a[x * m + c].abs().partial_cmp(&a[y * m + c].abs()).unwrap_or(std::cmp::Ordering::Equal)).unwrap_or(c);
            if a[piv * m + c] == T::zero() {
                return T::zero();
            }
            if piv != c {
                for j in 0..m {
                    a.swap(piv * m + j, c * m + j);
                }
                det = -det;
            }
            let d = a[c * m + c];
            det *= d;
            for r in c + 1..m {
                let f = a[r * m + c] / d;
                if f != T::zero() {
                    for j in c + 1..m {
                        let v = a[c * m + j];
                        a[r * m + j] -= f * v;
                    }
                }
            }
        }
        det
    }
}

/// Largest dimension for which the minor expansions are used.
pub const MINOR_EXPANSION_MAX_N: usize = 10;

fn mask_indices(mask: u32) -> Vec<usize> {
    (0..32).filter(|i| mask & (1 << i) != 0).collect()
}

/// `T_k(A) = sigma_k I - sigma_{k-1} A + ... + (-1)^k A^k`.
///
/// For small `n` the entries are evaluated as `(T_k)_{ij} = d sigma_{k+1} / d a_{ji}`,
/// a sum of cofactors of principal `(k+1)`-minors, which avoids the cancellation in the
/// power series when the spectrum has mixed signs.
pub fn newton_transform<T: Real>(a: &SquareMatrix<T>, k: usize) -> Result<SquareMatrix<T>> {
    let n = a.n();
    if k > n {
        return Err(Error::domain(format!("Newton transform needs k <= n = {n}, got {k}")));
    }
    if !a.is_symmetric(T::lit(1e-12)) {
        return Err(Error::domain("Newton transform requires a symmetric matrix"));
    }
    let mut out = SquareMatrix::zeros(n);
    if n <= MINOR_EXPANSION_MAX_N {
        if k == n {
            return Ok(out);
        }
        for mask in 1u32..(1 << n) {
            if mask.count_ones() as usize != k + 1 {
                continue;
            }
            let idx = mask_indices(mask);
            for (pi, &i) in idx.iter().enumerate() {
                for (pj, &j) in idx.iter().enumerate() {
                    let rows: Vec<usize> = idx.iter().copied().filter(|&r| r != j).collect();
                    let cols: Vec<usize> = idx.iter().copied().filter(|&c| c != i).collect();
                    let m = if k == 0 { T::one() } else { a.minor_det(&rows, &cols) };
                    let v = if (pi + pj) % 2 == 0 { m } else { -m };
                    out.data[i * n + j] += v;
                }
            }
        }
        return Ok(out);
    }
    let sigma = a.symmetric_functions();
    let mut power = SquareMatrix::identity(n);
    for j in 0..=k {
        let coef = if j % 2 == 0 { sigma[k - j] } else { -sigma[k - j] };
        out.axpy(coef, &power);
        power = power.mul(a);
    }
    Ok(out)
}

/// Position of a spectrum relative to the nested Garding cones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeMembership<T> {
    /// Largest `k` with `sigma_j > floor` for every `j <= k`.
    pub max_k: usize,
    /// `min_{1 <= j <= max_k} sigma_j`, or `sigma_1` when `max_k = 0`.
    pub margin: T,
}

impl<T: Real> ConeMembership<T> {
    pub fn contains(&self, k: usize) -> bool {
        self.max_k >= k
    }
}

/// Default absolute floor for `sigma_j`: `1e-14 * max(1, |Lambda|_1^j)`.
pub fn default_floor<T: Real>(l1: T, j: usize) -> T {
    T::lit(1e-14) * T::one().max(l1.powi(j as i32))
}

pub fn cone_membership<T: Real>(lambda: &EigenvalueVector<T>) -> ConeMembership<T> {
    cone_membership_with(lambda.values(), default_floor)
}

/// Cone membership with a caller-supplied floor `floor(|Lambda|_1, j)`.
pub fn cone_membership_with<T: Real>(values: &[T], floor: impl Fn(T, usize) -> T) -> ConeMembership<T> {
    let sigma = elementary_symmetric(values);
    membership_from_sigma(&sigma, values.iter().fold(T::zero(), |a, v| a + v.abs()), floor)
}

pub(crate) fn membership_from_sigma<T: Real>(
    sigma: &[T],
    l1: T,
    floor: impl Fn(T, usize) -> T,
) -> ConeMembership<T> {
    let n = sigma.len() - 1;
    let mut max_k = 0;
    let mut margin = T::infinity();
    for j in 1..=n {
        if sigma[j] > floor(l1, j) {
            max_k = j;
            margin = margin.min(sigma[j]);
        } else {
            break;
        }
    }
    if max_k == 0 {
        margin = sigma[1];
    }
    ConeMembership { max_k, margin }
}

fn check_cone<T: Real>(table: &SymmetricTable<T>, values: &[T], k: usize) -> Result<()> {
    let l1 = values.iter().fold(T::zero(), |a, v| a + v.abs());
    let m = membership_from_sigma(&table.sigma, l1, default_floor);
    if m.contains(k) {
        Ok(())
    } else {
        Err(Error::ConeViolation { k, node: 0, margin: m.margin.to_f64_lossy() })
    }
}

fn check_kl(n: usize, k: usize, l: usize) -> Result<()> {
    if !(l < k && k <= n) {
        return Err(Error::domain(format!("need 0 <= l < k <= n, got n={n}, k={k}, l={l}")));
    }
    Ok(())
}

/// `l(n-k+1) sigma_l sigma_{k-1} - k(n-l+1) sigma_k sigma_{l-1}`; nonnegative on `Gamma_k^+`.
pub fn newton_maclaurin_gap<T: Real>(lambda: &EigenvalueVector<T>, k: usize, l: usize) -> Result<T> {
    let n = lambda.n();
    check_kl(n, k, l)?;
    if l == 0 {
        return Err(Error::domain("Newton-MacLaurin gap needs l >= 1"));
    }
    let table = SymmetricTable::new(lambda.values());
    check_cone(&table, lambda.values(), k)?;
    let s = &table.sigma;
    let lhs = T::from_usize_lossy(l * (n - k + 1)) * s[l] * s[k - 1];
    let rhs = T::from_usize_lossy(k * (n - l + 1)) * s[k] * s[l - 1];
    Ok(lhs - rhs)
}

/// Value and eigenframe derivatives of `F = (sigma_k / sigma_l)^{1/(k-l)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuotientCoefficients<T> {
    pub f_value: T,
    /// `F^{ii} = dF / d lambda_i`.
    pub diag: Vec<T>,
    pub k: usize,
    pub l: usize,
}

/// `F(Lambda)` without the derivative table. Requires `sigma_k, sigma_l > 0`.
pub fn quotient_value<T: Real>(values: &[T], k: usize, l: usize) -> T {
    let s = elementary_symmetric(values);
    (s[k] / s[l]).powf(T::one() / T::from_usize_lossy(k - l))
}

pub fn quotient_coefficients<T: Real>(
    lambda: &EigenvalueVector<T>,
    k: usize,
    l: usize,
) -> Result<QuotientCoefficients<T>> {
    let n = lambda.n();
    check_kl(n, k, l)?;
    let table = SymmetricTable::new(lambda.values());
    check_cone(&table, lambda.values(), k)?;
    let (sk, sl) = (table.sigma[k], table.sigma[l]);
    if sl <= T::zero() {
        return Err(Error::domain("quotient coefficients need sigma_l > 0"));
    }
    let kl = T::from_usize_lossy(k - l);
    let ratio = sk / sl;
    let f_value = ratio.powf(T::one() / kl);
    let f_star = ratio.powf(T::one() / kl - T::one()) / (kl * sl * sl);
    let diag = (0..n)
        .map(|i| f_star * (sl * table.sd(i, Some(k - 1)) - sk * table.sd(i, l.checked_sub(1))))
        .collect();
    Ok(QuotientCoefficients { f_value, diag, k, l })
}

/// Diagonal of `T~_{k-1,l-1} = T_{k-1}/sigma_k - T_{l-1}/sigma_l` in the eigenframe, from a table.
pub fn tilde_newton_diag<T: Real>(table: &SymmetricTable<T>, k: usize, l: usize) -> Vec<T> {
    let (sk, sl) = (table.s(Some(k)), table.s(Some(l)));
    (0..table.n())
        .map(|i| table.sd(i, Some(k - 1)) / sk - table.sd(i, l.checked_sub(1)) / sl)
        .collect()
}

/// Garding gap `sum_i T~_ii(Lambda) mu_i - (k-l) F(Lambda0)/F(Lambda)`; nonnegative on the cone.
pub fn garding_gap<T: Real>(
    lambda: &EigenvalueVector<T>,
    lambda0: &EigenvalueVector<T>,
    k: usize,
    l: usize,
) -> Result<T> {
    let n = lambda.n();
    if lambda0.n() != n {
        return Err(Error::domain("Garding gap needs vectors of equal length"));
    }
    check_kl(n, k, l)?;
    let table = SymmetricTable::new(lambda.values());
    check_cone(&table, lambda.values(), k)?;
    let table0 = SymmetricTable::new(lambda0.values());
    check_cone(&table0, lambda0.values(), k)?;
    let d = tilde_newton_diag(&table, k, l);
    let lhs = d.iter().zip(lambda0.values()).fold(T::zero(), |acc, (a, b)| acc + *a * *b);
    let kl = T::from_usize_lossy(k - l);
    let f = (table.sigma[k] / table.sigma[l]).powf(T::one() / kl);
    let f0 = (table0.sigma[k] / table0.sigma[l]).powf(T::one() / kl);
    Ok(lhs - kl * f0 / f)
}

/// Result of the trace-to-largest-direction ellipticity comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticityBound<T> {
    /// `sum_i F^{ii} / F^{11}` with index 1 the largest eigenvalue.
    pub ratio: T,
    /// `(n-k+1)(n-l+1)/(n+1)`.
    pub alpha0: T,
}

impl<T: Real> EllipticityBound<T> {
    /// Excess of the lower bound over 2, `alpha0 - 2`.
    pub fn excess_over_two(&self) -> T {
        self.alpha0 - T::lit(2.0)
    }
}

pub fn ellipticity_ratio_bound<T: Real>(
    lambda: &EigenvalueVector<T>,
    k: usize,
    l: usize,
) -> Result<EllipticityBound<T>> {
    let n = lambda.n();
    check_kl(n, k, l)?;
    if (n - k + 1) * (n - l + 1) <= 2 * (n + 1) {
        return Err(Error::domain(format!(
            "restriction (n-k+1)(n-l+1) > 2(n+1) violated for n={n}, k={k}, l={l}"
        )));
    }
    let top = lambda.argmax();
    if lambda.values()[top] <= T::zero() {
        return Err(Error::domain("ellipticity bound needs a positive largest eigenvalue"));
    }
    let q = quotient_coefficients(lambda, k, l)?;
    let total = q.diag.iter().fold(T::zero(), |a, b| a + *b);
    let alpha0 = T::from_usize_lossy((n - k + 1) * (n - l + 1)) / T::from_usize_lossy(n + 1);
    Ok(EllipticityBound { ratio: total / q.diag[top], alpha0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(v: &[f64]) -> EigenvalueVector<f64> {
        EigenvalueVector::from_slice(v).unwrap()
    }

    /// Subset enumeration oracle.
    fn brute_sigma(v: &[f64], k: usize) -> f64 {
        let n = v.len();
        (0u32..(1 << n))
            .filter(|m| m.count_ones() as usize == k)
            .map(|m| (0..n).filter(|i| m & (1 << i) != 0).map(|i| v[i]).product::<f64>())
            .sum()
    }

    #[test]
    fn sigma_examples() {
        assert_eq!(sigma_k(&ev(&[1.0, 1.0, 1.0, 1.0]), 2).unwrap(), 6.0);
        let cyl = ev(&[-0.5, 0.5, 0.5, 0.5, 0.5]);
        assert!((brute_sigma(cyl.values(), 2) - 0.5).abs() < 1e-15);
        assert!((sigma_k(&cyl, 2).unwrap() - 0.5).abs() < 1e-15);
        assert!((sigma_k(&ev(&[2.0; 5]), 3).unwrap() - 80.0).abs() < 1e-12);
        assert_eq!(sigma_k(&cyl, 0).unwrap(), 1.0);
        assert!(matches!(sigma_k(&cyl, 6), Err(Error::Domain(_))));
    }

    #[test]
    fn sigma_deleted_examples() {
        assert_eq!(sigma_k_deleted(&ev(&[1.0, 1.0, 1.0]), 1, 0).unwrap(), 2.0);
        let cyl = ev(&[-0.5, 0.5, 0.5, 0.5, 0.5]);
        assert!((brute_sigma(&[0.5; 4], 2) - 1.5).abs() < 1e-15);
        assert!((sigma_k_deleted(&cyl, 2, 0).unwrap() - 1.5).abs() < 1e-15);
        assert!(sigma_k_deleted(&cyl, 5, 0).is_err());
        assert!(sigma_k_deleted(&cyl, 1, 5).is_err());
        let table = SymmetricTable::new(cyl.values());
        for i in 0..5 {
            for k in 1..5 {
                let rec = table.sigma[k] - table.deleted[i][k] - cyl.values()[i] * table.deleted[i][k - 1];
                assert!(rec.abs() < 1e-14);
                assert_eq!(table.deleted[i][k], sigma_k_deleted(&cyl, k, i).unwrap());
            }
        }
    }

    #[test]
    fn deleted_is_stable_when_one_entry_dominates() {
        let v = [1e12, 1e-3, 2e-3, 3e-3];
        let table = SymmetricTable::new(&v);
        let exact = brute_sigma(&v[1..], 3);
        assert!((table.deleted[0][3] - exact).abs() <= 1e-15 * exact.abs());
    }

    #[test]
    fn newton_transform_basics() {
        let a = SquareMatrix::from_diagonal(&[0.3, -0.2, 1.1, 0.7]);
        assert_eq!(newton_transform(&a, 0).unwrap(), SquareMatrix::identity(4));
        let t = newton_transform(&a, 2).unwrap();
        let table = SymmetricTable::<f64>::new(&[0.3, -0.2, 1.1, 0.7]);
        for i in 0..4 {
            assert!((t.get(i, i) - table.deleted[i][2]).abs() < 1e-14);
        }
        let ns = SquareMatrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!(newton_transform(&ns, 1).is_err());
    }

    #[test]
    fn cone_examples() {
        assert_eq!(cone_membership(&ev(&[1.0, 1.0, 1.0])).max_k, 3);
        assert_eq!(cone_membership(&ev(&[1.0, 1.0, -1.0])).max_k, 1);
        let cyl = ev(&[-0.5, 0.5, 0.5, 0.5, 0.5]);
        assert!((brute_sigma(cyl.values(), 3) + 0.25).abs() < 1e-15);
        let m = cone_membership(&cyl);
        assert_eq!(m.max_k, 2);
        assert!((m.margin - 0.5).abs() < 1e-15);
        let neg = cone_membership(&ev(&[-1.0, -1.0, 0.5]));
        assert_eq!(neg.max_k, 0);
        assert!(neg.margin < 0.0);
    }

    #[test]
    fn newton_maclaurin_examples() {
        assert_eq!(newton_maclaurin_gap(&ev(&[1.0, 1.0, 1.0]), 2, 1).unwrap(), 0.0);
        assert!((newton_maclaurin_gap(&ev(&[2.0, 1.0, 1.0]), 2, 1).unwrap() - 2.0).abs() < 1e-13);
        assert!(matches!(
            newton_maclaurin_gap(&ev(&[1.0, 1.0, -1.0]), 2, 1),
            Err(Error::ConeViolation { .. })
        ));
    }

    #[test]
    fn quotient_examples() {
        let q = quotient_coefficients(&ev(&[1.0; 4]), 2, 1).unwrap();
        assert!((q.f_value - 1.5).abs() < 1e-15);
        let v = [0.9, 0.2, -0.1, 0.5, 0.4];
        let q = quotient_coefficients(&ev(&v), 2, 1).unwrap();
        let euler: f64 = q.diag.iter().zip(v).map(|(d, l)| d * l).sum();
        assert!((euler - q.f_value).abs() < 1e-14);
        assert!(q.diag.iter().all(|d| *d > 0.0));
    }

    #[test]
    fn garding_examples() {
        let a = ev(&[0.9, 0.2, -0.1, 0.5, 0.4]);
        let b = ev(&[0.3, 0.6, 0.1, 0.2, 0.8]);
        assert!(garding_gap(&a, &a, 2, 1).unwrap().abs() < 1e-14);
        let g = garding_gap(&a, &b, 2, 1).unwrap();
        let b3 = ev(&b.values().iter().map(|x| 3.0 * x).collect::<Vec<_>>());
        assert!((garding_gap(&a, &b3, 2, 1).unwrap() - 3.0 * g).abs() < 1e-13);
        assert!(g >= 0.0);
    }

    #[test]
    fn ellipticity_examples() {
        let b = ellipticity_ratio_bound(&ev(&[1.0; 5]), 2, 0).unwrap();
        assert_eq!(b.alpha0, 4.0);
        assert!((b.ratio - 5.0).abs() < 1e-14);
        assert_eq!(b.excess_over_two(), 2.0);
        assert!(matches!(ellipticity_ratio_bound(&ev(&[1.0; 5]), 3, 2), Err(Error::Domain(_))));
    }

    #[test]
    fn works_in_single_precision() {
        let v = EigenvalueVector::<f32>::from_slice(&[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(sigma_k(&v, 2).unwrap(), 6.0f32);
        assert!((quotient_coefficients(&v, 2, 1).unwrap().f_value - 1.5).abs() < 1e-6);
    }
}

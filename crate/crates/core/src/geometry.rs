//! Symmetry-reduced background geometries, finite differences on their 1D
//! grids, and the conformal change of the Schouten tensor.
//!
//! A conformal factor `u` defines `g = e^{-2u} g_0`. For every supported
//! background, `W = Hess u + du (x) du - |du|^2/2 g_0 + S_{g_0}` is diagonal in
//! the frame `{d/ds, tangential}` with one "radial" eigenvalue and `n - 1` equal
//! tangential ones:
//!
//! | background            | radial                    | tangential                        |
//! |-----------------------|---------------------------|-----------------------------------|
//! | round `S^n`           | `u'' + u'^2/2 + 1/2`      | `cot(theta) u' - u'^2/2 + 1/2`    |
//! | `S^1 x S^{n-1}`       | `u'' + u'^2/2 - 1/2`      | `-u'^2/2 + 1/2`                   |
//! | radial `R^n`          | `u'' + u'^2/2`            | `u'/r - u'^2/2`                   |

use crate::error::{Error, Result};
use crate::quadrature::simpson_weights;
use crate::scalar::{binomial, sphere_volume, Real};
use crate::symfun::{elementary_symmetric, EigenvalueVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GeometryKind {
    RoundSphere,
    ProductCircleSphere,
    RadialEuclidean,
}

impl GeometryKind {
    pub fn name(self) -> &'static str {
        match self {
            GeometryKind::RoundSphere => "round_sphere",
            GeometryKind::ProductCircleSphere => "product_circle_sphere",
            GeometryKind::RadialEuclidean => "radial_euclidean",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "round_sphere" | "sphere" => Some(GeometryKind::RoundSphere),
            "product_circle_sphere" | "product" => Some(GeometryKind::ProductCircleSphere),
            "radial_euclidean" | "radial" => Some(GeometryKind::RadialEuclidean),
            _ => None,
        }
    }
}

/// Background manifold, dimension and grid.
#[derive(Debug, Clone)]
pub struct Geometry<T> {
    kind: GeometryKind,
    n: usize,
    nodes: Vec<T>,
    /// Uniform spacing of the computational coordinate (`theta`, `t` or `log r`).
    h: T,
    circle_length: T,
    radial_domain: (T, T),
    /// Quadrature weight of `dg_0` at each node.
    base_weights: Vec<T>,
    /// First-order coefficient of the tangential Hessian: `cot(theta)`, `0` or `1/r`.
    tangential_factor: Vec<T>,
}

pub const MIN_GRID: usize = 16;

impl<T: Real> Geometry<T> {
    fn check(n: usize, grid_size: usize) -> Result<()> {
        if n < 3 {
            return Err(Error::domain(format!("dimension n must be >= 3, got {n}")));
        }
        if grid_size < MIN_GRID {
            return Err(Error::domain(format!("grid_size must be >= {MIN_GRID}, got {grid_size}")));
        }
        Ok(())
    }

    /// Unit round sphere, cell-centred polar grid on `[0, pi]`.
    pub fn round_sphere(n: usize, grid_size: usize) -> Result<Self> {
        Self::check(n, grid_size)?;
        let h = T::PI() / T::from_usize_lossy(grid_size);
        let half = T::lit(0.5);
        let nodes: Vec<T> = (0..grid_size).map(|i| (T::from_usize_lossy(i) + half) * h).collect();
        let area = sphere_volume::<T>(n - 1);
        let base_weights = nodes.iter().map(|&th| area * th.sin().powi(n as i32 - 1) * h).collect();
        let tangential_factor = nodes.iter().map(|&th| th.cos() / th.sin()).collect();
        Ok(Self {
            kind: GeometryKind::RoundSphere,
            n,
            nodes,
            h,
            circle_length: T::zero(),
            radial_domain: (T::zero(), T::zero()),
            base_weights,
            tangential_factor,
        })
    }

    /// `S^1(L) x S^{n-1}` with the product metric, periodic grid on `[0, L)`.
    pub fn product_circle_sphere(n: usize, grid_size: usize, circle_length: T) -> Result<Self> {
        Self::check(n, grid_size)?;
        if !(circle_length > T::zero()) {
            return Err(Error::domain("circle_length must be positive"));
        }
        let h = circle_length / T::from_usize_lossy(grid_size);
        let nodes = (0..grid_size).map(|i| T::from_usize_lossy(i) * h).collect();
        let area = sphere_volume::<T>(n - 1);
        Ok(Self {
            kind: GeometryKind::ProductCircleSphere,
            n,
            nodes,
            h,
            circle_length,
            radial_domain: (T::zero(), T::zero()),
            base_weights: vec![area * h; grid_size],
            tangential_factor: vec![T::zero(); grid_size],
        })
    }

    /// Flat `R^n` restricted to the annulus `r_min <= |x| <= r_max`, log-spaced grid.
    pub fn radial_euclidean(n: usize, grid_size: usize, r_min: T, r_max: T) -> Result<Self> {
        Self::check(n, grid_size)?;
        if !(r_min > T::zero() && r_max > r_min) {
            return Err(Error::domain("radial domain needs 0 < r_min < r_max"));
        }
        let span = (r_max / r_min).ln();
        let h = span / T::from_usize_lossy(grid_size - 1);
        let nodes: Vec<T> = (0..grid_size).map(|i| r_min * (T::from_usize_lossy(i) * h).exp()).collect();
        let area = sphere_volume::<T>(n - 1);
        let simpson = simpson_weights(grid_size, h);
        // dr = r d(log r)
        let base_weights = nodes.iter().zip(&simpson).map(|(&r, &w)| area * r.powi(n as i32) * w).collect();
        let tangential_factor = nodes.iter().map(|&r| T::one() / r).collect();
        Ok(Self {
            kind: GeometryKind::RadialEuclidean,
            n,
            nodes,
            h,
            circle_length: T::zero(),
            radial_domain: (r_min, r_max),
            base_weights,
            tangential_factor,
        })
    }

    pub fn kind(&self) -> GeometryKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn grid_size(&self) -> usize {
        self.nodes.len()
    }

    /// Node coordinates: `theta`, `t` or `r`.
    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn spacing(&self) -> T {
        self.h
    }

    pub fn circle_length(&self) -> T {
        self.circle_length
    }

    pub fn radial_domain(&self) -> (T, T) {
        self.radial_domain
    }

    pub fn tangential_factor(&self) -> &[T] {
        &self.tangential_factor
    }

    /// Background Schouten eigenvalues `(radial, tangential)`.
    pub fn background(&self) -> (T, T) {
        let half = T::lit(0.5);
        match self.kind {
            GeometryKind::RoundSphere => (half, half),
            GeometryKind::ProductCircleSphere => (-half, half),
            GeometryKind::RadialEuclidean => (T::zero(), T::zero()),
        }
    }

    /// Background Schouten spectrum at a node.
    pub fn background_eigenvalues(&self, _node: usize) -> EigenvalueVector<T> {
        let (a, b) = self.background();
        let mut v = vec![b; self.n];
        v[0] = a;
        EigenvalueVector::new(v).expect("background spectrum is finite with n >= 3")
    }

    /// Quadrature weight of the background volume `dg_0` at every node.
    pub fn base_weights(&self) -> &[T] {
        &self.base_weights
    }

    /// Total background volume.
    pub fn background_volume(&self) -> T {
        self.base_weights.iter().fold(T::zero(), |a, b| a + *b)
    }

    /// First and second derivatives of node values in the geometric coordinate.
    pub fn differentiate(&self, u: &[T]) -> (Vec<T>, Vec<T>) {
        assert_eq!(u.len(), self.grid_size(), "node vector length must match grid");
        match self.kind {
            GeometryKind::RoundSphere => central_with_ghosts(u, self.h, |i, m| {
                // even reflection through both poles
                let m = m as isize;
                if i < 0 {
                    (-i - 1) as usize
                } else if i >= m {
                    (2 * m - 1 - i) as usize
                } else {
                    i as usize
                }
            }),
            GeometryKind::ProductCircleSphere => {
                central_with_ghosts(u, self.h, |i, m| i.rem_euclid(m as isize) as usize)
            }
            GeometryKind::RadialEuclidean => {
                let (d1, d2) = one_sided_closed(u, self.h);
                let mut du = Vec::with_capacity(u.len());
                let mut d2u = Vec::with_capacity(u.len());
                for (i, &r) in self.nodes.iter().enumerate() {
                    du.push(d1[i] / r);
                    d2u.push((d2[i] - d1[i]) / (r * r));
                }
                (du, d2u)
            }
        }
    }

    /// Builds the [`ConformalField`] of node values `u`.
    pub fn derivatives(&self, u: &[T]) -> ConformalField<T> {
        let (du, d2u) = self.differentiate(u);
        ConformalField { u: u.to_vec(), du, d2u }
    }

    /// Pointwise Schouten spectrum of `W` for the conformal factor in `field`.
    pub fn schouten_eigenvalues(&self, field: &ConformalField<T>) -> PointwiseSchouten<T> {
        let (sr, st) = self.background();
        let half = T::lit(0.5);
        let m = self.grid_size();
        let mut radial = Vec::with_capacity(m);
        let mut tangential = Vec::with_capacity(m);
        for i in 0..m {
            let (d1, d2) = (field.du[i], field.d2u[i]);
            let q = half * d1 * d1;
            radial.push(d2 + q + sr);
            tangential.push(self.tangential_first_order(i, d1, d2) - q + st);
        }
        PointwiseSchouten { n: self.n, radial, tangential }
    }

    /// Tangential Hessian entry of a radial function: `factor * f'`, with the
    /// pole limit `f''` on the sphere.
    pub fn tangential_first_order(&self, node: usize, d1: T, d2: T) -> T {
        if self.kind == GeometryKind::RoundSphere {
            let th = self.nodes[node];
            if th.sin() < T::lit(1e-10) {
                return d2;
            }
        }
        self.tangential_factor[node] * d1
    }

    /// Quadrature weight of `dg = e^{-nu} dg_0` at `node`.
    pub fn volume_element(&self, field: &ConformalField<T>, node: usize) -> T {
        self.base_weights[node] * (-T::from_usize_lossy(self.n) * field.u[node]).exp()
    }

    /// `sum_i w_i f_i` with background weights.
    pub fn integrate_background(&self, f: &[T]) -> T {
        self.base_weights.iter().zip(f).fold(T::zero(), |a, (w, v)| a + *w * *v)
    }
}

fn central_with_ghosts<T: Real>(u: &[T], h: T, index: impl Fn(isize, usize) -> usize) -> (Vec<T>, Vec<T>) {
    let m = u.len();
    let at = |i: isize| u[index(i, m)];
    let c8 = T::lit(8.0);
    let c16 = T::lit(16.0);
    let c30 = T::lit(30.0);
    let d1s = (T::lit(12.0) * h).recip();
    let d2s = (T::lit(12.0) * h * h).recip();
    let mut du = vec![T::zero(); m];
    let mut d2u = vec![T::zero(); m];
    let mut put = |i: usize, um2: T, um1: T, u0: T, up1: T, up2: T| {
        du[i] = (-up2 + c8 * up1 - c8 * um1 + um2) * d1s;
        d2u[i] = (-up2 + c16 * up1 - c30 * u0 + c16 * um1 - um2) * d2s;
    };
    for w in 0..m.saturating_sub(4) {
        let s = &u[w..w + 5];
        put(w + 2, s[0], s[1], s[2], s[3], s[4]);
    }
    for i in [0, 1, m - 2, m - 1] {
        let i = i as isize;
        put(i as usize, at(i - 2), at(i - 1), at(i), at(i + 1), at(i + 2));
    }
    (du, d2u)
}

/// Fourth-order derivatives on a non-periodic uniform grid, one-sided near the ends.
fn one_sided_closed<T: Real>(u: &[T], h: T) -> (Vec<T>, Vec<T>) {
    let m = u.len();
    let c = |x: f64| T::lit(x);
    let d1s = c(12.0) * h;
    let d2s = c(12.0) * h * h;
    let first = |w: [f64; 5], s: &[T]| w.iter().zip(s).fold(T::zero(), |a, (w, v)| a + c(*w) * *v);
    let second = |w: [f64; 6], s: &[T]| w.iter().zip(s).fold(T::zero(), |a, (w, v)| a + c(*w) * *v);
    const D1_0: [f64; 5] = [-25.0, 48.0, -36.0, 16.0, -3.0];
    const D1_1: [f64; 5] = [-3.0, -10.0, 18.0, -6.0, 1.0];
    const D2_0: [f64; 6] = [45.0, -154.0, 214.0, -156.0, 61.0, -10.0];
    const D2_1: [f64; 6] = [10.0, -15.0, -4.0, 14.0, -6.0, 1.0];
    let rev: Vec<T> = u.iter().rev().copied().collect();
    let mut du = vec![T::zero(); m];
    let mut d2u = vec![T::zero(); m];
    du[0] = first(D1_0, &u[0..5]) / d1s;
    du[1] = first(D1_1, &u[0..5]) / d1s;
    du[m - 1] = -first(D1_0, &rev[0..5]) / d1s;
    du[m - 2] = -first(D1_1, &rev[0..5]) / d1s;
    d2u[0] = second(D2_0, &u[0..6]) / d2s;
    d2u[1] = second(D2_1, &u[0..6]) / d2s;
    d2u[m - 1] = second(D2_0, &rev[0..6]) / d2s;
    d2u[m - 2] = second(D2_1, &rev[0..6]) / d2s;
    for i in 2..m - 2 {
        du[i] = (-u[i + 2] + c(8.0) * u[i + 1] - c(8.0) * u[i - 1] + u[i - 2]) / d1s;
        d2u[i] = (-u[i + 2] + c(16.0) * u[i + 1] - c(30.0) * u[i] + c(16.0) * u[i - 1] - u[i - 2]) / d2s;
    }
    (du, d2u)
}

/// Conformal factor and its discrete derivatives on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ConformalField<T> {
    u: Vec<T>,
    du: Vec<T>,
    d2u: Vec<T>,
}

impl<T: Real> ConformalField<T> {
    /// Field with externally supplied derivatives (analytic oracles, exact profiles).
    pub fn from_parts(u: Vec<T>, du: Vec<T>, d2u: Vec<T>) -> Result<Self> {
        if u.len() != du.len() || u.len() != d2u.len() {
            return Err(Error::domain("u, du and d2u must have equal length"));
        }
        Ok(Self { u, du, d2u })
    }

    pub fn u(&self) -> &[T] {
        &self.u
    }

    pub fn du(&self) -> &[T] {
        &self.du
    }

    pub fn d2u(&self) -> &[T] {
        &self.d2u
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn max_abs_gradient(&self) -> T {
        self.du.iter().fold(T::zero(), |m, d| m.max(d.abs()))
    }
}

/// Spectrum of `W` node by node: one radial and `n - 1` equal tangential eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct PointwiseSchouten<T> {
    pub n: usize,
    pub radial: Vec<T>,
    pub tangential: Vec<T>,
}

impl<T: Real> PointwiseSchouten<T> {
    pub fn len(&self) -> usize {
        self.radial.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radial.is_empty()
    }

    pub fn eigenvalues(&self, node: usize) -> EigenvalueVector<T> {
        let mut v = vec![self.tangential[node]; self.n];
        v[0] = self.radial[node];
        EigenvalueVector::new(v).expect("finite spectrum")
    }

    /// `sigma_0..sigma_n` of `W` at a node (closed form for a two-valued spectrum).
    pub fn sigmas(&self, node: usize) -> Vec<T> {
        two_valued_sigmas(self.radial[node], self.tangential[node], self.n)
    }

    /// `sigma_k(g) = e^{2ku} sigma_k(W)` at every node.
    pub fn conformal_sigma_k(&self, k: usize, u: &[T]) -> Vec<T> {
        (0..self.len())
            .map(|i| (T::lit(2.0) * T::from_usize_lossy(k) * u[i]).exp() * self.sigmas(i)[k])
            .collect()
    }
}

/// `sigma_j(a, b, ..., b)` with `n - 1` copies of `b`, for `j = 0..n`.
pub fn two_valued_sigmas<T: Real>(a: T, b: T, n: usize) -> Vec<T> {
    let m = n - 1;
    let mut out = Vec::with_capacity(n + 1);
    let mut bp = T::one(); // b^{j-1}
    out.push(T::one());
    for j in 1..=n {
        let bj = bp * b;
        out.push(binomial::<T>(m, j) * bj + a * binomial::<T>(m, j - 1) * bp);
        bp = bj;
    }
    out
}

/// `sigma_j` of the spectrum with the radial (`which = 0`) or one tangential
/// (`which = 1`) eigenvalue removed.
pub fn two_valued_deleted<T: Real>(a: T, b: T, n: usize, which: usize) -> Vec<T> {
    if which == 0 {
        let m = n - 1;
        let mut out = Vec::with_capacity(n);
        let mut bj = T::one();
        for j in 0..n {
            out.push(binomial::<T>(m, j) * bj);
            bj *= b;
        }
        out
    } else {
        two_valued_sigmas(a, b, n - 1)
    }
}

/// Cross-check of the closed form against generic expansion.
pub fn sigmas_generic<T: Real>(spectrum: &PointwiseSchouten<T>, node: usize) -> Vec<T> {
    elementary_symmetric(spectrum.eigenvalues(node).values())
}

/// `sigma_k(e^{-2u}|dx|^2)` for a radial factor with `u' = alpha / r`.
///
/// `C(n-1,k)/... ((2 alpha - alpha^2) / (2 r^2))^k (n - 2k + 2k r alpha' / (2 alpha - alpha^2))`,
/// times `e^{2ku}`.
pub fn radial_sigma_k(n: usize, k: usize, r: f64, alpha: f64, alpha_prime: f64, u: f64) -> Result<f64> {
    if k == 0 {
        return Ok(1.0);
    }
    if k > n {
        return Err(Error::domain(format!("k = {k} exceeds n = {n}")));
    }
    if !(r > 0.0) {
        return Err(Error::domain("radial_sigma_k needs r > 0"));
    }
    let shear = 2.0 * alpha - alpha * alpha;
    if shear.abs() < 1e-300 {
        return Err(Error::DegenerateShear(shear));
    }
    let lead = binomial::<f64>(n, k) / n as f64;
    let b = shear / (2.0 * r * r);
    let bracket = (n as f64 - 2.0 * k as f64) + 2.0 * k as f64 * r * alpha_prime / shear;
    Ok((2.0 * k as f64 * u).exp() * lead * b.powi(k as i32) * bracket)
}

/// Radial and tangential `W` eigenvalues of `e^{-2u}|dx|^2` from `u'` and `u''`.
pub fn radial_w_eigenvalues(r: f64, du: f64, d2u: f64) -> (f64, f64) {
    let q = 0.5 * du * du;
    (d2u + q, du / r - q)
}

//! Global curvature functionals, normalizations and sharp constants.

use crate::error::{Error, Result};
use crate::geometry::{two_valued_sigmas, ConformalField, Geometry, GeometryKind};
use crate::quadrature::gauss_legendre_on;
use crate::scalar::{binomial, sphere_volume, Real};
use crate::symfun::{default_floor, membership_from_sigma};

/// Node-wise curvature data of `g = e^{-2u} g_0` for one `(k, l)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Pointwise<T> {
    /// `sigma_k(g)` per node.
    pub sigma_k: Vec<T>,
    /// `sigma_l(g)` per node.
    pub sigma_l: Vec<T>,
    /// `log sigma_k(g) - log sigma_l(g)`; NaN where either is nonpositive.
    pub log_ratio: Vec<T>,
    /// Quadrature weight of `dg` per node.
    pub dg: Vec<T>,
    /// `min_{j <= k} sigma_j(g)` over all nodes.
    pub margin: T,
    /// Node attaining `margin`.
    pub worst_node: usize,
    /// First node failing the cone floor, if any.
    pub violation: Option<usize>,
}

impl<T: Real> Pointwise<T> {
    pub fn admissible(&self) -> bool {
        self.violation.is_none()
    }

    /// Cone error for the worst node.
    pub fn cone_error(&self, k: usize) -> Error {
        Error::ConeViolation { k, node: self.worst_node, margin: self.margin.to_f64_lossy() }
    }

    pub fn into_checked(self, k: usize) -> Result<Self> {
        if self.admissible() {
            Ok(self)
        } else {
            Err(self.cone_error(k))
        }
    }

    /// `int sigma_l(g) dg`.
    pub fn integral_sigma_l(&self) -> T {
        dot(&self.sigma_l, &self.dg)
    }

    pub fn integral_sigma_k(&self) -> T {
        dot(&self.sigma_k, &self.dg)
    }

    /// `log r_{k,l}`: the `sigma_l dg`-weighted mean of `log(sigma_k / sigma_l)`.
    pub fn log_r(&self) -> T {
        let mut num = T::zero();
        let mut den = T::zero();
        for i in 0..self.dg.len() {
            let w = self.sigma_l[i] * self.dg[i];
            num += w * self.log_ratio[i];
            den += w;
        }
        num / den
    }

    /// `sup_node |log(sigma_k/sigma_l)(g) - log r_{k,l}|`.
    pub fn residual(&self) -> T {
        let lr = self.log_r();
        self.log_ratio.iter().fold(T::zero(), |m, v| m.max((*v - lr).abs()))
    }
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (x, y)| s + *x * *y)
}

/// All `sigma_j(g)`, `j = 0..n`, at one node, plus `|Lambda_g|_1`.
pub fn node_sigmas<T: Real>(geom: &Geometry<T>, field: &ConformalField<T>, node: usize) -> (Vec<T>, T) {
    let n = geom.n();
    let (sr, st) = geom.background();
    let (d1, d2) = (field.du()[node], field.d2u()[node]);
    let q = T::lit(0.5) * d1 * d1;
    let a = d2 + q + sr;
    let b = geom.tangential_first_order(node, d1, d2) - q + st;
    let e = (T::lit(2.0) * field.u()[node]).exp();
    let (a, b) = (e * a, e * b);
    (two_valued_sigmas(a, b, n), a.abs() + T::from_usize_lossy(n - 1) * b.abs())
}

/// Pointwise curvature quantities; cone status is recorded, not enforced.
pub fn pointwise<T: Real>(geom: &Geometry<T>, field: &ConformalField<T>, k: usize, l: usize) -> Pointwise<T> {
    let m = geom.grid_size();
    let n = geom.n();
    let mut out = Pointwise {
        sigma_k: Vec::with_capacity(m),
        sigma_l: Vec::with_capacity(m),
        log_ratio: Vec::with_capacity(m),
        dg: Vec::with_capacity(m),
        margin: T::infinity(),
        worst_node: 0,
        violation: None,
    };
    for i in 0..m {
        let (s, l1) = node_sigmas(geom, field, i);
        let mem = membership_from_sigma(&s, l1, default_floor);
        let node_margin = (1..=k).fold(T::infinity(), |acc, j| acc.min(s[j]));
        if node_margin < out.margin {
            out.margin = node_margin;
            out.worst_node = i;
        }
        if !mem.contains(k) && out.violation.is_none() {
            out.violation = Some(i);
        }
        out.sigma_k.push(s[k]);
        out.sigma_l.push(s[l]);
        let lr = if s[k] > T::zero() && s[l] > T::zero() { s[k].ln() - s[l].ln() } else { T::nan() };
        out.log_ratio.push(lr);
        out.dg.push(geom.volume_element(field, i));
        debug_assert_eq!(s.len(), n + 1);
    }
    out
}

/// `int_M sigma_j(g) dg` with no cone check.
pub fn integral_sigma<T: Real>(geom: &Geometry<T>, field: &ConformalField<T>, j: usize) -> T {
    (0..geom.grid_size()).fold(T::zero(), |acc, i| acc + node_sigmas(geom, field, i).0[j] * geom.volume_element(field, i))
}

/// Global functionals of one metric.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalSnapshot<T> {
    pub n: usize,
    pub k: usize,
    pub l: usize,
    pub vol: T,
    /// `int sigma_j(g) dg` for `j = 0..n`.
    pub integral_sigma: Vec<T>,
    /// `F_j = vol^{-(n-2j)/n} int sigma_j dg` for `j = 0..n`.
    pub f: Vec<T>,
    pub r_kl: T,
    /// `int sigma_k dg / int sigma_l dg`.
    pub r_tilde_kl: T,
}

impl<T: Real> FunctionalSnapshot<T> {
    /// `int sigma_j dg / (n - 2j)`; `None` at `j = n/2`, where the energy takes its place.
    pub fn tilde_f(&self, j: usize) -> Option<T> {
        if 2 * j == self.n {
            None
        } else {
            Some(self.integral_sigma[j] / (T::from_usize_lossy(self.n) - T::from_usize_lossy(2 * j)))
        }
    }
}

fn check_kl(n: usize, k: usize, l: usize) -> Result<()> {
    if l < k && k <= n {
        Ok(())
    } else {
        Err(Error::domain(format!("need 0 <= l < k <= n, got n={n}, k={k}, l={l}")))
    }
}

/// Functionals of `g = e^{-2u} g_0`; fails if any node leaves `Gamma_k^+`.
pub fn snapshot<T: Real>(geom: &Geometry<T>, field: &ConformalField<T>, k: usize, l: usize) -> Result<FunctionalSnapshot<T>> {
    let n = geom.n();
    check_kl(n, k, l)?;
    let pw = pointwise(geom, field, k, l).into_checked(k)?;
    let mut integral = vec![T::zero(); n + 1];
    for i in 0..geom.grid_size() {
        let (s, _) = node_sigmas(geom, field, i);
        for (acc, v) in integral.iter_mut().zip(&s) {
            *acc += *v * pw.dg[i];
        }
    }
    let vol = integral[0];
    let nn = T::from_usize_lossy(n);
    let f = (0..=n)
        .map(|j| vol.powf(-(nn - T::from_usize_lossy(2 * j)) / nn) * integral[j])
        .collect();
    Ok(FunctionalSnapshot {
        n,
        k,
        l,
        vol,
        r_kl: pw.log_r().exp(),
        r_tilde_kl: integral[k] / integral[l],
        integral_sigma: integral,
        f,
    })
}

/// Number of Gauss-Legendre nodes in the path integral of [`energy_n_half`].
pub const ENERGY_PATH_NODES: usize = 16;

/// `E_{n/2}(e^{-2u} g_0) = -int_0^1 int_M sigma_{n/2}(g_t) u dg_t dt` on the round sphere.
pub fn energy_n_half<T: Real>(geom: &Geometry<T>, u: &[T]) -> Result<T> {
    energy_n_half_with(geom, u, ENERGY_PATH_NODES)
}

pub fn energy_n_half_with<T: Real>(geom: &Geometry<T>, u: &[T], path_nodes: usize) -> Result<T> {
    let n = geom.n();
    if !n.is_multiple_of(2) {
        return Err(Error::domain(format!("the n/2 energy needs even n, got {n}")));
    }
    if geom.kind() != GeometryKind::RoundSphere {
        return Err(Error::domain("the n/2 energy is defined against a constant-curvature background (round sphere)"));
    }
    let h = n / 2;
    let base = geom.derivatives(u);
    let (ts, ws) = gauss_legendre_on::<T>(path_nodes, T::zero(), T::one());
    let mut energy = T::zero();
    for (t, w) in ts.iter().zip(&ws) {
        let scale = |v: &[T]| v.iter().map(|x| *x * *t).collect::<Vec<T>>();
        let field = ConformalField::from_parts(scale(base.u()), scale(base.du()), scale(base.d2u()))?;
        let mut inner = T::zero();
        for i in 0..geom.grid_size() {
            let (s, l1) = node_sigmas(geom, &field, i);
            for j in 1..=h {
                let tol = T::lit(1e-10) * T::one().max(l1.powi(j as i32));
                if s[j] < -tol {
                    return Err(Error::ConeViolation { k: h, node: i, margin: s[j].to_f64_lossy() });
                }
            }
            inner += s[h] * u[i] * geom.volume_element(&field, i);
        }
        energy -= *w * inner;
    }
    Ok(energy)
}

/// `(int sigma_l dg)^{-(n-2k)/(n-2l)} int sigma_k dg`, invariant under constant shifts of `u`.
pub fn quotient_functional<T: Real>(geom: &Geometry<T>, field: &ConformalField<T>, k: usize, l: usize) -> Result<T> {
    let n = geom.n();
    check_kl(n, k, l)?;
    if 2 * k == n || 2 * l == n {
        return Err(Error::domain("quotient functional needs k != n/2 and l != n/2"));
    }
    let pw = pointwise(geom, field, k, l).into_checked(k)?;
    Ok(quotient_from_integrals(n, k, l, pw.integral_sigma_k(), pw.integral_sigma_l()))
}

/// The quotient functional from the two curvature integrals.
pub fn quotient_from_integrals<T: Real>(n: usize, k: usize, l: usize, int_k: T, int_l: T) -> T {
    let e = (T::from_usize_lossy(n) - T::from_usize_lossy(2 * k)) / (T::from_usize_lossy(n) - T::from_usize_lossy(2 * l));
    int_l.powf(-e) * int_k
}

/// Closed-form sharp constants for one `(n, k, l)`; a constant outside its range is `None`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SharpConstants<T> {
    pub n: usize,
    pub k: usize,
    pub l: usize,
    pub omega_n: T,
    /// Sobolev-type constant of the round sphere, `0 <= l < k < n/2`.
    pub c_s_sphere: Option<T>,
    /// Quermassintegral-type constant, `n/2 <= k <= n`, `1 <= l < k`.
    pub quermass: Option<T>,
    /// Moser-Trudinger constant, `n` even.
    pub c_mt: Option<T>,
}

/// `C(n,k)^{1/(n-2k)} C(n,l)^{-1/(n-2l)} (omega_n^2 / 2^n)^{(k-l)/((n-2k)(n-2l))}`.
pub fn c_s_sphere<T: Real>(n: usize, k: usize, l: usize) -> Result<T> {
    if !(l < k && 2 * k < n) {
        return Err(Error::domain(format!(
            "Sobolev-type constant needs 0 <= l < k < n/2, got n={n}, k={k}, l={l}"
        )));
    }
    let (nf, kf, lf) = (n as f64, k as f64, l as f64);
    let w = sphere_volume::<f64>(n);
    let v = binomial::<f64>(n, k).powf(1.0 / (nf - 2.0 * kf))
        * binomial::<f64>(n, l).powf(-1.0 / (nf - 2.0 * lf))
        * (w * w / 2f64.powi(n as i32)).powf((kf - lf) / ((nf - 2.0 * kf) * (nf - 2.0 * lf)));
    Ok(T::lit(v))
}

/// `C(n,k)^{1/k} C(n,l)^{-1/l}`.
pub fn quermass_const<T: Real>(n: usize, k: usize, l: usize) -> Result<T> {
    if !(2 * k >= n && k <= n && l >= 1 && l < k) {
        return Err(Error::domain(format!(
            "quermassintegral-type constant needs n/2 <= k <= n and 1 <= l < k, got n={n}, k={k}, l={l}"
        )));
    }
    Ok(T::lit(binomial::<f64>(n, k).powf(1.0 / k as f64) * binomial::<f64>(n, l).powf(-1.0 / l as f64)))
}

/// `omega_n 2^{-n/2} C(n, n/2)`, the `sigma_{n/2}` integral of the round sphere.
pub fn c_mt<T: Real>(n: usize) -> Result<T> {
    if !n.is_multiple_of(2) || n < 3 {
        return Err(Error::domain(format!("Moser-Trudinger constant needs even n >= 4, got n={n}")));
    }
    Ok(T::lit(sphere_volume::<f64>(n) * binomial::<f64>(n, n / 2) / 2f64.powi((n / 2) as i32)))
}

pub fn sharp_constants<T: Real>(n: usize, k: usize, l: usize) -> Result<SharpConstants<T>> {
    if n < 3 {
        return Err(Error::domain(format!("dimension must be at least 3, got {n}")));
    }
    check_kl(n, k, l)?;
    Ok(SharpConstants {
        n,
        k,
        l,
        omega_n: sphere_volume(n),
        c_s_sphere: c_s_sphere(n, k, l).ok(),
        quermass: quermass_const(n, k, l).ok(),
        c_mt: c_mt(n).ok(),
    })
}

/// The quotient value on the unit round sphere, `C_S^{n-2k}` in the Sobolev range.
pub fn sphere_quotient<T: Real>(n: usize, k: usize, l: usize) -> Result<T> {
    Ok(c_s_sphere::<T>(n, k, l)?.powi((n - 2 * k) as i32))
}

//! Explicit radial test metrics: a cone-preserving neck on a round-sphere
//! chart, the sphere-neck-cylinder bubble, and the glued blow-up metrics used
//! to approach the sphere value of the quotient functional.
//!
//! All profiles are radial conformal factors `g = e^{-2u}|dx|^2` described by
//! `u(r)` and `alpha(r) = r u'(r)`; curvature comes from
//! [`radial_sigma_k`].

use crate::error::{Error, Result};
use crate::functionals::{quotient_from_integrals, sphere_quotient};
use crate::geometry::radial_sigma_k;
use crate::quadrature::{gauss_legendre_on, integrate_panels};
use crate::scalar::{binomial, sphere_volume};

/// A radial conformal factor on punctured `R^n`.
pub trait RadialProfile {
    fn u(&self, r: f64) -> f64;
    /// `r u'(r)`.
    fn alpha(&self, r: f64) -> f64;
    fn alpha_prime(&self, r: f64) -> f64;
    /// Radii over which the profile is sampled by [`verify_positive`].
    fn sample_range(&self) -> (f64, f64);

    fn sigma(&self, n: usize, k: usize, r: f64) -> Result<f64> {
        radial_sigma_k(n, k, r, self.alpha(r), self.alpha_prime(r), self.u(r))
    }

    /// `min_{1 <= j <= k} sigma_j` at `r`.
    fn cone_margin(&self, n: usize, k: usize, r: f64) -> Result<f64> {
        let mut m = f64::INFINITY;
        for j in 1..=k {
            m = m.min(self.sigma(n, j, r)?);
        }
        Ok(m)
    }
}

/// `m` log-spaced radii covering `[a, b]`.
pub fn log_radii(a: f64, b: f64, m: usize) -> Vec<f64> {
    let (la, lb) = (a.ln(), b.ln());
    (0..m).map(|i| (la + (lb - la) * i as f64 / (m - 1).max(1) as f64).exp()).collect()
}

/// Minimum of `sigma_k` over `grid` log-spaced radii and where it occurs.
pub fn verify_positive(profile: &dyn RadialProfile, n: usize, k: usize, grid: usize) -> Result<(f64, f64)> {
    if k > n {
        return Err(Error::domain(format!("k = {k} exceeds n = {n}")));
    }
    let (a, b) = profile.sample_range();
    let mut best = (f64::INFINITY, a);
    for r in log_radii(a, b, grid) {
        let s = profile.sigma(n, k, r)?;
        if s < best.0 {
            best = (s, r);
        }
    }
    Ok(best)
}

/// Rows `(r, u, alpha, min_{j<=k} sigma_j)` for plotting.
pub fn profile_table(profile: &dyn RadialProfile, n: usize, k: usize, grid: usize) -> Result<Vec<[f64; 4]>> {
    let (a, b) = profile.sample_range();
    log_radii(a, b, grid)
        .into_iter()
        .map(|r| Ok([r, profile.u(r), profile.alpha(r), profile.cone_margin(n, k, r)?]))
        .collect()
}

/// `(n-1)!/(k!(n-k)!)`, the leading factor of the radial formula.
fn radial_lead(n: usize, k: usize) -> f64 {
    binomial::<f64>(n, k) / n as f64
}

/// `sigma_k` of the cylinder `u = log r`: `(n-1)!/(k!(n-k)!) 2^{-k} (n - 2k)`.
pub fn cylinder_sigma(n: usize, k: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    radial_lead(n, k) * 0.5f64.powi(k as i32) * (n as f64 - 2.0 * k as f64)
}

/// The cylinder `u = log r`, `alpha = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cylinder {
    pub r_min: f64,
    pub r_max: f64,
}

impl Default for Cylinder {
    fn default() -> Self {
        Self { r_min: 0.1, r_max: 10.0 }
    }
}

impl RadialProfile for Cylinder {
    fn u(&self, r: f64) -> f64 {
        r.ln()
    }

    fn alpha(&self, _r: f64) -> f64 {
        1.0
    }

    fn alpha_prime(&self, _r: f64) -> f64 {
        0.0
    }

    fn sample_range(&self) -> (f64, f64) {
        (self.r_min, self.r_max)
    }
}

// ---------------------------------------------------------------- bubble

/// Sphere cap, conformal neck and cylinder joined with `C^{1,1}` regularity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BubbleProfile {
    pub delta: f64,
    pub eps0: f64,
    /// `delta^{(3-eps0)/(1-eps0)}`.
    pub delta1: f64,
    pub b0: f64,
}

impl BubbleProfile {
    pub fn new(delta: f64, eps0: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::domain(format!("bubble delta must lie in (0, 1), got {delta}")));
        }
        if !(eps0 > 0.0 && eps0 < 1.0) {
            return Err(Error::domain(format!("eps0 must lie in (0, 1), got {eps0}")));
        }
        let p = (3.0 - eps0) / (1.0 - eps0);
        let q = 2.0 / (1.0 - eps0);
        let d2 = 1.0 + delta * delta;
        Ok(Self { delta, eps0, delta1: delta.powf(p), b0: -d2.ln() - q * (d2 / 2.0).ln() + p * delta.ln() })
    }

    /// `delta^{3 - eps0}`.
    fn d(&self) -> f64 {
        self.delta.powf(3.0 - self.eps0)
    }

    /// Middle-branch `u` without the junction checks.
    pub fn middle_u(&self, r: f64) -> f64 {
        let e = 1.0 - self.eps0;
        -2.0 / e * ((1.0 + self.d() * r.powf(-e)) / 2.0).ln() + (3.0 - self.eps0) / e * self.delta.ln()
    }

    pub fn middle_alpha(&self, r: f64) -> f64 {
        let d = self.d();
        2.0 * d / (d + r.powf(1.0 - self.eps0))
    }

    pub fn outer_u(&self, r: f64) -> f64 {
        (1.0 + r * r).ln() + self.b0
    }

    pub fn outer_alpha(&self, r: f64) -> f64 {
        2.0 * r * r / (1.0 + r * r)
    }

    /// `sigma_k` on the sphere branch: `C(n,k) 2^k e^{2k b0}`.
    pub fn sphere_sigma(&self, n: usize, k: usize) -> f64 {
        binomial::<f64>(n, k) * 2f64.powi(k as i32) * (2.0 * k as f64 * self.b0).exp()
    }

    /// `int_{|x| >= rho} sigma_k dg` over the sphere branch extended to `rho` (any `rho > 0`).
    pub fn sphere_tail(&self, n: usize, k: usize, rho: f64) -> f64 {
        // (1+|x|^2)^{-2}|dx|^2 is a quarter of the unit sphere metric
        let theta = 2.0 * rho.atan();
        let cap = integrate_panels(|t| t.sin().powi(n as i32 - 1), theta, std::f64::consts::PI, 32, 16);
        binomial::<f64>(n, k) * 2f64.powi(k as i32) * 0.5f64.powi(n as i32)
            * (-(n as f64 - 2.0 * k as f64) * self.b0).exp()
            * sphere_volume::<f64>(n - 1)
            * cap
    }

    /// `(vol, int sigma_k dg)` of the band `delta1 < |x| < delta`.
    pub fn bounds(&self, n: usize, k: usize) -> Result<(f64, f64)> {
        bubble_bounds(self, n, k)
    }
}

impl RadialProfile for BubbleProfile {
    fn u(&self, r: f64) -> f64 {
        if r >= self.delta {
            self.outer_u(r)
        } else if r > self.delta1 {
            self.middle_u(r)
        } else {
            r.ln()
        }
    }

    fn alpha(&self, r: f64) -> f64 {
        if r >= self.delta {
            self.outer_alpha(r)
        } else if r > self.delta1 {
            self.middle_alpha(r)
        } else {
            1.0
        }
    }

    fn alpha_prime(&self, r: f64) -> f64 {
        if r >= self.delta {
            4.0 * r / (1.0 + r * r).powi(2)
        } else if r > self.delta1 {
            let e = 1.0 - self.eps0;
            let (d, s) = (self.d(), r.powf(e));
            -2.0 * d * e * s / (r * (d + s) * (d + s))
        } else {
            0.0
        }
    }

    fn sample_range(&self) -> (f64, f64) {
        (self.delta1 / 10.0, 10.0 * self.delta)
    }
}

/// Volume and `sigma_k` integral of the bubble's neck band `delta1 < |x| < delta`.
pub fn bubble_bounds(profile: &BubbleProfile, n: usize, k: usize) -> Result<(f64, f64)> {
    if 2 * k >= n {
        return Err(Error::domain(format!("bubble bounds need k < n/2, got n={n}, k={k}")));
    }
    let area = sphere_volume::<f64>(n - 1);
    let (a, b) = (profile.delta1.ln(), profile.delta.ln());
    let panels = ((b - a) / 0.05).ceil() as usize;
    let vol = area * integrate_panels(|s| volume_density(profile, n, s.exp()), a, b, panels, 10);
    let mut err = None;
    let sig = area
        * integrate_panels(
            |s| {
                let r = s.exp();
                match profile.sigma(n, k, r) {
                    Ok(v) => v * volume_density(profile, n, r),
                    Err(e) => {
                        err.get_or_insert(e);
                        0.0
                    }
                }
            },
            a,
            b,
            panels,
            10,
        );
    match err {
        Some(e) => Err(e),
        None => Ok((vol, sig)),
    }
}

/// `r^n e^{-n u(r)}`: the `d(log r)` volume density without the sphere area.
fn volume_density(p: &dyn RadialProfile, n: usize, r: f64) -> f64 {
    (n as f64 * (r.ln() - p.u(r))).exp()
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let m = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / m, ly.iter().sum::<f64>() / m);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

// ---------------------------------------------------------------- neck

/// Round unit sphere in a stereographic chart, `u0 = log((1 + r^2)/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SphereChart;

impl SphereChart {
    pub fn u0(&self, r: f64) -> f64 {
        ((1.0 + r * r) / 2.0).ln()
    }

    pub fn alpha0(&self, r: f64) -> f64 {
        2.0 * r * r / (1.0 + r * r)
    }

    pub fn alpha0_prime(&self, r: f64) -> f64 {
        4.0 * r / (1.0 + r * r).powi(2)
    }

    /// `max_{|x| <= 1} |grad u0|`.
    pub fn max_gradient(&self) -> f64 {
        1.0
    }

    /// Every Schouten eigenvalue of the unit sphere is 1/2.
    pub fn sigma(&self, n: usize, k: usize) -> f64 {
        binomial::<f64>(n, k) * 0.5f64.powi(k as i32)
    }
}

/// Solution of `(2 - eps) alpha - alpha^2 = -4 (r alpha' - eps alpha)` with parameter `delta`.
pub fn h1_alpha(eps: f64, delta: f64, r: f64) -> f64 {
    2.0 * (1.0 - eps) * delta / (delta + r.powf((1.0 - eps) / 2.0))
}

/// `r d/dr` of [`h1_alpha`].
pub fn h1_log_slope(eps: f64, delta: f64, r: f64) -> f64 {
    let s = r.powf((1.0 - eps) / 2.0);
    -(1.0 - eps) * (1.0 - eps) * delta * s / ((delta + s) * (delta + s))
}

/// `(2 - eps) alpha - alpha^2 + 4 (r alpha' - eps alpha)` for the closed form.
///
/// This is `-3 eps alpha`, not zero: the closed form solves
/// `r alpha' = -(1 - eps)/2 alpha + alpha^2/4` instead (see [`h1_riccati_residual`]).
pub fn h1_ode_residual(eps: f64, delta: f64, r: f64) -> f64 {
    let a = h1_alpha(eps, delta, r);
    (2.0 - eps) * a - a * a + 4.0 * (h1_log_slope(eps, delta, r) - eps * a)
}

/// `r alpha' + (1 - eps)/2 alpha - alpha^2/4` for the closed form.
pub fn h1_riccati_residual(eps: f64, delta: f64, r: f64) -> f64 {
    let a = h1_alpha(eps, delta, r);
    h1_log_slope(eps, delta, r) + 0.5 * (1.0 - eps) * a - 0.25 * a * a
}

/// Lower bound for `sigma_k(A)` used in the neck argument, with the bracket
/// `n - 2k + 2k (r alpha' - eps alpha) / (2 alpha - alpha^2 - eps alpha)`.
pub fn neck_lower_bound(n: usize, k: usize, eps: f64, r: f64, alpha: f64, log_slope: f64) -> f64 {
    let shear = 2.0 * alpha - alpha * alpha - eps * alpha;
    let (nf, kf) = (n as f64, k as f64);
    radial_lead(n, k) * (shear / (2.0 * r * r)).powi(k as i32) * (nf - 2.0 * kf + 2.0 * kf * (log_slope - eps * alpha) / shear)
}

/// `t^3 - t^4/2` clamped: the integral of the smoothstep `3t^2 - 2t^3`.
fn ramp_integral(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        t - 0.5
    } else {
        t * t * t - 0.5 * t * t * t * t
    }
}

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Cubic Hermite on `[0, 1]` with values `y0, y1` and slopes `m0, m1`; returns `(p, p')`.
fn hermite(t: f64, y0: f64, y1: f64, m0: f64, m1: f64) -> (f64, f64) {
    let (t2, t3) = (t * t, t * t * t);
    let p = (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * m0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * m1;
    let dp = (6.0 * t2 - 6.0 * t) * y0 + (3.0 * t2 - 4.0 * t + 1.0) * m0 + (-6.0 * t2 + 6.0 * t) * y1 + (3.0 * t2 - 2.0 * t) * m1;
    (p, dp)
}

/// Cone-preserving neck on the unit disk of a round-sphere chart: `u = u0` for
/// `r >= r0` and `u = a + log r` for `r <= r2`.
#[derive(Debug, Clone, PartialEq)]
pub struct NeckProfile {
    pub n: usize,
    pub k: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub r0: f64,
    pub r1: f64,
    /// Cutoff equals 1 on `r <= r2`.
    pub r2: f64,
    /// Gluing radius, `r2 / 2`.
    pub r3: f64,
    /// Width in `log r` of the smoothing ramp at `r2`.
    pub smoothing_width: f64,
    /// Cylinder constant: `u = a + log r` on `r <= r2`.
    pub a: f64,
    background: SphereChart,
    /// `log r` where the unsmoothed H1 law reaches 1.
    s_h1: f64,
    /// Antiderivative table of `alpha_total` in `log r`, descending from `log r0`.
    knots: Vec<f64>,
    u_at_knots: Vec<f64>,
}

impl NeckProfile {
    fn with_delta(n: usize, k: usize, eps: f64, delta: f64, width: f64, bg: SphereChart) -> Result<Self> {
        let r0 = 0.5f64.min(bg.max_gradient() * eps);
        let r1 = 0.5 * r0;
        let s_h1 = (2.0 / (1.0 - eps)) * (delta * (1.0 - 2.0 * eps)).ln();
        let s2 = s_h1 - 0.5 * width;
        if s_h1 + 0.5 * width >= r1.ln() {
            return Err(Error::Infeasible(format!("delta = {delta:e} leaves no room for the H1 band below r1 = {r1:e}")));
        }
        let mut neck = Self {
            n,
            k,
            epsilon: eps,
            delta,
            r0,
            r1,
            r2: s2.exp(),
            r3: 0.5 * s2.exp(),
            smoothing_width: width,
            a: 0.0,
            background: bg,
            s_h1,
            knots: vec![],
            u_at_knots: vec![],
        };
        neck.tabulate();
        Ok(neck)
    }

    /// Breakpoints in `log r` between smooth pieces, ascending.
    fn breakpoints(&self) -> [f64; 4] {
        let w = self.smoothing_width;
        [self.s_h1 - 0.5 * w, self.s_h1 + 0.5 * w, self.r1.ln(), self.r0.ln()]
    }

    fn tabulate(&mut self) {
        let bp = self.breakpoints();
        let mut knots = vec![bp[3]];
        let mut vals = vec![self.background.u0(self.r0)];
        for seg in (0..3).rev() {
            let (lo, hi) = (bp[seg], bp[seg + 1]);
            let cells = ((hi - lo) / 0.02).ceil().max(1.0) as usize;
            for c in (0..cells).rev() {
                let a = lo + (hi - lo) * c as f64 / cells as f64;
                let b = lo + (hi - lo) * (c + 1) as f64 / cells as f64;
                let (x, w) = gauss_legendre_on::<f64>(10, a, b);
                let inc: f64 = x.iter().zip(&w).map(|(s, w)| w * self.alpha_total(s.exp())).sum();
                knots.push(a);
                vals.push(vals.last().unwrap() - inc);
            }
        }
        self.a = vals.last().unwrap() - knots.last().unwrap();
        knots.reverse();
        vals.reverse();
        self.knots = knots;
        self.u_at_knots = vals;
    }

    /// Search for the largest H1 parameter with `sigma_j > 0`, `j <= k`, on the whole neck.
    pub fn build(n: usize, k: usize, eps: f64, background: SphereChart) -> Result<Self> {
        build_neck(eps, background, n, k)
    }

    /// Cutoff `alpha(r)` and `r alpha'(r)` before mixing with the background.
    pub fn cutoff(&self, r: f64) -> (f64, f64) {
        let s = r.ln();
        let [sa, sb, s1, s0] = self.breakpoints();
        let (eps, d, w) = (self.epsilon, self.delta, self.smoothing_width);
        if s <= sa {
            (1.0, 0.0)
        } else if s <= sb {
            // alpha = H1(tau(s)) with tau' = smoothstep: slope never exceeds the H1 slope
            let t = (s - sa) / w;
            let tau = (self.s_h1 + w * ramp_integral(t)).exp();
            (h1_alpha(eps, d, tau), smoothstep(t) * h1_log_slope(eps, d, tau))
        } else if s <= s1 {
            (h1_alpha(eps, d, r), h1_log_slope(eps, d, r))
        } else if s < s0 {
            let (y0, m0) = self.cutoff(self.r1);
            let h = s0 - s1;
            let (p, dp) = hermite((s - s1) / h, y0, 0.0, m0 * h, 0.0);
            (p, dp / h)
        } else {
            (0.0, 0.0)
        }
    }

    /// `r u'(r)` of the full factor: `alpha + (1 - alpha) alpha0`.
    pub fn alpha_total(&self, r: f64) -> f64 {
        let (c, _) = self.cutoff(r);
        let a0 = self.background.alpha0(r);
        c + (1.0 - c) * a0
    }

    /// Minimum over the neck of `min_{j<=k} sigma_j` and the radius attaining it.
    pub fn min_margin(&self, grid: usize) -> Result<(f64, f64)> {
        let mut best = (f64::INFINITY, self.r3);
        for r in log_radii(self.r3, self.r0, grid) {
            let m = self.cone_margin(self.n, self.k, r)?;
            if m < best.0 {
                best = (m, r);
            }
        }
        Ok(best)
    }

    pub fn background(&self) -> SphereChart {
        self.background
    }
}

impl RadialProfile for NeckProfile {
    fn u(&self, r: f64) -> f64 {
        if r >= self.r0 {
            return self.background.u0(r);
        }
        let s = r.ln();
        if s <= self.knots[0] {
            return self.a + s;
        }
        let j = self.knots.partition_point(|&x| x <= s).min(self.knots.len() - 1);
        let hi = self.knots[j];
        let (x, w) = gauss_legendre_on::<f64>(10, s, hi);
        let inc: f64 = x.iter().zip(&w).map(|(t, w)| w * self.alpha_total(t.exp())).sum();
        self.u_at_knots[j] - inc
    }

    fn alpha(&self, r: f64) -> f64 {
        self.alpha_total(r)
    }

    fn alpha_prime(&self, r: f64) -> f64 {
        let (c, c_s) = self.cutoff(r);
        let a0 = self.background.alpha0(r);
        let a0p = self.background.alpha0_prime(r);
        (c_s / r) * (1.0 - a0) + (1.0 - c) * a0p
    }

    fn sample_range(&self) -> (f64, f64) {
        (self.r3, 1.0)
    }
}

/// Default ramp width (in `log r`) at the inner end of the neck.
pub const NECK_SMOOTHING_WIDTH: f64 = 0.5;

/// Builds the neck for `eps in (0, 1/2)` on the round-sphere chart, choosing
/// the H1 parameter by bisection so that `Gamma_k^+` holds everywhere.
pub fn build_neck(eps: f64, background: SphereChart, n: usize, k: usize) -> Result<NeckProfile> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::domain(format!("neck epsilon must lie in (0, 1/2), got {eps}")));
    }
    if !(k >= 1 && 2 * k < n) {
        return Err(Error::domain(format!("the neck needs 1 <= k < n/2, got n={n}, k={k}")));
    }
    const GRID: usize = 2000;
    let feasible = |d: f64| -> Option<NeckProfile> {
        let neck = NeckProfile::with_delta(n, k, eps, d, NECK_SMOOTHING_WIDTH, background).ok()?;
        match neck.min_margin(GRID) {
            Ok((m, _)) if m > 0.0 => Some(neck),
            _ => None,
        }
    };
    // largest delta with room for the band
    let r1 = 0.5 * 0.5f64.min(background.max_gradient() * eps);
    let d_max = (r1.ln() - NECK_SMOOTHING_WIDTH).exp().powf((1.0 - eps) / 2.0) / (1.0 - 2.0 * eps);
    let mut lo = None;
    let mut d = 0.5 * d_max;
    for _ in 0..60 {
        if let Some(neck) = feasible(d) {
            lo = Some((d, neck));
            break;
        }
        d *= 0.5;
    }
    let Some((mut lo_d, mut best)) = lo else {
        let probe = NeckProfile::with_delta(n, k, eps, 0.5 * d_max, NECK_SMOOTHING_WIDTH, background)?;
        let (m, r) = probe.min_margin(GRID)?;
        let (c, cs) = probe.cutoff(r);
        let bound = neck_lower_bound(n, k, eps, r, c, cs);
        return Err(Error::Infeasible(format!(
            "no H1 parameter keeps sigma_{k} positive: min sigma = {m:e} at r = {r:e}, lower-bound margin {bound:e}"
        )));
    };
    let mut hi = (2.0 * lo_d).min(d_max);
    for _ in 0..40 {
        if hi - lo_d <= 1e-6 * lo_d {
            break;
        }
        let mid = 0.5 * (lo_d + hi);
        match feasible(mid) {
            Some(neck) => {
                lo_d = mid;
                best = neck;
            }
            None => hi = mid,
        }
    }
    // step back from the feasibility boundary so finer sampling stays positive
    match feasible(0.25 * lo_d) {
        Some(neck) => Ok(neck),
        None => Ok(best),
    }
}

// ---------------------------------------------------------------- gluing

/// Contributions and value of the glued quotient.
#[derive(Debug, Clone, PartialEq)]
pub struct GlueReport {
    pub n: usize,
    pub k: usize,
    pub l: usize,
    pub delta: f64,
    /// `int sigma_k dg` and `int sigma_l dg` of the glued metric.
    pub int_k: f64,
    pub int_l: f64,
    /// `(outer, neck, bubble)` parts of `int sigma_k`.
    pub parts_k: [f64; 3],
    pub quotient: f64,
    /// Value on the unit round sphere.
    pub sphere_value: f64,
    /// Smallest `min_{j<=k} sigma_j` found and the chart radius where it occurs.
    pub min_margin: f64,
    pub argmin_r: f64,
}

impl GlueReport {
    pub fn relative_gap(&self) -> f64 {
        (self.quotient - self.sphere_value) / self.sphere_value
    }
}

/// Chart factor of the glued metric after normalizing the neck's cylinder constant to 0.
pub struct GluedProfile<'a> {
    pub neck: &'a NeckProfile,
    pub bubble: &'a BubbleProfile,
}

impl GluedProfile<'_> {
    /// Bubble coordinate `z` of a chart radius `r <= r3/2`.
    pub fn bubble_coordinate(&self, r: f64) -> f64 {
        self.bubble.delta1 * self.neck.r3 / (2.0 * r)
    }
}

impl RadialProfile for GluedProfile<'_> {
    fn u(&self, r: f64) -> f64 {
        let (nk, b) = (self.neck, self.bubble);
        if r >= 0.5 * nk.r3 {
            nk.u(r) - nk.a
        } else {
            let z = self.bubble_coordinate(r);
            b.u(z) - (b.delta1 / nk.r3).ln() + 2.0 * r.ln() - (nk.r3 * nk.r3 / 2.0).ln()
        }
    }

    fn alpha(&self, r: f64) -> f64 {
        if r >= 0.5 * self.neck.r3 {
            self.neck.alpha(r)
        } else {
            2.0 - self.bubble.alpha(self.bubble_coordinate(r))
        }
    }

    fn alpha_prime(&self, r: f64) -> f64 {
        if r >= 0.5 * self.neck.r3 {
            self.neck.alpha_prime(r)
        } else {
            let z = self.bubble_coordinate(r);
            self.bubble.alpha_prime(z) * z / r
        }
    }

    fn sample_range(&self) -> (f64, f64) {
        (self.bubble.delta1 * self.neck.r3 / (20.0 * self.bubble.delta), 1.0)
    }
}

fn integrate_log(mut f: impl FnMut(f64) -> f64, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let panels = ((b - a) / 0.05).ceil().max(1.0) as usize;
    integrate_panels(|s| f(s.exp()), a, b, panels, 10)
}

/// `int sigma_j dg` over the glued metric, split as `(outer, neck, bubble)`.
fn glued_integrals(neck: &NeckProfile, bubble: &BubbleProfile, j: usize) -> Result<[f64; 3]> {
    let n = neck.n;
    let area = sphere_volume::<f64>(n - 1);
    let shift = ((n as f64 - 2.0 * j as f64) * neck.a).exp();
    // outer: unit sphere outside the chart ball r0, rescaled by the shift
    let theta0 = 2.0 * neck.r0.atan();
    let outer = shift
        * SphereChart.sigma(n, j)
        * area
        * integrate_panels(|t| t.sin().powi(n as i32 - 1), theta0, std::f64::consts::PI, 32, 16);
    // neck band, breakpoints respected
    let [sa, sb, s1, s0] = neck.breakpoints();
    let mut err = None;
    let mut density = |r: f64| match neck.sigma(n, j, r) {
        Ok(v) => v * volume_density(neck, n, r),
        Err(e) => {
            err.get_or_insert(e);
            0.0
        }
    };
    let lo = (0.5 * neck.r3).ln();
    let mut band = 0.0;
    for (a, b) in [(lo, sa), (sa, sb), (sb, s1), (s1, s0)] {
        band += integrate_log(&mut density, a, b);
    }
    let neck_part = shift * area * band;
    if let Some(e) = err {
        return Err(e);
    }
    // bubble part through the inversion: |z| >= delta1 of the bubble itself
    let bubble_part = bubble_region_integral(bubble, n, j)?;
    Ok([outer, neck_part, bubble_part])
}

/// `int_{|z| >= delta1} sigma_j dg` of the bubble.
pub fn bubble_region_integral(bubble: &BubbleProfile, n: usize, j: usize) -> Result<f64> {
    let area = sphere_volume::<f64>(n - 1);
    let mut err = None;
    let mid = area
        * integrate_log(
            |z| match bubble.sigma(n, j, z) {
                Ok(v) => v * volume_density(bubble, n, z),
                Err(e) => {
                    err.get_or_insert(e);
                    0.0
                }
            },
            bubble.delta1.ln(),
            bubble.delta.ln(),
        );
    if let Some(e) = err {
        return Err(e);
    }
    Ok(mid + bubble.sphere_tail(n, j, bubble.delta))
}

fn scan_margin(p: &dyn RadialProfile, n: usize, k: usize, radii: impl IntoIterator<Item = f64>) -> Result<(f64, f64)> {
    let mut best = (f64::INFINITY, 0.0);
    for r in radii {
        let m = p.cone_margin(n, k, r)?;
        if m < best.0 {
            best = (m, r);
        }
    }
    Ok(best)
}

/// Glued quotient without the cone requirement, for reporting.
pub fn glue_and_quotient_unchecked(neck: &NeckProfile, bubble: &BubbleProfile, l: usize) -> Result<GlueReport> {
    let (n, k) = (neck.n, neck.k);
    if !(l < k && 2 * k < n) {
        return Err(Error::domain(format!("gluing needs l < k < n/2, got n={n}, k={k}, l={l}")));
    }
    let pk = glued_integrals(neck, bubble, k)?;
    let pl = glued_integrals(neck, bubble, l)?;
    let (int_k, int_l) = (pk.iter().sum::<f64>(), pl.iter().sum::<f64>());
    let glued = GluedProfile { neck, bubble };
    // neck band on the chart, bubble band in its own coordinate (same metric by inversion)
    let (mn, rn) = scan_margin(&glued, n, k, log_radii(0.5 * neck.r3, neck.r0, 2000))?;
    let (mb, zb) = scan_margin(bubble, n, k, log_radii(bubble.delta1, 10.0 * bubble.delta, 4000))?;
    let (min_margin, argmin_r) = if mb < mn { (mb, bubble.delta1 * neck.r3 / (2.0 * zb)) } else { (mn, rn) };
    Ok(GlueReport {
        n,
        k,
        l,
        delta: bubble.delta,
        int_k,
        int_l,
        parts_k: pk,
        quotient: quotient_from_integrals(n, k, l, int_k, int_l),
        sphere_value: sphere_quotient(n, k, l)?,
        min_margin,
        argmin_r,
    })
}

/// Glued quotient; fails where the glued metric leaves `Gamma_k^+`.
pub fn glue_and_quotient(neck: &NeckProfile, bubble: &BubbleProfile, l: usize) -> Result<GlueReport> {
    let rep = glue_and_quotient_unchecked(neck, bubble, l)?;
    if rep.min_margin <= 0.0 {
        return Err(Error::Gluing { k: rep.k, r: rep.argmin_r, value: rep.min_margin });
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bubble_junctions_are_continuous() {
        for (d, e) in [(0.2, 0.1), (0.05, 0.1), (0.3, 0.3)] {
            let b = BubbleProfile::new(d, e).unwrap();
            assert!((b.outer_u(d) - b.middle_u(d)).abs() < 1e-12);
            assert!((b.middle_u(b.delta1) - b.delta1.ln()).abs() < 1e-12);
            assert!((b.outer_alpha(d) - b.middle_alpha(d)).abs() < 1e-12);
            assert!((b.middle_alpha(b.delta1) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bubble_branches_have_expected_curvature() {
        let b = BubbleProfile::new(0.1, 0.1).unwrap();
        for r in [0.1, 0.5, 3.0] {
            let s = b.sigma(5, 2, r).unwrap();
            assert!((s / b.sphere_sigma(5, 2) - 1.0).abs() < 1e-12);
        }
        assert!((b.sigma(5, 2, 0.5 * b.delta1).unwrap() - 0.5).abs() < 1e-12);
        // middle branch: 2 r alpha' / (2 alpha - alpha^2) = -(1 - eps0)
        for r in log_radii(b.delta1 * 1.01, b.delta * 0.99, 50) {
            let a = b.middle_alpha(r);
            assert!((2.0 * r * b.alpha_prime(r) / (2.0 * a - a * a) + 0.9).abs() < 1e-10);
        }
    }

    #[test]
    fn h1_solves_its_ode() {
        for r in log_radii(1e-8, 0.5, 200) {
            assert!(h1_riccati_residual(0.1, 1e-3, r).abs() < 1e-10);
            let a = h1_alpha(0.1, 1e-3, r);
            assert!((h1_ode_residual(0.1, 1e-3, r) + 0.3 * a).abs() < 1e-10);
        }
    }

    #[test]
    fn neck_meets_its_boundary_conditions() {
        let neck = build_neck(0.1, SphereChart, 5, 2).unwrap();
        for r in [neck.r0, 0.3, 0.9] {
            assert!((neck.u(r) - SphereChart.u0(r)).abs() < 1e-13);
        }
        for r in [neck.r3, 0.5 * neck.r2, neck.r2] {
            assert!((neck.u(r) - neck.a - r.ln()).abs() < 1e-10, "r={r}");
        }
        // u continuous across r0 from the integrated side
        assert!((neck.u(neck.r0 * (1.0 - 1e-9)) - SphereChart.u0(neck.r0)).abs() < 1e-8);
        let (m, r) = neck.min_margin(4000).unwrap();
        assert!(m > 0.0, "{m} at {r}");
        // cutoff is monotone and in [0, 1]
        let mut prev = 1.0;
        for r in log_radii(neck.r3, neck.r0, 3000) {
            let (c, _) = neck.cutoff(r);
            assert!((0.0..=1.0).contains(&c) && c <= prev + 1e-15, "r={r}: {c} after {prev}");
            prev = c;
        }
    }

    fn neck() -> NeckProfile {
        build_neck(0.1, SphereChart, 5, 2).unwrap()
    }

    #[test]
    fn inversion_carries_the_bubble_integral() {
        let neck = neck();
        let b = BubbleProfile::new(0.1, 0.1).unwrap();
        let glued = GluedProfile { neck: &neck, bubble: &b };
        let area = sphere_volume::<f64>(4);
        // chart radii r <= r3/2 with z in [delta1, delta]
        let r_hi = 0.5 * neck.r3;
        let r_lo = b.delta1 * neck.r3 / (2.0 * b.delta);
        let dens = |r: f64| glued.sigma(5, 2, r).unwrap() * volume_density(&glued, 5, r);
        let direct = area * integrate_log(dens, r_lo.ln(), r_hi.ln());
        let own = bubble_region_integral(&b, 5, 2).unwrap() - b.sphere_tail(5, 2, b.delta);
        assert!((direct / own - 1.0).abs() < 1e-9, "{direct} vs {own}");
    }

    #[test]
    fn bubble_region_tracks_sphere_leading_term() {
        let b = BubbleProfile::new(0.05, 0.1).unwrap();
        let part = bubble_region_integral(&b, 5, 2).unwrap();
        let lead = (-(5.0 - 4.0) * b.b0).exp() * sphere_outside_ball(5, 2, b.delta);
        assert!((part / lead - 1.0).abs() < 0.02, "{part} vs {lead}");
    }

    /// `int_{|x| > rho} sigma_k` of `(1+|x|^2)^{-2}|dx|^2` by radial quadrature.
    fn sphere_outside_ball(n: usize, k: usize, rho: f64) -> f64 {
        let f = |s: f64| {
            let r = s.exp();
            let c = 1.0 + r * r;
            binomial::<f64>(n, k) * 2f64.powi(k as i32) * r.powi(n as i32) / c.powi(n as i32)
        };
        sphere_volume::<f64>(n - 1) * integrate_panels(f, rho.ln(), 12.0, 4000, 10)
    }

    #[test]
    fn smoothing_keeps_half_the_band_margin() {
        let neck = neck();
        let bg = neck.background();
        let (eps, d) = (neck.epsilon, neck.delta);
        let raw = |r: f64| {
            let (c, cs) = (h1_alpha(eps, d, r), h1_log_slope(eps, d, r));
            let a = c + (1.0 - c) * bg.alpha0(r);
            let ap = (cs / r) * (1.0 - bg.alpha0(r)) + (1.0 - c) * bg.alpha0_prime(r);
            radial_sigma_k(5, 2, r, a, ap, neck.u(r)).unwrap()
        };
        let band = log_radii(neck.s_h1.exp(), neck.r1, 3000);
        let pre = band.iter().map(|&r| raw(r)).fold(f64::INFINITY, f64::min);
        let post = log_radii(neck.r3, neck.r1, 3000)
            .into_iter()
            .map(|r| neck.sigma(5, 2, r).unwrap())
            .fold(f64::INFINITY, f64::min);
        assert!(pre > 0.0 && post >= 0.5 * pre, "{post} vs {pre}");
    }

    #[test]
    fn cylinder_flips_sign_past_half_dimension() {
        let (m2, _) = verify_positive(&Cylinder::default(), 5, 2, 100).unwrap();
        let (m3, _) = verify_positive(&Cylinder::default(), 5, 3, 100).unwrap();
        assert!((m2 - cylinder_sigma(5, 2)).abs() < 1e-14 && m2 > 0.0);
        assert!((m3 - cylinder_sigma(5, 3)).abs() < 1e-14 && m3 < 0.0);
    }

    #[test]
    fn glued_quotient_stays_above_sphere_value() {
        let neck = neck();
        let b = BubbleProfile::new(0.1, 0.1).unwrap();
        let rep = glue_and_quotient_unchecked(&neck, &b, 1).unwrap();
        assert!(rep.relative_gap() > 0.0 && rep.relative_gap() < 0.1);
        // the bubble's middle band is outside Gamma_2^+
        assert!(matches!(glue_and_quotient(&neck, &b, 1), Err(Error::Gluing { k: 2, .. })));
    }
}

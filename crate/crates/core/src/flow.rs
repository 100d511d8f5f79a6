//! Normalized `sigma_k / sigma_l` flow on the symmetry-reduced geometries.
//!
//! The conformal factor evolves by `u_t = (log(sigma_k/sigma_l)(g) - log r_{k,l}) / 2`,
//! integrated with classical RK4 under a parabolic step cap.

use crate::error::{Error, Result};
use crate::functionals::{energy_n_half, quotient_from_integrals};
use crate::geometry::{ConformalField, Geometry, GeometryKind};
use crate::scalar::binomial;

/// Relative cone floor, as in [`crate::symfun::default_floor`].
const FLOOR: f64 = 1e-14;

/// Integrator settings.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowConfig {
    pub k: usize,
    pub l: usize,
    /// Fraction of the parabolic step cap.
    pub cfl: f64,
    pub tol_residual: f64,
    pub max_time: f64,
    /// Steps between evolution-identity and `n/2`-energy checks.
    pub conservation_check_every: usize,
    /// Accepted steps between trace rows (first and last state are always recorded).
    pub trace_stride: usize,
}

impl FlowConfig {
    pub fn new(k: usize, l: usize) -> Self {
        Self { k, l, cfl: 0.9, tol_residual: 1e-6, max_time: 100.0, conservation_check_every: 1, trace_stride: 1 }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.l < self.k && self.k <= n) {
            return Err(Error::domain(format!("need 0 <= l < k <= n, got n={n}, k={}, l={}", self.k, self.l)));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::domain(format!("cfl must lie in (0, 1], got {}", self.cfl)));
        }
        if !(self.tol_residual > 0.0) {
            return Err(Error::domain("tol_residual must be positive"));
        }
        if !(self.max_time > 0.0) {
            return Err(Error::domain("max_time must be positive"));
        }
        if self.conservation_check_every == 0 || self.trace_stride == 0 {
            return Err(Error::domain("conservation_check_every and trace_stride must be at least 1"));
        }
        Ok(())
    }
}

/// Smallest step before the integrator reports a stall.
pub const DT_MIN: f64 = 1e-12;

/// Below `cap / RESIDUAL_GUARD_FLOOR` a residual increase no longer rejects the step.
pub const RESIDUAL_GUARD_FLOOR: f64 = 64.0;

/// Per-node curvature data of one conformal factor, specialised to the two-valued spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeData {
    pub sigma_k: Vec<f64>,
    pub sigma_l: Vec<f64>,
    pub log_ratio: Vec<f64>,
    pub dg: Vec<f64>,
    /// `(D_radial, D_tangential)` with `D_i = sigma_{k-1}(L_i)/sigma_k - sigma_{l-1}(L_i)/sigma_l` at `Lambda_g`.
    pub d_coef: Vec<(f64, f64)>,
    pub margin: f64,
    pub worst_node: usize,
    pub violation: Option<usize>,
    pub log_r: f64,
    /// `max_node trace T~(W)`.
    pub max_trace: f64,
}

impl NodeData {
    pub fn residual(&self) -> f64 {
        self.log_ratio.iter().fold(0.0, |m, v| m.max((v - self.log_r).abs()))
    }

    pub fn integral_sigma_l(&self) -> f64 {
        self.sigma_l.iter().zip(&self.dg).map(|(a, b)| a * b).sum()
    }

    pub fn integral_sigma_k(&self) -> f64 {
        self.sigma_k.iter().zip(&self.dg).map(|(a, b)| a * b).sum()
    }

    pub fn vol(&self) -> f64 {
        self.dg.iter().sum()
    }

    /// `-1/2 int (ratio - r)(log ratio - log r) sigma_l dg`, never positive.
    pub fn dissipation(&self) -> f64 {
        let r = self.log_r.exp();
        let mut acc = 0.0;
        for i in 0..self.dg.len() {
            let ratio = self.sigma_k[i] / self.sigma_l[i];
            acc += (ratio - r) * (self.log_ratio[i] - self.log_r) * self.sigma_l[i] * self.dg[i];
        }
        -0.5 * acc
    }

    /// `min_node sigma_k / sigma_l`.
    pub fn min_ratio(&self) -> f64 {
        self.log_ratio.iter().fold(f64::INFINITY, |m, v| m.min(v.exp()))
    }

    /// `du/dt` per node.
    pub fn velocity(&self) -> Vec<f64> {
        self.log_ratio.iter().map(|v| 0.5 * (v - self.log_r)).collect()
    }
}

/// Two-valued evaluator with the binomial tables of one `(n, k, l)`.
#[derive(Debug, Clone)]
pub struct Evaluator {
    n: usize,
    k: usize,
    l: usize,
    /// `C(n-1, j)` and `C(n-2, j)` for `j = 0..=k`.
    c1: Vec<f64>,
    c2: Vec<f64>,
}

impl Evaluator {
    pub fn new(n: usize, k: usize, l: usize) -> Self {
        Self {
            n,
            k,
            l,
            c1: (0..=k).map(|j| binomial(n - 1, j)).collect(),
            c2: (0..=k).map(|j| binomial(n - 2, j)).collect(),
        }
    }

    /// `sigma_j(a, b^{(m)})` from a table of `C(m, j)`.
    fn two_valued(c: &[f64], a: f64, j: usize, bp: &[f64]) -> f64 {
        if j == 0 {
            1.0
        } else {
            c[j] * bp[j] + a * c[j - 1] * bp[j - 1]
        }
    }

    pub fn eval(&self, geom: &Geometry<f64>, field: &ConformalField<f64>) -> NodeData {
        self.eval_with(geom, field, true)
    }

    /// With `coefficients = false` the `T~` diagonal and trace are left empty (RK stages).
    pub fn eval_with(&self, geom: &Geometry<f64>, field: &ConformalField<f64>, coefficients: bool) -> NodeData {
        let (n, k, l) = (self.n, self.k, self.l);
        let m = geom.grid_size();
        let (sr, st) = geom.background();
        let (u, du, d2u) = (field.u(), field.du(), field.d2u());
        let mut out = NodeData {
            sigma_k: Vec::with_capacity(m),
            sigma_l: Vec::with_capacity(m),
            log_ratio: Vec::with_capacity(m),
            dg: Vec::with_capacity(m),
            d_coef: Vec::with_capacity(m),
            margin: f64::INFINITY,
            worst_node: 0,
            violation: None,
            log_r: 0.0,
            max_trace: 0.0,
        };
        let mut bp = vec![1.0; k + 1];
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..m {
            let q = 0.5 * du[i] * du[i];
            let eu = u[i].exp();
            let e = eu * eu;
            let a = e * (d2u[i] + q + sr);
            let b = e * (geom.tangential_first_order(i, du[i], d2u[i]) - q + st);
            for j in 1..=k {
                bp[j] = bp[j - 1] * b;
            }
            let l1 = a.abs() + (n - 1) as f64 * b.abs();
            let mut node_margin = f64::INFINITY;
            let mut inside = true;
            let mut l1p = 1.0;
            for j in 1..=k {
                let s = Self::two_valued(&self.c1, a, j, &bp);
                l1p *= l1;
                node_margin = node_margin.min(s);
                inside = inside && s > FLOOR * l1p.max(1.0);
            }
            if node_margin < out.margin {
                out.margin = node_margin;
                out.worst_node = i;
            }
            if !inside && out.violation.is_none() {
                out.violation = Some(i);
            }
            let sk = Self::two_valued(&self.c1, a, k, &bp);
            let sl = Self::two_valued(&self.c1, a, l, &bp);
            if coefficients {
                // radial deleted: sigma_j(b^{(n-1)}); tangential deleted: sigma_j(a, b^{(n-2)})
                let rad_del = |j: Option<usize>| j.map_or(0.0, |j| self.c1[j] * bp[j]);
                let tan_del = |j: Option<usize>| j.map_or(0.0, |j| Self::two_valued(&self.c2, a, j, &bp));
                let dr = rad_del(Some(k - 1)) / sk - rad_del(l.checked_sub(1)) / sl;
                let dt = tan_del(Some(k - 1)) / sk - tan_del(l.checked_sub(1)) / sl;
                out.max_trace = out.max_trace.max(e * (dr + (n - 1) as f64 * dt));
                out.d_coef.push((dr, dt));
            }
            let lr = if sk > 0.0 && sl > 0.0 { sk.ln() - sl.ln() } else { f64::NAN };
            let inv = eu.recip();
            let w = geom.base_weights()[i] * (0..n).fold(1.0, |p, _| p * inv);
            num += sl * w * lr;
            den += sl * w;
            out.sigma_k.push(sk);
            out.sigma_l.push(sl);
            out.log_ratio.push(lr);
            out.dg.push(w);
        }
        out.log_r = num / den;
        out
    }
}

/// One point of the flow.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub field: ConformalField<f64>,
    pub t: f64,
    /// Last accepted step (0 before the first step).
    pub dt: f64,
    pub cone_margin: f64,
    pub residual: f64,
    pub steps: usize,
    pub data: NodeData,
}

impl FlowState {
    /// State of `u` at `t = 0`; fails outside `Gamma_k^+`.
    pub fn new(geom: &Geometry<f64>, u: &[f64], k: usize, l: usize) -> Result<Self> {
        let ev = Evaluator::new(geom.n(), k, l);
        Self::from_eval(geom, &ev, u.to_vec(), 0.0, 0.0, 0)
    }

    fn from_eval(geom: &Geometry<f64>, ev: &Evaluator, u: Vec<f64>, t: f64, dt: f64, steps: usize) -> Result<Self> {
        let field = geom.derivatives(&u);
        let data = ev.eval(geom, &field);
        if data.violation.is_some() {
            return Err(Error::ConeViolation { k: ev.k, node: data.worst_node, margin: data.margin });
        }
        Ok(Self { cone_margin: data.margin, residual: data.residual(), field, t, dt, steps, data })
    }

    pub fn u(&self) -> &[f64] {
        self.field.u()
    }

    /// Parabolic step cap `h^2 / max trace T~(W)` (before the cfl factor).
    pub fn step_cap(&self, geom: &Geometry<f64>) -> f64 {
        let h = geom.spacing();
        let h_eff = match geom.kind() {
            GeometryKind::RadialEuclidean => geom.radial_domain().0 * h,
            _ => h,
        };
        h_eff * h_eff / self.data.max_trace
    }
}

/// `du/dt = (log(sigma_k/sigma_l)(g) - log r_{k,l}) / 2`.
pub fn rhs(geom: &Geometry<f64>, field: &ConformalField<f64>, k: usize, l: usize) -> Result<Vec<f64>> {
    let data = Evaluator::new(geom.n(), k, l).eval(geom, field);
    if data.violation.is_some() {
        return Err(Error::ConeViolation { k, node: data.worst_node, margin: data.margin });
    }
    Ok(data.velocity())
}

/// The scalar form `(log(sigma_k/sigma_l)(W) + 2(k-l)u - log r_{k,l}) / 2`.
pub fn rhs_scalar_form(geom: &Geometry<f64>, field: &ConformalField<f64>, k: usize, l: usize) -> Result<Vec<f64>> {
    let pw = geom.schouten_eigenvalues(field);
    let data = Evaluator::new(geom.n(), k, l).eval(geom, field);
    if data.violation.is_some() {
        return Err(Error::ConeViolation { k, node: data.worst_node, margin: data.margin });
    }
    Ok((0..geom.grid_size())
        .map(|i| {
            let s = pw.sigmas(i);
            0.5 * (s[k].ln() - s[l].ln() + 2.0 * (k - l) as f64 * field.u()[i] - data.log_r)
        })
        .collect())
}

/// Right side of the log-ratio evolution identity,
/// `tr(T~ Hess_g L)/2 + (k-l)(L - log r)`, per node.
pub fn evolution_rhs(geom: &Geometry<f64>, state: &FlowState, k: usize, l: usize) -> Vec<f64> {
    let d = &state.data;
    let (dl, d2l) = geom.differentiate(&d.log_ratio);
    let (u, du) = (state.field.u(), state.field.du());
    let n1 = (geom.n() - 1) as f64;
    (0..geom.grid_size())
        .map(|i| {
            let h_rr = d2l[i] + du[i] * dl[i];
            let h_tt = geom.tangential_first_order(i, dl[i], d2l[i]) - du[i] * dl[i];
            let (dr, dt) = d.d_coef[i];
            0.5 * (2.0 * u[i]).exp() * (dr * h_rr + n1 * dt * h_tt) + (k - l) as f64 * (d.log_ratio[i] - d.log_r)
        })
        .collect()
}

/// `sup_node |(L_next - L_prev)/dt - (rhs_prev + rhs_next)/2|` for consecutive states.
pub fn evolution_identity_residual(geom: &Geometry<f64>, prev: &FlowState, next: &FlowState, k: usize, l: usize) -> f64 {
    let dt = next.t - prev.t;
    if dt <= 0.0 {
        return 0.0;
    }
    let (a, b) = (evolution_rhs(geom, prev, k, l), evolution_rhs(geom, next, k, l));
    (0..geom.grid_size())
        .map(|i| ((next.data.log_ratio[i] - prev.data.log_ratio[i]) / dt - 0.5 * (a[i] + b[i])).abs())
        .fold(0.0, f64::max)
}

/// Integrated form over a run of consecutive states:
/// `sup_node |(L_last - L_first) - sum_steps dt (rhs_prev + rhs_next)/2| / (t_last - t_first)`.
///
/// Over a window much longer than one step the rounding in `L` is divided by the window
/// rather than by `dt`, so the discretisation error becomes visible under refinement.
pub fn windowed_evolution_residual(geom: &Geometry<f64>, states: &[FlowState], k: usize, l: usize) -> f64 {
    let (Some(first), Some(last)) = (states.first(), states.last()) else {
        return 0.0;
    };
    let span = last.t - first.t;
    if span <= 0.0 {
        return 0.0;
    }
    let m = geom.grid_size();
    let mut acc = vec![0.0; m];
    let mut prev_rhs = evolution_rhs(geom, first, k, l);
    for w in states.windows(2) {
        let dt = w[1].t - w[0].t;
        let rhs = evolution_rhs(geom, &w[1], k, l);
        for i in 0..m {
            acc[i] += 0.5 * dt * (prev_rhs[i] + rhs[i]);
        }
        prev_rhs = rhs;
    }
    (0..m).map(|i| (last.data.log_ratio[i] - first.data.log_ratio[i] - acc[i]).abs()).fold(0.0, f64::max) / span
}

/// `|(F~_k(next) - F~_k(prev))/dt - (D_prev + D_next)/2|`, `k != n/2`.
pub fn dissipation_identity_residual(geom: &Geometry<f64>, prev: &FlowState, next: &FlowState, k: usize) -> f64 {
    let dt = next.t - prev.t;
    if dt <= 0.0 {
        return 0.0;
    }
    let c = (geom.n() as f64 - 2.0 * k as f64).recip();
    let df = c * (next.data.integral_sigma_k() - prev.data.integral_sigma_k()) / dt;
    (df - 0.5 * (prev.data.dissipation() + next.data.dissipation())).abs()
}

fn rk_stage(geom: &Geometry<f64>, ev: &Evaluator, u: &[f64], v: &[f64], h: f64) -> Option<Vec<f64>> {
    let w: Vec<f64> = u.iter().zip(v).map(|(a, b)| a + h * b).collect();
    let data = ev.eval_with(geom, &geom.derivatives(&w), false);
    if data.violation.is_some() {
        None
    } else {
        Some(data.velocity())
    }
}

/// RK4 candidate from `state` with step `h`; `None` if a stage leaves the cone.
fn rk4(geom: &Geometry<f64>, ev: &Evaluator, state: &FlowState, h: f64) -> Option<Vec<f64>> {
    let u = state.u();
    let k1 = state.data.velocity();
    let k2 = rk_stage(geom, ev, u, &k1, 0.5 * h)?;
    let k3 = rk_stage(geom, ev, u, &k2, 0.5 * h)?;
    let k4 = rk_stage(geom, ev, u, &k3, h)?;
    Some((0..u.len()).map(|i| u[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect())
}

/// One accepted step, starting from `dt_try` (clamped to the cap) and halving on rejection.
pub fn step_from(geom: &Geometry<f64>, ev: &Evaluator, state: &FlowState, cfg: &FlowConfig, dt_try: f64) -> Result<FlowState> {
    let cap = cfg.cfl * state.step_cap(geom);
    let mut dt = dt_try.min(cap);
    loop {
        if dt < DT_MIN {
            return Err(Error::Stall { t: state.t, dt_min: DT_MIN, node: state.data.worst_node, margin: state.cone_margin });
        }
        if let Some(u) = rk4(geom, ev, state, dt) {
            if let Ok(next) = FlowState::from_eval(geom, ev, u, state.t + dt, dt, state.steps + 1) {
                let grew = next.residual > 1.1 * state.residual && dt >= cap / RESIDUAL_GUARD_FLOOR;
                if next.cone_margin > 0.0 && !grew {
                    return Ok(next);
                }
            }
        }
        dt *= 0.5;
    }
}

/// One adaptive RK4 step at the parabolic cap.
pub fn step(geom: &Geometry<f64>, state: &FlowState, cfg: &FlowConfig) -> Result<FlowState> {
    let ev = Evaluator::new(geom.n(), cfg.k, cfg.l);
    step_from(geom, &ev, state, cfg, f64::INFINITY)
}

/// One row of the functional trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub dt: f64,
    pub vol: f64,
    pub int_sigma_l: f64,
    pub tilde_f_k: f64,
    pub f_k: f64,
    pub r_kl: f64,
    pub residual: f64,
    pub cone_margin: f64,
    pub max_grad_u: f64,
}

impl TraceRow {
    pub const HEADER: [&'static str; 10] =
        ["t", "dt", "vol", "int_sigma_l", "tilde_F_k", "F_k", "r_kl", "residual", "cone_margin", "max_grad_u"];

    pub fn values(&self) -> [f64; 10] {
        [
            self.t,
            self.dt,
            self.vol,
            self.int_sigma_l,
            self.tilde_f_k,
            self.f_k,
            self.r_kl,
            self.residual,
            self.cone_margin,
            self.max_grad_u,
        ]
    }
}

/// Time series of one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FunctionalTrace {
    pub rows: Vec<TraceRow>,
}

fn tilde_f(geom: &Geometry<f64>, state: &FlowState, k: usize) -> f64 {
    let n = geom.n();
    if 2 * k == n {
        energy_n_half(geom, state.u()).unwrap_or(f64::NAN)
    } else {
        state.data.integral_sigma_k() / (n as f64 - 2.0 * k as f64)
    }
}

fn row(geom: &Geometry<f64>, state: &FlowState, k: usize) -> TraceRow {
    let n = geom.n() as f64;
    let vol = state.data.vol();
    TraceRow {
        t: state.t,
        dt: state.dt,
        vol,
        int_sigma_l: state.data.integral_sigma_l(),
        tilde_f_k: tilde_f(geom, state, k),
        f_k: vol.powf(-(n - 2.0 * k as f64) / n) * state.data.integral_sigma_k(),
        r_kl: state.data.log_r.exp(),
        residual: state.residual,
        cone_margin: state.cone_margin,
        max_grad_u: state.field.max_abs_gradient(),
    }
}

/// How a run ended.
#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    Converged,
    MaxTime,
    Stalled(Error),
}

/// Quantities monitored online at every accepted step.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    /// Name of the conserved quantity: `int_sigma_l` or `E_n_half`.
    pub conserved_name: &'static str,
    pub conserved_initial: f64,
    /// `max_t |Q(t) - Q(0)| / |Q(0)|`.
    pub conserved_max_drift: f64,
    /// Largest single-step increase of `F~_k` (0 if monotone); `NaN` when `k = n/2`.
    pub max_tilde_f_increase: f64,
    pub tilde_f_violations: usize,
    /// Largest `dt * dissipation_identity_residual` over the run.
    pub max_dissipation_residual_amount: f64,
    pub max_dissipation_residual: f64,
    /// Largest evolution-identity residual over checked steps.
    pub max_evolution_residual: f64,
    /// Largest per-step increase of the quotient functional (when defined).
    pub max_quotient_increase: f64,
    pub min_ratio: f64,
    pub max_grad_u: f64,
    pub rejected_steps: usize,
}

/// Result of [`run`].
#[derive(Debug, Clone)]
pub struct FlowRun {
    pub initial: FlowState,
    pub final_state: FlowState,
    pub trace: FunctionalTrace,
    pub diagnostics: Diagnostics,
    pub termination: Termination,
}

impl FlowRun {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }

    /// Converts the termination into an error for non-converged runs.
    pub fn error(&self) -> Option<Error> {
        match &self.termination {
            Termination::Converged => None,
            Termination::MaxTime => {
                Some(Error::MaxTime { max_time: self.final_state.t, residual: self.final_state.residual })
            }
            Termination::Stalled(e) => Some(e.clone()),
        }
    }

    /// `sup_node |sigma_k/sigma_l(g) / r_{k,l} - 1|` of the final state.
    pub fn limit_equation_error(&self) -> f64 {
        let d = &self.final_state.data;
        d.log_ratio.iter().fold(0.0, |m, v| m.max(((v - d.log_r).exp() - 1.0).abs()))
    }
}

fn conserved(geom: &Geometry<f64>, state: &FlowState, l: usize) -> f64 {
    if 2 * l == geom.n() {
        energy_n_half(geom, state.u()).unwrap_or(f64::NAN)
    } else {
        state.data.integral_sigma_l()
    }
}

/// Integrates until the residual drops below `tol_residual` or `max_time` passes.
///
/// Fails only when `u0` is not admissible; stalls and timeouts are reported in
/// [`FlowRun::termination`].
pub fn run(geom: &Geometry<f64>, u0: &[f64], cfg: &FlowConfig) -> Result<FlowRun> {
    let n = geom.n();
    cfg.validate(n)?;
    let (k, l) = (cfg.k, cfg.l);
    let ev = Evaluator::new(n, k, l);
    let initial = FlowState::from_eval(geom, &ev, u0.to_vec(), 0.0, 0.0, 0)?;
    let quotient_defined = 2 * k != n && 2 * l != n;
    let quotient = |s: &FlowState| quotient_from_integrals(n, k, l, s.data.integral_sigma_k(), s.data.integral_sigma_l());
    let q0 = conserved(geom, &initial, l);
    let mut diag = Diagnostics {
        conserved_name: if 2 * l == n { "E_n_half" } else { "int_sigma_l" },
        conserved_initial: q0,
        conserved_max_drift: 0.0,
        max_tilde_f_increase: if 2 * k == n { f64::NAN } else { 0.0 },
        tilde_f_violations: 0,
        max_dissipation_residual_amount: 0.0,
        max_dissipation_residual: 0.0,
        max_evolution_residual: 0.0,
        max_quotient_increase: 0.0,
        min_ratio: initial.data.min_ratio(),
        max_grad_u: initial.field.max_abs_gradient(),
        rejected_steps: 0,
    };
    let mut trace = FunctionalTrace { rows: vec![row(geom, &initial, k)] };
    let mut state = initial.clone();
    let mut dt_try = f64::INFINITY;
    let termination = loop {
        if state.residual < cfg.tol_residual {
            break Termination::Converged;
        }
        if state.t > cfg.max_time {
            break Termination::MaxTime;
        }
        let next = match step_from(geom, &ev, &state, cfg, dt_try) {
            Ok(s) => s,
            Err(e) => break Termination::Stalled(e),
        };
        let cap = cfg.cfl * state.step_cap(geom);
        if next.dt < dt_try.min(cap) {
            diag.rejected_steps += 1;
        }
        dt_try = 2.0 * next.dt;
        if 2 * k != n {
            let ik = (n as f64 - 2.0 * k as f64).recip();
            let inc = ik * (next.data.integral_sigma_k() - state.data.integral_sigma_k());
            if inc > 0.0 {
                diag.tilde_f_violations += 1;
                diag.max_tilde_f_increase = diag.max_tilde_f_increase.max(inc);
            }
            let res = dissipation_identity_residual(geom, &state, &next, k);
            diag.max_dissipation_residual = diag.max_dissipation_residual.max(res);
            diag.max_dissipation_residual_amount = diag.max_dissipation_residual_amount.max(res * next.dt);
        }
        if quotient_defined {
            diag.max_quotient_increase = diag.max_quotient_increase.max(quotient(&next) - quotient(&state));
        }
        let check = next.steps % cfg.conservation_check_every == 0;
        if check {
            diag.max_evolution_residual =
                diag.max_evolution_residual.max(evolution_identity_residual(geom, &state, &next, k, l));
        }
        if 2 * l != n || check {
            let q = conserved(geom, &next, l);
            diag.conserved_max_drift = diag.conserved_max_drift.max(((q - q0) / q0).abs());
        }
        diag.min_ratio = diag.min_ratio.min(next.data.min_ratio());
        diag.max_grad_u = diag.max_grad_u.max(next.field.max_abs_gradient());
        state = next;
        if state.steps % cfg.trace_stride == 0 {
            trace.rows.push(row(geom, &state, k));
        }
    };
    if trace.rows.last().map(|r| r.t) != Some(state.t) {
        trace.rows.push(row(geom, &state, k));
    }
    Ok(FlowRun { initial, final_state: state, trace, diagnostics: diag, termination })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::pointwise;
    use std::f64::consts::PI;

    fn product(m: usize) -> Geometry<f64> {
        Geometry::product_circle_sphere(5, m, 2.0 * PI).unwrap()
    }

    fn sine(g: &Geometry<f64>, amp: f64) -> Vec<f64> {
        g.nodes().iter().map(|t| amp * t.sin()).collect()
    }

    #[test]
    fn evaluator_matches_generic_pointwise() {
        for (g, u) in [
            (product(64), sine(&product(64), 0.1)),
            (Geometry::round_sphere(6, 64).unwrap(), vec![0.0; 64]),
        ] {
            let f = g.derivatives(&u);
            for (k, l) in [(2usize, 1usize), (2, 0), (3, 1)] {
                let fast = Evaluator::new(g.n(), k, l).eval(&g, &f);
                let slow = pointwise(&g, &f, k, l);
                if slow.violation.is_some() {
                    assert!(fast.violation.is_some());
                    continue;
                }
                for i in 0..g.grid_size() {
                    assert!((fast.sigma_k[i] - slow.sigma_k[i]).abs() < 1e-13 * slow.sigma_k[i].abs().max(1.0));
                    assert!((fast.log_ratio[i] - slow.log_ratio[i]).abs() < 1e-13);
                }
                assert!((fast.log_r - slow.log_r()).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn both_velocity_forms_agree() {
        let g = product(64);
        let f = g.derivatives(&sine(&g, 0.1));
        let a = rhs(&g, &f, 2, 1).unwrap();
        let b = rhs_scalar_form(&g, &f, 2, 1).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn constant_factor_is_stationary() {
        let g = Geometry::round_sphere(5, 64).unwrap();
        let f = g.derivatives(&vec![0.4; 64]);
        assert!(rhs(&g, &f, 2, 1).unwrap().iter().all(|v| v.abs() < 1e-14));
        let s = FlowState::new(&g, &vec![0.4; 64], 2, 1).unwrap();
        let next = step(&g, &s, &FlowConfig::new(2, 1)).unwrap();
        assert_eq!(next.u(), s.u());
        assert!(next.t > 0.0);
        let run = run(&g, &vec![0.4; 64], &FlowConfig::new(2, 1)).unwrap();
        assert!(run.converged());
        assert_eq!(run.trace.rows.len(), 1);
    }

    #[test]
    fn large_ratio_grows_u() {
        let g = product(64);
        let f = g.derivatives(&sine(&g, 0.1));
        let v = rhs(&g, &f, 2, 1).unwrap();
        let d = Evaluator::new(5, 2, 1).eval(&g, &f);
        for i in 0..64 {
            assert_eq!(v[i] > 0.0, d.log_ratio[i] > d.log_r, "node {i}");
        }
    }

    #[test]
    fn rhs_matches_time_difference() {
        let g = product(64);
        let cfg = FlowConfig::new(2, 1);
        let s0 = FlowState::new(&g, &sine(&g, 0.1), 2, 1).unwrap();
        let v = s0.data.velocity();
        let mut errs = vec![];
        for h in [1e-4, 5e-5] {
            let ev = Evaluator::new(5, 2, 1);
            let s1 = step_from(&g, &ev, &s0, &cfg, h).unwrap();
            assert_eq!(s1.t, h);
            let e = (0..64).map(|i| ((s1.u()[i] - s0.u()[i]) / h - v[i]).abs()).fold(0.0, f64::max);
            errs.push(e);
        }
        assert!(errs[0] < 1e-3 && (errs[0] / errs[1] - 2.0).abs() < 0.1, "{errs:?}");
    }

    #[test]
    fn evolution_identity_holds_up_to_time_error() {
        let g = product(64);
        let ev = Evaluator::new(5, 2, 1);
        let cfg = FlowConfig::new(2, 1);
        let s0 = FlowState::new(&g, &sine(&g, 0.1), 2, 1).unwrap();
        let r = |h: f64| evolution_identity_residual(&g, &s0, &step_from(&g, &ev, &s0, &cfg, h).unwrap(), 2, 1);
        let (a, b) = (r(4e-4), r(2e-4));
        assert!(a / b > 3.5, "{a} {b}");
        let still = FlowState::new(&g, &vec![0.2; 64], 2, 1).unwrap();
        let next = step(&g, &still, &cfg).unwrap();
        assert!(evolution_identity_residual(&g, &still, &next, 2, 1) < 1e-12);
        assert!(dissipation_identity_residual(&g, &still, &next, 2) < 1e-12);
    }

    #[test]
    fn windowed_residual_falls_under_refinement() {
        let window = |m: usize| {
            let g = product(m);
            let cfg = FlowConfig::new(2, 1);
            let mut states = vec![FlowState::new(&g, &sine(&g, 0.1), 2, 1).unwrap()];
            while states.last().unwrap().t < 0.01 {
                let next = step(&g, states.last().unwrap(), &cfg).unwrap();
                states.push(next);
            }
            windowed_evolution_residual(&g, &states, 2, 1)
        };
        let (coarse, fine) = (window(64), window(128));
        assert!(coarse / fine > 4.0, "{coarse} {fine}");
        assert_eq!(windowed_evolution_residual(&product(16), &[], 2, 1), 0.0);
    }

    #[test]
    fn spatially_constant_state_reduces_to_ode_part() {
        let g = product(32);
        let s = FlowState::new(&g, &vec![0.3; 32], 2, 1).unwrap();
        let e = evolution_rhs(&g, &s, 2, 1);
        assert!(e.iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn dissipation_is_nonpositive_and_matches() {
        let g = product(64);
        let ev = Evaluator::new(5, 2, 1);
        let cfg = FlowConfig::new(2, 1);
        let s0 = FlowState::new(&g, &sine(&g, 0.1), 2, 1).unwrap();
        assert!(s0.data.dissipation() < 0.0);
        let r = |h: f64| dissipation_identity_residual(&g, &s0, &step_from(&g, &ev, &s0, &cfg, h).unwrap(), 2);
        let (a, b) = (r(4e-4), r(2e-4));
        assert!(a < 1e-4 * s0.data.dissipation().abs() || a / b > 1.8, "{a} {b}");
    }

    #[test]
    fn inadmissible_start_is_rejected() {
        let g = product(64);
        assert!(matches!(run(&g, &sine(&g, 3.0), &FlowConfig::new(2, 1)), Err(Error::ConeViolation { .. })));
    }

    #[test]
    fn short_run_conserves_and_dissipates() {
        let g = product(64);
        let mut cfg = FlowConfig::new(2, 1);
        cfg.tol_residual = 1e-3;
        let out = run(&g, &sine(&g, 0.1), &cfg).unwrap();
        assert!(out.converged());
        assert!(out.diagnostics.conserved_max_drift < 1e-4, "{:?}", out.diagnostics);
        assert!(out.diagnostics.max_tilde_f_increase <= out.diagnostics.max_dissipation_residual_amount);
        let ts: Vec<f64> = out.trace.rows.iter().map(|r| r.t).collect();
        assert!(ts.windows(2).all(|w| w[0] < w[1]));
    }
}

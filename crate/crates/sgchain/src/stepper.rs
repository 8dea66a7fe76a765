//! Time integration of the discretized chain.
//!
//! Three interchangeable methods advance the layers:
//!
//! - [`step_newton`]: the nonlinear implicit scheme. Each step solves,
//!   per interior site,
//!   `d2t u/dt^2 - (c^2 + (beta/2dt) dt_op) d2x u + (alpha_n/2dt) dt_op u
//!    + (m^2/2)(u^{k+1} + u^{k-1}) + (V(u^{k+1}) - V(u^{k-1}))/(u^{k+1} - u^{k-1}) = 0`
//!   by Newton iteration with a tridiagonal Jacobian.
//! - [`step_linearized`]: the same scheme with `V'(u^k)` substituted for
//!   the discrete gradient, which reduces each step to one tridiagonal
//!   solve (Crout/Thomas, no pivoting needed: the matrix is strictly
//!   diagonally dominant).
//! - [`step_rk4`]: classical fourth-order Runge-Kutta on the first-order
//!   system, kept as an independent reference integrator.
//!
//! [`run`] drives a chosen stepper from `t = 0` to `T`, starting from
//! `u^0 = phi(n)`, `u^1 = phi(n) + dt phi'(n)` and recording probe
//! trajectories and per-step energy reports.

use crate::energy::{self, EnergyReport};
use crate::model::{ChainConfig, ConfigError, PotentialKind, SchemeKind};
use thiserror::Error;

/// Newton stopping tolerance on the infinity norm of the correction.
pub const NEWTON_TOL: f64 = 1e-12;
/// Newton iteration budget per time step.
pub const NEWTON_MAX_ITER: usize = 25;
/// Separation below which the discrete gradient switches to its
/// midpoint-derivative limit.
pub const DISCRETE_GRADIENT_EPS: f64 = 1e-7;
/// Displacements beyond this magnitude are reported as a blow-up.
const BLOW_UP_LIMIT: f64 = 1e8;

/// Two consecutive time layers plus the boundary history; the rolling
/// state of the implicit integrators. `u_curr` is layer `k = step`,
/// `u_prev` is layer `k - 1`. The fictitious site `N+1` is identically
/// zero and the boundary site carries `psi(k dt)` exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub u_prev: Vec<f64>,
    pub u_curr: Vec<f64>,
    /// Layer index of `u_curr`.
    pub step: usize,
    /// Boundary value `psi(t_{k-1})`.
    pub u0_prev: f64,
    /// Boundary value `psi(t_k)`.
    pub u0_curr: f64,
}

impl ChainState {
    /// Build layers `u^0`, `u^1` from the configured initial data.
    /// The second layer is the first-order start `phi + dt phi'`, or
    /// additionally `+ (dt^2/2) u''(0)` when `second_order_start` is set.
    pub fn initial(cfg: &ChainConfig) -> ChainState {
        let n = cfg.n_sites;
        let phi = initial_field(&cfg.initial_displacement, n);
        let phi_dot = initial_field(&cfg.initial_velocity, n);
        let mut u1: Vec<f64> = (0..n).map(|i| phi[i] + cfg.dt * phi_dot[i]).collect();
        if cfg.second_order_start {
            let accel = acceleration(&phi, &phi_dot, 0.0, cfg);
            for i in 0..n {
                u1[i] += 0.5 * cfg.dt * cfg.dt * accel[i];
            }
        }
        ChainState {
            u_prev: phi,
            u_curr: u1,
            step: 1,
            u0_prev: cfg.boundary_value(0.0),
            u0_curr: cfg.boundary_value(cfg.dt),
        }
    }

    /// Time `t = k dt` of the current layer.
    pub fn time(&self, cfg: &ChainConfig) -> f64 {
        self.step as f64 * cfg.dt
    }
}

fn initial_field(seq: &[f64], n: usize) -> Vec<f64> {
    if seq.is_empty() {
        vec![0.0; n]
    } else {
        seq.to_vec()
    }
}

/// Right-hand side of the first-order system:
/// `u' = v`, `v' = c^2 d2x u + beta d2x v - alpha_n v - m^2 u - V'(u)`.
fn acceleration(u: &[f64], v: &[f64], t: f64, cfg: &ChainConfig) -> Vec<f64> {
    let n = cfg.n_sites;
    let c2 = cfg.coupling * cfg.coupling;
    let u0 = cfg.boundary_value(t);
    let v0 = cfg.boundary_velocity(t);
    (0..n)
        .map(|i| {
            let ul = if i == 0 { u0 } else { u[i - 1] };
            let ur = if i + 1 < n { u[i + 1] } else { 0.0 };
            let vl = if i == 0 { v0 } else { v[i - 1] };
            let vr = if i + 1 < n { v[i + 1] } else { 0.0 };
            c2 * (ur - 2.0 * u[i] + ul) + cfg.beta * (vr - 2.0 * v[i] + vl)
                - cfg.alpha(i + 1) * v[i]
                - cfg.mass_squared * u[i]
                - cfg.potential.v_prime(u[i])
        })
        .collect()
}

/// Failure of a single time step.
#[derive(Debug, Clone, Error)]
pub enum StepError {
    #[error("Newton iteration did not converge at step {step} (t = {time}): correction norm {correction:.3e} after {iterations} iterations")]
    NewtonNonConvergence {
        step: usize,
        time: f64,
        correction: f64,
        iterations: usize,
    },
    #[error("solution blew up at step {step} (t = {time}): {detail}")]
    BlowUp {
        step: usize,
        time: f64,
        detail: String,
    },
    #[error("tridiagonal system degenerate at row {row}: pivot {pivot:.3e}")]
    DegenerateMatrix { row: usize, pivot: f64 },
}

impl StepError {
    /// True for failures that signal an unstable or diverging run rather
    /// than a malformed problem.
    pub fn is_blow_up(&self) -> bool {
        matches!(
            self,
            StepError::BlowUp { .. } | StepError::NewtonNonConvergence { .. }
        )
    }
}

/// Any failure of a full run.
#[derive(Debug, Clone, Error)]
pub enum SimulationError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Step(#[from] StepError),
}

/// Per-step solver diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    pub newton_iterations: usize,
    pub final_residual_inf_norm: f64,
    pub scheme: SchemeKind,
    /// Infinity norms of the Newton corrections, one per iteration.
    pub correction_norms: Vec<f64>,
}

/// Discrete gradient `(V(x) - V(w)) / (x - w)` with the removable
/// singularity filled by the midpoint derivative `(V'(x) + V'(w)) / 2`
/// for `|x - w| < DISCRETE_GRADIENT_EPS`.
///
/// The quotient is evaluated in exactly divided form (a trig identity for
/// the sine-Gordon potential, polynomial division for Klein-Gordon), so
/// there is no cancellation for small separations.
pub fn discrete_gradient(x: f64, w: f64, potential: PotentialKind) -> f64 {
    if (x - w).abs() < DISCRETE_GRADIENT_EPS {
        return 0.5 * (potential.v_prime(x) + potential.v_prime(w));
    }
    match potential {
        // (cos w - cos x)/(x - w) = sin((x+w)/2) * sinc((x-w)/2)
        PotentialKind::SineGordon => ((x + w) / 2.0).sin() * sinc((x - w) / 2.0),
        PotentialKind::KleinGordon => {
            let (x2, w2) = (x * x, w * w);
            let cubic = x * x2 + x2 * w + x * w2 + w * w2;
            let quintic = x2 * x2 * x + x2 * x2 * w + x * x2 * w2 + x2 * w * w2 + x * w2 * w2
                + w2 * w2 * w;
            (x + w) / 2.0 - cubic / 24.0 + quintic / 720.0
        }
        PotentialKind::Zero => 0.0,
    }
}

/// Partial derivative of [`discrete_gradient`] with respect to its first
/// argument, with the singular-limit fallback `V''(x) / 2`.
pub fn discrete_gradient_dx(x: f64, w: f64, potential: PotentialKind) -> f64 {
    if (x - w).abs() < DISCRETE_GRADIENT_EPS {
        return 0.5 * potential.v_double_prime(x);
    }
    match potential {
        PotentialKind::SineGordon => {
            let s = (x + w) / 2.0;
            let d = (x - w) / 2.0;
            0.5 * (s.cos() * sinc(d) + s.sin() * sinc_prime(d))
        }
        PotentialKind::KleinGordon => {
            let (x2, w2) = (x * x, w * w);
            let dcubic = 3.0 * x2 + 2.0 * x * w + w2;
            let dquintic =
                5.0 * x2 * x2 + 4.0 * x * x2 * w + 3.0 * x2 * w2 + 2.0 * x * w * w2 + w2 * w2;
            0.5 - dcubic / 24.0 + dquintic / 720.0
        }
        PotentialKind::Zero => 0.0,
    }
}

fn sinc(z: f64) -> f64 {
    if z.abs() < 1e-2 {
        let z2 = z * z;
        1.0 - z2 / 6.0 + z2 * z2 / 120.0
    } else {
        z.sin() / z
    }
}

fn sinc_prime(z: f64) -> f64 {
    if z.abs() < 1e-2 {
        let z2 = z * z;
        -z / 3.0 + z * z2 / 30.0
    } else {
        (z.cos() - sinc(z)) / z
    }
}

/// Per-run constants shared by the step kernels.
struct StepContext {
    alpha: Vec<f64>,
}

impl StepContext {
    fn new(cfg: &ChainConfig) -> StepContext {
        StepContext {
            alpha: (1..=cfg.n_sites).map(|n| cfg.alpha(n)).collect(),
        }
    }
}

/// Solve a tridiagonal system by the Thomas algorithm (Crout-style LU
/// without pivoting). `sub` and `sup` have length `n - 1`; the solution
/// replaces `rhs`.
fn solve_tridiagonal(
    sub: &[f64],
    diag: &[f64],
    sup: &[f64],
    rhs: &mut [f64],
    scratch: &mut Vec<f64>,
) -> Result<(), (usize, f64)> {
    let n = diag.len();
    debug_assert_eq!(rhs.len(), n);
    debug_assert_eq!(sub.len(), n.saturating_sub(1));
    debug_assert_eq!(sup.len(), n.saturating_sub(1));
    scratch.clear();
    scratch.resize(n, 0.0);

    let mut pivot = diag[0];
    if pivot.abs() < f64::MIN_POSITIVE {
        return Err((0, pivot));
    }
    rhs[0] /= pivot;
    for i in 1..n {
        scratch[i - 1] = sup[i - 1] / pivot;
        pivot = diag[i] - sub[i - 1] * scratch[i - 1];
        if pivot.abs() < f64::MIN_POSITIVE {
            return Err((i, pivot));
        }
        rhs[i] = (rhs[i] - sub[i - 1] * rhs[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= scratch[i] * rhs[i + 1];
    }
    Ok(())
}

fn check_finite(layer: &[f64], step: usize, time: f64) -> Result<(), StepError> {
    for &v in layer {
        if !v.is_finite() {
            return Err(StepError::BlowUp {
                step,
                time,
                detail: "non-finite displacement".into(),
            });
        }
        if v.abs() > BLOW_UP_LIMIT {
            return Err(StepError::BlowUp {
                step,
                time,
                detail: format!("displacement magnitude exceeded {BLOW_UP_LIMIT:.1e}"),
            });
        }
    }
    Ok(())
}

/// Advance the nonlinear implicit scheme by one step with Newton
/// iteration. The initial guess is the extrapolation `2 u^k - u^{k-1}`;
/// iteration stops when the correction infinity norm falls below
/// [`NEWTON_TOL`] and fails after [`NEWTON_MAX_ITER`] iterations.
pub fn step_newton(state: &mut ChainState, cfg: &ChainConfig) -> Result<StepDiagnostics, StepError> {
    let ctx = StepContext::new(cfg);
    newton_advance(state, cfg, &ctx)
}

fn newton_advance(
    state: &mut ChainState,
    cfg: &ChainConfig,
    ctx: &StepContext,
) -> Result<StepDiagnostics, StepError> {
    let n = cfg.n_sites;
    let k = state.step;
    let t_next = (k + 1) as f64 * cfg.dt;
    let u0_next = cfg.boundary_value(t_next);

    let dt = cfg.dt;
    let inv_dt2 = 1.0 / (dt * dt);
    let c2 = cfg.coupling * cfg.coupling;
    let bo = cfg.beta / (2.0 * dt); // off-diagonal magnitude of the implicit part
    let half_m2 = cfg.mass_squared / 2.0;

    let uc = &state.u_curr;
    let up = &state.u_prev;

    // Parts of the residual that do not depend on the unknown layer.
    let mut constant = vec![0.0; n];
    for i in 0..n {
        let ucl = if i == 0 { state.u0_curr } else { uc[i - 1] };
        let ucr = if i + 1 < n { uc[i + 1] } else { 0.0 };
        let upl = if i == 0 { state.u0_prev } else { up[i - 1] };
        let upr = if i + 1 < n { up[i + 1] } else { 0.0 };
        let lap_curr = ucr - 2.0 * uc[i] + ucl;
        let lap_prev = upr - 2.0 * up[i] + upl;
        constant[i] = (-2.0 * uc[i] + up[i]) * inv_dt2 - c2 * lap_curr + bo * lap_prev
            - ctx.alpha[i] / (2.0 * dt) * up[i]
            + half_m2 * up[i];
    }

    // Initial guess: linear extrapolation of the last two layers.
    let mut w: Vec<f64> = (0..n).map(|i| 2.0 * uc[i] - up[i]).collect();
    check_finite(&w, k + 1, t_next)?;

    let residual = |w: &[f64], out: &mut Vec<f64>| {
        out.clear();
        for i in 0..n {
            let wl = if i == 0 { u0_next } else { w[i - 1] };
            let wr = if i + 1 < n { w[i + 1] } else { 0.0 };
            let lap_w = wr - 2.0 * w[i] + wl;
            out.push(
                constant[i] + w[i] * inv_dt2 - bo * lap_w
                    + ctx.alpha[i] / (2.0 * dt) * w[i]
                    + half_m2 * w[i]
                    + discrete_gradient(w[i], up[i], cfg.potential),
            );
        }
    };

    let sub = vec![-bo; n.saturating_sub(1)];
    let sup = sub.clone();
    let mut f = Vec::with_capacity(n);
    let mut diag = vec![0.0; n];
    let mut scratch = Vec::with_capacity(n);
    let mut correction_norms = Vec::new();
    let mut converged = false;

    for _ in 0..NEWTON_MAX_ITER {
        residual(&w, &mut f);
        for i in 0..n {
            diag[i] = inv_dt2 + ctx.alpha[i] / (2.0 * dt) + 2.0 * bo + half_m2
                + discrete_gradient_dx(w[i], up[i], cfg.potential);
        }
        for v in f.iter_mut() {
            *v = -*v;
        }
        solve_tridiagonal(&sub, &diag, &sup, &mut f, &mut scratch)
            .map_err(|(row, pivot)| StepError::DegenerateMatrix { row, pivot })?;
        let mut norm = 0.0f64;
        for i in 0..n {
            w[i] += f[i];
            norm = norm.max(f[i].abs());
        }
        correction_norms.push(norm);
        check_finite(&w, k + 1, t_next)?;
        if norm < NEWTON_TOL {
            converged = true;
            break;
        }
    }

    if !converged {
        return Err(StepError::NewtonNonConvergence {
            step: k + 1,
            time: t_next,
            correction: correction_norms.last().copied().unwrap_or(f64::NAN),
            iterations: correction_norms.len(),
        });
    }

    residual(&w, &mut f);
    let final_residual = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let iterations = correction_norms.len();

    state.u_prev = std::mem::replace(&mut state.u_curr, w);
    state.u0_prev = state.u0_curr;
    state.u0_curr = u0_next;
    state.step = k + 1;

    Ok(StepDiagnostics {
        newton_iterations: iterations,
        final_residual_inf_norm: final_residual,
        scheme: SchemeKind::Newton,
        correction_norms,
    })
}

/// Advance the linearized scheme (`V'(u^k)` substitution) by one step:
/// assemble `A u^{k+1} = B u^k + C u^{k-1} - V'(u^k) + v^k` with the
/// per-row constants
/// `a = -beta/2dt`, `b_n = (alpha_n + 2 beta)/2dt + m^2/2 + 1/dt^2`,
/// `d = 2/dt^2 - 2 c^2`, `e_n = (alpha_n + 2 beta)/2dt - m^2/2 - 1/dt^2`,
/// and solve the tridiagonal system directly.
pub fn step_linearized(
    state: &mut ChainState,
    cfg: &ChainConfig,
) -> Result<StepDiagnostics, StepError> {
    let ctx = StepContext::new(cfg);
    linearized_advance(state, cfg, &ctx)
}

fn linearized_advance(
    state: &mut ChainState,
    cfg: &ChainConfig,
    ctx: &StepContext,
) -> Result<StepDiagnostics, StepError> {
    let n = cfg.n_sites;
    let k = state.step;
    let t_next = (k + 1) as f64 * cfg.dt;
    let u0_next = cfg.boundary_value(t_next);

    let dt = cfg.dt;
    let inv_dt2 = 1.0 / (dt * dt);
    let c2 = cfg.coupling * cfg.coupling;
    let a = -cfg.beta / (2.0 * dt);
    let d = 2.0 * inv_dt2 - 2.0 * c2;
    let half_m2 = cfg.mass_squared / 2.0;

    let uc = &state.u_curr;
    let up = &state.u_prev;

    let mut rhs = vec![0.0; n];
    let mut diag = vec![0.0; n];
    for i in 0..n {
        let b_i = (ctx.alpha[i] + 2.0 * cfg.beta) / (2.0 * dt) + half_m2 + inv_dt2;
        let e_i = (ctx.alpha[i] + 2.0 * cfg.beta) / (2.0 * dt) - half_m2 - inv_dt2;
        // Strict diagonal dominance b_i > 2|a| holds whenever
        // 1/dt^2 + m^2/2 + alpha_i/2dt > 0, i.e. for every admissible config.
        debug_assert!(b_i.abs() > 2.0 * a.abs());
        diag[i] = b_i;
        let ucl = if i == 0 { 0.0 } else { uc[i - 1] };
        let ucr = if i + 1 < n { uc[i + 1] } else { 0.0 };
        let upl = if i == 0 { 0.0 } else { up[i - 1] };
        let upr = if i + 1 < n { up[i + 1] } else { 0.0 };
        rhs[i] = d * uc[i] + c2 * (ucl + ucr) + e_i * up[i] + a * (upl + upr)
            - cfg.potential.v_prime(uc[i]);
    }
    // Boundary vector: first component c^2 u_0^k - a * delta_t u_0^k.
    rhs[0] += c2 * state.u0_curr - a * (u0_next - state.u0_prev);

    let sub = vec![a; n.saturating_sub(1)];
    let sup = sub.clone();
    let mut scratch = Vec::with_capacity(n);
    solve_tridiagonal(&sub, &diag, &sup, &mut rhs, &mut scratch)
        .map_err(|(row, pivot)| StepError::DegenerateMatrix { row, pivot })?;
    check_finite(&rhs, k + 1, t_next)?;

    state.u_prev = std::mem::replace(&mut state.u_curr, rhs);
    state.u0_prev = state.u0_curr;
    state.u0_curr = u0_next;
    state.step = k + 1;

    Ok(StepDiagnostics {
        newton_iterations: 0,
        final_residual_inf_norm: 0.0,
        scheme: SchemeKind::Linearized,
        correction_norms: Vec::new(),
    })
}

/// State of the RK4 reference integrator: displacement and velocity
/// layers at time `t = step * dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rk4State {
    pub displacement: Vec<f64>,
    pub velocity: Vec<f64>,
    pub step: usize,
}

impl Rk4State {
    pub fn initial(cfg: &ChainConfig) -> Rk4State {
        Rk4State {
            displacement: initial_field(&cfg.initial_displacement, cfg.n_sites),
            velocity: initial_field(&cfg.initial_velocity, cfg.n_sites),
            step: 0,
        }
    }
}

/// One classical RK4 step of the first-order system, with the boundary
/// values `psi`, `psi'` substituted at the stage times.
pub fn step_rk4(state: &mut Rk4State, cfg: &ChainConfig) -> Result<StepDiagnostics, StepError> {
    let n = cfg.n_sites;
    let dt = cfg.dt;
    let t = state.step as f64 * dt;

    let stage = |u: &[f64], v: &[f64], tau: f64| -> (Vec<f64>, Vec<f64>) {
        (v.to_vec(), acceleration(u, v, tau, cfg))
    };
    let advanced = |base: &[f64], slope: &[f64], h: f64| -> Vec<f64> {
        base.iter().zip(slope).map(|(b, s)| b + h * s).collect()
    };

    let (ku1, kv1) = stage(&state.displacement, &state.velocity, t);
    let (ku2, kv2) = stage(
        &advanced(&state.displacement, &ku1, dt / 2.0),
        &advanced(&state.velocity, &kv1, dt / 2.0),
        t + dt / 2.0,
    );
    let (ku3, kv3) = stage(
        &advanced(&state.displacement, &ku2, dt / 2.0),
        &advanced(&state.velocity, &kv2, dt / 2.0),
        t + dt / 2.0,
    );
    let (ku4, kv4) = stage(
        &advanced(&state.displacement, &ku3, dt),
        &advanced(&state.velocity, &kv3, dt),
        t + dt,
    );

    for i in 0..n {
        state.displacement[i] += dt / 6.0 * (ku1[i] + 2.0 * ku2[i] + 2.0 * ku3[i] + ku4[i]);
        state.velocity[i] += dt / 6.0 * (kv1[i] + 2.0 * kv2[i] + 2.0 * kv3[i] + kv4[i]);
    }
    state.step += 1;
    check_finite(&state.displacement, state.step, t + dt)?;
    check_finite(&state.velocity, state.step, t + dt)?;

    Ok(StepDiagnostics {
        newton_iterations: 0,
        final_residual_inf_norm: 0.0,
        scheme: SchemeKind::Rk4,
        correction_norms: Vec::new(),
    })
}

/// What a run records.
#[derive(Debug, Clone, Default)]
pub struct Recorders {
    /// 1-based site indices to record at every layer.
    pub probes: Vec<usize>,
    /// Keep the full per-step energy series (the final report and the
    /// cumulative injected flux are always kept).
    pub energy_series: bool,
}

/// Probe time series: one row per layer `k = 0..=M`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub probes: Vec<usize>,
    pub times: Vec<f64>,
    /// `rows[k][j]` is the displacement of probe `j` at layer `k`.
    pub rows: Vec<Vec<f64>>,
}

/// Aggregate diagnostics of a completed run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    /// Number of advances taken, counting the initial-data construction of
    /// `u^1` as the first step; equals `round(T / dt)`.
    pub steps: usize,
    pub scheme: SchemeKind,
    pub total_newton_iterations: usize,
    pub max_newton_iterations: usize,
    pub max_residual_inf_norm: f64,
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trajectory: Trajectory,
    /// Per-step energy reports (`k = 0..M-1`), populated when
    /// `Recorders::energy_series` is set.
    pub energy: Vec<EnergyReport>,
    /// Report for the last available step `k = M - 1`.
    pub final_energy: EnergyReport,
    /// Final layers `u^{M-1}`, `u^M`.
    pub final_u_prev: Vec<f64>,
    pub final_u_curr: Vec<f64>,
    /// Final velocity layer (RK4 runs only).
    pub final_velocity: Option<Vec<f64>>,
    pub summary: RunSummary,
}

/// Drive the configured scheme from `t = 0` to `T`.
///
/// Deterministic: identical configurations produce bit-identical output.
/// Step failures propagate with their step index and time.
pub fn run(cfg: &ChainConfig, recorders: &Recorders) -> Result<RunOutput, SimulationError> {
    cfg.validate()?;
    for &p in &recorders.probes {
        if p == 0 || p > cfg.n_sites {
            return Err(ConfigError {
                field: "probes",
                message: format!("probe site {p} outside 1..={}", cfg.n_sites),
            }
            .into());
        }
    }
    match cfg.scheme {
        SchemeKind::Newton | SchemeKind::Linearized => run_implicit(cfg, recorders),
        SchemeKind::Rk4 => run_rk4(cfg, recorders),
    }
}

struct EnergyAccumulator {
    injected: f64,
    previous_total: f64,
    reports: Vec<EnergyReport>,
    keep_series: bool,
    last: EnergyReport,
}

impl EnergyAccumulator {
    fn new(keep_series: bool) -> Self {
        EnergyAccumulator {
            injected: 0.0,
            previous_total: 0.0,
            reports: Vec::new(),
            keep_series,
            last: EnergyReport::zeroed(0),
        }
    }

    fn push_first(&mut self, cfg: &ChainConfig, u0: &[f64], u1: &[f64], b0: f64, b1: f64) {
        let e_total = energy::discrete_energy(u1, u0, b1, b0, cfg, cfg.n_sites);
        let e_physical = energy::discrete_energy(u1, u0, b1, b0, cfg, cfg.n_physical);
        let report = EnergyReport {
            step: 0,
            e_total,
            e_physical,
            flux_in: 0.0,
            dissipation_gamma: 0.0,
            dissipation_beta: 0.0,
            identity_residual: 0.0,
            e_injected_cumulative: 0.0,
        };
        self.previous_total = e_total;
        self.last = report;
        if self.keep_series {
            self.reports.push(report);
        }
    }

    /// Report for step `k` from layers `(u^{k-1}, u^k, u^{k+1})`.
    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        cfg: &ChainConfig,
        step: usize,
        u_prev: &[f64],
        u_curr: &[f64],
        u_next: &[f64],
        boundary: (f64, f64, f64),
    ) {
        let (_, b_curr, b_next) = boundary;
        let e_total = energy::discrete_energy(u_next, u_curr, b_next, b_curr, cfg, cfg.n_sites);
        let e_physical =
            energy::discrete_energy(u_next, u_curr, b_next, b_curr, cfg, cfg.n_physical);
        let terms = energy::rate_terms(u_prev, u_next, boundary, u_curr[0], cfg);
        let residual = (e_total - self.previous_total) / cfg.dt
            - (terms.flux_in - terms.dissipation_gamma - terms.dissipation_beta);
        self.injected += terms.flux_in * cfg.dt;
        let report = EnergyReport {
            step,
            e_total,
            e_physical,
            flux_in: terms.flux_in,
            dissipation_gamma: terms.dissipation_gamma,
            dissipation_beta: terms.dissipation_beta,
            identity_residual: residual,
            e_injected_cumulative: self.injected,
        };
        self.previous_total = e_total;
        self.last = report;
        if self.keep_series {
            self.reports.push(report);
        }
    }
}

fn probe_row(layer: &[f64], probes: &[usize]) -> Vec<f64> {
    probes.iter().map(|&p| layer[p - 1]).collect()
}

fn run_implicit(cfg: &ChainConfig, recorders: &Recorders) -> Result<RunOutput, SimulationError> {
    let m = cfg.step_count();
    let ctx = StepContext::new(cfg);
    let mut state = ChainState::initial(cfg);
    check_finite(&state.u_curr, 1, cfg.dt).map_err(SimulationError::Step)?;

    let mut times = Vec::with_capacity(m + 1);
    let mut rows = Vec::with_capacity(m + 1);
    times.push(0.0);
    rows.push(probe_row(&state.u_prev, &recorders.probes));
    times.push(cfg.dt);
    rows.push(probe_row(&state.u_curr, &recorders.probes));

    let mut acc = EnergyAccumulator::new(recorders.energy_series);
    acc.push_first(cfg, &state.u_prev, &state.u_curr, state.u0_prev, state.u0_curr);

    let mut summary = RunSummary {
        steps: m,
        scheme: cfg.scheme,
        total_newton_iterations: 0,
        max_newton_iterations: 0,
        max_residual_inf_norm: 0.0,
    };

    let mut oldest = state.u_prev.clone();
    let mut oldest_boundary = state.u0_prev;
    for _ in 1..m {
        // Keep u^{k-1} around: the step rotates it away but the energy
        // report for step k still needs it.
        oldest.copy_from_slice(&state.u_prev);
        oldest_boundary = state.u0_prev;
        let diag = match cfg.scheme {
            SchemeKind::Newton => newton_advance(&mut state, cfg, &ctx)?,
            SchemeKind::Linearized => linearized_advance(&mut state, cfg, &ctx)?,
            SchemeKind::Rk4 => unreachable!(),
        };
        summary.total_newton_iterations += diag.newton_iterations;
        summary.max_newton_iterations = summary.max_newton_iterations.max(diag.newton_iterations);
        summary.max_residual_inf_norm =
            summary.max_residual_inf_norm.max(diag.final_residual_inf_norm);

        times.push(state.time(cfg));
        rows.push(probe_row(&state.u_curr, &recorders.probes));
        acc.push(
            cfg,
            state.step - 1,
            &oldest,
            &state.u_prev,
            &state.u_curr,
            (oldest_boundary, state.u0_prev, state.u0_curr),
        );
    }
    let _ = oldest_boundary;

    Ok(RunOutput {
        trajectory: Trajectory {
            probes: recorders.probes.clone(),
            times,
            rows,
        },
        energy: acc.reports,
        final_energy: acc.last,
        final_u_prev: state.u_prev,
        final_u_curr: state.u_curr,
        final_velocity: None,
        summary,
    })
}

fn run_rk4(cfg: &ChainConfig, recorders: &Recorders) -> Result<RunOutput, SimulationError> {
    let m = cfg.step_count();
    let mut state = Rk4State::initial(cfg);

    let mut times = Vec::with_capacity(m + 1);
    let mut rows = Vec::with_capacity(m + 1);
    times.push(0.0);
    rows.push(probe_row(&state.displacement, &recorders.probes));

    let mut acc = EnergyAccumulator::new(recorders.energy_series);
    let mut layer_prev2: Option<Vec<f64>> = None;
    let mut layer_prev = state.displacement.clone();

    for k in 0..m {
        step_rk4(&mut state, cfg)?;
        times.push(state.step as f64 * cfg.dt);
        rows.push(probe_row(&state.displacement, &recorders.probes));

        let b = |j: usize| cfg.boundary_value(j as f64 * cfg.dt);
        if k == 0 {
            acc.push_first(cfg, &layer_prev, &state.displacement, b(0), b(1));
        } else {
            let prev2 = layer_prev2.as_ref().expect("two layers after first step");
            acc.push(
                cfg,
                k,
                prev2,
                &layer_prev,
                &state.displacement,
                (b(k - 1), b(k), b(k + 1)),
            );
        }
        layer_prev2 = Some(std::mem::replace(&mut layer_prev, state.displacement.clone()));
    }

    Ok(RunOutput {
        trajectory: Trajectory {
            probes: recorders.probes.clone(),
            times,
            rows,
        },
        energy: acc.reports,
        final_energy: acc.last,
        final_u_prev: layer_prev2.unwrap_or_else(|| vec![0.0; cfg.n_sites]),
        final_u_curr: state.displacement,
        final_velocity: Some(state.velocity),
        summary: RunSummary {
            steps: m,
            scheme: SchemeKind::Rk4,
            total_newton_iterations: 0,
            max_newton_iterations: 0,
            max_residual_inf_norm: 0.0,
        },
    })
}

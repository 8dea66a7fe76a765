//! Discrete total energy, boundary flux and dissipation terms, and the
//! exact per-step energy-rate identity.
//!
//! The discrete energy over sites `1..=limit` for consecutive layers
//! `u^k`, `u^{k+1}` is
//!
//! ```text
//! E_k = 1/2 sum ((u^{k+1}_n - u^k_n)/dt)^2
//!     + c^2/2 sum (u^{k+1}_{n+1} - u^{k+1}_n)(u^k_{n+1} - u^k_n)
//!     + m^2/2 sum [(u^{k+1}_n)^2 + (u^k_n)^2]/2
//!     + sum [V(u^{k+1}_n) + V(u^k_n)]/2
//!     + c^2/2 (u^{k+1}_1 - u^{k+1}_0)(u^k_1 - u^k_0)
//! ```
//!
//! For layers produced by the nonlinear implicit scheme the rate
//! `(E_k - E_{k-1})/dt` equals the boundary flux minus the damping sums
//! exactly (up to solver tolerance and roundoff); the residual of that
//! identity is the main runtime diagnostic of the integrator.

use crate::model::ChainConfig;

/// Per-step energy diagnostics. Reports are indexed by the *earlier* layer
/// of the pair they were computed from, so the report for step `k` uses
/// layers `k` and `k+1` and is only available one step in arrears.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport {
    pub step: usize,
    /// Discrete energy over all `N` sites.
    pub e_total: f64,
    /// Discrete energy truncated to the physical sites `1..=N0`.
    pub e_physical: f64,
    /// Boundary flux `c^2 (u_0^k - u_1^k) delta_t u_0^k / (2 dt)`.
    pub flux_in: f64,
    /// Damping sum `sum alpha_n (delta_t u_n^k / (2 dt))^2`; with the
    /// absorbing layer off this is the uniform external-damping sum.
    pub dissipation_gamma: f64,
    /// Internal-damping terms (difference-square sum plus boundary
    /// cross term), scaled by `beta`.
    pub dissipation_beta: f64,
    /// `(E_k - E_{k-1})/dt - (flux_in - dissipation_gamma - dissipation_beta)`.
    pub identity_residual: f64,
    /// `sum_{j<=k} flux_in(j) dt`.
    pub e_injected_cumulative: f64,
}

impl EnergyReport {
    pub(crate) fn zeroed(step: usize) -> Self {
        EnergyReport {
            step,
            e_total: 0.0,
            e_physical: 0.0,
            flux_in: 0.0,
            dissipation_gamma: 0.0,
            dissipation_beta: 0.0,
            identity_residual: 0.0,
            e_injected_cumulative: 0.0,
        }
    }
}

/// Discrete energy over sites `1..=site_limit` for the layer pair
/// `(u_curr, u_next)` with boundary values `u0_curr`, `u0_next`.
/// `site_limit` is `N0` for the physical energy or `N` for the total;
/// the fictitious site `N+1` is identically zero.
pub fn discrete_energy(
    u_next: &[f64],
    u_curr: &[f64],
    u0_next: f64,
    u0_curr: f64,
    cfg: &ChainConfig,
    site_limit: usize,
) -> f64 {
    let n = cfg.n_sites;
    debug_assert_eq!(u_next.len(), n);
    debug_assert_eq!(u_curr.len(), n);
    debug_assert!(site_limit <= n && site_limit >= 1);
    let dt = cfg.dt;
    let c2 = cfg.coupling * cfg.coupling;
    let m2 = cfg.mass_squared;

    let mut kinetic = 0.0;
    let mut coupling = 0.0;
    let mut mass = 0.0;
    let mut potential = 0.0;
    for i in 0..site_limit {
        let dv = (u_next[i] - u_curr[i]) / dt;
        kinetic += dv * dv;
        let right_next = if i + 1 < n { u_next[i + 1] } else { 0.0 };
        let right_curr = if i + 1 < n { u_curr[i + 1] } else { 0.0 };
        coupling += (right_next - u_next[i]) * (right_curr - u_curr[i]);
        mass += (u_next[i] * u_next[i] + u_curr[i] * u_curr[i]) / 2.0;
        potential += (cfg.potential.v(u_next[i]) + cfg.potential.v(u_curr[i])) / 2.0;
    }
    let boundary = (u_next[0] - u0_next) * (u_curr[0] - u0_curr);
    0.5 * kinetic + 0.5 * c2 * coupling + 0.5 * m2 * mass + potential + 0.5 * c2 * boundary
}

/// Flux and dissipation terms of the energy-rate identity at step `k`,
/// computed from the three layers `u^{k-1}`, `u^k`, `u^{k+1}` and the
/// matching boundary values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateTerms {
    pub flux_in: f64,
    pub dissipation_gamma: f64,
    pub dissipation_beta: f64,
}

/// Compute the right-hand-side terms of the rate identity with the
/// velocity surrogate `v_n = (u^{k+1}_n - u^{k-1}_n) / (2 dt)`.
///
/// The damping sum carries the site-dependent `alpha_n = gamma + gamma'(n)`
/// so the identity stays exact with the absorbing layer on; with
/// `kappa = 0` it reduces to the uniform `gamma` sum. The `beta` sum runs
/// through the fictitious site `N+1` (where `v = 0`), which the finite
/// chain requires for exactness once the wavefront reaches the far end.
pub fn rate_terms(
    u_prev: &[f64],
    u_next: &[f64],
    boundary: (f64, f64, f64),
    u1_curr: f64,
    cfg: &ChainConfig,
) -> RateTerms {
    let n = cfg.n_sites;
    let two_dt = 2.0 * cfg.dt;
    let (b_prev, b_curr, b_next) = boundary;
    let v0 = (b_next - b_prev) / two_dt;
    let c2 = cfg.coupling * cfg.coupling;

    let flux_in = c2 * (b_curr - u1_curr) * v0;

    let mut gamma_sum = 0.0;
    let mut beta_squares = 0.0;
    let mut v_left = v0;
    for i in 0..n {
        let v = (u_next[i] - u_prev[i]) / two_dt;
        gamma_sum += cfg.alpha(i + 1) * v * v;
        let d = v - v_left;
        beta_squares += d * d;
        v_left = v;
    }
    // Fictitious site N+1 has v = 0.
    beta_squares += v_left * v_left;

    let v1 = (u_next[0] - u_prev[0]) / two_dt;
    let dissipation_beta = cfg.beta * (beta_squares + (v1 - v0) * v0);

    RateTerms {
        flux_in,
        dissipation_gamma: gamma_sum,
        dissipation_beta,
    }
}

/// Residual of the exact discrete energy-rate identity at one step:
/// `(E_k - E_{k-1})/dt` minus `flux - gamma-sum - beta-terms`, with the
/// energies over all `N` sites. For layers satisfying one accepted
/// implicit step with uniform damping (`kappa = 0`) this is zero up to
/// solver tolerance and roundoff.
pub fn energy_rate_identity(
    u_prev: &[f64],
    u_curr: &[f64],
    u_next: &[f64],
    boundary: (f64, f64, f64),
    cfg: &ChainConfig,
) -> f64 {
    let n = cfg.n_sites;
    let (b_prev, b_curr, b_next) = boundary;
    let e_k = discrete_energy(u_next, u_curr, b_next, b_curr, cfg, n);
    let e_km1 = discrete_energy(u_curr, u_prev, b_curr, b_prev, cfg, n);
    let terms = rate_terms(u_prev, u_next, boundary, u_curr[0], cfg);
    (e_k - e_km1) / cfg.dt - (terms.flux_in - terms.dissipation_gamma - terms.dissipation_beta)
}

/// Instantaneous energy rate of the continuous system evaluated with the
/// discrete velocity surrogates: boundary flux minus the uniform
/// external-damping sum minus the internal-damping terms. Diagnostic
/// companion to [`energy_rate_identity`]; with `beta = gamma = 0` it is
/// exactly the flux term.
pub fn continuous_rate_reference(
    u_prev: &[f64],
    u_curr: &[f64],
    u_next: &[f64],
    boundary: (f64, f64, f64),
    cfg: &ChainConfig,
) -> f64 {
    let n = cfg.n_sites;
    let two_dt = 2.0 * cfg.dt;
    let (b_prev, b_curr, b_next) = boundary;
    let v0 = (b_next - b_prev) / two_dt;
    let c2 = cfg.coupling * cfg.coupling;

    let mut gamma_sum = 0.0;
    let mut beta_squares = 0.0;
    let mut v_left = v0;
    for i in 0..n {
        let v = (u_next[i] - u_prev[i]) / two_dt;
        gamma_sum += v * v;
        let d = v - v_left;
        beta_squares += d * d;
        v_left = v;
    }
    beta_squares += v_left * v_left;
    let v1 = (u_next[0] - u_prev[0]) / two_dt;

    c2 * (b_curr - u_curr[0]) * v0
        - cfg.gamma * gamma_sum
        - cfg.beta * (beta_squares + (v1 - v0) * v0)
}

/// Evaluate both sides of the discrete Green's first identity
/// `sum_{n>=1} (a_{n+1} - 2 a_n + a_{n-1}) a_n
///  = a_0 (a_0 - a_1) - sum_{n>=1} (a_n - a_{n-1})^2`
/// for a finite sequence padded with zeros, computing the two sides by
/// independent summations.
pub fn greens_identity_check(a: &[f64]) -> (f64, f64) {
    let len = a.len();
    if len == 0 {
        return (0.0, 0.0);
    }
    let get = |i: usize| -> f64 {
        if i < len {
            a[i]
        } else {
            0.0
        }
    };

    let mut lhs = 0.0;
    for n in 1..len {
        lhs += (get(n + 1) - 2.0 * a[n] + a[n - 1]) * a[n];
    }

    // Difference-square sum accumulated in reverse order, independently of
    // the left-hand sweep. The n = len term covers the zero padding.
    let mut squares = 0.0;
    for n in (1..=len).rev() {
        let d = get(n) - a[n - 1];
        squares += d * d;
    }
    let rhs = a[0] * (a[0] - get(1)) - squares;
    (lhs, rhs)
}

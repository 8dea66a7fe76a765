//! Physical parameters, on-site potentials and closed-form linear theory
//! for the driven oscillator chain.
//!
//! The chain obeys, for sites `1 <= n <= N`,
//!
//! ```text
//! u''_n - (c^2 + beta d/dt) (u_{n+1} - 2 u_n + u_{n-1})
//!       + alpha_n u'_n + m^2 u_n + V'(u_n) = 0
//! ```
//!
//! with `u_0(t) = psi(t)` driven harmonically, a fictitious site
//! `u_{N+1} = 0`, and `alpha_n = gamma + gamma'(n)` combining uniform
//! external damping with an absorbing ramp on the last `N - N0` sites.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// On-site potential `V`.
///
/// `SineGordon` and `KleinGordon` both have `V''(0) = 1`, which is what
/// puts the lower band edge at `sqrt(m^2 + 1)`. `Zero` disables the
/// potential entirely and exists for linear validation studies (mass must
/// then carry the band gap).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PotentialKind {
    SineGordon,
    KleinGordon,
    Zero,
}

impl PotentialKind {
    /// V(u)
    pub fn v(&self, u: f64) -> f64 {
        match self {
            PotentialKind::SineGordon => 1.0 - u.cos(),
            PotentialKind::KleinGordon => {
                let u2 = u * u;
                u2 / 2.0 - u2 * u2 / 24.0 + u2 * u2 * u2 / 720.0
            }
            PotentialKind::Zero => 0.0,
        }
    }

    /// V'(u)
    pub fn v_prime(&self, u: f64) -> f64 {
        match self {
            PotentialKind::SineGordon => u.sin(),
            PotentialKind::KleinGordon => {
                let u2 = u * u;
                u * (1.0 - u2 / 6.0 + u2 * u2 / 120.0)
            }
            PotentialKind::Zero => 0.0,
        }
    }

    /// V''(u)
    pub fn v_double_prime(&self, u: f64) -> f64 {
        match self {
            PotentialKind::SineGordon => u.cos(),
            PotentialKind::KleinGordon => {
                let u2 = u * u;
                1.0 - u2 / 2.0 + u2 * u2 / 24.0
            }
            PotentialKind::Zero => 0.0,
        }
    }

    /// V''(0); the linear stiffness the potential contributes to the gap.
    pub fn curvature_at_zero(&self) -> f64 {
        match self {
            PotentialKind::SineGordon | PotentialKind::KleinGordon => 1.0,
            PotentialKind::Zero => 0.0,
        }
    }
}

impl fmt::Display for PotentialKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PotentialKind::SineGordon => "sine-gordon",
            PotentialKind::KleinGordon => "klein-gordon",
            PotentialKind::Zero => "zero",
        };
        f.write_str(s)
    }
}

impl FromStr for PotentialKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sine-gordon" | "sine_gordon" | "sg" => Ok(PotentialKind::SineGordon),
            "klein-gordon" | "klein_gordon" | "kg" => Ok(PotentialKind::KleinGordon),
            "zero" | "none" => Ok(PotentialKind::Zero),
            other => Err(format!(
                "unknown potential '{other}' (expected sine-gordon, klein-gordon or zero)"
            )),
        }
    }
}

/// Time integration scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    /// Nonlinear implicit scheme solved by Newton iteration per step.
    Newton,
    /// Linearized implicit scheme (`V'(u^k)` substitution) solved by
    /// tridiagonal elimination.
    Linearized,
    /// Classical fourth-order Runge-Kutta on the first-order system;
    /// reference integrator for cross-validation.
    Rk4,
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SchemeKind::Newton => "newton",
            SchemeKind::Linearized => "linearized",
            SchemeKind::Rk4 => "rk4",
        };
        f.write_str(s)
    }
}

impl FromStr for SchemeKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "newton" => Ok(SchemeKind::Newton),
            "linearized" | "crout" => Ok(SchemeKind::Linearized),
            "rk4" | "runge-kutta" => Ok(SchemeKind::Rk4),
            other => Err(format!(
                "unknown scheme '{other}' (expected newton, linearized or rk4)"
            )),
        }
    }
}

/// Harmonic boundary drive `psi(t) = A r(t) sin(Omega t)` where
/// `r(t) = min(t / ramp_time, 1)` ramps the amplitude from zero
/// (`r == 1` identically when `ramp_time == 0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveSpec {
    /// Driving amplitude `A >= 0`.
    pub amplitude: f64,
    /// Driving angular frequency `Omega > 0`.
    pub frequency: f64,
}

/// All physical and numerical parameters of one simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    /// Total number of oscillators `N`.
    pub n_sites: usize,
    /// Sites before the absorbing layer, `N0 <= N`.
    pub n_physical: usize,
    /// Coupling coefficient `c` (the equation uses `c^2`).
    pub coupling: f64,
    /// Internal damping `beta >= 0` (acts on the discrete Laplacian of the
    /// velocity).
    pub beta: f64,
    /// External damping `gamma >= 0` (proportional to site velocity).
    pub gamma: f64,
    /// Squared mass `m^2 > -1`; negative values model pure-imaginary mass.
    pub mass_squared: f64,
    /// Absorbing-layer strength `kappa >= 0`.
    pub kappa: f64,
    /// Absorbing-layer width `sigma > 0`.
    pub sigma: f64,
    /// Time step.
    pub dt: f64,
    /// Final time `T >= dt`.
    pub t_final: f64,
    /// Drive amplitude ramp duration (0 disables the ramp).
    pub ramp_time: f64,
    pub potential: PotentialKind,
    pub drive: DriveSpec,
    pub scheme: SchemeKind,
    /// Initial displacement `phi(n)`; empty means all zeros, otherwise
    /// exactly `n_sites` entries.
    #[serde(default)]
    pub initial_displacement: Vec<f64>,
    /// Initial velocity `phi'(n)`; same length convention.
    #[serde(default)]
    pub initial_velocity: Vec<f64>,
    /// Start the second layer as `u^1 = phi + dt*phi' + (dt^2/2) u''(0)`
    /// instead of the plain first-order start.
    #[serde(default)]
    pub second_order_start: bool,
    /// Use the absorbing-profile argument `(2n - N0 + N)` exactly as
    /// printed in the source material instead of the corrected
    /// `(2n - N0 - N)` ramp. With the printed argument the profile is
    /// already saturated at `~2 kappa` across the whole layer.
    #[serde(default)]
    pub printed_absorbing_form: bool,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            n_sites: 200,
            n_physical: 150,
            coupling: 4.0,
            beta: 0.0,
            gamma: 0.0,
            mass_squared: 0.0,
            kappa: 0.5,
            sigma: 3.0,
            dt: 0.05,
            t_final: 200.0,
            ramp_time: 50.0,
            potential: PotentialKind::SineGordon,
            drive: DriveSpec {
                amplitude: 0.0,
                frequency: 0.9,
            },
            scheme: SchemeKind::Newton,
            initial_displacement: Vec::new(),
            initial_velocity: Vec::new(),
            second_order_start: false,
            printed_absorbing_form: false,
        }
    }
}

/// Field-level configuration error.
#[derive(Debug, Clone, Error)]
#[error("invalid config: {field}: {message}")]
pub struct ConfigError {
    pub field: &'static str,
    pub message: String,
}

impl ConfigError {
    fn new(field: &'static str, message: impl Into<String>) -> Self {
        ConfigError {
            field,
            message: message.into(),
        }
    }
}

/// Non-fatal condition detected while validating a configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum ConfigWarning {
    /// The necessary stability inequality is violated; the run may blow up.
    StabilityViolated { lhs: f64, rhs: f64, margin: f64 },
}

impl fmt::Display for ConfigWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigWarning::StabilityViolated { lhs, rhs, margin } => write!(
                f,
                "stability condition violated: (c^2 - m^2/4) dt^2 = {lhs} >= {rhs} = 1 + (gamma/4 + beta) dt (margin {margin})"
            ),
        }
    }
}

/// Domain error for linear-theory formulas that only exist inside the
/// forbidden band gap.
#[derive(Debug, Clone, Error)]
pub enum DomainError {
    #[error("driving frequency {frequency} lies outside the forbidden band gap (gap edge sqrt(m^2 + V''(0)) = {gap_edge})")]
    FrequencyOutsideGap { frequency: f64, gap_edge: f64 },
}

impl ChainConfig {
    /// Check all construction invariants. Returns the list of non-fatal
    /// warnings (the stability inequality is only a necessary condition,
    /// so a violation warns instead of failing).
    pub fn validate(&self) -> Result<Vec<ConfigWarning>, ConfigError> {
        if self.n_sites == 0 {
            return Err(ConfigError::new("n", "need at least one oscillator"));
        }
        if self.n_physical == 0 || self.n_physical > self.n_sites {
            return Err(ConfigError::new(
                "n0",
                format!(
                    "n_physical must satisfy 1 <= N0 <= N, got N0 = {} with N = {}",
                    self.n_physical, self.n_sites
                ),
            ));
        }
        let positive: [(&'static str, f64); 4] = [
            ("coupling", self.coupling),
            ("sigma", self.sigma),
            ("dt", self.dt),
            ("frequency", self.drive.frequency),
        ];
        for (field, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(ConfigError::new(field, format!("must be positive, got {value}")));
            }
        }
        let nonnegative: [(&'static str, f64); 4] = [
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("kappa", self.kappa),
            ("ramp-time", self.ramp_time),
        ];
        for (field, value) in nonnegative {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(ConfigError::new(
                    field,
                    format!("must be nonnegative, got {value}"),
                ));
            }
        }
        if !(self.drive.amplitude >= 0.0) || !self.drive.amplitude.is_finite() {
            return Err(ConfigError::new(
                "amplitude",
                format!("must be nonnegative, got {}", self.drive.amplitude),
            ));
        }
        if !(self.mass_squared > -1.0) || !self.mass_squared.is_finite() {
            return Err(ConfigError::new(
                "mass-squared",
                format!("must exceed -1 so a band gap exists, got {}", self.mass_squared),
            ));
        }
        if self.potential == PotentialKind::Zero && self.mass_squared < 0.0 {
            return Err(ConfigError::new(
                "mass-squared",
                "must be nonnegative when the potential is disabled (the gap then comes from the mass alone)",
            ));
        }
        if !(self.t_final >= self.dt) || !self.t_final.is_finite() {
            return Err(ConfigError::new(
                "t-final",
                format!("must be at least dt = {}, got {}", self.dt, self.t_final),
            ));
        }
        for (field, seq) in [
            ("initial-displacement", &self.initial_displacement),
            ("initial-velocity", &self.initial_velocity),
        ] {
            if !seq.is_empty() && seq.len() != self.n_sites {
                return Err(ConfigError::new(
                    field,
                    format!("expected {} entries (or none), got {}", self.n_sites, seq.len()),
                ));
            }
            if seq.iter().any(|v| !v.is_finite()) {
                return Err(ConfigError::new(field, "entries must be finite"));
            }
        }

        let mut warnings = Vec::new();
        let stab = check_stability(self);
        if !stab.satisfied {
            warnings.push(ConfigWarning::StabilityViolated {
                lhs: stab.lhs,
                rhs: stab.rhs,
                margin: stab.margin,
            });
        }
        Ok(warnings)
    }

    /// Lower edge `sqrt(m^2 + V''(0))` of the propagating band.
    pub fn band_gap_edge(&self) -> f64 {
        (self.mass_squared + self.potential.curvature_at_zero()).sqrt()
    }

    /// Boundary drive `psi(t)`.
    pub fn boundary_value(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        self.drive.amplitude * self.ramp_factor(t) * (self.drive.frequency * t).sin()
    }

    /// Boundary drive velocity `psi'(t)` (one-sided at the ramp knee).
    pub fn boundary_velocity(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        let a = self.drive.amplitude;
        let om = self.drive.frequency;
        if self.ramp_time > 0.0 && t < self.ramp_time {
            a / self.ramp_time * (om * t).sin() + a * (t / self.ramp_time) * om * (om * t).cos()
        } else {
            a * om * (om * t).cos()
        }
    }

    fn ramp_factor(&self, t: f64) -> f64 {
        if self.ramp_time > 0.0 {
            (t / self.ramp_time).min(1.0)
        } else {
            1.0
        }
    }

    /// Number of time layers past `u^0`, i.e. the run produces layers
    /// `u^0 .. u^M` with `M = round(T / dt)` (at least 1).
    pub fn step_count(&self) -> usize {
        ((self.t_final / self.dt).round() as usize).max(1)
    }

    /// Site damping `alpha_n = gamma + gamma'(n)` for 1-based `n`.
    pub fn alpha(&self, n: usize) -> f64 {
        self.gamma + absorbing_profile(n, self)
    }
}

/// Linear dispersion relation: `omega(k) = sqrt(m^2 + V''(0) + 2 c^2 (1 - cos k))`
/// for wavenumber `k` in `[0, pi]`. With the sine-Gordon or Klein-Gordon
/// potential this is `sqrt(m^2 + 1 + 2 c^2 (1 - cos k))`.
pub fn dispersion(k: f64, cfg: &ChainConfig) -> f64 {
    let m2 = cfg.mass_squared + cfg.potential.curvature_at_zero();
    let c2 = cfg.coupling * cfg.coupling;
    (m2 + 2.0 * c2 * (1.0 - k.cos())).sqrt()
}

/// Spatial decay rate of the evanescent linear solution
/// `u_n(t) = A sin(Omega t) e^(-lambda n)` for a driving frequency inside
/// the forbidden band gap:
/// `lambda = arccosh(1 + (m^2 + V''(0) - Omega^2) / (2 c^2))`.
pub fn evanescent_decay(omega: f64, cfg: &ChainConfig) -> Result<f64, DomainError> {
    let edge = cfg.band_gap_edge();
    if !(omega < edge) {
        return Err(DomainError::FrequencyOutsideGap {
            frequency: omega,
            gap_edge: edge,
        });
    }
    let c2 = cfg.coupling * cfg.coupling;
    Ok((1.0 + (edge * edge - omega * omega) / (2.0 * c2)).acosh())
}

/// Continuum (massless) prediction for the supratransmission threshold
/// amplitude, `A_s = 4 arctan(lambda(Omega) c / Omega)`.
pub fn threshold_amplitude(omega: f64, cfg: &ChainConfig) -> Result<f64, DomainError> {
    let lambda = evanescent_decay(omega, cfg)?;
    Ok(4.0 * (lambda * cfg.coupling / omega).atan())
}

/// Absorbing damping increment `gamma'(n)` for 1-based site index `n`:
/// zero on the physical sites, and
/// `kappa [1 + tanh((2n - N0 - N) / (2 sigma))]` on `N0 < n <= N`, a
/// monotone ramp from ~0 to ~2 kappa with midpoint kappa at
/// `n = (N0 + N) / 2`.
pub fn absorbing_profile(n: usize, cfg: &ChainConfig) -> f64 {
    if n <= cfg.n_physical {
        return 0.0;
    }
    let n0 = cfg.n_physical as f64;
    let big_n = cfg.n_sites as f64;
    let arg = if cfg.printed_absorbing_form {
        2.0 * n as f64 - n0 + big_n
    } else {
        2.0 * n as f64 - n0 - big_n
    };
    cfg.kappa * (1.0 + (arg / (2.0 * cfg.sigma)).tanh())
}

/// Outcome of the necessary stability condition
/// `(c^2 - m^2/4) dt^2 < 1 + (alpha/4 + beta) dt`, evaluated with the
/// spatially uniform damping `alpha = gamma` (the absorbing layer only
/// increases damping, hence the right-hand side).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityCheck {
    pub satisfied: bool,
    /// `rhs - lhs`; positive when the condition holds strictly.
    pub margin: f64,
    pub lhs: f64,
    pub rhs: f64,
}

/// Evaluate the necessary stability inequality for `cfg`.
pub fn check_stability(cfg: &ChainConfig) -> StabilityCheck {
    let c2 = cfg.coupling * cfg.coupling;
    let lhs = (c2 - cfg.mass_squared / 4.0) * cfg.dt * cfg.dt;
    let rhs = 1.0 + (cfg.gamma / 4.0 + cfg.beta) * cfg.dt;
    StabilityCheck {
        satisfied: lhs < rhs,
        margin: rhs - lhs,
        lhs,
        rhs,
    }
}

//! Slower physics checks that exercise full runs: the exact energy-rate
//! identity, energy conservation, the evanescent linear regime, scheme
//! cross-validation and the qualitative supratransmission bifurcation.

use sgchain::energy::continuous_rate_reference;
use sgchain::{run, ChainConfig, DriveSpec, PotentialKind, Recorders, SchemeKind};

fn driven(amplitude: f64, frequency: f64) -> ChainConfig {
    ChainConfig {
        drive: DriveSpec {
            amplitude,
            frequency,
        },
        ..ChainConfig::default()
    }
}

fn max_abs_residual(cfg: &ChainConfig) -> (f64, f64) {
    let out = run(
        cfg,
        &Recorders {
            probes: vec![],
            energy_series: true,
        },
    )
    .unwrap();
    let mut worst = 0.0f64;
    let mut worst_allowed = 1.0f64;
    for report in &out.energy {
        let allowed = report.e_total.abs().max(1.0);
        if report.identity_residual.abs() / allowed > worst / worst_allowed {
            worst = report.identity_residual.abs();
            worst_allowed = allowed;
        }
    }
    (worst, worst_allowed)
}

/// The discrete rate identity holds at every step of a driven run with the
/// absorbing layer off, for all four damping combinations.
#[test]
fn rate_identity_exact_over_damping_grid() {
    for &(beta, gamma) in &[(0.0, 0.0), (0.1, 0.0), (0.0, 0.03), (0.1, 0.03)] {
        let cfg = ChainConfig {
            beta,
            gamma,
            kappa: 0.0,
            t_final: 60.0,
            ..driven(1.5, 0.9)
        };
        let (worst, allowed) = max_abs_residual(&cfg);
        assert!(
            worst <= 1e-8 * allowed,
            "beta={beta} gamma={gamma}: residual {worst:.3e} vs {allowed:.3e}"
        );
    }
}

/// With the absorbing layer on, the site-dependent damping sum keeps the
/// identity exact as well.
#[test]
fn rate_identity_exact_with_absorbing_layer() {
    let cfg = ChainConfig {
        t_final: 60.0,
        ..driven(1.5, 0.9)
    };
    let (worst, allowed) = max_abs_residual(&cfg);
    assert!(worst <= 1e-8 * allowed, "residual {worst:.3e}");
}

/// Undamped, undriven, no absorbing layer: the discrete energy is constant
/// to solver tolerance over thousands of steps.
#[test]
fn energy_conserved_without_damping_or_drive() {
    let n = 200;
    let cfg = ChainConfig {
        kappa: 0.0,
        t_final: 200.0,
        initial_displacement: (0..n)
            .map(|i| 0.8 * (-(((i as f64) - 100.0) / 10.0).powi(2)).exp())
            .collect(),
        ..ChainConfig::default()
    };
    let out = run(
        &cfg,
        &Recorders {
            probes: vec![],
            energy_series: true,
        },
    )
    .unwrap();
    assert_eq!(out.energy.len(), 4000);
    let e0 = out.energy[0].e_total;
    assert!(e0 > 0.1, "bump should carry energy, E_0 = {e0}");
    let bound = 1e-8 * e0.max(1.0);
    for report in &out.energy {
        assert!(
            (report.e_total - e0).abs() <= bound,
            "step {}: |E_k - E_0| = {:.3e} > {bound:.3e}",
            report.step,
            (report.e_total - e0).abs()
        );
    }
    // Sine-Gordon energy is nonnegative along the way.
    assert!(out.energy.iter().all(|r| r.e_total >= 0.0));
}

/// The flux/dissipation decomposition matches the energy increment term by
/// term, and the continuous-rate reference coincides with it for kappa = 0.
#[test]
fn dissipation_decomposition_reconciles() {
    let cfg = ChainConfig {
        beta: 0.1,
        gamma: 0.02,
        kappa: 0.0,
        t_final: 40.0,
        ..driven(1.8, 0.9)
    };
    let out = run(
        &cfg,
        &Recorders {
            probes: vec![],
            energy_series: true,
        },
    )
    .unwrap();
    let mut prev_total = out.energy[0].e_total;
    for report in &out.energy[1..] {
        let increment = (report.e_total - prev_total) / cfg.dt;
        let rhs = report.flux_in - report.dissipation_gamma - report.dissipation_beta;
        assert!(
            (increment - rhs).abs() <= 1e-8 * report.e_total.abs().max(1.0),
            "step {}: increment {increment:.6e} vs rhs {rhs:.6e}",
            report.step
        );
        assert!(report.dissipation_gamma >= 0.0);
        prev_total = report.e_total;
    }
}

/// Prop-1-style reference with discrete velocities agrees with the exact
/// per-step rate on uniformly damped runs.
#[test]
fn continuous_rate_matches_discrete_rate() {
    let cfg = ChainConfig {
        beta: 0.05,
        gamma: 0.01,
        kappa: 0.0,
        t_final: 30.0,
        ..driven(1.2, 0.9)
    };
    let out = run(
        &cfg,
        &Recorders {
            probes: vec![],
            energy_series: true,
        },
    )
    .unwrap();
    // Re-run the trajectory through the reference formula by stepping the
    // scheme manually: before the step the state holds (u^{k-1}, u^k),
    // afterwards (u^k, u^{k+1}).
    let mut state = sgchain::ChainState::initial(&cfg);
    let mut checked = 0;
    for k in 1..cfg.step_count() {
        let oldest = state.u_prev.clone();
        let oldest_b = state.u0_prev;
        sgchain::stepper::step_newton(&mut state, &cfg).unwrap();
        let reference = continuous_rate_reference(
            &oldest,
            &state.u_prev,
            &state.u_curr,
            (oldest_b, state.u0_prev, state.u0_curr),
            &cfg,
        );
        let report = &out.energy[k];
        let rhs = report.flux_in - report.dissipation_gamma - report.dissipation_beta;
        assert!(
            (reference - rhs).abs() <= 1e-10 * rhs.abs().max(1.0),
            "step {k}: {reference} vs {rhs}"
        );
        checked += 1;
    }
    assert!(checked > 100);
}

/// Deep linear regime: the steady probe envelope matches the exact
/// evanescent decay A e^(-lambda n) within 5% at sites 20, 40, 60.
#[test]
fn evanescent_envelope_matches_linear_theory() {
    let cfg = ChainConfig {
        t_final: 200.0,
        ..driven(0.01, 0.9)
    };
    let rec = Recorders {
        probes: vec![20, 40, 60],
        energy_series: false,
    };
    let out = run(&cfg, &rec).unwrap();
    let lambda = sgchain::evanescent_decay(0.9, &cfg).unwrap();
    let t_from = 150.0;
    for (j, &site) in rec.probes.iter().enumerate() {
        let envelope = out
            .trajectory
            .times
            .iter()
            .zip(&out.trajectory.rows)
            .filter(|(t, _)| **t >= t_from)
            .map(|(_, row)| row[j].abs())
            .fold(0.0f64, f64::max);
        let expected = 0.01 * (-lambda * site as f64).exp();
        let rel = (envelope - expected).abs() / expected;
        assert!(
            rel <= 0.05,
            "site {site}: envelope {envelope:.6e} vs {expected:.6e} (rel {rel:.3})"
        );
    }
}

/// Newton and linearized advance agree to O(dt^2): halving dt shrinks
/// their trajectory separation by roughly 4.
#[test]
fn newton_and_linearized_agree_to_second_order() {
    let sep = |dt: f64| -> f64 {
        let base = ChainConfig {
            dt,
            t_final: 40.0,
            ..driven(1.0, 0.9)
        };
        let newton = run(
            &base,
            &Recorders {
                probes: vec![10, 30],
                energy_series: false,
            },
        )
        .unwrap();
        let linearized = run(
            &ChainConfig {
                scheme: SchemeKind::Linearized,
                ..base
            },
            &Recorders {
                probes: vec![10, 30],
                energy_series: false,
            },
        )
        .unwrap();
        newton
            .trajectory
            .rows
            .iter()
            .zip(&linearized.trajectory.rows)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0f64, f64::max)
    };
    let e1 = sep(0.05);
    let e2 = sep(0.025);
    let ratio = e1 / e2;
    assert!(
        (2.5..8.0).contains(&ratio),
        "expected ~4x shrink, got {e1:.3e}/{e2:.3e} = {ratio:.2}"
    );
}

/// RK4 against the exact evanescent solution of the linear chain
/// (potential disabled, the gap carried by m^2 = 1).
#[test]
fn rk4_matches_exact_linear_solution() {
    let amplitude = 0.01;
    let omega = 0.9;
    let mut cfg = ChainConfig {
        potential: PotentialKind::Zero,
        mass_squared: 1.0,
        kappa: 0.0,
        ramp_time: 0.0,
        dt: 0.0125,
        t_final: 50.0,
        scheme: SchemeKind::Rk4,
        ..driven(amplitude, omega)
    };
    let lambda = sgchain::evanescent_decay(omega, &cfg).unwrap();
    cfg.initial_velocity = (1..=cfg.n_sites)
        .map(|n| amplitude * omega * (-lambda * n as f64).exp())
        .collect();
    let rec = Recorders {
        probes: vec![20, 40, 60],
        energy_series: false,
    };
    let out = run(&cfg, &rec).unwrap();
    let mut worst = 0.0f64;
    for (row, &t) in out.trajectory.rows.iter().zip(&out.trajectory.times) {
        for (j, &site) in rec.probes.iter().enumerate() {
            let exact = amplitude * (omega * t).sin() * (-lambda * site as f64).exp();
            worst = worst.max((row[j] - exact).abs());
        }
    }
    assert!(worst < 1e-6, "max deviation {worst:.3e}");
}

/// Fig. 1 setup: site-60 probe at amplitudes 1.77 and 1.79 for both
/// potentials; the larger amplitude shows large-scale activity the smaller
/// one lacks.
#[test]
fn supratransmission_bifurcation_at_site_60() {
    for &potential in &[PotentialKind::SineGordon, PotentialKind::KleinGordon] {
        let peak = |amplitude: f64| -> f64 {
            let cfg = ChainConfig {
                potential,
                ..driven(amplitude, 0.9)
            };
            let out = run(
                &cfg,
                &Recorders {
                    probes: vec![60],
                    energy_series: false,
                },
            )
            .unwrap();
            out.trajectory
                .rows
                .iter()
                .map(|r| r[0].abs())
                .fold(0.0f64, f64::max)
        };
        let below = peak(1.77);
        let above = peak(1.79);
        assert!(
            above >= 1.0 && above >= 5.0 * below,
            "{potential:?}: |u60| {below:.3} at A=1.77 vs {above:.3} at A=1.79"
        );
    }
}

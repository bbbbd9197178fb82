//! Mean-field ODE of the scaled embedded chain `(psi_n, theta_n)`.
//!
//! The drift is the conditional mean increment of the stochastic
//! approximation scheme; its equilibrium is `(psi*, theta*)` and every start
//! in `S_delta = {psi in [psi* - delta, psi* + delta], theta/psi in [delta, 1 - delta]}`
//! converges to it.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fixed_point::limit_summary;
use crate::model::NewsDynamics;

/// Below this `psi` the trajectory is treated as absorbed at extinction.
pub const PSI_GUARD: f64 = 1e-9;
pub const DEFAULT_STEP: f64 = 1e-2;
pub const DEFAULT_HORIZON: f64 = 50.0;
/// Terminal distance to the equilibrium that counts as converged.
pub const CONVERGENCE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OdeState {
    pub t: f64,
    pub psi: f64,
    pub theta: f64,
}

impl OdeState {
    pub fn new(psi: f64, theta: f64) -> Self {
        OdeState { t: 0.0, psi, theta }
    }

    /// `theta / psi`, or `None` once absorbed.
    pub fn beta(&self) -> Option<f64> {
        (self.psi > PSI_GUARD).then(|| self.theta / self.psi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Drift {
    pub d_psi: f64,
    pub d_theta: f64,
    pub absorbed: bool,
}

/// Evaluates the ODE right-hand side at `state`.
pub fn drift(state: &OdeState, dynamics: &NewsDynamics<'_>) -> Result<Drift> {
    let absorbed = Drift {
        d_psi: 0.0,
        d_theta: 0.0,
        absorbed: true,
    };
    if state.psi <= PSI_GUARD {
        return Ok(absorbed);
    }
    let raw = state.theta / state.psi;
    // RK4 stages may step a rounding error outside [0, 1].
    if !(-1e-12..=1.0 + 1e-12).contains(&raw) {
        return Err(Error::Invariant(format!(
            "theta/psi = {raw} left [0, 1] at t = {}",
            state.t
        )));
    }
    let beta = raw.clamp(0.0, 1.0);
    let params = dynamics.params();
    let m = params.m_eta();
    let qf = dynamics.q_fake(beta);
    let qr = dynamics.q_real(beta);
    let (d_psi, d_theta) = if params.is_reluctant() {
        let eta_c = params.eta_c();
        let shrink = m * (eta_c - 1.0);
        (
            shrink * qf * beta + m - 1.0 - state.psi + shrink * qr * (1.0 - beta),
            beta * (qf * m * eta_c - 1.0) + (1.0 - beta) * qr * m * eta_c - state.theta,
        )
    } else {
        (
            m - 1.0 - state.psi,
            beta * (qf * m - 1.0) + (1.0 - beta) * qr * m - state.theta,
        )
    };
    Ok(Drift {
        d_psi,
        d_theta,
        absorbed: false,
    })
}

/// Exact solution of the base-model `psi` equation.
pub fn psi_closed_form(t: f64, psi0: f64, m_eta: f64) -> f64 {
    if psi0 > 0.0 {
        (-t).exp() * (psi0 - m_eta + 1.0) + m_eta - 1.0
    } else {
        psi0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub scheme: &'static str,
    pub step: f64,
    pub absorbed: bool,
    pub states: Vec<OdeState>,
}

impl Trajectory {
    pub fn last(&self) -> &OdeState {
        self.states
            .last()
            .expect("trajectory holds the initial state")
    }

    /// CSV with columns `t, psi, theta, beta` (`beta` empty once absorbed).
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,psi,theta,beta")?;
        for s in &self.states {
            match s.beta() {
                Some(b) => writeln!(out, "{},{},{},{}", s.t, s.psi, s.theta, b)?,
                None => writeln!(out, "{},{},{},", s.t, s.psi, s.theta)?,
            }
        }
        Ok(())
    }
}

fn rk4_step(s: &OdeState, h: f64, dynamics: &NewsDynamics<'_>) -> Result<(OdeState, bool)> {
    let at = |psi, theta, dt| OdeState {
        t: s.t + dt,
        psi,
        theta,
    };
    let k1 = drift(s, dynamics)?;
    if k1.absorbed {
        return Ok((at(s.psi, s.theta, h), true));
    }
    let k2 = drift(
        &at(
            s.psi + 0.5 * h * k1.d_psi,
            s.theta + 0.5 * h * k1.d_theta,
            0.5 * h,
        ),
        dynamics,
    )?;
    let k3 = drift(
        &at(
            s.psi + 0.5 * h * k2.d_psi,
            s.theta + 0.5 * h * k2.d_theta,
            0.5 * h,
        ),
        dynamics,
    )?;
    let k4 = drift(
        &at(s.psi + h * k3.d_psi, s.theta + h * k3.d_theta, h),
        dynamics,
    )?;
    let psi = s.psi + h / 6.0 * (k1.d_psi + 2.0 * k2.d_psi + 2.0 * k3.d_psi + k4.d_psi);
    let theta = s.theta + h / 6.0 * (k1.d_theta + 2.0 * k2.d_theta + 2.0 * k3.d_theta + k4.d_theta);
    Ok((at(psi, theta, h), false))
}

/// Fixed-step classical Runge-Kutta integration up to `horizon`. The step is
/// shrunk slightly, if needed, so that an integer number of steps lands on
/// the horizon.
pub fn integrate(
    initial: OdeState,
    dynamics: &NewsDynamics<'_>,
    horizon: f64,
    step: f64,
) -> Result<Trajectory> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::param("step", format!("{step} is not > 0")));
    }
    if !(horizon >= step && horizon.is_finite()) {
        return Err(Error::param(
            "horizon",
            format!("{horizon} is smaller than the step {step}"),
        ));
    }
    let n = (horizon / step).ceil() as usize;
    let h = horizon / n as f64;
    let mut states = Vec::with_capacity(n + 1);
    let mut state = initial;
    let mut absorbed = state.psi <= PSI_GUARD;
    states.push(state);
    for k in 1..=n {
        let (mut next, hit) = rk4_step(&state, h, dynamics)?;
        absorbed |= hit;
        next.t = initial.t + k as f64 * h;
        if !(next.psi.is_finite() && next.theta.is_finite()) {
            return Err(Error::NonFinite { t: next.t });
        }
        states.push(next);
        state = next;
    }
    Ok(Trajectory {
        scheme: "rk4",
        step: h,
        absorbed,
        states,
    })
}

/// Compact set `S_delta` around the equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AttractorRegion {
    pub delta: f64,
    pub psi_star: f64,
}

impl AttractorRegion {
    pub fn new(delta: f64, psi_star: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < psi_star && delta < 0.5) {
            return Err(Error::param(
                "delta",
                format!("{delta} must lie in (0, min(psi*, 1/2)) with psi* = {psi_star}"),
            ));
        }
        Ok(AttractorRegion { delta, psi_star })
    }

    pub fn contains(&self, s: &OdeState) -> bool {
        (s.psi - self.psi_star).abs() <= self.delta
            && s.beta()
                .is_some_and(|b| (self.delta..=1.0 - self.delta).contains(&b))
    }

    /// `grid_n x grid_n` lattice of starting points covering the region.
    pub fn lattice(&self, grid_n: usize) -> Vec<OdeState> {
        let pts = |lo: f64, hi: f64| -> Vec<f64> {
            if grid_n == 1 {
                return vec![0.5 * (lo + hi)];
            }
            (0..grid_n)
                .map(|i| lo + (hi - lo) * i as f64 / (grid_n - 1) as f64)
                .collect()
        };
        let psis = pts(self.psi_star - self.delta, self.psi_star + self.delta);
        let betas = pts(self.delta, 1.0 - self.delta);
        psis.iter()
            .flat_map(|&psi| betas.iter().map(move |&b| OdeState::new(psi, b * psi)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StartOutcome {
    pub psi0: f64,
    pub theta0: f64,
    pub terminal_distance: f64,
    /// Steps where `theta/psi` moved away from `beta*`.
    pub monotonicity_violations: usize,
    /// Largest deviation from the closed-form `psi(t)` (base model only).
    pub psi_closed_form_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub psi_star: f64,
    pub theta_star: f64,
    pub beta_star: f64,
    pub delta: f64,
    pub horizon: f64,
    pub step: f64,
    pub max_terminal_distance: f64,
    pub max_psi_closed_form_error: Option<f64>,
    pub monotonicity_violations: usize,
    pub starts: Vec<StartOutcome>,
}

impl SweepReport {
    pub fn non_convergent(&self, tol: f64) -> impl Iterator<Item = &StartOutcome> {
        self.starts
            .iter()
            .filter(move |s| s.terminal_distance > tol)
    }

    /// Turns any start that misses the equilibrium by more than `tol`, or any
    /// non-monotone `beta(t)`, into an error.
    pub fn ensure_converged(&self, tol: f64) -> Result<()> {
        let bad = self.non_convergent(tol).count();
        if bad > 0 {
            return Err(Error::Invariant(format!(
                "{bad} of {} starts in S_delta did not converge within {tol:e} (max distance {:e})",
                self.starts.len(),
                self.max_terminal_distance
            )));
        }
        if self.monotonicity_violations > 0 {
            return Err(Error::Invariant(format!(
                "theta/psi moved away from beta* on {} steps",
                self.monotonicity_violations
            )));
        }
        Ok(())
    }
}

/// Steps on which `beta(t)` moves away from `beta_star` while still more
/// than `band` away from it.
pub fn beta_monotonicity_violations(traj: &Trajectory, beta_star: f64, band: f64) -> usize {
    let betas: Vec<f64> = traj.states.iter().filter_map(OdeState::beta).collect();
    betas
        .windows(2)
        .filter(|w| {
            let (prev, next) = (w[0], w[1]);
            if prev < beta_star - band {
                next < prev || next > beta_star + band
            } else if prev > beta_star + band {
                next > prev || next < beta_star - band
            } else {
                false
            }
        })
        .count()
}

/// Integrates from every lattice point of `S_delta` and reports how close
/// each trajectory ends to `(psi*, theta*)`.
pub fn attractor_sweep(
    dynamics: &NewsDynamics<'_>,
    delta: f64,
    grid_n: usize,
    horizon: f64,
    step: f64,
) -> Result<SweepReport> {
    if grid_n == 0 {
        return Err(Error::param("grid_n", "need at least one lattice point"));
    }
    let limit = limit_summary(dynamics.params(), dynamics.policy())?;
    let region = AttractorRegion::new(delta, limit.psi_star)?;
    let m = dynamics.params().m_eta();
    let base = !dynamics.params().is_reluctant();

    let starts = region
        .lattice(grid_n)
        .into_par_iter()
        .map(|start| {
            let traj = integrate(start, dynamics, horizon, step)?;
            let end = traj.last();
            let terminal_distance = (end.psi - limit.psi_star).hypot(end.theta - limit.theta_star);
            let psi_closed_form_error = base.then(|| {
                traj.states
                    .iter()
                    .map(|s| (s.psi - psi_closed_form(s.t, start.psi, m)).abs())
                    .fold(0.0, f64::max)
            });
            Ok(StartOutcome {
                psi0: start.psi,
                theta0: start.theta,
                terminal_distance,
                monotonicity_violations: beta_monotonicity_violations(
                    &traj,
                    limit.beta_star,
                    CONVERGENCE_TOL,
                ),
                psi_closed_form_error,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let max_terminal_distance = starts
        .iter()
        .map(|s| s.terminal_distance)
        .fold(0.0, f64::max);
    let max_psi_closed_form_error = starts
        .iter()
        .filter_map(|s| s.psi_closed_form_error)
        .reduce(f64::max);
    let monotonicity_violations = starts.iter().map(|s| s.monotonicity_violations).sum();
    Ok(SweepReport {
        psi_star: limit.psi_star,
        theta_star: limit.theta_star,
        beta_star: limit.beta_star,
        delta,
        horizon,
        step,
        max_terminal_distance,
        max_psi_closed_form_error,
        monotonicity_violations,
        starts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DegreeModel, ModelParams, WarningPolicy};

    fn config1() -> (ModelParams, WarningPolicy) {
        (
            ModelParams::new(0.1, 0.9, 0.45, 0.3, DegreeModel::constant(30)).unwrap(),
            WarningPolicy::new(1.0, 1.0, 0.05).unwrap(),
        )
    }

    #[test]
    fn closed_form_values() {
        assert_eq!(psi_closed_form(0.0, 3.0, 9.0), 3.0);
        assert!((psi_closed_form(1.0, 3.0, 9.0) - 6.160_602_794_142_788).abs() < 1e-12);
        assert!((psi_closed_form(1e3, 3.0, 9.0) - 8.0).abs() < 1e-12);
        assert_eq!(psi_closed_form(5.0, -1.0, 9.0), -1.0);
    }

    #[test]
    fn drift_at_equilibrium_and_extinction() {
        let (p, pol) = config1();
        let d = NewsDynamics::new(&p, &pol).unwrap();
        let lim = limit_summary(&p, &pol).unwrap();
        let eq = drift(&OdeState::new(lim.psi_star, lim.theta_star), &d).unwrap();
        assert!(eq.d_psi.abs() < 1e-12 && eq.d_theta.abs() < 1e-12);
        let dead = drift(&OdeState::new(0.0, 0.3), &d).unwrap();
        assert!(dead.absorbed);
        assert_eq!((dead.d_psi, dead.d_theta), (0.0, 0.0));
    }

    #[test]
    fn drift_hand_evaluation() {
        let (p, pol) = config1();
        let d = NewsDynamics::new(&p, &pol).unwrap();
        let r = drift(&OdeState::new(4.0, 2.0), &d).unwrap();
        assert!((r.d_psi - 4.0).abs() < 1e-12);
        // beta = 0.5, omega = 0.55, q_F = 0.495, q_R = 0.2475, m = 9
        let expected = 0.5 * (0.495 * 9.0 - 1.0) + 0.5 * 0.2475 * 9.0 - 2.0;
        assert!((r.d_theta - expected).abs() < 1e-12);
    }

    #[test]
    fn reluctant_equilibrium() {
        let (p, pol) = config1();
        let p = p.with_reluctance(0.3).unwrap();
        let d = NewsDynamics::new(&p, &pol).unwrap();
        let lim = limit_summary(&p, &pol).unwrap();
        let eq = drift(&OdeState::new(lim.psi_star, lim.theta_star), &d).unwrap();
        assert!(eq.d_psi.abs() < 1e-12 && eq.d_theta.abs() < 1e-12, "{eq:?}");
    }

    #[test]
    fn equilibrium_is_stationary() {
        let (p, pol) = config1();
        let d = NewsDynamics::new(&p, &pol).unwrap();
        let lim = limit_summary(&p, &pol).unwrap();
        let start = OdeState::new(lim.psi_star, lim.theta_star);
        let traj = integrate(start, &d, 10.0, DEFAULT_STEP).unwrap();
        for s in &traj.states {
            assert!((s.psi - start.psi).abs() < 1e-8 && (s.theta - start.theta).abs() < 1e-8);
        }
    }

    #[test]
    fn converges_below_and_above() {
        let (p, pol) = config1();
        let d = NewsDynamics::new(&p, &pol).unwrap();
        let lim = limit_summary(&p, &pol).unwrap();
        for beta0 in [0.001, 0.05 * lim.beta_star, 0.5, 0.95] {
            let traj = integrate(
                OdeState::new(7.95, beta0 * 7.95),
                &d,
                DEFAULT_HORIZON,
                DEFAULT_STEP,
            )
            .unwrap();
            let end = traj.last();
            assert!((end.psi - lim.psi_star).abs() < 1e-6);
            assert!((end.theta - lim.theta_star).abs() < 1e-6);
            assert_eq!(beta_monotonicity_violations(&traj, lim.beta_star, 1e-6), 0);
        }
    }

    #[test]
    fn step_halving_is_stable() {
        let (p, pol) = config1();
        let d = NewsDynamics::new(&p, &pol).unwrap();
        let start = OdeState::new(3.0, 2.4);
        let coarse = integrate(start, &d, 5.0, 0.02).unwrap();
        let fine = integrate(start, &d, 5.0, 0.01).unwrap();
        let (a, b) = (coarse.last(), fine.last());
        assert!((a.psi - b.psi).abs() < 1e-6 && (a.theta - b.theta).abs() < 1e-6);
    }

    #[test]
    fn absorbed_start_stays_put() {
        let (p, pol) = config1();
        let d = NewsDynamics::new(&p, &pol).unwrap();
        let traj = integrate(OdeState::new(0.0, 0.0), &d, 1.0, 0.1).unwrap();
        assert!(traj.absorbed);
        assert!(traj.states.iter().all(|s| s.psi == 0.0 && s.theta == 0.0));
    }

    #[test]
    fn rejects_bad_steps() {
        let (p, pol) = config1();
        let d = NewsDynamics::new(&p, &pol).unwrap();
        assert!(integrate(OdeState::new(1.0, 0.5), &d, 1.0, 0.0).is_err());
        assert!(integrate(OdeState::new(1.0, 0.5), &d, 0.001, 0.01).is_err());
    }

    #[test]
    fn sweep_precondition() {
        let (p, pol) = config1();
        let d = NewsDynamics::new(&p, &pol).unwrap();
        assert!(attractor_sweep(&d, 8.0, 3, 1.0, 0.1).is_err());
        assert!(attractor_sweep(&d, 0.0, 3, 1.0, 0.1).is_err());
    }

    #[test]
    fn csv_layout() {
        let (p, pol) = config1();
        let d = NewsDynamics::new(&p, &pol).unwrap();
        let traj = integrate(OdeState::new(2.0, 1.0), &d, 0.02, 0.01).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,psi,theta,beta"));
        assert_eq!(lines.count(), 3);
    }
}

//! Optimal warning design.
//!
//! Minimise the type-1 performance `Psi1(w, b) = 1 - beta*_F(w, b)` subject
//! to `Psi2(w, b) = beta*_R(w, b) <= c`. The optimum puts the constraint at
//! equality, which fixes `b` as an affine function of `w`; the remaining
//! one-dimensional problem is solved by projected gradient descent on `w`
//! and cross-checked against a dense scan.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fixed_point::{beta_root, constant_warning_beta, solve_beta_star};
use crate::model::{ModelParams, NewsDynamics, ScenarioPair, WarningPolicy};

/// Stop when consecutive iterates move less than this.
pub const STEP_TOL: f64 = 1e-8;
pub const MAX_ITERATIONS: usize = 10_000;
/// Spacing of the cross-check scan over `w`.
pub const SCAN_STEP: f64 = 1e-3;
/// Allowed gap between the descent optimum and the scan minimum in `Psi1`.
pub const SCAN_TOL: f64 = 1e-3;
/// Required accuracy of `Psi2 = c` at the returned point.
pub const CONSTRAINT_TOL: f64 = 1e-6;
/// Smallest admissible `|1 - dG/dbeta|` for implicit differentiation.
pub const DEGENERACY_TOL: f64 = 1e-8;

/// Warning design problem: the two news models, `epsilon` from the
/// scenario policy, and the type-2 tolerance `c`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignProblem {
    pub scenario: ScenarioPair,
    pub c: f64,
}

impl DesignProblem {
    pub fn new(scenario: ScenarioPair, c: f64) -> Result<Self> {
        if !(c > 0.0 && c < 1.0) {
            return Err(Error::param("c", format!("{c} is not in (0, 1)")));
        }
        if scenario.real_news.is_reluctant() {
            return Err(Error::Unsupported(
                "the constraint curve b(w) needs eta_c = 1 for the real news".into(),
            ));
        }
        Ok(DesignProblem { scenario, c })
    }

    pub fn epsilon(&self) -> f64 {
        self.scenario.policy.epsilon()
    }

    /// `c alpha_F + (1 - c) alpha_R` of the real news.
    pub fn alpha_bar(&self) -> f64 {
        let r = &self.scenario.real_news;
        self.c * r.alpha_fake() + (1.0 - self.c) * r.alpha_real()
    }

    fn policy(&self, w: f64, b: f64) -> Result<WarningPolicy> {
        WarningPolicy::new(w, b, self.epsilon())
    }

    /// `Psi1` and `Psi2` at `(w, b)`.
    pub fn performance(&self, w: f64, b: f64) -> Result<(f64, f64)> {
        let policy = self.policy(w, b)?;
        let f = solve_beta_star(&self.scenario.fake_news, &policy)?;
        let r = solve_beta_star(&self.scenario.real_news, &policy)?;
        Ok((1.0 - f, r))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Feasibility {
    pub feasible: bool,
    pub c: f64,
    /// `Psi2` with no control, `omega = epsilon`.
    pub psi2_low: f64,
    /// `Psi2` with the strongest control, `omega = 1 + epsilon`.
    pub psi2_high: f64,
}

impl Feasibility {
    pub fn ensure(&self) -> Result<()> {
        if self.feasible {
            Ok(())
        } else {
            Err(Error::Infeasible {
                c: self.c,
                low: self.psi2_low,
                high: self.psi2_high,
            })
        }
    }
}

/// The tolerance `c` is attainable iff `Psi2(0, 1) < c < Psi2(1, 0)`.
pub fn feasibility(problem: &DesignProblem) -> Result<Feasibility> {
    let r = &problem.scenario.real_news;
    let eps = problem.epsilon();
    // both ends must be admissible policies for the fake and the real news
    for w in [0.0, 1.0] {
        let policy = problem.policy(w, 0.0)?;
        NewsDynamics::new(r, &policy)?;
        NewsDynamics::new(&problem.scenario.fake_news, &policy)?;
    }
    let low = constant_warning_beta(r.alpha_fake(), r.alpha_real(), eps);
    let high = constant_warning_beta(r.alpha_fake(), r.alpha_real(), 1.0 + eps);
    Ok(Feasibility {
        feasible: low < problem.c && problem.c < high,
        c: problem.c,
        psi2_low: low,
        psi2_high: high,
    })
}

/// `b` on the curve `Psi2(w, b) = c`:
/// `b = c / (1 - c) * ((w + eps) a - c) / (c - eps a)` with `a` the
/// [`alpha_bar`](DesignProblem::alpha_bar) of the real news.
pub fn b_of_w(w: f64, problem: &DesignProblem) -> Result<f64> {
    let (a, c, eps) = (problem.alpha_bar(), problem.c, problem.epsilon());
    let den = c - eps * a;
    if den <= 0.0 {
        return Err(Error::Infeasible {
            c,
            low: eps * a,
            high: f64::INFINITY,
        });
    }
    Ok(c / (1.0 - c) * ((w + eps) * a - c) / den)
}

/// `db/dw`, constant along the curve.
pub fn db_dw(problem: &DesignProblem) -> Result<f64> {
    let (a, c, eps) = (problem.alpha_bar(), problem.c, problem.epsilon());
    let den = c - eps * a;
    if den <= 0.0 {
        return Err(Error::Infeasible {
            c,
            low: eps * a,
            high: f64::INFINITY,
        });
    }
    Ok(c / (1.0 - c) * a / den)
}

/// Range of `w` on which `b(w) >= 0` and `w <= 1`.
pub fn feasible_interval(problem: &DesignProblem) -> Result<(f64, f64)> {
    feasibility(problem)?.ensure()?;
    let lo = (problem.c / problem.alpha_bar() - problem.epsilon()).max(0.0);
    Ok((lo, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sensitivities {
    pub beta_star: f64,
    pub d_dw: f64,
    pub d_db: f64,
    /// `1 - dG/dbeta` at the fixed point.
    pub denominator: f64,
}

/// Derivatives of `beta*` in `w` and `b` by implicit differentiation of
/// `beta = G(beta) = P(beta) (eta_c + beta (1 - eta_c))`, where
/// `P(beta) = omega(beta) (beta alpha_F + (1 - beta) alpha_R)`.
pub fn beta_sensitivities(params: &ModelParams, policy: &WarningPolicy) -> Result<Sensitivities> {
    let dynamics = NewsDynamics::new(params, policy)?;
    let beta = beta_root(&dynamics)?.x;
    let (af, ar, eta_c) = (params.alpha_fake(), params.alpha_real(), params.eta_c());
    let mix = beta * af + (1.0 - beta) * ar;
    let h = eta_c + beta * (1.0 - eta_c);
    let omega = policy.warning(beta);
    let g_beta =
        (policy.warning_dbeta(beta) * mix + omega * (af - ar)) * h + omega * mix * (1.0 - eta_c);
    let g_w = mix * policy.warning_dw(beta) * h;
    let g_b = mix * policy.warning_db(beta) * h;
    let denominator = 1.0 - g_beta;
    if denominator.abs() < DEGENERACY_TOL {
        return Err(Error::DegenerateSensitivity { denominator });
    }
    Ok(Sensitivities {
        beta_star: beta,
        d_dw: g_w / denominator,
        d_db: g_b / denominator,
        denominator,
    })
}

/// Step sizes `kappa_l`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepSchedule {
    /// `kappa0 / (1 + l)`.
    Harmonic { kappa0: f64 },
    /// Fixed strictly decreasing list; iteration stops when it runs out.
    Explicit { steps: Vec<f64> },
}

impl Default for StepSchedule {
    fn default() -> Self {
        StepSchedule::Harmonic { kappa0: 0.5 }
    }
}

impl StepSchedule {
    pub fn validate(&self) -> Result<()> {
        match self {
            StepSchedule::Harmonic { kappa0 } if !(*kappa0 > 0.0 && kappa0.is_finite()) => {
                Err(Error::Config(format!("kappa0 = {kappa0} must be > 0")))
            }
            StepSchedule::Explicit { steps } => {
                if steps.is_empty() || steps.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
                    return Err(Error::Config(
                        "step sizes must be positive and finite".into(),
                    ));
                }
                if let Some(i) = steps.windows(2).position(|p| p[1] >= p[0]) {
                    return Err(Error::Config(format!(
                        "step schedule is not decreasing at index {}: {} -> {}",
                        i + 1,
                        steps[i],
                        steps[i + 1]
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn step(&self, l: usize) -> Option<f64> {
        match self {
            StepSchedule::Harmonic { kappa0 } => Some(kappa0 / (1.0 + l as f64)),
            StepSchedule::Explicit { steps } => steps.get(l).copied(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Iterate {
    pub l: usize,
    pub w: f64,
    pub b: f64,
    pub psi1: f64,
    /// `dPsi1/dw` along the constraint curve.
    pub gradient: f64,
    pub step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Lower,
    Upper,
}

/// Dense scan of `Psi1` along the constraint curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanCheck {
    pub points: usize,
    pub w_min: f64,
    pub psi1_min: f64,
    /// `Psi1(descent) - Psi1(scan)`.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizationResult {
    pub c: f64,
    pub w_star: f64,
    pub b_star: f64,
    pub psi1_star: f64,
    /// `Psi2` at the optimum from an independent root solve.
    pub psi2_check: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Set when the optimum sits at an end of the feasible interval.
    pub boundary: Option<Boundary>,
    pub interval: (f64, f64),
    pub schedule: StepSchedule,
    pub w0: f64,
    /// The descent from `w0` ended more than the scan tolerance above the
    /// scan minimum and was restarted from the scan minimiser.
    pub warm_started: bool,
    /// Best point of the descent from `w0`, before any restart.
    pub initial_descent_w: f64,
    pub initial_descent_psi1: f64,
    pub scan: ScanCheck,
    pub iterates: Vec<Iterate>,
}

/// `Psi1` and its derivative along the constraint curve at `w`.
fn curve_point(problem: &DesignProblem, w: f64, slope: f64) -> Result<(f64, f64, f64)> {
    let b = b_of_w(w, problem)?.max(0.0);
    let policy = problem.policy(w, b)?;
    let s = beta_sensitivities(&problem.scenario.fake_news, &policy)?;
    Ok((b, 1.0 - s.beta_star, -(s.d_dw + s.d_db * slope)))
}

struct Descent {
    /// Best visited point; the final iterate when the run was monotone.
    w: f64,
    psi1: f64,
    iterations: usize,
    converged: bool,
    iterates: Vec<Iterate>,
}

fn descend(
    problem: &DesignProblem,
    schedule: &StepSchedule,
    w0: f64,
    (lo, hi): (f64, f64),
) -> Result<Descent> {
    let slope = db_dw(problem)?;
    let mut w = w0;
    let mut iterates = Vec::new();
    let mut converged = false;
    let mut best = (f64::INFINITY, w0);
    let mut l = 0;
    while l < MAX_ITERATIONS {
        let Some(kappa) = schedule.step(l) else { break };
        let (b, psi1, grad) = curve_point(problem, w, slope)?;
        iterates.push(Iterate {
            l,
            w,
            b,
            psi1,
            gradient: grad,
            step: kappa,
        });
        if psi1 < best.0 {
            best = (psi1, w);
        }
        let next = (w - kappa * grad).abs().clamp(lo, hi);
        l += 1;
        let moved = (next - w).abs();
        w = next;
        if moved < STEP_TOL {
            converged = true;
            break;
        }
    }
    let psi1 = curve_point(problem, w, slope)?.1;
    if psi1 <= best.0 {
        best = (psi1, w);
    }
    Ok(Descent {
        w: best.1,
        psi1: best.0,
        iterations: l,
        converged,
        iterates,
    })
}

fn scan(problem: &DesignProblem, (lo, hi): (f64, f64)) -> Result<(usize, f64, f64)> {
    let n = ((hi - lo) / SCAN_STEP).ceil() as usize;
    let points: Vec<f64> = (0..=n)
        .map(|i| (lo + i as f64 * SCAN_STEP).min(hi))
        .collect();
    let values = points
        .par_iter()
        .map(|&w| {
            let b = b_of_w(w, problem)?.max(0.0);
            let policy = problem.policy(w, b)?;
            Ok(1.0 - solve_beta_star(&problem.scenario.fake_news, &policy)?)
        })
        .collect::<Result<Vec<f64>>>()?;
    let (i, v) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("scan has points");
    Ok((points.len(), points[i], *v))
}

/// Projected gradient descent on `w` along `b = b(w)`, started at `w0`
/// (default: midpoint of the feasible interval).
///
/// Each step is `w <- proj(|w - kappa_l dPsi1/dw|)` onto the feasible
/// interval, and the best visited point is kept. It is compared with a
/// scan of spacing [`SCAN_STEP`]; if the descent stalled above the scan
/// minimum it is restarted there. A remaining gap beyond [`SCAN_TOL`] is an error.
pub fn optimize(
    problem: &DesignProblem,
    schedule: &StepSchedule,
    w0: Option<f64>,
) -> Result<OptimizationResult> {
    schedule.validate()?;
    let interval = feasible_interval(problem)?;
    let (lo, hi) = interval;
    let w0 = w0.unwrap_or(0.5 * (lo + hi));
    if !(lo..=hi).contains(&w0) {
        return Err(Error::param("w0", format!("{w0} is outside [{lo}, {hi}]")));
    }
    let first = descend(problem, schedule, w0, interval)?;
    let (first_w, first_psi1) = (first.w, first.psi1);
    let (points, w_scan, psi1_scan) = scan(problem, interval)?;

    let (mut run, mut warm_started) = (first, false);
    let mut psi1 = first_psi1;
    if psi1 - psi1_scan > SCAN_TOL {
        let mut restart = descend(problem, schedule, w_scan, interval)?;
        restart.iterations += run.iterations;
        let mut iterates = std::mem::take(&mut run.iterates);
        iterates.extend(restart.iterates);
        restart.iterates = iterates;
        psi1 = restart.psi1;
        run = restart;
        warm_started = true;
    }
    let gap = psi1 - psi1_scan;
    if gap > SCAN_TOL {
        return Err(Error::Invariant(format!(
            "descent optimum Psi1 = {psi1} at w = {} is {gap} above the scan minimum {psi1_scan} at w = {w_scan}",
            run.w
        )));
    }

    let w_star = run.w;
    let b_star = b_of_w(w_star, problem)?.max(0.0);
    let (_, psi2) = problem.performance(w_star, b_star)?;
    if (psi2 - problem.c).abs() > CONSTRAINT_TOL {
        return Err(Error::Invariant(format!(
            "constraint not attained: Psi2 = {psi2}, c = {}",
            problem.c
        )));
    }
    let boundary = if w_star >= hi {
        Some(Boundary::Upper)
    } else if w_star <= lo {
        Some(Boundary::Lower)
    } else {
        None
    };
    Ok(OptimizationResult {
        c: problem.c,
        w_star,
        b_star,
        psi1_star: psi1,
        psi2_check: psi2,
        iterations: run.iterations,
        converged: run.converged,
        boundary,
        interval,
        schedule: schedule.clone(),
        w0,
        warm_started,
        initial_descent_w: first_w,
        initial_descent_psi1: first_psi1,
        scan: ScanCheck {
            points,
            w_min: w_scan,
            psi1_min: psi1_scan,
            gap,
        },
        iterates: run.iterates,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub w: f64,
    pub b: f64,
    pub psi1: f64,
    pub psi2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    /// No control (`w = 0`, so `omega = epsilon` whatever `b`).
    pub baseline: SweepRow,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// CSV `w,b,psi1,psi2`, baseline first.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "w,b,psi1,psi2")?;
        for r in std::iter::once(&self.baseline).chain(&self.rows) {
            writeln!(out, "{},{},{},{}", r.w, r.b, r.psi1, r.psi2)?;
        }
        Ok(())
    }
}

/// `n` evenly spaced points of the feasible interval, ends included.
pub fn feasible_grid(problem: &DesignProblem, n: usize) -> Result<Vec<f64>> {
    let (lo, hi) = feasible_interval(problem)?;
    if n < 2 {
        return Err(Error::param("n", "grid needs at least two points"));
    }
    Ok((0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect())
}

/// Profile of the constraint curve over `w_grid`.
pub fn sweep(problem: &DesignProblem, w_grid: &[f64]) -> Result<SweepTable> {
    let (lo, hi) = feasible_interval(problem)?;
    if let Some(w) = w_grid.iter().find(|w| !(lo..=hi).contains(*w)) {
        return Err(Error::param("w", format!("{w} is outside [{lo}, {hi}]")));
    }
    let rows = w_grid
        .par_iter()
        .map(|&w| {
            let b = b_of_w(w, problem)?.max(0.0);
            let (psi1, psi2) = problem.performance(w, b)?;
            Ok(SweepRow { w, b, psi1, psi2 })
        })
        .collect::<Result<Vec<_>>>()?;
    let (f, r, eps) = (
        &problem.scenario.fake_news,
        &problem.scenario.real_news,
        problem.epsilon(),
    );
    let baseline = SweepRow {
        w: 0.0,
        b: 1.0,
        psi1: 1.0 - constant_warning_beta(f.alpha_fake(), f.alpha_real(), eps),
        psi2: constant_warning_beta(r.alpha_fake(), r.alpha_real(), eps),
    };
    Ok(SweepTable { baseline, rows })
}

/// One point of the optimal `Psi1` versus `c` curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub c: f64,
    pub feasible: bool,
    pub w_star: Option<f64>,
    pub b_star: Option<f64>,
    pub psi1_star: Option<f64>,
    pub psi2: Option<f64>,
}

/// Optimal design for each tolerance in `cs`; infeasible tolerances give
/// empty rows.
pub fn optimal_curve(
    scenario: &ScenarioPair,
    cs: &[f64],
    schedule: &StepSchedule,
) -> Result<Vec<CurvePoint>> {
    cs.par_iter()
        .map(|&c| {
            let problem = DesignProblem::new(scenario.clone(), c)?;
            if !feasibility(&problem)?.feasible {
                return Ok(CurvePoint {
                    c,
                    feasible: false,
                    w_star: None,
                    b_star: None,
                    psi1_star: None,
                    psi2: None,
                });
            }
            let r = optimize(&problem, schedule, None)?;
            Ok(CurvePoint {
                c,
                feasible: true,
                w_star: Some(r.w_star),
                b_star: Some(r.b_star),
                psi1_star: Some(r.psi1_star),
                psi2: Some(r.psi2_check),
            })
        })
        .collect()
}

pub fn write_curve_csv<W: Write>(points: &[CurvePoint], mut out: W) -> std::io::Result<()> {
    let cell = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
    writeln!(out, "c,feasible,w_star,b_star,psi1_star,psi2")?;
    for p in points {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            p.c,
            p.feasible,
            cell(p.w_star),
            cell(p.b_star),
            cell(p.psi1_star),
            cell(p.psi2)
        )?;
    }
    Ok(())
}

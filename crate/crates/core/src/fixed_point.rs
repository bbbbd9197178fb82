//! Limit proportions of the controlled branching process.
//!
//! On co-survival paths the fake-tagged fraction converges to the unique zero
//! `beta*` of the drift `g_beta` on `(0, 1)`. The scaled total population
//! converges to `psi* = m_eta - 1` in the base model and to
//! `m_eta - 1 - m_eta (1 - eta_c) P(beta*)` with reluctance, where `P` is the
//! mixed fake-tag probability.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ModelParams, NewsDynamics, ScenarioPair, WarningPolicy};
use crate::root::{bisect, Root};

/// Upper bound on the final bracket width of the `beta*` bisection.
///
/// The solver keeps halving until the bracket collapses to adjacent floats,
/// so the achieved width is usually far below this.
pub const BETA_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FixedPointResult {
    pub beta_star: f64,
    pub psi_star: f64,
    pub theta_star: f64,
    /// Second component of the left eigenvector `[1, v_y]`, `(1 - beta*) / beta*`.
    pub v_y: f64,
    /// `|g_beta(beta*)|`.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerformancePair {
    /// Limiting fraction of real-tagged copies of fake news.
    pub psi1: f64,
    /// Limiting fraction of fake-tagged copies of real news.
    pub psi2: f64,
    pub psi1_residual: f64,
    pub psi2_residual: f64,
}

pub(crate) fn beta_root(dynamics: &NewsDynamics<'_>) -> Result<Root> {
    let root = bisect(|beta| dynamics.g_beta(beta), 0.0, 1.0, 0.0).map_err(|e| match e {
        Error::NoBracket { lo, hi } => Error::Invariant(format!(
            "drift has no sign change on [{lo}, {hi}] although parameters are valid"
        )),
        other => other,
    })?;
    debug_assert!(root.x > 0.0 && root.x < 1.0);
    Ok(root)
}

/// Unique zero of `g_beta` in `(0, 1)`.
pub fn solve_beta_star(params: &ModelParams, policy: &WarningPolicy) -> Result<f64> {
    let dynamics = NewsDynamics::new(params, policy)?;
    Ok(beta_root(&dynamics)?.x)
}

pub fn limit_summary(params: &ModelParams, policy: &WarningPolicy) -> Result<FixedPointResult> {
    let dynamics = NewsDynamics::new(params, policy)?;
    let root = beta_root(&dynamics)?;
    let beta = root.x;
    let m = params.m_eta();
    let psi_star = if params.is_reluctant() {
        m - 1.0 - m * (1.0 - params.eta_c()) * dynamics.mixed_tag_prob(beta)
    } else {
        m - 1.0
    };
    Ok(FixedPointResult {
        beta_star: beta,
        psi_star,
        theta_star: beta * psi_star,
        v_y: (1.0 - beta) / beta,
        residual: root.residual,
    })
}

/// Type-1 performance from the fake-news parameters and type-2 performance
/// from the real-news parameters, under the shared policy.
pub fn performance(pair: &ScenarioPair) -> Result<PerformancePair> {
    let fake = NewsDynamics::new(&pair.fake_news, &pair.policy)?;
    let real = NewsDynamics::new(&pair.real_news, &pair.policy)?;
    let f = beta_root(&fake)?;
    let r = beta_root(&real)?;
    Ok(PerformancePair {
        psi1: 1.0 - f.x,
        psi2: r.x,
        psi1_residual: f.residual,
        psi2_residual: r.residual,
    })
}

/// Fixed point of the base model when the warning is a constant `omega`:
/// `beta = alpha_R omega / (1 - omega (alpha_F - alpha_R))`.
pub fn constant_warning_beta(alpha_fake: f64, alpha_real: f64, omega: f64) -> f64 {
    alpha_real * omega / (1.0 - omega * (alpha_fake - alpha_real))
}

/// Compares `[1, v_y]` with the dominant left eigenvector of the generator
/// matrix at `beta*` and returns the sup-norm of the difference.
pub fn eigenvector_check(
    result: &FixedPointResult,
    params: &ModelParams,
    policy: &WarningPolicy,
) -> Result<f64> {
    if params.is_reluctant() {
        return Err(Error::Unsupported(format!(
            "eigenvector characterisation needs eta_c = 1, got {}",
            params.eta_c()
        )));
    }
    let dynamics = NewsDynamics::new(params, policy)?;
    let a = dynamics.generator(result.beta_star);
    let (_, v) = a
        .perron_left()
        .ok_or_else(|| Error::Invariant(format!("generator matrix {a:?} is not irreducible")))?;
    Ok((v[1] - result.v_y).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DegreeModel;

    fn reference(alpha: f64, eta: f64, eps: f64, b: f64) -> (ModelParams, WarningPolicy) {
        (
            ModelParams::new(0.1, alpha, 0.5 * alpha, eta, DegreeModel::constant(30)).unwrap(),
            WarningPolicy::new(1.0, b, eps).unwrap(),
        )
    }

    /// Root of the quadratic obtained from `beta = beta q_F + (1 - beta) q_R`
    /// when `b = 1`, i.e. `omega = w beta + eps`.
    fn quadratic_root(af: f64, ar: f64, w: f64, eps: f64) -> f64 {
        // (af - ar) w beta^2 + ((af - ar) eps + ar w - 1) beta + ar eps = 0
        let qa = (af - ar) * w;
        let qb = (af - ar) * eps + ar * w - 1.0;
        let qc = ar * eps;
        (-qb - (qb * qb - 4.0 * qa * qc).sqrt()) / (2.0 * qa)
    }

    #[test]
    fn config_fixed_points() {
        let (p, pol) = reference(0.9, 0.3, 0.05, 1.0);
        let beta = solve_beta_star(&p, &pol).unwrap();
        assert!((beta - quadratic_root(0.9, 0.45, 1.0, 0.05)).abs() < 1e-13);
        assert!((beta - 0.0443).abs() < 1e-3);

        let (p, pol) = reference(0.5, 0.15, 0.05, 1.0);
        let beta = solve_beta_star(&p, &pol).unwrap();
        assert!((beta - 0.01705).abs() < 5e-4);

        let (p, pol) = reference(0.85, 0.35, 0.1, 0.5);
        let beta = solve_beta_star(&p, &pol).unwrap();
        assert!((beta - 0.39533).abs() < 5e-4);
    }

    #[test]
    fn equal_sensitivities_closed_form() {
        let alpha = 0.6;
        let p = ModelParams::new(1.0, alpha, alpha, 0.2, DegreeModel::constant(10)).unwrap();
        let pol = WarningPolicy::new(0.5, 1.0, 0.1).unwrap();
        // with alpha_F = alpha_R and b = 1: beta = alpha (w beta + eps)
        let expected = alpha * 0.1 / (1.0 - alpha * 0.5);
        assert!((solve_beta_star(&p, &pol).unwrap() - expected).abs() < 1e-14);
        // w = 1 gives the alpha eps / (1 - alpha) form
        let pol = WarningPolicy::new(1.0, 1.0, 0.1).unwrap();
        let expected = alpha * 0.1 / (1.0 - alpha);
        let res = limit_summary(&p, &pol).unwrap();
        assert!((res.beta_star - expected).abs() < 1e-14);
        assert!(eigenvector_check(&res, &p, &pol).unwrap() < 1e-9);
    }

    #[test]
    fn limit_summary_base() {
        let (p, pol) = reference(0.9, 0.3, 0.05, 1.0);
        let res = limit_summary(&p, &pol).unwrap();
        assert!((res.psi_star - 8.0).abs() < 1e-12);
        assert!((res.theta_star - res.beta_star * 8.0).abs() < 1e-15);
        assert!((res.theta_star - 0.3546).abs() < 1e-3);
        assert!((res.beta_star - 1.0 / (1.0 + res.v_y)).abs() < 1e-15);
        assert!(res.residual < 1e-15);
    }

    #[test]
    fn reluctant_summary_matches_fixed_point_equation() {
        let (p, pol) = reference(0.9, 0.3, 0.05, 1.0);
        let p = p.with_reluctance(0.3).unwrap();
        let res = limit_summary(&p, &pol).unwrap();
        let d = NewsDynamics::new(&p, &pol).unwrap();
        let b = res.beta_star;
        let lhs = d.mixed_tag_prob(b) * (0.3 + b * 0.7);
        assert!((lhs - b).abs() < 1e-15);
        let expected_psi = 9.0 - 1.0 - 9.0 * 0.7 * d.mixed_tag_prob(b);
        assert!((res.psi_star - expected_psi).abs() < 1e-12);
        assert!(matches!(
            eigenvector_check(&res, &p, &pol),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn eta_c_continuity() {
        let (p, pol) = reference(0.85, 0.35, 0.1, 0.5);
        let base = limit_summary(&p, &pol).unwrap();
        let near = limit_summary(&p.clone().with_reluctance(1.0 - 1e-9).unwrap(), &pol).unwrap();
        assert!((base.beta_star - near.beta_star).abs() < 1e-6);
        assert!((base.psi_star - near.psi_star).abs() < 1e-6);
        assert!((base.theta_star - near.theta_star).abs() < 1e-6);
    }

    #[test]
    fn eigenvector_on_configs() {
        for (a, e, eps, b) in [(0.9, 0.3, 0.05, 1.0), (0.85, 0.35, 0.1, 0.5)] {
            let (p, pol) = reference(a, e, eps, b);
            let res = limit_summary(&p, &pol).unwrap();
            assert!(eigenvector_check(&res, &p, &pol).unwrap() < 1e-9);
        }
    }

    #[test]
    fn uncontrolled_real_news() {
        let deg = DegreeModel::constant(28);
        let real = ModelParams::new(0.1, 0.3, 0.09, 0.05, deg).unwrap();
        let pol = WarningPolicy::new(0.0, 1.0, 0.1).unwrap();
        let beta = solve_beta_star(&real, &pol).unwrap();
        let closed = 0.1 * 0.09 / (1.0 - 0.1 * 0.21);
        assert!((beta - closed).abs() < 1e-14);
        assert!((constant_warning_beta(0.3, 0.09, 0.1) - closed).abs() < 1e-16);
        assert!((closed - 0.009_193).abs() < 1e-6);
    }

    #[test]
    fn performance_ignores_attractiveness() {
        let deg = DegreeModel::constant(28);
        let fake = ModelParams::new(0.1, 0.85, 0.6375, 0.08, deg.clone()).unwrap();
        let real = ModelParams::new(0.1, 0.3, 0.09, 0.05, deg).unwrap();
        let pol = WarningPolicy::new(1.0, 0.16130, 0.1).unwrap();
        let pair = ScenarioPair::new(fake.clone(), real.clone(), pol);
        let perf = performance(&pair).unwrap();
        assert!((perf.psi1 - 0.104).abs() < 1e-3, "{perf:?}");
        assert!((perf.psi2 - 0.02).abs() < 1e-5, "{perf:?}");

        let other = ScenarioPair::new(fake.with_eta(0.5).unwrap(), real, pol);
        assert_eq!(performance(&other).unwrap(), perf);
    }
}

//! Parameter containers and the closed-form pieces of the controlled
//! two-type branching process: warning level, tag probabilities, generator
//! matrix and the drift of the limit proportion.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Mat2;

/// The tag carried by an unread copy (equivalently, the type of its holder).
///
/// An x-user holds a copy tagged fake, a y-user a copy tagged real.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Tag {
    Fake,
    Real,
}

impl Tag {
    pub fn as_str(self) -> &'static str {
        match self {
            Tag::Fake => "fake",
            Tag::Real => "real",
        }
    }
}

/// Distribution of the number of friends `F` of a typical user.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DegreeModel {
    /// Every user has exactly this many friends.
    Constant {
        count: u32,
    },
    Binomial {
        n: u32,
        p: f64,
    },
    /// `counts[d]` users have exactly `d` friends.
    Empirical {
        counts: Vec<u64>,
    },
}

impl DegreeModel {
    pub fn constant(count: u32) -> Self {
        DegreeModel::Constant { count }
    }

    pub fn binomial(n: u32, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::param(
                "degree_model.p",
                format!("{p} is not in [0, 1]"),
            ));
        }
        Ok(DegreeModel::Binomial { n, p })
    }

    pub fn empirical(counts: Vec<u64>) -> Result<Self> {
        if counts.iter().all(|&c| c == 0) {
            return Err(Error::param("degree_model.histogram", "histogram is empty"));
        }
        Ok(DegreeModel::Empirical { counts })
    }

    /// `E[F]`.
    pub fn mean(&self) -> f64 {
        match self {
            DegreeModel::Constant { count } => f64::from(*count),
            DegreeModel::Binomial { n, p } => f64::from(*n) * p,
            DegreeModel::Empirical { counts } => {
                let (total, first, _) = histogram_sums(counts);
                first as f64 / total as f64
            }
        }
    }

    /// `E[F^2]`.
    pub fn second_moment(&self) -> f64 {
        match self {
            DegreeModel::Constant { count } => f64::from(*count).powi(2),
            DegreeModel::Binomial { n, p } => {
                let n = f64::from(*n);
                n * p * (1.0 - p) + (n * p).powi(2)
            }
            DegreeModel::Empirical { counts } => {
                let (total, _, second) = histogram_sums(counts);
                second as f64 / total as f64
            }
        }
    }

    pub fn max_degree(&self) -> u32 {
        match self {
            DegreeModel::Constant { count } => *count,
            DegreeModel::Binomial { n, .. } => *n,
            DegreeModel::Empirical { counts } => {
                counts.iter().rposition(|&c| c > 0).map_or(0, |d| d as u32)
            }
        }
    }
}

/// Exact `(sum c_d, sum d c_d, sum d^2 c_d)` of a degree histogram.
pub(crate) fn histogram_sums(counts: &[u64]) -> (u128, u128, u128) {
    counts
        .iter()
        .enumerate()
        .fold((0u128, 0u128, 0u128), |(n, s1, s2), (d, &c)| {
            let (d, c) = (d as u128, u128::from(c));
            (n + c, s1 + d * c, s2 + d * d * c)
        })
}

/// Parameters of one news item `u` (fake or real).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelParams {
    lambda: f64,
    alpha_fake: f64,
    alpha_real: f64,
    eta: f64,
    eta_c: f64,
    degree: DegreeModel,
}

fn check_unit(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value <= 1.0 {
        Ok(())
    } else {
        Err(Error::param(name, format!("{value} is not in (0, 1]")))
    }
}

impl ModelParams {
    /// Base model without reluctance (`eta_c = 1`).
    ///
    /// `alpha_fake` / `alpha_real` are the sensitivities of a user who
    /// received the news with a fake / real tag, `eta` the attractiveness.
    pub fn new(
        lambda: f64,
        alpha_fake: f64,
        alpha_real: f64,
        eta: f64,
        degree: DegreeModel,
    ) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::param(
                "lambda",
                format!("{lambda} is not a positive rate"),
            ));
        }
        check_unit("alpha_fake", alpha_fake)?;
        check_unit("alpha_real", alpha_real)?;
        check_unit("eta", eta)?;
        let second = degree.second_moment();
        if !second.is_finite() {
            return Err(Error::param("degree_model", "second moment is not finite"));
        }
        Ok(ModelParams {
            lambda,
            alpha_fake,
            alpha_real,
            eta,
            eta_c: 1.0,
            degree,
        })
    }

    /// Users who tag the news as fake forward to `Bin(F, eta_c * eta)`
    /// friends instead of `Bin(F, eta)`.
    pub fn with_reluctance(mut self, eta_c: f64) -> Result<Self> {
        check_unit("eta_c", eta_c)?;
        self.eta_c = eta_c;
        Ok(self)
    }

    pub fn with_eta(mut self, eta: f64) -> Result<Self> {
        check_unit("eta", eta)?;
        self.eta = eta;
        Ok(self)
    }

    pub fn with_lambda(mut self, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::param(
                "lambda",
                format!("{lambda} is not a positive rate"),
            ));
        }
        self.lambda = lambda;
        Ok(self)
    }

    pub fn with_degree(mut self, degree: DegreeModel) -> Self {
        self.degree = degree;
        self
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn alpha_fake(&self) -> f64 {
        self.alpha_fake
    }
    pub fn alpha_real(&self) -> f64 {
        self.alpha_real
    }
    pub fn eta(&self) -> f64 {
        self.eta
    }
    pub fn eta_c(&self) -> f64 {
        self.eta_c
    }
    pub fn degree(&self) -> &DegreeModel {
        &self.degree
    }

    pub fn is_reluctant(&self) -> bool {
        self.eta_c < 1.0
    }

    /// `m_f = E[F]`.
    pub fn mean_friends(&self) -> f64 {
        self.degree.mean()
    }

    /// Mean offspring `m_eta = m_f * eta`.
    pub fn m_eta(&self) -> f64 {
        self.degree.mean() * self.eta
    }

    pub fn alpha(&self, sender: Tag) -> f64 {
        match sender {
            Tag::Fake => self.alpha_fake,
            Tag::Real => self.alpha_real,
        }
    }
}

/// Control parameters of the warning `w * beta / (beta + b (1 - beta)) + epsilon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WarningPolicy {
    w: f64,
    b: f64,
    epsilon: f64,
}

impl WarningPolicy {
    pub fn new(w: f64, b: f64, epsilon: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::param("w", format!("{w} is not in [0, 1]")));
        }
        if !(b >= 0.0 && b.is_finite()) {
            return Err(Error::param("b", format!("{b} is not a finite value >= 0")));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::param("epsilon", format!("{epsilon} is not > 0")));
        }
        Ok(WarningPolicy { w, b, epsilon })
    }

    pub fn w(&self) -> f64 {
        self.w
    }
    pub fn b(&self) -> f64 {
        self.b
    }
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Largest warning level the policy can emit.
    pub fn max_warning(&self) -> f64 {
        self.w + self.epsilon
    }

    /// Warning level at fake-tag fraction `beta`.
    ///
    /// With `b = 0` the map is the pointwise limit: `epsilon` at `beta = 0`
    /// and `w + epsilon` for every `beta > 0`.
    pub fn warning(&self, beta: f64) -> f64 {
        debug_assert!((0.0..=1.0).contains(&beta), "beta = {beta}");
        if beta == 0.0 {
            return self.epsilon;
        }
        self.w * beta / (beta + self.b * (1.0 - beta)) + self.epsilon
    }

    /// True at the 0/0 point `beta = b = 0`, where `warning` returns `epsilon`.
    pub fn is_degenerate_at(&self, beta: f64) -> bool {
        beta == 0.0 && self.b == 0.0
    }

    /// `d warning / d beta = w b / (beta + b (1 - beta))^2`.
    pub fn warning_dbeta(&self, beta: f64) -> f64 {
        let den = beta + self.b * (1.0 - beta);
        if den == 0.0 {
            return 0.0;
        }
        self.w * self.b / (den * den)
    }

    /// `d warning / d w = beta / (beta + b (1 - beta))`.
    pub fn warning_dw(&self, beta: f64) -> f64 {
        if beta == 0.0 {
            return 0.0;
        }
        beta / (beta + self.b * (1.0 - beta))
    }

    /// `d warning / d b = -w beta (1 - beta) / (beta + b (1 - beta))^2`.
    pub fn warning_db(&self, beta: f64) -> f64 {
        if beta == 0.0 {
            return 0.0;
        }
        let den = beta + self.b * (1.0 - beta);
        -self.w * beta * (1.0 - beta) / (den * den)
    }
}

/// Warning level `omega(beta)`; rejects `beta` outside `[0, 1]`.
pub fn warning(beta: f64, policy: &WarningPolicy) -> Result<f64> {
    check_fraction(beta)?;
    Ok(policy.warning(beta))
}

fn check_fraction(beta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&beta) {
        Ok(())
    } else {
        Err(Error::param("beta", format!("{beta} is not in [0, 1]")))
    }
}

/// A news model paired with a warning policy, checked once so that every
/// tag probability stays strictly below one.
#[derive(Debug, Clone, Copy)]
pub struct NewsDynamics<'a> {
    params: &'a ModelParams,
    policy: &'a WarningPolicy,
}

impl<'a> NewsDynamics<'a> {
    pub fn new(params: &'a ModelParams, policy: &'a WarningPolicy) -> Result<Self> {
        check_tag_bound(params, policy)?;
        Ok(NewsDynamics { params, policy })
    }

    pub fn params(&self) -> &'a ModelParams {
        self.params
    }

    pub fn policy(&self) -> &'a WarningPolicy {
        self.policy
    }

    /// `q_i(beta) = alpha_i * omega(beta)`.
    pub fn tag_prob(&self, sender: Tag, beta: f64) -> f64 {
        self.params.alpha(sender) * self.policy.warning(beta)
    }

    pub fn q_fake(&self, beta: f64) -> f64 {
        self.tag_prob(Tag::Fake, beta)
    }

    pub fn q_real(&self, beta: f64) -> f64 {
        self.tag_prob(Tag::Real, beta)
    }

    /// Expected fake-tag probability of the next share, `beta q_F + (1 - beta) q_R`.
    pub fn mixed_tag_prob(&self, beta: f64) -> f64 {
        beta * self.q_fake(beta) + (1.0 - beta) * self.q_real(beta)
    }

    /// Generator matrix `A(beta)` (rows: waking type x, y; columns: offspring type).
    pub fn generator(&self, beta: f64) -> Mat2 {
        generator_from_tag_probs(
            self.params.lambda,
            self.params.m_eta(),
            self.q_fake(beta),
            self.q_real(beta),
        )
    }

    /// Drift of the limit-proportion ODE; reduces to the base form when
    /// `eta_c = 1`.
    pub fn g_beta(&self, beta: f64) -> f64 {
        if self.params.is_reluctant() {
            self.g_beta_reluctant(beta)
        } else {
            self.g_beta_base(beta)
        }
    }

    /// `beta (q_F - q_R - 1) + q_R`.
    pub fn g_beta_base(&self, beta: f64) -> f64 {
        let qf = self.q_fake(beta);
        let qr = self.q_real(beta);
        beta * (qf - qr - 1.0) + qr
    }

    /// `(beta (q_F - q_R) + q_R)(eta_c - beta (eta_c - 1)) - beta`.
    pub fn g_beta_reluctant(&self, beta: f64) -> f64 {
        let eta_c = self.params.eta_c;
        self.mixed_tag_prob(beta) * (eta_c - beta * (eta_c - 1.0)) - beta
    }
}

/// Generator matrix for given tag probabilities of an x-user (`q_fake`) and
/// a y-user (`q_real`).
pub fn generator_from_tag_probs(lambda: f64, m_eta: f64, q_fake: f64, q_real: f64) -> Mat2 {
    Mat2::new(
        [
            lambda * (q_fake * m_eta - 1.0),
            lambda * (1.0 - q_fake) * m_eta,
        ],
        [
            lambda * q_real * m_eta,
            lambda * ((1.0 - q_real) * m_eta - 1.0),
        ],
    )
}

fn check_tag_bound(params: &ModelParams, policy: &WarningPolicy) -> Result<()> {
    let top = policy.max_warning();
    for (which, alpha) in [
        ("alpha_fake", params.alpha_fake),
        ("alpha_real", params.alpha_real),
    ] {
        let product = alpha * top;
        if product >= 1.0 {
            return Err(Error::ConstraintViolation { which, product });
        }
    }
    Ok(())
}

/// Probability that a user holding a copy tagged `sender` tags it as fake.
pub fn tag_prob(
    sender: Tag,
    beta: f64,
    params: &ModelParams,
    policy: &WarningPolicy,
) -> Result<f64> {
    check_fraction(beta)?;
    Ok(NewsDynamics::new(params, policy)?.tag_prob(sender, beta))
}

pub fn generator_matrix(beta: f64, params: &ModelParams, policy: &WarningPolicy) -> Result<Mat2> {
    check_fraction(beta)?;
    Ok(NewsDynamics::new(params, policy)?.generator(beta))
}

pub fn g_beta(beta: f64, params: &ModelParams, policy: &WarningPolicy) -> Result<f64> {
    check_fraction(beta)?;
    Ok(NewsDynamics::new(params, policy)?.g_beta(beta))
}

/// Parameters of a fake and a real news item sharing one warning policy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioPair {
    pub fake_news: ModelParams,
    pub real_news: ModelParams,
    pub policy: WarningPolicy,
}

impl ScenarioPair {
    pub fn new(fake_news: ModelParams, real_news: ModelParams, policy: WarningPolicy) -> Self {
        ScenarioPair {
            fake_news,
            real_news,
            policy,
        }
    }

    pub fn with_policy(&self, policy: WarningPolicy) -> Self {
        ScenarioPair {
            policy,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeCheck {
    pub name: &'static str,
    pub detail: String,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeReport {
    pub checks: Vec<RegimeCheck>,
}

impl RegimeReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &RegimeCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Checks the orderings assumed for a realistic scenario plus the tag
/// probability bound for both news items. In strict mode any failure is an
/// error; otherwise the failures are only reported.
pub fn validate_regime(pair: &ScenarioPair, strict: bool) -> Result<RegimeReport> {
    let f = &pair.fake_news;
    let r = &pair.real_news;
    let top = pair.policy.max_warning();
    let mut checks = Vec::new();
    let mut push = |name, detail: String, passed| {
        checks.push(RegimeCheck {
            name,
            detail,
            passed,
        })
    };

    push(
        "attractiveness",
        format!("eta_F = {} > eta_R = {}", f.eta, r.eta),
        f.eta > r.eta,
    );
    push(
        "sender_tag_fake_news",
        format!(
            "alpha_F^F = {} > alpha_R^F = {}",
            f.alpha_fake, f.alpha_real
        ),
        f.alpha_fake > f.alpha_real,
    );
    push(
        "sender_tag_real_news",
        format!(
            "alpha_F^R = {} > alpha_R^R = {}",
            r.alpha_fake, r.alpha_real
        ),
        r.alpha_fake > r.alpha_real,
    );
    push(
        "veracity",
        format!(
            "alpha_F^F = {} > alpha_F^R = {}",
            f.alpha_fake, r.alpha_fake
        ),
        f.alpha_fake > r.alpha_fake,
    );
    for (label, p) in [("fake", f), ("real", r)] {
        let product = p.alpha_fake.max(p.alpha_real) * top;
        push(
            if label == "fake" {
                "tag_bound_fake_news"
            } else {
                "tag_bound_real_news"
            },
            format!("max alpha * (w + epsilon) = {product} < 1"),
            product < 1.0,
        );
    }

    let report = RegimeReport { checks };
    if strict && !report.passed() {
        return Err(Error::Regime(
            report
                .failures()
                .map(|c| format!("{}: {}", c.name, c.detail))
                .collect(),
        ));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config1() -> (ModelParams, WarningPolicy) {
        (
            ModelParams::new(0.1, 0.9, 0.45, 0.3, DegreeModel::constant(30)).unwrap(),
            WarningPolicy::new(1.0, 1.0, 0.05).unwrap(),
        )
    }

    fn twitter_pair() -> ScenarioPair {
        let deg = DegreeModel::constant(28);
        ScenarioPair::new(
            ModelParams::new(0.1, 0.85, 0.6375, 0.08, deg.clone()).unwrap(),
            ModelParams::new(0.1, 0.3, 0.09, 0.05, deg).unwrap(),
            WarningPolicy::new(1.0, 0.16130, 0.1).unwrap(),
        )
    }

    #[test]
    fn warning_examples() {
        let p = WarningPolicy::new(0.7, 0.3, 0.1).unwrap();
        assert_eq!(warning(0.0, &p).unwrap(), 0.1);
        let p = WarningPolicy::new(1.0, 0.5, 0.1).unwrap();
        assert!((warning(1.0, &p).unwrap() - 1.1).abs() < 1e-12);
        assert!((warning(0.5, &p).unwrap() - (0.5 / 0.75 + 0.1)).abs() < 1e-12);
        assert!((warning(0.5, &p).unwrap() - 0.766_666_666_666_7).abs() < 1e-12);
        assert!(warning(1.5, &p).is_err());
    }

    #[test]
    fn warning_with_zero_discount() {
        let p = WarningPolicy::new(0.6, 0.0, 0.05).unwrap();
        assert!(p.is_degenerate_at(0.0));
        assert_eq!(p.warning(0.0), 0.05);
        assert_eq!(p.warning(1e-9), 0.65);
        assert_eq!(p.warning(0.7), 0.65);
        assert!(!p.is_degenerate_at(0.2));
    }

    #[test]
    fn policy_rejects_bad_values() {
        assert!(WarningPolicy::new(1.2, 1.0, 0.1).is_err());
        assert!(WarningPolicy::new(0.5, -1.0, 0.1).is_err());
        assert!(WarningPolicy::new(0.5, 1.0, 0.0).is_err());
    }

    #[test]
    fn params_reject_bad_values() {
        let d = DegreeModel::constant(10);
        assert!(ModelParams::new(0.0, 0.5, 0.5, 0.5, d.clone()).is_err());
        assert!(ModelParams::new(1.0, 0.0, 0.5, 0.5, d.clone()).is_err());
        assert!(ModelParams::new(1.0, 0.5, 1.5, 0.5, d.clone()).is_err());
        assert!(ModelParams::new(1.0, 0.5, 0.5, 0.5, d.clone())
            .unwrap()
            .with_reluctance(0.0)
            .is_err());
    }

    #[test]
    fn tag_prob_examples() {
        let params = ModelParams::new(0.1, 0.9, 0.45, 0.3, DegreeModel::constant(30)).unwrap();
        let eps_only = WarningPolicy::new(1.0, 1.0, 0.05).unwrap();
        let q = tag_prob(Tag::Fake, 0.0, &params, &eps_only).unwrap();
        assert!((q - 0.045).abs() < 1e-12);
        let q = tag_prob(Tag::Real, 0.5, &params, &eps_only).unwrap();
        assert!((q - 0.2475).abs() < 1e-12);

        let too_hot = WarningPolicy::new(1.0, 1.0, 0.12).unwrap();
        match tag_prob(Tag::Fake, 1.0, &params, &too_hot) {
            Err(Error::ConstraintViolation { which, product }) => {
                assert_eq!(which, "alpha_fake");
                assert!((product - 0.9 * 1.12).abs() < 1e-12);
            }
            other => panic!("expected constraint violation, got {other:?}"),
        }
    }

    #[test]
    fn generator_examples() {
        let a = generator_from_tag_probs(0.1, 30.0 * 0.3, 0.0, 0.0);
        let expected = [[-0.1, 0.9], [0.0, 0.8]];
        for (i, row) in expected.iter().enumerate() {
            for (j, &value) in row.iter().enumerate() {
                assert!((a.get(i, j) - value).abs() < 1e-12, "{a:?}");
            }
        }

        let (params, policy) = config1();
        let dynamics = NewsDynamics::new(&params, &policy).unwrap();
        for k in 0..=100 {
            let beta = f64::from(k) / 100.0;
            let a = dynamics.generator(beta);
            let target = 0.1 * (9.0 - 1.0);
            assert!((a.row_sum(0) - target).abs() < 1e-12);
            assert!((a.row_sum(1) - target).abs() < 1e-12);
        }
    }

    #[test]
    fn g_beta_endpoints() {
        let (params, policy) = config1();
        let d = NewsDynamics::new(&params, &policy).unwrap();
        assert!((d.g_beta(0.0) - 0.45 * 0.05).abs() < 1e-12);
        assert!((d.g_beta(1.0) - (0.9 * 1.05 - 1.0)).abs() < 1e-12);

        let reluctant = params.clone().with_reluctance(0.3).unwrap();
        let d = NewsDynamics::new(&reluctant, &policy).unwrap();
        assert!((d.g_beta(0.0) - 0.45 * 0.05 * 0.3).abs() < 1e-12);
        assert!((d.g_beta(1.0) - (0.9 * 1.05 - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn reluctant_form_with_unit_factor_is_base_form() {
        let (params, policy) = config1();
        let d = NewsDynamics::new(&params, &policy).unwrap();
        for k in 0..=1000 {
            let beta = f64::from(k) / 1000.0;
            assert!((d.g_beta_reluctant(beta) - d.g_beta_base(beta)).abs() < 1e-12);
        }
    }

    #[test]
    fn regime_examples() {
        let pair = twitter_pair();
        let report = validate_regime(&pair, true).unwrap();
        assert!(report.passed());
        let bound = report
            .checks
            .iter()
            .find(|c| c.name == "tag_bound_fake_news")
            .unwrap();
        assert!(bound.passed);
        assert!((0.85_f64 * 1.1 - 0.935).abs() < 1e-12);

        let mut equal = pair.clone();
        equal.real_news = equal.real_news.with_eta(0.08).unwrap();
        match validate_regime(&equal, true) {
            Err(Error::Regime(failed)) => {
                assert_eq!(failed.len(), 1);
                assert!(failed[0].starts_with("attractiveness"));
            }
            other => panic!("expected regime failure, got {other:?}"),
        }
        let lax = validate_regime(&equal, false).unwrap();
        assert_eq!(lax.failures().count(), 1);
    }

    #[test]
    fn degree_moments() {
        let c = DegreeModel::constant(30);
        assert_eq!(c.mean(), 30.0);
        assert_eq!(c.second_moment(), 900.0);
        let b = DegreeModel::binomial(40, 0.25).unwrap();
        assert!((b.mean() - 10.0).abs() < 1e-12);
        assert!((b.second_moment() - (7.5 + 100.0)).abs() < 1e-12);
        let e = DegreeModel::empirical(vec![1, 1, 1]).unwrap();
        assert!((e.mean() - 1.0).abs() < 1e-12);
        assert!((e.second_moment() - 5.0 / 3.0).abs() < 1e-12);
        assert_eq!(e.max_degree(), 2);
        assert!(DegreeModel::empirical(vec![0, 0]).is_err());
    }
}

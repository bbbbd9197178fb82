use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::model::{DegreeModel, ModelParams, Tag};

/// Draws `F` from a degree model.
#[derive(Debug, Clone)]
pub(crate) enum DegreeSampler {
    Constant(u64),
    Binomial(Binomial),
    Empirical(WeightedIndex<u64>),
}

impl DegreeSampler {
    pub(crate) fn new(model: &DegreeModel) -> Result<Self> {
        Ok(match model {
            DegreeModel::Constant { count } => DegreeSampler::Constant(u64::from(*count)),
            DegreeModel::Binomial { n, p } => DegreeSampler::Binomial(
                Binomial::new(u64::from(*n), *p)
                    .map_err(|e| Error::param("degree_model", e.to_string()))?,
            ),
            DegreeModel::Empirical { counts } => DegreeSampler::Empirical(
                WeightedIndex::new(counts.iter().copied())
                    .map_err(|e| Error::param("degree_model.histogram", e.to_string()))?,
            ),
        })
    }

    pub(crate) fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match self {
            DegreeSampler::Constant(c) => *c,
            DegreeSampler::Binomial(b) => b.sample(rng),
            DegreeSampler::Empirical(w) => w.sample(rng) as u64,
        }
    }
}

/// Offspring law `Bin(F, eta)`, thinned further by `eta_c` after a fake tag.
#[derive(Debug, Clone)]
pub(crate) struct OffspringSampler {
    degree: DegreeSampler,
    eta_real_tag: f64,
    eta_fake_tag: f64,
    /// Pre-built binomials when `F` is constant: `[after real tag, after fake tag]`.
    fixed: Option<[Binomial; 2]>,
}

impl OffspringSampler {
    pub(crate) fn new(params: &ModelParams) -> Result<Self> {
        let degree = DegreeSampler::new(params.degree())?;
        let eta_real_tag = params.eta();
        let eta_fake_tag = params.eta() * params.eta_c();
        let fixed = match degree {
            DegreeSampler::Constant(f) => {
                Some([binomial(f, eta_real_tag)?, binomial(f, eta_fake_tag)?])
            }
            _ => None,
        };
        Ok(OffspringSampler {
            degree,
            eta_real_tag,
            eta_fake_tag,
            fixed,
        })
    }

    /// Share probability per friend for a copy forwarded with tag `tag`.
    pub(crate) fn share_prob(&self, tag: Tag) -> f64 {
        match tag {
            Tag::Fake => self.eta_fake_tag,
            Tag::Real => self.eta_real_tag,
        }
    }

    pub(crate) fn sample<R: Rng + ?Sized>(&self, tag: Tag, rng: &mut R) -> u64 {
        let idx = usize::from(tag == Tag::Fake);
        if let Some(fixed) = &self.fixed {
            return fixed[idx].sample(rng);
        }
        let f = self.degree.sample(rng);
        // p was validated on construction; Binomial::new only fails on p outside [0, 1].
        Binomial::new(f, self.share_prob(tag))
            .expect("share probability in [0, 1]")
            .sample(rng)
    }
}

fn binomial(n: u64, p: f64) -> Result<Binomial> {
    Binomial::new(n, p).map_err(|e| Error::param("eta", e.to_string()))
}

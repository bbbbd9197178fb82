use rayon::prelude::*;
use serde::Serialize;

use super::branching::CountPopulation;
use super::rng::path_rng;
use super::{run_chain, InitialState, Population, StopRule};
use crate::error::{Error, Result};
use crate::model::{ModelParams, NewsDynamics, WarningPolicy};

/// Normal quantile for a two-sided 95% interval.
const Z95: f64 = 1.959_963_984_540_054;

/// Sample mean with a 95% normal-approximation confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanCi {
    pub n: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub half_width: f64,
}

impl MeanCi {
    pub fn from_samples(values: &[f64]) -> Option<Self> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std_dev = if n > 1 {
            let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
            (ss / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(MeanCi {
            n,
            mean,
            std_dev,
            half_width: Z95 * std_dev / (n as f64).sqrt(),
        })
    }

    pub fn contains(&self, value: f64) -> bool {
        (value - self.mean).abs() <= self.half_width
    }
}

/// Terminal statistics of one path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathOutcome {
    pub stream: u64,
    pub events: u64,
    pub t: f64,
    pub x: u64,
    pub y: u64,
    /// `X + Y > 0` when the path stopped.
    pub survived: bool,
    /// `X / (X + Y)` at the stop, surviving paths only.
    pub beta: Option<f64>,
    /// `(X + Y) / n` at the stop; 0 after extinction.
    pub psi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloSummary {
    pub n_paths: usize,
    pub base_seed: u64,
    pub survivors: usize,
    pub survival_fraction: f64,
    /// Terminal fake-tag fraction over surviving paths.
    pub beta: Option<MeanCi>,
    /// Terminal `psi` over surviving paths.
    pub psi: Option<MeanCi>,
    /// No path survived, so no `beta` statistics exist.
    pub insufficient_survival: bool,
    pub paths: Vec<PathOutcome>,
}

impl MonteCarloSummary {
    pub(crate) fn from_outcomes(base_seed: u64, mut paths: Vec<PathOutcome>) -> Self {
        paths.sort_by_key(|p| p.stream);
        let betas: Vec<f64> = paths.iter().filter_map(|p| p.beta).collect();
        let psis: Vec<f64> = paths.iter().filter(|p| p.survived).map(|p| p.psi).collect();
        let survivors = betas.len();
        MonteCarloSummary {
            n_paths: paths.len(),
            base_seed,
            survivors,
            survival_fraction: survivors as f64 / paths.len() as f64,
            beta: MeanCi::from_samples(&betas),
            psi: MeanCi::from_samples(&psis),
            insufficient_survival: survivors == 0,
            paths,
        }
    }
}

/// Runs one path to its stop without keeping the event log.
pub(crate) fn run_outcome<P: Population>(
    population: &mut P,
    dynamics: &NewsDynamics<'_>,
    stop: StopRule,
    base_seed: u64,
    stream: u64,
) -> Result<PathOutcome> {
    let mut rng = path_rng(base_seed, stream);
    let end = run_chain(population, dynamics, stop, &mut rng, |_| {})?;
    let (x, y) = population.counts();
    let s = x + y;
    Ok(PathOutcome {
        stream,
        events: end.events,
        t: end.t,
        x,
        y,
        survived: s > 0,
        beta: (s > 0).then(|| x as f64 / s as f64),
        psi: if end.events == 0 {
            0.0
        } else {
            s as f64 / end.events as f64
        },
    })
}

/// Runs `n_paths` independent paths in parallel, path `i` on stream `i` of
/// `base_seed`.
pub(crate) fn run_paths<F>(n_paths: usize, base_seed: u64, path: F) -> Result<MonteCarloSummary>
where
    F: Fn(u64) -> Result<PathOutcome> + Sync,
{
    if n_paths == 0 {
        return Err(Error::param("n_paths", "need at least one path"));
    }
    let outcomes = (0..n_paths as u64)
        .into_par_iter()
        .map(&path)
        .collect::<Result<Vec<_>>>()?;
    Ok(MonteCarloSummary::from_outcomes(base_seed, outcomes))
}

/// Independent replications of [`simulate`](super::simulate). Extinct paths
/// count towards the survival fraction only.
pub fn monte_carlo(
    params: &ModelParams,
    policy: &WarningPolicy,
    n_paths: usize,
    init: InitialState,
    stop: StopRule,
    base_seed: u64,
) -> Result<MonteCarloSummary> {
    let dynamics = NewsDynamics::new(params, policy)?;
    stop.validate()?;
    run_paths(n_paths, base_seed, |stream| {
        let mut population = CountPopulation::new(params, init)?;
        run_outcome(&mut population, &dynamics, stop, base_seed, stream)
    })
}

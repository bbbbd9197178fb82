//! Event-driven simulation of the warning-controlled branching process.
//!
//! Copies wake one at a time after exponential holding times with total rate
//! `lambda (X + Y)`. The waking copy is consumed, its holder tags the news
//! (fake with probability `q` of the sender tag at the current fraction
//! `beta = X / (X + Y)`) and forwards it to a binomial number of friends, all
//! of whom receive the new tag.

mod branching;
mod coupling;
mod embedded;
mod monte_carlo;
mod offspring;
pub mod rng;

use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{NewsDynamics, Tag};

pub use branching::simulate;
pub use coupling::{coupled_simulate, CoupledTrace};
pub use embedded::{embedded_chain_stats, EmbeddedStats, Terminal};
pub use monte_carlo::{monte_carlo, MeanCi, MonteCarloSummary, PathOutcome};

pub(crate) use branching::record_trace;
pub(crate) use monte_carlo::{run_outcome, run_paths};

/// When a path stops.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopRule {
    /// After this many wake-up events.
    MaxEvents(u64),
    /// At simulation time `t`.
    Horizon(f64),
}

impl StopRule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            StopRule::MaxEvents(0) => Err(Error::param("stop", "zero events gives an empty trace")),
            StopRule::Horizon(t) if !(t > 0.0 && t.is_finite()) => {
                Err(Error::param("stop", format!("horizon {t} is not > 0")))
            }
            _ => Ok(()),
        }
    }
}

/// Initial unread copies tagged fake (`x`) and real (`y`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct InitialState {
    pub x: u64,
    pub y: u64,
}

impl InitialState {
    pub fn new(x: u64, y: u64) -> Result<Self> {
        if x + y == 0 {
            return Err(Error::param("init", "need at least one initial copy"));
        }
        Ok(InitialState { x, y })
    }

    pub fn total(&self) -> u64 {
        self.x + self.y
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMode {
    DegreeModel,
    Network,
}

impl SimMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SimMode::DegreeModel => "degree-model",
            SimMode::Network => "network",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PopulationState {
    pub x: u64,
    pub y: u64,
    pub t: f64,
}

/// One wake-up epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Event {
    /// Epoch index, starting at 1.
    pub n: u64,
    pub t: f64,
    /// Tag of the copy that woke up.
    pub waker: Tag,
    /// Whether the reader tagged the news as fake before forwarding.
    pub tagged_fake: bool,
    pub offspring: u64,
    /// Population after the event.
    pub x: u64,
    pub y: u64,
}

/// Scaled embedded chain after epoch `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmbeddedPoint {
    pub n: u64,
    /// `S_n / n`.
    pub psi: f64,
    /// `X_n / n`.
    pub theta: f64,
    /// `X_n / S_n`; `None` at extinction.
    pub beta: Option<f64>,
    /// `1{psi_{n-1} > 0}`.
    pub active: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationTrace {
    pub mode: SimMode,
    pub seed: u64,
    pub stream: u64,
    pub init: InitialState,
    pub events: Vec<Event>,
    pub embedded: Vec<EmbeddedPoint>,
    /// First epoch with `X + Y = 0`.
    pub extinction_epoch: Option<u64>,
    pub final_state: PopulationState,
}

impl SimulationTrace {
    pub fn survived(&self) -> bool {
        self.extinction_epoch.is_none()
    }

    /// Final fake-tag fraction, `None` after extinction.
    pub fn terminal_beta(&self) -> Option<f64> {
        let s = self.final_state.x + self.final_state.y;
        (s > 0).then(|| self.final_state.x as f64 / s as f64)
    }

    /// CSV with columns `n, t, type, tag, offspring, x, y`; `type` is the
    /// waking copy (`x` or `y`), `tag` is 1 when it was re-tagged fake.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "n,t,type,tag,offspring,x,y")?;
        for e in &self.events {
            let kind = match e.waker {
                Tag::Fake => "x",
                Tag::Real => "y",
            };
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                e.n,
                e.t,
                kind,
                u8::from(e.tagged_fake),
                e.offspring,
                e.x,
                e.y
            )?;
        }
        Ok(())
    }
}

pub(crate) fn embedded_point(n: u64, x: u64, y: u64) -> EmbeddedPoint {
    let s = x + y;
    EmbeddedPoint {
        n,
        psi: s as f64 / n as f64,
        theta: x as f64 / n as f64,
        beta: (s > 0).then(|| x as f64 / s as f64),
        active: true,
    }
}

/// Unread copies and how new ones are produced.
pub(crate) trait Population {
    fn counts(&self) -> (u64, u64);

    /// Removes the `index`-th copy among those tagged `waker` and returns the
    /// number of copies it spawns after being re-tagged `tag`.
    fn wake_and_share(
        &mut self,
        waker: Tag,
        index: u64,
        tag: Tag,
        rng: &mut ChaCha8Rng,
    ) -> Result<u64>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct RunEnd {
    pub events: u64,
    pub t: f64,
    pub extinction_epoch: Option<u64>,
}

/// Runs the jump chain until extinction or `stop`. Every epoch is passed to
/// `sink` after the population has been updated.
///
/// Random draws per epoch, in order: holding time, waking copy, tag flag,
/// offspring. The holding time is `Exp(1) / (lambda S)`, so changing `lambda`
/// only rescales time stamps.
pub(crate) fn run_chain<P, F>(
    population: &mut P,
    dynamics: &NewsDynamics<'_>,
    stop: StopRule,
    rng: &mut ChaCha8Rng,
    mut sink: F,
) -> Result<RunEnd>
where
    P: Population,
    F: FnMut(&Event),
{
    stop.validate()?;
    let lambda = dynamics.params().lambda();
    let mut t = 0.0;
    let mut n = 0u64;
    loop {
        let (x, y) = population.counts();
        let s = x
            .checked_add(y)
            .ok_or_else(|| Error::Invariant("population count overflow".into()))?;
        if s == 0 {
            return Ok(RunEnd {
                events: n,
                t,
                extinction_epoch: Some(n),
            });
        }
        if let StopRule::MaxEvents(max) = stop {
            if n >= max {
                break;
            }
        }
        let hold: f64 = Exp1.sample(rng);
        let dt = hold / (lambda * s as f64);
        if let StopRule::Horizon(h) = stop {
            if t + dt > h {
                t = h;
                break;
            }
        }
        t += dt;

        let k = rng.random_range(0..s);
        let (waker, index) = if k < x {
            (Tag::Fake, k)
        } else {
            (Tag::Real, k - x)
        };
        let beta = x as f64 / s as f64;
        let q = dynamics.tag_prob(waker, beta);
        let tagged_fake = rng.random::<f64>() < q;
        let tag = if tagged_fake { Tag::Fake } else { Tag::Real };
        let offspring = population.wake_and_share(waker, index, tag, rng)?;
        n += 1;
        let (x, y) = population.counts();
        sink(&Event {
            n,
            t,
            waker,
            tagged_fake,
            offspring,
            x,
            y,
        });
    }
    Ok(RunEnd {
        events: n,
        t,
        extinction_epoch: None,
    })
}

/// Applies one transition to plain counts.
pub(crate) fn apply_transition(
    x: &mut u64,
    y: &mut u64,
    waker: Tag,
    tag: Tag,
    offspring: u64,
) -> Result<()> {
    let overflow = || Error::Invariant("population count overflow".into());
    match waker {
        Tag::Fake => *x -= 1,
        Tag::Real => *y -= 1,
    }
    match tag {
        Tag::Fake => *x = x.checked_add(offspring).ok_or_else(overflow)?,
        Tag::Real => *y = y.checked_add(offspring).ok_or_else(overflow)?,
    }
    Ok(())
}

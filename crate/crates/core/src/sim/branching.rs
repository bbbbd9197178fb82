use rand_chacha::ChaCha8Rng;

use super::offspring::OffspringSampler;
use super::rng::path_rng;
use super::{
    apply_transition, embedded_point, run_chain, InitialState, Population, PopulationState, RunEnd,
    SimMode, SimulationTrace, StopRule,
};
use crate::error::Result;
use crate::model::{ModelParams, NewsDynamics, Tag, WarningPolicy};

/// Population that only tracks counts; friend counts come from the degree
/// model.
pub(crate) struct CountPopulation {
    x: u64,
    y: u64,
    offspring: OffspringSampler,
}

impl CountPopulation {
    pub(crate) fn new(params: &ModelParams, init: InitialState) -> Result<Self> {
        Ok(CountPopulation {
            x: init.x,
            y: init.y,
            offspring: OffspringSampler::new(params)?,
        })
    }
}

impl Population for CountPopulation {
    fn counts(&self) -> (u64, u64) {
        (self.x, self.y)
    }

    fn wake_and_share(
        &mut self,
        waker: Tag,
        _index: u64,
        tag: Tag,
        rng: &mut ChaCha8Rng,
    ) -> Result<u64> {
        let xi = self.offspring.sample(tag, rng);
        apply_transition(&mut self.x, &mut self.y, waker, tag, xi)?;
        Ok(xi)
    }
}

pub(crate) fn record_trace<P: Population>(
    population: &mut P,
    dynamics: &NewsDynamics<'_>,
    init: InitialState,
    stop: StopRule,
    seed: u64,
    stream: u64,
    mode: SimMode,
) -> Result<SimulationTrace> {
    let mut rng = path_rng(seed, stream);
    let mut events = Vec::new();
    let mut embedded = Vec::new();
    let RunEnd {
        t,
        extinction_epoch,
        ..
    } = run_chain(population, dynamics, stop, &mut rng, |e| {
        events.push(*e);
        embedded.push(embedded_point(e.n, e.x, e.y));
    })?;
    let (x, y) = population.counts();
    Ok(SimulationTrace {
        mode,
        seed,
        stream,
        init,
        events,
        embedded,
        extinction_epoch,
        final_state: PopulationState { x, y, t },
    })
}

/// Simulates one path of the process started from `init`.
///
/// The path draws from stream 0 of `seed`, which is also path 0 of
/// [`monte_carlo`](super::monte_carlo) with the same root seed.
pub fn simulate(
    params: &ModelParams,
    policy: &WarningPolicy,
    init: InitialState,
    stop: StopRule,
    seed: u64,
) -> Result<SimulationTrace> {
    let dynamics = NewsDynamics::new(params, policy)?;
    let mut population = CountPopulation::new(params, init)?;
    record_trace(
        &mut population,
        &dynamics,
        init,
        stop,
        seed,
        0,
        SimMode::DegreeModel,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DegreeModel;

    fn config1() -> (ModelParams, WarningPolicy) {
        (
            ModelParams::new(0.1, 0.9, 0.45, 0.3, DegreeModel::constant(30)).unwrap(),
            WarningPolicy::new(1.0, 1.0, 0.05).unwrap(),
        )
    }

    #[test]
    fn deterministic_given_seed() {
        let (p, pol) = config1();
        let init = InitialState::new(1, 0).unwrap();
        let a = simulate(&p, &pol, init, StopRule::MaxEvents(2000), 11).unwrap();
        let b = simulate(&p, &pol, init, StopRule::MaxEvents(2000), 11).unwrap();
        assert_eq!(a, b);
        let c = simulate(&p, &pol, init, StopRule::MaxEvents(2000), 12).unwrap();
        assert_ne!(a.events, c.events);
    }

    #[test]
    fn lambda_only_rescales_time() {
        let (p, pol) = config1();
        let fast = p.clone().with_lambda(1.0).unwrap();
        let init = InitialState::new(1, 0).unwrap();
        let a = simulate(&p, &pol, init, StopRule::MaxEvents(3000), 5).unwrap();
        let b = simulate(&fast, &pol, init, StopRule::MaxEvents(3000), 5).unwrap();
        assert_eq!(a.embedded, b.embedded);
        assert_eq!(a.events.len(), b.events.len());
        for (ea, eb) in a.events.iter().zip(&b.events) {
            assert_eq!(
                (ea.waker, ea.tagged_fake, ea.offspring, ea.x, ea.y),
                (eb.waker, eb.tagged_fake, eb.offspring, eb.x, eb.y)
            );
            assert!((ea.t - 10.0 * eb.t).abs() <= 1e-9 * ea.t.max(1.0));
        }
    }

    #[test]
    fn single_death_path() {
        // eta tiny: the first reader forwards to nobody with overwhelming probability.
        let p = ModelParams::new(1.0, 0.5, 0.25, 1e-12, DegreeModel::constant(5)).unwrap();
        let pol = WarningPolicy::new(1.0, 1.0, 0.05).unwrap();
        let tr = simulate(
            &p,
            &pol,
            InitialState::new(1, 0).unwrap(),
            StopRule::MaxEvents(10),
            3,
        )
        .unwrap();
        assert_eq!(tr.extinction_epoch, Some(1));
        assert_eq!((tr.final_state.x, tr.final_state.y), (0, 0));
        assert_eq!(tr.events.len(), 1);
        assert_eq!(tr.events[0].offspring, 0);
        assert!(!tr.survived());
        assert_eq!(tr.terminal_beta(), None);
    }

    #[test]
    fn horizon_stop() {
        let (p, pol) = config1();
        let tr = simulate(
            &p,
            &pol,
            InitialState::new(0, 3).unwrap(),
            StopRule::Horizon(20.0),
            9,
        )
        .unwrap();
        assert!(tr.events.iter().all(|e| e.t <= 20.0));
        if tr.survived() {
            assert_eq!(tr.final_state.t, 20.0);
        }
    }

    #[test]
    fn invalid_stop_and_init() {
        let (p, pol) = config1();
        let init = InitialState::new(1, 0).unwrap();
        assert!(simulate(&p, &pol, init, StopRule::MaxEvents(0), 1).is_err());
        assert!(simulate(&p, &pol, init, StopRule::Horizon(-1.0), 1).is_err());
        assert!(InitialState::new(0, 0).is_err());
    }

    #[test]
    fn total_population_recursion() {
        let (p, pol) = config1();
        let tr = simulate(
            &p,
            &pol,
            InitialState::new(2, 1).unwrap(),
            StopRule::MaxEvents(5000),
            21,
        )
        .unwrap();
        let mut prev = 3u64;
        for e in &tr.events {
            assert_eq!(e.x + e.y, prev - 1 + e.offspring);
            prev = e.x + e.y;
        }
    }

    #[test]
    fn csv_layout() {
        let (p, pol) = config1();
        let tr = simulate(
            &p,
            &pol,
            InitialState::new(1, 0).unwrap(),
            StopRule::MaxEvents(3),
            2,
        )
        .unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "n,t,type,tag,offspring,x,y");
        assert_eq!(lines.len(), tr.events.len() + 1);
        assert!(lines[1].starts_with("1,"));
    }
}

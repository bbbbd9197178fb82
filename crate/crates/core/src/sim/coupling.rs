use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::Serialize;

use super::offspring::OffspringSampler;
use super::rng::path_rng;
use super::{
    apply_transition, embedded_point, Event, InitialState, PopulationState, SimMode,
    SimulationTrace, StopRule,
};
use crate::error::{Error, Result};
use crate::model::{ModelParams, NewsDynamics, Tag, WarningPolicy};

/// Two paths driven by common randomness, the first under the stronger
/// warning.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoupledTrace {
    pub first: SimulationTrace,
    pub second: SimulationTrace,
    /// Epochs at which the dominance was checked.
    pub checked_events: u64,
}

fn check_order(params: &ModelParams, p1: &WarningPolicy, p2: &WarningPolicy) -> Result<()> {
    if params.is_reluctant() {
        return Err(Error::Unsupported(format!(
            "coupling needs tag-independent offspring (eta_c = 1), got eta_c = {}",
            params.eta_c()
        )));
    }
    if params.alpha_fake() <= params.alpha_real() {
        return Err(Error::param(
            "alpha_fake",
            "coupling needs alpha_fake > alpha_real",
        ));
    }
    if p1.epsilon() != p2.epsilon() {
        return Err(Error::param("epsilon", "both policies must share epsilon"));
    }
    if p1.w() < p2.w() || p1.b() > p2.b() {
        return Err(Error::param(
            "policy",
            format!(
                "need w1 >= w2 and b1 <= b2, got (w1, b1) = ({}, {}), (w2, b2) = ({}, {})",
                p1.w(),
                p1.b(),
                p2.w(),
                p2.b()
            ),
        ));
    }
    Ok(())
}

struct Leg {
    x: u64,
    y: u64,
    events: Vec<Event>,
}

impl Leg {
    fn finish(
        self,
        init: InitialState,
        seed: u64,
        t: f64,
        extinct: Option<u64>,
    ) -> SimulationTrace {
        let embedded = self
            .events
            .iter()
            .map(|e| embedded_point(e.n, e.x, e.y))
            .collect();
        SimulationTrace {
            mode: SimMode::DegreeModel,
            seed,
            stream: 0,
            init,
            events: self.events,
            embedded,
            extinction_epoch: extinct,
            final_state: PopulationState {
                x: self.x,
                y: self.y,
                t,
            },
        }
    }
}

/// Simulates the process under `policy1` and `policy2` on one probability
/// space so that the first path never has fewer fake tags.
///
/// Per epoch both paths share the holding time, one uniform index `k` over
/// the common population (the waker is fake in path `j` iff `k < X_j`), one
/// uniform `U` with `T1 = 1{U < q1}`, a second uniform `V` with
/// `T2 = T1 * 1{V < q2 / q1}`, and one offspring draw. Because `X1 >= X2`
/// forces `q1 >= q2`, the ordering `X1 >= X2`, `Y1 <= Y2` is preserved and
/// total populations coincide. Each epoch is checked and any violation is
/// reported as an invariant failure.
pub fn coupled_simulate(
    params: &ModelParams,
    policy1: &WarningPolicy,
    policy2: &WarningPolicy,
    init: InitialState,
    stop: StopRule,
    seed: u64,
) -> Result<CoupledTrace> {
    check_order(params, policy1, policy2)?;
    stop.validate()?;
    let d1 = NewsDynamics::new(params, policy1)?;
    let d2 = NewsDynamics::new(params, policy2)?;
    let offspring = OffspringSampler::new(params)?;
    let mut rng = path_rng(seed, 0);
    let lambda = params.lambda();

    let mut a = Leg {
        x: init.x,
        y: init.y,
        events: Vec::new(),
    };
    let mut b = Leg {
        x: init.x,
        y: init.y,
        events: Vec::new(),
    };
    let mut t = 0.0;
    let mut n = 0u64;
    let mut extinct = None;
    loop {
        let s = a.x + a.y;
        if s == 0 {
            extinct = Some(n);
            break;
        }
        if let StopRule::MaxEvents(max) = stop {
            if n >= max {
                break;
            }
        }
        let hold: f64 = Exp1.sample(&mut rng);
        let dt = hold / (lambda * s as f64);
        if let StopRule::Horizon(h) = stop {
            if t + dt > h {
                t = h;
                break;
            }
        }
        t += dt;

        let k = rng.random_range(0..s);
        let w1 = if k < a.x { Tag::Fake } else { Tag::Real };
        let w2 = if k < b.x { Tag::Fake } else { Tag::Real };
        let q1 = d1.tag_prob(w1, a.x as f64 / s as f64);
        let q2 = d2.tag_prob(w2, b.x as f64 / s as f64);
        if q2 > q1 {
            return Err(Error::Invariant(format!(
                "epoch {}: tag probabilities out of order, q1 = {q1} < q2 = {q2}",
                n + 1
            )));
        }
        let u: f64 = rng.random();
        let v: f64 = rng.random();
        let t1 = u < q1;
        let t2 = t1 && v * q1 < q2;
        let xi = offspring.sample(Tag::Real, &mut rng);
        n += 1;

        let tag1 = if t1 { Tag::Fake } else { Tag::Real };
        let tag2 = if t2 { Tag::Fake } else { Tag::Real };
        apply_transition(&mut a.x, &mut a.y, w1, tag1, xi)?;
        apply_transition(&mut b.x, &mut b.y, w2, tag2, xi)?;
        if a.x < b.x || a.y > b.y || a.x + a.y != b.x + b.y {
            return Err(Error::Invariant(format!(
                "epoch {n}: coupling broken, (X1, Y1) = ({}, {}), (X2, Y2) = ({}, {})",
                a.x, a.y, b.x, b.y
            )));
        }
        a.events.push(Event {
            n,
            t,
            waker: w1,
            tagged_fake: t1,
            offspring: xi,
            x: a.x,
            y: a.y,
        });
        b.events.push(Event {
            n,
            t,
            waker: w2,
            tagged_fake: t2,
            offspring: xi,
            x: b.x,
            y: b.y,
        });
    }
    Ok(CoupledTrace {
        first: a.finish(init, seed, t, extinct),
        second: b.finish(init, seed, t, extinct),
        checked_events: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DegreeModel;

    fn params() -> ModelParams {
        ModelParams::new(0.1, 0.9, 0.45, 0.3, DegreeModel::constant(30)).unwrap()
    }

    #[test]
    fn equal_policies_give_identical_paths() {
        let pol = WarningPolicy::new(0.7, 0.5, 0.05).unwrap();
        let init = InitialState::new(1, 1).unwrap();
        let c =
            coupled_simulate(&params(), &pol, &pol, init, StopRule::MaxEvents(5000), 3).unwrap();
        assert_eq!(c.first, c.second);
    }

    #[test]
    fn stronger_warning_dominates() {
        let p1 = WarningPolicy::new(1.0, 1.0, 0.05).unwrap();
        let p2 = WarningPolicy::new(0.5, 1.0, 0.05).unwrap();
        let init = InitialState::new(1, 0).unwrap();
        let c =
            coupled_simulate(&params(), &p1, &p2, init, StopRule::MaxEvents(20_000), 17).unwrap();
        for (e1, e2) in c.first.events.iter().zip(&c.second.events) {
            assert!(e1.x >= e2.x && e1.y <= e2.y);
            assert_eq!(e1.x + e1.y, e2.x + e2.y);
        }
    }

    #[test]
    fn rejects_wrong_order_and_reluctance() {
        let p1 = WarningPolicy::new(0.5, 1.0, 0.05).unwrap();
        let p2 = WarningPolicy::new(1.0, 1.0, 0.05).unwrap();
        let init = InitialState::new(1, 0).unwrap();
        let stop = StopRule::MaxEvents(10);
        assert!(coupled_simulate(&params(), &p1, &p2, init, stop, 1).is_err());
        let rel = params().with_reluctance(0.3).unwrap();
        assert!(matches!(
            coupled_simulate(&rel, &p2, &p1, init, stop, 1),
            Err(Error::Unsupported(_))
        ));
        let p3 = WarningPolicy::new(0.5, 1.0, 0.1).unwrap();
        assert!(coupled_simulate(&params(), &p2, &p3, init, stop, 1).is_err());
    }
}

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::graph::SocialGraph;
use crate::error::{Error, Result};
use crate::model::{ModelParams, NewsDynamics, Tag, WarningPolicy};
use crate::sim::{
    record_trace, run_outcome, run_paths, InitialState, MonteCarloSummary, Population, SimMode,
    SimulationTrace, StopRule,
};

/// Unread copies held by graph nodes. A node may hold several copies, one
/// per delivery.
struct GraphPopulation<'g> {
    graph: &'g SocialGraph,
    holders: [Vec<u32>; 2],
    share: [f64; 2],
}

fn slot(tag: Tag) -> usize {
    usize::from(tag == Tag::Fake)
}

impl<'g> GraphPopulation<'g> {
    fn new(graph: &'g SocialGraph, params: &ModelParams, seeds: &[(u32, Tag)]) -> Result<Self> {
        if seeds.is_empty() {
            return Err(Error::param("init_nodes", "need at least one initial node"));
        }
        let mut holders = [Vec::new(), Vec::new()];
        for &(node, tag) in seeds {
            if node as usize >= graph.node_count() {
                return Err(Error::param(
                    "init_nodes",
                    format!("node {node} not in graph of {} nodes", graph.node_count()),
                ));
            }
            holders[slot(tag)].push(node);
        }
        Ok(GraphPopulation {
            graph,
            holders,
            share: [params.eta(), params.eta() * params.eta_c()],
        })
    }
}

impl Population for GraphPopulation<'_> {
    fn counts(&self) -> (u64, u64) {
        (self.holders[1].len() as u64, self.holders[0].len() as u64)
    }

    /// Each out-neighbour of the reader receives a copy independently with
    /// the share probability, so the number forwarded is `Bin(deg, eta)`
    /// over distinct neighbours.
    fn wake_and_share(
        &mut self,
        waker: Tag,
        index: u64,
        tag: Tag,
        rng: &mut ChaCha8Rng,
    ) -> Result<u64> {
        let reader = self.holders[slot(waker)].swap_remove(index as usize);
        let p = self.share[slot(tag)];
        let out = &mut self.holders[slot(tag)];
        let before = out.len();
        for &friend in self.graph.out_neighbors(reader) {
            if rng.random::<f64>() < p {
                out.push(friend);
            }
        }
        Ok((out.len() - before) as u64)
    }
}

fn counts_of(seeds: &[(u32, Tag)]) -> Result<InitialState> {
    let x = seeds.iter().filter(|s| s.1 == Tag::Fake).count() as u64;
    InitialState::new(x, seeds.len() as u64 - x)
}

/// Simulates spreading over `graph`: the event logic matches
/// [`simulate`](crate::sim::simulate) but a reader forwards to its own
/// out-neighbours. The degree model of `params` is not used.
///
/// `seeds` lists the initial copies as `(dense node index, tag)`.
pub fn network_simulate(
    graph: &SocialGraph,
    params: &ModelParams,
    policy: &WarningPolicy,
    seeds: &[(u32, Tag)],
    stop: StopRule,
    seed: u64,
) -> Result<SimulationTrace> {
    let dynamics = NewsDynamics::new(params, policy)?;
    let mut population = GraphPopulation::new(graph, params, seeds)?;
    let init = counts_of(seeds)?;
    record_trace(
        &mut population,
        &dynamics,
        init,
        stop,
        seed,
        0,
        SimMode::Network,
    )
}

/// Independent network paths, path `i` on stream `i` of `base_seed`.
pub fn network_monte_carlo(
    graph: &SocialGraph,
    params: &ModelParams,
    policy: &WarningPolicy,
    seeds: &[(u32, Tag)],
    n_paths: usize,
    stop: StopRule,
    base_seed: u64,
) -> Result<MonteCarloSummary> {
    let dynamics = NewsDynamics::new(params, policy)?;
    stop.validate()?;
    GraphPopulation::new(graph, params, seeds)?;
    run_paths(n_paths, base_seed, |stream| {
        let mut population = GraphPopulation::new(graph, params, seeds)?;
        run_outcome(&mut population, &dynamics, stop, base_seed, stream)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DegreeModel;
    use crate::network::parse_edge_list;
    use crate::sim::embedded_chain_stats;

    fn star(k: u32) -> SocialGraph {
        let edges: Vec<_> = (1..=k).map(|v| (0, v)).collect();
        SocialGraph::from_dense_edges(k + 1, &edges).unwrap()
    }

    #[test]
    fn star_full_share() {
        let g = star(6);
        let p = ModelParams::new(1.0, 0.5, 0.25, 1.0, DegreeModel::constant(1)).unwrap();
        let pol = WarningPolicy::new(1.0, 1.0, 0.05).unwrap();
        let tr =
            network_simulate(&g, &p, &pol, &[(0, Tag::Fake)], StopRule::MaxEvents(1), 5).unwrap();
        let e = tr.events[0];
        assert_eq!(e.offspring, 6);
        if e.tagged_fake {
            assert_eq!((e.x, e.y), (6, 0));
        } else {
            assert_eq!((e.x, e.y), (0, 6));
        }
    }

    #[test]
    fn isolated_seed_dies_immediately() {
        let g = star(3);
        let p = ModelParams::new(1.0, 0.5, 0.25, 1.0, DegreeModel::constant(1)).unwrap();
        let pol = WarningPolicy::new(1.0, 1.0, 0.05).unwrap();
        let tr =
            network_simulate(&g, &p, &pol, &[(2, Tag::Real)], StopRule::MaxEvents(10), 5).unwrap();
        assert_eq!(tr.extinction_epoch, Some(1));
        assert!(
            network_simulate(&g, &p, &pol, &[(9, Tag::Real)], StopRule::MaxEvents(10), 5).is_err()
        );
    }

    #[test]
    fn network_traces_satisfy_recursions() {
        let mut text = String::new();
        for v in 0..200u32 {
            for d in 1..=12 {
                text.push_str(&format!("{v} {}\n", (v * 7 + d * 13) % 200));
            }
        }
        let g = parse_edge_list(text.as_bytes(), "ring").unwrap();
        let p = ModelParams::new(0.1, 0.9, 0.45, 0.3, DegreeModel::constant(1)).unwrap();
        let pol = WarningPolicy::new(1.0, 1.0, 0.05).unwrap();
        let tr = network_simulate(
            &g,
            &p,
            &pol,
            &[(0, Tag::Real), (1, Tag::Fake)],
            StopRule::MaxEvents(5000),
            2,
        )
        .unwrap();
        assert_eq!(tr.mode, SimMode::Network);
        let stats = embedded_chain_stats(&tr).unwrap();
        assert!(stats.max_recursion_error < 1e-9);
        for e in &tr.events {
            assert!(e.offspring <= 12);
        }
        let again = network_simulate(
            &g,
            &p,
            &pol,
            &[(0, Tag::Real), (1, Tag::Fake)],
            StopRule::MaxEvents(5000),
            2,
        )
        .unwrap();
        assert_eq!(tr, again);
    }
}

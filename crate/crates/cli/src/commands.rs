use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use tagcast::config::Scenario;
use tagcast::network::{self, SocialGraph, CACHE_MAGIC};
use tagcast::ode::{self, OdeState};
use tagcast::optimizer::{self, DesignProblem, StepSchedule};
use tagcast::sim::{self, InitialState, StopRule};
use tagcast::{
    eigenvector_check, limit_summary, performance, validate_regime, Error, NewsDynamics, Result,
    Tag, WarningPolicy,
};

use crate::{Command, Mode, ScenarioArgs};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

fn emit(value: &Value, out: Option<&PathBuf>) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("JSON values serialise");
    match out {
        Some(path) => {
            let mut f = create(path)?;
            writeln!(f, "{text}")
                .and_then(|_| f.flush())
                .map_err(io_err(path))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            match writeln!(stdout, "{text}").and_then(|_| stdout.flush()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Error::Io {
                    path: PathBuf::from("<stdout>"),
                    source: e,
                }),
                _ => Ok(()),
            }
        }
    }
}

fn write_with<F>(path: &Path, write: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let mut f = create(path)?;
    write(&mut f).and_then(|_| f.flush()).map_err(io_err(path))
}

fn load(args: &ScenarioArgs) -> Result<Scenario> {
    Scenario::load(&args.scenario, &args.overrides)
}

fn warn_regime(scenario: &Scenario, verbose: u8) -> Result<Option<Value>> {
    let Some(pair) = scenario.pair() else {
        return Ok(None);
    };
    let report = validate_regime(&pair, false)?;
    if verbose > 0 {
        for f in report.failures() {
            eprintln!("warning: regime check `{}` failed: {}", f.name, f.detail);
        }
    }
    Ok(Some(
        serde_json::to_value(&report).expect("report serialises"),
    ))
}

fn load_graph(path: &Path, subsample: Option<usize>, seed: u64) -> Result<SocialGraph> {
    let mut head = [0u8; 8];
    let is_cache = File::open(path)
        .and_then(|mut f| f.read(&mut head))
        .map_err(io_err(path))?
        == 8
        && &head == CACHE_MAGIC;
    let graph = if is_cache {
        network::read_cache(path)?
    } else {
        network::load_edge_list(path)?
    };
    match subsample {
        Some(k) => graph.induced_subgraph(k, seed),
        None => Ok(graph),
    }
}

fn parse_range(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::Config(format!("--c-range `{spec}` is not START:STOP:STEP"));
    let parts: Vec<f64> = spec
        .split(':')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| bad())?;
    let [start, stop, step] = parts[..] else {
        return Err(bad());
    };
    if step.is_nan() || step <= 0.0 || stop < start {
        return Err(bad());
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| start + i as f64 * step).collect())
}

pub fn run(command: Command, verbose: u8) -> Result<()> {
    match command {
        Command::Solve { scenario, out } => solve(&scenario, out.as_ref(), verbose),
        Command::Simulate {
            scenario,
            paths,
            events,
            horizon,
            seed,
            mode,
            graph,
            subsample,
            init_fake,
            init_real,
            trace,
            out,
        } => {
            let stop = match (events, horizon) {
                (_, Some(t)) => StopRule::Horizon(t),
                (Some(n), None) => StopRule::MaxEvents(n),
                (None, None) => StopRule::MaxEvents(100_000),
            };
            let opts = SimulateOpts {
                paths,
                stop,
                seed,
                mode,
                graph,
                subsample,
                init_fake,
                init_real,
                trace,
                out,
            };
            simulate(&scenario, opts, verbose)
        }
        Command::Optimize {
            scenario,
            c,
            c_range,
            kappa0,
            w0,
            sweep_points,
            csv,
            out,
        } => {
            let schedule = StepSchedule::Harmonic { kappa0 };
            let sc = load(&scenario)?;
            warn_regime(&sc, verbose)?;
            let pair = sc.require_pair()?;
            if let Some(range) = c_range {
                let cs = parse_range(&range)?;
                let points = optimizer::optimal_curve(&pair, &cs, &schedule)?;
                if let Some(path) = &csv {
                    write_with(path, |f| optimizer::write_curve_csv(&points, f))?;
                }
                return emit(&json!({ "curve": points }), out.as_ref());
            }
            let c = c
                .or(sc.c)
                .ok_or_else(|| Error::Config("no tolerance: pass --c or set `c`".into()))?;
            let problem = DesignProblem::new(pair, c)?;
            let feas = optimizer::feasibility(&problem)?;
            feas.ensure()?;
            let result = optimizer::optimize(&problem, &schedule, w0)?;
            let grid = optimizer::feasible_grid(&problem, sweep_points)?;
            let table = optimizer::sweep(&problem, &grid)?;
            if let Some(path) = &csv {
                write_with(path, |f| table.write_csv(f))?;
            }
            if verbose > 0 {
                eprintln!(
                    "descent: {} iterations, converged = {}, warm start = {}",
                    result.iterations, result.converged, result.warm_started
                );
            }
            let mut value = serde_json::to_value(&result).expect("result serialises");
            if let Value::Object(map) = &mut value {
                map.remove("iterates");
                map.insert("iterate_count".into(), json!(result.iterates.len()));
                map.insert("feasibility".into(), json!(feas));
                map.insert("baseline".into(), json!(table.baseline));
            }
            emit(&value, out.as_ref())
        }
        Command::Ode {
            scenario,
            psi0,
            theta0,
            horizon,
            step,
            attractor,
            delta,
            grid,
            csv,
            out,
        } => {
            let sc = load(&scenario)?;
            let params = sc.primary()?;
            let dynamics = NewsDynamics::new(params, &sc.policy)?;
            if attractor {
                let report = ode::attractor_sweep(&dynamics, delta, grid, horizon, step)?;
                let verdict = report.ensure_converged(ode::CONVERGENCE_TOL);
                let mut value = serde_json::to_value(&report).expect("report serialises");
                if let Value::Object(map) = &mut value {
                    map.remove("starts");
                    map.insert("starts_checked".into(), json!(report.starts.len()));
                }
                emit(&value, out.as_ref())?;
                return verdict;
            }
            let limit = limit_summary(params, &sc.policy)?;
            let start = match (psi0, theta0) {
                (Some(p), Some(t)) => OdeState::new(p, t),
                _ => OdeState::new(limit.psi_star, limit.theta_star),
            };
            let traj = ode::integrate(start, &dynamics, horizon, step)?;
            let mut max_drift = 0.0f64;
            for s in &traj.states {
                let d = ode::drift(s, &dynamics)?;
                max_drift = max_drift.max(d.d_psi.abs().max(d.d_theta.abs()));
            }
            if let Some(path) = &csv {
                write_with(path, |f| traj.write_csv(f))?;
            }
            let end = traj.last();
            emit(
                &json!({
                    "start": start,
                    "end": end,
                    "equilibrium": { "psi": limit.psi_star, "theta": limit.theta_star, "beta": limit.beta_star },
                    "terminal_distance": (end.psi - limit.psi_star).hypot(end.theta - limit.theta_star),
                    "max_drift": max_drift,
                    "absorbed": traj.absorbed,
                    "steps": traj.states.len() - 1,
                }),
                out.as_ref(),
            )
        }
        Command::Couple {
            scenario,
            w1,
            b1,
            w2,
            b2,
            events,
            seed,
            init_fake,
            init_real,
            out,
        } => {
            let sc = load(&scenario)?;
            let params = sc.primary()?;
            let eps = sc.policy.epsilon();
            let p1 = WarningPolicy::new(w1, b1, eps)?;
            let p2 = WarningPolicy::new(w2, b2, eps)?;
            let init = InitialState::new(init_fake, init_real)?;
            let c =
                sim::coupled_simulate(params, &p1, &p2, init, StopRule::MaxEvents(events), seed)?;
            emit(
                &json!({
                    "dominance_verified": true,
                    "checked_events": c.checked_events,
                    "seed": seed,
                    "first": { "policy": p1, "final": c.first.final_state, "extinction_epoch": c.first.extinction_epoch },
                    "second": { "policy": p2, "final": c.second.final_state, "extinction_epoch": c.second.extinction_epoch },
                }),
                out.as_ref(),
            )
        }
        Command::Ingest {
            graph,
            cache,
            subsample,
            seed,
            out,
        } => {
            let g = load_graph(&graph, subsample, seed)?;
            if let Some(path) = &cache {
                network::write_cache(&g, path)?;
            }
            let stats = network::degree_stats(&g);
            if verbose > 0 {
                eprintln!(
                    "{} nodes, {} edges, mean out-degree {:.4}, undirected mean {:.4}",
                    stats.nodes, stats.edges, stats.mean, stats.undirected_mean
                );
            }
            emit(
                &json!({
                    "source": graph,
                    "cleaning": g.cleaning(),
                    "stats": stats,
                }),
                out.as_ref(),
            )
        }
    }
}

fn solve(args: &ScenarioArgs, out: Option<&PathBuf>, verbose: u8) -> Result<()> {
    let sc = load(args)?;
    let regime = warn_regime(&sc, verbose)?;
    let params = sc.primary()?;
    let limit = limit_summary(params, &sc.policy)?;
    let eigen = if params.is_reluctant() {
        None
    } else {
        Some(eigenvector_check(&limit, params, &sc.policy)?)
    };
    let mut value = json!({
        "model": if params.is_reluctant() { "reluctant" } else { "base" },
        "beta_star": limit.beta_star,
        "psi_star": limit.psi_star,
        "theta_star": limit.theta_star,
        "v_y": limit.v_y,
        "residual": limit.residual,
        "eigenvector_residual": eigen,
    });
    if let (Some(pair), Value::Object(map)) = (sc.pair(), &mut value) {
        let perf = performance(&pair)?;
        map.insert("psi1".into(), json!(perf.psi1));
        map.insert("psi2".into(), json!(perf.psi2));
        map.insert("regime".into(), regime.unwrap_or(Value::Null));
    }
    emit(&value, out)
}

struct SimulateOpts {
    paths: usize,
    stop: StopRule,
    seed: u64,
    mode: Mode,
    graph: Option<PathBuf>,
    subsample: Option<usize>,
    init_fake: u64,
    init_real: u64,
    trace: Option<PathBuf>,
    out: Option<PathBuf>,
}

fn simulate(args: &ScenarioArgs, o: SimulateOpts, verbose: u8) -> Result<()> {
    o.stop.validate()?;
    let sc = load(args)?;
    let params = sc.primary()?;
    let policy = sc.policy;
    let init = InitialState::new(o.init_fake, o.init_real)?;
    let limit = limit_summary(params, &policy)?;

    let (summary, first, graph_info) = match o.mode {
        Mode::DegreeModel => {
            let summary = sim::monte_carlo(params, &policy, o.paths, init, o.stop, o.seed)?;
            let first = match &o.trace {
                Some(_) => Some(sim::simulate(params, &policy, init, o.stop, o.seed)?),
                None => None,
            };
            (summary, first, Value::Null)
        }
        Mode::Network => {
            let path = o
                .graph
                .as_ref()
                .ok_or_else(|| Error::Config("--mode network needs --graph".into()))?;
            let graph = load_graph(path, o.subsample, o.seed)?;
            // initial copies sit on the highest out-degree node
            let hub = (0..graph.node_count() as u32)
                .max_by_key(|&v| (graph.out_degree(v), std::cmp::Reverse(v)))
                .expect("graph has nodes");
            let seeds: Vec<(u32, Tag)> = std::iter::repeat_n((hub, Tag::Fake), init.x as usize)
                .chain(std::iter::repeat_n((hub, Tag::Real), init.y as usize))
                .collect();
            let summary = network::network_monte_carlo(
                &graph, params, &policy, &seeds, o.paths, o.stop, o.seed,
            )?;
            let first = match &o.trace {
                Some(_) => Some(network::network_simulate(
                    &graph, params, &policy, &seeds, o.stop, o.seed,
                )?),
                None => None,
            };
            let stats = network::degree_stats(&graph);
            let info = json!({
                "nodes": stats.nodes,
                "edges": stats.edges,
                "mean_out_degree": stats.mean,
                "undirected_mean": stats.undirected_mean,
                "seed_node": graph.original_id(hub),
            });
            (summary, first, info)
        }
    };
    if let (Some(path), Some(tr)) = (&o.trace, &first) {
        write_with(path, |f| tr.write_csv(f))?;
    }
    if verbose > 0 {
        eprintln!(
            "{} of {} paths survived",
            summary.survivors, summary.n_paths
        );
    }
    if summary.insufficient_survival {
        eprintln!("warning: no path survived; no beta statistics");
    }
    let mode = match o.mode {
        Mode::DegreeModel => "degree-model",
        Mode::Network => "network",
    };
    emit(
        &json!({
            "mode": mode,
            "seed": o.seed,
            "stop": o.stop,
            "init": init,
            "prediction": limit,
            "graph": graph_info,
            "summary": summary,
        }),
        o.out.as_ref(),
    )
}

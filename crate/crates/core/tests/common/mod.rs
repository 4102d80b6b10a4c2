//! Fixtures and independent oracles shared by the integration suites.
#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sensornet::aggregation::{collect_round, deduplicate, SuppressionIndex};
use sensornet::model::{Label, Node, NodeId, NodeRole, Position, Round, SensorReading, StageName};
use sensornet::pipeline::{
    run_pipeline, ClassifierModel, FeatureVector, HistoryIndex, PipelineConfig,
};
use sensornet::scenario::{Mode, SubSinkChoice};
use sensornet::topology::Topology;
use sensornet::Error;
use sensornet::ScenarioConfig;

macro_rules! check {
    ($cond:expr) => {
        if !$cond {
            return Err(format!("check failed: {}", stringify!($cond)));
        }
    };
}

macro_rules! check_eq {
    ($a:expr, $b:expr) => {{
        let (a, b) = (&$a, &$b);
        if a != b {
            return Err(format!(
                "{} != {}: {:?} vs {:?}",
                stringify!($a),
                stringify!($b),
                a,
                b
            ));
        }
    }};
}

/// 100-node 10x10 grid, 10 m spacing, radius 15, 200 rounds, 0.5 J.
pub fn s1(seed: u64, mode: Mode) -> ScenarioConfig {
    ScenarioConfig {
        seed,
        mode,
        ..ScenarioConfig::default()
    }
}

/// sensor 0 -> aggregator 1 -> sub-sink 2 -> sink 3, 10 m apart.
pub fn line_fixture(rounds: u64) -> ScenarioConfig {
    ScenarioConfig {
        node_count: 4,
        grid_columns: 4,
        comm_radius: 10.0,
        sink: NodeId(3),
        sub_sink: SubSinkChoice::Node(NodeId(2)),
        aggregators: vec![NodeId(1)],
        rounds,
        dedup_enabled: false,
        pipeline: PipelineConfig::permissive(),
        ..ScenarioConfig::default()
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Values on a coarse grid so that exact duplicates and near misses are common.
pub fn random_round(
    rng: &mut ChaCha8Rng,
    round: Round,
    sources: usize,
    max_len: usize,
) -> Vec<SensorReading> {
    let len = rng.random_range(0..=max_len);
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        let source = NodeId(rng.random_range(0..sources));
        let value = f64::from(rng.random_range(0..40u32)) * 0.05 + 20.0;
        let r = SensorReading::new(source, round, value);
        out.push(r);
        if rng.random_bool(0.3) {
            out.push(r);
        }
    }
    out.shuffle(rng);
    out
}

/// Quadratic-scan redundancy removal. `last` maps a source to the value
/// forwarded for it in the most recent earlier round.
pub fn dedup_oracle(
    readings: &[SensorReading],
    eps: f64,
    last: &BTreeMap<NodeId, f64>,
) -> Vec<SensorReading> {
    let mut kept = Vec::new();
    for (i, r) in readings.iter().enumerate() {
        let seen_before = readings[..i]
            .iter()
            .any(|q| q.source == r.source && q.round == r.round && q.value == r.value);
        if seen_before {
            continue;
        }
        let suppressed = last
            .get(&r.source)
            .is_some_and(|&v| (r.value - v).abs() <= eps);
        if !suppressed {
            kept.push(*r);
        }
    }
    sorted(kept)
}

pub fn sorted(mut v: Vec<SensorReading>) -> Vec<SensorReading> {
    v.sort_by(|a, b| {
        (a.round, a.source)
            .cmp(&(b.round, b.source))
            .then(a.value.partial_cmp(&b.value).unwrap())
    });
    v
}

pub fn sample_keys(v: &[SensorReading]) -> Vec<(Round, NodeId, u64)> {
    let mut k: Vec<_> = v
        .iter()
        .map(|r| (r.round, r.source, r.value.to_bits()))
        .collect();
    k.sort();
    k
}

/// Random geometric graph of `n` nodes in a 30 m square, node 0 the sink.
pub fn random_nodes(rng: &mut ChaCha8Rng, n: usize) -> Vec<Node> {
    (0..n)
        .map(|i| Node {
            id: NodeId(i),
            role: if i == 0 {
                NodeRole::Sink
            } else {
                NodeRole::Sensor
            },
            position: Position::new(rng.random_range(0.0..30.0), rng.random_range(0.0..30.0)),
        })
        .collect()
}

pub fn adjacency(nodes: &[Node], radius: f64) -> Vec<Vec<bool>> {
    nodes
        .iter()
        .map(|a| {
            nodes
                .iter()
                .map(|b| a.id != b.id && a.position.distance(&b.position) <= radius)
                .collect()
        })
        .collect()
}

/// All-pairs hop counts over `alive` nodes by Floyd-Warshall.
pub fn floyd_warshall(adj: &[Vec<bool>], alive: &[bool]) -> Vec<Vec<Option<usize>>> {
    let n = adj.len();
    let mut d = vec![vec![None; n]; n];
    for i in 0..n {
        if !alive[i] {
            continue;
        }
        d[i][i] = Some(0);
        for j in 0..n {
            if adj[i][j] && alive[j] {
                d[i][j] = Some(1);
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if let (Some(a), Some(b)) = (d[i][k], d[k][j]) {
                    if d[i][j].is_none_or(|c| a + b < c) {
                        d[i][j] = Some(a + b);
                    }
                }
            }
        }
    }
    d
}

/// Every simple path from `from` to `to` over alive nodes.
pub fn all_paths(adj: &[Vec<bool>], alive: &[bool], from: usize, to: usize) -> Vec<Vec<usize>> {
    fn walk(
        adj: &[Vec<bool>],
        alive: &[bool],
        to: usize,
        path: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        let cur = *path.last().unwrap();
        if cur == to {
            out.push(path.clone());
            return;
        }
        for next in 0..adj.len() {
            if adj[cur][next] && alive[next] && !path.contains(&next) {
                path.push(next);
                walk(adj, alive, to, path, out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    if alive[from] && alive[to] {
        walk(adj, alive, to, &mut vec![from], &mut out);
    }
    out
}

/// The shortest path that is lexicographically smallest by node id.
pub fn preferred_path(
    adj: &[Vec<bool>],
    alive: &[bool],
    from: usize,
    to: usize,
) -> Option<Vec<usize>> {
    let paths = all_paths(adj, alive, from, to);
    let best = paths.iter().map(Vec::len).min()?;
    paths.into_iter().filter(|p| p.len() == best).min()
}

/// Where a reading leaves the staircase, computed straight from the stage
/// definitions, or `None` if it survives. Every stage judges a reading on
/// its own value, so fates do not depend on the other readings.
pub fn pipeline_fate(
    r: &SensorReading,
    cfg: &PipelineConfig,
    history_mean: Option<f64>,
    context: &[SensorReading],
    neighbors: &BTreeSet<NodeId>,
    model: &ClassifierModel,
) -> Option<StageName> {
    let w = cfg.band_hi - cfg.band_lo;
    let over = (r.value - cfg.band_hi) / w;
    let under = (cfg.band_lo - r.value) / w;
    let score = if over > 0.0 {
        over
    } else if under > 0.0 {
        under
    } else {
        0.0
    };
    if score < cfg.theta_p {
        return Some(StageName::Priority);
    }
    if r.value < cfg.range_lo || r.value > cfg.range_hi {
        return Some(StageName::Opinion);
    }
    let dev = history_mean.map_or(w, |m| (r.value - m).abs());
    if dev < cfg.delta_o {
        return Some(StageName::Opinion);
    }
    let peers: Vec<f64> = context
        .iter()
        .filter(|p| neighbors.contains(&p.source))
        .map(|p| p.value)
        .collect();
    let ratio = if peers.is_empty() {
        1.0
    } else {
        peers
            .iter()
            .filter(|v| (*v - r.value).abs() <= cfg.tau_r)
            .count() as f64
            / peers.len() as f64
    };
    if ratio < cfg.quorum_q {
        return Some(StageName::Review);
    }
    if score >= cfg.rescue_score {
        return None;
    }
    let x: FeatureVector = [score, dev / w, ratio, (r.value - cfg.band_lo) / w, 1.0];
    let dot: f64 = model.weights.iter().zip(&x).map(|(a, b)| a * b).sum();
    if dot > 0.0 {
        None
    } else {
        Some(StageName::Sentiment)
    }
}

/// 20 examples separable by the first feature: forward iff it exceeds 0.5.
pub fn separable_fixture() -> Vec<(FeatureVector, Label)> {
    (0..20)
        .map(|i| {
            let forward = i % 2 == 0;
            let p = if forward {
                0.6 + 0.02 * i as f64
            } else {
                0.4 - 0.015 * i as f64
            };
            let x = [p, 0.1 * (i % 5) as f64, 0.5, 0.3 + 0.01 * i as f64, 1.0];
            (
                x,
                if forward {
                    Label::Forward
                } else {
                    Label::Discard
                },
            )
        })
        .collect()
}

pub fn dedup_sequence_matches_oracle(seed: u64, eps: f64, rounds: u64) -> Result<(), String> {
    let mut rng = rng(seed);
    let mut index = SuppressionIndex::new();
    let mut last: BTreeMap<NodeId, f64> = BTreeMap::new();
    for round in 0..rounds {
        let input = random_round(&mut rng, round, 5, 12);
        let expected = dedup_oracle(&input, eps, &last);

        let before = index.clone();
        let snap = collect_round(input.clone(), round).unwrap();
        let out = deduplicate(snap, eps, &mut index);
        check_eq!(sample_keys(&out.readings), sample_keys(&expected));
        check_eq!(out.input_count(), input.len());

        let mut shuffled = input.clone();
        shuffled.shuffle(&mut rng);
        let mut idx = before.clone();
        let again = deduplicate(collect_round(shuffled, round).unwrap(), eps, &mut idx);
        check_eq!(&again.readings, &out.readings);

        let mut idx = index.clone();
        let twice = deduplicate(
            collect_round(out.readings.clone(), round).unwrap(),
            eps,
            &mut idx,
        );
        check_eq!(&twice.readings, &out.readings);
        check_eq!(twice.redundancy_removed, 0);

        // within a round the canonically last retained value is the one remembered
        for r in &out.readings {
            last.insert(r.source, r.value);
        }
    }
    Ok(())
}

pub fn routes_match_oracle(seed: u64) -> Result<(), String> {
    let mut rng = rng(seed);
    let n = rng.random_range(2..=8);
    let nodes = random_nodes(&mut rng, n);
    let adj = adjacency(&nodes, 15.0);
    let all_alive = vec![true; n];
    let dist = floyd_warshall(&adj, &all_alive);
    let topo = Topology::from_nodes(nodes, 15.0);
    let unreachable = (0..n).find(|&i| dist[0][i].is_none());
    let mut topo = match (topo, unreachable) {
        (Ok(t), None) => t,
        (Err(Error::DisconnectedTopology { node }), Some(u)) => {
            check_eq!(node, NodeId(u));
            return Ok(());
        }
        (other, u) => return Err(format!("{other:?} with unreachable {u:?}")),
    };

    let mut alive = all_alive;
    for _ in 0..2 {
        let dist = floyd_warshall(&adj, &alive);
        for from in 0..n {
            let bfs = topo.hop_distances(NodeId(from));
            for to in 0..n {
                check_eq!(bfs[to], dist[from][to]);
                let route = topo.shortest_route(NodeId(from), NodeId(to));
                match preferred_path(&adj, &alive, from, to) {
                    Some(p) => {
                        let got: Vec<usize> = route.unwrap().iter().map(|v| v.0).collect();
                        check_eq!(got.len() - 1, dist[from][to].unwrap());
                        check_eq!(got, p);
                    }
                    None => check!(route.is_err()),
                }
            }
        }
        // kill one non-sink node and check again
        if n > 2 {
            let victim = rng.random_range(1..n);
            alive[victim] = false;
            topo.mark_dead(NodeId(victim));
            topo.refresh_routes();
        }
    }
    Ok(())
}

pub fn random_pipeline_case(
    seed: u64,
) -> (
    Vec<SensorReading>,
    BTreeMap<NodeId, BTreeSet<NodeId>>,
    HistoryIndex,
    PipelineConfig,
    ClassifierModel,
) {
    let mut rng = rng(seed);
    let sources = 8;
    let mut readings = Vec::new();
    for s in 0..sources {
        if rng.random_bool(0.8) {
            let v: f64 = if rng.random_bool(0.5) {
                rng.random_range(15.0..35.0)
            } else {
                rng.random_range(-60.0..100.0)
            };
            readings.push(SensorReading::new(NodeId(s), 7, v));
        }
    }
    let mut neighbors: BTreeMap<NodeId, BTreeSet<NodeId>> = BTreeMap::new();
    for a in 0..sources {
        for b in a + 1..sources {
            if rng.random_bool(0.4) {
                neighbors.entry(NodeId(a)).or_default().insert(NodeId(b));
                neighbors.entry(NodeId(b)).or_default().insert(NodeId(a));
            }
        }
    }
    let cfg = PipelineConfig {
        theta_p: rng.random_range(0.0..0.5),
        delta_o: rng.random_range(0.0..3.0),
        tau_r: rng.random_range(0.0..10.0),
        quorum_q: rng.random_range(0.0..1.0),
        rescue_score: rng.random_range(0.0..2.0),
        window_w: rng.random_range(1..6),
        ..PipelineConfig::default()
    };
    let mut history = HistoryIndex::new();
    for s in 0..sources {
        for _ in 0..rng.random_range(0..6) {
            history.push(NodeId(s), rng.random_range(15.0..35.0), cfg.window_w);
        }
    }
    let model = ClassifierModel::new(std::array::from_fn(|_| rng.random_range(-1.0..1.0)));
    (readings, neighbors, history, cfg, model)
}

pub fn pipeline_matches_oracle(seed: u64) -> Result<(), String> {
    let (readings, neighbors, mut history, cfg, model) = random_pipeline_case(seed);
    let snapshot = collect_round(readings.clone(), 7).unwrap();
    let before = history.clone();
    let out = run_pipeline(
        &snapshot,
        &readings,
        &neighbors,
        &cfg,
        Some(&model),
        &mut history,
    )
    .unwrap();

    let mut expected_kept = Vec::new();
    let mut expected_drops = [0usize; 4];
    for r in &readings {
        let n = neighbors.get(&r.source).cloned().unwrap_or_default();
        match pipeline_fate(r, &cfg, before.mean(r.source), &readings, &n, &model) {
            None => expected_kept.push(*r),
            Some(stage) => expected_drops[stage.index()] += 1,
        }
    }
    check_eq!(sample_keys(&out.intelligent), sample_keys(&expected_kept));
    for stage in StageName::ALL {
        check_eq!(out.trace.drops_at(stage), expected_drops[stage.index()]);
    }
    check!(out.trace.telescopes());
    check_eq!(out.intelligent.len() + out.dropped.len(), readings.len());

    // history grows by forwarded readings only
    for s in 0..8 {
        let forwarded: Vec<f64> = out
            .intelligent
            .iter()
            .filter(|r| r.source == NodeId(s))
            .map(|r| r.value)
            .collect();
        let mut expect: Vec<f64> = before
            .values(NodeId(s))
            .map(|h| h.iter().copied().collect())
            .unwrap_or_default();
        expect.extend(forwarded);
        let keep_from = expect.len().saturating_sub(cfg.window_w);
        let got: Vec<f64> = history
            .values(NodeId(s))
            .map(|h| h.iter().copied().collect())
            .unwrap_or_default();
        check_eq!(got, expect[keep_from..].to_vec());
    }
    Ok(())
}

/// Scaling every value-like quantity by a power of two leaves the
/// dimensionless scores, and therefore every decision, unchanged.
pub fn scaling_is_invariant(seed: u64, exp: i32) -> Result<(), String> {
    let (readings, neighbors, history, cfg, model) = random_pipeline_case(seed);
    let k = 2f64.powi(exp);
    let scaled_cfg = PipelineConfig {
        band_lo: cfg.band_lo * k,
        band_hi: cfg.band_hi * k,
        range_lo: cfg.range_lo * k,
        range_hi: cfg.range_hi * k,
        delta_o: cfg.delta_o * k,
        tau_r: cfg.tau_r * k,
        ..cfg
    };
    let scaled: Vec<SensorReading> = readings
        .iter()
        .map(|r| SensorReading::new(r.source, r.round, r.value * k))
        .collect();
    let mut scaled_history = HistoryIndex::new();
    for s in 0..8 {
        if let Some(h) = history.values(NodeId(s)) {
            for v in h {
                scaled_history.push(NodeId(s), v * k, cfg.window_w);
            }
        }
    }
    let mut h1 = history.clone();
    let a = run_pipeline(
        &collect_round(readings.clone(), 7).unwrap(),
        &readings,
        &neighbors,
        &cfg,
        Some(&model),
        &mut h1,
    )
    .unwrap();
    let b = run_pipeline(
        &collect_round(scaled.clone(), 7).unwrap(),
        &scaled,
        &neighbors,
        &scaled_cfg,
        Some(&model),
        &mut scaled_history,
    )
    .unwrap();
    check_eq!(&a.trace, &{
        let mut t = b.trace.clone();
        for d in &mut t.drops {
            d.value /= k;
        }
        t
    });
    let a_src: Vec<NodeId> = a.intelligent.iter().map(|r| r.source).collect();
    let b_src: Vec<NodeId> = b.intelligent.iter().map(|r| r.source).collect();
    check_eq!(a_src, b_src);
    Ok(())
}

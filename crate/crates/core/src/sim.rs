//! Discrete-event simulation of a [`RosGraph`] that emits timed trace entries.
//!
//! Topics are broadcast to every subscriber; services run request, execution
//! and answer in sequence. Each node is a single FIFO server for both service
//! executions and topic handlers. Message latency along a path is the sum of
//! the latencies configured for the two edges it crosses (missing edges add
//! nothing). Interactions started before the horizon always run to
//! completion.
//!
//! Randomness comes from ChaCha8 seeded with `seed_from_u64(seed)`, so traces
//! are reproducible across platforms.

use crate::graph::{RosGraph, VertexId, VertexKind};
use crate::ratio;
use crate::stats::{parse_bin_list, IntervalHistogram, StatsError};
use crate::trace::{TraceEvent, TraceKind};
use rand::distributions::{Distribution, Open01};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashMap};
use thiserror::Error;

pub type SimRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A duration source: a fixed number of seconds or a histogram.
#[derive(Debug, Clone, PartialEq)]
pub enum Dist {
    Constant(f64),
    Histogram(IntervalHistogram),
}

impl Dist {
    pub fn sample(&self, rng: &mut SimRng) -> f64 {
        match self {
            Dist::Constant(c) => *c,
            Dist::Histogram(h) => draw_duration(h, rng),
        }
    }
}

/// Picks a bin by probability, then a point uniformly inside its open
/// interval, in seconds.
pub fn draw_duration(hist: &IntervalHistogram, rng: &mut SimRng) -> f64 {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut chosen = hist.bins.len() - 1;
    for (i, b) in hist.bins.iter().enumerate() {
        acc += ratio::to_f64(&b.prob);
        if u < acc {
            chosen = i;
            break;
        }
    }
    let b = &hist.bins[chosen];
    let (lo, hi) = (b.lo as f64 * hist.unit, b.hi as f64 * hist.unit);
    loop {
        let f: f64 = Open01.sample(rng);
        let v = lo + (hi - lo) * f;
        if v > lo && v < hi {
            return v;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScenarioConfig {
    /// Keyed by `"from->to"` edge labels.
    pub comm: BTreeMap<String, Dist>,
    /// Execution time per service label.
    pub exec: BTreeMap<String, Dist>,
    /// Keyed by `"topic@subscriber"`.
    pub handler: BTreeMap<String, Dist>,
    pub publish_period: BTreeMap<String, f64>,
    /// Keyed by `"service@caller"`.
    pub request_period: BTreeMap<String, f64>,
    pub horizon: f64,
    pub seed: u64,
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("scenario references unknown graph element {0:?}")]
    UnknownElement(String),
    #[error("scenario: {0}")]
    Invalid(String),
    #[error("scenario distribution {key}: {source}")]
    Dist { key: String, source: StatsError },
}

#[derive(Deserialize)]
#[serde(untagged)]
enum DistDoc {
    Constant(f64),
    Hist { unit: Option<f64>, bins: Vec<(u32, u32, serde_json::Value)> },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    #[serde(default)]
    comm: BTreeMap<String, DistDoc>,
    #[serde(default)]
    exec: BTreeMap<String, DistDoc>,
    #[serde(default)]
    handler: BTreeMap<String, DistDoc>,
    #[serde(default)]
    publish_period: BTreeMap<String, f64>,
    #[serde(default)]
    request_period: BTreeMap<String, f64>,
    horizon: f64,
    #[serde(default)]
    seed: u64,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let doc: ScenarioDoc =
            serde_json::from_str(text).map_err(|e| SimError::Parse(e.to_string()))?;
        let conv = |m: BTreeMap<String, DistDoc>| -> Result<BTreeMap<String, Dist>, SimError> {
            m.into_iter()
                .map(|(k, d)| {
                    let dist = match d {
                        DistDoc::Constant(c) => Dist::Constant(c),
                        DistDoc::Hist { unit, bins } => Dist::Histogram(
                            parse_bin_list(unit.unwrap_or(1.0), &bins)
                                .map_err(|e| SimError::Dist { key: k.clone(), source: e })?,
                        ),
                    };
                    Ok((k, dist))
                })
                .collect()
        };
        Ok(ScenarioConfig {
            comm: conv(doc.comm)?,
            exec: conv(doc.exec)?,
            handler: conv(doc.handler)?,
            publish_period: doc.publish_period,
            request_period: doc.request_period,
            horizon: doc.horizon,
            seed: doc.seed,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Job {
    Publish { topic: VertexId, publisher: VertexId },
    Deliver { topic: VertexId, publisher: VertexId, subscriber: VertexId, corr: u64 },
    Request { service: VertexId, caller: VertexId },
    Arrive { service: VertexId, caller: VertexId, provider: VertexId, corr: u64 },
}

struct Scheduled {
    t: f64,
    seq: u64,
    job: Job,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Scheduled {}
impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Scheduled {
    // Reversed: BinaryHeap is a max-heap.
    fn cmp(&self, other: &Self) -> Ordering {
        other.t.total_cmp(&self.t).then(other.seq.cmp(&self.seq))
    }
}

struct Resolved<'a> {
    graph: &'a RosGraph,
    comm: HashMap<(VertexId, VertexId), &'a Dist>,
    exec: HashMap<VertexId, &'a Dist>,
    handler: HashMap<(VertexId, VertexId), &'a Dist>,
    request: Vec<(VertexId, VertexId, f64)>,
}

fn resolve<'a>(graph: &'a RosGraph, cfg: &'a ScenarioConfig) -> Result<Resolved<'a>, SimError> {
    let unknown = |k: &str| SimError::UnknownElement(k.to_string());
    let any_vertex = |name: &str| {
        [VertexKind::Node, VertexKind::Topic, VertexKind::Service]
            .into_iter()
            .find_map(|k| graph.find(k, name))
    };
    let pair = |key: &str, sep: &str| -> Result<(String, String), SimError> {
        key.split_once(sep)
            .map(|(a, b)| (a.trim().to_string(), b.trim().to_string()))
            .ok_or_else(|| unknown(key))
    };
    if !(cfg.horizon > 0.0 && cfg.horizon.is_finite()) {
        return Err(SimError::Invalid(format!("horizon must be positive, got {}", cfg.horizon)));
    }
    let mut r = Resolved {
        graph,
        comm: HashMap::new(),
        exec: HashMap::new(),
        handler: HashMap::new(),
        request: Vec::new(),
    };
    for (key, d) in &cfg.comm {
        let (a, b) = pair(key, "->")?;
        let (a, b) = (any_vertex(&a).ok_or_else(|| unknown(key))?, any_vertex(&b).ok_or_else(|| unknown(key))?);
        if !graph.has_edge(a, b) {
            return Err(unknown(key));
        }
        r.comm.insert((a, b), d);
    }
    for (key, d) in &cfg.exec {
        let s = graph.find(VertexKind::Service, key).ok_or_else(|| unknown(key))?;
        r.exec.insert(s, d);
    }
    for (key, d) in &cfg.handler {
        let (t, n) = pair(key, "@")?;
        let t = graph.find(VertexKind::Topic, &t).ok_or_else(|| unknown(key))?;
        let n = graph.find(VertexKind::Node, &n).ok_or_else(|| unknown(key))?;
        if !graph.has_edge(t, n) {
            return Err(unknown(key));
        }
        r.handler.insert((t, n), d);
    }
    for (key, &period) in &cfg.publish_period {
        let t = graph.find(VertexKind::Topic, key).ok_or_else(|| unknown(key))?;
        if !(period > 0.0) {
            return Err(SimError::Invalid(format!("publish period of {key} must be positive")));
        }
        let pubs = graph.publishers(t);
        if pubs.is_empty() {
            return Err(SimError::Invalid(format!("topic {key} has no publisher")));
        }
    }
    for (key, &period) in &cfg.request_period {
        let (s, c) = pair(key, "@")?;
        let s = graph.find(VertexKind::Service, &s).ok_or_else(|| unknown(key))?;
        let c = graph.find(VertexKind::Node, &c).ok_or_else(|| unknown(key))?;
        if !graph.has_edge(s, c) {
            return Err(unknown(key));
        }
        if !(period > 0.0) {
            return Err(SimError::Invalid(format!("request period of {key} must be positive")));
        }
        if graph.providers(s).is_empty() {
            return Err(SimError::Invalid(format!("service {} has no provider", graph.label(s).unwrap_or_default())));
        }
        r.request.push((s, c, period));
    }
    Ok(r)
}

impl Resolved<'_> {
    fn latency(&self, a: (VertexId, VertexId), b: (VertexId, VertexId), rng: &mut SimRng) -> f64 {
        let mut total = 0.0;
        for e in [a, b] {
            if let Some(d) = self.comm.get(&e) {
                total += d.sample(rng);
            }
        }
        total
    }

    fn name(&self, v: VertexId) -> String {
        self.graph.label(v).unwrap_or_default().to_string()
    }
}

/// Runs the scenario and returns the trace sorted by timestamp, ties broken
/// by correlation id and then event kind.
pub fn simulate(graph: &RosGraph, config: &ScenarioConfig) -> Result<Vec<TraceEvent>, SimError> {
    let r = resolve(graph, config)?;
    let mut rng = rng_from_seed(config.seed);
    let mut queue = BinaryHeap::new();
    let mut seq = 0u64;
    let mut push = |queue: &mut BinaryHeap<Scheduled>, t: f64, job: Job| {
        queue.push(Scheduled { t, seq, job });
        seq += 1;
    };

    let mut publishers: Vec<(VertexId, VertexId, f64)> = Vec::new();
    for (key, &period) in &config.publish_period {
        let t = graph.find(VertexKind::Topic, key).expect("resolved");
        for p in graph.publishers(t) {
            publishers.push((t, p, period));
        }
    }
    let periods: HashMap<(VertexId, VertexId), f64> =
        publishers.iter().map(|(t, p, period)| ((*t, *p), *period)).collect();
    for (t, p, _) in &publishers {
        push(&mut queue, 0.0, Job::Publish { topic: *t, publisher: *p });
    }
    let req_periods: HashMap<(VertexId, VertexId), f64> =
        r.request.iter().map(|(s, c, period)| ((*s, *c), *period)).collect();
    for (s, c, _) in &r.request {
        push(&mut queue, 0.0, Job::Request { service: *s, caller: *c });
    }

    let mut corr: HashMap<VertexId, u64> = HashMap::new();
    let mut free_at: HashMap<VertexId, f64> = HashMap::new();
    let mut out = Vec::new();
    let zero = Dist::Constant(0.0);
    let emit = |out: &mut Vec<TraceEvent>, kind, caller: VertexId, channel: VertexId, observer: VertexId, corr_id, t| {
        out.push(TraceEvent {
            kind,
            caller: r.name(caller),
            channel: r.name(channel),
            observer: r.name(observer),
            corr_id,
            t,
        });
    };

    while let Some(Scheduled { t, job, .. }) = queue.pop() {
        match job {
            Job::Publish { topic, publisher } => {
                let id = next_corr(&mut corr, topic);
                emit(&mut out, TraceKind::TopPub, publisher, topic, publisher, id, t);
                for sub in graph.subscribers(topic) {
                    let lat = r.latency((publisher, topic), (topic, sub), &mut rng);
                    push(&mut queue, t + lat, Job::Deliver { topic, publisher, subscriber: sub, corr: id });
                }
                let next = t + periods[&(topic, publisher)];
                if next < config.horizon {
                    push(&mut queue, next, Job::Publish { topic, publisher });
                }
            }
            Job::Deliver { topic, publisher, subscriber, corr: id } => {
                emit(&mut out, TraceKind::TopRecv, publisher, topic, subscriber, id, t);
                let work = r.handler.get(&(topic, subscriber)).copied().unwrap_or(&zero).sample(&mut rng);
                let free = free_at.entry(subscriber).or_insert(0.0);
                let done = free.max(t) + work;
                *free = done;
                emit(&mut out, TraceKind::TopDone, publisher, topic, subscriber, id, done);
            }
            Job::Request { service, caller } => {
                let id = next_corr(&mut corr, service);
                emit(&mut out, TraceKind::SvcReqSend, caller, service, caller, id, t);
                let provider = graph.providers(service)[0];
                let lat = r.latency((service, caller), (provider, service), &mut rng);
                push(&mut queue, t + lat, Job::Arrive { service, caller, provider, corr: id });
                let next = t + req_periods[&(service, caller)];
                if next < config.horizon {
                    push(&mut queue, next, Job::Request { service, caller });
                }
            }
            Job::Arrive { service, caller, provider, corr: id } => {
                emit(&mut out, TraceKind::SvcReqRecv, caller, service, provider, id, t);
                let work = r.exec.get(&service).copied().unwrap_or(&zero).sample(&mut rng);
                let free = free_at.entry(provider).or_insert(0.0);
                let answered = free.max(t) + work;
                *free = answered;
                emit(&mut out, TraceKind::SvcAnsSend, caller, service, provider, id, answered);
                let lat = r.latency((provider, service), (service, caller), &mut rng);
                emit(&mut out, TraceKind::SvcAnsRecv, caller, service, caller, id, answered + lat);
            }
        }
    }
    out.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.corr_id.cmp(&b.corr_id)).then(a.kind.cmp(&b.kind)));
    Ok(out)
}

fn next_corr(corr: &mut HashMap<VertexId, u64>, channel: VertexId) -> u64 {
    let c = corr.entry(channel).or_insert(0);
    let id = *c;
    *c += 1;
    id
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::load_graph;
    use crate::ratio::Prob;
    use crate::stats::Bin;
    use crate::trace::{pair_events, write_trace};

    fn service_graph() -> RosGraph {
        load_graph(
            r#"{"nodes":["nav","planner"],"services":["plan"],
                "edges":[{"from":"planner","to":"plan"},{"from":"plan","to":"nav"}]}"#,
        )
        .unwrap()
    }

    fn topic_graph() -> RosGraph {
        load_graph(
            r#"{"nodes":["receiver","processor"],"topics":["images"],
                "edges":[{"from":"receiver","to":"images"},{"from":"images","to":"processor"}]}"#,
        )
        .unwrap()
    }

    pub(crate) fn case_hist() -> IntervalHistogram {
        IntervalHistogram {
            unit: 1.0,
            bins: vec![
                Bin { lo: 3, hi: 4, prob: Prob::new(3, 10) },
                Bin { lo: 4, hi: 6, prob: Prob::new(6, 10) },
                Bin { lo: 6, hi: 8, prob: Prob::new(1, 10) },
            ],
        }
    }

    #[test]
    fn one_service_call_with_constants() {
        let cfg = ScenarioConfig {
            comm: [("plan->nav".to_string(), Dist::Constant(0.1))].into(),
            exec: [("plan".to_string(), Dist::Constant(0.5))].into(),
            request_period: [("plan@nav".to_string(), 10.0)].into(),
            horizon: 1.0,
            ..Default::default()
        };
        let trace = simulate(&service_graph(), &cfg).unwrap();
        let times: Vec<f64> = trace.iter().map(|e| e.t).collect();
        assert_eq!(trace.len(), 4);
        for (got, want) in times.iter().zip([0.0, 0.1, 0.6, 0.7]) {
            assert!((got - want).abs() < 1e-12, "{times:?}");
        }
        assert_eq!(trace[1].observer, "planner");
        assert_eq!(trace[3].kind, TraceKind::SvcAnsRecv);
    }

    #[test]
    fn periodic_topic() {
        let cfg = ScenarioConfig {
            comm: [("images->processor".to_string(), Dist::Constant(0.05))].into(),
            publish_period: [("images".to_string(), 1.0)].into(),
            horizon: 2.5,
            ..Default::default()
        };
        let trace = simulate(&topic_graph(), &cfg).unwrap();
        let pubs = trace.iter().filter(|e| e.kind == TraceKind::TopPub).count();
        let recv: Vec<f64> =
            trace.iter().filter(|e| e.kind == TraceKind::TopRecv).map(|e| e.t).collect();
        assert_eq!(pubs, 3);
        for (got, want) in recv.iter().zip([0.05, 1.05, 2.05]) {
            assert!((got - want).abs() < 1e-12);
        }
        let ids: Vec<u64> = trace.iter().filter(|e| e.kind == TraceKind::TopPub).map(|e| e.corr_id).collect();
        assert_eq!(ids, vec![0, 1, 2]);
    }

    #[test]
    fn same_seed_same_bytes() {
        let cfg = ScenarioConfig {
            comm: [("images->processor".to_string(), Dist::Histogram(case_hist()))].into(),
            handler: [("images@processor".to_string(), Dist::Constant(0.5))].into(),
            publish_period: [("images".to_string(), 2.0)].into(),
            horizon: 200.0,
            seed: 9,
            ..Default::default()
        };
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_trace(&simulate(&topic_graph(), &cfg).unwrap(), &mut a).unwrap();
        write_trace(&simulate(&topic_graph(), &cfg).unwrap(), &mut b).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn draws_stay_in_their_bin() {
        let h = IntervalHistogram {
            unit: 1.0,
            bins: vec![Bin { lo: 3, hi: 4, prob: Prob::new(1, 1) }],
        };
        let mut rng = rng_from_seed(1);
        for _ in 0..1000 {
            let v = draw_duration(&h, &mut rng);
            assert!(v > 3.0 && v < 4.0);
        }
    }

    #[test]
    fn fixed_seed_gives_fixed_draws() {
        let h = case_hist();
        let a: Vec<f64> = {
            let mut rng = rng_from_seed(42);
            (0..20).map(|_| draw_duration(&h, &mut rng)).collect()
        };
        let b: Vec<f64> = {
            let mut rng = rng_from_seed(42);
            (0..20).map(|_| draw_duration(&h, &mut rng)).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn bin_frequencies_match_configuration() {
        let h = case_hist();
        let mut rng = rng_from_seed(42);
        let mut counts = [0usize; 3];
        let n = 10_000;
        for _ in 0..n {
            let v = draw_duration(&h, &mut rng);
            counts[h.bin_of(v).expect("inside a bin")] += 1;
        }
        for (c, p) in counts.iter().zip([0.3, 0.6, 0.1]) {
            assert!((*c as f64 / n as f64 - p).abs() <= 0.02, "{counts:?}");
        }
    }

    #[test]
    fn causal_order_and_complete_pairing() {
        let cfg = ScenarioConfig {
            comm: [
                ("plan->nav".to_string(), Dist::Histogram(case_hist())),
                ("planner->plan".to_string(), Dist::Constant(0.25)),
            ]
            .into(),
            exec: [("plan".to_string(), Dist::Histogram(case_hist()))].into(),
            request_period: [("plan@nav".to_string(), 3.0)].into(),
            horizon: 300.0,
            seed: 3,
            ..Default::default()
        };
        let trace = simulate(&service_graph(), &cfg).unwrap();
        let p = pair_events(&trace).unwrap();
        assert!(p.unpaired.is_empty());
        assert_eq!(p.negative_samples().count(), 0);
        assert_eq!(p.samples.len(), 3 * 100);
        assert!(trace.windows(2).all(|w| w[0].t <= w[1].t));
    }

    #[test]
    fn unknown_elements_are_rejected() {
        let cfg = ScenarioConfig {
            publish_period: [("nope".to_string(), 1.0)].into(),
            horizon: 1.0,
            ..Default::default()
        };
        assert!(matches!(simulate(&topic_graph(), &cfg), Err(SimError::UnknownElement(_))));
        let cfg = ScenarioConfig { horizon: 0.0, ..Default::default() };
        assert!(simulate(&topic_graph(), &cfg).is_err());
    }

    #[test]
    fn scenario_json() {
        let cfg = ScenarioConfig::from_json(
            r#"{"comm":{"images->processor":{"unit":1,"bins":[[3,4,0.3],[4,6,0.6],[6,8,0.1]]}},
                "publish_period":{"images":10},"horizon":100,"seed":42}"#,
        )
        .unwrap();
        assert_eq!(cfg.comm["images->processor"], Dist::Histogram(case_hist()));
        assert_eq!(cfg.seed, 42);
    }
}

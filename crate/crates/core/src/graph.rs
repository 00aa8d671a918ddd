//! Tri-partite topology of nodes, topics and services.
//!
//! Edges only ever join a node with a channel (topic or service); their role
//! follows from the endpoint kinds:
//!
//! | from    | to      | role              |
//! |---------|---------|-------------------|
//! | node    | topic   | publish           |
//! | topic   | node    | subscribe         |
//! | node    | service | provide-service   |
//! | service | node    | request-service   |
//!
//! Data descriptors (sequences of class names) attach either to a topic or to
//! one of the two node/service edges.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VertexId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VertexKind {
    Node,
    Topic,
    Service,
}

impl fmt::Display for VertexKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VertexKind::Node => "node",
            VertexKind::Topic => "topic",
            VertexKind::Service => "service",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeKind {
    Publish,
    Subscribe,
    ProvideService,
    RequestService,
}

impl EdgeKind {
    /// The role of an edge between vertices of the given kinds, if legal.
    pub fn classify(from: VertexKind, to: VertexKind) -> Option<EdgeKind> {
        use VertexKind::*;
        match (from, to) {
            (Node, Topic) => Some(EdgeKind::Publish),
            (Topic, Node) => Some(EdgeKind::Subscribe),
            (Node, Service) => Some(EdgeKind::ProvideService),
            (Service, Node) => Some(EdgeKind::RequestService),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub from: VertexId,
    pub to: VertexId,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DescriptorSite {
    Topic(VertexId),
    Edge(VertexId, VertexId),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RosGraph {
    pub nodes: BTreeSet<VertexId>,
    pub topics: BTreeSet<VertexId>,
    pub services: BTreeSet<VertexId>,
    pub edges: Vec<Edge>,
    pub descriptors: BTreeMap<DescriptorSite, Vec<String>>,
    pub labels: BTreeMap<VertexId, String>,
    /// Class name to its parent class, if any.
    pub classes: BTreeMap<String, Option<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GraphDiagnostic {
    OverlappingKinds(VertexId),
    UnknownVertex(VertexId),
    InvalidEdge { from: VertexId, to: VertexId },
    EdgeKindMismatch { from: VertexId, to: VertexId },
    MissingLabel(VertexId),
    DuplicateLabel { kind: VertexKind, label: String },
    DescriptorSiteInvalid(DescriptorSite),
    UnknownClass { site: DescriptorSite, class: String },
    ClassCycle(String),
}

impl fmt::Display for GraphDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphDiagnostic::OverlappingKinds(v) => write!(f, "vertex {} has more than one kind", v.0),
            GraphDiagnostic::UnknownVertex(v) => write!(f, "vertex {} is not declared", v.0),
            GraphDiagnostic::InvalidEdge { from, to } => write!(
                f,
                "edge {}->{}: edge endpoints must alternate node/channel",
                from.0, to.0
            ),
            GraphDiagnostic::EdgeKindMismatch { from, to } => {
                write!(f, "edge {}->{} carries the wrong kind", from.0, to.0)
            }
            GraphDiagnostic::MissingLabel(v) => write!(f, "vertex {} has no label", v.0),
            GraphDiagnostic::DuplicateLabel { kind, label } => {
                write!(f, "{kind} label {label:?} is used more than once")
            }
            GraphDiagnostic::DescriptorSiteInvalid(site) => {
                write!(f, "descriptor attached to invalid site {site:?}")
            }
            GraphDiagnostic::UnknownClass { site, class } => {
                write!(f, "descriptor at {site:?} names unknown class {class:?}")
            }
            GraphDiagnostic::ClassCycle(c) => write!(f, "class {c:?} is its own ancestor"),
        }
    }
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("graph parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("unknown vertex {0:?}")]
    UnknownVertex(String),
    #[error("vertex name {0:?} is ambiguous; qualify it as node:, topic: or service:")]
    AmbiguousVertex(String),
    #[error("malformed descriptor site {0:?}")]
    BadSite(String),
    #[error("edge {from} -> {to}: edge endpoints must alternate node/channel")]
    InvalidEdge { from: String, to: String },
    #[error("invalid graph: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<GraphDiagnostic>),
}

impl RosGraph {
    pub fn kind_of(&self, v: VertexId) -> Option<VertexKind> {
        if self.nodes.contains(&v) {
            Some(VertexKind::Node)
        } else if self.topics.contains(&v) {
            Some(VertexKind::Topic)
        } else if self.services.contains(&v) {
            Some(VertexKind::Service)
        } else {
            None
        }
    }

    pub fn label(&self, v: VertexId) -> Option<&str> {
        self.labels.get(&v).map(String::as_str)
    }

    /// Finds a vertex of `kind` by label.
    pub fn find(&self, kind: VertexKind, label: &str) -> Option<VertexId> {
        let set = match kind {
            VertexKind::Node => &self.nodes,
            VertexKind::Topic => &self.topics,
            VertexKind::Service => &self.services,
        };
        set.iter().copied().find(|v| self.label(*v) == Some(label))
    }

    pub fn has_edge(&self, from: VertexId, to: VertexId) -> bool {
        self.edges.iter().any(|e| e.from == from && e.to == to)
    }

    /// Adds an edge, deriving its role from the endpoint kinds.
    pub fn add_edge(&mut self, from: VertexId, to: VertexId) -> Option<EdgeKind> {
        let kind = EdgeKind::classify(self.kind_of(from)?, self.kind_of(to)?)?;
        self.edges.push(Edge { from, to, kind });
        Some(kind)
    }

    pub fn publishers(&self, topic: VertexId) -> Vec<VertexId> {
        self.edges
            .iter()
            .filter(|e| e.to == topic && e.kind == EdgeKind::Publish)
            .map(|e| e.from)
            .collect()
    }

    pub fn subscribers(&self, topic: VertexId) -> Vec<VertexId> {
        self.edges
            .iter()
            .filter(|e| e.from == topic && e.kind == EdgeKind::Subscribe)
            .map(|e| e.to)
            .collect()
    }

    pub fn providers(&self, service: VertexId) -> Vec<VertexId> {
        self.edges
            .iter()
            .filter(|e| e.to == service && e.kind == EdgeKind::ProvideService)
            .map(|e| e.from)
            .collect()
    }

    pub fn requesters(&self, service: VertexId) -> Vec<VertexId> {
        self.edges
            .iter()
            .filter(|e| e.from == service && e.kind == EdgeKind::RequestService)
            .map(|e| e.to)
            .collect()
    }

    fn site_name(&self, site: &DescriptorSite) -> String {
        match site {
            DescriptorSite::Topic(t) => self.vertex_ref(*t),
            DescriptorSite::Edge(a, b) => format!("{}->{}", self.vertex_ref(*a), self.vertex_ref(*b)),
        }
    }

    /// Name used when writing: plain label unless another kind shares it.
    fn vertex_ref(&self, v: VertexId) -> String {
        let label = self.label(v).unwrap_or_default();
        let kind = self.kind_of(v);
        let shared = [VertexKind::Node, VertexKind::Topic, VertexKind::Service]
            .into_iter()
            .filter(|k| Some(*k) != kind)
            .any(|k| self.find(k, label).is_some());
        match (shared, kind) {
            (true, Some(k)) => format!("{k}:{label}"),
            _ => label.to_string(),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphDoc {
    #[serde(default)]
    nodes: Vec<String>,
    #[serde(default)]
    topics: Vec<String>,
    #[serde(default)]
    services: Vec<String>,
    #[serde(default)]
    edges: Vec<EdgeDoc>,
    #[serde(default)]
    descriptors: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    classes: BTreeMap<String, Option<String>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeDoc {
    from: String,
    to: String,
}

/// Reads the JSON graph document. Endpoints and descriptor sites refer to
/// vertices by label; a label shared between kinds must be qualified as
/// `node:NAME`, `topic:NAME` or `service:NAME`.
pub fn load_graph(document: &str) -> Result<RosGraph, GraphError> {
    let doc: GraphDoc = serde_json::from_str(document).map_err(|e| GraphError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let mut g = RosGraph::default();
    let mut next = 0u32;
    for (kind, names) in [
        (VertexKind::Node, &doc.nodes),
        (VertexKind::Topic, &doc.topics),
        (VertexKind::Service, &doc.services),
    ] {
        for name in names {
            let id = VertexId(next);
            next += 1;
            match kind {
                VertexKind::Node => g.nodes.insert(id),
                VertexKind::Topic => g.topics.insert(id),
                VertexKind::Service => g.services.insert(id),
            };
            g.labels.insert(id, name.clone());
        }
    }
    for e in &doc.edges {
        let from = resolve(&g, &e.from)?;
        let to = resolve(&g, &e.to)?;
        if g.add_edge(from, to).is_none() {
            return Err(GraphError::InvalidEdge { from: e.from.clone(), to: e.to.clone() });
        }
    }
    for (site, classes) in &doc.descriptors {
        let site_id = match site.split_once("->") {
            Some((a, b)) => DescriptorSite::Edge(resolve(&g, a.trim())?, resolve(&g, b.trim())?),
            None => match resolve(&g, site)? {
                v if g.topics.contains(&v) => DescriptorSite::Topic(v),
                _ => return Err(GraphError::BadSite(site.clone())),
            },
        };
        g.descriptors.insert(site_id, classes.clone());
    }
    g.classes = doc.classes;
    let diags = validate_graph(&g);
    if diags.is_empty() {
        Ok(g)
    } else {
        Err(GraphError::Invalid(diags))
    }
}

fn resolve(g: &RosGraph, name: &str) -> Result<VertexId, GraphError> {
    let qualified = name.split_once(':').and_then(|(k, rest)| {
        let kind = match k {
            "node" => VertexKind::Node,
            "topic" => VertexKind::Topic,
            "service" => VertexKind::Service,
            _ => return None,
        };
        Some((kind, rest))
    });
    if let Some((kind, rest)) = qualified {
        return g.find(kind, rest).ok_or_else(|| GraphError::UnknownVertex(name.to_string()));
    }
    let hits: Vec<VertexId> = [VertexKind::Node, VertexKind::Topic, VertexKind::Service]
        .into_iter()
        .filter_map(|k| g.find(k, name))
        .collect();
    match hits.as_slice() {
        [v] => Ok(*v),
        [] => Err(GraphError::UnknownVertex(name.to_string())),
        _ => Err(GraphError::AmbiguousVertex(name.to_string())),
    }
}

/// Serializes to the same JSON schema [`load_graph`] reads.
pub fn write_graph(g: &RosGraph) -> String {
    let names = |set: &BTreeSet<VertexId>| {
        set.iter().map(|v| g.label(*v).unwrap_or_default().to_string()).collect()
    };
    let doc = GraphDoc {
        nodes: names(&g.nodes),
        topics: names(&g.topics),
        services: names(&g.services),
        edges: g
            .edges
            .iter()
            .map(|e| EdgeDoc { from: g.vertex_ref(e.from), to: g.vertex_ref(e.to) })
            .collect(),
        descriptors: g.descriptors.iter().map(|(s, c)| (g.site_name(s), c.clone())).collect(),
        classes: g.classes.clone(),
    };
    serde_json::to_string_pretty(&doc).expect("graph document serializes")
}

/// Checks every structural invariant; an empty result means the graph is
/// well formed.
pub fn validate_graph(g: &RosGraph) -> Vec<GraphDiagnostic> {
    let mut out = Vec::new();
    let sets = [&g.nodes, &g.topics, &g.services];
    let mut seen = BTreeSet::new();
    for set in sets {
        for v in set {
            if !seen.insert(*v) {
                out.push(GraphDiagnostic::OverlappingKinds(*v));
            }
        }
    }
    for e in &g.edges {
        let (Some(a), Some(b)) = (g.kind_of(e.from), g.kind_of(e.to)) else {
            for v in [e.from, e.to] {
                if g.kind_of(v).is_none() {
                    out.push(GraphDiagnostic::UnknownVertex(v));
                }
            }
            continue;
        };
        match EdgeKind::classify(a, b) {
            None => out.push(GraphDiagnostic::InvalidEdge { from: e.from, to: e.to }),
            Some(k) if k != e.kind => {
                out.push(GraphDiagnostic::EdgeKindMismatch { from: e.from, to: e.to })
            }
            Some(_) => {}
        }
    }
    for v in &seen {
        if g.labels.get(v).is_none_or(|l| l.is_empty()) {
            out.push(GraphDiagnostic::MissingLabel(*v));
        }
    }
    for (kind, set) in [
        (VertexKind::Node, &g.nodes),
        (VertexKind::Topic, &g.topics),
        (VertexKind::Service, &g.services),
    ] {
        let mut labels = BTreeSet::new();
        for v in set {
            if let Some(l) = g.labels.get(v) {
                if !labels.insert(l) {
                    out.push(GraphDiagnostic::DuplicateLabel { kind, label: l.clone() });
                }
            }
        }
    }
    let known: BTreeSet<&String> =
        g.classes.keys().chain(g.classes.values().flatten()).collect();
    for (site, classes) in &g.descriptors {
        let ok = match site {
            DescriptorSite::Topic(t) => g.topics.contains(t),
            DescriptorSite::Edge(a, b) => {
                g.has_edge(*a, *b)
                    && matches!(
                        (g.kind_of(*a), g.kind_of(*b)),
                        (Some(VertexKind::Node), Some(VertexKind::Service))
                            | (Some(VertexKind::Service), Some(VertexKind::Node))
                    )
            }
        };
        if !ok {
            out.push(GraphDiagnostic::DescriptorSiteInvalid(site.clone()));
        }
        for c in classes {
            if !known.contains(c) {
                out.push(GraphDiagnostic::UnknownClass { site: site.clone(), class: c.clone() });
            }
        }
    }
    for start in g.classes.keys() {
        let mut cur = g.classes.get(start).cloned().flatten();
        let mut steps = 0;
        while let Some(c) = cur {
            if &c == start {
                out.push(GraphDiagnostic::ClassCycle(start.clone()));
                break;
            }
            steps += 1;
            if steps > g.classes.len() {
                break;
            }
            cur = g.classes.get(&c).cloned().flatten();
        }
    }
    out
}

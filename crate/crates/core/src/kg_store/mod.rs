//! Per-subject knowledge graphs.
//!
//! Each subject owns one [`KnowledgeGraph`] holding three disjoint node kinds
//! (text entities, concept entities, hierarchy nodes) and four edge kinds:
//!
//! | edge         | from       | to         |
//! |--------------|------------|------------|
//! | `Fact(r)`    | text       | text       |
//! | `IsA`        | text       | concept    |
//! | `PartOf`     | hierarchy  | hierarchy  |
//! | `IncludeIn`  | concept    | hierarchy  |
//!
//! Graphs live in a [`GraphRegistry`]; a graph handle only ever sees its own
//! nodes, so queries against one subject cannot surface another subject's
//! content.

mod snapshot;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::BufRead;
use std::sync::Arc;

use indexmap::IndexSet;
use parking_lot::RwLock;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::normalize_label;

pub use snapshot::{export_graph, import_graph, write_snapshot, SNAPSHOT_FORMAT, SNAPSHOT_VERSION};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KgError {
    #[error("subject `{0}` is already registered")]
    DuplicateSubject(String),
    #[error("subject label is empty")]
    EmptySubject,
    #[error("subject `{0}` is not registered")]
    UnknownSubject(String),
    #[error("label is empty after normalization")]
    EmptyLabel,
    #[error("{edge} cannot connect {from:?} -> {to:?}")]
    KindMismatch { edge: &'static str, from: NodeKind, to: NodeKind },
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("hierarchy violation: {0}")]
    HierarchyViolation(String),
    #[error("malformed snapshot at line {line}: {reason}")]
    MalformedSnapshot { line: usize, reason: String },
    #[error("cannot import: subject `{0}` already has a graph")]
    SubjectCollision(String),
    #[error("document `{doc}` belongs to subject `{owner}`, not `{requested}`")]
    CrossSubjectDocument { doc: String, owner: String, requested: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl KgError {
    pub fn code(&self) -> &'static str {
        match self {
            KgError::DuplicateSubject(_) => "DuplicateSubject",
            KgError::EmptySubject => "EmptySubject",
            KgError::UnknownSubject(_) => "UnknownSubject",
            KgError::EmptyLabel => "EmptyLabel",
            KgError::KindMismatch { .. } => "KindMismatch",
            KgError::UnknownNode(_) => "UnknownNode",
            KgError::HierarchyViolation(_) => "HierarchyViolation",
            KgError::MalformedSnapshot { .. } => "MalformedSnapshot",
            KgError::SubjectCollision(_) => "SubjectCollision",
            KgError::CrossSubjectDocument { .. } => "CrossSubjectDocument",
            KgError::Io(_) => "IoError",
        }
    }
}

pub type Result<T, E = KgError> = std::result::Result<T, E>;

/// Node identifier, unique within one subject graph.
///
/// Ordering is "natural": a shared alphabetic prefix is compared first, then
/// the numeric suffix, so `n2 < n10`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Self {
        NodeId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    fn numeric_parts(&self) -> (&str, Option<u128>) {
        let prefix_len = self.0.trim_end_matches(|c: char| c.is_ascii_digit()).len();
        let (prefix, digits) = self.0.split_at(prefix_len);
        (prefix, digits.parse().ok())
    }
}

impl Ord for NodeId {
    fn cmp(&self, other: &Self) -> Ordering {
        let (pa, na) = self.numeric_parts();
        let (pb, nb) = other.numeric_parts();
        pa.cmp(pb).then(na.cmp(&nb)).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for NodeId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SubjectId(String);

impl SubjectId {
    pub fn new(label: &str) -> Result<Self> {
        let trimmed = label.trim();
        if trimmed.is_empty() {
            return Err(KgError::EmptySubject);
        }
        Ok(SubjectId(trimmed.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SubjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Text,
    Concept,
    Hierarchy,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Text => "text",
            NodeKind::Concept => "concept",
            NodeKind::Hierarchy => "hierarchy",
        }
    }
}

/// Where a node's evidence came from: document id and segment ordinal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SourceRef {
    pub doc_id: String,
    pub segment: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
    /// Normalized label.
    pub label: String,
    /// Original surface strings seen for this node.
    pub raw_labels: BTreeSet<String>,
    pub source_refs: Vec<SourceRef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Fact(String),
    IsA,
    PartOf,
    IncludeIn,
}

impl EdgeKind {
    pub fn tag(&self) -> EdgeKindTag {
        match self {
            EdgeKind::Fact(_) => EdgeKindTag::Fact,
            EdgeKind::IsA => EdgeKindTag::IsA,
            EdgeKind::PartOf => EdgeKindTag::PartOf,
            EdgeKind::IncludeIn => EdgeKindTag::IncludeIn,
        }
    }

    pub fn relation(&self) -> Option<&str> {
        match self {
            EdgeKind::Fact(r) => Some(r),
            _ => None,
        }
    }
}

/// Edge kind without the fact label, for filtering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKindTag {
    Fact,
    IsA,
    PartOf,
    IncludeIn,
}

impl EdgeKindTag {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeKindTag::Fact => "fact",
            EdgeKindTag::IsA => "is_a",
            EdgeKindTag::PartOf => "part_of",
            EdgeKindTag::IncludeIn => "include_in",
        }
    }

    /// Required (from, to) node kinds.
    pub fn endpoint_kinds(self) -> (NodeKind, NodeKind) {
        match self {
            EdgeKindTag::Fact => (NodeKind::Text, NodeKind::Text),
            EdgeKindTag::IsA => (NodeKind::Text, NodeKind::Concept),
            EdgeKindTag::PartOf => (NodeKind::Hierarchy, NodeKind::Hierarchy),
            EdgeKindTag::IncludeIn => (NodeKind::Concept, NodeKind::Hierarchy),
        }
    }
}

/// The non-fact link kinds accepted by [`KnowledgeGraph::assert_link`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LinkKind {
    IsA,
    PartOf,
    IncludeIn,
}

impl From<LinkKind> for EdgeKind {
    fn from(k: LinkKind) -> Self {
        match k {
            LinkKind::IsA => EdgeKind::IsA,
            LinkKind::PartOf => EdgeKind::PartOf,
            LinkKind::IncludeIn => EdgeKind::IncludeIn,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub kind: EdgeKind,
    pub from: NodeId,
    pub to: NodeId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    In,
    Out,
    Both,
}

#[derive(Debug, Clone, Default)]
pub struct KnowledgeGraph {
    subject: Option<SubjectId>,
    nodes: BTreeMap<NodeId, Node>,
    edges: IndexSet<Edge>,
    // (kind, normalized label) -> id, text and concept nodes only
    label_index: HashMap<(NodeKind, String), NodeId>,
    // normalized chapter path -> hierarchy node
    path_index: HashMap<Vec<String>, NodeId>,
    parent: HashMap<NodeId, NodeId>,
    out_adj: HashMap<NodeId, Vec<usize>>,
    in_adj: HashMap<NodeId, Vec<usize>>,
    next_id: u64,
}

impl PartialEq for KnowledgeGraph {
    /// Equality up to edge insertion order.
    fn eq(&self, other: &Self) -> bool {
        self.subject == other.subject
            && self.nodes == other.nodes
            && self.edges.len() == other.edges.len()
            && self.edges.iter().all(|e| other.edges.contains(e))
    }
}

impl KnowledgeGraph {
    pub fn new(subject: SubjectId) -> Self {
        KnowledgeGraph { subject: Some(subject), next_id: 1, ..Default::default() }
    }

    pub fn subject(&self) -> &SubjectId {
        self.subject.as_ref().expect("graph constructed without subject")
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: &NodeId) -> Option<&Node> {
        self.nodes.get(id)
    }

    fn require(&self, id: &NodeId) -> Result<&Node> {
        self.nodes.get(id).ok_or_else(|| KgError::UnknownNode(id.to_string()))
    }

    /// Nodes in NodeId order.
    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    /// Edges in insertion order.
    pub fn edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.iter()
    }

    pub fn contains_edge(&self, edge: &Edge) -> bool {
        self.edges.contains(edge)
    }

    pub fn count_nodes(&self, kind: NodeKind) -> usize {
        self.nodes.values().filter(|n| n.kind == kind).count()
    }

    pub fn count_edges(&self, tag: EdgeKindTag) -> usize {
        self.edges.iter().filter(|e| e.kind.tag() == tag).count()
    }

    /// Outgoing edges of `id` in insertion order.
    pub fn out_edges<'a>(&'a self, id: &NodeId) -> impl Iterator<Item = &'a Edge> + 'a {
        self.out_adj
            .get(id)
            .into_iter()
            .flatten()
            .map(move |&i| &self.edges[i])
    }

    /// Incoming edges of `id` in insertion order.
    pub fn in_edges<'a>(&'a self, id: &NodeId) -> impl Iterator<Item = &'a Edge> + 'a {
        self.in_adj
            .get(id)
            .into_iter()
            .flatten()
            .map(move |&i| &self.edges[i])
    }

    pub fn find_entity(&self, label: &str, kind: NodeKind) -> Option<&NodeId> {
        let norm = normalize_label(label);
        if kind == NodeKind::Hierarchy {
            return self.path_index.get(&vec![norm]);
        }
        self.label_index.get(&(kind, norm))
    }

    fn allocate_id(&mut self) -> NodeId {
        loop {
            let id = NodeId(format!("n{}", self.next_id));
            self.next_id += 1;
            if !self.nodes.contains_key(&id) {
                return id;
            }
        }
    }

    fn insert_node(&mut self, kind: NodeKind, label: String, raw: &str) -> NodeId {
        let id = self.allocate_id();
        let mut raw_labels = BTreeSet::new();
        raw_labels.insert(raw.to_string());
        self.nodes.insert(
            id.clone(),
            Node { id: id.clone(), kind, label, raw_labels, source_refs: Vec::new() },
        );
        id
    }

    /// Returns the node whose normalized label matches `surface_label` for
    /// this kind, creating it if needed. The surface form is recorded.
    ///
    /// Hierarchy nodes created this way are roots; use
    /// [`upsert_hierarchy_path`](Self::upsert_hierarchy_path) for nested
    /// chapters.
    pub fn upsert_entity(&mut self, surface_label: &str, kind: NodeKind) -> Result<NodeId> {
        if kind == NodeKind::Hierarchy {
            return self.upsert_hierarchy_path(&[surface_label]);
        }
        let norm = normalize_label(surface_label);
        if norm.is_empty() {
            return Err(KgError::EmptyLabel);
        }
        let key = (kind, norm);
        if let Some(id) = self.label_index.get(&key) {
            let id = id.clone();
            self.nodes
                .get_mut(&id)
                .expect("indexed node exists")
                .raw_labels
                .insert(surface_label.to_string());
            return Ok(id);
        }
        let id = self.insert_node(kind, key.1.clone(), surface_label);
        self.label_index.insert(key, id.clone());
        Ok(id)
    }

    /// Builds (or finds) the chain of hierarchy nodes for a chapter path such
    /// as `["Ch 3", "3.2"]`, linking each child to its parent with `PartOf`.
    /// Returns the leaf.
    pub fn upsert_hierarchy_path<S: AsRef<str>>(&mut self, path: &[S]) -> Result<NodeId> {
        if path.is_empty() {
            return Err(KgError::EmptyLabel);
        }
        let mut normalized = Vec::with_capacity(path.len());
        for raw in path {
            let norm = normalize_label(raw.as_ref());
            if norm.is_empty() {
                return Err(KgError::EmptyLabel);
            }
            normalized.push(norm);
        }
        let mut parent: Option<NodeId> = None;
        for depth in 0..normalized.len() {
            let key = normalized[..=depth].to_vec();
            let raw = path[depth].as_ref();
            let id = match self.path_index.get(&key) {
                Some(id) => {
                    let id = id.clone();
                    self.nodes.get_mut(&id).expect("indexed").raw_labels.insert(raw.to_string());
                    id
                }
                None => {
                    let id = self.insert_node(NodeKind::Hierarchy, normalized[depth].clone(), raw);
                    self.path_index.insert(key, id.clone());
                    if let Some(p) = &parent {
                        self.insert_edge_unchecked(Edge {
                            kind: EdgeKind::PartOf,
                            from: id.clone(),
                            to: p.clone(),
                        });
                        self.parent.insert(id.clone(), p.clone());
                    }
                    id
                }
            };
            parent = Some(id);
        }
        Ok(parent.expect("non-empty path"))
    }

    /// Records provenance on a node (deduplicated).
    pub fn add_source_ref(&mut self, id: &NodeId, source: SourceRef) -> Result<()> {
        let node = self.nodes.get_mut(id).ok_or_else(|| KgError::UnknownNode(id.to_string()))?;
        if !node.source_refs.contains(&source) {
            node.source_refs.push(source);
        }
        Ok(())
    }

    fn insert_edge_unchecked(&mut self, edge: Edge) -> bool {
        let (idx, inserted) = self.edges.insert_full(edge);
        if inserted {
            let e = &self.edges[idx];
            self.out_adj.entry(e.from.clone()).or_default().push(idx);
            self.in_adj.entry(e.to.clone()).or_default().push(idx);
        }
        inserted
    }

    /// Upserts `h` and `t` as text entities and adds the `Fact(r)` edge.
    /// Asserting an identical triple again is a no-op.
    pub fn assert_fact_triple(&mut self, h: &str, r: &str, t: &str) -> Result<Edge> {
        let relation = normalize_label(r);
        if relation.is_empty() || normalize_label(h).is_empty() || normalize_label(t).is_empty() {
            return Err(KgError::EmptyLabel);
        }
        let from = self.upsert_entity(h, NodeKind::Text)?;
        let to = self.upsert_entity(t, NodeKind::Text)?;
        let edge = Edge { kind: EdgeKind::Fact(relation), from, to };
        self.insert_edge_unchecked(edge.clone());
        Ok(edge)
    }

    /// Adds an `IsA`, `PartOf` or `IncludeIn` edge after checking endpoint
    /// kinds. `PartOf` additionally keeps the hierarchy a forest.
    pub fn assert_link(&mut self, kind: LinkKind, from: &NodeId, to: &NodeId) -> Result<Edge> {
        let edge_kind = EdgeKind::from(kind);
        let tag = edge_kind.tag();
        let from_kind = self.require(from)?.kind;
        let to_kind = self.require(to)?.kind;
        if (from_kind, to_kind) != tag.endpoint_kinds() {
            return Err(KgError::KindMismatch { edge: tag.as_str(), from: from_kind, to: to_kind });
        }
        let edge = Edge { kind: edge_kind, from: from.clone(), to: to.clone() };
        if self.edges.contains(&edge) {
            return Ok(edge);
        }
        if kind == LinkKind::PartOf {
            if let Some(existing) = self.parent.get(from) {
                return Err(KgError::HierarchyViolation(format!(
                    "`{from}` already has parent `{existing}`"
                )));
            }
            let mut cursor = Some(to.clone());
            while let Some(c) = cursor {
                if &c == from {
                    return Err(KgError::HierarchyViolation(format!(
                        "linking `{from}` under `{to}` would create a cycle"
                    )));
                }
                cursor = self.parent.get(&c).cloned();
            }
            self.parent.insert(from.clone(), to.clone());
            self.insert_edge_unchecked(edge.clone());
            self.rebuild_path_index();
            return Ok(edge);
        }
        self.insert_edge_unchecked(edge.clone());
        Ok(edge)
    }

    fn rebuild_path_index(&mut self) {
        self.path_index.clear();
        let ids: Vec<NodeId> = self
            .nodes
            .values()
            .filter(|n| n.kind == NodeKind::Hierarchy)
            .map(|n| n.id.clone())
            .collect();
        for id in ids {
            let path = self.hierarchy_path(&id);
            self.path_index.insert(path, id);
        }
    }

    /// Normalized labels from the root chapter down to `id`.
    pub fn hierarchy_path(&self, id: &NodeId) -> Vec<String> {
        let mut path = Vec::new();
        let mut cursor = Some(id.clone());
        while let Some(c) = cursor {
            if let Some(n) = self.nodes.get(&c) {
                path.push(n.label.clone());
            }
            cursor = self.parent.get(&c).cloned();
        }
        path.reverse();
        path
    }

    pub fn hierarchy_parent(&self, id: &NodeId) -> Option<&NodeId> {
        self.parent.get(id)
    }

    /// Resolves a chapter reference: either a `/`-separated path
    /// (`"Ch 1/1.1"`) or a bare label that is unique among hierarchy nodes.
    pub fn find_chapter(&self, reference: &str) -> Option<NodeId> {
        let parts: Vec<String> = reference.split('/').map(normalize_label).collect();
        if let Some(id) = self.path_index.get(&parts) {
            return Some(id.clone());
        }
        let norm = normalize_label(reference);
        let mut matches = self
            .nodes
            .values()
            .filter(|n| n.kind == NodeKind::Hierarchy && n.label == norm);
        let first = matches.next()?;
        if matches.next().is_some() {
            return None;
        }
        Some(first.id.clone())
    }

    /// `chapter` plus every hierarchy node nested beneath it.
    pub fn chapter_subtree(&self, chapter: &NodeId) -> BTreeSet<NodeId> {
        let mut out = BTreeSet::new();
        let mut stack = vec![chapter.clone()];
        while let Some(c) = stack.pop() {
            if !out.insert(c.clone()) {
                continue;
            }
            for e in self.in_edges(&c) {
                if e.kind == EdgeKind::PartOf {
                    stack.push(e.from.clone());
                }
            }
        }
        out
    }

    /// Incident edges of `node` with their opposite endpoint, ordered by
    /// neighbor id, then edge kind.
    pub fn query_neighbors(
        &self,
        node: &NodeId,
        direction: Direction,
        kind_filter: Option<EdgeKindTag>,
    ) -> Result<Vec<(Edge, Node)>> {
        self.require(node)?;
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        let mut push = |edge: &Edge, other: &NodeId| {
            if kind_filter.is_some_and(|k| edge.kind.tag() != k) || !seen.insert(edge.clone()) {
                return;
            }
            out.push((edge.clone(), self.nodes[other].clone()));
        };
        if matches!(direction, Direction::Out | Direction::Both) {
            for e in self.out_edges(node) {
                push(e, &e.to);
            }
        }
        if matches!(direction, Direction::In | Direction::Both) {
            for e in self.in_edges(node) {
                push(e, &e.from);
            }
        }
        out.sort_by(|(ea, na), (eb, nb)| {
            na.id.cmp(&nb.id).then_with(|| ea.kind.cmp(&eb.kind)).then_with(|| ea.cmp(eb))
        });
        Ok(out)
    }

    /// Normalized labels of all text and concept entities: the domain-term
    /// lexicon used for vocabulary density.
    pub fn lexicon(&self) -> BTreeSet<String> {
        self.nodes
            .values()
            .filter(|n| n.kind != NodeKind::Hierarchy)
            .map(|n| n.label.clone())
            .collect()
    }

    // Used by snapshot import: inserts a fully-formed node verbatim.
    fn restore_node(&mut self, node: Node) {
        if node.kind != NodeKind::Hierarchy {
            self.label_index.insert((node.kind, node.label.clone()), node.id.clone());
        }
        let (prefix, num) = node.id.numeric_parts();
        if prefix == "n" {
            if let Some(n) = num {
                let n = n.min(u64::MAX as u128 - 1) as u64;
                self.next_id = self.next_id.max(n + 1);
            }
        }
        self.nodes.insert(node.id.clone(), node);
    }
}

pub type GraphHandle = Arc<RwLock<KnowledgeGraph>>;

/// All subject graphs, keyed by subject.
///
/// The registry map itself is behind a lock so creation and lookup are safe
/// from any thread; each graph has its own reader/writer lock.
#[derive(Debug, Default)]
pub struct GraphRegistry {
    graphs: RwLock<BTreeMap<SubjectId, GraphHandle>>,
    documents: RwLock<HashMap<String, SubjectId>>,
}

impl GraphRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.graphs.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.read().is_empty()
    }

    pub fn subjects(&self) -> Vec<SubjectId> {
        self.graphs.read().keys().cloned().collect()
    }

    pub fn create_subject_graph(&self, subject: &str) -> Result<GraphHandle> {
        let subject = SubjectId::new(subject)?;
        let mut graphs = self.graphs.write();
        if graphs.contains_key(&subject) {
            return Err(KgError::DuplicateSubject(subject.to_string()));
        }
        let handle = Arc::new(RwLock::new(KnowledgeGraph::new(subject.clone())));
        graphs.insert(subject, handle.clone());
        Ok(handle)
    }

    pub fn get(&self, subject: &str) -> Option<GraphHandle> {
        let key = SubjectId::new(subject).ok()?;
        self.graphs.read().get(&key).cloned()
    }

    pub fn require(&self, subject: &str) -> Result<GraphHandle> {
        self.get(subject).ok_or_else(|| KgError::UnknownSubject(subject.to_string()))
    }

    pub fn get_or_create(&self, subject: &str) -> Result<GraphHandle> {
        let key = SubjectId::new(subject)?;
        let mut graphs = self.graphs.write();
        Ok(graphs
            .entry(key.clone())
            .or_insert_with(|| Arc::new(RwLock::new(KnowledgeGraph::new(key))))
            .clone())
    }

    /// Registers an already-built graph (for example a loaded snapshot).
    pub fn insert_graph(&self, graph: KnowledgeGraph) -> Result<GraphHandle> {
        let subject = graph.subject().clone();
        let mut graphs = self.graphs.write();
        if graphs.contains_key(&subject) {
            return Err(KgError::SubjectCollision(subject.to_string()));
        }
        {
            let mut docs = self.documents.write();
            for node in graph.nodes() {
                for r in &node.source_refs {
                    docs.entry(r.doc_id.clone()).or_insert_with(|| subject.clone());
                }
            }
        }
        let handle = Arc::new(RwLock::new(graph));
        graphs.insert(subject, handle.clone());
        Ok(handle)
    }

    /// Parses a snapshot stream and registers it under its header subject.
    pub fn import_graph<R: BufRead>(&self, reader: R) -> Result<GraphHandle> {
        let graph = import_graph(reader)?;
        self.insert_graph(graph)
    }

    /// Binds a document id to a subject. Re-claiming for the same subject is
    /// fine; claiming for another subject fails.
    pub fn claim_document(&self, doc_id: &str, subject: &SubjectId) -> Result<()> {
        let mut docs = self.documents.write();
        match docs.get(doc_id) {
            Some(owner) if owner != subject => Err(KgError::CrossSubjectDocument {
                doc: doc_id.to_string(),
                owner: owner.to_string(),
                requested: subject.to_string(),
            }),
            Some(_) => Ok(()),
            None => {
                docs.insert(doc_id.to_string(), subject.clone());
                Ok(())
            }
        }
    }
}

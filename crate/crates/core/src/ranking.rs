//! Unnormalised PageRank over a subject graph and the concept/fact rankings
//! built on it.
//!
//! The update is `PR(v) = (1 - d) + d * sum_{u in In(v)} PR(u) / |Out(u)|`,
//! started from all ones and iterated synchronously. Scores are not a
//! probability distribution: a node with no inbound links sits at `1 - d`.
//! Dangling nodes (`|Out(u)| = 0`) pass nothing on. Every edge kind counts
//! as a directed link and parallel edges count separately.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kg_store::{EdgeKind, KnowledgeGraph, NodeId, NodeKind};
use crate::par::{self, Parallelism};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RankError {
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("invalid pagerank config: {0}")]
    InvalidConfig(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("`{0}` is not a hierarchy node")]
    NotAHierarchyNode(String),
    #[error("`{0}` is not a concept node")]
    NotAConcept(String),
    #[error("top_m must be at least 1")]
    BadTopM,
}

impl RankError {
    pub fn code(&self) -> &'static str {
        match self {
            RankError::EmptyGraph => "EmptyGraph",
            RankError::InvalidConfig(_) => "InvalidConfig",
            RankError::UnknownNode(_) => "UnknownNode",
            RankError::NotAHierarchyNode(_) => "NotAHierarchyNode",
            RankError::NotAConcept(_) => "NotAConcept",
            RankError::BadTopM => "BadTopM",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PageRankConfig {
    pub damping: f64,
    /// Stop once the largest per-node change drops below this.
    pub tol: f64,
    pub max_iter: usize,
    #[serde(skip)]
    pub parallelism: Parallelism,
}

impl Default for PageRankConfig {
    fn default() -> Self {
        PageRankConfig { damping: 0.85, tol: 1e-9, max_iter: 1000, parallelism: Parallelism::default() }
    }
}

impl PageRankConfig {
    pub fn validate(&self) -> Result<(), RankError> {
        if !(self.damping > 0.0 && self.damping < 1.0) {
            return Err(RankError::InvalidConfig(format!("damping {} not in (0, 1)", self.damping)));
        }
        if !(self.tol > 0.0) {
            return Err(RankError::InvalidConfig(format!("tol {} must be positive", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(RankError::InvalidConfig("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// Result of a PageRank run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PageRank {
    pub scores: BTreeMap<NodeId, f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Largest per-node change of every sweep, in order.
    pub deltas: Vec<f64>,
}

impl PageRank {
    pub fn score(&self, id: &NodeId) -> Option<f64> {
        self.scores.get(id).copied()
    }
}

/// Compressed incoming-link view of a graph.
struct LinkMatrix {
    ids: Vec<NodeId>,
    in_offsets: Vec<usize>,
    in_sources: Vec<usize>,
    out_degree: Vec<usize>,
}

impl LinkMatrix {
    fn build(graph: &KnowledgeGraph) -> Self {
        let ids: Vec<NodeId> = graph.nodes().map(|n| n.id.clone()).collect();
        let index: std::collections::HashMap<&NodeId, usize> =
            ids.iter().enumerate().map(|(i, id)| (id, i)).collect();
        let n = ids.len();
        let mut incoming: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut out_degree = vec![0usize; n];
        for e in graph.edges() {
            let (u, v) = (index[&e.from], index[&e.to]);
            out_degree[u] += 1;
            incoming[v].push(u);
        }
        let mut in_offsets = Vec::with_capacity(n + 1);
        let mut in_sources = Vec::new();
        in_offsets.push(0);
        for mut list in incoming {
            // fixed summation order, independent of edge insertion order
            list.sort_unstable();
            in_sources.extend(list);
            in_offsets.push(in_sources.len());
        }
        LinkMatrix { ids, in_offsets, in_sources, out_degree }
    }
}

pub fn pagerank(graph: &KnowledgeGraph, config: &PageRankConfig) -> Result<PageRank, RankError> {
    config.validate()?;
    if graph.is_empty() {
        return Err(RankError::EmptyGraph);
    }
    let m = LinkMatrix::build(graph);
    let n = m.ids.len();
    let d = config.damping;
    let base = 1.0 - d;
    let mode = config.parallelism;

    let mut current = vec![1.0f64; n];
    let mut next = vec![0.0f64; n];
    let mut share = vec![0.0f64; n];
    let mut deltas = Vec::new();
    let mut converged = false;

    for _ in 0..config.max_iter {
        {
            let cur = &current;
            let deg = &m.out_degree;
            par::fill_indexed(mode, &mut share, |u| {
                if deg[u] == 0 {
                    0.0
                } else {
                    cur[u] / deg[u] as f64
                }
            });
        }
        {
            let share = &share;
            let m = &m;
            par::fill_indexed(mode, &mut next, |v| {
                let sum: f64 = m.in_sources[m.in_offsets[v]..m.in_offsets[v + 1]]
                    .iter()
                    .map(|&u| share[u])
                    .sum();
                base + d * sum
            });
        }
        let delta = current
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        std::mem::swap(&mut current, &mut next);
        deltas.push(delta);
        if delta < config.tol {
            converged = true;
            break;
        }
    }

    Ok(PageRank {
        scores: m.ids.into_iter().zip(current).collect(),
        iterations: deltas.len(),
        converged,
        deltas,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedNode {
    pub node: NodeId,
    pub label: String,
    pub score: f64,
}

fn sort_ranked(list: &mut [RankedNode]) {
    list.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.node.cmp(&b.node)));
}

/// Every node of the graph, best first.
pub fn rank_all(graph: &KnowledgeGraph, config: &PageRankConfig) -> Result<Vec<RankedNode>, RankError> {
    let pr = pagerank(graph, config)?;
    let mut out: Vec<RankedNode> = graph
        .nodes()
        .map(|n| RankedNode { node: n.id.clone(), label: n.label.clone(), score: pr.scores[&n.id] })
        .collect();
    sort_ranked(&mut out);
    Ok(out)
}

/// Concepts attached (via `IncludeIn`) to `chapter` or any chapter nested
/// under it, ranked by precomputed scores.
pub fn rank_chapter_concepts_with(
    graph: &KnowledgeGraph,
    chapter: &NodeId,
    scores: &PageRank,
) -> Result<Vec<RankedNode>, RankError> {
    let node = graph.node(chapter).ok_or_else(|| RankError::UnknownNode(chapter.to_string()))?;
    if node.kind != NodeKind::Hierarchy {
        return Err(RankError::NotAHierarchyNode(chapter.to_string()));
    }
    let subtree = graph.chapter_subtree(chapter);
    let mut concepts = std::collections::BTreeSet::new();
    for ch in &subtree {
        for e in graph.in_edges(ch) {
            if e.kind == EdgeKind::IncludeIn {
                concepts.insert(e.from.clone());
            }
        }
    }
    let mut out: Vec<RankedNode> = concepts
        .into_iter()
        .map(|id| {
            let label = graph.node(&id).map(|n| n.label.clone()).unwrap_or_default();
            let score = scores.score(&id).unwrap_or(0.0);
            RankedNode { node: id, label, score }
        })
        .collect();
    sort_ranked(&mut out);
    Ok(out)
}

pub fn rank_chapter_concepts(
    graph: &KnowledgeGraph,
    chapter: &NodeId,
    config: &PageRankConfig,
) -> Result<Vec<RankedNode>, RankError> {
    let node = graph.node(chapter).ok_or_else(|| RankError::UnknownNode(chapter.to_string()))?;
    if node.kind != NodeKind::Hierarchy {
        return Err(RankError::NotAHierarchyNode(chapter.to_string()));
    }
    let pr = pagerank(graph, config)?;
    rank_chapter_concepts_with(graph, chapter, &pr)
}

/// Text entities with an `IsA` edge into `concept`, best first, at most
/// `top_m` of them.
pub fn rank_concept_facts_with(
    graph: &KnowledgeGraph,
    concept: &NodeId,
    scores: &PageRank,
    top_m: usize,
) -> Result<Vec<RankedNode>, RankError> {
    if top_m == 0 {
        return Err(RankError::BadTopM);
    }
    let node = graph.node(concept).ok_or_else(|| RankError::UnknownNode(concept.to_string()))?;
    if node.kind != NodeKind::Concept {
        return Err(RankError::NotAConcept(concept.to_string()));
    }
    let mut facts: Vec<RankedNode> = graph
        .in_edges(concept)
        .filter(|e| e.kind == EdgeKind::IsA)
        .map(|e| e.from.clone())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .map(|id| {
            let label = graph.node(&id).map(|n| n.label.clone()).unwrap_or_default();
            let score = scores.score(&id).unwrap_or(0.0);
            RankedNode { node: id, label, score }
        })
        .collect();
    sort_ranked(&mut facts);
    facts.truncate(top_m);
    Ok(facts)
}

pub fn rank_concept_facts(
    graph: &KnowledgeGraph,
    concept: &NodeId,
    config: &PageRankConfig,
    top_m: usize,
) -> Result<Vec<RankedNode>, RankError> {
    if top_m == 0 {
        return Err(RankError::BadTopM);
    }
    let node = graph.node(concept).ok_or_else(|| RankError::UnknownNode(concept.to_string()))?;
    if node.kind != NodeKind::Concept {
        return Err(RankError::NotAConcept(concept.to_string()));
    }
    let pr = pagerank(graph, config)?;
    rank_concept_facts_with(graph, concept, &pr, top_m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg_store::{LinkKind, SubjectId};

    fn empty() -> KnowledgeGraph {
        KnowledgeGraph::new(SubjectId::new("t").unwrap())
    }

    #[test]
    fn mutual_pair_is_fixed_at_one() {
        let mut g = empty();
        g.assert_fact_triple("a", "r", "b").unwrap();
        g.assert_fact_triple("b", "r", "a").unwrap();
        let pr = pagerank(&g, &PageRankConfig::default()).unwrap();
        assert!(pr.converged);
        for s in pr.scores.values() {
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dangling_sink() {
        let mut g = empty();
        g.assert_fact_triple("a", "r", "c").unwrap();
        g.assert_fact_triple("b", "r", "c").unwrap();
        let pr = pagerank(&g, &PageRankConfig::default()).unwrap();
        let get = |l: &str| pr.scores[g.find_entity(l, NodeKind::Text).unwrap()];
        assert!((get("a") - 0.15).abs() < 1e-12);
        assert!((get("b") - 0.15).abs() < 1e-12);
        assert!((get("c") - 0.405).abs() < 1e-12);
    }

    #[test]
    fn errors_and_config() {
        assert_eq!(pagerank(&empty(), &PageRankConfig::default()).unwrap_err(), RankError::EmptyGraph);
        for bad in [
            PageRankConfig { damping: 1.0, ..Default::default() },
            PageRankConfig { damping: 0.0, ..Default::default() },
            PageRankConfig { tol: 0.0, ..Default::default() },
            PageRankConfig { max_iter: 0, ..Default::default() },
        ] {
            assert!(matches!(bad.validate(), Err(RankError::InvalidConfig(_))));
        }
    }

    #[test]
    fn max_iter_reached_is_reported() {
        let mut g = empty();
        for i in 0..5 {
            g.assert_fact_triple(&format!("x{i}"), "r", &format!("x{}", (i + 1) % 5)).unwrap();
        }
        g.assert_fact_triple("x0", "r", "x2").unwrap();
        let pr = pagerank(&g, &PageRankConfig { max_iter: 2, ..Default::default() }).unwrap();
        assert_eq!(pr.iterations, 2);
        assert!(!pr.converged);
    }

    #[test]
    fn sequential_and_parallel_are_bitwise_equal() {
        let mut g = empty();
        for i in 0..200u32 {
            g.assert_fact_triple(&format!("v{i}"), "r", &format!("v{}", (i * 7 + 3) % 200)).unwrap();
            g.assert_fact_triple(&format!("v{i}"), "s", &format!("v{}", (i * 13 + 1) % 200)).unwrap();
        }
        let seq = PageRankConfig { parallelism: Parallelism::Sequential, ..Default::default() };
        let par = PageRankConfig { parallelism: Parallelism::Parallel, ..Default::default() };
        let a = pagerank(&g, &seq).unwrap();
        let b = pagerank(&g, &par).unwrap();
        assert_eq!(a, b);
    }

    fn chapter_graph() -> (KnowledgeGraph, NodeId) {
        let mut g = empty();
        let ch = g.upsert_hierarchy_path(&["Ch 1"]).unwrap();
        let sub = g.upsert_hierarchy_path(&["Ch 1", "1.1"]).unwrap();
        let busy = g.upsert_entity("busy", NodeKind::Concept).unwrap();
        let quiet = g.upsert_entity("quiet", NodeKind::Concept).unwrap();
        g.assert_link(LinkKind::IncludeIn, &busy, &ch).unwrap();
        g.assert_link(LinkKind::IncludeIn, &quiet, &sub).unwrap();
        for i in 0..5 {
            let f = g.upsert_entity(&format!("b{i}"), NodeKind::Text).unwrap();
            g.assert_link(LinkKind::IsA, &f, &busy).unwrap();
        }
        let f = g.upsert_entity("q0", NodeKind::Text).unwrap();
        g.assert_link(LinkKind::IsA, &f, &quiet).unwrap();
        (g, ch)
    }

    #[test]
    fn chapter_concepts_follow_link_weight_and_nesting() {
        let (g, ch) = chapter_graph();
        let ranked = rank_chapter_concepts(&g, &ch, &PageRankConfig::default()).unwrap();
        let labels: Vec<_> = ranked.iter().map(|r| r.label.as_str()).collect();
        assert_eq!(labels, vec!["busy", "quiet"]);
        // busy: 0.15 + 0.85 * 5 * 0.15 before its own out-link share
        assert!((ranked[0].score - (0.15 + 0.85 * 5.0 * 0.15)).abs() < 1e-9);

        let sub = g.find_chapter("Ch 1/1.1").unwrap();
        let only_sub = rank_chapter_concepts(&g, &sub, &PageRankConfig::default()).unwrap();
        assert_eq!(only_sub.len(), 1);

        let busy = g.find_entity("busy", NodeKind::Concept).unwrap();
        assert_eq!(
            rank_chapter_concepts(&g, busy, &PageRankConfig::default()).unwrap_err(),
            RankError::NotAHierarchyNode(busy.to_string())
        );
    }

    #[test]
    fn empty_chapter_and_ties() {
        let mut g = empty();
        let ch = g.upsert_hierarchy_path(&["Ch 9"]).unwrap();
        assert!(rank_chapter_concepts(&g, &ch, &PageRankConfig::default()).unwrap().is_empty());
        let c2 = g.upsert_entity("zeta", NodeKind::Concept).unwrap();
        let c1 = g.upsert_entity("alpha", NodeKind::Concept).unwrap();
        g.assert_link(LinkKind::IncludeIn, &c2, &ch).unwrap();
        g.assert_link(LinkKind::IncludeIn, &c1, &ch).unwrap();
        let ranked = rank_chapter_concepts(&g, &ch, &PageRankConfig::default()).unwrap();
        assert_eq!(ranked[0].score, ranked[1].score);
        assert!(ranked[0].node < ranked[1].node);
    }

    #[test]
    fn concept_facts_truncate() {
        let (g, _) = chapter_graph();
        let busy = g.find_entity("busy", NodeKind::Concept).unwrap();
        let all = rank_concept_facts(&g, busy, &PageRankConfig::default(), 10).unwrap();
        assert_eq!(all.len(), 5);
        let one = rank_concept_facts(&g, busy, &PageRankConfig::default(), 1).unwrap();
        assert_eq!(one[0], all[0]);
        assert_eq!(
            rank_concept_facts(&g, busy, &PageRankConfig::default(), 0).unwrap_err(),
            RankError::BadTopM
        );
        let fact = g.find_entity("b0", NodeKind::Text).unwrap();
        assert!(matches!(
            rank_concept_facts(&g, fact, &PageRankConfig::default(), 3),
            Err(RankError::NotAConcept(_))
        ));
    }
}

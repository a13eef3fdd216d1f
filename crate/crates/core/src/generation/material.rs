use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::GenError;
use crate::kg_store::{Edge, EdgeKind, EdgeKindTag, KnowledgeGraph, NodeId};
use crate::ranking::{pagerank, rank_chapter_concepts_with, rank_concept_facts_with, PageRank, PageRankConfig, RankedNode};

#[derive(Debug, Clone, PartialEq)]
pub struct MaterialConfig {
    pub top_concepts: usize,
    pub top_m_facts: usize,
    pub pagerank: PageRankConfig,
}

impl Default for MaterialConfig {
    fn default() -> Self {
        Self { top_concepts: 10, top_m_facts: 5, pagerank: PageRankConfig::default() }
    }
}

/// A ranked concept with its strongest facts and their direct relations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialBundle {
    pub subject: String,
    /// Position among the chapter's bundles, 0 for the top concept.
    pub rank: usize,
    pub chapter: NodeId,
    pub chapter_label: String,
    pub concept: RankedNode,
    pub facts: Vec<RankedNode>,
    /// Fact edges touching any of `facts`.
    pub sub_connections: Vec<Edge>,
    /// `sub_connections` as "head relation tail" sentences, leaving out
    /// those that name the concept itself.
    pub statements: Vec<String>,
    /// Wrong-answer candidates: facts of sibling concepts in the chapter
    /// first, then facts of other concepts.
    pub distractors: Vec<String>,
}

impl MaterialBundle {
    pub fn key(&self) -> &str {
        &self.facts[0].label
    }
}

fn label(graph: &KnowledgeGraph, id: &NodeId) -> String {
    graph.node(id).map(|n| n.label.clone()).unwrap_or_default()
}

fn sub_connections(graph: &KnowledgeGraph, facts: &[RankedNode]) -> Vec<Edge> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for f in facts {
        let mut edges: Vec<&Edge> = graph
            .out_edges(&f.node)
            .chain(graph.in_edges(&f.node))
            .filter(|e| e.kind.tag() == EdgeKindTag::Fact)
            .collect();
        edges.sort_by(|a, b| (&a.from, &a.to, a.kind.relation()).cmp(&(&b.from, &b.to, b.kind.relation())));
        for e in edges {
            if seen.insert(e.clone()) {
                out.push(e.clone());
            }
        }
    }
    out
}

/// Ranked material bundles for a chapter (its nested chapters included),
/// using one PageRank pass over the whole subject graph.
pub fn assemble_material(
    graph: &KnowledgeGraph,
    chapter: &NodeId,
    config: &MaterialConfig,
) -> Result<Vec<MaterialBundle>, GenError> {
    let scores = pagerank(graph, &config.pagerank)?;
    assemble_material_with(graph, chapter, config, &scores)
}

pub fn assemble_material_with(
    graph: &KnowledgeGraph,
    chapter: &NodeId,
    config: &MaterialConfig,
    scores: &PageRank,
) -> Result<Vec<MaterialBundle>, GenError> {
    if config.top_concepts == 0 || config.top_m_facts == 0 {
        return Err(GenError::InvalidConfig("top_concepts and top_m_facts must be at least 1".into()));
    }
    let all_concepts = rank_chapter_concepts_with(graph, chapter, scores)?;
    let mut ranked = Vec::new();
    for concept in &all_concepts {
        let facts = rank_concept_facts_with(graph, &concept.node, scores, usize::MAX)?;
        if !facts.is_empty() {
            ranked.push((concept.clone(), facts));
        }
    }
    if ranked.is_empty() {
        return Err(GenError::NoConceptsInChapter(label(graph, chapter)));
    }

    // facts of concepts outside this chapter, best concept first
    let in_chapter: BTreeSet<&NodeId> = all_concepts.iter().map(|c| &c.node).collect();
    let mut outside: Vec<(RankedNode, Vec<RankedNode>)> = Vec::new();
    let mut others: Vec<&NodeId> = graph
        .nodes()
        .filter(|n| n.kind == crate::kg_store::NodeKind::Concept && !in_chapter.contains(&n.id))
        .map(|n| &n.id)
        .collect();
    others.sort_by(|a, b| scores.score(b).unwrap_or(0.0).total_cmp(&scores.score(a).unwrap_or(0.0)).then(a.cmp(b)));
    for c in others {
        let facts = rank_concept_facts_with(graph, c, scores, usize::MAX)?;
        let node = RankedNode { node: c.clone(), label: label(graph, c), score: scores.score(c).unwrap_or(0.0) };
        outside.push((node, facts));
    }

    let chapter_label = label(graph, chapter);
    let subject = graph.subject().to_string();
    let mut bundles = Vec::new();
    for (rank, (concept, facts)) in ranked.iter().take(config.top_concepts).enumerate() {
        // every instance of the concept is a correct answer, never a distractor
        let correct: BTreeSet<&str> = facts.iter().map(|f| f.label.as_str()).collect();
        let mut distractors: Vec<String> = Vec::new();
        let mut push_round_robin = |groups: Vec<&Vec<RankedNode>>| {
            let depth = groups.iter().map(|g| g.len()).max().unwrap_or(0);
            for level in 0..depth {
                for g in &groups {
                    if let Some(f) = g.get(level) {
                        if !correct.contains(f.label.as_str()) && !distractors.contains(&f.label) {
                            distractors.push(f.label.clone());
                        }
                    }
                }
            }
        };
        push_round_robin(ranked.iter().filter(|(c, _)| c.node != concept.node).map(|(_, f)| f).collect());
        push_round_robin(outside.iter().map(|(_, f)| f).collect());

        let top: Vec<RankedNode> = facts.iter().take(config.top_m_facts).cloned().collect();
        let edges = sub_connections(graph, &top);
        let statements = edges
            .iter()
            .filter(|e| label(graph, &e.from) != concept.label && label(graph, &e.to) != concept.label)
            .map(|e| {
                let rel = match &e.kind {
                    EdgeKind::Fact(r) => r.as_str(),
                    _ => "",
                };
                format!("{} {} {}", label(graph, &e.from), rel, label(graph, &e.to))
            })
            .collect();
        bundles.push(MaterialBundle {
            subject: subject.clone(),
            rank,
            chapter: chapter.clone(),
            chapter_label: chapter_label.clone(),
            concept: concept.clone(),
            facts: top,
            sub_connections: edges,
            statements,
            distractors,
        });
    }
    Ok(bundles)
}

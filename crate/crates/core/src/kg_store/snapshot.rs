//! JSON Lines snapshot format.
//!
//! ```text
//! {"type":"header","format":"kaqg-kg","version":1,"subject":"bio"}
//! {"type":"node","id":"n1","kind":"text","label":"oak","raw_labels":["Oak"],"source_refs":[["doc1",0]]}
//! {"type":"edge","kind":"is_a","from":"n1","to":"n2"}
//! {"type":"edge","kind":"fact","from":"n1","to":"n3","label":"shades"}
//! ```
//!
//! Nodes are written in NodeId order and always precede edges; edges keep
//! insertion order.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{
    Edge, EdgeKind, EdgeKindTag, KgError, KnowledgeGraph, LinkKind, Node, NodeId, NodeKind,
    Result, SourceRef, SubjectId,
};
use crate::text::normalize_label;

pub const SNAPSHOT_FORMAT: &str = "kaqg-kg";
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum Line {
    Header {
        format: String,
        version: u32,
        subject: String,
    },
    Node {
        id: String,
        kind: NodeKind,
        label: String,
        raw_labels: Vec<String>,
        source_refs: Vec<(String, usize)>,
    },
    Edge {
        kind: EdgeKindTag,
        from: String,
        to: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
    },
}

fn to_line(line: &Line) -> String {
    serde_json::to_string(line).expect("snapshot lines always serialize")
}

/// Writes `graph` as a snapshot stream.
pub fn write_snapshot<W: Write>(graph: &KnowledgeGraph, mut out: W) -> std::io::Result<()> {
    let header = Line::Header {
        format: SNAPSHOT_FORMAT.to_string(),
        version: SNAPSHOT_VERSION,
        subject: graph.subject().to_string(),
    };
    writeln!(out, "{}", to_line(&header))?;
    for node in graph.nodes() {
        let line = Line::Node {
            id: node.id.to_string(),
            kind: node.kind,
            label: node.label.clone(),
            raw_labels: node.raw_labels.iter().cloned().collect(),
            source_refs: node.source_refs.iter().map(|r| (r.doc_id.clone(), r.segment)).collect(),
        };
        writeln!(out, "{}", to_line(&line))?;
    }
    for edge in graph.edges() {
        let line = Line::Edge {
            kind: edge.kind.tag(),
            from: edge.from.to_string(),
            to: edge.to.to_string(),
            label: edge.kind.relation().map(str::to_string),
        };
        writeln!(out, "{}", to_line(&line))?;
    }
    Ok(())
}

pub fn export_graph(graph: &KnowledgeGraph) -> Vec<u8> {
    let mut buf = Vec::new();
    write_snapshot(graph, &mut buf).expect("writing to a Vec cannot fail");
    buf
}

/// Parses a snapshot stream into a standalone graph.
pub fn import_graph<R: BufRead>(reader: R) -> Result<KnowledgeGraph> {
    let bad = |line: usize, reason: String| KgError::MalformedSnapshot { line, reason };
    let mut graph: Option<KnowledgeGraph> = None;
    let mut seen_edge = false;
    let mut pending_blank: Option<usize> = None;

    for (idx, raw) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let raw = raw.map_err(|e| bad(lineno, format!("unreadable line: {e}")))?;
        if raw.trim().is_empty() {
            pending_blank.get_or_insert(lineno);
            continue;
        }
        if let Some(blank) = pending_blank {
            return Err(bad(blank, "blank line inside snapshot".into()));
        }
        let line: Line = serde_json::from_str(&raw).map_err(|e| bad(lineno, e.to_string()))?;
        match (line, graph.as_mut()) {
            (Line::Header { format, version, subject }, None) => {
                if format != SNAPSHOT_FORMAT {
                    return Err(bad(lineno, format!("unknown format `{format}`")));
                }
                if version != SNAPSHOT_VERSION {
                    return Err(bad(lineno, format!("unsupported version {version}")));
                }
                let subject = SubjectId::new(&subject).map_err(|e| bad(lineno, e.to_string()))?;
                let mut g = KnowledgeGraph::new(subject);
                g.next_id = 1;
                graph = Some(g);
            }
            (_, None) => return Err(bad(lineno, "first line must be the header".into())),
            (Line::Header { .. }, Some(_)) => {
                return Err(bad(lineno, "duplicate header".into()));
            }
            (Line::Node { id, kind, label, raw_labels, source_refs }, Some(g)) => {
                if seen_edge {
                    return Err(bad(lineno, "node after edges".into()));
                }
                if id.is_empty() {
                    return Err(bad(lineno, "empty node id".into()));
                }
                let node_id = NodeId::new(id);
                if g.nodes.contains_key(&node_id) {
                    return Err(bad(lineno, format!("duplicate node id `{node_id}`")));
                }
                if label.is_empty() || normalize_label(&label) != label {
                    return Err(bad(lineno, format!("label `{label}` is not normalized")));
                }
                if kind != NodeKind::Hierarchy
                    && g.label_index.contains_key(&(kind, label.clone()))
                {
                    return Err(bad(lineno, format!("duplicate {} label `{label}`", kind.as_str())));
                }
                g.restore_node(Node {
                    id: node_id,
                    kind,
                    label,
                    raw_labels: raw_labels.into_iter().collect::<BTreeSet<_>>(),
                    source_refs: source_refs
                        .into_iter()
                        .map(|(doc_id, segment)| SourceRef { doc_id, segment })
                        .collect(),
                });
            }
            (Line::Edge { kind, from, to, label }, Some(g)) => {
                seen_edge = true;
                let from = NodeId::new(from);
                let to = NodeId::new(to);
                for end in [&from, &to] {
                    if !g.nodes.contains_key(end) {
                        return Err(bad(lineno, format!("edge references unknown node `{end}`")));
                    }
                }
                let link = match (kind, label) {
                    (EdgeKindTag::Fact, Some(r)) => {
                        if r.is_empty() {
                            return Err(bad(lineno, "empty fact label".into()));
                        }
                        let (fk, tk) = (g.nodes[&from].kind, g.nodes[&to].kind);
                        if (fk, tk) != (NodeKind::Text, NodeKind::Text) {
                            return Err(bad(lineno, "fact edge must join two text nodes".into()));
                        }
                        g.insert_edge_unchecked(Edge { kind: EdgeKind::Fact(r), from, to });
                        continue;
                    }
                    (EdgeKindTag::Fact, None) => {
                        return Err(bad(lineno, "fact edge without label".into()));
                    }
                    (_, Some(_)) => {
                        return Err(bad(lineno, "label is only allowed on fact edges".into()));
                    }
                    (EdgeKindTag::IsA, None) => LinkKind::IsA,
                    (EdgeKindTag::PartOf, None) => LinkKind::PartOf,
                    (EdgeKindTag::IncludeIn, None) => LinkKind::IncludeIn,
                };
                g.assert_link(link, &from, &to).map_err(|e| bad(lineno, e.to_string()))?;
            }
        }
    }
    let mut g = graph.ok_or_else(|| bad(1, "missing header".into()))?;
    g.rebuild_path_index();
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg_store::GraphRegistry;

    fn sample() -> KnowledgeGraph {
        let mut g = KnowledgeGraph::new(SubjectId::new("bio").unwrap());
        let e = g.assert_fact_triple("Oak", "shades", "fern").unwrap();
        g.add_source_ref(&e.from, SourceRef { doc_id: "doc1".into(), segment: 3 }).unwrap();
        let tree = g.upsert_entity("tree", NodeKind::Concept).unwrap();
        g.assert_link(LinkKind::IsA, &e.from, &tree).unwrap();
        g
    }

    #[test]
    fn round_trip_three_nodes() {
        let g = sample();
        assert_eq!(g.node_count(), 3);
        let bytes = export_graph(&g);
        let back = import_graph(bytes.as_slice()).unwrap();
        assert_eq!(back, g);
        assert_eq!(export_graph(&back), bytes);
    }

    #[test]
    fn header_and_key_layout_is_exact() {
        let text = String::from_utf8(export_graph(&sample())).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], r#"{"type":"header","format":"kaqg-kg","version":1,"subject":"bio"}"#);
        assert_eq!(
            lines[1],
            r#"{"type":"node","id":"n1","kind":"text","label":"oak","raw_labels":["Oak"],"source_refs":[["doc1",3]]}"#
        );
        assert!(lines.contains(&r#"{"type":"edge","kind":"fact","from":"n1","to":"n2","label":"shades"}"#));
        assert!(lines.contains(&r#"{"type":"edge","kind":"is_a","from":"n1","to":"n3"}"#));
    }

    #[test]
    fn truncated_line_reports_line_number() {
        let text = String::from_utf8(export_graph(&sample())).unwrap();
        let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
        let cut = lines[2].len() / 2;
        lines[2].truncate(cut);
        let broken = lines.join("\n");
        match import_graph(broken.as_bytes()) {
            Err(KgError::MalformedSnapshot { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected malformed snapshot, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_structure() {
        let header = r#"{"type":"header","format":"kaqg-kg","version":1,"subject":"x"}"#;
        let node = r#"{"type":"node","id":"n1","kind":"hierarchy","label":"ch","raw_labels":[],"source_refs":[]}"#;
        let cases = [
            (node.to_string(), 1),
            (format!("{header}\n{}", r#"{"type":"edge","kind":"is_a","from":"n1","to":"n2"}"#), 2),
            (format!("{header}\n{node}\n{}", r#"{"type":"edge","kind":"is_a","from":"n1","to":"n1"}"#), 3),
            (format!("{header}\n{node}\n{}", r#"{"type":"edge","kind":"part_of","from":"n1","to":"n1","label":"x"}"#), 3),
            (format!("{header}\n{node}\n{node}"), 3),
        ];
        for (text, expected_line) in cases {
            match import_graph(text.as_bytes()) {
                Err(KgError::MalformedSnapshot { line, .. }) => assert_eq!(line, expected_line, "{text}"),
                other => panic!("expected failure for {text}: {other:?}"),
            }
        }
    }

    #[test]
    fn import_into_occupied_subject_collides() {
        let reg = GraphRegistry::new();
        reg.create_subject_graph("bio").unwrap();
        let bytes = export_graph(&sample());
        assert_eq!(
            reg.import_graph(bytes.as_slice()).unwrap_err(),
            KgError::SubjectCollision("bio".into())
        );
        let other = GraphRegistry::new();
        let g = other.import_graph(bytes.as_slice()).unwrap();
        // fresh ids continue after the imported ones
        let new_id = g.write().upsert_entity("maple", NodeKind::Text).unwrap();
        assert_eq!(new_id.as_str(), "n4");
    }

    #[test]
    fn hierarchy_survives_round_trip() {
        let mut g = KnowledgeGraph::new(SubjectId::new("bio").unwrap());
        let leaf = g.upsert_hierarchy_path(&["Ch 1", "1.1"]).unwrap();
        let back = import_graph(export_graph(&g).as_slice()).unwrap();
        assert_eq!(back.find_chapter("Ch 1/1.1"), Some(leaf));
        assert_eq!(back.hierarchy_path(&back.find_chapter("ch 1/1.1").unwrap()), vec!["ch 1", "1.1"]);
    }
}

//! Expert-mode rendering: a node roster line, then one `A -> B` line per
//! edge in acceptance order.

use super::{GenError, GenerationState};
use crate::graph::{EntityGraph, EntityId, EntityLayer};

const ROSTER: &str = "Nodes:";

pub fn verbalize_subgraph(graph: &EntityGraph, sub: &GenerationState) -> String {
    let names: Vec<&str> = sub.nodes.iter().map(|&n| graph.name(n)).collect();
    let mut out = if names.is_empty() { ROSTER.to_string() } else { format!("{ROSTER} {}", names.join(", ")) };
    out.push('\n');
    for &(s, t) in &sub.edges {
        out.push_str(graph.name(s));
        out.push_str(" -> ");
        out.push_str(graph.name(t));
        out.push('\n');
    }
    out
}

/// Proteins win when a name is shared across layers.
fn resolve(graph: &EntityGraph, name: &str) -> Result<EntityId, GenError> {
    let ids = graph.ids_by_name(name);
    ids.iter()
        .find(|&&i| graph.layer(i) == EntityLayer::Protein)
        .or_else(|| ids.first())
        .copied()
        .ok_or_else(|| GenError::Parse(format!("unknown entity {name:?}")))
}

/// Inverse of [`verbalize_subgraph`].
pub fn parse_subgraph(graph: &EntityGraph, text: &str) -> Result<GenerationState, GenError> {
    let mut lines = text.lines();
    let roster = lines
        .next()
        .and_then(|l| l.strip_prefix(ROSTER))
        .ok_or_else(|| GenError::Parse("missing node roster".into()))?
        .trim();
    let mut state = GenerationState::default();
    if !roster.is_empty() {
        for name in roster.split(", ") {
            let id = resolve(graph, name)?;
            if !state.nodes.contains(&id) {
                state.nodes.push(id);
            }
        }
    }
    for (k, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let (a, b) = line
            .split_once(" -> ")
            .ok_or_else(|| GenError::Parse(format!("line {}: expected `A -> B`", k + 2)))?;
        let (s, t) = (resolve(graph, a.trim())?, resolve(graph, b.trim())?);
        if state.has_edge(s, t) {
            return Err(GenError::Parse(format!("line {}: duplicate edge", k + 2)));
        }
        state.push_edge(s, t);
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tests::random_protein_graph;
    use proptest::prelude::*;

    #[test]
    fn empty_and_single_edge() {
        let g = random_protein_graph(3, 0.0, 0);
        assert_eq!(verbalize_subgraph(&g, &GenerationState::default()), "Nodes:\n");
        let mut s = GenerationState::from_start(&[EntityId(0)]);
        s.push_edge(EntityId(0), EntityId(2));
        let text = verbalize_subgraph(&g, &s);
        let (a, b) = (g.name(EntityId(0)), g.name(EntityId(2)));
        assert_eq!(text, format!("Nodes: {a}, {b}\n{a} -> {b}\n"));
    }

    #[test]
    fn unknown_names_are_rejected() {
        let g = random_protein_graph(3, 0.0, 0);
        assert!(matches!(parse_subgraph(&g, "Nodes: NOPE\n"), Err(GenError::Parse(_))));
        assert!(matches!(parse_subgraph(&g, "A -> B\n"), Err(GenError::Parse(_))));
    }

    proptest! {
        #[test]
        fn parse_inverts_verbalize(pairs in proptest::collection::vec((0usize..8, 0usize..8), 0..20), start in 0usize..8) {
            let g = random_protein_graph(8, 0.2, 1);
            let mut s = GenerationState::from_start(&[EntityId(start)]);
            for (a, b) in pairs {
                let (a, b) = (EntityId(a), EntityId(b));
                if a != b && !s.has_edge(a, b) {
                    s.push_edge(a, b);
                }
            }
            let back = parse_subgraph(&g, &verbalize_subgraph(&g, &s)).unwrap();
            prop_assert_eq!(back.edges, s.edges);
            prop_assert_eq!(back.nodes, s.nodes);
        }
    }
}

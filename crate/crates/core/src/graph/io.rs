//! TSV graph files.
//!
//! - nodes: `id<TAB>layer<TAB>name`
//! - edges: `src_id<TAB>tgt_id<TAB>kind<TAB>relation_tag` (PPI once per pair)
//! - whitelist: `src_layer<TAB>tgt_layer<TAB>relation_tag`
//!
//! Blank lines and lines starting with `#` are ignored.

use super::{EdgeKind, EdgeSpec, EntityGraph, EntityId, GraphError, GraphSpec, NodeSpec};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

pub struct GraphFiles {
    pub nodes: PathBuf,
    pub edges: PathBuf,
    pub whitelist: PathBuf,
}

impl GraphFiles {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            nodes: dir.join("nodes.tsv"),
            edges: dir.join("edges.tsv"),
            whitelist: dir.join("whitelist.tsv"),
        }
    }
}

fn rows(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|(i, l)| (i + 1, l.split('\t').collect()))
}

fn field<'a>(cols: &[&'a str], i: usize, line: usize, what: &str) -> Result<&'a str, GraphError> {
    cols.get(i)
        .map(|s| s.trim())
        .ok_or_else(|| GraphError::Parse(format!("line {line}: missing {what}")))
}

fn parse_id(s: &str, line: usize) -> Result<EntityId, GraphError> {
    s.parse::<usize>()
        .map(EntityId)
        .map_err(|_| GraphError::Parse(format!("line {line}: bad id `{s}`")))
}

pub fn parse_graph_tsv(nodes: &str, edges: &str, whitelist: &str) -> Result<GraphSpec, GraphError> {
    let mut node_rows = Vec::new();
    for (line, cols) in rows(nodes) {
        let id = parse_id(field(&cols, 0, line, "id")?, line)?;
        let layer = field(&cols, 1, line, "layer")?.parse()?;
        let name = field(&cols, 2, line, "name")?.to_string();
        node_rows.push((id, NodeSpec { name, layer }));
    }
    node_rows.sort_by_key(|(id, _)| *id);
    for (i, (id, _)) in node_rows.iter().enumerate() {
        if id.0 != i {
            return Err(GraphError::NonDenseIds(id.0));
        }
    }
    let mut spec = GraphSpec {
        nodes: node_rows.into_iter().map(|(_, n)| n).collect(),
        ..Default::default()
    };
    for (line, cols) in rows(edges) {
        let src = parse_id(field(&cols, 0, line, "src_id")?, line)?;
        let tgt = parse_id(field(&cols, 1, line, "tgt_id")?, line)?;
        let kind: EdgeKind = field(&cols, 2, line, "kind")?.parse()?;
        let relation = field(&cols, 3, line, "relation_tag")?.to_string();
        spec.edges.push(EdgeSpec { src, tgt, kind, relation });
    }
    for (line, cols) in rows(whitelist) {
        let sl = field(&cols, 0, line, "src_layer")?.parse()?;
        let tl = field(&cols, 1, line, "tgt_layer")?.parse()?;
        let rel = field(&cols, 2, line, "relation_tag")?.to_string();
        spec.whitelist.push((sl, tl, rel));
    }
    Ok(spec)
}

fn read(path: &Path) -> Result<String, GraphError> {
    fs::read_to_string(path)
        .map_err(|e| GraphError::Io { path: path.display().to_string(), message: e.to_string() })
}

pub fn read_graph_dir(dir: &Path) -> Result<EntityGraph, GraphError> {
    let f = GraphFiles::in_dir(dir);
    let spec = parse_graph_tsv(&read(&f.nodes)?, &read(&f.edges)?, &read(&f.whitelist)?)?;
    EntityGraph::build(&spec)
}

impl EntityGraph {
    pub fn nodes_tsv(&self) -> String {
        let mut out = String::from("#id\tlayer\tname\n");
        for (i, (name, layer)) in self.names().iter().zip(self.layers()).enumerate() {
            let _ = writeln!(out, "{i}\t{layer}\t{name}");
        }
        out
    }

    pub fn edges_tsv(&self) -> String {
        let mut out = String::from("#src_id\ttgt_id\tkind\trelation_tag\n");
        for e in self.to_spec().edges {
            let _ = writeln!(out, "{}\t{}\t{}\t{}", e.src, e.tgt, e.kind.as_str(), e.relation);
        }
        out
    }

    pub fn whitelist_tsv(&self) -> String {
        let mut out = String::from("#src_layer\ttgt_layer\trelation_tag\n");
        for (s, t, r) in self.whitelist() {
            let _ = writeln!(out, "{s}\t{t}\t{r}");
        }
        out
    }
}

pub fn write_graph_dir(graph: &EntityGraph, dir: &Path) -> Result<GraphFiles, GraphError> {
    let f = GraphFiles::in_dir(dir);
    let write = |p: &Path, s: String| {
        fs::write(p, s).map_err(|e| GraphError::Io { path: p.display().to_string(), message: e.to_string() })
    };
    fs::create_dir_all(dir)
        .map_err(|e| GraphError::Io { path: dir.display().to_string(), message: e.to_string() })?;
    write(&f.nodes, graph.nodes_tsv())?;
    write(&f.edges, graph.edges_tsv())?;
    write(&f.whitelist, graph.whitelist_tsv())?;
    Ok(f)
}

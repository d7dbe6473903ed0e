use std::fmt::Write as _;

use super::union_find::UnionFind;
use crate::corpus::Document;
use crate::phrase::PhraseMatcher;

/// Undirected graph whose edges only join lexicon nodes to document nodes.
///
/// Node numbering: lexicon `i` is node `i`, document `j` is node
/// `lexicons.len() + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteGraph {
    pub lexicons: Vec<String>,
    pub documents: Vec<String>,
    /// `(lexicon index, document index)`, sorted and deduplicated.
    pub edges: Vec<(usize, usize)>,
}

/// Connect each document to every phrase occurring in it as a contiguous
/// token run.
pub fn build_bipartite_graph<S: AsRef<str>>(docs: &[&Document], lexicons: &[S]) -> BipartiteGraph {
    let matcher = PhraseMatcher::new(lexicons);
    let mut edges = Vec::new();
    for (j, d) in docs.iter().enumerate() {
        for lex in matcher.contained(&d.tokens) {
            edges.push((lex, j));
        }
    }
    edges.sort_unstable();
    BipartiteGraph {
        lexicons: lexicons.iter().map(|s| s.as_ref().to_string()).collect(),
        documents: docs.iter().map(|d| d.id.clone()).collect(),
        edges,
    }
}

impl BipartiteGraph {
    pub fn n_nodes(&self) -> usize {
        self.lexicons.len() + self.documents.len()
    }

    pub fn doc_node(&self, j: usize) -> usize {
        self.lexicons.len() + j
    }

    /// Subgraph keeping only the first `n` lexicons.
    pub fn restrict(&self, n: usize) -> BipartiteGraph {
        let n = n.min(self.lexicons.len());
        BipartiteGraph {
            lexicons: self.lexicons[..n].to_vec(),
            documents: self.documents.clone(),
            edges: self.edges.iter().copied().filter(|e| e.0 < n).collect(),
        }
    }

    pub fn degree_of_document(&self, j: usize) -> usize {
        self.edges.iter().filter(|e| e.1 == j).count()
    }

    /// Graphviz rendering for inspection.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("graph lexicons {\n");
        for (i, l) in self.lexicons.iter().enumerate() {
            let _ = writeln!(s, "  l{i} [label={l:?}, shape=box];");
        }
        for (j, d) in self.documents.iter().enumerate() {
            let _ = writeln!(s, "  d{j} [label={d:?}];");
        }
        for (l, d) in &self.edges {
            let _ = writeln!(s, "  l{l} -- d{d};");
        }
        s.push_str("}\n");
        s
    }
}

/// Connected-component labels for every node of a [`BipartiteGraph`].
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentLabeling {
    /// Component id per node; ids are dense and numbered by first node.
    pub component: Vec<usize>,
    /// Node count per component.
    pub sizes: Vec<usize>,
    /// Document count per component.
    pub doc_counts: Vec<usize>,
}

impl ComponentLabeling {
    pub fn n_components(&self) -> usize {
        self.sizes.len()
    }
}

pub fn connected_components(graph: &BipartiteGraph) -> ComponentLabeling {
    let n = graph.n_nodes();
    let mut uf = UnionFind::new(n);
    for &(l, d) in &graph.edges {
        uf.union(l, graph.doc_node(d));
    }
    let mut id_of_root = vec![usize::MAX; n];
    let mut component = Vec::with_capacity(n);
    let mut sizes = Vec::new();
    let mut doc_counts = Vec::new();
    for node in 0..n {
        let r = uf.find(node);
        if id_of_root[r] == usize::MAX {
            id_of_root[r] = sizes.len();
            sizes.push(0);
            doc_counts.push(0);
        }
        let c = id_of_root[r];
        component.push(c);
        sizes[c] += 1;
        if node >= graph.lexicons.len() {
            doc_counts[c] += 1;
        }
    }
    ComponentLabeling {
        component,
        sizes,
        doc_counts,
    }
}

/// Index of the largest document-bearing component by node count; ties
/// go to the component holding the smallest document id.
pub fn largest_component(graph: &BipartiteGraph, labeling: &ComponentLabeling) -> Option<usize> {
    let mut min_doc: Vec<Option<&str>> = vec![None; labeling.n_components()];
    for (j, id) in graph.documents.iter().enumerate() {
        let c = labeling.component[graph.doc_node(j)];
        if min_doc[c].is_none_or(|m| id.as_str() < m) {
            min_doc[c] = Some(id);
        }
    }
    (0..labeling.n_components())
        .filter(|&c| labeling.doc_counts[c] > 0)
        .min_by(|&a, &b| {
            labeling.sizes[b]
                .cmp(&labeling.sizes[a])
                .then_with(|| min_doc[a].cmp(&min_doc[b]))
        })
}

/// Documents of the largest component go to train, all others to test.
pub fn partition_by_largest_component(
    graph: &BipartiteGraph,
    labeling: &ComponentLabeling,
) -> (Vec<String>, Vec<String>) {
    let Some(best) = largest_component(graph, labeling) else {
        return (Vec::new(), Vec::new());
    };
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (j, id) in graph.documents.iter().enumerate() {
        if labeling.component[graph.doc_node(j)] == best {
            train.push(id.clone());
        } else {
            test.push(id.clone());
        }
    }
    (train, test)
}

//! Lexicon-disjoint train/test splits from lexicon–document graphs.

mod construct;
mod graph;
mod union_find;
mod verify;

pub use construct::{construct_lexicon_split, LexiconSplitConfig};
pub use graph::{
    build_bipartite_graph, connected_components, largest_component, partition_by_largest_component,
    BipartiteGraph, ComponentLabeling,
};
pub use union_find::UnionFind;
pub use verify::{verify_disjoint_lexicons, DisjointnessReport, Side, Violation};

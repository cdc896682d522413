//! Immutable simple graphs, SNAP edge-list ingestion and single-edge edits.
//!
//! Nodes are densely indexed `0..n`. The original integer ids read from an
//! edge list are kept as labels so that every output can be reported in the
//! caller's id space.

use std::collections::HashMap;
use std::fmt;
use std::io::BufRead;

use crate::error::{domain, Error, Result};

/// Dense node index.
pub type NodeId = usize;

/// Which adjacency list to read from a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Out,
    In,
    Undirected,
}

/// A simple graph (no self-loops, no parallel edges).
///
/// Undirected graphs store each edge in both endpoint lists. Directed graphs
/// keep separate successor and predecessor lists. All lists are sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    directed: bool,
    out_adj: Vec<Vec<NodeId>>,
    in_adj: Vec<Vec<NodeId>>,
    edge_count: usize,
    labels: Vec<u64>,
}

/// Result of parsing an edge list.
#[derive(Debug, Clone)]
pub struct LoadedGraph {
    pub graph: Graph,
    /// Input arcs that repeated an already stored edge (including reciprocal
    /// arcs folded into an undirected edge).
    pub duplicates_dropped: usize,
    pub self_loops_dropped: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EditKind {
    Add,
    Remove,
}

/// Adds or removes exactly one edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeEdit {
    pub kind: EditKind,
    pub from: NodeId,
    pub to: NodeId,
}

impl EdgeEdit {
    pub fn add(from: NodeId, to: NodeId) -> Self {
        EdgeEdit {
            kind: EditKind::Add,
            from,
            to,
        }
    }

    pub fn remove(from: NodeId, to: NodeId) -> Self {
        EdgeEdit {
            kind: EditKind::Remove,
            from,
            to,
        }
    }

    pub fn touches(&self, v: NodeId) -> bool {
        self.from == v || self.to == v
    }
}

impl fmt::Display for EdgeEdit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.kind {
            EditKind::Add => "add",
            EditKind::Remove => "remove",
        };
        write!(f, "{op} {}-{}", self.from, self.to)
    }
}

fn insert_sorted(list: &mut Vec<NodeId>, v: NodeId) -> bool {
    match list.binary_search(&v) {
        Ok(_) => false,
        Err(pos) => {
            list.insert(pos, v);
            true
        }
    }
}

fn remove_sorted(list: &mut Vec<NodeId>, v: NodeId) -> bool {
    match list.binary_search(&v) {
        Ok(pos) => {
            list.remove(pos);
            true
        }
        Err(_) => false,
    }
}

impl Graph {
    /// Graph with `n` nodes and no edges. Labels are the dense ids.
    pub fn empty(n: usize, directed: bool) -> Self {
        Graph {
            directed,
            out_adj: vec![Vec::new(); n],
            in_adj: if directed { vec![Vec::new(); n] } else { Vec::new() },
            edge_count: 0,
            labels: (0..n as u64).collect(),
        }
    }

    /// Builds a graph from dense edges. Self-loops, duplicates and out of
    /// range endpoints are rejected.
    pub fn from_edges(n: usize, directed: bool, edges: &[(NodeId, NodeId)]) -> Result<Self> {
        let mut g = Graph::empty(n, directed);
        for &(u, v) in edges {
            g.check_pair(u, v)?;
            if !g.insert_edge(u, v) {
                return Err(Error::Precondition(format!("duplicate edge {u}-{v}")));
            }
        }
        Ok(g)
    }

    fn check_pair(&self, u: NodeId, v: NodeId) -> Result<()> {
        let n = self.node_count();
        if u >= n || v >= n {
            return domain(format!("edge {u}-{v} out of range for {n} nodes"));
        }
        if u == v {
            return Err(Error::Precondition(format!("self-loop at {u}")));
        }
        Ok(())
    }

    fn insert_edge(&mut self, u: NodeId, v: NodeId) -> bool {
        if !insert_sorted(&mut self.out_adj[u], v) {
            return false;
        }
        if self.directed {
            insert_sorted(&mut self.in_adj[v], u);
        } else {
            insert_sorted(&mut self.out_adj[v], u);
        }
        self.edge_count += 1;
        true
    }

    fn delete_edge(&mut self, u: NodeId, v: NodeId) -> bool {
        if !remove_sorted(&mut self.out_adj[u], v) {
            return false;
        }
        if self.directed {
            remove_sorted(&mut self.in_adj[v], u);
        } else {
            remove_sorted(&mut self.out_adj[v], u);
        }
        self.edge_count -= 1;
        true
    }

    pub fn node_count(&self) -> usize {
        self.out_adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    /// Original id of a dense node.
    pub fn label(&self, v: NodeId) -> u64 {
        self.labels[v]
    }

    pub fn labels(&self) -> &[u64] {
        &self.labels
    }

    pub fn neighbors(&self, v: NodeId, direction: Direction) -> Result<&[NodeId]> {
        if v >= self.node_count() {
            return domain(format!("node {v} out of range for {} nodes", self.node_count()));
        }
        match (direction, self.directed) {
            (Direction::Undirected, true) => {
                domain("undirected neighborhood requested on a directed graph")
            }
            (Direction::In, true) => Ok(&self.in_adj[v]),
            _ => Ok(&self.out_adj[v]),
        }
    }

    /// Successors (directed) or adjacency (undirected), without a range check.
    pub fn out_neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.out_adj[v]
    }

    /// Out-degree; the degree for undirected graphs.
    pub fn degree(&self, v: NodeId) -> usize {
        self.out_adj[v].len()
    }

    pub fn max_degree(&self) -> usize {
        self.out_adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        u < self.node_count() && self.out_adj[u].binary_search(&v).is_ok()
    }

    /// Logical edges, each reported once (`u < v` for undirected graphs).
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        let directed = self.directed;
        self.out_adj.iter().enumerate().flat_map(move |(u, list)| {
            list.iter()
                .copied()
                .filter(move |&v| directed || u < v)
                .map(move |v| (u, v))
        })
    }

    /// Returns a new graph differing from `self` in exactly the edited edge.
    pub fn apply_edit(&self, edit: EdgeEdit) -> Result<Graph> {
        self.check_pair(edit.from, edit.to)?;
        let mut g = self.clone();
        let ok = match edit.kind {
            EditKind::Add => g.insert_edge(edit.from, edit.to),
            EditKind::Remove => g.delete_edge(edit.from, edit.to),
        };
        if ok {
            Ok(g)
        } else {
            let why = match edit.kind {
                EditKind::Add => "edge already present",
                EditKind::Remove => "edge not present",
            };
            Err(Error::Precondition(format!("cannot {edit}: {why}")))
        }
    }

    /// The edit that toggles the pair `(u, v)`.
    pub fn toggle(&self, u: NodeId, v: NodeId) -> EdgeEdit {
        if self.has_edge(u, v) {
            EdgeEdit::remove(u, v)
        } else {
            EdgeEdit::add(u, v)
        }
    }

    /// Relabels nodes: node `v` becomes `perm[v]`. Labels follow their nodes.
    pub fn permute(&self, perm: &[NodeId]) -> Result<Graph> {
        let n = self.node_count();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return domain("not a permutation of the node set");
        }
        let mut g = Graph::empty(n, self.directed);
        for (u, v) in self.edges() {
            g.insert_edge(perm[u], perm[v]);
        }
        for (v, &p) in perm.iter().enumerate() {
            g.labels[p] = self.labels[v];
        }
        Ok(g)
    }
}

/// Reads a SNAP-style edge list: `#` comments, one `src dst` pair per line.
///
/// Node ids are re-indexed densely in ascending order of their original
/// value. Self-loops and repeated edges are dropped and counted.
pub fn load_edge_list<R: BufRead>(source: R, directed: bool) -> Result<LoadedGraph> {
    let mut arcs: Vec<(u64, u64)> = Vec::new();
    for (idx, line) in source.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            msg: e.to_string(),
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut fields = trimmed.split_whitespace();
        let mut next_id = || -> Result<u64> {
            let tok = fields.next().ok_or_else(|| Error::Parse {
                line: lineno,
                msg: "expected two node ids".into(),
            })?;
            tok.parse::<u64>().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("invalid node id {tok:?}"),
            })
        };
        let u = next_id()?;
        let v = next_id()?;
        if let Some(extra) = fields.next() {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("unexpected trailing field {extra:?}"),
            });
        }
        arcs.push((u, v));
    }
    if arcs.is_empty() {
        return Err(Error::EmptyInput);
    }

    let mut labels: Vec<u64> = arcs.iter().flat_map(|&(u, v)| [u, v]).collect();
    labels.sort_unstable();
    labels.dedup();
    let index: HashMap<u64, NodeId> = labels.iter().enumerate().map(|(i, &l)| (l, i)).collect();

    let mut g = Graph::empty(labels.len(), directed);
    g.labels = labels;
    let mut duplicates_dropped = 0;
    let mut self_loops_dropped = 0;
    for (u, v) in arcs {
        if u == v {
            self_loops_dropped += 1;
        } else if !g.insert_edge(index[&u], index[&v]) {
            duplicates_dropped += 1;
        }
    }
    Ok(LoadedGraph {
        graph: g,
        duplicates_dropped,
        self_loops_dropped,
    })
}

/// Writes `g` in the edge-list format using original labels.
pub fn write_edge_list<W: std::io::Write>(g: &Graph, mut sink: W) -> std::io::Result<()> {
    writeln!(
        sink,
        "# {} graph: {} nodes, {} edges",
        if g.is_directed() { "directed" } else { "undirected" },
        g.node_count(),
        g.edge_count()
    )?;
    for (u, v) in g.edges() {
        writeln!(sink, "{}\t{}", g.label(u), g.label(v))?;
    }
    Ok(())
}

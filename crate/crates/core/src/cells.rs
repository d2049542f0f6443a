//! Node-cell reduction: nodes joined by non-switchable lines collapse into
//! one cell, and switchable lines become the edges between cells.

use crate::error::InstanceError;
use crate::instance::PhysicalNetwork;

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub id: String,
    /// Member node indices, ascending.
    pub nodes: Vec<usize>,
    /// Fault indices whose repair gates this cell.
    pub faults: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellEdge {
    /// Line index of the switchable line.
    pub line: usize,
    /// Cell at the line's `from` end.
    pub from: usize,
    /// Cell at the line's `to` end.
    pub to: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeCellGraph {
    pub cells: Vec<Cell>,
    pub cell_of_node: Vec<usize>,
    /// One edge per switchable line, in line order. Edge `k` belongs to
    /// switch task `k`.
    pub edges: Vec<CellEdge>,
}

impl NodeCellGraph {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Cells adjacent to switch task `k` (one or two).
    pub fn switch_cells(&self, k: usize) -> Vec<usize> {
        let e = &self.edges[k];
        if e.from == e.to {
            vec![e.from]
        } else {
            vec![e.from, e.to]
        }
    }
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet { parent: (0..n).collect() }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // keep the smaller index as representative
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Partition of `node_count` nodes into cells given `(from, to, switchable)`
/// line triples. Returns the cell of each node, with cells numbered by their
/// smallest member.
pub fn cell_partition(node_count: usize, lines: &[(usize, usize, bool)]) -> Vec<usize> {
    let mut dsu = DisjointSet::new(node_count);
    for &(a, b, switchable) in lines {
        if !switchable {
            dsu.union(a, b);
        }
    }
    let mut label = vec![usize::MAX; node_count];
    let mut cell_of = vec![0; node_count];
    let mut next = 0;
    for n in 0..node_count {
        let r = dsu.find(n);
        if label[r] == usize::MAX {
            label[r] = next;
            next += 1;
        }
        cell_of[n] = label[r];
    }
    cell_of
}

/// Reduces the physical network into its node-cell graph. `faults` lists the
/// damaged line indices; the returned cells reference positions in it.
pub fn reduce_network(net: &PhysicalNetwork, faults: &[usize]) -> Result<NodeCellGraph, InstanceError> {
    let triples: Vec<(usize, usize, bool)> =
        net.lines.iter().map(|l| (l.from, l.to, l.switch.is_some())).collect();
    let cell_of_node = cell_partition(net.nodes.len(), &triples);
    let count = cell_of_node.iter().copied().max().map_or(0, |m| m + 1);

    let mut cells: Vec<Cell> = (0..count)
        .map(|c| Cell { id: format!("NC-{}", c + 1), nodes: Vec::new(), faults: Vec::new() })
        .collect();
    for (n, &c) in cell_of_node.iter().enumerate() {
        cells[c].nodes.push(n);
    }

    let mut edges = Vec::new();
    for (idx, line) in net.lines.iter().enumerate() {
        if line.switch.is_none() {
            continue;
        }
        let (from, to) = (cell_of_node[line.from], cell_of_node[line.to]);
        if from == to {
            return Err(InstanceError::Reduction(format!(
                "switchable line `{}` has both endpoints in cell {}",
                line.id, cells[from].id
            )));
        }
        edges.push(CellEdge { line: idx, from, to });
    }

    for (f, &line) in faults.iter().enumerate() {
        let l = &net.lines[line];
        let (a, b) = (cell_of_node[l.from], cell_of_node[l.to]);
        cells[a].faults.push(f);
        if b != a {
            // damaged switchable line: both adjacent cells wait for it
            cells[b].faults.push(f);
        }
    }

    Ok(NodeCellGraph { cells, cell_of_node, edges })
}

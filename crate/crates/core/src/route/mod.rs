//! Cluster-head selection for a fixed visiting order.
//!
//! A tour fixes the order in which clusters are visited. Choosing one head
//! per cluster is then a shortest-path problem on a layered graph: layer 0
//! is the start, layers `1..=K` hold the candidate heads of the clusters in
//! visiting order, and layer `K + 1` is a copy of the start. Every edge
//! goes from one layer to the next.
//!
//! Edge costs charge the destination's per-cluster terms (weighted hover
//! energy plus weighted ground energy with the destination as head) together
//! with the weighted flight energy of the hop, so summing the edges of a
//! path gives the weighted objective of the corresponding solution.

mod astar;
mod brute;
mod dp;

pub use astar::{astar_on_graph, astar_select_chs, astar_select_with, SearchStats};
pub use brute::{brute_force_solve, BRUTE_FORCE_MAX_K, BRUTE_FORCE_MAX_COMBINATIONS};
pub use dp::{dp_on_graph, dp_select_chs, dp_select_with};

use crate::energy::{ClusterCosts, EnergyBreakdown, EnergyParams};
use crate::error::{Error, Result};
use crate::instance::{distance, Instance, Point, Tour};

/// Instance-dependent but order-independent costs, computed once and shared
/// by every search over the same instance.
#[derive(Debug, Clone)]
pub struct CostTable {
    /// `(1 - ω)` times the flight energy per metre.
    pub weighted_flight_j_per_m: f64,
    /// `node_cost[k][i]`: weighted hover plus ground energy of cluster `k`
    /// when node `i` is its head.
    pub node_cost: Vec<Vec<f64>>,
}

impl CostTable {
    pub fn new(params: &EnergyParams, instance: &Instance) -> Self {
        let costs = ClusterCosts::new(params);
        let w = params.omega;
        let node_cost = instance
            .clusters
            .iter()
            .map(|c| {
                let hover = costs.hover(c.nodes.len());
                c.nodes
                    .iter()
                    .enumerate()
                    .map(|(i, &head)| (1.0 - w) * hover + w * costs.ground(&c.nodes, head, i))
                    .collect()
            })
            .collect();
        Self {
            weighted_flight_j_per_m: (1.0 - w) * costs.flight_j_per_m,
            node_cost,
        }
    }
}

/// Node handle inside a [`LayeredGraph`]. Ids are dense: `0` is the start,
/// the candidates of each layer follow in order, the end copy is last.
pub type GraphNode = usize;

/// The `(K + 2)`-layer search graph induced by a tour.
#[derive(Debug, Clone)]
pub struct LayeredGraph<'a> {
    table: &'a CostTable,
    /// First node id of every layer, plus a sentinel.
    offsets: Vec<usize>,
    /// Instance cluster index behind every inner layer (`None` for the two
    /// terminal layers).
    layer_cluster: Vec<Option<usize>>,
    points: Vec<Point>,
    layer_of: Vec<usize>,
}

impl<'a> LayeredGraph<'a> {
    pub fn new(table: &'a CostTable, instance: &Instance, tour: &Tour) -> Result<Self> {
        tour.check_against(instance.k())?;
        let mut offsets = vec![0, 1];
        let mut layer_cluster = vec![None];
        let mut points = vec![instance.start];
        let mut layer_of = vec![0];
        for (layer, cluster) in tour.cluster_order().enumerate() {
            let nodes = &instance.clusters[cluster].nodes;
            points.extend_from_slice(nodes);
            layer_of.extend(std::iter::repeat_n(layer + 1, nodes.len()));
            layer_cluster.push(Some(cluster));
            offsets.push(points.len());
        }
        points.push(instance.start);
        layer_of.push(layer_cluster.len());
        layer_cluster.push(None);
        offsets.push(points.len());
        Ok(Self {
            table,
            offsets,
            layer_cluster,
            points,
            layer_of,
        })
    }

    pub fn num_layers(&self) -> usize {
        self.layer_cluster.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.points.len()
    }

    pub fn start(&self) -> GraphNode {
        0
    }

    pub fn end(&self) -> GraphNode {
        self.points.len() - 1
    }

    pub fn layer(&self, layer: usize) -> std::ops::Range<GraphNode> {
        self.offsets[layer]..self.offsets[layer + 1]
    }

    pub fn layer_of(&self, node: GraphNode) -> usize {
        self.layer_of[node]
    }

    pub fn point(&self, node: GraphNode) -> Point {
        self.points[node]
    }

    /// Nodes reachable in one hop (the next layer).
    pub fn successors(&self, node: GraphNode) -> std::ops::Range<GraphNode> {
        let layer = self.layer_of[node];
        if layer + 1 < self.num_layers() {
            self.layer(layer + 1)
        } else {
            0..0
        }
    }

    /// Cluster index and in-cluster node index behind an inner node.
    pub fn candidate(&self, node: GraphNode) -> Option<(usize, usize)> {
        let layer = self.layer_of[node];
        self.layer_cluster[layer].map(|k| (k, node - self.offsets[layer]))
    }

    /// Weighted energy charged for moving from `from` to `to`.
    pub fn edge_cost(&self, from: GraphNode, to: GraphNode) -> Result<f64> {
        if from >= self.num_nodes()
            || to >= self.num_nodes()
            || self.layer_of[to] != self.layer_of[from] + 1
        {
            return Err(Error::NotAdjacent { from, to });
        }
        Ok(self.edge_cost_unchecked(from, to))
    }

    #[inline]
    pub(crate) fn edge_cost_unchecked(&self, from: GraphNode, to: GraphNode) -> f64 {
        let flight = self.table.weighted_flight_j_per_m * distance(self.points[from], self.points[to]);
        match self.candidate(to) {
            Some((k, i)) => flight + self.table.node_cost[k][i],
            None => flight,
        }
    }

    /// Straight-line weighted flight energy from `node` back to the end copy
    /// of the start. Never overestimates the remaining cost, and is
    /// consistent since every edge pays at least its own flight term.
    pub fn heuristic(&self, node: GraphNode) -> f64 {
        self.table.weighted_flight_j_per_m * distance(self.points[node], self.points[self.end()])
    }

    /// Converts a start-to-end node path into per-cluster head indices.
    pub fn heads_from_path(&self, path: &[GraphNode], k: usize) -> Vec<usize> {
        let mut heads = vec![0; k];
        for &node in path {
            if let Some((cluster, idx)) = self.candidate(node) {
                heads[cluster] = idx;
            }
        }
        heads
    }
}

/// Outcome of a head-selection search.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadSelection {
    /// Head index per cluster, in instance order.
    pub ch_choices: Vec<usize>,
    /// Sum of edge costs along the optimal path.
    pub path_cost_j: f64,
    pub breakdown: EnergyBreakdown,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::evaluate_solution;
    use crate::instance::{generate, Cluster};

    fn tiny() -> Instance {
        Instance::new(
            1000.0,
            0,
            [0.0, 0.0],
            vec![
                Cluster { nodes: vec![[100.0, 0.0], [120.0, 10.0]] },
                Cluster { nodes: vec![[300.0, 300.0], [280.0, 330.0], [260.0, 200.0]] },
            ],
        )
        .unwrap()
    }

    #[test]
    fn graph_shape() {
        let inst = tiny();
        let p = EnergyParams::default();
        let table = CostTable::new(&p, &inst);
        let g = LayeredGraph::new(&table, &inst, &Tour::new(vec![0, 2, 1]).unwrap()).unwrap();
        assert_eq!(g.num_layers(), 4);
        assert_eq!(g.num_nodes(), 7);
        assert_eq!(g.layer(1), 1..4);
        assert_eq!(g.candidate(1), Some((1, 0)));
        assert_eq!(g.candidate(5), Some((0, 1)));
        assert_eq!(g.candidate(g.end()), None);
        assert_eq!(g.successors(g.end()), 0..0);
    }

    #[test]
    fn edge_cost_rejects_non_adjacent() {
        let inst = tiny();
        let p = EnergyParams::default();
        let table = CostTable::new(&p, &inst);
        let g = LayeredGraph::new(&table, &inst, &Tour::identity(2)).unwrap();
        assert!(matches!(g.edge_cost(0, 3), Err(Error::NotAdjacent { .. })));
        assert!(matches!(g.edge_cost(1, 0), Err(Error::NotAdjacent { .. })));
        assert!(g.edge_cost(0, 1).is_ok());
    }

    #[test]
    fn edge_cost_weight_extremes() {
        let inst = tiny();
        let p1 = EnergyParams::default().with_omega(1.0);
        let table = CostTable::new(&p1, &inst);
        let g = LayeredGraph::new(&table, &inst, &Tour::identity(2)).unwrap();
        let ground = crate::energy::cluster_ground_energy_j(&p1, &inst.clusters[0].nodes, 1).unwrap();
        assert_eq!(g.edge_cost(0, 2).unwrap(), ground);
        assert_eq!(g.heuristic(3), 0.0);

        let p0 = EnergyParams::default().with_omega(0.0);
        let table = CostTable::new(&p0, &inst);
        let g = LayeredGraph::new(&table, &inst, &Tour::identity(2)).unwrap();
        let last = g.layer(2).start;
        let d = distance(g.point(last), [0.0, 0.0]);
        let expect = crate::energy::flight_energy_j(&p0, d);
        assert!((g.edge_cost(last, g.end()).unwrap() - expect).abs() < 1e-12 * expect);
        assert!((g.heuristic(last) - expect).abs() < 1e-12 * expect);
        assert_eq!(g.heuristic(g.end()), 0.0);
    }

    #[test]
    fn edge_cost_equals_difference_of_evaluations() {
        // One-cluster instances: the full path cost is the single-cluster
        // objective, and the edge into the cluster is the cost minus the
        // return leg.
        let p = EnergyParams::default();
        let inst = Instance::new(
            1000.0,
            0,
            [0.0, 0.0],
            vec![Cluster { nodes: vec![[300.0, 400.0], [310.0, 380.0]] }],
        )
        .unwrap();
        let table = CostTable::new(&p, &inst);
        let g = LayeredGraph::new(&table, &inst, &Tour::identity(1)).unwrap();
        for head in 0..2 {
            let total = evaluate_solution(&p, &inst, &Tour::identity(1), &[head])
                .unwrap()
                .e_total_weighted_j;
            let ret = g.edge_cost(1 + head, g.end()).unwrap();
            let into = g.edge_cost(0, 1 + head).unwrap();
            assert!((into - (total - ret)).abs() <= 1e-9 * total);
        }
    }

    #[test]
    fn heuristic_is_consistent_exhaustively() {
        for seed in 0..20 {
            let inst = generate(5, 4, 2000.0, 80.0, seed);
            for omega in [0.0, 0.3, 1.0] {
                let p = EnergyParams::default().with_omega(omega);
                let table = CostTable::new(&p, &inst);
                let g = LayeredGraph::new(&table, &inst, &Tour::identity(5)).unwrap();
                for m in 0..g.num_nodes() {
                    for n in g.successors(m) {
                        let lhs = g.heuristic(m);
                        let rhs = g.edge_cost(m, n).unwrap() + g.heuristic(n);
                        assert!(lhs <= rhs * (1.0 + 1e-12), "h({m}) = {lhs} > {rhs}");
                    }
                }
            }
        }
    }
}

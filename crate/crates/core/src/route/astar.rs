use std::collections::BTreeSet;

use ordered_float::OrderedFloat;

use super::{CostTable, GraphNode, HeadSelection, LayeredGraph};
use crate::energy::{evaluate_solution, EnergyParams};
use crate::error::Result;
use crate::instance::{Instance, Tour};

/// Open-list key: lowest `f`, then lowest `g`, then earliest insertion.
type OpenKey = (OrderedFloat<f64>, OrderedFloat<f64>, u64, GraphNode);

#[derive(Debug, Clone, Copy, PartialEq)]
enum Status {
    Unseen,
    Open(OpenKey),
    Closed,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SearchStats {
    pub expansions: usize,
    pub reopened: usize,
}

/// A* over the layered graph. Returns the node path from start to end, its
/// cost, and search counters.
///
/// Improvements to a node already in OPEN or CLOSED remove it from that list
/// and re-insert it with the new `g` and parent.
pub fn astar_on_graph(graph: &LayeredGraph<'_>) -> (Vec<GraphNode>, f64, SearchStats) {
    let n = graph.num_nodes();
    let start = graph.start();
    let end = graph.end();

    let mut status = vec![Status::Unseen; n];
    let mut g = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut open: BTreeSet<OpenKey> = BTreeSet::new();
    let mut seq = 0u64;
    let mut stats = SearchStats::default();

    g[start] = 0.0;
    let key = (OrderedFloat(0.0), OrderedFloat(0.0), seq, start);
    open.insert(key);
    status[start] = Status::Open(key);

    while let Some(key) = open.pop_first() {
        let q = key.3;
        if q == end {
            let mut path = vec![end];
            let mut cur = end;
            while cur != start {
                cur = parent[cur];
                path.push(cur);
            }
            path.reverse();
            return (path, g[end], stats);
        }
        status[q] = Status::Closed;
        stats.expansions += 1;

        for m in graph.successors(q) {
            let cost = g[q] + graph.edge_cost_unchecked(q, m);
            match status[m] {
                Status::Open(old) if cost < g[m] => {
                    open.remove(&old);
                    status[m] = Status::Unseen;
                }
                Status::Closed if cost < g[m] => {
                    status[m] = Status::Unseen;
                    stats.reopened += 1;
                }
                _ => {}
            }
            if status[m] == Status::Unseen {
                g[m] = cost;
                let f = cost + graph.heuristic(m);
                seq += 1;
                let key = (OrderedFloat(f), OrderedFloat(cost), seq, m);
                open.insert(key);
                status[m] = Status::Open(key);
                parent[m] = q;
            }
        }
    }
    unreachable!("the end layer is always reachable in a layered graph")
}

/// Selects the energy-optimal head of every cluster for `tour` by A*.
pub fn astar_select_chs(params: &EnergyParams, instance: &Instance, tour: &Tour) -> Result<HeadSelection> {
    let table = CostTable::new(params, instance);
    astar_select_with(params, &table, instance, tour)
}

/// As [`astar_select_chs`] with a precomputed cost table.
pub fn astar_select_with(
    params: &EnergyParams,
    table: &CostTable,
    instance: &Instance,
    tour: &Tour,
) -> Result<HeadSelection> {
    let graph = LayeredGraph::new(table, instance, tour)?;
    let (path, cost, _) = astar_on_graph(&graph);
    let ch_choices = graph.heads_from_path(&path, instance.k());
    let breakdown = evaluate_solution(params, instance, tour, &ch_choices)?;
    Ok(HeadSelection {
        ch_choices,
        path_cost_j: cost,
        breakdown,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{generate, Cluster};

    #[test]
    fn single_node_cluster_has_one_path() {
        let p = EnergyParams::default();
        let inst = Instance::new(
            100.0,
            0,
            [0.0, 0.0],
            vec![Cluster { nodes: vec![[30.0, 40.0]] }],
        )
        .unwrap();
        let tour = Tour::identity(1);
        let sel = astar_select_chs(&p, &inst, &tour).unwrap();
        assert_eq!(sel.ch_choices, vec![0]);
        let e = evaluate_solution(&p, &inst, &tour, &[0]).unwrap();
        assert_eq!(sel.breakdown, e);
    }

    #[test]
    fn path_visits_one_node_per_layer() {
        let inst = generate(6, 5, 2000.0, 40.0, 3);
        let p = EnergyParams::default();
        let table = CostTable::new(&p, &inst);
        let tour = Tour::new(vec![0, 3, 1, 6, 2, 5, 4]).unwrap();
        let graph = LayeredGraph::new(&table, &inst, &tour).unwrap();
        let (path, cost, stats) = astar_on_graph(&graph);
        assert_eq!(path.len(), graph.num_layers());
        for (layer, &node) in path.iter().enumerate() {
            assert_eq!(graph.layer_of(node), layer);
        }
        let summed: f64 = path.windows(2).map(|w| graph.edge_cost(w[0], w[1]).unwrap()).sum();
        assert_eq!(summed, cost);
        assert!(stats.expansions >= graph.num_layers() - 1);
        // A consistent heuristic never needs to reopen a closed node.
        assert_eq!(stats.reopened, 0);
    }

    #[test]
    fn path_cost_matches_evaluation() {
        for seed in 0..30 {
            let inst = generate(5, 4, 2000.0, 60.0, seed);
            let p = EnergyParams::default().with_omega(0.4);
            let tour = Tour::new(vec![0, 5, 3, 1, 2, 4]).unwrap();
            let sel = astar_select_chs(&p, &inst, &tour).unwrap();
            let total = sel.breakdown.e_total_weighted_j;
            assert!((sel.path_cost_j - total).abs() <= 1e-9 * total);
        }
    }
}

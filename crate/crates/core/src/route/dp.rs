use super::{CostTable, GraphNode, HeadSelection, LayeredGraph};
use crate::energy::{evaluate_solution, EnergyParams};
use crate::error::Result;
use crate::instance::{Instance, Tour};

/// Layer-by-layer dynamic program over the layered graph. Exact; used as the
/// reference for the A* search. Ties keep the lowest predecessor id.
pub fn dp_on_graph(graph: &LayeredGraph<'_>) -> (Vec<GraphNode>, f64) {
    let n = graph.num_nodes();
    let mut best = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    best[graph.start()] = 0.0;

    for layer in 1..graph.num_layers() {
        let prev = graph.layer(layer - 1);
        for m in graph.layer(layer) {
            for q in prev.clone() {
                let cost = best[q] + graph.edge_cost_unchecked(q, m);
                if cost < best[m] {
                    best[m] = cost;
                    parent[m] = q;
                }
            }
        }
    }

    let end = graph.end();
    let mut path = vec![end];
    let mut cur = end;
    while cur != graph.start() {
        cur = parent[cur];
        path.push(cur);
    }
    path.reverse();
    (path, best[end])
}

pub fn dp_select_chs(params: &EnergyParams, instance: &Instance, tour: &Tour) -> Result<HeadSelection> {
    let table = CostTable::new(params, instance);
    dp_select_with(params, &table, instance, tour)
}

pub fn dp_select_with(
    params: &EnergyParams,
    table: &CostTable,
    instance: &Instance,
    tour: &Tour,
) -> Result<HeadSelection> {
    let graph = LayeredGraph::new(table, instance, tour)?;
    let (path, cost) = dp_on_graph(&graph);
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
    use crate::route::astar_on_graph;

    #[test]
    fn single_node_layers_give_unique_path() {
        let inst = generate(4, 1, 1000.0, 10.0, 5);
        let p = EnergyParams::default();
        let sel = dp_select_chs(&p, &inst, &Tour::identity(4)).unwrap();
        assert_eq!(sel.ch_choices, vec![0; 4]);
    }

    #[test]
    fn cost_is_sum_of_edges() {
        let inst = generate(5, 3, 2000.0, 50.0, 8);
        let p = EnergyParams::default();
        let table = CostTable::new(&p, &inst);
        let graph = LayeredGraph::new(&table, &inst, &Tour::identity(5)).unwrap();
        let (path, cost) = dp_on_graph(&graph);
        let summed: f64 = path.windows(2).map(|w| graph.edge_cost(w[0], w[1]).unwrap()).sum();
        assert_eq!(summed, cost);
    }

    #[test]
    fn heuristic_never_exceeds_optimal_remaining_cost() {
        // Backward DP gives the exact cost-to-go of every node.
        for seed in 0..40 {
            let inst = generate(6, 4, 2000.0, 100.0, seed);
            let p = EnergyParams::default().with_omega(0.25);
            let table = CostTable::new(&p, &inst);
            let graph = LayeredGraph::new(&table, &inst, &Tour::identity(6)).unwrap();
            let mut to_go = vec![f64::INFINITY; graph.num_nodes()];
            to_go[graph.end()] = 0.0;
            for layer in (0..graph.num_layers() - 1).rev() {
                for m in graph.layer(layer) {
                    to_go[m] = graph
                        .successors(m)
                        .map(|n| graph.edge_cost(m, n).unwrap() + to_go[n])
                        .fold(f64::INFINITY, f64::min);
                }
            }
            for m in 0..graph.num_nodes() {
                assert!(graph.heuristic(m) <= to_go[m] * (1.0 + 1e-12));
            }
            let (_, astar_cost) = {
                let (p, c, _) = astar_on_graph(&graph);
                (p, c)
            };
            assert!((astar_cost - to_go[0]).abs() <= 1e-9 * to_go[0]);
        }
    }

    #[test]
    fn picks_cheaper_head() {
        // Heads far from the other members burn multipath energy; with the
        // ground term dominating the middle node wins.
        let p = EnergyParams::default().with_omega(1.0);
        let inst = Instance::new(
            1000.0,
            0,
            [0.0, 0.0],
            vec![Cluster { nodes: vec![[0.0, 0.0], [200.0, 0.0], [400.0, 0.0]] }],
        )
        .unwrap();
        let sel = dp_select_chs(&p, &inst, &Tour::identity(1)).unwrap();
        assert_eq!(sel.ch_choices, vec![1]);
    }
}

//! Classical comparison solvers: nearest neighbour, a genetic algorithm,
//! and a uniformly random order.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{evaluate_solution, EnergyParams};
use crate::error::{Error, Result};
use crate::instance::{distance, Instance, Tour};
use crate::route::dp_select_chs;
use crate::solution::Solution;

/// Visits the unvisited cluster whose centroid is nearest to the current
/// position (the start, then the previous centroid); heads by DP.
pub fn solve_nearest_neighbor(params: &EnergyParams, instance: &Instance) -> Result<Solution> {
    let centroids: Vec<_> = instance.clusters.iter().map(|c| c.centroid()).collect();
    let mut visited = vec![false; centroids.len()];
    let mut order = Vec::with_capacity(centroids.len());
    let mut here = instance.start;
    for _ in 0..centroids.len() {
        let mut next = None;
        let mut best = f64::INFINITY;
        for (i, &c) in centroids.iter().enumerate() {
            let d = distance(here, c);
            if !visited[i] && d < best {
                best = d;
                next = Some(i);
            }
        }
        let next = next.expect("an unvisited cluster remains");
        visited[next] = true;
        order.push(next);
        here = centroids[next];
    }
    let tour = Tour::from_cluster_order(&order)?;
    let sel = dp_select_chs(params, instance, &tour)?;
    Ok(Solution::new(instance, tour, sel))
}

/// Uniformly random visiting order; heads by DP.
pub fn solve_random<R: Rng + ?Sized>(params: &EnergyParams, instance: &Instance, rng: &mut R) -> Result<Solution> {
    let mut order: Vec<usize> = (0..instance.k()).collect();
    order.shuffle(rng);
    let tour = Tour::from_cluster_order(&order)?;
    let sel = dp_select_chs(params, instance, &tour)?;
    Ok(Solution::new(instance, tour, sel))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaConfig {
    pub population_size: usize,
    pub generations: usize,
    /// Probability per gene.
    pub mutation_rate: f64,
    pub elitism_count: usize,
    pub tournament_size: usize,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population_size: 150,
            generations: 4000,
            mutation_rate: 0.005,
            elitism_count: 1,
            tournament_size: 2,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 2 {
            return Err(Error::InvalidConfig("population_size must be >= 2".into()));
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            return Err(Error::InvalidConfig("mutation_rate must lie in [0, 1]".into()));
        }
        if self.elitism_count >= self.population_size {
            return Err(Error::InvalidConfig("elitism_count must be below population_size".into()));
        }
        if self.tournament_size == 0 {
            return Err(Error::InvalidConfig("tournament_size must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Individual {
    /// 0-based cluster indices in visiting order.
    perm: Vec<usize>,
    /// Head index per cluster, in instance order.
    heads: Vec<usize>,
    energy: f64,
}

fn evaluate(params: &EnergyParams, instance: &Instance, perm: &[usize], heads: &[usize]) -> Result<f64> {
    let tour = Tour::from_cluster_order(perm)?;
    Ok(evaluate_solution(params, instance, &tour, heads)?.e_total_weighted_j)
}

fn score_all(params: &EnergyParams, instance: &Instance, pop: &mut [Individual]) -> Result<()> {
    pop.par_iter_mut().try_for_each(|ind| {
        ind.energy = evaluate(params, instance, &ind.perm, &ind.heads)?;
        Ok(())
    })
}

/// Index of the lowest energy, earliest on ties.
fn fittest(pop: &[Individual]) -> usize {
    let mut best = 0;
    for (i, ind) in pop.iter().enumerate() {
        if ind.energy < pop[best].energy {
            best = i;
        }
    }
    best
}

fn tournament<'a, R: Rng>(pop: &'a [Individual], size: usize, rng: &mut R) -> &'a Individual {
    let mut best = rng.random_range(0..pop.len());
    for _ in 1..size {
        let i = rng.random_range(0..pop.len());
        if pop[i].energy < pop[best].energy {
            best = i;
        }
    }
    &pop[best]
}

/// Order crossover: copies `a[i..=j]`, then fills the remaining positions
/// (wrapping from `j + 1`) with the genes of `b` in their order from `j + 1`.
pub(crate) fn order_crossover(a: &[usize], b: &[usize], i: usize, j: usize) -> Vec<usize> {
    let n = a.len();
    let mut child = vec![usize::MAX; n];
    let mut used = vec![false; n];
    for p in i..=j {
        child[p] = a[p];
        used[a[p]] = true;
    }
    let mut pos = (j + 1) % n;
    for off in 0..n {
        let gene = b[(j + 1 + off) % n];
        if !used[gene] {
            child[pos] = gene;
            used[gene] = true;
            pos = (pos + 1) % n;
        }
    }
    child
}

fn breed<R: Rng>(instance: &Instance, pop: &[Individual], config: &GaConfig, rng: &mut R) -> Individual {
    let a = tournament(pop, config.tournament_size, rng);
    let b = tournament(pop, config.tournament_size, rng);
    let k = a.perm.len();
    let (mut i, mut j) = (rng.random_range(0..k), rng.random_range(0..k));
    if i > j {
        std::mem::swap(&mut i, &mut j);
    }
    let mut perm = order_crossover(&a.perm, &b.perm, i, j);
    let mut heads: Vec<usize> = (0..k)
        .map(|c| if rng.random_bool(0.5) { a.heads[c] } else { b.heads[c] })
        .collect();
    for p in 0..k {
        if rng.random_bool(config.mutation_rate) {
            let q = rng.random_range(0..k);
            perm.swap(p, q);
        }
    }
    for (c, h) in heads.iter_mut().enumerate() {
        if rng.random_bool(config.mutation_rate) {
            *h = rng.random_range(0..instance.clusters[c].nodes.len());
        }
    }
    Individual {
        perm,
        heads,
        energy: f64::NAN,
    }
}

/// Genetic search over (order, heads) chromosomes. Returns the best
/// solution seen and the best-so-far energy after initialisation and after
/// each generation.
pub fn solve_genetic_traced(
    params: &EnergyParams,
    instance: &Instance,
    config: &GaConfig,
) -> Result<(Solution, Vec<f64>)> {
    config.validate()?;
    instance.validate()?;
    let k = instance.k();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut pop: Vec<Individual> = (0..config.population_size)
        .map(|_| {
            let mut perm: Vec<usize> = (0..k).collect();
            perm.shuffle(&mut rng);
            let heads = instance
                .clusters
                .iter()
                .map(|c| rng.random_range(0..c.nodes.len()))
                .collect();
            Individual {
                perm,
                heads,
                energy: f64::NAN,
            }
        })
        .collect();
    score_all(params, instance, &mut pop)?;
    let mut best = pop[fittest(&pop)].clone();
    let mut trace = vec![best.energy];

    for _ in 0..config.generations {
        let mut ranked: Vec<usize> = (0..pop.len()).collect();
        ranked.sort_by(|&x, &y| pop[x].energy.total_cmp(&pop[y].energy).then(x.cmp(&y)));
        let mut next: Vec<Individual> = ranked[..config.elitism_count]
            .iter()
            .map(|&i| pop[i].clone())
            .collect();
        let mut children: Vec<Individual> = (next.len()..config.population_size)
            .map(|_| breed(instance, &pop, config, &mut rng))
            .collect();
        score_all(params, instance, &mut children)?;
        next.append(&mut children);
        pop = next;
        let gen_best = &pop[fittest(&pop)];
        if gen_best.energy < best.energy {
            best = gen_best.clone();
        }
        trace.push(best.energy);
    }

    let tour = Tour::from_cluster_order(&best.perm)?;
    Ok((Solution::evaluate(params, instance, tour, best.heads)?, trace))
}

pub fn solve_genetic(params: &EnergyParams, instance: &Instance, config: &GaConfig) -> Result<Solution> {
    solve_genetic_traced(params, instance, config).map(|(s, _)| s)
}

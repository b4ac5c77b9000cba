use itertools::Itertools;

use super::HeadSelection;
use crate::energy::{evaluate_solution, EnergyParams};
use crate::error::{Error, Result};
use crate::instance::{Instance, Tour};

pub const BRUTE_FORCE_MAX_K: usize = 8;
pub const BRUTE_FORCE_MAX_COMBINATIONS: u64 = 1_000_000;

/// Exhaustive minimum over every visiting order and every head assignment,
/// each scored through [`evaluate_solution`]. Ties resolve to the
/// lexicographically smallest `(tour, heads)`.
pub fn brute_force_solve(params: &EnergyParams, instance: &Instance) -> Result<(Tour, HeadSelection)> {
    let k = instance.k();
    if k > BRUTE_FORCE_MAX_K {
        return Err(Error::TooLarge(format!(
            "{k} clusters (limit {BRUTE_FORCE_MAX_K})"
        )));
    }
    let sizes = instance.cluster_sizes();
    sizes
        .iter()
        .try_fold(1u64, |acc, &s| acc.checked_mul(s as u64))
        .filter(|&c| c <= BRUTE_FORCE_MAX_COMBINATIONS)
        .ok_or_else(|| {
            Error::TooLarge(format!(
                "head combinations exceed {BRUTE_FORCE_MAX_COMBINATIONS}"
            ))
        })?;

    let mut best: Option<(Tour, Vec<usize>, crate::energy::EnergyBreakdown)> = None;
    for order in (0..k).permutations(k) {
        let tour = Tour::from_cluster_order(&order)?;
        let mut heads = vec![0usize; k];
        loop {
            let e = evaluate_solution(params, instance, &tour, &heads)?;
            if best
                .as_ref()
                .is_none_or(|(_, _, b)| e.e_total_weighted_j < b.e_total_weighted_j)
            {
                best = Some((tour.clone(), heads.clone(), e));
            }
            if !advance(&mut heads, &sizes) {
                break;
            }
        }
    }
    let (tour, ch_choices, breakdown) = best.expect("at least one candidate");
    Ok((
        tour,
        HeadSelection {
            ch_choices,
            path_cost_j: breakdown.e_total_weighted_j,
            breakdown,
        },
    ))
}

/// Odometer step with the last cluster fastest, so enumeration is
/// lexicographic. Returns `false` after the last combination.
fn advance(heads: &mut [usize], sizes: &[usize]) -> bool {
    for pos in (0..heads.len()).rev() {
        heads[pos] += 1;
        if heads[pos] < sizes[pos] {
            return true;
        }
        heads[pos] = 0;
    }
    false
}

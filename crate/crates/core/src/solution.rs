use serde::{Deserialize, Serialize};

use crate::energy::{evaluate_solution, head_polyline, tour_length_m, EnergyBreakdown, EnergyParams};
use crate::error::Result;
use crate::instance::{Instance, Point, Tour};
use crate::route::HeadSelection;

/// A complete answer: visiting order, one head per cluster, and its energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub tour: Tour,
    /// Head index per cluster, in instance order.
    pub ch_choices: Vec<usize>,
    pub energy: EnergyBreakdown,
    pub tour_length_m: f64,
}

impl Solution {
    pub fn new(instance: &Instance, tour: Tour, selection: HeadSelection) -> Self {
        let tour_length_m = tour_length_m(instance, &tour, &selection.ch_choices);
        Self {
            tour,
            ch_choices: selection.ch_choices,
            energy: selection.breakdown,
            tour_length_m,
        }
    }

    pub fn evaluate(params: &EnergyParams, instance: &Instance, tour: Tour, ch_choices: Vec<usize>) -> Result<Self> {
        let energy = evaluate_solution(params, instance, &tour, &ch_choices)?;
        let tour_length_m = tour_length_m(instance, &tour, &ch_choices);
        Ok(Self {
            tour,
            ch_choices,
            energy,
            tour_length_m,
        })
    }

    pub fn total_j(&self) -> f64 {
        self.energy.e_total_weighted_j
    }

    /// Relative difference between the reported total and a fresh
    /// evaluation of the same tour and heads.
    pub fn reverify(&self, params: &EnergyParams, instance: &Instance) -> Result<f64> {
        let fresh = evaluate_solution(params, instance, &self.tour, &self.ch_choices)?;
        let a = fresh.e_total_weighted_j;
        let b = self.energy.e_total_weighted_j;
        Ok((a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE))
    }

    /// Hovering points in visiting order, starting and ending at the start.
    pub fn polyline(&self, instance: &Instance) -> Vec<Point> {
        head_polyline(instance, &self.tour, &self.ch_choices)
    }
}

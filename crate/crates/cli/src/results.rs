use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use uavroute::{Instance, Solution, Tour};

/// Column order of the results CSV.
pub const RESULTS_HEADER: [&str; 9] = [
    "instance_id",
    "k",
    "solver",
    "energy_j",
    "e_ground_j",
    "e_uav_j",
    "tour_length_m",
    "wall_time_s",
    "seed",
];

/// One (instance, solver) run. Energy fields are empty when the solver
/// failed on that instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub instance_id: String,
    pub k: usize,
    pub solver: String,
    pub energy_j: Option<f64>,
    pub e_ground_j: Option<f64>,
    pub e_uav_j: Option<f64>,
    pub tour_length_m: Option<f64>,
    pub wall_time_s: f64,
    pub seed: u64,
}

impl ResultRow {
    pub fn from_solution(instance_id: &str, k: usize, solver: &str, sol: &Solution, wall_time_s: f64, seed: u64) -> Self {
        Self {
            instance_id: instance_id.to_string(),
            k,
            solver: solver.to_string(),
            energy_j: Some(sol.energy.e_total_weighted_j),
            e_ground_j: Some(sol.energy.e_ground_j),
            e_uav_j: Some(sol.energy.e_uav_j()),
            tour_length_m: Some(sol.tour_length_m),
            wall_time_s,
            seed,
        }
    }

    pub fn failed(instance_id: &str, k: usize, solver: &str, wall_time_s: f64, seed: u64) -> Self {
        Self {
            instance_id: instance_id.to_string(),
            k,
            solver: solver.to_string(),
            energy_j: None,
            e_ground_j: None,
            e_uav_j: None,
            tour_length_m: None,
            wall_time_s,
            seed,
        }
    }
}

pub fn write_results(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    anyhow::ensure!(header == RESULTS_HEADER, "unexpected results header {header:?}");
    r.deserialize()
        .map(|row| row.with_context(|| format!("reading {}", path.display())))
        .collect()
}

/// Enough to re-evaluate one reported result from scratch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub instance_id: String,
    pub solver: String,
    pub instance: Instance,
    pub tour: Tour,
    pub ch_choices: Vec<usize>,
}

pub fn write_solutions(path: &Path, records: &[SolutionRecord]) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    for rec in records {
        serde_json::to_writer(&mut w, rec)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_solutions(path: &Path) -> Result<Vec<SolutionRecord>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    BufReader::new(file)
        .lines()
        .enumerate()
        .filter(|(_, l)| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|(i, line)| {
            let line = line?;
            serde_json::from_str(&line).with_context(|| format!("{} line {}", path.display(), i + 1))
        })
        .collect()
}

/// Mean per-instance energy ratio of each solver to the reference solver,
/// grouped by K. Instances where either run failed are skipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub k: usize,
    pub solver: String,
    pub mean_ratio: f64,
    pub instances: usize,
}

pub fn ratio_table(rows: &[ResultRow], reference: &str) -> Vec<RatioRow> {
    let reference_energy: BTreeMap<&str, f64> = rows
        .iter()
        .filter(|r| r.solver == reference)
        .filter_map(|r| Some((r.instance_id.as_str(), r.energy_j?)))
        .collect();
    let mut solvers: Vec<&str> = Vec::new();
    for r in rows {
        if !solvers.contains(&r.solver.as_str()) {
            solvers.push(&r.solver);
        }
    }
    let mut sums: BTreeMap<(usize, usize), (f64, usize)> = BTreeMap::new();
    for r in rows {
        let (Some(e), Some(&base)) = (r.energy_j, reference_energy.get(r.instance_id.as_str())) else {
            continue;
        };
        let idx = solvers.iter().position(|s| *s == r.solver).expect("solver listed");
        let entry = sums.entry((r.k, idx)).or_insert((0.0, 0));
        entry.0 += e / base;
        entry.1 += 1;
    }
    sums.into_iter()
        .map(|((k, idx), (sum, n))| RatioRow {
            k,
            solver: solvers[idx].to_string(),
            mean_ratio: sum / n as f64,
            instances: n,
        })
        .collect()
}

pub fn write_ratios(path: &Path, rows: &[RatioRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

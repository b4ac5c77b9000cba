use std::fmt;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use uavroute::{
    brute_force_solve, infer_active, infer_greedy, infer_sampling, solve_genetic, solve_nearest_neighbor,
    solve_random, ActiveSearchConfig, Checkpoint, EnergyParams, GaConfig, Instance, Solution,
};

/// A solver and its per-run settings, written as `greedy`, `sampling:M`,
/// `active:Q,S,ZETA`, `nn`, `ga`, `random` or `brute`.
#[derive(Debug, Clone, PartialEq)]
pub enum SolverSpec {
    Greedy,
    Sampling { m: usize },
    Active { q: usize, steps: usize, zeta: f64 },
    NearestNeighbor,
    Genetic,
    Random,
    Brute,
}

impl SolverSpec {
    pub fn needs_checkpoint(&self) -> bool {
        matches!(self, Self::Greedy | Self::Sampling { .. } | Self::Active { .. })
    }
}

impl FromStr for SolverSpec {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, args) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let spec = match (name, args) {
            ("greedy", None) => Self::Greedy,
            ("nn", None) => Self::NearestNeighbor,
            ("ga", None) => Self::Genetic,
            ("random", None) => Self::Random,
            ("brute", None) => Self::Brute,
            ("sampling", Some(m)) => {
                let m: usize = m.parse().with_context(|| format!("bad sample count in `{s}`"))?;
                if m == 0 {
                    bail!("sample count must be >= 1 in `{s}`");
                }
                Self::Sampling { m }
            }
            ("active", Some(a)) => {
                let parts: Vec<&str> = a.split(',').collect();
                let [q, steps, zeta] = parts[..] else {
                    bail!("expected active:Q,S,ZETA, got `{s}`");
                };
                let q: usize = q.parse().with_context(|| format!("bad Q in `{s}`"))?;
                let steps = steps.parse().with_context(|| format!("bad S in `{s}`"))?;
                let zeta: f64 = zeta.parse().with_context(|| format!("bad zeta in `{s}`"))?;
                if q == 0 || !(0.0..=1.0).contains(&zeta) {
                    bail!("active search needs Q >= 1 and zeta in [0, 1], got `{s}`");
                }
                Self::Active { q, steps, zeta }
            }
            _ => bail!("unknown solver `{s}`"),
        };
        Ok(spec)
    }
}

impl fmt::Display for SolverSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Greedy => f.write_str("greedy"),
            Self::Sampling { m } => write!(f, "sampling:{m}"),
            Self::Active { q, steps, zeta } => write!(f, "active:{q},{steps},{zeta}"),
            Self::NearestNeighbor => f.write_str("nn"),
            Self::Genetic => f.write_str("ga"),
            Self::Random => f.write_str("random"),
            Self::Brute => f.write_str("brute"),
        }
    }
}

/// Everything a solver run may need besides the instance.
pub struct SolverContext {
    pub energy: EnergyParams,
    pub ga: GaConfig,
    pub active: ActiveSearchConfig,
    pub model: Option<Checkpoint>,
}

impl SolverContext {
    fn model(&self, spec: &SolverSpec) -> Result<&Checkpoint> {
        self.model
            .as_ref()
            .ok_or_else(|| anyhow!("solver `{spec}` needs a checkpoint (--checkpoint)"))
    }

    /// Runs `spec` on `instance`; `seed` drives every random choice.
    pub fn solve(&self, spec: &SolverSpec, instance: &Instance, seed: u64) -> Result<Solution> {
        let p = &self.energy;
        let sol = match spec {
            SolverSpec::Greedy => infer_greedy(&self.model(spec)?.actor, p, instance)?,
            SolverSpec::Sampling { m } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                infer_sampling(&self.model(spec)?.actor, p, instance, *m, &mut rng)?
            }
            SolverSpec::Active { q, steps, zeta } => {
                let model = self.model(spec)?;
                let cfg = ActiveSearchConfig {
                    samples_per_step: *q,
                    steps: *steps,
                    ema_zeta: *zeta,
                    seed,
                    ..self.active.clone()
                };
                infer_active(&model.actor, &model.critic, p, instance, &cfg)?.solution
            }
            SolverSpec::NearestNeighbor => solve_nearest_neighbor(p, instance)?,
            SolverSpec::Genetic => solve_genetic(p, instance, &GaConfig { seed, ..self.ga.clone() })?,
            SolverSpec::Random => solve_random(p, instance, &mut ChaCha8Rng::seed_from_u64(seed))?,
            SolverSpec::Brute => {
                let (tour, sel) = brute_force_solve(p, instance)?;
                Solution::new(instance, tour, sel)
            }
        };
        Ok(sol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn specs_round_trip_through_text() {
        for s in ["greedy", "sampling:5120", "active:512,20,0.9", "nn", "ga", "random", "brute"] {
            let spec: SolverSpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
        }
    }

    #[test]
    fn malformed_specs_are_rejected() {
        for s in ["", "greed", "sampling", "sampling:0", "sampling:x", "active:1,2", "active:1,2,3", "nn:4"] {
            assert!(s.parse::<SolverSpec>().is_err(), "{s}");
        }
    }
}

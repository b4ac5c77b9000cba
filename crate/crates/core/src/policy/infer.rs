//! Decoding strategies at inference time: greedy, best-of-M sampling, and
//! active search (per-instance policy-gradient refinement).

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::AdamState;
use crate::energy::EnergyParams;
use crate::error::{Error, Result};
use crate::instance::{Instance, Tour};
use crate::nn::{actor_context, critic_estimate, decode_rollout, rollout, CriticParams, DecodeMode, PolicyParams, Tape};
use crate::route::{astar_select_with, CostTable, HeadSelection};
use crate::solution::Solution;

/// Rollouts recorded on one tape; they share the encoder pass.
const CHUNK: usize = 32;

/// Decodes by taking the most probable cluster at every step.
pub fn infer_greedy(policy: &PolicyParams, params: &EnergyParams, instance: &Instance) -> Result<Solution> {
    // The generator is never consulted in greedy mode.
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let r = rollout(policy, instance, DecodeMode::Greedy, &mut rng);
    let table = CostTable::new(params, instance);
    let sel = astar_select_with(params, &table, instance, &r.tour)?;
    Ok(Solution::new(instance, r.tour, sel))
}

struct Candidate {
    tour: Tour,
    selection: HeadSelection,
}

impl Candidate {
    fn energy(&self) -> f64 {
        self.selection.breakdown.e_total_weighted_j
    }
}

/// Samples one tour per seed and completes each with A*. Results come back
/// in seed order regardless of how the work is split.
fn sample_candidates(
    policy: &PolicyParams,
    params: &EnergyParams,
    table: &CostTable,
    instance: &Instance,
    seeds: &[u64],
) -> Result<Vec<Candidate>> {
    let chunks: Vec<Result<Vec<Candidate>>> = seeds
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut tape = Tape::new(&policy.set);
            let ctx = actor_context(&mut tape, policy, instance);
            chunk
                .iter()
                .map(|&seed| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let r = decode_rollout(&mut tape, policy, &ctx, DecodeMode::Sample, &mut rng);
                    let selection = astar_select_with(params, table, instance, &r.tour)?;
                    Ok(Candidate { tour: r.tour, selection })
                })
                .collect()
        })
        .collect();
    let mut out = Vec::with_capacity(seeds.len());
    for c in chunks {
        out.extend(c?);
    }
    Ok(out)
}

/// Index of the lowest energy, earliest on ties.
fn best_index(cands: &[Candidate]) -> usize {
    let mut best = 0;
    for (i, c) in cands.iter().enumerate() {
        if c.energy() < cands[best].energy() {
            best = i;
        }
    }
    best
}

/// Best of `m` sampled tours. Each rollout draws from its own generator
/// seeded from `rng`, so the result does not depend on thread count.
pub fn infer_sampling<R: Rng + ?Sized>(
    policy: &PolicyParams,
    params: &EnergyParams,
    instance: &Instance,
    m: usize,
    rng: &mut R,
) -> Result<Solution> {
    if m == 0 {
        return Err(Error::InvalidConfig("sample count must be >= 1".into()));
    }
    let seeds: Vec<u64> = (0..m).map(|_| rng.next_u64()).collect();
    let table = CostTable::new(params, instance);
    let mut cands = sample_candidates(policy, params, &table, instance, &seeds)?;
    let best = cands.swap_remove(best_index(&cands));
    Ok(Solution::new(instance, best.tour, best.selection))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMode {
    /// Moving average toward the critic's estimate for the instance.
    Critic,
    /// Moving average toward the mean energy of each step's samples.
    SampleMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActiveSearchConfig {
    pub steps: usize,
    pub samples_per_step: usize,
    pub ema_zeta: f64,
    pub baseline_mode: BaselineMode,
    pub lr: f64,
    pub energy_scale: f64,
    pub seed: u64,
}

impl Default for ActiveSearchConfig {
    fn default() -> Self {
        Self {
            steps: 40,
            samples_per_step: 512,
            ema_zeta: 0.9,
            baseline_mode: BaselineMode::Critic,
            lr: 1e-3,
            energy_scale: 1000.0,
            seed: 0,
        }
    }
}

impl ActiveSearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples_per_step == 0 {
            return Err(Error::InvalidConfig("samples_per_step must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.ema_zeta) {
            return Err(Error::InvalidConfig("ema_zeta must lie in [0, 1]".into()));
        }
        if !(self.lr > 0.0) || !(self.energy_scale > 0.0) {
            return Err(Error::InvalidConfig("lr and energy_scale must be positive".into()));
        }
        Ok(())
    }
}

/// Result of active search with its incumbent history.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveOutcome {
    pub solution: Solution,
    /// Incumbent energy after initialisation and after every completed
    /// step, joules.
    pub trace: Vec<f64>,
    /// Set when a step produced non-finite gradients and the search stopped.
    pub aborted: bool,
}

/// Refines a private copy of the actor on `instance` and returns the best
/// tour seen. `critic` supplies the baseline target in
/// [`BaselineMode::Critic`]; the shared parameters are never modified.
pub fn infer_active(
    policy: &PolicyParams,
    critic: &CriticParams,
    params: &EnergyParams,
    instance: &Instance,
    config: &ActiveSearchConfig,
) -> Result<ActiveOutcome> {
    config.validate()?;
    let scale = config.energy_scale;
    let mut theta = policy.clone();
    let mut adam = AdamState::new(&theta.set);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let table = CostTable::new(params, instance);

    let mut incumbent = sample_candidates(&theta, params, &table, instance, &[rng.next_u64()])?
        .pop()
        .expect("one seed yields one candidate");
    let mut trace = vec![incumbent.energy()];
    let mut baseline = incumbent.energy() / scale;
    let critic_target = match config.baseline_mode {
        BaselineMode::Critic => Some(critic_estimate(critic, instance)),
        BaselineMode::SampleMean => None,
    };

    let q = config.samples_per_step;
    let mut aborted = false;
    for _ in 0..config.steps {
        let seeds: Vec<u64> = (0..q).map(|_| rng.next_u64()).collect();
        let theta_ref = &theta;
        let chunks: Vec<Result<(Vec<Candidate>, crate::nn::Grads)>> = seeds
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut tape = Tape::new(&theta_ref.set);
                let ctx = actor_context(&mut tape, theta_ref, instance);
                let mut cands = Vec::with_capacity(chunk.len());
                let mut loss_seeds = Vec::with_capacity(chunk.len());
                for &seed in chunk {
                    let mut r_rng = ChaCha8Rng::seed_from_u64(seed);
                    let r = decode_rollout(&mut tape, theta_ref, &ctx, DecodeMode::Sample, &mut r_rng);
                    let selection = astar_select_with(params, &table, instance, &r.tour)?;
                    let e = selection.breakdown.e_total_weighted_j / scale;
                    loss_seeds.push((r.log_prob, (e - baseline) / q as f64));
                    cands.push(Candidate { tour: r.tour, selection });
                }
                Ok((cands, tape.backward(&loss_seeds)))
            })
            .collect();

        let mut grads = theta.set.zero_grads();
        let mut cands = Vec::with_capacity(q);
        for c in chunks {
            let (c, g) = c?;
            cands.extend(c);
            grads.add_assign(&g);
        }
        let mean_e = cands.iter().map(Candidate::energy).sum::<f64>() / q as f64 / scale;
        let best = cands.swap_remove(best_index(&cands));
        if best.energy() < incumbent.energy() {
            incumbent = best;
        }
        trace.push(incumbent.energy());

        if grads.check_finite(&theta.set).is_err() {
            aborted = true;
            break;
        }
        adam.update(&mut theta.set, &grads, config.lr);
        if theta.set.first_non_finite().is_some() {
            aborted = true;
            break;
        }
        let target = critic_target.unwrap_or(mean_e);
        baseline = config.ema_zeta * baseline + (1.0 - config.ema_zeta) * target;
    }

    Ok(ActiveOutcome {
        solution: Solution::new(instance, incumbent.tour, incumbent.selection),
        trace,
        aborted,
    })
}

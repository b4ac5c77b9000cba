//! Actor-critic training on freshly generated instances.
//!
//! Each step draws a batch of instances, samples one tour per instance from
//! the actor, completes it with A* head selection, and uses the resulting
//! energies for a REINFORCE update of the actor (critic as baseline) and a
//! mean-squared-error update of the critic.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::AdamState;
use crate::energy::EnergyParams;
use crate::error::{Error, Result};
use crate::instance::{generate_with, GenSpec, Instance};
use crate::nn::{actor_context, critic_value, decode_rollout, CriticParams, DecodeMode, Grads, PolicyParams, Tape};
use crate::route::{astar_select_with, CostTable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub steps: u64,
    pub lr_initial: f64,
    pub lr_decay_every: u64,
    pub lr_decay_factor: f64,
    /// Clusters per training instance.
    pub k_train: usize,
    /// Nodes per training cluster.
    pub n_train: usize,
    pub area_m: f64,
    pub std_m: f64,
    /// Energies are divided by this before entering the losses.
    pub energy_scale: f64,
    /// Optional global gradient-norm clip applied to each network.
    pub max_grad_norm: Option<f64>,
    pub seed: u64,
}

impl Default for TrainConfig {
    /// Desk-scale defaults.
    fn default() -> Self {
        Self {
            batch_size: 64,
            steps: 3000,
            lr_initial: 1e-3,
            lr_decay_every: 5000,
            lr_decay_factor: 0.96,
            k_train: 8,
            n_train: 5,
            area_m: 2000.0,
            std_m: 30.0,
            energy_scale: 1000.0,
            max_grad_norm: Some(1.0),
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Full-scale settings of the reference experiments (20-cluster model).
    pub fn full_scale() -> Self {
        Self {
            batch_size: 512,
            steps: 100_000,
            lr_initial: 1e-4,
            k_train: 20,
            n_train: 20,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.steps == 0 {
            return Err(Error::InvalidConfig("batch_size and steps must be >= 1".into()));
        }
        if !(self.lr_decay_factor > 0.0 && self.lr_decay_factor <= 1.0) {
            return Err(Error::InvalidConfig("lr_decay_factor must lie in (0, 1]".into()));
        }
        if !(self.energy_scale > 0.0) || !(self.lr_initial > 0.0) {
            return Err(Error::InvalidConfig("energy_scale and lr_initial must be positive".into()));
        }
        if self.lr_decay_every == 0 || self.k_train == 0 || self.n_train == 0 {
            return Err(Error::InvalidConfig(
                "lr_decay_every, k_train and n_train must be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// `lr_initial · factor^⌊step / decay_every⌋`.
    pub fn learning_rate(&self, step: u64) -> f64 {
        self.lr_initial * self.lr_decay_factor.powi((step / self.lr_decay_every) as i32)
    }

    pub fn gen_spec(&self) -> GenSpec {
        GenSpec {
            k: self.k_train,
            n: self.n_train,
            area_m: self.area_m,
            std_m: self.std_m,
        }
    }
}

/// One row of the training trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: u64,
    /// Mean weighted energy of the sampled tours, joules.
    pub mean_energy: f64,
    /// Critic mean squared error, in scaled energy units.
    pub critic_loss: f64,
    pub lr: f64,
}

struct Sampled {
    energy_j: f64,
    value: f64,
    actor_grads: Grads,
    critic_grads: Grads,
}

/// Step-wise trainer; owns the optimiser state and the step counter.
pub struct Trainer {
    pub config: TrainConfig,
    pub energy: EnergyParams,
    pub step: u64,
    actor_opt: AdamState,
    critic_opt: AdamState,
}

impl Trainer {
    pub fn new(config: TrainConfig, energy: EnergyParams, policy: &PolicyParams, critic: &CriticParams) -> Result<Self> {
        config.validate()?;
        energy.validate()?;
        Ok(Self {
            config,
            energy,
            step: 0,
            actor_opt: AdamState::new(&policy.set),
            critic_opt: AdamState::new(&critic.set),
        })
    }

    /// Continue the step counter (and hence the schedule and instance
    /// stream) from `step`.
    pub fn resume_at(mut self, step: u64) -> Self {
        self.step = step;
        self
    }

    /// Instances and rollout seeds of one step; a pure function of the
    /// configured seed and the step index.
    fn batch(&self, step: u64) -> Vec<(Instance, u64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(step);
        let spec = self.config.gen_spec();
        (0..self.config.batch_size)
            .map(|_| {
                let seed = rng.next_u64();
                let inst = generate_with(&mut rng, spec, seed);
                (inst, rng.next_u64())
            })
            .collect()
    }

    /// Runs one update on freshly generated instances. On non-finite
    /// gradients the parameters are left untouched and an error naming the
    /// offending array is returned.
    pub fn step(&mut self, policy: &mut PolicyParams, critic: &mut CriticParams) -> Result<TraceRow> {
        let batch = self.batch(self.step);
        self.update(policy, critic, &batch)
    }

    /// Runs one update on the given instances instead of generated ones.
    /// Rollout seeds still come from the step's seeded stream.
    pub fn step_on(
        &mut self,
        policy: &mut PolicyParams,
        critic: &mut CriticParams,
        instances: &[Instance],
    ) -> Result<TraceRow> {
        if instances.is_empty() {
            return Err(Error::InvalidConfig("a training step needs at least one instance".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(self.step);
        let batch: Vec<(Instance, u64)> = instances.iter().map(|i| (i.clone(), rng.next_u64())).collect();
        self.update(policy, critic, &batch)
    }

    fn update(
        &mut self,
        policy: &mut PolicyParams,
        critic: &mut CriticParams,
        batch: &[(Instance, u64)],
    ) -> Result<TraceRow> {
        let step = self.step;
        let b = batch.len() as f64;
        let scale = self.config.energy_scale;
        let energy = &self.energy;
        let (policy_ref, critic_ref) = (&*policy, &*critic);

        let samples: Vec<Result<Sampled>> = batch
            .par_iter()
            .map(|(inst, rollout_seed)| {
                let mut ctape = Tape::new(&critic_ref.set);
                let v_node = critic_value(&mut ctape, critic_ref, inst);
                let value = ctape.scalar(v_node);

                let mut atape = Tape::new(&policy_ref.set);
                let ctx = actor_context(&mut atape, policy_ref, inst);
                let mut rng = ChaCha8Rng::seed_from_u64(*rollout_seed);
                let r = decode_rollout(&mut atape, policy_ref, &ctx, DecodeMode::Sample, &mut rng);
                let table = CostTable::new(energy, inst);
                let sel = astar_select_with(energy, &table, inst, &r.tour)?;
                let energy_j = sel.breakdown.e_total_weighted_j;
                let e = energy_j / scale;

                let actor_grads = atape.backward(&[(r.log_prob, (e - value) / b)]);
                let critic_grads = ctape.backward(&[(v_node, 2.0 * (value - e) / b)]);
                Ok(Sampled {
                    energy_j,
                    value,
                    actor_grads,
                    critic_grads,
                })
            })
            .collect();

        let mut actor_grads = policy.set.zero_grads();
        let mut critic_grads = critic.set.zero_grads();
        let mut energy_sum = 0.0;
        let mut sq_err = 0.0;
        for s in samples {
            let s = s?;
            energy_sum += s.energy_j;
            sq_err += (s.value - s.energy_j / scale).powi(2);
            actor_grads.add_assign(&s.actor_grads);
            critic_grads.add_assign(&s.critic_grads);
        }
        let critic_loss = sq_err / b;
        if !critic_loss.is_finite() {
            return Err(Error::NonFinite {
                param: "critic loss".into(),
            });
        }
        actor_grads.check_finite(&policy.set)?;
        critic_grads.check_finite(&critic.set)?;
        if let Some(max) = self.config.max_grad_norm {
            actor_grads.clip_norm(max);
            critic_grads.clip_norm(max);
        }

        let lr = self.config.learning_rate(step);
        self.actor_opt.update(&mut policy.set, &actor_grads, lr);
        self.critic_opt.update(&mut critic.set, &critic_grads, lr);
        if let Some(name) = policy.set.first_non_finite().or(critic.set.first_non_finite()) {
            return Err(Error::NonFinite { param: name.to_string() });
        }
        self.step += 1;
        Ok(TraceRow {
            step,
            mean_energy: energy_sum / b,
            critic_loss,
            lr,
        })
    }
}

/// Trains for `config.steps` steps from step 0, returning the trace.
pub fn train(
    config: &TrainConfig,
    energy: &EnergyParams,
    policy: &mut PolicyParams,
    critic: &mut CriticParams,
) -> Result<Vec<TraceRow>> {
    let mut trainer = Trainer::new(config.clone(), energy.clone(), policy, critic)?;
    (0..config.steps).map(|_| trainer.step(policy, critic)).collect()
}

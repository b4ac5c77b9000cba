#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use uavroute::instance::{Cluster, Instance};
use uavroute::nn::{actor_context, critic_value, decode_rollout, CriticParams, DecodeMode, Grads, PolicyParams, Tape};

/// Three clusters of three nodes, spread so that the greedy decode is not
/// near a tie.
pub fn toy_instance() -> Instance {
    let clusters = vec![
        Cluster {
            nodes: vec![[400.0, 300.0], [430.0, 320.0], [390.0, 350.0]],
        },
        Cluster {
            nodes: vec![[1500.0, 200.0], [1520.0, 260.0], [1480.0, 240.0]],
        },
        Cluster {
            nodes: vec![[900.0, 1600.0], [950.0, 1580.0], [920.0, 1650.0]],
        },
    ];
    Instance::new(2000.0, 0, [0.0, 0.0], clusters).unwrap()
}

/// Greedy tour and its log-probability; gradient with respect to the actor.
pub fn actor_log_prob(policy: &PolicyParams, instance: &Instance) -> (Vec<usize>, f64, Grads) {
    let mut tape = Tape::new(&policy.set);
    let ctx = actor_context(&mut tape, policy, instance);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let r = decode_rollout(&mut tape, policy, &ctx, DecodeMode::Greedy, &mut rng);
    let grads = tape.backward(&[(r.log_prob, 1.0)]);
    (r.tour.order().to_vec(), r.log_prob_value, grads)
}

pub fn critic_output(critic: &CriticParams, instance: &Instance) -> (f64, Grads) {
    let mut tape = Tape::new(&critic.set);
    let v = critic_value(&mut tape, critic, instance);
    let grads = tape.backward(&[(v, 1.0)]);
    (tape.scalar(v), grads)
}

/// Relative error with a small absolute floor so that entries whose true
/// gradient is zero compare on an absolute scale.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Largest relative error between the actor's reverse-mode gradient and
/// central differences, over every entry of every array, plus the name of
/// the worst array.
pub fn actor_gradient_error(policy: &PolicyParams, instance: &Instance, step: f64) -> (f64, String) {
    let (tour, _, grads) = actor_log_prob(policy, instance);
    let mut worst = (0.0, String::new());
    for (id, tensor) in policy.set.tensors().iter().enumerate() {
        for j in 0..tensor.data.len() {
            let eval = |delta: f64| {
                let mut p = policy.clone();
                p.set.get_mut(id).data[j] += delta;
                let (t, lp, _) = actor_log_prob(&p, instance);
                assert_eq!(t, tour, "perturbing {}[{j}] changed the greedy tour", tensor.name);
                lp
            };
            let numeric = (eval(step) - eval(-step)) / (2.0 * step);
            let e = rel_err(grads.0[id][j], numeric);
            if e > worst.0 {
                worst = (e, tensor.name.clone());
            }
        }
    }
    worst
}

pub fn critic_gradient_error(critic: &CriticParams, instance: &Instance, step: f64) -> (f64, String) {
    let (_, grads) = critic_output(critic, instance);
    let mut worst = (0.0, String::new());
    for (id, tensor) in critic.set.tensors().iter().enumerate() {
        for j in 0..tensor.data.len() {
            let eval = |delta: f64| {
                let mut c = critic.clone();
                c.set.get_mut(id).data[j] += delta;
                critic_output(&c, instance).0
            };
            let numeric = (eval(step) - eval(-step)) / (2.0 * step);
            let e = rel_err(grads.0[id][j], numeric);
            if e > worst.0 {
                worst = (e, tensor.name.clone());
            }
        }
    }
    worst
}

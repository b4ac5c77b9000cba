//! Forward passes of the pointer-network actor and the critic, recorded on
//! a [`Tape`] so they can be differentiated.

use rand::Rng;

use super::params::{CriticParams, LstmIds, PolicyParams};
use super::tape::{softmax, ParamId, Tape, Var};
use crate::instance::{Instance, Point, Tour};

/// Maps each normalised input point through `embed_w`.
pub fn embed_points(tape: &mut Tape<'_>, embed_w: ParamId, points: &[Point]) -> Vec<Var> {
    points
        .iter()
        .map(|p| {
            let x = tape.input(p.to_vec());
            tape.matvec(embed_w, x)
        })
        .collect()
}

/// Embeds the start point and every cluster centroid (normalised to the
/// unit field).
pub fn embed_instance(tape: &mut Tape<'_>, embed_w: ParamId, instance: &Instance) -> Vec<Var> {
    embed_points(tape, embed_w, &instance.policy_features())
}

/// One LSTM step; returns the new `(h, c)`.
pub fn lstm_step(tape: &mut Tape<'_>, cell: LstmIds, x: Var, h: Var, c: Var) -> (Var, Var) {
    let d = tape.value(h).len();
    let a = tape.matvec(cell.w_ih, x);
    let b = tape.matvec(cell.w_hh, h);
    let ab = tape.add(a, b);
    let gates = tape.add_param(ab, cell.bias);
    let i = tape.slice(gates, 0, d);
    let f = tape.slice(gates, d, d);
    let g = tape.slice(gates, 2 * d, d);
    let o = tape.slice(gates, 3 * d, d);
    let i = tape.sigmoid(i);
    let f = tape.sigmoid(f);
    let g = tape.tanh(g);
    let o = tape.sigmoid(o);
    let fc = tape.mul(f, c);
    let ig = tape.mul(i, g);
    let c_new = tape.add(fc, ig);
    let tc = tape.tanh(c_new);
    let h_new = tape.mul(o, tc);
    (h_new, c_new)
}

/// Encoder output: one hidden state per item plus the final cell state.
#[derive(Debug, Clone)]
pub struct Encoded {
    pub embeddings: Vec<Var>,
    pub states: Vec<Var>,
    pub final_h: Var,
    pub final_c: Var,
}

/// Runs the LSTM over `embeddings` from a zero state.
pub fn encode(tape: &mut Tape<'_>, cell: LstmIds, embeddings: Vec<Var>, hidden_dim: usize) -> Encoded {
    assert!(!embeddings.is_empty(), "cannot encode an empty sequence");
    let mut h = tape.input(vec![0.0; hidden_dim]);
    let mut c = tape.input(vec![0.0; hidden_dim]);
    let mut states = Vec::with_capacity(embeddings.len());
    for &x in &embeddings {
        (h, c) = lstm_step(tape, cell, x, h, c);
        states.push(h);
    }
    Encoded {
        embeddings,
        states,
        final_h: h,
        final_c: c,
    }
}

/// Actor encoder plus the per-item attention projections `W₁ e_j`, which do
/// not depend on the decoding step and are shared by every rollout recorded
/// on the same tape.
#[derive(Debug, Clone)]
pub struct ActorContext {
    pub enc: Encoded,
    pub projected: Vec<Var>,
}

pub fn actor_context(tape: &mut Tape<'_>, policy: &PolicyParams, instance: &Instance) -> ActorContext {
    let embeddings = embed_instance(tape, policy.embed_w, instance);
    let enc = encode(tape, policy.enc, embeddings, policy.hidden_dim);
    let projected = enc.states.iter().map(|&e| tape.matvec(policy.w1, e)).collect();
    ActorContext { enc, projected }
}

/// Scores `φ · tanh(W₁ e_j + W₂ h)` for selectable items, masked elsewhere.
pub fn attention_scores(
    tape: &mut Tape<'_>,
    policy: &PolicyParams,
    ctx: &ActorContext,
    h: Var,
    selectable: &[bool],
) -> Var {
    assert!(selectable.iter().any(|&s| s), "no selectable item");
    let query = tape.matvec(policy.w2, h);
    let items = ctx
        .projected
        .iter()
        .zip(selectable)
        .map(|(&proj, &ok)| {
            ok.then(|| {
                let s = tape.add(proj, query);
                let t = tape.tanh(s);
                tape.dot(policy.v_att, t)
            })
        })
        .collect();
    tape.stack(items)
}

/// Masked softmax over a score vector.
pub fn pointer_softmax(scores: &[f64]) -> Vec<f64> {
    softmax(scores)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeMode {
    Greedy,
    Sample,
}

/// A decoded visiting order and its log-probability.
#[derive(Debug, Clone)]
pub struct Rollout {
    pub tour: Tour,
    /// Length-1 tape node holding `Σ_t log P(π_t | π_<t)`.
    pub log_prob: Var,
    pub log_prob_value: f64,
    /// Distribution over items at every step (one-hot where the choice was
    /// forced).
    pub step_probs: Vec<Vec<f64>>,
}

fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = j;
        }
    }
    best
}

fn sample_index<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut cum = 0.0;
    let mut last = 0;
    for (j, &v) in p.iter().enumerate() {
        if v > 0.0 {
            cum += v;
            last = j;
            if u < cum {
                return j;
            }
        }
    }
    last
}

/// Decodes one visiting order. The first step always selects the start; each
/// later step feeds the embedding of the previous choice to the decoder,
/// which starts from `v_go` and the final encoder state.
pub fn decode_rollout<R: Rng + ?Sized>(
    tape: &mut Tape<'_>,
    policy: &PolicyParams,
    ctx: &ActorContext,
    mode: DecodeMode,
    rng: &mut R,
) -> Rollout {
    let n = ctx.enc.states.len();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut log_terms = Vec::with_capacity(n);
    let mut step_probs = Vec::with_capacity(n);

    let mut input = tape.param(policy.v_go);
    let (mut h, mut c) = (ctx.enc.final_h, ctx.enc.final_c);
    for t in 0..n {
        let selectable: Vec<bool> = if t == 0 {
            (0..n).map(|j| j == 0).collect()
        } else {
            visited.iter().map(|v| !v).collect()
        };
        let remaining = selectable.iter().filter(|&&s| s).count();

        let pick = if remaining == 1 {
            let pick = selectable.iter().position(|&s| s).unwrap();
            let mut probs = vec![0.0; n];
            probs[pick] = 1.0;
            step_probs.push(probs);
            // The final step needs no decoder state.
            if t + 1 < n {
                (h, c) = lstm_step(tape, policy.dec, input, h, c);
            }
            pick
        } else {
            (h, c) = lstm_step(tape, policy.dec, input, h, c);
            let scores = attention_scores(tape, policy, ctx, h, &selectable);
            let probs = pointer_softmax(tape.value(scores));
            let pick = match mode {
                DecodeMode::Greedy => argmax(&probs),
                DecodeMode::Sample => sample_index(&probs, rng),
            };
            log_terms.push(tape.log_softmax_pick(scores, pick));
            step_probs.push(probs);
            pick
        };
        visited[pick] = true;
        order.push(pick);
        input = ctx.enc.embeddings[pick];
    }

    let log_prob = tape.sum(log_terms);
    Rollout {
        tour: Tour::new(order).expect("decoder emits a permutation starting at the start"),
        log_prob,
        log_prob_value: tape.scalar(log_prob),
        step_probs,
    }
}

/// Records the critic's baseline estimate for `instance`; returns a length-1
/// node.
pub fn critic_value(tape: &mut Tape<'_>, critic: &CriticParams, instance: &Instance) -> Var {
    let embeddings = embed_instance(tape, critic.embed_w, instance);
    let enc = encode(tape, critic.enc, embeddings, critic.hidden_dim);
    let pooled = tape.mean(enc.states);
    let hidden = tape.matvec(critic.fc1_w, pooled);
    let hidden = tape.add_param(hidden, critic.fc1_b);
    let hidden = tape.relu(hidden);
    let out = tape.dot(critic.fc2_w, hidden);
    tape.add_param(out, critic.fc2_b)
}

/// Untaped convenience: decode one tour for `instance`.
pub fn rollout<R: Rng + ?Sized>(
    policy: &PolicyParams,
    instance: &Instance,
    mode: DecodeMode,
    rng: &mut R,
) -> Rollout {
    let mut tape = Tape::new(&policy.set);
    let ctx = actor_context(&mut tape, policy, instance);
    decode_rollout(&mut tape, policy, &ctx, mode, rng)
}

/// Untaped convenience: critic estimate for `instance`.
pub fn critic_estimate(critic: &CriticParams, instance: &Instance) -> f64 {
    let mut tape = Tape::new(&critic.set);
    let v = critic_value(&mut tape, critic, instance);
    tape.scalar(v)
}

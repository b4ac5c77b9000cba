//! Pointer-network actor, critic, and the autodiff tape they run on.

pub mod model;
pub mod params;
pub mod tape;

pub use model::{
    actor_context, attention_scores, critic_estimate, critic_value, decode_rollout, embed_instance,
    encode, lstm_step, pointer_softmax, rollout, ActorContext, DecodeMode, Encoded, Rollout,
};
pub use params::{init_params, xavier_bound, Checkpoint, CriticParams, LstmIds, PolicyParams};
pub use tape::{softmax, Grads, ParamId, ParamSet, Tape, Tensor, Var, MASKED_SCORE};

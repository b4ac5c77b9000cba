//! Learnable parameters of the actor and critic, their initialisation and
//! the JSON checkpoint format.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

use super::tape::{ParamId, ParamSet};
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u64 = 1;

/// Weight handles of one LSTM cell. Gates are stacked in the order input,
/// forget, cell candidate, output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LstmIds {
    pub w_ih: ParamId,
    pub w_hh: ParamId,
    pub bias: ParamId,
}

impl LstmIds {
    fn register(set: &mut ParamSet, prefix: &str, dim: usize) -> Self {
        Self {
            w_ih: set.add(format!("{prefix}.w_ih"), 4 * dim, dim),
            w_hh: set.add(format!("{prefix}.w_hh"), 4 * dim, dim),
            bias: set.add(format!("{prefix}.bias"), 4 * dim, 1),
        }
    }
}

/// Pointer-network actor.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    pub set: ParamSet,
    pub hidden_dim: usize,
    /// `D x 2` map from normalised coordinates to embeddings.
    pub embed_w: ParamId,
    pub enc: LstmIds,
    pub dec: LstmIds,
    pub w1: ParamId,
    pub w2: ParamId,
    /// `1 x D` attention vector.
    pub v_att: ParamId,
    /// Learned first decoder input.
    pub v_go: ParamId,
}

impl PolicyParams {
    /// All-zero parameters of the given width.
    pub fn zeros(hidden_dim: usize) -> Self {
        let d = hidden_dim;
        let mut set = ParamSet::default();
        let embed_w = set.add("actor.embed_w", d, 2);
        let enc = LstmIds::register(&mut set, "actor.enc", d);
        let dec = LstmIds::register(&mut set, "actor.dec", d);
        let w1 = set.add("actor.w1", d, d);
        let w2 = set.add("actor.w2", d, d);
        let v_att = set.add("actor.v_att", 1, d);
        let v_go = set.add("actor.v_go", 1, d);
        Self {
            set,
            hidden_dim,
            embed_w,
            enc,
            dec,
            w1,
            w2,
            v_att,
            v_go,
        }
    }

    fn biases(&self) -> [ParamId; 2] {
        [self.enc.bias, self.dec.bias]
    }
}

/// Critic: an encoder like the actor's followed by two dense layers.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticParams {
    pub set: ParamSet,
    pub hidden_dim: usize,
    pub embed_w: ParamId,
    pub enc: LstmIds,
    pub fc1_w: ParamId,
    pub fc1_b: ParamId,
    pub fc2_w: ParamId,
    pub fc2_b: ParamId,
}

impl CriticParams {
    pub fn zeros(hidden_dim: usize) -> Self {
        let d = hidden_dim;
        let mut set = ParamSet::default();
        let embed_w = set.add("critic.embed_w", d, 2);
        let enc = LstmIds::register(&mut set, "critic.enc", d);
        let fc1_w = set.add("critic.fc1_w", d, d);
        let fc1_b = set.add("critic.fc1_b", d, 1);
        let fc2_w = set.add("critic.fc2_w", 1, d);
        let fc2_b = set.add("critic.fc2_b", 1, 1);
        Self {
            set,
            hidden_dim,
            embed_w,
            enc,
            fc1_w,
            fc1_b,
            fc2_w,
            fc2_b,
        }
    }

    fn biases(&self) -> [ParamId; 3] {
        [self.enc.bias, self.fc1_b, self.fc2_b]
    }
}

/// Uniform Xavier bound for a `rows x cols` matrix (fan-out `rows`, fan-in
/// `cols`).
pub fn xavier_bound(rows: usize, cols: usize) -> f64 {
    (6.0 / (rows + cols) as f64).sqrt()
}

fn xavier_fill<R: Rng>(set: &mut ParamSet, skip: &[ParamId], rng: &mut R) {
    for (id, t) in set.tensors_mut().iter_mut().enumerate() {
        if skip.contains(&id) {
            continue;
        }
        let bound = xavier_bound(t.rows, t.cols);
        for v in &mut t.data {
            *v = rng.random_range(-bound..bound);
        }
    }
}

/// Xavier-uniform weights and zero biases for both networks, drawn from one
/// seeded stream (actor first).
pub fn init_params(seed: u64, hidden_dim: usize) -> (PolicyParams, CriticParams) {
    assert!(hidden_dim >= 1, "hidden_dim must be at least 1");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut actor = PolicyParams::zeros(hidden_dim);
    let skip = actor.biases();
    xavier_fill(&mut actor.set, &skip, &mut rng);
    let mut critic = CriticParams::zeros(hidden_dim);
    let skip = critic.biases();
    xavier_fill(&mut critic.set, &skip, &mut rng);
    (actor, critic)
}

/// Serialisable snapshot of both networks.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub hidden_dim: usize,
    pub seed: u64,
    /// Training steps completed when the snapshot was taken.
    pub step: u64,
    pub actor: PolicyParams,
    pub critic: CriticParams,
}

fn tensor_json(set: &ParamSet, out: &mut Map<String, Value>) {
    for t in set.tensors() {
        let rows: Vec<Value> = (0..t.rows).map(|r| json!(t.row(r))).collect();
        out.insert(t.name.clone(), Value::Array(rows));
    }
}

fn fill_from_json(set: &mut ParamSet, obj: &Map<String, Value>) -> Result<()> {
    for t in set.tensors_mut() {
        let rows = obj
            .get(&t.name)
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Checkpoint(format!("missing array `{}`", t.name)))?;
        if rows.len() != t.rows {
            return Err(Error::Checkpoint(format!(
                "`{}` has {} rows, expected {}",
                t.name,
                rows.len(),
                t.rows
            )));
        }
        for (r, row) in rows.iter().enumerate() {
            let row = row
                .as_array()
                .filter(|row| row.len() == t.cols)
                .ok_or_else(|| Error::Checkpoint(format!("`{}` row {r} malformed", t.name)))?;
            for (c, v) in row.iter().enumerate() {
                t.data[r * t.cols + c] = v
                    .as_f64()
                    .ok_or_else(|| Error::Checkpoint(format!("`{}` has a non-number", t.name)))?;
            }
        }
    }
    Ok(())
}

impl Checkpoint {
    pub fn to_json(&self) -> String {
        let mut obj = Map::new();
        obj.insert("version".into(), json!(CHECKPOINT_VERSION));
        obj.insert("hidden_dim".into(), json!(self.hidden_dim));
        obj.insert("seed".into(), json!(self.seed));
        obj.insert("step".into(), json!(self.step));
        tensor_json(&self.actor.set, &mut obj);
        tensor_json(&self.critic.set, &mut obj);
        serde_json::to_string(&Value::Object(obj)).expect("checkpoint serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::Checkpoint("top level is not an object".into()))?;
        let uint = |key: &str| {
            obj.get(key)
                .and_then(Value::as_u64)
                .ok_or_else(|| Error::Checkpoint(format!("missing integer `{key}`")))
        };
        let version = uint("version")?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let hidden_dim = uint("hidden_dim")? as usize;
        if hidden_dim == 0 {
            return Err(Error::Checkpoint("hidden_dim must be positive".into()));
        }
        let mut actor = PolicyParams::zeros(hidden_dim);
        fill_from_json(&mut actor.set, obj)?;
        let mut critic = CriticParams::zeros(hidden_dim);
        fill_from_json(&mut critic.set, obj)?;
        Ok(Self {
            hidden_dim,
            seed: uint("seed")?,
            step: obj.get("step").and_then(Value::as_u64).unwrap_or(0),
            actor,
            critic,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

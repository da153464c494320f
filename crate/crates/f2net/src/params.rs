//! Named learnable parameters and their binding into a tape.

use indexmap::IndexMap;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{F2NetError, Result};
use crate::tensor::{Graph, Precision, Tensor, TensorId};

/// All learnable tensors of a model, keyed by stable names. Iteration order is
/// insertion order, which fixes the checkpoint layout.
#[derive(Clone, Default)]
pub struct ParamSet {
    entries: IndexMap<String, Tensor>,
}

impl ParamSet {
    pub fn new() -> Self {
        ParamSet::default()
    }

    pub fn insert(&mut self, name: &str, tensor: Tensor) {
        let prev = self.entries.insert(name.to_string(), tensor);
        assert!(prev.is_none(), "duplicate parameter name `{name}`");
    }

    /// Replaces an existing parameter's values (same name, any shape).
    pub fn overwrite(&mut self, name: &str, tensor: Tensor) {
        assert!(
            self.entries.contains_key(name),
            "unknown parameter `{name}`"
        );
        self.entries.insert(name.to_string(), tensor);
    }

    pub fn get(&self, name: &str) -> &Tensor {
        self.entries
            .get(name)
            .unwrap_or_else(|| panic!("unknown parameter `{name}`"))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Registers every parameter as a gradient-tracked leaf of `graph`.
    pub fn bind(&self, graph: &mut Graph) -> BoundParams {
        let ids = self
            .entries
            .iter()
            .map(|(name, t)| {
                let tracked = t.clone().with_grad();
                (name.clone(), graph.leaf(&tracked))
            })
            .collect();
        BoundParams { ids }
    }

    /// Copies accumulated gradients back from the graph after a backward pass.
    pub fn harvest_grads(&mut self, graph: &Graph, bound: &BoundParams) {
        for (name, tensor) in self.entries.iter_mut() {
            let id = bound.id(name);
            tensor.grad = Some(graph.grad(id).to_vec());
        }
    }

    /// Rescales all gradients so their global L2 norm is at most `max_norm`.
    pub fn clip_grads(&mut self, max_norm: f64) {
        let mut sq = 0.0;
        for (_, tensor) in self.entries.iter() {
            if let Some(grad) = &tensor.grad {
                sq += grad.iter().map(|g| g * g).sum::<f64>();
            }
        }
        let norm = sq.sqrt();
        if norm > max_norm {
            let scale = max_norm / norm;
            for (_, tensor) in self.entries.iter_mut() {
                if let Some(grad) = &mut tensor.grad {
                    for g in grad.iter_mut() {
                        *g *= scale;
                    }
                }
            }
        }
    }

    /// One SGD step over all parameters; clears gradients.
    pub fn sgd_step(&mut self, lr: f64, precision: Precision) -> Result<()> {
        for (name, tensor) in self.entries.iter_mut() {
            tensor
                .sgd_update(lr, precision)
                .map_err(|_| F2NetError::MissingGrad(name.clone()))?;
        }
        Ok(())
    }
}

/// Graph ids for one binding of a [`ParamSet`].
pub struct BoundParams {
    ids: IndexMap<String, TensorId>,
}

impl BoundParams {
    /// Pairs existing graph nodes with parameter names, e.g. for gradient
    /// checks that perturb parameters as plain inputs.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (String, TensorId)>) -> Self {
        BoundParams {
            ids: pairs.into_iter().collect(),
        }
    }

    pub fn id(&self, name: &str) -> TensorId {
        *self
            .ids
            .get(name)
            .unwrap_or_else(|| panic!("parameter `{name}` not bound"))
    }
}

/// Uniform init in `[-1/sqrt(fan_in), +1/sqrt(fan_in)]`.
pub fn init_uniform(rng: &mut ChaCha8Rng, shape: &[usize], fan_in: usize) -> Tensor {
    let bound = 1.0 / (fan_in as f64).sqrt();
    let numel: usize = shape.iter().product();
    let data = (0..numel).map(|_| rng.gen_range(-bound..bound)).collect();
    Tensor::new(shape, data).expect("init shape")
}

/// Conv kernel `[kh,kw,cin,cout]` plus `[cout]` bias under a shared prefix.
pub fn insert_conv(
    params: &mut ParamSet,
    rng: &mut ChaCha8Rng,
    prefix: &str,
    kh: usize,
    kw: usize,
    cin: usize,
    cout: usize,
) {
    let fan_in = kh * kw * cin;
    params.insert(
        &format!("{prefix}.w"),
        init_uniform(rng, &[kh, kw, cin, cout], fan_in),
    );
    params.insert(&format!("{prefix}.b"), init_uniform(rng, &[cout], fan_in));
}

/// FC weights `[cin,cout]` plus `[cout]` bias under a shared prefix.
pub fn insert_fc(
    params: &mut ParamSet,
    rng: &mut ChaCha8Rng,
    prefix: &str,
    cin: usize,
    cout: usize,
) {
    params.insert(&format!("{prefix}.w"), init_uniform(rng, &[cin, cout], cin));
    params.insert(&format!("{prefix}.b"), init_uniform(rng, &[cout], cin));
}

/// Conv + channel-bias layer applied through the tape.
pub fn conv_layer(
    graph: &mut Graph,
    bound: &BoundParams,
    prefix: &str,
    x: TensorId,
    stride: usize,
    pad: usize,
) -> Result<TensorId> {
    let w = bound.id(&format!("{prefix}.w"));
    let b = bound.id(&format!("{prefix}.b"));
    let y = graph.conv2d(x, w, stride, pad, 1)?;
    graph.add_bcast_chan(y, b)
}

/// FC + bias layer applied through the tape.
pub fn fc_layer(
    graph: &mut Graph,
    bound: &BoundParams,
    prefix: &str,
    x: TensorId,
) -> Result<TensorId> {
    let w = bound.id(&format!("{prefix}.w"));
    let b = bound.id(&format!("{prefix}.b"));
    graph.fully_connected(x, w, b)
}

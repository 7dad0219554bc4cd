//! Translation of a relational graph into a fixed-width masked MLP.
//!
//! Each graph node owns a contiguous slice of the hidden width. One round of
//! message exchange is a `width × width` weight matrix whose block `(i, j)`
//! is trainable iff node `j` is in the neighborhood of node `i` (the node
//! itself included), followed by ReLU:
//!
//! ```text
//! x_i^(r+1) = relu( Σ_{j ∈ N(i) ∪ {i}} W_ij^(r) x_j^(r) + b_i^(r) )
//! ```
//!
//! A dense projection maps the input to the first hidden state and another
//! maps the last hidden state to logits. Round weights are stored
//! `[receiving unit, sending unit]`; the two dense projections are stored
//! `[in, out]`.

mod checkpoint;
mod mask;

pub use checkpoint::{Checkpoint, CHECKPOINT_HEADER};
pub use mask::{BlockPartition, LayerMask};

use std::fmt::{Debug, Display};
use std::ops::{AddAssign, MulAssign, SubAssign};

use ndarray::{Array1, Array2, ArrayView2, Axis, LinalgScalar, ScalarOperand};
use num_traits::Float;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng::{derive_seed, rng_from_seed, stream, Rng};

/// Floating-point element type of a model (`f32` for runs, `f64` for checks).
pub trait Scalar:
    Float
    + LinalgScalar
    + ScalarOperand
    + AddAssign
    + SubAssign
    + MulAssign
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    fn cast_from(x: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    fn cast_from(x: f64) -> Self {
        x as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn cast_from(x: f64) -> Self {
        x
    }
    fn as_f64(self) -> f64 {
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub width: usize,
    /// Masked message-exchange rounds between the two dense projections.
    pub rounds: usize,
    pub in_dim: usize,
    pub out_dim: usize,
    /// Per-unit biases in every layer; `false` gives the bias-free recurrence.
    pub bias: bool,
    pub seed: u64,
}

impl ModelConfig {
    pub const DEFAULT_WIDTH: usize = 512;
    pub const DEFAULT_ROUNDS: usize = 5;

    pub fn new(width: usize, rounds: usize, in_dim: usize, out_dim: usize, seed: u64) -> Self {
        ModelConfig {
            width,
            rounds,
            in_dim,
            out_dim,
            bias: true,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::Config("rounds must be at least 1".into()));
        }
        if self.width == 0 || self.in_dim == 0 || self.out_dim == 0 {
            return Err(Error::Config("width, in_dim and out_dim must be positive".into()));
        }
        Ok(())
    }
}

/// Identifies one parameter tensor of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ParamId {
    InputWeights,
    InputBias,
    RoundWeights(usize),
    RoundBias(usize),
    OutputWeights,
    OutputBias,
}

impl ParamId {
    pub fn is_bias(self) -> bool {
        matches!(
            self,
            ParamId::InputBias | ParamId::RoundBias(_) | ParamId::OutputBias
        )
    }
}

/// Parameter tensors shared by models and their gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct Params<F> {
    pub input_weights: Array2<F>,
    pub input_bias: Array1<F>,
    pub round_weights: Vec<Array2<F>>,
    pub round_biases: Vec<Array1<F>>,
    pub output_weights: Array2<F>,
    pub output_bias: Array1<F>,
}

impl<F: Scalar> Params<F> {
    fn zeros(cfg: &ModelConfig) -> Self {
        let w = cfg.width;
        Params {
            input_weights: Array2::zeros((cfg.in_dim, w)),
            input_bias: Array1::zeros(w),
            round_weights: (0..cfg.rounds).map(|_| Array2::zeros((w, w))).collect(),
            round_biases: (0..cfg.rounds).map(|_| Array1::zeros(w)).collect(),
            output_weights: Array2::zeros((w, cfg.out_dim)),
            output_bias: Array1::zeros(cfg.out_dim),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Params {
            input_weights: Array2::zeros(self.input_weights.raw_dim()),
            input_bias: Array1::zeros(self.input_bias.raw_dim()),
            round_weights: self
                .round_weights
                .iter()
                .map(|w| Array2::zeros(w.raw_dim()))
                .collect(),
            round_biases: self
                .round_biases
                .iter()
                .map(|b| Array1::zeros(b.raw_dim()))
                .collect(),
            output_weights: Array2::zeros(self.output_weights.raw_dim()),
            output_bias: Array1::zeros(self.output_bias.raw_dim()),
        }
    }

    pub fn ids(&self) -> Vec<ParamId> {
        let mut ids = vec![ParamId::InputWeights, ParamId::InputBias];
        for r in 0..self.round_weights.len() {
            ids.push(ParamId::RoundWeights(r));
            ids.push(ParamId::RoundBias(r));
        }
        ids.push(ParamId::OutputWeights);
        ids.push(ParamId::OutputBias);
        ids
    }

    /// Flat row-major view of one tensor.
    pub fn get(&self, id: ParamId) -> &[F] {
        let slice = match id {
            ParamId::InputWeights => self.input_weights.as_slice(),
            ParamId::InputBias => self.input_bias.as_slice(),
            ParamId::RoundWeights(r) => self.round_weights[r].as_slice(),
            ParamId::RoundBias(r) => self.round_biases[r].as_slice(),
            ParamId::OutputWeights => self.output_weights.as_slice(),
            ParamId::OutputBias => self.output_bias.as_slice(),
        };
        slice.expect("parameters are stored in standard layout")
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut [F] {
        let slice = match id {
            ParamId::InputWeights => self.input_weights.as_slice_mut(),
            ParamId::InputBias => self.input_bias.as_slice_mut(),
            ParamId::RoundWeights(r) => self.round_weights[r].as_slice_mut(),
            ParamId::RoundBias(r) => self.round_biases[r].as_slice_mut(),
            ParamId::OutputWeights => self.output_weights.as_slice_mut(),
            ParamId::OutputBias => self.output_bias.as_slice_mut(),
        };
        slice.expect("parameters are stored in standard layout")
    }

    pub fn len(&self) -> usize {
        self.ids().into_iter().map(|id| self.get(id).len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_finite(&self) -> bool {
        self.ids()
            .into_iter()
            .all(|id| self.get(id).iter().all(|v| v.is_finite()))
    }
}

/// Activations retained by [`MlpModel::forward`] for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache<F> {
    pub input: Array2<F>,
    /// Post-ReLU hidden states `x^(0) ..= x^(rounds)`.
    pub hidden: Vec<Array2<F>>,
    pub logits: Array2<F>,
}

#[derive(Debug, Clone)]
pub struct MlpModel<F> {
    config: ModelConfig,
    params: Params<F>,
    /// `None` for an unmasked dense model.
    mask: Option<LayerMask>,
}

fn relu_inplace<F: Scalar>(a: &mut Array2<F>) {
    a.mapv_inplace(|v| if v > F::zero() { v } else { F::zero() });
}

fn uniform_symmetric(rng: &mut Rng) -> f64 {
    rng.random::<f64>() * 2.0 - 1.0
}

fn glorot_dense<F: Scalar>(rng: &mut Rng, rows: usize, cols: usize, fan_in: usize, fan_out: usize) -> Array2<F> {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || F::cast_from(bound * uniform_symmetric(rng)))
}

impl<F: Scalar> MlpModel<F> {
    /// Builds the masked model for `graph`.
    pub fn for_graph(graph: &Graph, config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let partition = BlockPartition::new(graph.node_count(), config.width)?;
        let mask = LayerMask::build(graph, &partition)?;
        Ok(Self::initialize(config, Some(mask)))
    }

    /// Unmasked model of the same shape; with the same seed it matches the
    /// complete-graph model parameter for parameter.
    pub fn dense(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self::initialize(config, None))
    }

    /// Glorot-uniform initialization. For round weights the bound of entry
    /// `(i, j)` uses the open fan-in of unit `i` and open fan-out of unit `j`.
    /// Every entry consumes one draw regardless of the mask, so the stream
    /// layout does not depend on the graph.
    fn initialize(config: ModelConfig, mask: Option<LayerMask>) -> Self {
        let mut rng = rng_from_seed(derive_seed(config.seed, stream::MODEL_INIT));
        let w = config.width;
        let mut params = Params::<F>::zeros(&config);
        params.input_weights = glorot_dense(&mut rng, config.in_dim, w, config.in_dim, w);

        let (fan_in, fan_out) = match &mask {
            Some(m) => (m.row_counts(), m.column_counts()),
            None => (vec![w; w], vec![w; w]),
        };
        for r in 0..config.rounds {
            let weights = &mut params.round_weights[r];
            for i in 0..w {
                for j in 0..w {
                    let u = uniform_symmetric(&mut rng);
                    let bound = (6.0 / (fan_in[i] + fan_out[j]) as f64).sqrt();
                    weights[[i, j]] = F::cast_from(bound * u);
                }
            }
        }
        params.output_weights = glorot_dense(&mut rng, w, config.out_dim, w, config.out_dim);

        let mut model = MlpModel {
            config,
            params,
            mask,
        };
        model.apply_mask();
        model
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &Params<F> {
        &self.params
    }

    /// Mutable parameters. Callers must restore the mask invariant with
    /// [`MlpModel::apply_mask`] after editing round weights.
    pub fn params_mut(&mut self) -> &mut Params<F> {
        &mut self.params
    }

    pub fn mask(&self) -> Option<&LayerMask> {
        self.mask.as_ref()
    }

    pub fn partition(&self) -> Option<&BlockPartition> {
        self.mask.as_ref().map(LayerMask::partition)
    }

    /// Zeroes every closed round-weight entry (and biases when disabled).
    pub fn apply_mask(&mut self) {
        if let Some(mask) = &self.mask {
            for weights in &mut self.params.round_weights {
                mask_closed_entries(weights, mask);
            }
        }
        if !self.config.bias {
            zero_biases(&mut self.params);
        }
    }

    /// Applies the same structural constraints to a gradient set.
    pub fn project_gradients(&self, grads: &mut Params<F>) {
        if let Some(mask) = &self.mask {
            for g in &mut grads.round_weights {
                mask_closed_entries(g, mask);
            }
        }
        if !self.config.bias {
            zero_biases(grads);
        }
    }

    /// True when every closed entry of every round is exactly zero.
    pub fn mask_holds(&self) -> bool {
        let Some(mask) = &self.mask else {
            return true;
        };
        self.params.round_weights.iter().all(|w| {
            w.iter()
                .zip(mask.units().iter())
                .all(|(&v, &open)| open || v == F::zero())
        })
    }

    pub fn forward(&self, input: ArrayView2<F>) -> Result<ForwardCache<F>> {
        if input.ncols() != self.config.in_dim {
            return Err(Error::Shape(format!(
                "input has {} features, model expects {}",
                input.ncols(),
                self.config.in_dim
            )));
        }
        if input.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite model input".into()));
        }
        let p = &self.params;
        let mut h = input.dot(&p.input_weights);
        h += &p.input_bias;
        relu_inplace(&mut h);
        let mut hidden = Vec::with_capacity(self.config.rounds + 1);
        hidden.push(h);
        for (w, b) in p.round_weights.iter().zip(&p.round_biases) {
            let prev = hidden.last().expect("at least the input projection");
            let mut next = prev.dot(&w.t());
            next += b;
            relu_inplace(&mut next);
            hidden.push(next);
        }
        let last = hidden.last().expect("at least the input projection");
        let mut logits = last.dot(&p.output_weights);
        logits += &p.output_bias;
        Ok(ForwardCache {
            input: input.to_owned(),
            hidden,
            logits,
        })
    }

    pub fn logits(&self, input: ArrayView2<F>) -> Result<Array2<F>> {
        Ok(self.forward(input)?.logits)
    }

    /// Backpropagates `d_logits` (gradient of the loss with respect to the
    /// logits) through a cached forward pass. The returned gradients already
    /// respect the mask.
    pub fn backward(&self, cache: &ForwardCache<F>, d_logits: ArrayView2<F>) -> Params<F> {
        let p = &self.params;
        let mut grads = p.zeros_like();
        let rounds = self.config.rounds;

        let last = &cache.hidden[rounds];
        grads.output_weights = last.t().dot(&d_logits);
        grads.output_bias = d_logits.sum_axis(Axis(0));
        let mut d_h = d_logits.dot(&p.output_weights.t());

        for r in (0..rounds).rev() {
            // ReLU'(z) = 1 iff the post-activation value is positive.
            d_h.zip_mut_with(&cache.hidden[r + 1], |d, &h| {
                if h <= F::zero() {
                    *d = F::zero();
                }
            });
            grads.round_weights[r] = d_h.t().dot(&cache.hidden[r]);
            grads.round_biases[r] = d_h.sum_axis(Axis(0));
            d_h = d_h.dot(&p.round_weights[r]);
        }

        d_h.zip_mut_with(&cache.hidden[0], |d, &h| {
            if h <= F::zero() {
                *d = F::zero();
            }
        });
        grads.input_weights = cache.input.t().dot(&d_h);
        grads.input_bias = d_h.sum_axis(Axis(0));

        self.project_gradients(&mut grads);
        grads
    }

    /// Converts to another precision, keeping structure and seed.
    pub fn cast<G: Scalar>(&self) -> MlpModel<G> {
        let conv2 = |a: &Array2<F>| a.mapv(|v| G::cast_from(v.as_f64()));
        let conv1 = |a: &Array1<F>| a.mapv(|v| G::cast_from(v.as_f64()));
        let p = &self.params;
        MlpModel {
            config: self.config,
            params: Params {
                input_weights: conv2(&p.input_weights),
                input_bias: conv1(&p.input_bias),
                round_weights: p.round_weights.iter().map(conv2).collect(),
                round_biases: p.round_biases.iter().map(conv1).collect(),
                output_weights: conv2(&p.output_weights),
                output_bias: conv1(&p.output_bias),
            },
            mask: self.mask.clone(),
        }
    }

    pub(crate) fn from_parts(config: ModelConfig, params: Params<F>, mask: Option<LayerMask>) -> Self {
        MlpModel {
            config,
            params,
            mask,
        }
    }
}

fn mask_closed_entries<F: Scalar>(weights: &mut Array2<F>, mask: &LayerMask) {
    weights.zip_mut_with(mask.units(), |v, &open| {
        if !open {
            *v = F::zero();
        }
    });
}

fn zero_biases<F: Scalar>(params: &mut Params<F>) {
    params.input_bias.fill(F::zero());
    for b in &mut params.round_biases {
        b.fill(F::zero());
    }
    params.output_bias.fill(F::zero());
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::gen_complete;
    use ndarray::array;

    fn fig1_graph() -> Graph {
        Graph::from_edge_pairs(4, [(0, 1), (0, 3), (1, 2), (1, 3), (2, 3)]).unwrap()
    }

    #[test]
    fn masked_entries_start_at_zero() {
        let model = MlpModel::<f64>::for_graph(&fig1_graph(), ModelConfig::new(16, 3, 5, 2, 1)).unwrap();
        for w in &model.params().round_weights {
            assert_eq!(w.iter().filter(|&&v| v == 0.0).count(), 32);
        }
        assert!(model.mask_holds());
    }

    #[test]
    fn cifar_shapes() {
        let g = gen_complete(128).unwrap();
        let model = MlpModel::<f32>::for_graph(&g, ModelConfig::new(512, 5, 3072, 10, 0)).unwrap();
        assert_eq!(model.params().input_weights.dim(), (3072, 512));
        assert_eq!(model.params().output_weights.dim(), (512, 10));
        assert_eq!(model.params().round_weights.len(), 5);
    }

    #[test]
    fn init_is_deterministic_per_seed() {
        let cfg = ModelConfig::new(12, 2, 4, 3, 77);
        let a = MlpModel::<f64>::for_graph(&fig1_graph(), cfg).unwrap();
        let b = MlpModel::<f64>::for_graph(&fig1_graph(), cfg).unwrap();
        assert_eq!(a.params(), b.params());
        let c = MlpModel::<f64>::for_graph(&fig1_graph(), ModelConfig { seed: 78, ..cfg }).unwrap();
        assert_ne!(a.params(), c.params());
    }

    #[test]
    fn complete_graph_matches_dense_bit_for_bit() {
        let cfg = ModelConfig::new(12, 2, 4, 3, 5);
        let masked = MlpModel::<f64>::for_graph(&gen_complete(4).unwrap(), cfg).unwrap();
        let dense = MlpModel::<f64>::dense(cfg).unwrap();
        assert_eq!(masked.params(), dense.params());
        let x = array![[0.3, -1.0, 2.0, 0.5], [1.0, 1.0, -0.2, 0.0]];
        assert_eq!(
            masked.logits(x.view()).unwrap(),
            dense.logits(x.view()).unwrap()
        );
    }

    #[test]
    fn zero_input_with_zero_bias_gives_zero_logits() {
        let mut cfg = ModelConfig::new(8, 2, 3, 4, 2);
        cfg.bias = false;
        let model = MlpModel::<f64>::for_graph(&fig1_graph(), cfg).unwrap();
        let logits = model.logits(Array2::zeros((2, 3)).view()).unwrap();
        assert!(logits.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_bad_inputs() {
        let model = MlpModel::<f64>::for_graph(&fig1_graph(), ModelConfig::new(8, 1, 3, 2, 0)).unwrap();
        assert!(matches!(
            model.forward(Array2::zeros((1, 4)).view()),
            Err(Error::Shape(_))
        ));
        let bad = array![[0.0, f64::NAN, 1.0]];
        assert!(matches!(model.forward(bad.view()), Err(Error::Numeric(_))));
        assert!(MlpModel::<f64>::for_graph(&fig1_graph(), ModelConfig::new(8, 0, 3, 2, 0)).is_err());
        assert!(matches!(
            MlpModel::<f64>::for_graph(&fig1_graph(), ModelConfig::new(3, 1, 3, 2, 0)),
            Err(Error::TooManyNodes { .. })
        ));
    }
}

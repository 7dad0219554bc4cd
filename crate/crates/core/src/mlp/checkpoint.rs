//! Single-file JSON checkpoints.

use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{BlockPartition, LayerMask, MlpModel, ModelConfig, ParamId, Params, Scalar};
use crate::error::{Error, Result};
use crate::graph::Graph;

pub const CHECKPOINT_HEADER: &str = "relnet-ckpt-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub header: String,
    pub config: ModelConfig,
    /// Relational graph size; absent for dense models.
    pub node_count: Option<usize>,
    /// `(offset, length)` unit slice per node.
    pub slices: Option<Vec<(usize, usize)>>,
    /// Open off-diagonal blocks (graph edges) as `(low, high)` pairs.
    pub open_blocks: Option<Vec<(usize, usize)>>,
    pub tensors: Vec<Tensor>,
}

fn tensor_name(id: ParamId) -> String {
    match id {
        ParamId::InputWeights => "input.weight".into(),
        ParamId::InputBias => "input.bias".into(),
        ParamId::RoundWeights(r) => format!("round{r}.weight"),
        ParamId::RoundBias(r) => format!("round{r}.bias"),
        ParamId::OutputWeights => "output.weight".into(),
        ParamId::OutputBias => "output.bias".into(),
    }
}

impl Checkpoint {
    pub fn from_model<F: Scalar>(model: &MlpModel<F>) -> Self {
        let params = model.params();
        let tensors = params
            .ids()
            .into_iter()
            .map(|id| {
                let shape = match id {
                    ParamId::InputWeights => params.input_weights.shape().to_vec(),
                    ParamId::RoundWeights(r) => params.round_weights[r].shape().to_vec(),
                    ParamId::OutputWeights => params.output_weights.shape().to_vec(),
                    _ => vec![params.get(id).len()],
                };
                Tensor {
                    name: tensor_name(id),
                    shape,
                    data: params.get(id).iter().map(|v| v.as_f64()).collect(),
                }
            })
            .collect();
        let mask = model.mask();
        Checkpoint {
            header: CHECKPOINT_HEADER.to_string(),
            config: *model.config(),
            node_count: mask.map(|m| m.partition().node_count()),
            slices: mask.map(|m| m.partition().slices().to_vec()),
            open_blocks: mask.map(LayerMask::open_pairs),
            tensors,
        }
    }

    pub fn into_model<F: Scalar>(self) -> Result<MlpModel<F>> {
        if self.header != CHECKPOINT_HEADER {
            return Err(Error::Format(format!(
                "checkpoint header {:?}, expected {CHECKPOINT_HEADER:?}",
                self.header
            )));
        }
        let cfg = self.config;
        let mask = match (self.node_count, self.open_blocks) {
            (Some(n), Some(pairs)) => {
                let partition = BlockPartition::new(n, cfg.width)?;
                if let Some(slices) = &self.slices {
                    if slices.as_slice() != partition.slices() {
                        return Err(Error::Format("checkpoint slices do not match width".into()));
                    }
                }
                let graph = Graph::from_edge_pairs(n, pairs)?;
                Some(LayerMask::build(&graph, &partition)?)
            }
            (None, None) => None,
            _ => return Err(Error::Format("incomplete mask description".into())),
        };

        let mut params = Params::<F> {
            input_weights: Array2::zeros((cfg.in_dim, cfg.width)),
            input_bias: Array1::zeros(cfg.width),
            round_weights: (0..cfg.rounds)
                .map(|_| Array2::zeros((cfg.width, cfg.width)))
                .collect(),
            round_biases: (0..cfg.rounds).map(|_| Array1::zeros(cfg.width)).collect(),
            output_weights: Array2::zeros((cfg.width, cfg.out_dim)),
            output_bias: Array1::zeros(cfg.out_dim),
        };
        let ids = params.ids();
        if ids.len() != self.tensors.len() {
            return Err(Error::Format(format!(
                "checkpoint holds {} tensors, config implies {}",
                self.tensors.len(),
                ids.len()
            )));
        }
        for (id, tensor) in ids.into_iter().zip(self.tensors) {
            let dst = params.get_mut(id);
            if tensor.name != tensor_name(id) || tensor.data.len() != dst.len() {
                return Err(Error::Format(format!(
                    "tensor {:?} ({} values) does not fit {:?} ({} values)",
                    tensor.name,
                    tensor.data.len(),
                    tensor_name(id),
                    dst.len()
                )));
            }
            for (d, s) in dst.iter_mut().zip(tensor.data) {
                *d = F::cast_from(s);
            }
        }
        let model = MlpModel::from_parts(cfg, params, mask);
        if !model.mask_holds() {
            return Err(Error::Format("closed weight entries are nonzero".into()));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(file, self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        Ok(serde_json::from_reader(file)?)
    }
}

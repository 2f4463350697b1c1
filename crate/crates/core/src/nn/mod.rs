//! Dense f64 tensors, a reverse-mode tape, recurrent cells and SGD.

mod cells;
mod check;
mod optim;
mod tape;

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cells::{GruCell, LstmCell};
pub use check::{dropout, dropout_mask, grad_check, relative_error};
pub use optim::{clip_grad_norm, sgd_update, DecayPolicy, OptimizerState};
pub use tape::{Segments, SparseMatrix, Tape, Var};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NnError {
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch { expected: Vec<usize>, got: Vec<usize> },
    #[error("non-finite gradient in parameter `{0}`")]
    NonFiniteGradient(String),
    #[error("duplicate parameter name `{0}`")]
    DuplicateParameter(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
    #[serde(skip)]
    pub grad: Option<Vec<f64>>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Tensor {
        Tensor {
            shape: shape.to_vec(),
            values: vec![0.0; shape.iter().product()],
            grad: None,
        }
    }

    pub fn from_vec(shape: &[usize], values: Vec<f64>) -> Result<Tensor, NnError> {
        let n: usize = shape.iter().product();
        if n != values.len() {
            return Err(NnError::ShapeMismatch {
                expected: shape.to_vec(),
                got: vec![values.len()],
            });
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            values,
            grad: None,
        })
    }

    /// Glorot-uniform matrix.
    pub fn glorot<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Tensor {
        let bound = (6.0 / (rows + cols) as f64).sqrt();
        Tensor {
            shape: vec![rows, cols],
            values: (0..rows * cols).map(|_| rng.gen_range(-bound..bound)).collect(),
            grad: None,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Shape seen as a matrix; vectors are single rows.
    pub fn dims(&self) -> (usize, usize) {
        match self.shape.as_slice() {
            [] => (1, 1),
            [c] => (1, *c),
            [r, c] => (*r, *c),
            s => (s[..s.len() - 1].iter().product(), s[s.len() - 1]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub tensor: Tensor,
    pub trainable: bool,
}

/// Named parameters of one model, in registration order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Parameter>,
    by_name: HashMap<String, ParamId>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointEntry {
    shape: Vec<usize>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    params: std::collections::BTreeMap<String, CheckpointEntry>,
}

pub const CHECKPOINT_VERSION: u32 = 1;

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<ParamId, NnError> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(NnError::DuplicateParameter(name));
        }
        let id = ParamId(self.params.len());
        self.by_name.insert(name.clone(), id);
        self.params.push(Parameter {
            name,
            tensor,
            trainable: true,
        });
        Ok(id)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        self.params.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.tensor.grad = None;
        }
    }

    pub fn accumulate_grad(&mut self, id: ParamId, grad: &[f64]) {
        let t = &mut self.params[id.0].tensor;
        match &mut t.grad {
            Some(g) => g.iter_mut().zip(grad).for_each(|(a, b)| *a += b),
            None => t.grad = Some(grad.to_vec()),
        }
    }

    pub fn scale_grads(&mut self, factor: f64) {
        for p in &mut self.params {
            if let Some(g) = &mut p.tensor.grad {
                g.iter_mut().for_each(|v| *v *= factor);
            }
        }
    }

    pub fn to_checkpoint_json(&self) -> String {
        let ckpt = Checkpoint {
            version: CHECKPOINT_VERSION,
            params: self
                .params
                .iter()
                .map(|p| {
                    (
                        p.name.clone(),
                        CheckpointEntry {
                            shape: p.tensor.shape.clone(),
                            values: p.tensor.values.clone(),
                        },
                    )
                })
                .collect(),
        };
        serde_json::to_string(&ckpt).expect("checkpoint serializes")
    }

    /// Overwrites values from a checkpoint. Every registered parameter must be
    /// present with the same shape.
    pub fn load_checkpoint_json(&mut self, json: &str) -> Result<(), NnError> {
        let ckpt: Checkpoint =
            serde_json::from_str(json).map_err(|e| NnError::Checkpoint(e.to_string()))?;
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(NnError::Checkpoint(format!(
                "unsupported checkpoint version {}",
                ckpt.version
            )));
        }
        if ckpt.params.len() != self.params.len() {
            return Err(NnError::Checkpoint(format!(
                "checkpoint has {} parameters, model has {}",
                ckpt.params.len(),
                self.params.len()
            )));
        }
        for p in &mut self.params {
            let entry = ckpt
                .params
                .get(&p.name)
                .ok_or_else(|| NnError::Checkpoint(format!("missing parameter `{}`", p.name)))?;
            if entry.shape != p.tensor.shape || entry.values.len() != p.tensor.values.len() {
                return Err(NnError::ShapeMismatch {
                    expected: p.tensor.shape.clone(),
                    got: entry.shape.clone(),
                });
            }
            p.tensor.values.clone_from(&entry.values);
            p.tensor.grad = None;
        }
        Ok(())
    }
}

/// Registers a Glorot-initialized matrix.
pub fn matrix<R: Rng>(
    store: &mut ParamStore,
    name: &str,
    rows: usize,
    cols: usize,
    rng: &mut R,
) -> Result<ParamId, NnError> {
    store.add(name, Tensor::glorot(rows, cols, rng))
}

/// Registers a zero bias row.
pub fn bias(store: &mut ParamStore, name: &str, cols: usize) -> Result<ParamId, NnError> {
    store.add(name, Tensor::zeros(&[1, cols]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut store = ParamStore::new();
        matrix(&mut store, "w", 5, 7, &mut rng).unwrap();
        bias(&mut store, "b", 7).unwrap();
        store.get_mut(ParamId(1)).tensor.values[3] = 1.0 / 3.0;
        let json = store.to_checkpoint_json();
        let mut other = store.clone();
        for p in other.iter_mut() {
            p.tensor.values.iter_mut().for_each(|v| *v = 0.0);
        }
        other.load_checkpoint_json(&json).unwrap();
        assert_eq!(other, store);
        assert_eq!(other.to_checkpoint_json(), json);
    }

    #[test]
    fn checkpoint_shape_mismatch() {
        let mut store = ParamStore::new();
        bias(&mut store, "b", 3).unwrap();
        let mut other = ParamStore::new();
        bias(&mut other, "b", 4).unwrap();
        assert!(matches!(
            other.load_checkpoint_json(&store.to_checkpoint_json()),
            Err(NnError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut store = ParamStore::new();
        bias(&mut store, "b", 3).unwrap();
        assert_eq!(
            bias(&mut store, "b", 3),
            Err(NnError::DuplicateParameter("b".into()))
        );
    }

    #[test]
    fn tensor_shape_checked() {
        assert!(Tensor::from_vec(&[2, 2], vec![0.0; 3]).is_err());
        assert_eq!(Tensor::from_vec(&[2, 3], vec![0.0; 6]).unwrap().dims(), (2, 3));
    }
}

//! Tensor storage, named parameter sets, initializers, and checkpoints.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("shape mismatch in {op}: {left:?} vs {right:?}")]
pub struct ShapeError {
    pub op: &'static str,
    pub left: Vec<usize>,
    pub right: Vec<usize>,
}

impl ShapeError {
    pub fn new(op: &'static str, left: &[usize], right: &[usize]) -> ShapeError {
        ShapeError { op, left: left.to_vec(), right: right.to_vec() }
    }
}

/// A dense row-major tensor with an optional gradient slot of equal shape.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TensorValue {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
    #[serde(default)]
    pub requires_grad: bool,
    #[serde(skip)]
    pub grad: Option<Vec<f64>>,
}

/// Equality covers shape, data, and learnability. The gradient slot is
/// scratch from the last backward pass, not part of the tensor's value.
impl PartialEq for TensorValue {
    fn eq(&self, other: &TensorValue) -> bool {
        self.shape == other.shape
            && self.data == other.data
            && self.requires_grad == other.requires_grad
    }
}

impl TensorValue {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> TensorValue {
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "data length must match the shape product"
        );
        TensorValue { shape, data, requires_grad: false, grad: None }
    }

    pub fn zeros(shape: Vec<usize>) -> TensorValue {
        let numel = shape.iter().product();
        TensorValue::new(shape, vec![0.0; numel])
    }

    pub fn scalar(x: f64) -> TensorValue {
        TensorValue::new(vec![1], vec![x])
    }

    pub fn vector(data: Vec<f64>) -> TensorValue {
        TensorValue::new(vec![data.len()], data)
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> TensorValue {
        TensorValue::new(vec![rows, cols], data)
    }

    pub fn with_grad(mut self) -> TensorValue {
        self.requires_grad = true;
        self
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    /// The gradient slot, allocating zeros on first touch.
    pub fn grad_mut(&mut self) -> &mut Vec<f64> {
        let numel = self.numel();
        self.grad.get_or_insert_with(|| vec![0.0; numel])
    }

    pub fn zero_grad(&mut self) {
        let numel = self.numel();
        match &mut self.grad {
            Some(g) => g.iter_mut().for_each(|x| *x = 0.0),
            None => self.grad = Some(vec![0.0; numel]),
        }
    }
}

/// Uniform init on ±sqrt(6 / (fan_in + fan_out)).
pub fn xavier_uniform(rng: &mut impl Rng, rows: usize, cols: usize) -> TensorValue {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.gen_range(-bound..bound)).collect();
    TensorValue::matrix(rows, cols, data).with_grad()
}

/// Uniform init on ±bound (used for embedding tables).
pub fn uniform_init(rng: &mut impl Rng, rows: usize, cols: usize, bound: f64) -> TensorValue {
    let data = (0..rows * cols).map(|_| rng.gen_range(-bound..bound)).collect();
    TensorValue::matrix(rows, cols, data).with_grad()
}

/// An all-zero learnable tensor (biases).
pub fn zeros(shape: Vec<usize>) -> TensorValue {
    TensorValue::zeros(shape).with_grad()
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("unsupported checkpoint version {0}")]
    Version(u64),
    #[error("malformed checkpoint: {0}")]
    Schema(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Named learned tensors, ordered by name for deterministic iteration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamSet {
    params: BTreeMap<String, TensorValue>,
}

const CHECKPOINT_VERSION: u64 = 1;

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    version: u64,
    params: BTreeMap<String, TensorValue>,
}

impl ParamSet {
    pub fn new() -> ParamSet {
        ParamSet::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: TensorValue) {
        let name = name.into();
        let prev = self.params.insert(name.clone(), value);
        assert!(prev.is_none(), "parameter '{name}' registered twice");
    }

    pub fn get(&self, name: &str) -> &TensorValue {
        self.params.get(name).unwrap_or_else(|| panic!("unknown parameter '{name}'"))
    }

    pub fn get_mut(&mut self, name: &str) -> &mut TensorValue {
        self.params.get_mut(name).unwrap_or_else(|| panic!("unknown parameter '{name}'"))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.params.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &TensorValue)> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut TensorValue)> {
        self.params.iter_mut()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.params.keys()
    }

    pub fn zero_grads(&mut self) {
        for value in self.params.values_mut() {
            value.zero_grad();
        }
    }

    /// Total learnable coordinates.
    pub fn numel(&self) -> usize {
        self.params.values().map(TensorValue::numel).sum()
    }

    /// Versioned JSON checkpoint; floats round-trip exactly.
    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        let file = CheckpointFile { version: CHECKPOINT_VERSION, params: self.params.clone() };
        let json = serde_json::to_string(&file).map_err(|e| CheckpointError::Schema(e.to_string()))?;
        let mut out = std::fs::File::create(path)?;
        out.write_all(json.as_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<ParamSet, CheckpointError> {
        let text = std::fs::read_to_string(path)?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| CheckpointError::Schema(e.to_string()))?;
        match value.get("version").and_then(|v| v.as_u64()) {
            Some(CHECKPOINT_VERSION) => {}
            Some(other) => return Err(CheckpointError::Version(other)),
            None => return Err(CheckpointError::Schema("missing version field".into())),
        }
        let file: CheckpointFile =
            serde_json::from_value(value).map_err(|e| CheckpointError::Schema(e.to_string()))?;
        for (name, tensor) in &file.params {
            if tensor.shape.iter().product::<usize>() != tensor.data.len() {
                return Err(CheckpointError::Schema(format!(
                    "parameter '{name}' has {} values for shape {:?}",
                    tensor.data.len(),
                    tensor.shape
                )));
            }
        }
        Ok(ParamSet { params: file.params })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn initializers_respect_their_bounds_and_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let w = xavier_uniform(&mut rng, 30, 50);
        let bound = (6.0f64 / 80.0).sqrt();
        assert!(w.data.iter().all(|&x| x.abs() < bound));
        assert!(w.requires_grad);
        let e = uniform_init(&mut rng, 10, 5, 0.05);
        assert!(e.data.iter().all(|&x| x.abs() < 0.05));
        let b = zeros(vec![20]);
        assert!(b.data.iter().all(|&x| x == 0.0));

        let mut rng2 = ChaCha8Rng::seed_from_u64(7);
        let w2 = xavier_uniform(&mut rng2, 30, 50);
        assert_eq!(w.data, w2.data, "same seed, same weights");
    }

    #[test]
    fn checkpoints_round_trip_bit_for_bit() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut set = ParamSet::new();
        set.insert("w", xavier_uniform(&mut rng, 4, 3));
        set.insert("b", zeros(vec![3]));
        set.insert("odd", TensorValue::vector(vec![0.1 + 0.2, 1e-300, -0.0, 1.5e17]).with_grad());
        // Enough draws across magnitudes to catch a parser that rounds
        // the last bit wrong on rare inputs.
        let wide: Vec<f64> = (0..20_000)
            .map(|_| {
                use rand::Rng;
                let exp = rng.gen_range(-30.0..30.0);
                rng.gen_range(-1.0..1.0) * f64::powf(10.0, exp)
            })
            .collect();
        set.insert("wide", TensorValue::vector(wide).with_grad());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.json");
        set.save(&path).unwrap();
        let loaded = ParamSet::load(&path).unwrap();
        for (name, tensor) in set.iter() {
            let back = loaded.get(name);
            assert_eq!(tensor.shape, back.shape);
            let bits: Vec<u64> = tensor.data.iter().map(|x| x.to_bits()).collect();
            let back_bits: Vec<u64> = back.data.iter().map(|x| x.to_bits()).collect();
            assert_eq!(bits, back_bits, "parameter '{name}' drifted");
        }
    }

    #[test]
    fn checkpoint_version_and_shape_are_validated() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.json");
        std::fs::write(&path, r#"{"version":2,"params":{}}"#).unwrap();
        assert!(matches!(ParamSet::load(&path), Err(CheckpointError::Version(2))));
        std::fs::write(
            &path,
            r#"{"version":1,"params":{"w":{"shape":[2,2],"data":[1.0]}}}"#,
        )
        .unwrap();
        assert!(matches!(ParamSet::load(&path), Err(CheckpointError::Schema(_))));
    }
}

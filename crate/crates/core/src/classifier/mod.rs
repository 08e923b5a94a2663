//! Two-hidden-layer tanh MLP with softmax output, trained by full-batch
//! gradient descent on mean cross-entropy.

mod dataset;
mod io;
mod train;

use ndarray::{Array1, Array2, ArrayView1};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::dsp::{FeatureVector, FEATURE_DIM};

pub use dataset::{EvalReport, LabeledDataset};
pub use io::{decode_model, encode_model, load_model, save_model, MODEL_MAGIC};
pub use train::{evaluate, loss_and_gradients, train, train_on, Gradients, TrainConfig, TrainReport};

pub const NUM_CLASSES: usize = 10;
pub const HIDDEN_SIZES: [usize; 2] = [280, 300];

/// Class labels in output-unit order.
pub const CLASS_LABELS: [&str; NUM_CLASSES] = [
    "air_conditioner",
    "car_horn",
    "children_playing",
    "dog_bark",
    "drilling",
    "engine_idling",
    "gun_shot",
    "jackhammer",
    "siren",
    "street_music",
];

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("input has {got} values, model expects {expected}")]
    InputLength { got: usize, expected: usize },
    #[error("input value {index} is not finite")]
    NonFiniteInput { index: usize },
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("not a model file")]
    NotAModelFile,
    #[error("truncated model file: {0}")]
    Truncated(String),
    #[error("corrupt model file: {0}")]
    Corrupt(String),
    #[error("invalid training setup: {0}")]
    Training(String),
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Fully connected layer; `weights` is `[inputs x outputs]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
}

impl Dense {
    pub fn inputs(&self) -> usize {
        self.weights.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.weights.ncols()
    }

    fn apply(&self, x: ArrayView1<f64>) -> Array1<f64> {
        x.dot(&self.weights) + &self.biases
    }
}

/// Per-dimension z-score statistics fit on the training split.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Array1<f64>,
    pub std: Array1<f64>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Self { mean: Array1::zeros(dim), std: Array1::ones(dim) }
    }

    /// Population statistics over rows; near-constant dimensions get unit
    /// scale so they standardize to zero instead of blowing up.
    pub fn fit(rows: &Array2<f64>) -> Self {
        let n = rows.nrows().max(1) as f64;
        let mean = rows.sum_axis(ndarray::Axis(0)) / n;
        let var = rows
            .rows()
            .into_iter()
            .fold(Array1::zeros(rows.ncols()), |acc: Array1<f64>, r| acc + (&r - &mean).mapv(|d| d * d))
            / n;
        let std = var.mapv(|v| if v.sqrt() > 1e-12 { v.sqrt() } else { 1.0 });
        Self { mean, std }
    }

    pub fn apply_row(&self, x: &[f64]) -> Array1<f64> {
        Array1::from_iter(
            x.iter()
                .zip(self.mean.iter().zip(self.std.iter()))
                .map(|(v, (m, s))| (v - m) / s),
        )
    }

    pub fn apply(&self, x: &Array2<f64>) -> Array2<f64> {
        (x - &self.mean) / &self.std
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub class_index: usize,
    pub confidence: f64,
    pub probabilities: Vec<f64>,
}

impl Prediction {
    pub fn label(&self) -> &'static str {
        CLASS_LABELS.get(self.class_index).copied().unwrap_or("unknown")
    }
}

/// Network parameters plus the input standardization and class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layers: Vec<Dense>,
    standardizer: Standardizer,
    labels: Vec<String>,
}

pub(crate) fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

impl MlpModel {
    /// The 193 -> 280 -> 300 -> 10 classifier with Glorot-uniform weights.
    pub fn init(seed: u64) -> Self {
        let dims = [FEATURE_DIM, HIDDEN_SIZES[0], HIDDEN_SIZES[1], NUM_CLASSES];
        let labels = CLASS_LABELS.iter().map(|s| s.to_string()).collect();
        Self::init_with_dims(&dims, labels, seed).expect("built-in dimensions are valid")
    }

    /// Any `in -> h1 -> h2 -> out` network; labels must match `out`.
    pub fn init_with_dims(dims: &[usize], labels: Vec<String>, seed: u64) -> Result<Self, ModelError> {
        if dims.len() != 4 || dims.contains(&0) {
            return Err(ModelError::Invalid(format!("expected 4 non-zero layer widths, got {dims:?}")));
        }
        let mut rng = StdRng::seed_from_u64(seed);
        let layers = dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = glorot_limit(fan_in, fan_out);
                Dense {
                    weights: Array2::from_shape_simple_fn((fan_in, fan_out), || {
                        rng.random_range(-limit..=limit)
                    }),
                    biases: Array1::zeros(fan_out),
                }
            })
            .collect();
        Self::from_parts(layers, Standardizer::identity(dims[0]), labels)
    }

    pub fn from_parts(
        layers: Vec<Dense>,
        standardizer: Standardizer,
        labels: Vec<String>,
    ) -> Result<Self, ModelError> {
        if layers.len() != 3 {
            return Err(ModelError::Invalid(format!("expected 3 layers, got {}", layers.len())));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.biases.len() != l.outputs() {
                return Err(ModelError::Invalid(format!("layer {i} bias length mismatch")));
            }
            if i > 0 && layers[i - 1].outputs() != l.inputs() {
                return Err(ModelError::Invalid(format!("layer {i} input width mismatch")));
            }
            if l.weights.iter().chain(l.biases.iter()).any(|v| !v.is_finite()) {
                return Err(ModelError::Invalid(format!("layer {i} has non-finite parameters")));
            }
        }
        let input = layers[0].inputs();
        if standardizer.mean.len() != input || standardizer.std.len() != input {
            return Err(ModelError::Invalid("standardization length mismatch".into()));
        }
        if standardizer.std.iter().any(|&s| !(s > 0.0) || !s.is_finite())
            || standardizer.mean.iter().any(|m| !m.is_finite())
        {
            return Err(ModelError::Invalid("standardization statistics must be finite, std > 0".into()));
        }
        if labels.len() != layers[2].outputs() {
            return Err(ModelError::Invalid(format!(
                "{} labels for {} outputs",
                labels.len(),
                layers[2].outputs()
            )));
        }
        Ok(Self { layers, standardizer, labels })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn standardizer(&self) -> &Standardizer {
        &self.standardizer
    }

    pub fn set_standardizer(&mut self, s: Standardizer) -> Result<(), ModelError> {
        if s.mean.len() != self.input_dim() || s.std.len() != self.input_dim() {
            return Err(ModelError::Invalid("standardization length mismatch".into()));
        }
        self.standardizer = s;
        Ok(())
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[2].outputs()
    }

    /// Class probabilities for a raw (unstandardized) input.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        if x.len() != self.input_dim() {
            return Err(ModelError::InputLength { got: x.len(), expected: self.input_dim() });
        }
        if let Some(index) = x.iter().position(|v| !v.is_finite()) {
            return Err(ModelError::NonFiniteInput { index });
        }
        let z = self.standardizer.apply_row(x);
        let h1 = self.layers[0].apply(z.view()).mapv(f64::tanh);
        let h2 = self.layers[1].apply(h1.view()).mapv(f64::tanh);
        let mut out = self.layers[2].apply(h2.view()).to_vec();
        softmax_in_place(&mut out);
        Ok(out)
    }

    pub fn predict(&self, features: &FeatureVector) -> Result<Prediction, ModelError> {
        self.predict_values(features.values())
    }

    pub fn predict_values(&self, x: &[f64]) -> Result<Prediction, ModelError> {
        let probabilities = self.forward(x)?;
        let (class_index, &confidence) = probabilities
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
            .expect("model has outputs");
        Ok(Prediction { class_index, confidence, probabilities })
    }
}

pub fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::{EvalReport, LabeledDataset, MlpModel, ModelError, Standardizer};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Shuffle seed of the stratified split.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 5000, learning_rate: 0.1, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: usize,
    pub learning_rate: f64,
    pub loss_history: Vec<f64>,
    pub final_train_accuracy: f64,
    pub final_test_accuracy: f64,
    pub seed: u64,
}

/// Gradients of the mean cross-entropy, one entry per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

struct Activations {
    h1: Array2<f64>,
    h2: Array2<f64>,
    probs: Array2<f64>,
}

fn forward_standardized(model: &MlpModel, x: &Array2<f64>) -> Activations {
    let l = model.layers();
    let h1 = (x.dot(&l[0].weights) + &l[0].biases).mapv(f64::tanh);
    let h2 = (h1.dot(&l[1].weights) + &l[1].biases).mapv(f64::tanh);
    let mut probs = h2.dot(&l[2].weights) + &l[2].biases;
    for mut row in probs.rows_mut() {
        super::softmax_in_place(row.as_slice_mut().expect("standard layout"));
    }
    Activations { h1, h2, probs }
}

fn cross_entropy(probs: &Array2<f64>, y: &Array2<f64>) -> f64 {
    let n = probs.nrows() as f64;
    -probs
        .iter()
        .zip(y.iter())
        .filter(|(_, &t)| t > 0.0)
        .map(|(&p, &t)| {
            // NaN must survive so divergence is detected.
            let p = if p.is_nan() { p } else { p.max(f64::MIN_POSITIVE) };
            t * p.ln()
        })
        .sum::<f64>()
        / n
}

/// Mean cross-entropy and its gradients for already standardized inputs
/// `x` and one-hot targets `y`.
pub fn loss_and_gradients(model: &MlpModel, x: &Array2<f64>, y: &Array2<f64>) -> (f64, Gradients) {
    let act = forward_standardized(model, x);
    let loss = cross_entropy(&act.probs, y);
    let l = model.layers();
    let n = x.nrows() as f64;

    let d3 = (&act.probs - y) / n;
    let gw3 = act.h2.t().dot(&d3);
    let gb3 = d3.sum_axis(Axis(0));

    let d2 = d3.dot(&l[2].weights.t()) * act.h2.mapv(|h| 1.0 - h * h);
    let gw2 = act.h1.t().dot(&d2);
    let gb2 = d2.sum_axis(Axis(0));

    let d1 = d2.dot(&l[1].weights.t()) * act.h1.mapv(|h| 1.0 - h * h);
    let gw1 = x.t().dot(&d1);
    let gb1 = d1.sum_axis(Axis(0));

    (loss, Gradients { weights: vec![gw1, gw2, gw3], biases: vec![gb1, gb2, gb3] })
}

impl MlpModel {
    /// Probabilities for a batch of raw inputs, one row per item.
    pub fn forward_batch(&self, x: &Array2<f64>) -> Result<Array2<f64>, ModelError> {
        if x.ncols() != self.input_dim() {
            return Err(ModelError::InputLength { got: x.ncols(), expected: self.input_dim() });
        }
        Ok(forward_standardized(self, &self.standardizer().apply(x)).probs)
    }
}

fn check_classes(model: &MlpModel, data: &LabeledDataset) -> Result<(), ModelError> {
    if data.n_classes() != model.output_dim() {
        return Err(ModelError::Training(format!(
            "dataset has {} classes, model has {} outputs",
            data.n_classes(),
            model.output_dim()
        )));
    }
    if let Some(c) = data.class_counts().iter().position(|&n| n == 0) {
        return Err(ModelError::Training(format!("class {c} has no training items")));
    }
    Ok(())
}

/// Fits standardization on `train` and runs full-batch gradient descent.
/// Returns the trained model and the per-epoch loss.
pub fn train_on(
    model: &MlpModel,
    train: &LabeledDataset,
    epochs: usize,
    learning_rate: f64,
) -> Result<(MlpModel, Vec<f64>), ModelError> {
    if epochs == 0 {
        return Err(ModelError::Training("epochs must be at least 1".into()));
    }
    if !(learning_rate > 0.0) || !learning_rate.is_finite() {
        return Err(ModelError::Training(format!("learning rate {learning_rate} must be positive")));
    }
    if train.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    check_classes(model, train)?;
    let (x_raw, y) = train.to_matrices();
    if x_raw.ncols() != model.input_dim() {
        return Err(ModelError::InputLength { got: x_raw.ncols(), expected: model.input_dim() });
    }
    let mut model = model.clone();
    let standardizer = Standardizer::fit(&x_raw);
    let x = standardizer.apply(&x_raw);
    model.set_standardizer(standardizer)?;

    let mut history = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        let (loss, grads) = loss_and_gradients(&model, &x, &y);
        if !loss.is_finite() {
            return Err(ModelError::Diverged { epoch, loss });
        }
        history.push(loss);
        for (layer, (gw, gb)) in model
            .layers_mut()
            .iter_mut()
            .zip(grads.weights.iter().zip(grads.biases.iter()))
        {
            layer.weights.scaled_add(-learning_rate, gw);
            layer.biases.scaled_add(-learning_rate, gb);
        }
    }
    Ok((model, history))
}

/// Stratified split by `data.split`, training, then evaluation on both halves.
pub fn train(
    model: &MlpModel,
    data: &LabeledDataset,
    config: TrainConfig,
) -> Result<(MlpModel, TrainReport), ModelError> {
    if data.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let (train_set, test_set) = data.stratified_split(config.seed);
    if test_set.is_empty() {
        return Err(ModelError::Training("test split is empty".into()));
    }
    let (trained, loss_history) = train_on(model, &train_set, config.epochs, config.learning_rate)?;
    let final_train_accuracy = evaluate(&trained, &train_set)?.accuracy;
    let final_test_accuracy = evaluate(&trained, &test_set)?.accuracy;
    let report = TrainReport {
        epochs: config.epochs,
        learning_rate: config.learning_rate,
        loss_history,
        final_train_accuracy,
        final_test_accuracy,
        seed: config.seed,
    };
    Ok((trained, report))
}

/// Argmax accuracy and confusion matrix `[true][predicted]`.
pub fn evaluate(model: &MlpModel, data: &LabeledDataset) -> Result<EvalReport, ModelError> {
    if data.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let k = model.output_dim();
    let mut confusion = vec![vec![0u64; k]; k];
    let (x, _) = data.to_matrices();
    let probs = model.forward_batch(&x)?;
    for (row, (_, truth)) in probs.rows().into_iter().zip(data.items()) {
        let predicted = row
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
            .unwrap_or(0);
        if *truth >= k {
            return Err(ModelError::Invalid(format!("class {truth} beyond model outputs")));
        }
        confusion[*truth][predicted] += 1;
    }
    let correct: u64 = (0..k).map(|i| confusion[i][i]).sum();
    Ok(EvalReport { accuracy: correct as f64 / data.len() as f64, confusion })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("c{i}")).collect()
    }

    /// Two clusters separated by the line x0 + x1 = 0.
    fn separable() -> LabeledDataset {
        let items = (0..20)
            .map(|i| {
                let t = i as f64 / 20.0;
                let class = i % 2;
                let sign = if class == 0 { -1.0 } else { 1.0 };
                (vec![sign * (0.5 + t), sign * (1.0 - t * 0.5) + 0.1 * t], class)
            })
            .collect();
        LabeledDataset::new(items, 2).unwrap()
    }

    #[test]
    fn toy_set_is_linearly_separable() {
        for (x, c) in separable().items() {
            assert_eq!(x[0] + x[1] > 0.0, *c == 1);
        }
    }

    #[test]
    fn learns_separable_toy_set() {
        let model = MlpModel::init_with_dims(&[2, 8, 8, 2], labels(2), 4).unwrap();
        let (trained, history) = train_on(&model, &separable(), 500, 0.1).unwrap();
        assert_eq!(history.len(), 500);
        assert_eq!(evaluate(&trained, &separable()).unwrap().accuracy, 1.0);
        for w in history.windows(50) {
            for pair in w.windows(2) {
                assert!(pair[1] <= pair[0] + 1e-3);
            }
            assert!(w[w.len() - 1] <= w[0]);
        }
    }

    #[test]
    fn precondition_errors() {
        let model = MlpModel::init_with_dims(&[2, 4, 4, 2], labels(2), 0).unwrap();
        let data = separable();
        assert!(matches!(train_on(&model, &data, 0, 0.1), Err(ModelError::Training(_))));
        assert!(matches!(train_on(&model, &data, 10, 0.0), Err(ModelError::Training(_))));
        let one_class = LabeledDataset::new(vec![(vec![0.0, 1.0], 0)], 2).unwrap();
        assert!(train_on(&model, &one_class, 10, 0.1).is_err());
        let empty = LabeledDataset::new(vec![], 2).unwrap();
        assert!(matches!(evaluate(&model, &empty), Err(ModelError::EmptyDataset)));
    }

    #[test]
    fn nan_probabilities_give_nan_loss() {
        let probs = ndarray::array![[f64::NAN, f64::NAN]];
        let y = ndarray::array![[1.0, 0.0]];
        assert!(cross_entropy(&probs, &y).is_nan());
        let zero = ndarray::array![[0.0, 1.0]];
        assert!(cross_entropy(&zero, &y).is_finite());
    }
}

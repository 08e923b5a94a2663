use ndarray::Array2;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;

use super::ModelError;

/// Feature rows with class indices and the training fraction used when the
/// set is split.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    items: Vec<(Vec<f64>, usize)>,
    n_classes: usize,
    pub split: f64,
}

impl LabeledDataset {
    pub fn new(items: Vec<(Vec<f64>, usize)>, n_classes: usize) -> Result<Self, ModelError> {
        if let Some((_, c)) = items.iter().find(|(_, c)| *c >= n_classes) {
            return Err(ModelError::Invalid(format!("class index {c} >= {n_classes}")));
        }
        if let Some(w) = items.windows(2).find(|w| w[0].0.len() != w[1].0.len()) {
            return Err(ModelError::Invalid(format!(
                "mixed feature widths {} and {}",
                w[0].0.len(),
                w[1].0.len()
            )));
        }
        Ok(Self { items, n_classes, split: 0.7 })
    }

    pub fn items(&self) -> &[(Vec<f64>, usize)] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for (_, c) in &self.items {
            counts[*c] += 1;
        }
        counts
    }

    /// Rows as a matrix and one-hot targets.
    pub fn to_matrices(&self) -> (Array2<f64>, Array2<f64>) {
        let dim = self.items.first().map_or(0, |(x, _)| x.len());
        let x = Array2::from_shape_fn((self.items.len(), dim), |(i, j)| self.items[i].0[j]);
        let y = Array2::from_shape_fn((self.items.len(), self.n_classes), |(i, c)| {
            if self.items[i].1 == c { 1.0 } else { 0.0 }
        });
        (x, y)
    }

    /// Stratified split: each class is shuffled with `seed` and
    /// `round(split * n_class)` of its items go to training. Both halves keep
    /// the original item order.
    pub fn stratified_split(&self, seed: u64) -> (LabeledDataset, LabeledDataset) {
        let mut rng = StdRng::seed_from_u64(seed);
        let mut in_train = vec![false; self.items.len()];
        for c in 0..self.n_classes {
            let mut idx: Vec<usize> = (0..self.items.len()).filter(|&i| self.items[i].1 == c).collect();
            idx.shuffle(&mut rng);
            let n_train = (self.split * idx.len() as f64).round() as usize;
            for &i in &idx[..n_train] {
                in_train[i] = true;
            }
        }
        let (mut train, mut test) = (Vec::new(), Vec::new());
        for (item, t) in self.items.iter().zip(in_train) {
            if t { train.push(item.clone()) } else { test.push(item.clone()) }
        }
        let make = |items| LabeledDataset { items, n_classes: self.n_classes, split: self.split };
        (make(train), make(test))
    }
}

/// Accuracy plus a confusion matrix indexed `[true][predicted]`.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub confusion: Vec<Vec<u64>>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n_per_class: usize, classes: usize) -> LabeledDataset {
        let items = (0..n_per_class * classes)
            .map(|i| (vec![i as f64], i % classes))
            .collect();
        LabeledDataset::new(items, classes).unwrap()
    }

    #[test]
    fn split_is_stratified_70_30() {
        let data = toy(30, 10);
        let (train, test) = data.stratified_split(1);
        assert_eq!(train.class_counts(), vec![21; 10]);
        assert_eq!(test.class_counts(), vec![9; 10]);
        assert_eq!(train.stratified_split(5).0.len(), 150);
        assert_eq!(data.stratified_split(1), (train, test));
    }

    #[test]
    fn rejects_out_of_range_class() {
        assert!(LabeledDataset::new(vec![(vec![0.0], 10)], 10).is_err());
        assert!(LabeledDataset::new(vec![(vec![0.0], 0), (vec![0.0, 1.0], 1)], 10).is_err());
    }
}

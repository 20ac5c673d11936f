//! Supervised cosine readout trained with a delta rule.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::scalar::{dot, norm, uniform_unit, Real};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum LabelError {
    #[error("input vector has zero norm")]
    ZeroInput,
    #[error("input has dimension {got}, layer expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("class {class} out of range for {classes} classes")]
    BadClass { class: usize, classes: usize },
    #[error("invalid labeling-layer configuration: {0}")]
    InvalidConfig(String),
    #[error("no training examples")]
    NoExamples,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelConfig<T> {
    /// Learning rate β.
    pub beta: T,
    /// Unit-sum activity maps make each step small, so convergence takes
    /// hundreds of epochs.
    pub epochs: usize,
    /// Uses `w += β·x·(y − d)` instead of `w += β·x·(d − y)`.
    pub reversed_sign: bool,
    pub seed: u64,
}

impl<T: Real> Default for LabelConfig<T> {
    fn default() -> Self {
        LabelConfig {
            beta: T::lit(0.1),
            epochs: 1000,
            reversed_sign: false,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassScores<T> {
    pub scores: Vec<T>,
    pub predicted: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabelReport<T> {
    pub initial_accuracy: f64,
    pub initial_error: T,
    /// Training-set accuracy after each epoch.
    pub accuracy: Vec<f64>,
    /// Mean `Σ_i (d_i − y_i)²` over the training set after each epoch.
    pub error: Vec<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabelingLayer<T> {
    pub weights: Vec<Vec<T>>,
    pub class_names: Vec<String>,
    pub beta: T,
    pub reversed_sign: bool,
}

impl<T: Real> LabelingLayer<T> {
    /// Weights drawn uniformly from `[0, 1)` and scaled to unit length.
    pub fn init(
        class_names: Vec<String>,
        dim: usize,
        config: &LabelConfig<T>,
    ) -> Result<Self, LabelError> {
        if class_names.len() < 2 {
            return Err(LabelError::InvalidConfig(format!(
                "need at least 2 classes, got {}",
                class_names.len()
            )));
        }
        if dim == 0 {
            return Err(LabelError::InvalidConfig(
                "input dimension must be at least 1".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let weights = class_names
            .iter()
            .map(|_| {
                let mut w: Vec<T> = (0..dim).map(|_| uniform_unit(&mut rng)).collect();
                let n = norm(&w);
                if n > T::zero() {
                    w.iter_mut().for_each(|v| *v = *v / n);
                } else {
                    w[0] = T::one();
                }
                w
            })
            .collect();
        Ok(LabelingLayer {
            weights,
            class_names,
            beta: config.beta,
            reversed_sign: config.reversed_sign,
        })
    }

    pub fn class_count(&self) -> usize {
        self.weights.len()
    }

    pub fn input_dim(&self) -> usize {
        self.weights[0].len()
    }

    /// Cosine similarity to each class weight; ties go to the lower class.
    pub fn score(&self, x: &[T]) -> Result<ClassScores<T>, LabelError> {
        if x.len() != self.input_dim() {
            return Err(LabelError::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let nx = norm(x);
        if !(nx > T::zero()) {
            return Err(LabelError::ZeroInput);
        }
        let scores: Vec<T> = self
            .weights
            .iter()
            .map(|w| {
                let nw = norm(w);
                if nw > T::zero() {
                    dot(x, w) / (nx * nw)
                } else {
                    T::zero()
                }
            })
            .collect();
        let mut predicted = 0;
        for (i, &s) in scores.iter().enumerate() {
            if s > scores[predicted] {
                predicted = i;
            }
        }
        Ok(ClassScores { scores, predicted })
    }

    fn evaluate(&self, examples: &[(Vec<T>, usize)]) -> Result<(f64, T), LabelError> {
        let mut correct = 0usize;
        let mut err = T::zero();
        for (x, c) in examples {
            let s = self.score(x)?;
            correct += usize::from(s.predicted == *c);
            for (i, &y) in s.scores.iter().enumerate() {
                let d = if i == *c { T::one() } else { T::zero() };
                err = err + (d - y) * (d - y);
            }
        }
        let n = examples.len();
        Ok((correct as f64 / n as f64, err / T::from_usize_lossy(n)))
    }

    /// Presents `examples` in order for `epochs` epochs. Every class weight
    /// moves by `β·x·(d_i − y_i)` per example, `d` being the one-hot target.
    pub fn train_supervised(
        &mut self,
        examples: &[(Vec<T>, usize)],
        epochs: usize,
    ) -> Result<LabelReport<T>, LabelError> {
        if examples.is_empty() {
            return Err(LabelError::NoExamples);
        }
        if !(self.beta >= T::zero() && self.beta.is_finite()) {
            return Err(LabelError::InvalidConfig(format!(
                "beta must be non-negative, got {}",
                self.beta
            )));
        }
        let classes = self.class_count();
        if let Some((_, c)) = examples.iter().find(|(_, c)| *c >= classes) {
            return Err(LabelError::BadClass { class: *c, classes });
        }
        let (initial_accuracy, initial_error) = self.evaluate(examples)?;
        let mut accuracy = Vec::with_capacity(epochs);
        let mut error = Vec::with_capacity(epochs);
        for _ in 0..epochs {
            for (x, c) in examples {
                let s = self.score(x)?;
                for (i, (w, &y)) in self.weights.iter_mut().zip(&s.scores).enumerate() {
                    let d = if i == *c { T::one() } else { T::zero() };
                    let delta = if self.reversed_sign { y - d } else { d - y };
                    let step = self.beta * delta;
                    for (wj, &xj) in w.iter_mut().zip(x) {
                        *wj = *wj + step * xj;
                    }
                }
            }
            let (a, e) = self.evaluate(examples)?;
            accuracy.push(a);
            error.push(e);
        }
        Ok(LabelReport {
            initial_accuracy,
            initial_error,
            accuracy,
            error,
        })
    }
}

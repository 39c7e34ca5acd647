//! Traditional feature processing: standardization with precomputed
//! statistics plus learned elementwise rescaling.
//!
//! x¹ = (x − μ)/σ with μ, σ fixed from training data; x² = w·x¹ + b with w, b
//! learned. Gradients flow to w and b only, so standardization runs outside
//! the tape and the affine part is the only recorded computation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::RankingExample;
use crate::nn::{NodeId, Scalar, Tape};

#[derive(Debug, Error)]
pub enum FeaturesError {
    #[error("cannot fit a standardizer on an empty training set")]
    EmptyTrainingSet,
    #[error("feature length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

/// Which processing stages are active; both on is the production setting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureConfig {
    pub normalize: bool,
    pub rescale: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig { normalize: true, rescale: true }
    }
}

/// Per-feature population mean and standard deviation. Zero variance is
/// replaced by σ = 1 so constant features pass through centered.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStats {
    pub mean: Vec<f32>,
    pub std: Vec<f32>,
}

impl FeatureStats {
    pub fn identity(dim: usize) -> Self {
        FeatureStats { mean: vec![0.0; dim], std: vec![1.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Population statistics over all documents of all training queries.
pub fn fit_standardizer(examples: &[RankingExample]) -> Result<FeatureStats, FeaturesError> {
    let mut count = 0u64;
    let mut dim = 0usize;
    for ex in examples {
        for d in &ex.documents {
            count += 1;
            dim = d.features.len();
        }
    }
    if count == 0 {
        return Err(FeaturesError::EmptyTrainingSet);
    }
    let n = count as f64;
    let mut mean = vec![0.0f64; dim];
    for ex in examples {
        for d in &ex.documents {
            for (m, &v) in mean.iter_mut().zip(&d.features) {
                *m += v as f64;
            }
        }
    }
    for m in mean.iter_mut() {
        *m /= n;
    }
    let mut var = vec![0.0f64; dim];
    for ex in examples {
        for d in &ex.documents {
            for (s, (&v, &m)) in var.iter_mut().zip(d.features.iter().zip(&mean)) {
                let d = v as f64 - m;
                *s += d * d;
            }
        }
    }
    let std = var
        .into_iter()
        .map(|s| {
            let sd = (s / n).sqrt();
            if sd == 0.0 {
                1.0
            } else {
                sd as f32
            }
        })
        .collect();
    Ok(FeatureStats { mean: mean.into_iter().map(|m| m as f32).collect(), std })
}

/// (x − μ)/σ, skipped entirely when `normalize` is off.
pub fn standardize(x: &[f32], stats: &FeatureStats, config: &FeatureConfig) -> Result<Vec<f32>, FeaturesError> {
    if x.len() != stats.dim() {
        return Err(FeaturesError::LengthMismatch { expected: stats.dim(), got: x.len() });
    }
    if !config.normalize {
        return Ok(x.to_vec());
    }
    Ok(x.iter()
        .zip(stats.mean.iter().zip(&stats.std))
        .map(|(&v, (&m, &s))| (v - m) / s)
        .collect())
}

/// Record the learned affine part on the tape: w ⊙ x̂ + b. `scale`/`shift`
/// are the bound parameter leaves; identity when `rescale` is off.
pub fn process_on_tape<T: Scalar>(
    tape: &mut Tape<T>,
    standardized: &[f32],
    scale: NodeId,
    shift: NodeId,
    config: &FeatureConfig,
) -> NodeId {
    let x = tape.constant_row(standardized.iter().map(|&v| T::from_f32(v)).collect());
    if !config.rescale {
        return x;
    }
    let scaled = tape.mul_elem(x, scale);
    tape.add(scaled, shift)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Document, FieldText};
    use crate::nn::Mat;

    fn examples_from_columns(rows: &[Vec<f32>]) -> Vec<RankingExample> {
        vec![RankingExample {
            query_id: "q".into(),
            source_fields: vec![FieldText::new("query", "x")],
            documents: rows
                .iter()
                .enumerate()
                .map(|(i, f)| Document {
                    doc_id: format!("d{i}"),
                    target_fields: vec![FieldText::new("title", "t")],
                    features: f.clone(),
                    label: 0.0,
                })
                .collect(),
        }]
    }

    #[test]
    fn population_mean_and_std() {
        let ex = examples_from_columns(&[vec![1.0], vec![2.0], vec![3.0]]);
        let stats = fit_standardizer(&ex).unwrap();
        assert!((stats.mean[0] - 2.0).abs() < 1e-6);
        assert!((stats.std[0] - 0.816_496_6).abs() < 1e-6); // sqrt(2/3)
    }

    #[test]
    fn zero_variance_guard() {
        let ex = examples_from_columns(&[vec![5.0], vec![5.0]]);
        let stats = fit_standardizer(&ex).unwrap();
        assert_eq!(stats.mean[0], 5.0);
        assert_eq!(stats.std[0], 1.0);
    }

    #[test]
    fn empty_set_errors() {
        assert!(matches!(fit_standardizer(&[]), Err(FeaturesError::EmptyTrainingSet)));
    }

    fn run_process(x: &[f32], stats: &FeatureStats, w: &[f32], b: &[f32]) -> Vec<f32> {
        let config = FeatureConfig::default();
        let xhat = standardize(x, stats, &config).unwrap();
        let mut tape: Tape<f32> = Tape::new();
        let scale = tape.leaf(Mat::row_vec(w.to_vec()));
        let shift = tape.leaf(Mat::row_vec(b.to_vec()));
        let out = process_on_tape(&mut tape, &xhat, scale, shift, &config);
        tape.value(out).data.clone()
    }

    #[test]
    fn process_examples() {
        let stats = FeatureStats { mean: vec![1.0], std: vec![2.0] };
        assert_eq!(run_process(&[3.0], &stats, &[2.0], &[0.5]), vec![2.5]);

        // x = μ, w = 1, b = 0 -> zero
        let stats2 = FeatureStats { mean: vec![4.0, -1.0], std: vec![3.0, 0.5] };
        assert_eq!(run_process(&[4.0, -1.0], &stats2, &[1.0, 1.0], &[0.0, 0.0]), vec![0.0, 0.0]);

        // w = 0 -> output = b regardless of x
        assert_eq!(run_process(&[100.0, -7.0], &stats2, &[0.0, 0.0], &[0.25, -0.5]), vec![0.25, -0.5]);
    }

    #[test]
    fn gradients_reach_scale_and_shift_only() {
        let stats = FeatureStats { mean: vec![0.0, 0.0], std: vec![1.0, 1.0] };
        let config = FeatureConfig::default();
        let xhat = standardize(&[2.0, -3.0], &stats, &config).unwrap();
        let mut tape: Tape<f64> = Tape::new();
        let scale = tape.leaf(Mat::row_vec(vec![1.0, 1.0]));
        let shift = tape.leaf(Mat::row_vec(vec![0.0, 0.0]));
        let out = process_on_tape(&mut tape, &xhat, scale, shift, &config);
        let loss = tape.sum_all(out);
        tape.backward(loss).unwrap();
        assert_eq!(tape.grad(scale).data, vec![2.0, -3.0]); // dL/dw = x̂
        assert_eq!(tape.grad(shift).data, vec![1.0, 1.0]);
    }

    #[test]
    fn length_mismatch_rejected() {
        let stats = FeatureStats::identity(3);
        assert!(matches!(
            standardize(&[1.0], &stats, &FeatureConfig::default()),
            Err(FeaturesError::LengthMismatch { expected: 3, got: 1 })
        ));
    }

    proptest::proptest! {
        /// Fitting on {a·x + c} then processing a·x + c (w = 1, b = 0) equals
        /// fitting on {x} then processing x.
        #[test]
        fn standardization_affine_invariance(
            xs in proptest::collection::vec(-50.0f32..50.0, 5),
            a in 0.5f32..4.0,
            c in -20.0f32..20.0,
        ) {
            let rows: Vec<Vec<f32>> = xs.iter().map(|&x| vec![x]).collect();
            let scaled: Vec<Vec<f32>> = xs.iter().map(|&x| vec![a * x + c]).collect();
            let cfg = FeatureConfig::default();
            let s1 = fit_standardizer(&examples_from_columns(&rows)).unwrap();
            let s2 = fit_standardizer(&examples_from_columns(&scaled)).unwrap();
            for (&x, row) in xs.iter().zip(&scaled) {
                let z1 = standardize(&[x], &s1, &cfg).unwrap()[0];
                let z2 = standardize(row, &s2, &cfg).unwrap()[0];
                proptest::prop_assert!((z1 - z2).abs() < 1e-3, "{z1} vs {z2}");
            }
        }

        /// Processing is exactly affine in x: three collinear points stay
        /// collinear with the same ratio.
        #[test]
        fn three_point_collinearity(
            x0 in -10.0f32..10.0,
            dx in 0.1f32..5.0,
            w in -3.0f32..3.0,
            b in -3.0f32..3.0,
        ) {
            let stats = FeatureStats { mean: vec![1.0], std: vec![2.0] };
            let f = |x: f32| run_process(&[x], &stats, &[w], &[b])[0];
            let (y0, y1, y2) = (f(x0), f(x0 + dx), f(x0 + 2.0 * dx));
            proptest::prop_assert!(((y2 - y1) - (y1 - y0)).abs() < 1e-3);
        }
    }
}

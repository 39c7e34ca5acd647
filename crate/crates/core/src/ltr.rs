//! Learning-to-rank layer: pointwise, pairwise, and listwise losses plus
//! LambdaRank pair weighting.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{discount, gain, ranked_indices};
use crate::nn::{NodeId, Scalar, ScorePair, Tape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LtrMode {
    Pointwise,
    Pairwise,
    Listwise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LtrConfig {
    pub mode: LtrMode,
    pub lambda_rank: bool,
}

impl Default for LtrConfig {
    fn default() -> Self {
        // listwise ranks best in practice
        LtrConfig { mode: LtrMode::Listwise, lambda_rank: false }
    }
}

impl LtrConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.lambda_rank && self.mode != LtrMode::Pairwise {
            return Err("lambda_rank applies to pairwise mode only".into());
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum LtrError {
    #[error("listwise loss requires at least one positive label")]
    AllZeroLabels,
}

/// Loss node plus a flag for the degenerate pairwise case.
pub struct LossNode {
    pub node: NodeId,
    /// Set when pairwise found no (positive, negative) pair; the loss is a
    /// constant 0 in that case.
    pub no_pairs: bool,
}

/// Mean binary cross-entropy of sigmoid(score) against labels in [0, 1].
pub fn pointwise_loss<T: Scalar>(tape: &mut Tape<T>, scores: NodeId, labels: &[f32]) -> NodeId {
    let l: Vec<T> = labels.iter().map(|&v| T::from_f32(v)).collect();
    tape.pointwise_loss(scores, &l)
}

/// |ΔNDCG| over the full list from swapping the documents at the ranked
/// positions of i and j. Closed form: |gain_i − gain_j|·|disc(pos_i) −
/// disc(pos_j)| / IDCG. Symmetric in (i, j).
pub fn lambda_weight(scores: &[f64], labels: &[f64], i: usize, j: usize) -> f64 {
    let order = ranked_indices(scores);
    let mut position = vec![0usize; scores.len()];
    for (pos, &doc) in order.iter().enumerate() {
        position[doc] = pos;
    }
    let mut ideal = labels.to_vec();
    ideal.sort_by(|a, b| b.total_cmp(a));
    let idcg: f64 = ideal
        .iter()
        .enumerate()
        .map(|(pos, &l)| gain(l) * discount(pos))
        .sum();
    if idcg == 0.0 {
        return 0.0;
    }
    ((gain(labels[i]) - gain(labels[j])) * (discount(position[i]) - discount(position[j]))).abs()
        / idcg
}

/// Mean over all (label_i > label_j) pairs of ln(1 + exp(−(s_i − s_j))),
/// optionally LambdaRank-weighted. No valid pairs yields a constant 0 loss
/// with the warning flag set.
pub fn pairwise_loss<T: Scalar>(
    tape: &mut Tape<T>,
    scores: NodeId,
    labels: &[f32],
    lambda_rank: bool,
) -> LossNode {
    let s = tape.value(scores);
    assert_eq!(s.cols, labels.len(), "scores/labels length mismatch");
    let score_vals: Vec<f64> = s.data.iter().map(|v| v.to_f64()).collect();
    let label_vals: Vec<f64> = labels.iter().map(|&v| v as f64).collect();
    let mut pairs = Vec::new();
    for i in 0..labels.len() {
        for j in 0..labels.len() {
            if labels[i] > labels[j] {
                let weight = if lambda_rank {
                    T::from_f64(lambda_weight(&score_vals, &label_vals, i, j))
                } else {
                    T::one()
                };
                pairs.push(ScorePair { pos: i, neg: j, weight });
            }
        }
    }
    let no_pairs = pairs.is_empty();
    let node = tape.pairwise_loss(scores, pairs);
    LossNode { node, no_pairs }
}

/// Cross-entropy between softmax(scores) and labels normalized to a
/// distribution: −Σ (label_i / Σlabel) · ln softmax(scores)_i.
pub fn listwise_loss<T: Scalar>(
    tape: &mut Tape<T>,
    scores: NodeId,
    labels: &[f32],
) -> Result<NodeId, LtrError> {
    let total: f32 = labels.iter().sum();
    if total <= 0.0 {
        return Err(LtrError::AllZeroLabels);
    }
    let target: Vec<T> = labels.iter().map(|&l| T::from_f32(l / total)).collect();
    Ok(tape.listwise_loss(scores, target))
}

/// Dispatch on the configured mode. Pairwise-without-pairs and listwise
/// all-zero-labels both surface as a constant 0 loss with `no_pairs` set, so
/// training can skip degenerate queries uniformly.
pub fn ranking_loss<T: Scalar>(
    tape: &mut Tape<T>,
    scores: NodeId,
    labels: &[f32],
    config: &LtrConfig,
) -> Result<LossNode, LtrError> {
    match config.mode {
        LtrMode::Pointwise => Ok(LossNode { node: pointwise_loss(tape, scores, labels), no_pairs: false }),
        LtrMode::Pairwise => Ok(pairwise_loss(tape, scores, labels, config.lambda_rank)),
        LtrMode::Listwise => listwise_loss(tape, scores, labels).map(|node| LossNode { node, no_pairs: false }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Mat;

    fn scores_tape(scores: &[f64]) -> (Tape<f64>, NodeId) {
        let mut tape: Tape<f64> = Tape::new();
        let s = tape.leaf(Mat::row_vec(scores.to_vec()));
        (tape, s)
    }

    fn loss_value(tape: &Tape<f64>, node: NodeId) -> f64 {
        tape.value(node).item()
    }

    const LN2: f64 = 0.693_147_180_559_945_3;

    #[test]
    fn pointwise_examples() {
        // score 0, label 0.5 -> ln 2
        let (mut tape, s) = scores_tape(&[0.0]);
        let l = pointwise_loss(&mut tape, s, &[0.5]);
        assert!((loss_value(&tape, l) - LN2).abs() < 1e-12);

        // large positive score with label 1 -> loss near 0
        let (mut tape, s) = scores_tape(&[30.0]);
        let l = pointwise_loss(&mut tape, s, &[1.0]);
        assert!(loss_value(&tape, l) < 1e-9);

        // scores [1,-1], labels [1,0] -> ln(1+e^-1)
        let (mut tape, s) = scores_tape(&[1.0, -1.0]);
        let l = pointwise_loss(&mut tape, s, &[1.0, 0.0]);
        assert!((loss_value(&tape, l) - 0.313_261_687_518_222_83).abs() < 1e-12);
    }

    #[test]
    fn pairwise_examples() {
        // equal scores on the only pair -> ln 2
        let (mut tape, s) = scores_tape(&[0.7, 0.7]);
        let l = pairwise_loss(&mut tape, s, &[1.0, 0.0], false);
        assert!(!l.no_pairs);
        assert!((loss_value(&tape, l.node) - LN2).abs() < 1e-12);

        // huge margin -> loss near 0
        let (mut tape, s) = scores_tape(&[40.0, 0.0]);
        let l = pairwise_loss(&mut tape, s, &[1.0, 0.0], false);
        assert!(loss_value(&tape, l.node) < 1e-9);

        // no valid pairs -> 0 with warning flag
        let (mut tape, s) = scores_tape(&[1.0, 2.0]);
        let l = pairwise_loss(&mut tape, s, &[1.0, 1.0], false);
        assert!(l.no_pairs);
        assert_eq!(loss_value(&tape, l.node), 0.0);
    }

    #[test]
    fn listwise_examples() {
        // uniform scores, one positive among n -> ln n
        for n in [2usize, 3, 7] {
            let (mut tape, s) = scores_tape(&vec![0.25; n]);
            let mut labels = vec![0.0f32; n];
            labels[1 % n] = 1.0;
            let l = listwise_loss(&mut tape, s, &labels).unwrap();
            assert!((loss_value(&tape, l) - (n as f64).ln()).abs() < 1e-12, "n={n}");
        }

        // positive score dominates -> loss near 0
        let (mut tape, s) = scores_tape(&[50.0, 0.0, 0.0]);
        let l = listwise_loss(&mut tape, s, &[1.0, 0.0, 0.0]).unwrap();
        assert!(loss_value(&tape, l) < 1e-9);

        // scores [2,1,0], labels [1,0,0] -> 2 - ln(e^2+e+1)
        let (mut tape, s) = scores_tape(&[2.0, 1.0, 0.0]);
        let l = listwise_loss(&mut tape, s, &[1.0, 0.0, 0.0]).unwrap();
        assert!((loss_value(&tape, l) - 0.407_605_964_444_380_3).abs() < 1e-12);

        // all-zero labels rejected
        let (mut tape, s) = scores_tape(&[1.0, 2.0]);
        assert!(matches!(
            listwise_loss(&mut tape, s, &[0.0, 0.0]),
            Err(LtrError::AllZeroLabels)
        ));
    }

    /// Swap-enumeration oracle: materialize the ranked list, swap the two
    /// documents, recompute full-list NDCG from scratch.
    fn lambda_oracle(scores: &[f64], labels: &[f64], i: usize, j: usize) -> f64 {
        let ndcg_of = |order: &[usize]| -> f64 {
            let dcg: f64 = order
                .iter()
                .enumerate()
                .map(|(pos, &doc)| gain(labels[doc]) * discount(pos))
                .sum();
            let mut ideal = labels.to_vec();
            ideal.sort_by(|a, b| b.total_cmp(a));
            let idcg: f64 = ideal
                .iter()
                .enumerate()
                .map(|(pos, &l)| gain(l) * discount(pos))
                .sum();
            if idcg == 0.0 {
                0.0
            } else {
                dcg / idcg
            }
        };
        let order = ranked_indices(scores);
        let base = ndcg_of(&order);
        let mut swapped = order.clone();
        let pi = order.iter().position(|&d| d == i).unwrap();
        let pj = order.iter().position(|&d| d == j).unwrap();
        swapped.swap(pi, pj);
        (ndcg_of(&swapped) - base).abs()
    }

    #[test]
    fn lambda_weights_match_swap_oracle_on_three_docs() {
        let scores = [0.2, 1.4, -0.5];
        let labels = [0.0, 1.0, 1.0];
        for i in 0..3 {
            for j in 0..3 {
                if labels[i] > labels[j] {
                    let got = lambda_weight(&scores, &labels, i, j);
                    let want = lambda_oracle(&scores, &labels, i, j);
                    assert!((got - want).abs() < 1e-12, "({i},{j}): {got} vs {want}");
                }
            }
        }
    }

    #[test]
    fn lambda_weights_symmetric() {
        let scores = [0.3, -1.0, 2.0, 0.9];
        let labels = [1.0, 0.0, 1.0, 0.0];
        for i in 0..4 {
            for j in 0..4 {
                let a = lambda_weight(&scores, &labels, i, j);
                let b = lambda_weight(&scores, &labels, j, i);
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn losses_invariant_to_document_reordering() {
        let scores = [1.2, -0.3, 0.8, 0.1];
        let labels = [1.0f32, 0.0, 1.0, 0.0];
        let perm = [2usize, 0, 3, 1];
        let pscores: Vec<f64> = perm.iter().map(|&i| scores[i]).collect();
        let plabels: Vec<f32> = perm.iter().map(|&i| labels[i]).collect();

        for config in [
            LtrConfig { mode: LtrMode::Pointwise, lambda_rank: false },
            LtrConfig { mode: LtrMode::Pairwise, lambda_rank: false },
            LtrConfig { mode: LtrMode::Pairwise, lambda_rank: true },
            LtrConfig { mode: LtrMode::Listwise, lambda_rank: false },
        ] {
            let (mut t1, s1) = scores_tape(&scores);
            let l1 = ranking_loss(&mut t1, s1, &labels, &config).unwrap();
            let (mut t2, s2) = scores_tape(&pscores);
            let l2 = ranking_loss(&mut t2, s2, &plabels, &config).unwrap();
            let (a, b) = (loss_value(&t1, l1.node), loss_value(&t2, l2.node));
            assert!((a - b).abs() < 1e-12, "{config:?}: {a} vs {b}");
        }
    }

    #[test]
    fn shift_invariance_holds_for_pairwise_listwise_but_not_pointwise() {
        let scores = [0.4, -1.1, 0.9];
        let shifted: Vec<f64> = scores.iter().map(|s| s + 3.7).collect();
        let labels = [1.0f32, 0.0, 0.0];

        let eval = |mode: LtrMode, sc: &[f64]| -> f64 {
            let (mut tape, s) = scores_tape(sc);
            let cfg = LtrConfig { mode, lambda_rank: false };
            let l = ranking_loss(&mut tape, s, &labels, &cfg).unwrap();
            loss_value(&tape, l.node)
        };

        for mode in [LtrMode::Pairwise, LtrMode::Listwise] {
            let a = eval(mode, &scores);
            let b = eval(mode, &shifted);
            assert!((a - b).abs() < 1e-5, "{mode:?} should be shift-invariant");
        }
        let a = eval(LtrMode::Pointwise, &scores);
        let b = eval(LtrMode::Pointwise, &shifted);
        assert!((a - b).abs() > 1e-3, "pointwise must depend on the shift");
    }

    #[test]
    fn loss_gradients_pass_finite_difference_checks() {
        use crate::nn::{finite_diff_check, ParamGroup, ParamStore, ParameterTensor};
        let labels = [1.0f32, 0.0, 1.0, 0.0];
        for config in [
            LtrConfig { mode: LtrMode::Pointwise, lambda_rank: false },
            LtrConfig { mode: LtrMode::Pairwise, lambda_rank: false },
            LtrConfig { mode: LtrMode::Listwise, lambda_rank: false },
        ] {
            let mut store = ParamStore::new();
            let mut p = ParameterTensor::new("scores", 1, 4, ParamGroup::Other);
            p.values.copy_from_slice(&[0.9, -0.4, 0.15, 0.3]);
            store.add(p);
            let report = finite_diff_check(
                &store,
                |tape, b| {
                    ranking_loss(tape, b.node(0), &labels, &config).unwrap().node
                },
                1e-3,
                8,
                11,
            );
            assert!(report.max_rel_err < 1e-6, "{config:?}: {report:?}");
        }
    }

    #[test]
    fn lambda_rank_gradient_fd_check_away_from_rank_boundaries() {
        use crate::nn::{finite_diff_check, ParamGroup, ParamStore, ParameterTensor};
        // well-separated scores: no rank crossing within eps
        let labels = [1.0f32, 0.0, 0.0, 1.0];
        let mut store = ParamStore::new();
        let mut p = ParameterTensor::new("scores", 1, 4, ParamGroup::Other);
        p.values.copy_from_slice(&[2.0, -1.0, 0.5, 1.0]);
        store.add(p);
        let cfg = LtrConfig { mode: LtrMode::Pairwise, lambda_rank: true };
        let report = finite_diff_check(
            &store,
            |tape, b| ranking_loss(tape, b.node(0), &labels, &cfg).unwrap().node,
            1e-3,
            8,
            13,
        );
        assert!(report.max_rel_err < 1e-6, "{report:?}");
    }

    #[test]
    fn config_validation() {
        assert!(LtrConfig { mode: LtrMode::Listwise, lambda_rank: true }.validate().is_err());
        assert!(LtrConfig { mode: LtrMode::Pairwise, lambda_rank: true }.validate().is_ok());
    }
}

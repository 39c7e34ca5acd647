//! Eager reverse-mode tape over matrix-valued nodes.
//!
//! Forward values are computed when an op is pushed; `backward` replays the
//! tape in reverse and accumulates gradients into every node's persistent
//! grad buffer. Repeated backward calls accumulate (grads are zeroed only by
//! dropping the tape or by the optimizer step downstream).
//!
//! Shape mismatches are programmer errors and panic; user-reachable
//! validation (sequence limits, label sanity) happens in the layers that
//! build graphs, before ops are pushed.

use thiserror::Error;

use super::tensor::{matmul_acc, matmul_at_acc, matmul_bt_acc, Mat, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(pub(crate) usize);

#[derive(Debug, Error)]
pub enum TapeError {
    #[error("backward called on a tape with no recorded computation")]
    EmptyTape,
    #[error("backward requires a 1x1 loss node, got {rows}x{cols}")]
    NonScalarLoss { rows: usize, cols: usize },
}

/// One logistic-pair term of a pairwise ranking loss: indices into the score
/// vector plus the (constant) pair weight.
#[derive(Debug, Clone)]
pub struct ScorePair<T> {
    pub pos: usize,
    pub neg: usize,
    pub weight: T,
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    /// Row j of the output is row `ids[j]` of `emb`; PAD rows are zero and
    /// receive no gradient.
    Gather {
        emb: NodeId,
        ids: Vec<u32>,
        pad: Option<u32>,
    },
    /// Sliding windows of `win` consecutive rows, flattened per position.
    Windows { x: NodeId, win: usize },
    MatMul { a: NodeId, b: NodeId },
    /// a * b^T
    MatMulBT { a: NodeId, b: NodeId },
    /// Broadcast a 1 x n bias over every row.
    AddRow { x: NodeId, bias: NodeId },
    Add { a: NodeId, b: NodeId },
    Sub { a: NodeId, b: NodeId },
    MulElem { a: NodeId, b: NodeId },
    Scale { x: NodeId, c: T },
    Relu { x: NodeId },
    Tanh { x: NodeId },
    Gelu { x: NodeId },
    SoftmaxRows { x: NodeId },
    LayerNormRows {
        x: NodeId,
        gain: NodeId,
        bias: NodeId,
        eps: T,
    },
    /// Column-wise max over rows; argmax row per column kept for backward.
    ColMax { x: NodeId, argmax: Vec<usize> },
    SliceCols { x: NodeId, start: usize },
    ConcatCols { parts: Vec<NodeId> },
    RowAt { x: NodeId, i: usize },
    /// Cosine similarity of two 1 x n rows, 0 when either norm is 0.
    Cosine { a: NodeId, b: NodeId },
    SumAll { x: NodeId },
    MeanAll { x: NodeId },
    /// Mean sigmoid cross-entropy of scores vs labels in [0,1].
    PointwiseLoss { scores: NodeId, labels: Vec<T> },
    /// Mean over `pair_count` of weight * ln(1 + exp(-(s_pos - s_neg))).
    PairwiseLoss {
        scores: NodeId,
        pairs: Vec<ScorePair<T>>,
        pair_count: usize,
    },
    /// -sum(p_i * ln softmax(s)_i) with p already normalized to sum 1.
    ListwiseLoss { scores: NodeId, target: Vec<T> },
    /// Mean softmax cross-entropy per row against integer targets.
    CrossEntropyRows { logits: NodeId, targets: Vec<u32> },
}

struct Node<T> {
    value: Mat<T>,
    grad: Mat<T>,
    op: Op<T>,
}

pub struct Tape<T: Scalar> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

fn softplus<T: Scalar>(z: T) -> T {
    // max(z,0) + ln(1+exp(-|z|))
    let zero = T::zero();
    let m = if z > zero { z } else { zero };
    m + (T::one() + (-z.abs()).exp()).ln()
}

fn sigmoid<T: Scalar>(z: T) -> T {
    let one = T::one();
    if z >= T::zero() {
        one / (one + (-z).exp())
    } else {
        let e = z.exp();
        e / (one + e)
    }
}

fn softmax_into<T: Scalar>(row: &[T], out: &mut [T]) {
    let mut max = row[0];
    for &v in row.iter() {
        if v > max {
            max = v;
        }
    }
    let mut sum = T::zero();
    for (o, &v) in out.iter_mut().zip(row.iter()) {
        let e = (v - max).exp();
        *o = e;
        sum = sum + e;
    }
    for o in out.iter_mut() {
        *o = *o / sum;
    }
}

fn log_sum_exp<T: Scalar>(row: &[T]) -> T {
    let mut max = row[0];
    for &v in row.iter() {
        if v > max {
            max = v;
        }
    }
    let mut sum = T::zero();
    for &v in row.iter() {
        sum = sum + (v - max).exp();
    }
    max + sum.ln()
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Mat<T> {
        &self.nodes[id.0].value
    }

    pub fn grad(&self, id: NodeId) -> &Mat<T> {
        &self.nodes[id.0].grad
    }

    pub fn shape(&self, id: NodeId) -> (usize, usize) {
        let v = &self.nodes[id.0].value;
        (v.rows, v.cols)
    }

    fn push(&mut self, value: Mat<T>, op: Op<T>) -> NodeId {
        let grad = Mat::zeros(value.rows, value.cols);
        self.nodes.push(Node { value, grad, op });
        NodeId(self.nodes.len() - 1)
    }

    /// A leaf node: parameter binding or constant input.
    pub fn leaf(&mut self, value: Mat<T>) -> NodeId {
        self.push(value, Op::Leaf)
    }

    pub fn constant_row(&mut self, data: Vec<T>) -> NodeId {
        self.leaf(Mat::row_vec(data))
    }

    pub fn gather(&mut self, emb: NodeId, ids: &[u32], pad: Option<u32>) -> NodeId {
        let e = self.value(emb);
        let (vocab, d) = (e.rows, e.cols);
        let mut out = Mat::zeros(ids.len(), d);
        for (j, &id) in ids.iter().enumerate() {
            assert!((id as usize) < vocab, "token id {id} out of range (vocab {vocab})");
            if pad == Some(id) {
                continue; // stays zero
            }
            out.row_mut(j).copy_from_slice(e.row(id as usize));
        }
        self.push(out, Op::Gather { emb, ids: ids.to_vec(), pad })
    }

    pub fn windows(&mut self, x: NodeId, win: usize) -> NodeId {
        let v = self.value(x);
        assert!(v.rows >= win, "windows: {} rows < window {}", v.rows, win);
        let positions = v.rows - win + 1;
        let d = v.cols;
        let mut out = Mat::zeros(positions, win * d);
        for p in 0..positions {
            for k in 0..win {
                out.data[p * win * d + k * d..p * win * d + (k + 1) * d]
                    .copy_from_slice(v.row(p + k));
            }
        }
        self.push(out, Op::Windows { x, win })
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (av, bv) = (self.value(a), self.value(b));
        let mut out = Mat::zeros(av.rows, bv.cols);
        matmul_acc(&mut out, av, bv);
        self.push(out, Op::MatMul { a, b })
    }

    pub fn matmul_bt(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (av, bv) = (self.value(a), self.value(b));
        let mut out = Mat::zeros(av.rows, bv.rows);
        matmul_bt_acc(&mut out, av, bv);
        self.push(out, Op::MatMulBT { a, b })
    }

    pub fn add_row(&mut self, x: NodeId, bias: NodeId) -> NodeId {
        let (xv, bv) = (self.value(x), self.value(bias));
        assert_eq!(bv.rows, 1, "bias must be a row vector");
        assert_eq!(xv.cols, bv.cols, "bias width {} vs input width {}", bv.cols, xv.cols);
        let mut out = xv.clone();
        for r in 0..out.rows {
            for c in 0..out.cols {
                out.data[r * out.cols + c] = out.data[r * out.cols + c] + bv.data[c];
            }
        }
        self.push(out, Op::AddRow { x, bias })
    }

    fn binary(&mut self, a: NodeId, b: NodeId, f: impl Fn(T, T) -> T, op: Op<T>) -> NodeId {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!(
            (av.rows, av.cols),
            (bv.rows, bv.cols),
            "elementwise shape mismatch {}x{} vs {}x{}",
            av.rows,
            av.cols,
            bv.rows,
            bv.cols
        );
        let data = av.data.iter().zip(bv.data.iter()).map(|(&x, &y)| f(x, y)).collect();
        let out = Mat::from_vec(av.rows, av.cols, data);
        self.push(out, op)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary(a, b, |x, y| x + y, Op::Add { a, b })
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary(a, b, |x, y| x - y, Op::Sub { a, b })
    }

    pub fn mul_elem(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary(a, b, |x, y| x * y, Op::MulElem { a, b })
    }

    pub fn scale(&mut self, x: NodeId, c: T) -> NodeId {
        let v = self.value(x);
        let out = Mat::from_vec(v.rows, v.cols, v.data.iter().map(|&e| e * c).collect());
        self.push(out, Op::Scale { x, c })
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x);
        let z = T::zero();
        let out = Mat::from_vec(v.rows, v.cols, v.data.iter().map(|&e| if e > z { e } else { z }).collect());
        self.push(out, Op::Relu { x })
    }

    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x);
        let out = Mat::from_vec(v.rows, v.cols, v.data.iter().map(|&e| e.tanh()).collect());
        self.push(out, Op::Tanh { x })
    }

    /// Gaussian error linear unit, tanh form.
    pub fn gelu(&mut self, x: NodeId) -> NodeId {
        let c = T::from_f64(GELU_C);
        let a = T::from_f64(GELU_A);
        let half = T::from_f64(0.5);
        let v = self.value(x);
        let out = Mat::from_vec(
            v.rows,
            v.cols,
            v.data
                .iter()
                .map(|&e| half * e * (T::one() + (c * (e + a * e * e * e)).tanh()))
                .collect(),
        );
        self.push(out, Op::Gelu { x })
    }

    pub fn softmax_rows(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x);
        let mut out = Mat::zeros(v.rows, v.cols);
        for r in 0..v.rows {
            let (src, dst) = (v.row(r), &mut out.data[r * v.cols..(r + 1) * v.cols]);
            softmax_into(src, dst);
        }
        self.push(out, Op::SoftmaxRows { x })
    }

    pub fn layer_norm_rows(&mut self, x: NodeId, gain: NodeId, bias: NodeId, eps: T) -> NodeId {
        let (xv, gv, bv) = (self.value(x), self.value(gain), self.value(bias));
        assert!(gv.rows == 1 && bv.rows == 1 && gv.cols == xv.cols && bv.cols == xv.cols);
        let n = T::from_f64(xv.cols as f64);
        let mut out = Mat::zeros(xv.rows, xv.cols);
        for r in 0..xv.rows {
            let row = xv.row(r);
            let mean = row.iter().copied().sum::<T>() / n;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
            let inv = T::one() / (var + eps).sqrt();
            for c in 0..xv.cols {
                out.data[r * xv.cols + c] = gv.data[c] * (row[c] - mean) * inv + bv.data[c];
            }
        }
        self.push(out, Op::LayerNormRows { x, gain, bias, eps })
    }

    pub fn col_max(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x);
        assert!(v.rows >= 1, "col_max on empty matrix");
        let mut out = Mat::zeros(1, v.cols);
        let mut argmax = vec![0usize; v.cols];
        for c in 0..v.cols {
            let mut best = v.at(0, c);
            let mut bi = 0;
            for r in 1..v.rows {
                let e = v.at(r, c);
                if e > best {
                    best = e;
                    bi = r;
                }
            }
            out.data[c] = best;
            argmax[c] = bi;
        }
        self.push(out, Op::ColMax { x, argmax })
    }

    pub fn slice_cols(&mut self, x: NodeId, start: usize, len: usize) -> NodeId {
        let v = self.value(x);
        assert!(start + len <= v.cols, "slice_cols out of range");
        let mut out = Mat::zeros(v.rows, len);
        for r in 0..v.rows {
            out.row_mut(r).copy_from_slice(&v.row(r)[start..start + len]);
        }
        self.push(out, Op::SliceCols { x, start })
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty(), "concat_cols needs at least one part");
        let rows = self.value(parts[0]).rows;
        let total: usize = parts.iter().map(|&p| self.value(p).cols).sum();
        let mut out = Mat::zeros(rows, total);
        let mut off = 0;
        for &p in parts {
            let v = self.value(p);
            assert_eq!(v.rows, rows, "concat_cols row mismatch");
            for r in 0..rows {
                out.data[r * total + off..r * total + off + v.cols].copy_from_slice(v.row(r));
            }
            off += v.cols;
        }
        self.push(out, Op::ConcatCols { parts: parts.to_vec() })
    }

    pub fn row_at(&mut self, x: NodeId, i: usize) -> NodeId {
        let v = self.value(x);
        assert!(i < v.rows, "row_at out of range");
        let out = Mat::row_vec(v.row(i).to_vec());
        self.push(out, Op::RowAt { x, i })
    }

    pub fn cosine(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (av, bv) = (self.value(a), self.value(b));
        assert!(av.rows == 1 && bv.rows == 1, "cosine expects row vectors");
        assert_eq!(av.cols, bv.cols, "cosine dimension mismatch {} vs {}", av.cols, bv.cols);
        let dot: T = av.data.iter().zip(bv.data.iter()).map(|(&x, &y)| x * y).sum();
        let na = av.data.iter().map(|&x| x * x).sum::<T>().sqrt();
        let nb = bv.data.iter().map(|&x| x * x).sum::<T>().sqrt();
        let denom = na * nb;
        let value = if denom == T::zero() { T::zero() } else { dot / denom };
        self.push(Mat::scalar(value), Op::Cosine { a, b })
    }

    pub fn sum_all(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x);
        let s: T = v.data.iter().copied().sum();
        self.push(Mat::scalar(s), Op::SumAll { x })
    }

    pub fn mean_all(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x);
        let s: T = v.data.iter().copied().sum();
        let n = T::from_f64(v.numel() as f64);
        self.push(Mat::scalar(s / n), Op::MeanAll { x })
    }

    pub fn pointwise_loss(&mut self, scores: NodeId, labels: &[T]) -> NodeId {
        let s = self.value(scores);
        assert_eq!(s.rows, 1, "scores must be a row vector");
        assert_eq!(s.cols, labels.len(), "scores/labels length mismatch");
        let n = T::from_f64(labels.len() as f64);
        let mut loss = T::zero();
        for (&si, &yi) in s.data.iter().zip(labels.iter()) {
            loss = loss + softplus(si) - yi * si;
        }
        self.push(
            Mat::scalar(loss / n),
            Op::PointwiseLoss { scores, labels: labels.to_vec() },
        )
    }

    pub fn pairwise_loss(&mut self, scores: NodeId, pairs: Vec<ScorePair<T>>) -> NodeId {
        let s = self.value(scores);
        assert_eq!(s.rows, 1, "scores must be a row vector");
        let pair_count = pairs.len();
        if pair_count == 0 {
            return self.leaf(Mat::scalar(T::zero()));
        }
        let mut loss = T::zero();
        for p in &pairs {
            let delta = s.data[p.pos] - s.data[p.neg];
            loss = loss + p.weight * softplus(-delta);
        }
        let n = T::from_f64(pair_count as f64);
        self.push(Mat::scalar(loss / n), Op::PairwiseLoss { scores, pairs, pair_count })
    }

    /// `target` must already be normalized to sum 1.
    pub fn listwise_loss(&mut self, scores: NodeId, target: Vec<T>) -> NodeId {
        let s = self.value(scores);
        assert_eq!(s.rows, 1, "scores must be a row vector");
        assert_eq!(s.cols, target.len(), "scores/target length mismatch");
        let lse = log_sum_exp(&s.data);
        let mut loss = T::zero();
        for (&si, &pi) in s.data.iter().zip(target.iter()) {
            if pi != T::zero() {
                loss = loss - pi * (si - lse);
            }
        }
        self.push(Mat::scalar(loss), Op::ListwiseLoss { scores, target })
    }

    pub fn cross_entropy_rows(&mut self, logits: NodeId, targets: &[u32]) -> NodeId {
        let v = self.value(logits);
        assert_eq!(v.rows, targets.len(), "one target per logit row");
        assert!(!targets.is_empty(), "cross_entropy_rows on empty target set");
        let mut loss = T::zero();
        for (r, &t) in targets.iter().enumerate() {
            let row = v.row(r);
            assert!((t as usize) < v.cols, "target id out of range");
            loss = loss + log_sum_exp(row) - row[t as usize];
        }
        let n = T::from_f64(targets.len() as f64);
        self.push(
            Mat::scalar(loss / n),
            Op::CrossEntropyRows { logits, targets: targets.to_vec() },
        )
    }

    pub fn backward(&mut self, loss: NodeId) -> Result<(), TapeError> {
        self.backward_seeded(loss, T::one())
    }

    /// Reverse pass with d(out)/d(loss) = `seed`; accumulates into every
    /// node's persistent grad buffer.
    pub fn backward_seeded(&mut self, loss: NodeId, seed: T) -> Result<(), TapeError> {
        if self.nodes.is_empty() {
            return Err(TapeError::EmptyTape);
        }
        let lv = &self.nodes[loss.0].value;
        if lv.numel() != 1 {
            return Err(TapeError::NonScalarLoss { rows: lv.rows, cols: lv.cols });
        }

        // Transient buffers so repeated backward calls accumulate cleanly.
        let mut g: Vec<Mat<T>> = self
            .nodes
            .iter()
            .map(|n| Mat::zeros(n.value.rows, n.value.cols))
            .collect();
        let mut touched = vec![false; self.nodes.len()];
        g[loss.0].data[0] = seed;
        touched[loss.0] = true;

        for i in (0..self.nodes.len()).rev() {
            if !touched[i] {
                continue;
            }
            let out_grad = std::mem::replace(&mut g[i], Mat::zeros(0, 0));
            self.propagate(i, &out_grad, &mut g, &mut touched);
            g[i] = out_grad;
        }

        for (node, gi) in self.nodes.iter_mut().zip(g.into_iter()) {
            if gi.numel() == node.grad.numel() {
                for (dst, src) in node.grad.data.iter_mut().zip(gi.data.iter()) {
                    *dst = *dst + *src;
                }
            }
        }
        Ok(())
    }

    fn propagate(&self, i: usize, og: &Mat<T>, g: &mut [Mat<T>], touched: &mut [bool]) {
        let node = &self.nodes[i];
        let mut touch = |id: NodeId| {
            touched[id.0] = true;
        };
        match &node.op {
            Op::Leaf => {}
            Op::Gather { emb, ids, pad } => {
                touch(*emb);
                let ge = &mut g[emb.0];
                let d = ge.cols;
                for (j, &id) in ids.iter().enumerate() {
                    if *pad == Some(id) {
                        continue;
                    }
                    let dst = &mut ge.data[id as usize * d..(id as usize + 1) * d];
                    let src = og.row(j);
                    for (a, b) in dst.iter_mut().zip(src.iter()) {
                        *a = *a + *b;
                    }
                }
            }
            Op::Windows { x, win } => {
                touch(*x);
                let gx = &mut g[x.0];
                let d = gx.cols;
                for p in 0..og.rows {
                    for k in 0..*win {
                        let src = &og.row(p)[k * d..(k + 1) * d];
                        let dst = gx.row_mut(p + k);
                        for (a, b) in dst.iter_mut().zip(src.iter()) {
                            *a = *a + *b;
                        }
                    }
                }
            }
            Op::MatMul { a, b } => {
                touch(*a);
                touch(*b);
                // dA += dC * B^T ; dB += A^T * dC
                let bv = &self.nodes[b.0].value;
                matmul_bt_acc(&mut g[a.0], og, bv);
                let av = &self.nodes[a.0].value;
                matmul_at_acc(&mut g[b.0], av, og);
            }
            Op::MatMulBT { a, b } => {
                touch(*a);
                touch(*b);
                // C = A * B^T : dA += dC * B ; dB += dC^T * A
                let bv = &self.nodes[b.0].value;
                matmul_acc(&mut g[a.0], og, bv);
                let av = &self.nodes[a.0].value;
                matmul_at_acc(&mut g[b.0], og, av);
            }
            Op::AddRow { x, bias } => {
                touch(*x);
                touch(*bias);
                let gx = &mut g[x.0];
                for (a, b) in gx.data.iter_mut().zip(og.data.iter()) {
                    *a = *a + *b;
                }
                let gb = &mut g[bias.0];
                for r in 0..og.rows {
                    for c in 0..og.cols {
                        gb.data[c] = gb.data[c] + og.at(r, c);
                    }
                }
            }
            Op::Add { a, b } => {
                touch(*a);
                touch(*b);
                for (dst, src) in g[a.0].data.iter_mut().zip(og.data.iter()) {
                    *dst = *dst + *src;
                }
                for (dst, src) in g[b.0].data.iter_mut().zip(og.data.iter()) {
                    *dst = *dst + *src;
                }
            }
            Op::Sub { a, b } => {
                touch(*a);
                touch(*b);
                for (dst, src) in g[a.0].data.iter_mut().zip(og.data.iter()) {
                    *dst = *dst + *src;
                }
                for (dst, src) in g[b.0].data.iter_mut().zip(og.data.iter()) {
                    *dst = *dst - *src;
                }
            }
            Op::MulElem { a, b } => {
                touch(*a);
                touch(*b);
                let bv = &self.nodes[b.0].value;
                for ((dst, src), &other) in g[a.0].data.iter_mut().zip(og.data.iter()).zip(bv.data.iter()) {
                    *dst = *dst + *src * other;
                }
                let av = &self.nodes[a.0].value;
                for ((dst, src), &other) in g[b.0].data.iter_mut().zip(og.data.iter()).zip(av.data.iter()) {
                    *dst = *dst + *src * other;
                }
            }
            Op::Scale { x, c } => {
                touch(*x);
                for (dst, src) in g[x.0].data.iter_mut().zip(og.data.iter()) {
                    *dst = *dst + *src * *c;
                }
            }
            Op::Relu { x } => {
                touch(*x);
                let xv = &self.nodes[x.0].value;
                let z = T::zero();
                for ((dst, src), &xi) in g[x.0].data.iter_mut().zip(og.data.iter()).zip(xv.data.iter()) {
                    if xi > z {
                        *dst = *dst + *src;
                    }
                }
            }
            Op::Tanh { x } => {
                touch(*x);
                let yv = &node.value;
                for ((dst, src), &yi) in g[x.0].data.iter_mut().zip(og.data.iter()).zip(yv.data.iter()) {
                    *dst = *dst + *src * (T::one() - yi * yi);
                }
            }
            Op::Gelu { x } => {
                touch(*x);
                let c = T::from_f64(GELU_C);
                let a3 = T::from_f64(3.0 * GELU_A);
                let a = T::from_f64(GELU_A);
                let half = T::from_f64(0.5);
                let xv = &self.nodes[x.0].value;
                for ((dst, src), &xi) in g[x.0].data.iter_mut().zip(og.data.iter()).zip(xv.data.iter()) {
                    let u = c * (xi + a * xi * xi * xi);
                    let t = u.tanh();
                    let deriv = half * (T::one() + t)
                        + half * xi * (T::one() - t * t) * c * (T::one() + a3 * xi * xi);
                    *dst = *dst + *src * deriv;
                }
            }
            Op::SoftmaxRows { x } => {
                touch(*x);
                let y = &node.value;
                let gx = &mut g[x.0];
                for r in 0..y.rows {
                    let yr = y.row(r);
                    let gr = og.row(r);
                    let dot: T = yr.iter().zip(gr.iter()).map(|(&a, &b)| a * b).sum();
                    let dst = gx.row_mut(r);
                    for c in 0..yr.len() {
                        dst[c] = dst[c] + yr[c] * (gr[c] - dot);
                    }
                }
            }
            Op::LayerNormRows { x, gain, bias, eps } => {
                touch(*x);
                touch(*gain);
                touch(*bias);
                let xv = &self.nodes[x.0].value;
                let gv = &self.nodes[gain.0].value;
                let n = T::from_f64(xv.cols as f64);
                for r in 0..xv.rows {
                    let row = xv.row(r);
                    let mean = row.iter().copied().sum::<T>() / n;
                    let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
                    let inv = T::one() / (var + *eps).sqrt();
                    let dy = og.row(r);
                    // normalized input and dy*gain for this row
                    let mut sum_dg = T::zero();
                    let mut sum_dgx = T::zero();
                    for c in 0..xv.cols {
                        let xhat = (row[c] - mean) * inv;
                        let dyg = dy[c] * gv.data[c];
                        sum_dg = sum_dg + dyg;
                        sum_dgx = sum_dgx + dyg * xhat;
                    }
                    let mean_dg = sum_dg / n;
                    let mean_dgx = sum_dgx / n;
                    for c in 0..xv.cols {
                        let xhat = (row[c] - mean) * inv;
                        let dyg = dy[c] * gv.data[c];
                        let dx = inv * (dyg - mean_dg - xhat * mean_dgx);
                        g[x.0].data[r * xv.cols + c] = g[x.0].data[r * xv.cols + c] + dx;
                        g[gain.0].data[c] = g[gain.0].data[c] + dy[c] * xhat;
                        g[bias.0].data[c] = g[bias.0].data[c] + dy[c];
                    }
                }
            }
            Op::ColMax { x, argmax } => {
                touch(*x);
                let gx = &mut g[x.0];
                for c in 0..og.cols {
                    let r = argmax[c];
                    gx.data[r * gx.cols + c] = gx.data[r * gx.cols + c] + og.data[c];
                }
            }
            Op::SliceCols { x, start } => {
                touch(*x);
                let gx = &mut g[x.0];
                let w = gx.cols;
                for r in 0..og.rows {
                    for c in 0..og.cols {
                        gx.data[r * w + start + c] = gx.data[r * w + start + c] + og.at(r, c);
                    }
                }
            }
            Op::ConcatCols { parts } => {
                let mut off = 0;
                for &p in parts {
                    touch(p);
                    let gp = &mut g[p.0];
                    let w = gp.cols;
                    for r in 0..og.rows {
                        let src = &og.row(r)[off..off + w];
                        let dst = gp.row_mut(r);
                        for (a, b) in dst.iter_mut().zip(src.iter()) {
                            *a = *a + *b;
                        }
                    }
                    off += w;
                }
            }
            Op::RowAt { x, i } => {
                touch(*x);
                let gx = &mut g[x.0];
                let dst = gx.row_mut(*i);
                for (a, b) in dst.iter_mut().zip(og.data.iter()) {
                    *a = *a + *b;
                }
            }
            Op::Cosine { a, b } => {
                let av = &self.nodes[a.0].value;
                let bv = &self.nodes[b.0].value;
                let dot: T = av.data.iter().zip(bv.data.iter()).map(|(&x, &y)| x * y).sum();
                let na = av.data.iter().map(|&x| x * x).sum::<T>().sqrt();
                let nb = bv.data.iter().map(|&x| x * x).sum::<T>().sqrt();
                if na == T::zero() || nb == T::zero() {
                    return; // value is the 0 convention; subgradient 0
                }
                touch(*a);
                touch(*b);
                let go = og.data[0];
                let inv = T::one() / (na * nb);
                let ca = dot / (na * na * nb) / na; // dot / (na^3 nb)... careful below
                let cb = dot / (nb * nb * na) / nb;
                for c in 0..av.cols {
                    let da = bv.data[c] * inv - av.data[c] * ca;
                    let db = av.data[c] * inv - bv.data[c] * cb;
                    g[a.0].data[c] = g[a.0].data[c] + go * da;
                    g[b.0].data[c] = g[b.0].data[c] + go * db;
                }
            }
            Op::SumAll { x } => {
                touch(*x);
                let go = og.data[0];
                for dst in g[x.0].data.iter_mut() {
                    *dst = *dst + go;
                }
            }
            Op::MeanAll { x } => {
                touch(*x);
                let n = T::from_f64(self.nodes[x.0].value.numel() as f64);
                let go = og.data[0] / n;
                for dst in g[x.0].data.iter_mut() {
                    *dst = *dst + go;
                }
            }
            Op::PointwiseLoss { scores, labels } => {
                touch(*scores);
                let sv = &self.nodes[scores.0].value;
                let n = T::from_f64(labels.len() as f64);
                let go = og.data[0] / n;
                for (c, (&si, &yi)) in sv.data.iter().zip(labels.iter()).enumerate() {
                    g[scores.0].data[c] = g[scores.0].data[c] + go * (sigmoid(si) - yi);
                }
            }
            Op::PairwiseLoss { scores, pairs, pair_count } => {
                touch(*scores);
                let sv = &self.nodes[scores.0].value;
                let go = og.data[0] / T::from_f64(*pair_count as f64);
                for p in pairs {
                    let delta = sv.data[p.pos] - sv.data[p.neg];
                    // d softplus(-delta) / d delta = -sigmoid(-delta)
                    let coeff = go * p.weight * sigmoid(-delta);
                    g[scores.0].data[p.pos] = g[scores.0].data[p.pos] - coeff;
                    g[scores.0].data[p.neg] = g[scores.0].data[p.neg] + coeff;
                }
            }
            Op::ListwiseLoss { scores, target } => {
                touch(*scores);
                let sv = &self.nodes[scores.0].value;
                let mut sm = vec![T::zero(); sv.cols];
                softmax_into(&sv.data, &mut sm);
                let go = og.data[0];
                for c in 0..sv.cols {
                    g[scores.0].data[c] = g[scores.0].data[c] + go * (sm[c] - target[c]);
                }
            }
            Op::CrossEntropyRows { logits, targets } => {
                touch(*logits);
                let lv = &self.nodes[logits.0].value;
                let n = T::from_f64(targets.len() as f64);
                let go = og.data[0] / n;
                let mut sm = vec![T::zero(); lv.cols];
                for (r, &t) in targets.iter().enumerate() {
                    softmax_into(lv.row(r), &mut sm);
                    let dst = g[logits.0].row_mut(r);
                    for c in 0..lv.cols {
                        dst[c] = dst[c] + go * sm[c];
                    }
                    dst[t as usize] = dst[t as usize] - go;
                }
            }
        }
    }
}

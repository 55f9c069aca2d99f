use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SgapError};
use crate::matrix::Matrix;
use crate::propagation::MessageStack;

use super::aggregator::{combine_messages, combined_width, gate_gradient};
use super::MessageAggregatorKind;

/// Dense layer; `weight` is `in × out`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub layers: Vec<Layer>,
    /// Shared gating vector of the adaptive aggregator.
    pub gate_s: Option<Vec<f64>>,
    pub hidden_dim: usize,
    pub dropout: f64,
    pub weighted_beta: f64,
}

impl ModelParams {
    /// Glorot-uniform weights, zero biases and a zero gate vector when
    /// `kind` is Adaptive.
    #[allow(clippy::too_many_arguments)]
    pub fn init<R: Rng + ?Sized>(
        kind: MessageAggregatorKind,
        dim: usize,
        k_pre: usize,
        k_trans: usize,
        num_classes: usize,
        hidden_dim: usize,
        dropout: f64,
        weighted_beta: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if k_trans == 0 {
            return Err(SgapError::Parameter("k_trans must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&dropout) {
            return Err(SgapError::Parameter(format!("dropout must lie in [0, 1), got {dropout}")));
        }
        if num_classes == 0 {
            return Err(SgapError::Parameter("need at least one class".into()));
        }
        let input = combined_width(kind, dim, k_pre);
        let mut widths = vec![input];
        widths.extend(std::iter::repeat_n(hidden_dim, k_trans - 1));
        widths.push(num_classes);
        let layers = widths
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
                Layer {
                    weight: Matrix::from_fn(fan_in, fan_out, |_, _| rng.random_range(-a..=a)),
                    bias: vec![0.0; fan_out],
                }
            })
            .collect();
        Ok(ModelParams {
            layers,
            gate_s: (kind == MessageAggregatorKind::Adaptive).then(|| vec![0.0; dim]),
            hidden_dim,
            dropout,
            weighted_beta,
        })
    }

    pub fn input_width(&self) -> usize {
        self.layers.first().map_or(0, |l| l.weight.rows())
    }

    pub fn num_classes(&self) -> usize {
        self.layers.last().map_or(0, |l| l.weight.cols())
    }

    /// Parameter blocks in a fixed order: `W0, b0, W1, b1, ..., [gate_s]`.
    pub fn blocks(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::with_capacity(2 * self.layers.len() + 1);
        for l in &self.layers {
            out.push(l.weight.as_slice());
            out.push(&l.bias);
        }
        if let Some(s) = &self.gate_s {
            out.push(s);
        }
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::with_capacity(2 * self.layers.len() + 1);
        for l in &mut self.layers {
            out.push(l.weight.as_mut_slice());
            out.push(&mut l.bias);
        }
        if let Some(s) = &mut self.gate_s {
            out.push(s);
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().iter().all(|b| b.iter().all(|v| v.is_finite()))
    }
}

/// Gradients laid out like [`ModelParams::blocks`].
#[derive(Clone, Debug, PartialEq)]
pub struct ParamGrads {
    pub blocks: Vec<Vec<f64>>,
}

/// Inverted-dropout masks for each hidden activation (entries are `0` or
/// `1 / (1 − p)`).
#[derive(Clone, Debug)]
pub struct DropoutMasks {
    masks: Vec<Matrix>,
}

impl DropoutMasks {
    pub fn sample<R: Rng + ?Sized>(params: &ModelParams, rows: usize, rng: &mut R) -> Self {
        let p = params.dropout;
        let keep = 1.0 / (1.0 - p);
        let masks = params.layers[..params.layers.len().saturating_sub(1)]
            .iter()
            .map(|l| {
                Matrix::from_fn(rows, l.weight.cols(), |_, _| {
                    if p > 0.0 && rng.random::<f64>() < p {
                        0.0
                    } else {
                        keep
                    }
                })
            })
            .collect();
        DropoutMasks { masks }
    }
}

/// Activations kept for the backward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    /// Input to each layer (post-ReLU, post-dropout for hidden layers).
    inputs: Vec<Matrix>,
    /// Pre-activation of each hidden layer.
    pre: Vec<Matrix>,
    /// Logits of the output layer.
    pub logits: Matrix,
}

fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut p = logits.clone();
    for v in 0..p.rows() {
        let row = p.row_mut(v);
        let mx = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for x in row.iter_mut() {
            *x = (*x - mx).exp();
            z += *x;
        }
        row.iter_mut().for_each(|x| *x /= z);
    }
    p
}

fn affine(a: &Matrix, layer: &Layer) -> Result<Matrix> {
    let mut z = a.matmul(&layer.weight)?;
    for v in 0..z.rows() {
        for (o, b) in z.row_mut(v).iter_mut().zip(&layer.bias) {
            *o += b;
        }
    }
    Ok(z)
}

/// MLP forward with explicit dropout masks (`None` disables dropout).
/// Returns softmax predictions.
pub fn mlp_forward_with_masks(
    params: &ModelParams,
    c: &Matrix,
    masks: Option<&DropoutMasks>,
) -> Result<(Matrix, ForwardCache)> {
    if params.layers.is_empty() {
        return Err(SgapError::Config("model has no layers".into()));
    }
    if c.cols() != params.input_width() {
        return Err(SgapError::dim(
            format!("input width {}", params.input_width()),
            c.cols(),
        ));
    }
    let last = params.layers.len() - 1;
    let mut inputs = Vec::with_capacity(params.layers.len());
    let mut pre = Vec::with_capacity(last);
    let mut a = c.clone();
    for (l, layer) in params.layers.iter().enumerate() {
        let z = affine(&a, layer)?;
        inputs.push(a);
        if l == last {
            let probs = softmax_rows(&z);
            return Ok((probs, ForwardCache { inputs, pre, logits: z }));
        }
        let mut h = z.clone();
        h.as_mut_slice().iter_mut().for_each(|x| *x = x.max(0.0));
        if let Some(m) = masks {
            let mask = &m.masks[l];
            if mask.shape() != h.shape() {
                return Err(SgapError::dim(format!("{:?}", h.shape()), format!("{:?}", mask.shape())));
            }
            for (x, k) in h.as_mut_slice().iter_mut().zip(mask.as_slice()) {
                *x *= k;
            }
        }
        pre.push(z);
        a = h;
    }
    unreachable!("loop returns at the output layer")
}

/// MLP forward; dropout masks are drawn from `rng` only when `training`.
pub fn mlp_forward<R: Rng + ?Sized>(
    params: &ModelParams,
    c: &Matrix,
    training: bool,
    rng: &mut R,
) -> Result<(Matrix, ForwardCache)> {
    if training && params.dropout > 0.0 {
        let masks = DropoutMasks::sample(params, c.rows(), rng);
        mlp_forward_with_masks(params, c, Some(&masks))
    } else {
        mlp_forward_with_masks(params, c, None)
    }
}

/// Softmax predictions for every node of `stack`, dropout disabled.
pub fn predict(params: &ModelParams, kind: MessageAggregatorKind, stack: &MessageStack) -> Result<Matrix> {
    let comb = combine_messages(kind, stack, params)?;
    Ok(mlp_forward_with_masks(params, &comb.c, None)?.0)
}

/// Loss and gradients on every row of `stack` (already restricted to the
/// labeled nodes). `labels[i]` belongs to row `i`.
pub(crate) fn loss_and_grads_rows(
    params: &ModelParams,
    stack: &MessageStack,
    kind: MessageAggregatorKind,
    labels: &[usize],
    weight_decay: f64,
    masks: Option<&DropoutMasks>,
) -> Result<(f64, ParamGrads)> {
    let n = stack.num_nodes();
    if n == 0 {
        return Err(SgapError::EmptyMask("loss needs at least one labeled node"));
    }
    debug_assert_eq!(labels.len(), n);
    let comb = combine_messages(kind, stack, params)?;
    let (probs, cache) = mlp_forward_with_masks(params, &comb.c, masks)?;
    let classes = probs.cols();

    let mut loss = 0.0;
    let mut dz = probs;
    let inv_n = 1.0 / n as f64;
    for (v, &y) in labels.iter().enumerate() {
        if y >= classes {
            return Err(SgapError::Validation(format!("label {y} >= {classes} classes")));
        }
        let z = cache.logits.row(v);
        let mx = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = mx + z.iter().map(|x| (x - mx).exp()).sum::<f64>().ln();
        loss += lse - z[y];
        let row = dz.row_mut(v);
        row[y] -= 1.0;
        row.iter_mut().for_each(|g| *g *= inv_n);
    }
    loss *= inv_n;
    loss += 0.5 * weight_decay * params.layers.iter().map(|l| l.weight.sum_sq()).sum::<f64>();

    let nl = params.layers.len();
    let mut layer_grads: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(nl);
    let mut dc = None;
    for l in (0..nl).rev() {
        let layer = &params.layers[l];
        let mut dw = cache.inputs[l].t_matmul(&dz)?;
        dw.add_scaled(&layer.weight, weight_decay);
        let db = dz.col_sums();
        layer_grads.push((dw.into_vec(), db));
        if l > 0 {
            let mut da = dz.matmul_t(&layer.weight)?;
            let z_prev = &cache.pre[l - 1];
            let mask = masks.map(|m| &m.masks[l - 1]);
            for (i, g) in da.as_mut_slice().iter_mut().enumerate() {
                let relu = if z_prev.as_slice()[i] > 0.0 { 1.0 } else { 0.0 };
                let keep = mask.map_or(1.0, |m| m.as_slice()[i]);
                *g *= relu * keep;
            }
            dz = da;
        } else if params.gate_s.is_some() && kind == MessageAggregatorKind::Adaptive {
            dc = Some(dz.matmul_t(&layer.weight)?);
        }
    }
    layer_grads.reverse();
    let mut blocks = Vec::with_capacity(2 * nl + 1);
    for (dw, db) in layer_grads {
        blocks.push(dw);
        blocks.push(db);
    }
    if let Some(s) = &params.gate_s {
        let ds = match (&comb.gates, dc) {
            (Some(g), Some(dc)) => gate_gradient(stack, g, &dc),
            // gate unused by this aggregator
            _ => vec![0.0; s.len()],
        };
        blocks.push(ds);
    }
    Ok((loss, ParamGrads { blocks }))
}

/// Mean cross-entropy over the nodes in `mask` plus `weight_decay·½‖W‖²`,
/// with gradients for every layer and the gate vector.
pub fn loss_and_grads(
    params: &ModelParams,
    stack: &MessageStack,
    kind: MessageAggregatorKind,
    labels: &[usize],
    mask: &[usize],
    weight_decay: f64,
    dropout: Option<&DropoutMasks>,
) -> Result<(f64, ParamGrads)> {
    if mask.is_empty() {
        return Err(SgapError::EmptyMask("loss needs at least one labeled node"));
    }
    if labels.len() != stack.num_nodes() {
        return Err(SgapError::dim(stack.num_nodes(), labels.len()));
    }
    if let Some(&bad) = mask.iter().find(|&&v| v >= stack.num_nodes()) {
        return Err(SgapError::NodeRange {
            index: bad,
            num_nodes: stack.num_nodes(),
        });
    }
    let sub = stack.select_rows(mask);
    let sub_labels: Vec<usize> = mask.iter().map(|&v| labels[v]).collect();
    loss_and_grads_rows(params, &sub, kind, &sub_labels, weight_decay, dropout)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn zero_params(input: usize, classes: usize) -> ModelParams {
        ModelParams {
            layers: vec![Layer {
                weight: Matrix::zeros(input, classes),
                bias: vec![0.0; classes],
            }],
            gate_s: None,
            hidden_dim: 8,
            dropout: 0.0,
            weighted_beta: 0.5,
        }
    }

    #[test]
    fn zero_weights_give_uniform_softmax() {
        let p = zero_params(4, 3);
        let c = Matrix::from_fn(5, 4, |i, j| (i * j) as f64 - 3.0);
        let (probs, _) = mlp_forward_with_masks(&p, &c, None).unwrap();
        for v in 0..5 {
            for &x in probs.row(v) {
                assert!((x - 1.0 / 3.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn single_layer_identity_is_softmax_of_input() {
        let mut p = zero_params(2, 2);
        p.layers[0].weight = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let c = Matrix::from_rows(&[vec![1.0, 3.0]]).unwrap();
        let (probs, _) = mlp_forward_with_masks(&p, &c, None).unwrap();
        let e = (1f64.exp(), 3f64.exp());
        assert!((probs.get(0, 0) - e.0 / (e.0 + e.1)).abs() < 1e-15);
    }

    #[test]
    fn rows_sum_to_one_and_width_checked() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = ModelParams::init(MessageAggregatorKind::Mean, 5, 2, 3, 4, 7, 0.5, 0.5, &mut rng)
            .unwrap();
        let c = Matrix::from_fn(6, 5, |i, j| ((i + 2 * j) % 5) as f64 - 2.0);
        let (probs, _) = mlp_forward(&p, &c, true, &mut rng).unwrap();
        for v in 0..6 {
            assert!((probs.row(v).iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        assert!(matches!(
            mlp_forward(&p, &Matrix::zeros(2, 4), false, &mut rng),
            Err(SgapError::Dimension { .. })
        ));
    }

    #[test]
    fn uniform_predictions_loss_is_ln_c() {
        let p = zero_params(2, 4);
        let stack = MessageStack::new(vec![Matrix::from_fn(3, 2, |i, j| (i + j) as f64)]).unwrap();
        let (loss, _) = loss_and_grads(
            &p,
            &stack,
            MessageAggregatorKind::None,
            &[0, 3, 1],
            &[0, 1, 2],
            0.0,
            None,
        )
        .unwrap();
        assert!((loss - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn empty_mask_rejected() {
        let p = zero_params(2, 2);
        let stack = MessageStack::new(vec![Matrix::zeros(3, 2)]).unwrap();
        assert!(matches!(
            loss_and_grads(&p, &stack, MessageAggregatorKind::None, &[0, 1, 0], &[], 0.0, None),
            Err(SgapError::EmptyMask(_))
        ));
    }

    #[test]
    fn init_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = ModelParams::init(MessageAggregatorKind::Concatenate, 3, 2, 3, 5, 16, 0.5, 0.5, &mut rng)
            .unwrap();
        assert_eq!(p.input_width(), 9);
        assert_eq!(p.layers[1].weight.shape(), (16, 16));
        assert_eq!(p.num_classes(), 5);
        assert!(p.gate_s.is_none());
        let p = ModelParams::init(MessageAggregatorKind::Adaptive, 3, 2, 1, 2, 16, 0.0, 0.5, &mut rng)
            .unwrap();
        assert_eq!(p.gate_s.as_deref(), Some(&[0.0; 3][..]));
    }
}

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::distr::{Distribution, Uniform};

use crate::error::{Error, Result};
use crate::seed;

/// Anything the trainer can fit: a classifier producing logits with
/// exact gradients of the mean softmax cross-entropy.
pub trait Network: ParamTensors {
    type Grad: ParamTensors;

    fn input_dim(&self) -> usize;
    fn num_classes(&self) -> usize;
    fn logits(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>>;
    fn loss_and_grad(&self, x: ArrayView2<'_, f64>, labels: &[usize]) -> Result<(f64, Self::Grad)>;
    /// Parameter tensors in a fixed order matching [`ParamTensors::tensors`] of `Grad`.
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;
}

pub trait ParamTensors {
    fn tensors(&self) -> Vec<&[f64]>;
}

/// Fully connected layer `y = x·W + b`, `W` stored input-major (`in × out`).
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Dense {
            weight: Array2::zeros((fan_in, fan_out)),
            bias: Array1::zeros(fan_out),
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weight.nrows()
    }

    pub fn fan_out(&self) -> usize {
        self.weight.ncols()
    }

    fn apply(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut z = x.dot(&self.weight);
        z += &self.bias;
        z
    }
}

/// Rectifier network; identity on the output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub layers: Vec<Dense>,
}

/// Gradients laid out exactly like the model.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrad {
    pub layers: Vec<Dense>,
}

/// Layer inputs recorded by [`MlpModel::forward`]; `inputs[l]` feeds layer `l`.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub inputs: Vec<Array2<f64>>,
}

impl ParamTensors for MlpGrad {
    fn tensors(&self) -> Vec<&[f64]> {
        dense_tensors(&self.layers)
    }
}

impl ParamTensors for MlpModel {
    fn tensors(&self) -> Vec<&[f64]> {
        dense_tensors(&self.layers)
    }
}

fn dense_tensors(layers: &[Dense]) -> Vec<&[f64]> {
    layers
        .iter()
        .flat_map(|l| {
            [
                l.weight.as_slice().expect("standard layout"),
                l.bias.as_slice().expect("standard layout"),
            ]
        })
        .collect()
}

/// Kaiming-uniform (fan-in, rectifier gain) weights multiplied by `init_scale`;
/// zero biases.
///
/// `widths` lists every layer width, input first and output last.
pub fn init_model(widths: &[usize], init_scale: f64, seed: u64) -> Result<MlpModel> {
    if widths.len() < 2 {
        return Err(Error::invalid(
            "widths",
            format!("need input and output widths, got {widths:?}"),
        ));
    }
    if widths.contains(&0) {
        return Err(Error::invalid("widths", format!("zero width in {widths:?}")));
    }
    if !(init_scale > 0.0 && init_scale.is_finite()) {
        return Err(Error::invalid(
            "init_scale",
            format!("must be positive, got {init_scale}"),
        ));
    }
    let mut rng = seed::rng(seed);
    let layers = widths
        .windows(2)
        .map(|w| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (6.0 / fan_in as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
            let weight = Array2::from_shape_simple_fn((fan_in, fan_out), || dist.sample(&mut rng) * init_scale);
            Dense {
                weight,
                bias: Array1::zeros(fan_out),
            }
        })
        .collect();
    Ok(MlpModel { layers })
}

impl MlpModel {
    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].fan_in())
            .chain(self.layers.iter().map(Dense::fan_out))
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// Sum of squares of all weight matrices and biases, square-rooted.
    pub fn param_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    fn check_input(&self, x: &ArrayView2<'_, f64>) -> Result<()> {
        let expected = self.input_dim();
        if x.ncols() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: x.ncols(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Result<(Array2<f64>, ForwardCache)> {
        self.check_input(&x)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut a = x.to_owned();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = layer.apply(a.view());
            if l < last {
                z.mapv_inplace(|v| v.max(0.0));
            }
            inputs.push(a);
            a = z;
        }
        Ok((a, ForwardCache { inputs }))
    }

    pub fn zero_grad(&self) -> MlpGrad {
        MlpGrad {
            layers: self
                .layers
                .iter()
                .map(|l| Dense::zeros(l.fan_in(), l.fan_out()))
                .collect(),
        }
    }

    /// Backpropagates `dlogits` (gradient of the loss w.r.t. the logits).
    pub fn backward(&self, cache: &ForwardCache, dlogits: Array2<f64>) -> MlpGrad {
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut dz = dlogits;
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let a = &cache.inputs[l];
            let weight = a.t().dot(&dz);
            let bias = dz.sum_axis(Axis(0));
            grads.push(Dense { weight, bias });
            if l > 0 {
                let mut da = dz.dot(&layer.weight.t());
                // a is the rectified output of layer l-1
                Zip::from(&mut da).and(a).for_each(|g, &act| {
                    if act <= 0.0 {
                        *g = 0.0;
                    }
                });
                dz = da;
            }
        }
        grads.reverse();
        MlpGrad { layers: grads }
    }
}

impl Network for MlpModel {
    type Grad = MlpGrad;

    fn input_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    fn num_classes(&self) -> usize {
        self.layers.last().expect("non-empty").fan_out()
    }

    fn logits(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_input(&x)?;
        let mut a = self.layers[0].apply(x);
        for layer in &self.layers[1..] {
            a.mapv_inplace(|v| v.max(0.0));
            a = layer.apply(a.view());
        }
        Ok(a)
    }

    fn loss_and_grad(&self, x: ArrayView2<'_, f64>, labels: &[usize]) -> Result<(f64, MlpGrad)> {
        check_labels(labels, x.nrows(), self.num_classes())?;
        let (logits, cache) = self.forward(x)?;
        let (loss, dlogits) = softmax_cross_entropy(&logits, labels);
        Ok((loss, self.backward(&cache, dlogits)))
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| {
                [
                    l.weight.as_slice_mut().expect("standard layout"),
                    l.bias.as_slice_mut().expect("standard layout"),
                ]
            })
            .collect()
    }
}

pub(crate) fn check_labels(labels: &[usize], rows: usize, classes: usize) -> Result<()> {
    if labels.len() != rows {
        return Err(Error::DimensionMismatch {
            expected: rows,
            found: labels.len(),
        });
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
        return Err(Error::LabelOutOfRange { label: bad, classes });
    }
    Ok(())
}

/// Mean cross-entropy of softmax(logits) and its gradient w.r.t. the logits.
pub fn softmax_cross_entropy(logits: &Array2<f64>, labels: &[usize]) -> (f64, Array2<f64>) {
    let n = logits.nrows();
    let mut grad = logits.clone();
    let mut total = 0.0;
    for (mut row, &y) in grad.rows_mut().into_iter().zip(labels) {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let target = row[y] - max;
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        total += sum.ln() - target;
        row /= sum;
        row[y] -= 1.0;
    }
    if n == 0 {
        return (0.0, grad);
    }
    grad /= n as f64;
    (total / n as f64, grad)
}

/// Per-row cross-entropy and argmax prediction (ties go to the lowest class).
pub fn row_losses_and_predictions(logits: &Array2<f64>, labels: &[usize]) -> (Vec<f64>, Vec<usize>) {
    logits
        .rows()
        .into_iter()
        .zip(labels)
        .map(|(row, &y)| {
            let (mut arg, mut max) = (0, f64::NEG_INFINITY);
            for (k, &v) in row.iter().enumerate() {
                if v > max {
                    max = v;
                    arg = k;
                }
            }
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            (lse - row[y], arg)
        })
        .unzip()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn init_scaling_is_exact() {
        let base = init_model(&[5, 7, 3], 1.0, 42).unwrap();
        let big = init_model(&[5, 7, 3], 8.0, 42).unwrap();
        for (a, b) in base.layers.iter().zip(&big.layers) {
            assert_eq!(a.weight.mapv(|v| v * 8.0), b.weight);
            assert!(b.bias.iter().all(|&v| v == 0.0));
        }
        assert!((big.param_norm() / base.param_norm() - 8.0).abs() < 1e-12);
    }

    #[test]
    fn init_rejects_bad_widths() {
        assert!(init_model(&[], 1.0, 0).is_err());
        assert!(init_model(&[4], 1.0, 0).is_err());
        assert!(init_model(&[4, 0, 2], 1.0, 0).is_err());
        assert!(init_model(&[4, 2], 0.0, 0).is_err());
    }

    #[test]
    fn zero_model_gives_zero_logits() {
        let mut m = init_model(&[3, 4, 2], 1.0, 0).unwrap();
        for t in m.tensors_mut() {
            t.fill(0.0);
        }
        let x = array![[1.0, -2.0, 3.0], [0.5, 0.5, 0.5]];
        assert_eq!(m.logits(x.view()).unwrap(), Array2::<f64>::zeros((2, 2)));
    }

    #[test]
    fn identity_layer_reproduces_inputs() {
        let m = MlpModel {
            layers: vec![Dense {
                weight: Array2::eye(3),
                bias: Array1::zeros(3),
            }],
        };
        let x = array![[1.0, -2.0, 3.0], [0.25, 0.0, -7.5]];
        assert_eq!(m.logits(x.view()).unwrap(), x);
        let (fwd, _) = m.forward(x.view()).unwrap();
        assert_eq!(fwd, x);
    }

    #[test]
    fn dimension_and_label_errors() {
        let m = init_model(&[3, 2], 1.0, 0).unwrap();
        let x = Array2::zeros((2, 4));
        assert!(matches!(
            m.logits(x.view()),
            Err(Error::DimensionMismatch { expected: 3, found: 4 })
        ));
        let x = Array2::zeros((2, 3));
        assert!(matches!(
            m.loss_and_grad(x.view(), &[0, 2]),
            Err(Error::LabelOutOfRange { label: 2, classes: 2 })
        ));
    }

    #[test]
    fn uniform_logits_loss_is_log_c() {
        let logits = Array2::from_elem((3, 5), 0.7);
        let (loss, _) = softmax_cross_entropy(&logits, &[0, 3, 4]);
        assert!((loss - 5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn duplicated_batch_leaves_loss_and_grads_unchanged() {
        let m = init_model(&[4, 6, 3], 1.0, 9).unwrap();
        let x = array![[0.1, -0.4, 0.3, 1.0], [0.7, 0.2, -0.9, 0.0], [1.0, 1.0, -1.0, 0.5]];
        let y = [0, 2, 1];
        let (l1, g1) = m.loss_and_grad(x.view(), &y).unwrap();
        let x2 = ndarray::concatenate(Axis(0), &[x.view(), x.view()]).unwrap();
        let (l2, g2) = m.loss_and_grad(x2.view(), &[0, 2, 1, 0, 2, 1]).unwrap();
        assert!((l1 - l2).abs() < 1e-14);
        for (a, b) in g1.tensors().iter().zip(g2.tensors()) {
            for (u, v) in a.iter().zip(b) {
                assert!((u - v).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn argmax_ties_pick_lowest_class() {
        let logits = array![[1.0, 1.0, 0.0], [0.0, 2.0, 2.0]];
        let (_, pred) = row_losses_and_predictions(&logits, &[0, 0]);
        assert_eq!(pred, vec![0, 1]);
    }
}

//! Fully-connected ReLU network with an MSE head and hand-written backprop.

use rand::Rng;

use crate::error::{ensure_finite, Error, Result};
use crate::rng::{stream, Stream};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// An `n x 1` column.
    pub fn column(values: &[f64]) -> Self {
        Self {
            rows: values.len(),
            cols: 1,
            data: values.to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub inputs: Matrix,
    pub targets: Matrix,
}

impl Batch {
    pub fn new(inputs: Matrix, targets: Matrix) -> Result<Self> {
        if inputs.rows != targets.rows {
            return Err(Error::DimensionMismatch {
                expected: inputs.rows,
                actual: targets.rows,
            });
        }
        ensure_finite("batch inputs", &inputs.data)?;
        ensure_finite("batch targets", &targets.data)?;
        Ok(Self { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.rows
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.rows == 0
    }
}

/// Affine layer `y = W x + b` with `W` stored `outputs x inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn new(inputs: usize, outputs: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if inputs == 0 || outputs == 0 {
            return Err(Error::InvalidConfig("layer widths must be >= 1".into()));
        }
        crate::error::ensure_len(inputs * outputs, weights.len())?;
        crate::error::ensure_len(outputs, bias.len())?;
        Ok(Self {
            inputs,
            outputs,
            weights,
            bias,
        })
    }

    fn affine(&self, x: &Matrix) -> Matrix {
        let mut z = Matrix::zeros(x.rows, self.outputs);
        for r in 0..x.rows {
            let xr = x.row(r);
            let zr = z.row_mut(r);
            for (o, zo) in zr.iter_mut().enumerate() {
                let w = &self.weights[o * self.inputs..(o + 1) * self.inputs];
                *zo = self.bias[o] + w.iter().zip(xr).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        z
    }
}

#[derive(Debug, Clone, Default)]
struct Cache {
    /// Input to each layer.
    inputs: Vec<Matrix>,
    /// Pre-activation output of each layer.
    pre: Vec<Matrix>,
}

/// ReLU on every hidden layer, identity on the output.
#[derive(Debug, Clone)]
pub struct MlpModel {
    layers: Vec<Layer>,
    cache: Option<Cache>,
}

impl PartialEq for MlpModel {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

impl MlpModel {
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidConfig("model needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].outputs != pair[1].inputs {
                return Err(Error::DimensionMismatch {
                    expected: pair[0].outputs,
                    actual: pair[1].inputs,
                });
            }
        }
        Ok(Self { layers, cache: None })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn parameter_count(&self) -> usize {
        self.group_sizes().iter().sum()
    }

    /// Sizes of the parameter groups, ordered `[W0, b0, W1, b1, ...]`.
    pub fn group_sizes(&self) -> Vec<usize> {
        self.layers.iter().flat_map(|l| [l.weights.len(), l.bias.len()]).collect()
    }

    pub fn groups(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()]).collect()
    }

    pub fn groups_mut(&mut self) -> Vec<&mut [f64]> {
        self.cache = None;
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }

    /// Forward pass that keeps the activations for [`MlpModel::backward`].
    pub fn forward(&mut self, inputs: &Matrix) -> Result<Matrix> {
        let (out, cache) = self.run(inputs, true)?;
        self.cache = cache;
        Ok(out)
    }

    /// Forward pass without touching the cache.
    pub fn predict(&self, inputs: &Matrix) -> Result<Matrix> {
        Ok(self.run(inputs, false)?.0)
    }

    fn run(&self, inputs: &Matrix, keep: bool) -> Result<(Matrix, Option<Cache>)> {
        if inputs.cols != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: inputs.cols,
            });
        }
        let mut cache = keep.then(Cache::default);
        let mut x = inputs.clone();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let z = layer.affine(&x);
            let a = if i < last {
                let mut a = z.clone();
                a.data.iter_mut().for_each(|v| *v = v.max(0.0));
                a
            } else {
                z.clone()
            };
            if let Some(c) = cache.as_mut() {
                c.inputs.push(std::mem::replace(&mut x, a));
                c.pre.push(z);
            } else {
                x = a;
            }
        }
        Ok((x, cache))
    }

    /// Gradients of a loss with respect to every parameter group, given
    /// `dL/d(output)` for the batch of the last [`MlpModel::forward`] call.
    pub fn backward(&self, output_grad: &Matrix) -> Result<Vec<Vec<f64>>> {
        let cache = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("backward called without a cached forward pass".into()))?;
        let rows = cache.inputs[0].rows;
        if output_grad.rows != rows || output_grad.cols != self.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: rows * self.output_dim(),
                actual: output_grad.rows * output_grad.cols,
            });
        }

        let mut grads: Vec<Vec<f64>> = Vec::with_capacity(2 * self.layers.len());
        let mut delta = output_grad.clone();
        let last = self.layers.len() - 1;
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            if i < last {
                for (d, z) in delta.data.iter_mut().zip(&cache.pre[i].data) {
                    if *z <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let input = &cache.inputs[i];
            let mut dw = vec![0.0; layer.weights.len()];
            let mut db = vec![0.0; layer.outputs];
            let mut dx = (i > 0).then(|| Matrix::zeros(rows, layer.inputs));
            for r in 0..rows {
                let xr = input.row(r);
                let dr = delta.row(r);
                for (o, &dz) in dr.iter().enumerate() {
                    if dz == 0.0 {
                        continue;
                    }
                    db[o] += dz;
                    let dwo = &mut dw[o * layer.inputs..(o + 1) * layer.inputs];
                    for (g, x) in dwo.iter_mut().zip(xr) {
                        *g += dz * x;
                    }
                    if let Some(dx) = dx.as_mut() {
                        let w = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                        for (g, wv) in dx.row_mut(r).iter_mut().zip(w) {
                            *g += dz * wv;
                        }
                    }
                }
            }
            grads.push(db);
            grads.push(dw);
            if let Some(dx) = dx {
                delta = dx;
            }
        }
        grads.reverse();
        Ok(grads)
    }

    /// Mean squared error over all batch entries and its gradients, ordered
    /// like [`MlpModel::group_sizes`].
    pub fn mse_loss_and_grad(&mut self, batch: &Batch) -> Result<(f64, Vec<Vec<f64>>)> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        if batch.targets.cols != self.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.output_dim(),
                actual: batch.targets.cols,
            });
        }
        let pred = self.forward(&batch.inputs)?;
        let count = pred.data.len() as f64;
        let mut loss = 0.0;
        let mut dout = Matrix::zeros(pred.rows, pred.cols);
        for ((d, p), t) in dout.data.iter_mut().zip(&pred.data).zip(&batch.targets.data) {
            let err = p - t;
            loss += err * err;
            *d = 2.0 * err / count;
        }
        let grads = self.backward(&dout)?;
        Ok((loss / count, grads))
    }

    /// Loss only, without caching.
    pub fn mse_loss(&self, batch: &Batch) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let pred = self.predict(&batch.inputs)?;
        let sum: f64 = pred
            .data
            .iter()
            .zip(&batch.targets.data)
            .map(|(p, t)| (p - t) * (p - t))
            .sum();
        Ok(sum / pred.data.len() as f64)
    }
}

/// Uniform initialization in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` for weights
/// and biases of every layer. `sizes` lists the widths from input to output.
pub fn init_model(sizes: &[usize], seed: u64) -> Result<MlpModel> {
    if sizes.len() < 2 {
        return Err(Error::InvalidConfig("need an input and at least one layer".into()));
    }
    if sizes.contains(&0) {
        return Err(Error::InvalidConfig("zero-width layer".into()));
    }
    let mut rng = stream(seed, Stream::Init);
    let layers = sizes
        .windows(2)
        .map(|pair| {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let bound = init_bound(fan_in);
            let mut draw = || rng.random_range(-bound..=bound);
            let weights = (0..fan_in * fan_out).map(|_| draw()).collect();
            let bias = (0..fan_out).map(|_| draw()).collect();
            Layer::new(fan_in, fan_out, weights, bias)
        })
        .collect::<Result<Vec<_>>>()?;
    MlpModel::from_layers(layers)
}

pub fn init_bound(fan_in: usize) -> f64 {
    1.0 / (fan_in as f64).sqrt()
}

/// Widths of the regression network: scalar input, four hidden layers of 50
/// units, scalar output (five weight matrices).
pub const REGRESSION_SIZES: [usize; 6] = [1, 50, 50, 50, 50, 1];

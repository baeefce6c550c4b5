//! Dense feed-forward networks: initialization, forward pass, backprop with
//! Adam, and a versioned binary checkpoint format.
//!
//! Checkpoint layout (all integers and floats little-endian):
//!
//! ```text
//! magic       4 bytes  "TOWN"
//! version     u32      1
//! output      u8       0 = identity, 1 = softmax
//! n_sizes     u32
//! sizes       n_sizes x u32
//! per layer   weights (out x in, row-major f64) then biases (out x f64)
//! ```

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"TOWN";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutputActivation {
    Identity,
    /// Normalizes the output onto the probability simplex.
    Softmax,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub layer_sizes: Vec<usize>,
    pub output: OutputActivation,
}

impl MlpSpec {
    pub fn new(layer_sizes: Vec<usize>, output: OutputActivation) -> Self {
        Self { layer_sizes, output }
    }

    /// Input, two rectified hidden layers of equal width, output.
    pub fn three_layer(inputs: usize, hidden: usize, outputs: usize) -> Self {
        Self::new(vec![inputs, hidden, hidden, outputs], OutputActivation::Identity)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 || self.layer_sizes.contains(&0) {
            return Err(Error::InvalidConfig(format!(
                "bad layer sizes {:?}",
                self.layer_sizes
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major, `outputs x inputs`.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
        }
    }

    fn affine_into(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.weights.chunks_exact(self.inputs).zip(&self.biases).map(|(row, b)| {
            b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
        }));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    spec: MlpSpec,
    layers: Vec<Layer>,
}

/// Per-layer gradients, shaped like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

fn relu_inplace(v: &mut [f64]) {
    for x in v {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

fn softmax_inplace(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

impl Mlp {
    /// Uniform fan-in initialization: weights in `±sqrt(6 / fan_in)` for
    /// rectified layers and `±sqrt(3 / fan_in)` for the output layer; zero biases.
    pub fn init(spec: MlpSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = spec.layer_sizes.len() - 1;
        let layers = spec
            .layer_sizes
            .windows(2)
            .enumerate()
            .map(|(k, w)| {
                let mut layer = Layer::zeros(w[0], w[1]);
                let gain = if k + 1 == n { 3.0 } else { 6.0 };
                let limit = (gain / w[0] as f64).sqrt();
                for x in &mut layer.weights {
                    *x = rng.gen_range(-limit..limit);
                }
                layer
            })
            .collect();
        Ok(Self { spec, layers })
    }

    pub fn from_layers(spec: MlpSpec, layers: Vec<Layer>) -> Result<Self> {
        spec.validate()?;
        let ok = layers.len() + 1 == spec.layer_sizes.len()
            && layers.iter().zip(spec.layer_sizes.windows(2)).all(|(l, w)| {
                l.inputs == w[0]
                    && l.outputs == w[1]
                    && l.weights.len() == w[0] * w[1]
                    && l.biases.len() == w[1]
            });
        if !ok {
            return Err(Error::InvalidConfig("layer shapes disagree with spec".into()));
        }
        Ok(Self { spec, layers })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_size(&self) -> usize {
        self.spec.layer_sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.spec.layer_sizes.last().unwrap()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.biases).all(|v| v.is_finite()))
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_size() {
            return Err(Error::Shape {
                expected: self.input_size(),
                got: input.len(),
            });
        }
        let mut z = Vec::new();
        self.layers[0].affine_into(input, &mut z);
        Ok(self.finish_from_first(z))
    }

    /// First-layer pre-activation contribution of the leading `prefix`
    /// inputs, including the bias. Lets callers share the work for inputs
    /// that differ only in their tail.
    pub fn first_layer_partial(&self, prefix: &[f64]) -> Vec<f64> {
        let l = &self.layers[0];
        l.weights
            .chunks_exact(l.inputs)
            .zip(&l.biases)
            .map(|(row, b)| b + row.iter().zip(prefix).map(|(w, v)| w * v).sum::<f64>())
            .collect()
    }

    /// Equivalent to `forward(prefix ++ suffix)` given
    /// `partial = first_layer_partial(prefix)`.
    pub fn forward_with_partial(&self, partial: &[f64], suffix: &[f64]) -> Vec<f64> {
        let l = &self.layers[0];
        let offset = l.inputs - suffix.len();
        let z: Vec<f64> = l
            .weights
            .chunks_exact(l.inputs)
            .zip(partial)
            .map(|(row, p)| p + row[offset..].iter().zip(suffix).map(|(w, v)| w * v).sum::<f64>())
            .collect();
        self.finish_from_first(z)
    }

    fn finish_from_first(&self, mut z: Vec<f64>) -> Vec<f64> {
        let mut next = Vec::new();
        for layer in &self.layers[1..] {
            relu_inplace(&mut z);
            layer.affine_into(&z, &mut next);
            std::mem::swap(&mut z, &mut next);
        }
        if self.spec.output == OutputActivation::Softmax {
            softmax_inplace(&mut z);
        }
        z
    }

    /// Mean squared error over every output of every sample, and its gradient.
    pub fn loss_and_gradient<X: AsRef<[f64]>, Y: AsRef<[f64]>>(
        &self,
        inputs: &[X],
        targets: &[Y],
    ) -> Result<(f64, Gradients)> {
        if inputs.is_empty() {
            return Err(Error::Empty("training batch"));
        }
        if inputs.len() != targets.len() {
            return Err(Error::Shape {
                expected: inputs.len(),
                got: targets.len(),
            });
        }
        let out_n = self.output_size();
        let scale = 1.0 / (inputs.len() * out_n) as f64;
        let mut grads = Gradients {
            layers: self.layers.iter().map(|l| Layer::zeros(l.inputs, l.outputs)).collect(),
        };
        let mut loss = 0.0;
        // acts[k] is the input to layer k; pre-activations are kept for relu'.
        let mut acts: Vec<Vec<f64>> = vec![Vec::new(); self.layers.len() + 1];
        for (x, t) in inputs.iter().zip(targets) {
            let (x, t) = (x.as_ref(), t.as_ref());
            if x.len() != self.input_size() {
                return Err(Error::Shape { expected: self.input_size(), got: x.len() });
            }
            if t.len() != out_n {
                return Err(Error::Shape { expected: out_n, got: t.len() });
            }
            acts[0].clear();
            acts[0].extend_from_slice(x);
            for (k, layer) in self.layers.iter().enumerate() {
                let (head, tail) = acts.split_at_mut(k + 1);
                layer.affine_into(&head[k], &mut tail[0]);
                if k + 1 < self.layers.len() {
                    relu_inplace(&mut tail[0]);
                }
            }
            let out = acts.last_mut().unwrap();
            if self.spec.output == OutputActivation::Softmax {
                softmax_inplace(out);
            }
            let mut delta: Vec<f64> = out.iter().zip(t).map(|(y, t)| 2.0 * (y - t) * scale).collect();
            loss += out.iter().zip(t).map(|(y, t)| (y - t) * (y - t)).sum::<f64>() * scale;
            if self.spec.output == OutputActivation::Softmax {
                let dot: f64 = delta.iter().zip(out.iter()).map(|(d, s)| d * s).sum();
                for (d, s) in delta.iter_mut().zip(out.iter()) {
                    *d = s * (*d - dot);
                }
            }
            for k in (0..self.layers.len()).rev() {
                let layer = &self.layers[k];
                let g = &mut grads.layers[k];
                let input = &acts[k];
                for (o, d) in delta.iter().enumerate() {
                    g.biases[o] += d;
                    let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    for (gw, v) in row.iter_mut().zip(input) {
                        *gw += d * v;
                    }
                }
                if k == 0 {
                    break;
                }
                let mut back = vec![0.0; layer.inputs];
                for (o, d) in delta.iter().enumerate() {
                    let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    for (b, w) in back.iter_mut().zip(row) {
                        *b += d * w;
                    }
                }
                // relu'(pre) is 1 exactly where the stored activation is positive.
                for (b, a) in back.iter_mut().zip(input) {
                    if *a <= 0.0 {
                        *b = 0.0;
                    }
                }
                delta = back;
            }
        }
        Ok((loss, grads))
    }

    /// One Adam step on the mean squared error of the batch. Returns the
    /// loss before the update.
    pub fn train_step<X: AsRef<[f64]>, Y: AsRef<[f64]>>(
        &mut self,
        optimizer: &mut Adam,
        inputs: &[X],
        targets: &[Y],
    ) -> Result<f64> {
        let (loss, grads) = self.loss_and_gradient(inputs, targets)?;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss);
        }
        optimizer.apply(self, &grads);
        Ok(loss)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 8 * self.parameter_count());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.push(match self.spec.output {
            OutputActivation::Identity => 0,
            OutputActivation::Softmax => 1,
        });
        out.extend_from_slice(&(self.spec.layer_sizes.len() as u32).to_le_bytes());
        for &s in &self.spec.layer_sizes {
            out.extend_from_slice(&(s as u32).to_le_bytes());
        }
        for l in &self.layers {
            for v in l.weights.iter().chain(&l.biases) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Version { found: version, expected: CHECKPOINT_VERSION });
        }
        let output = match r.take(1)?[0] {
            0 => OutputActivation::Identity,
            1 => OutputActivation::Softmax,
            x => return Err(Error::Checkpoint(format!("unknown output activation {x}"))),
        };
        let n = r.u32()? as usize;
        if n > 64 {
            return Err(Error::Checkpoint(format!("implausible layer count {n}")));
        }
        let sizes = (0..n).map(|_| r.u32().map(|s| s as usize)).collect::<Result<Vec<_>>>()?;
        let spec = MlpSpec::new(sizes, output);
        spec.validate().map_err(|e| Error::Checkpoint(e.to_string()))?;
        let mut layers = Vec::new();
        for w in spec.layer_sizes.windows(2) {
            let mut l = Layer::zeros(w[0], w[1]);
            for v in l.weights.iter_mut().chain(l.biases.iter_mut()) {
                *v = r.f64()?;
            }
            layers.push(l);
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint("trailing bytes".into()));
        }
        Self::from_layers(spec, layers)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos + n;
        let slice = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| Error::Checkpoint("truncated".into()))?;
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    fn apply(&mut self, net: &mut Mlp, grads: &Gradients) {
        if self.m.is_empty() {
            for l in &net.layers {
                for len in [l.weights.len(), l.biases.len()] {
                    self.m.push(vec![0.0; len]);
                    self.v.push(vec![0.0; len]);
                }
            }
        }
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step as i32);
        let c2 = 1.0 - self.beta2.powi(self.step as i32);
        let params = net
            .layers
            .iter_mut()
            .zip(&grads.layers)
            .flat_map(|(l, g)| [(&mut l.weights, &g.weights), (&mut l.biases, &g.biases)]);
        for ((p, g), (m, v)) in params.zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let mhat = m[i] / c1;
                let vhat = v[i] / c2;
                p[i] -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
    }
}

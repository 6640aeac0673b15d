use std::io::{Read, Write};

use rand::Rng;

use crate::error::{Error, Result};

/// Fully connected network with a rectifier after every layer, including the
/// last. Parameters live in one flat vector: for each layer, the weight matrix
/// (row-major, `outputs x inputs`) followed by the bias vector.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpWeights {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Per-layer values recorded on the forward pass.
#[derive(Clone, Debug)]
pub struct ForwardTrace {
    /// `activations[0]` is the input, `activations[l + 1]` the output of layer `l`.
    pub activations: Vec<Vec<f64>>,
}

impl ForwardTrace {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("trace has an input")
    }
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl MlpWeights {
    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs at least one layer");
        Self {
            sizes: sizes.to_vec(),
            params: vec![0.0; param_count(sizes)],
        }
    }

    /// Weights uniform in `±sqrt(6 / (fan_in + fan_out))`, biases zero.
    pub fn init<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        Self::init_with_bias(sizes, 0.0, rng)
    }

    /// Glorot-uniform weights and every bias set to `bias`. A small positive
    /// bias keeps ReLU units active at the start of training.
    pub fn init_with_bias<R: Rng + ?Sized>(sizes: &[usize], bias: f64, rng: &mut R) -> Self {
        let mut w = Self::zeros(sizes);
        for l in 0..w.num_layers() {
            let (n_in, n_out) = (w.sizes[l], w.sizes[l + 1]);
            let limit = (6.0 / (n_in + n_out) as f64).sqrt();
            let off = w.layer_offset(l);
            for p in &mut w.params[off..off + n_in * n_out] {
                *p = rng.random_range(-limit..limit);
            }
            w.params[off + n_in * n_out..off + n_in * n_out + n_out].fill(bias);
        }
        w
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Result<Self> {
        let expected = param_count(sizes);
        if sizes.len() < 2 || params.len() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                got: params.len(),
            });
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            params,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_size(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    fn layer_offset(&self, layer: usize) -> usize {
        param_count(&self.sizes[..=layer])
    }

    /// `(weights, bias)` of one layer.
    pub fn layer(&self, layer: usize) -> (&[f64], &[f64]) {
        let (n_in, n_out) = (self.sizes[layer], self.sizes[layer + 1]);
        let off = self.layer_offset(layer);
        let (w, rest) = self.params[off..].split_at(n_in * n_out);
        (w, &rest[..n_out])
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_size() {
            return Err(Error::ShapeMismatch {
                expected: self.input_size(),
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut cur = x.to_vec();
        for l in 0..self.num_layers() {
            cur = self.layer_forward(l, &cur);
        }
        Ok(cur)
    }

    #[inline]
    fn layer_forward(&self, l: usize, x: &[f64]) -> Vec<f64> {
        let (w, b) = self.layer(l);
        let n_in = x.len();
        b.iter()
            .enumerate()
            .map(|(o, &bias)| {
                let row = &w[o * n_in..(o + 1) * n_in];
                let z = row.iter().zip(x).fold(bias, |acc, (wi, xi)| acc + wi * xi);
                z.max(0.0)
            })
            .collect()
    }

    pub fn forward_trace(&self, x: &[f64]) -> Result<ForwardTrace> {
        self.check_input(x)?;
        let mut activations = Vec::with_capacity(self.sizes.len());
        activations.push(x.to_vec());
        for l in 0..self.num_layers() {
            let next = self.layer_forward(l, &activations[l]);
            activations.push(next);
        }
        Ok(ForwardTrace { activations })
    }

    /// Reverse-mode pass. Accumulates `d loss / d params` into `grad` (same
    /// layout as the parameters, skipped if `None`) and returns `d loss / d input`.
    /// The rectifier's derivative at 0 is taken as 0.
    pub fn backward(
        &self,
        trace: &ForwardTrace,
        upstream: &[f64],
        mut grad: Option<&mut [f64]>,
    ) -> Result<Vec<f64>> {
        if upstream.len() != self.output_size() {
            return Err(Error::ShapeMismatch {
                expected: self.output_size(),
                got: upstream.len(),
            });
        }
        if let Some(g) = grad.as_deref() {
            if g.len() != self.params.len() {
                return Err(Error::ShapeMismatch {
                    expected: self.params.len(),
                    got: g.len(),
                });
            }
        }
        let mut delta = upstream.to_vec();
        for l in (0..self.num_layers()).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let out = &trace.activations[l + 1];
            let input = &trace.activations[l];
            // Through the rectifier: output > 0 iff pre-activation > 0.
            for (d, &y) in delta.iter_mut().zip(out) {
                if y <= 0.0 {
                    *d = 0.0;
                }
            }
            let off = self.layer_offset(l);
            if let Some(g) = grad.as_deref_mut() {
                let (gw, gb) = g[off..off + n_in * n_out + n_out].split_at_mut(n_in * n_out);
                for o in 0..n_out {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    gb[o] += d;
                    for (gwi, xi) in gw[o * n_in..(o + 1) * n_in].iter_mut().zip(input) {
                        *gwi += d * xi;
                    }
                }
            }
            let w = &self.params[off..off + n_in * n_out];
            let mut prev = vec![0.0; n_in];
            for o in 0..n_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                for (p, wi) in prev.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                    *p += d * wi;
                }
            }
            delta = prev;
        }
        Ok(delta)
    }

    /// Gradients of `upstream · f(x)` with respect to the parameters and the input.
    pub fn gradient(&self, x: &[f64], upstream: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let trace = self.forward_trace(x)?;
        let mut g = vec![0.0; self.params.len()];
        let dx = self.backward(&trace, upstream, Some(&mut g))?;
        Ok((g, dx))
    }

    /// FNV-1a over the parameter bits; used to check frozen weights.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        for p in &self.params {
            for b in p.to_bits().to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x100000001b3);
            }
        }
        h
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    /// Flat binary: magic `VBMLP\0\0\0`, version (u32), layer count + 1 (u32),
    /// each layer size (u32), then every parameter as little-endian f64 in
    /// storage order.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MLP_MAGIC)?;
        w.write_all(&MLP_VERSION.to_le_bytes())?;
        w.write_all(&(self.sizes.len() as u32).to_le_bytes())?;
        for &s in &self.sizes {
            w.write_all(&(s as u32).to_le_bytes())?;
        }
        for p in &self.params {
            w.write_all(&p.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MLP_MAGIC {
            return Err(Error::Format("not an MLP weight file".into()));
        }
        let version = read_u32(&mut r)?;
        if version != MLP_VERSION {
            return Err(Error::SchemaVersion {
                expected: MLP_VERSION,
                found: version,
            });
        }
        let n = read_u32(&mut r)? as usize;
        if !(2..=64).contains(&n) {
            return Err(Error::Format(format!("implausible layer count {n}")));
        }
        let sizes = (0..n)
            .map(|_| read_u32(&mut r).map(|v| v as usize))
            .collect::<Result<Vec<_>>>()?;
        let mut params = vec![0.0; param_count(&sizes)];
        let mut buf = [0u8; 8];
        for p in &mut params {
            r.read_exact(&mut buf)?;
            *p = f64::from_le_bytes(buf);
        }
        Self::from_params(&sizes, params)
    }
}

const MLP_MAGIC: &[u8; 8] = b"VBMLP\0\0\0";
const MLP_VERSION: u32 = 1;

pub(crate) fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

//! Feed-forward encoder mapping feature vectors into the embedding space.
//!
//! Hidden layers are `relu(W x + b)`; the last layer is affine only. Weights
//! are stored row-major as `fan_out × fan_in`. The rectifier derivative at 0
//! is taken to be 0.
//!
//! Model files are a JSON object
//! `{"version":1,"layer_dims":[...],"weights":[[...]...],"biases":[[...]...]}`
//! with every number written with 17 significant digits.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::rng;

pub const MODEL_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    layer_dims: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

/// Activations kept from a forward pass for use in [`EncoderParams::backward`].
#[derive(Debug, Clone)]
pub struct Trace {
    /// `inputs[l]` is the input to layer `l`; the last entry is the output.
    inputs: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.inputs.last().expect("trace always holds the input")
    }
}

/// Gradients with the same layout as [`EncoderParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub input: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(params: &EncoderParams) -> Self {
        Gradients {
            weights: params.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: params.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
            input: vec![0.0; params.d_in()],
        }
    }

    /// `self += other` over weights and biases.
    pub fn accumulate(&mut self, other: &Gradients) {
        for (s, o) in self.weights.iter_mut().zip(&other.weights) {
            s.iter_mut().zip(o).for_each(|(x, y)| *x += y);
        }
        for (s, o) in self.biases.iter_mut().zip(&other.biases) {
            s.iter_mut().zip(o).for_each(|(x, y)| *x += y);
        }
    }

    pub fn scale(&mut self, k: f64) {
        for v in self.weights.iter_mut().chain(self.biases.iter_mut()) {
            v.iter_mut().for_each(|x| *x *= k);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.weights
            .iter()
            .chain(&self.biases)
            .all(|v| v.iter().all(|x| x.is_finite()))
    }
}

fn check_dims(layer_dims: &[usize]) -> Result<()> {
    if layer_dims.len() < 2 {
        return Err(Error::Config(
            "encoder needs at least an input and an output dimension".into(),
        ));
    }
    if layer_dims.contains(&0) {
        return Err(Error::Config("encoder dimensions must be positive".into()));
    }
    Ok(())
}

impl EncoderParams {
    /// He-normal weights (std `sqrt(2 / fan_in)`), zero biases.
    pub fn init(layer_dims: &[usize], seed: u64) -> Result<Self> {
        check_dims(layer_dims)?;
        let mut rng = rng::seeded(seed);
        let mut weights = Vec::with_capacity(layer_dims.len() - 1);
        let mut biases = Vec::with_capacity(layer_dims.len() - 1);
        for pair in layer_dims.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let std = (2.0 / fan_in as f64).sqrt();
            let w: Vec<f64> = (0..fan_in * fan_out)
                .map(|_| std * rng.sample::<f64, _>(StandardNormal))
                .collect();
            weights.push(w);
            biases.push(vec![0.0; fan_out]);
        }
        Ok(EncoderParams {
            layer_dims: layer_dims.to_vec(),
            weights,
            biases,
        })
    }

    /// Builds parameters from explicit matrices, checking that shapes chain.
    pub fn from_parts(
        layer_dims: Vec<usize>,
        weights: Vec<Vec<f64>>,
        biases: Vec<Vec<f64>>,
    ) -> Result<Self> {
        check_dims(&layer_dims)?;
        let layers = layer_dims.len() - 1;
        if weights.len() != layers || biases.len() != layers {
            return Err(Error::ModelFormat(format!(
                "expected {layers} layers, found {} weight and {} bias arrays",
                weights.len(),
                biases.len()
            )));
        }
        for (l, pair) in layer_dims.windows(2).enumerate() {
            if weights[l].len() != pair[0] * pair[1] {
                return Err(Error::ModelFormat(format!(
                    "layer {l}: expected {}x{} weights, found {}",
                    pair[1],
                    pair[0],
                    weights[l].len()
                )));
            }
            if biases[l].len() != pair[1] {
                return Err(Error::ModelFormat(format!(
                    "layer {l}: expected {} biases, found {}",
                    pair[1],
                    biases[l].len()
                )));
            }
        }
        if !weights
            .iter()
            .chain(&biases)
            .all(|v| v.iter().all(|x| x.is_finite()))
        {
            return Err(Error::ModelFormat("non-finite parameter".into()));
        }
        Ok(EncoderParams {
            layer_dims,
            weights,
            biases,
        })
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub fn d_in(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn d_out(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_trace(x)?.inputs.pop().unwrap())
    }

    pub fn forward_trace(&self, x: &[f64]) -> Result<Trace> {
        if x.len() != self.d_in() {
            return Err(Error::Shape {
                expected: self.d_in(),
                found: x.len(),
            });
        }
        let last = self.num_layers() - 1;
        let mut inputs = Vec::with_capacity(self.num_layers() + 1);
        inputs.push(x.to_vec());
        for l in 0..self.num_layers() {
            let (fan_in, fan_out) = (self.layer_dims[l], self.layer_dims[l + 1]);
            let input = &inputs[l];
            let w = &self.weights[l];
            let mut out = self.biases[l].clone();
            for (o, row) in out.iter_mut().zip(w.chunks_exact(fan_in)) {
                *o += row.iter().zip(input).map(|(a, b)| a * b).sum::<f64>();
            }
            if l != last {
                out.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            debug_assert_eq!(out.len(), fan_out);
            inputs.push(out);
        }
        Ok(Trace { inputs })
    }

    /// Gradients of `<grad_phi, forward(x)>` given the trace of `forward(x)`.
    pub fn backward(&self, trace: &Trace, grad_phi: &[f64]) -> Result<Gradients> {
        if grad_phi.len() != self.d_out() {
            return Err(Error::Shape {
                expected: self.d_out(),
                found: grad_phi.len(),
            });
        }
        if trace.inputs.len() != self.num_layers() + 1 || trace.inputs[0].len() != self.d_in() {
            return Err(Error::Input("trace does not belong to this encoder".into()));
        }
        let mut grads = Gradients::zeros_like(self);
        self.backward_into(trace, grad_phi, &mut grads);
        Ok(grads)
    }

    /// Adds the parameter gradients of `<grad_phi, forward(x)>` into `grads`
    /// and overwrites `grads.input`.
    pub(crate) fn backward_into(&self, trace: &Trace, grad_phi: &[f64], grads: &mut Gradients) {
        let mut delta = grad_phi.to_vec();
        for l in (0..self.num_layers()).rev() {
            let fan_in = self.layer_dims[l];
            let input = &trace.inputs[l];
            let output = &trace.inputs[l + 1];
            if l != self.num_layers() - 1 {
                // Post-activation is 0 exactly where the rectifier was off (or at 0).
                for (d, o) in delta.iter_mut().zip(output) {
                    if *o <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let gw = &mut grads.weights[l];
            for (j, d) in delta.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                let row = &mut gw[j * fan_in..(j + 1) * fan_in];
                row.iter_mut().zip(input).for_each(|(g, x)| *g += d * x);
            }
            grads.biases[l]
                .iter_mut()
                .zip(&delta)
                .for_each(|(g, d)| *g += d);
            let w = &self.weights[l];
            let mut next = vec![0.0; fan_in];
            for (j, d) in delta.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                let row = &w[j * fan_in..(j + 1) * fan_in];
                next.iter_mut().zip(row).for_each(|(n, w)| *n += d * w);
            }
            delta = next;
        }
        grads.input = delta;
    }

    /// `θ ← θ − lr · g`.
    pub fn apply_update(&mut self, grads: &Gradients, lr: f64) {
        for (p, g) in self.weights.iter_mut().zip(&grads.weights) {
            p.iter_mut().zip(g).for_each(|(p, g)| *p -= lr * g);
        }
        for (p, g) in self.biases.iter_mut().zip(&grads.biases) {
            p.iter_mut().zip(g).for_each(|(p, g)| *p -= lr * g);
        }
    }

    pub fn to_json(&self) -> String {
        fn num(out: &mut String, x: f64) {
            // 17 significant digits round-trip every f64.
            write!(out, "{x:.16e}").unwrap();
        }
        fn array(out: &mut String, v: &[f64]) {
            out.push('[');
            for (i, x) in v.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                num(out, *x);
            }
            out.push(']');
        }
        fn nested(out: &mut String, vs: &[Vec<f64>]) {
            out.push('[');
            for (i, v) in vs.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                array(out, v);
            }
            out.push(']');
        }
        let mut out = String::new();
        write!(out, "{{\"version\":{MODEL_VERSION},\"layer_dims\":[").unwrap();
        for (i, d) in self.layer_dims.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            write!(out, "{d}").unwrap();
        }
        out.push_str("],\"weights\":");
        nested(&mut out, &self.weights);
        out.push_str(",\"biases\":");
        nested(&mut out, &self.biases);
        out.push_str("}\n");
        out
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            version: Option<u64>,
        }
        #[derive(Deserialize)]
        struct ModelFile {
            layer_dims: Vec<usize>,
            weights: Vec<Vec<f64>>,
            biases: Vec<Vec<f64>>,
        }
        let header: Header = serde_json::from_str(text)
            .map_err(|e| Error::ModelFormat(format!("unreadable model file: {e}")))?;
        match header.version {
            None => return Err(Error::ModelFormat("missing version".into())),
            Some(v) if v > MODEL_VERSION => {
                return Err(Error::ModelVersion {
                    found: v,
                    supported: MODEL_VERSION,
                })
            }
            Some(MODEL_VERSION) => {}
            Some(v) => return Err(Error::ModelFormat(format!("unknown version {v}"))),
        }
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| Error::ModelFormat(e.to_string()))?;
        Self::from_parts(file.layer_dims, file.weights, file.biases)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

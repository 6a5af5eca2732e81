use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layer::{Layer, LayerSpec};
use super::tensor::Tensor4;
use crate::error::{Error, Result};

static NEXT_MODEL_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_id() -> u64 {
    NEXT_MODEL_ID.fetch_add(1, Ordering::Relaxed)
}

/// Input shape plus ordered layer list; enough to rebuild a model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    /// `[channels, height, width]` of one sample.
    pub input: [usize; 3],
    pub layers: Vec<LayerSpec>,
}

/// Feed-forward network with all parameters in one flat vector, laid out
/// layer by layer (weights, then biases).
#[derive(Debug)]
pub struct Model {
    arch: Architecture,
    layers: Vec<Layer>,
    params: Vec<f64>,
    init_seed: u64,
    id: u64,
    revision: u64,
}

impl Clone for Model {
    fn clone(&self) -> Self {
        Model {
            arch: self.arch.clone(),
            layers: self.layers.clone(),
            params: self.params.clone(),
            init_seed: self.init_seed,
            id: fresh_id(),
            revision: 0,
        }
    }
}

impl PartialEq for Model {
    fn eq(&self, other: &Self) -> bool {
        self.arch == other.arch && self.init_seed == other.init_seed && self.params == other.params
    }
}

/// Activations recorded by [`Model::forward`]: entry `i` is the input of
/// layer `i`, the last entry is the network output.
#[derive(Debug, Clone)]
pub struct Tape {
    model_id: u64,
    revision: u64,
    activations: Vec<Tensor4>,
}

impl Tape {
    pub fn output(&self) -> &Tensor4 {
        self.activations.last().expect("tape holds the input at least")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    /// Congruent with [`Model::params`], summed over the batch.
    pub params: Vec<f64>,
    pub input: Tensor4,
}

fn resolve(arch: &Architecture) -> Result<(Vec<Layer>, usize)> {
    if arch.input.contains(&0) {
        return Err(Error::InvalidSpec(format!("empty input shape {:?}", arch.input)));
    }
    let mut shape = arch.input;
    let mut offset = 0;
    let mut layers = Vec::with_capacity(arch.layers.len());
    for spec in &arch.layers {
        let layer = Layer::resolve(spec.clone(), shape, offset)?;
        shape = layer.out_shape;
        offset += layer.n_params();
        layers.push(layer);
    }
    Ok((layers, offset))
}

impl Model {
    /// Xavier-uniform weights drawn from a ChaCha stream seeded with
    /// `init_seed`; zero biases.
    pub fn new(arch: Architecture, init_seed: u64) -> Result<Self> {
        let (layers, n) = resolve(&arch)?;
        let mut rng = ChaCha8Rng::seed_from_u64(init_seed);
        let mut params = vec![0.0; n];
        for l in &layers {
            let (fan_in, fan_out) = l.fans();
            if l.n_weight == 0 {
                continue;
            }
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for w in &mut params[l.offset..l.offset + l.n_weight] {
                *w = rng.gen_range(-limit..limit);
            }
        }
        Ok(Model {
            arch,
            layers,
            params,
            init_seed,
            id: fresh_id(),
            revision: 0,
        })
    }

    /// Rebuilds a model from stored parameters.
    pub fn from_parts(arch: Architecture, init_seed: u64, params: Vec<f64>) -> Result<Self> {
        let (layers, n) = resolve(&arch)?;
        if params.len() != n {
            return Err(Error::Dimension(format!(
                "architecture needs {n} parameters, got {}",
                params.len()
            )));
        }
        Ok(Model {
            arch,
            layers,
            params,
            init_seed,
            id: fresh_id(),
            revision: 0,
        })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn init_seed(&self) -> u64 {
        self.init_seed
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn input_shape(&self) -> [usize; 3] {
        self.arch.input
    }

    pub fn output_shape(&self) -> [usize; 3] {
        self.layers.last().map_or(self.arch.input, |l| l.out_shape)
    }

    /// Replaces every parameter; invalidates outstanding tapes.
    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::Dimension(format!(
                "model has {} parameters, got {}",
                self.params.len(),
                params.len()
            )));
        }
        self.params.copy_from_slice(params);
        self.revision += 1;
        Ok(())
    }

    /// Mutable `(weights, biases)` of layer `index`; invalidates outstanding
    /// tapes.
    pub fn layer_params_mut(&mut self, index: usize) -> Result<(&mut [f64], &mut [f64])> {
        let l = self
            .layers
            .get(index)
            .ok_or_else(|| Error::Dimension(format!("no layer {index}")))?;
        self.revision += 1;
        let (o, nw, nb) = (l.offset, l.n_weight, l.n_bias);
        Ok(self.params[o..o + nw + nb].split_at_mut(nw))
    }

    pub(crate) fn params_mut(&mut self) -> &mut [f64] {
        self.revision += 1;
        &mut self.params
    }

    fn check_input(&self, x: &Tensor4) -> Result<()> {
        let [_, c, h, w] = x.shape();
        if [c, h, w] != self.arch.input {
            return Err(Error::Dimension(format!(
                "model expects samples of shape {:?}, got {:?}",
                self.arch.input,
                [c, h, w]
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: &Tensor4) -> Result<(Tensor4, Tape)> {
        self.check_input(x)?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.clone());
        for l in &self.layers {
            let y = l.forward(&self.params, activations.last().expect("non-empty"))?;
            activations.push(y);
        }
        let tape = Tape {
            model_id: self.id,
            revision: self.revision,
            activations,
        };
        Ok((tape.output().clone(), tape))
    }

    /// Forward pass without recording a tape.
    pub fn infer(&self, x: &Tensor4) -> Result<Tensor4> {
        self.check_input(x)?;
        let mut cur = x.clone();
        for l in &self.layers {
            cur = l.forward(&self.params, &cur)?;
        }
        Ok(cur)
    }

    pub fn backward(&self, tape: &Tape, output_grad: &Tensor4) -> Result<Gradients> {
        if tape.model_id != self.id || tape.revision != self.revision {
            return Err(Error::InvalidState(
                "tape was recorded by another model or before a parameter update".into(),
            ));
        }
        if output_grad.shape() != tape.output().shape() {
            return Err(Error::Dimension(format!(
                "output gradient {:?} does not match output {:?}",
                output_grad.shape(),
                tape.output().shape()
            )));
        }
        let mut dparams = vec![0.0; self.params.len()];
        let mut grad = output_grad.clone();
        for (i, l) in self.layers.iter().enumerate().rev() {
            grad = l.backward(
                &self.params,
                &tape.activations[i],
                &tape.activations[i + 1],
                &grad,
                &mut dparams,
            )?;
        }
        Ok(Gradients {
            params: dparams,
            input: grad,
        })
    }
}

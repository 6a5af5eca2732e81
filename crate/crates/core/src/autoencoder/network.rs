use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Grid;
use crate::neural::{Activation, Architecture, LayerSpec};

/// Shape of the convolutional encoder/decoder pair.
///
/// The encoder is one stride-2 convolution per entry of `channels`, then a
/// dense map to the latent. The decoder mirrors it with transposed
/// convolutions, the last of which emits the output channels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub channels: Vec<usize>,
    pub kernel: usize,
    pub activation: Activation,
    pub latent_activation: Activation,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            channels: vec![8, 16, 32],
            kernel: 3,
            activation: Activation::Identity,
            latent_activation: Activation::Identity,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.channels.is_empty() || self.channels.contains(&0) {
            return Err(Error::InvalidSpec(format!(
                "network channels must be non-empty and positive, got {:?}",
                self.channels
            )));
        }
        if self.kernel == 0 || self.kernel % 2 == 0 {
            return Err(Error::InvalidSpec(format!(
                "kernel must be odd, got {}",
                self.kernel
            )));
        }
        Ok(())
    }

    /// Spatial size after each downsampling, starting with the grid itself.
    fn pyramid(&self, grid: &Grid) -> Vec<(usize, usize)> {
        let mut sizes = vec![(grid.ny, grid.nx)];
        for _ in &self.channels {
            let (h, w) = *sizes.last().expect("non-empty");
            sizes.push((h.div_ceil(2), w.div_ceil(2)));
        }
        sizes
    }

    pub fn encoder(&self, in_ch: usize, grid: &Grid, latent_dim: usize) -> Result<Architecture> {
        self.validate()?;
        if latent_dim == 0 {
            return Err(Error::InvalidSpec("latent_dim must be positive".into()));
        }
        let mut layers = Vec::new();
        for &c in &self.channels {
            layers.push(LayerSpec::conv(c, self.kernel, 2));
            layers.push(LayerSpec::act(self.activation));
        }
        layers.push(LayerSpec::Flatten);
        layers.push(LayerSpec::dense(latent_dim));
        if self.latent_activation != Activation::Identity {
            layers.push(LayerSpec::act(self.latent_activation));
        }
        Ok(Architecture {
            input: [in_ch, grid.ny, grid.nx],
            layers,
        })
    }

    pub fn decoder(&self, in_dim: usize, out_ch: usize, grid: &Grid) -> Result<Architecture> {
        self.validate()?;
        let sizes = self.pyramid(grid);
        let depth = self.channels.len();
        let (h, w) = sizes[depth];
        let top = self.channels[depth - 1];
        let mut layers = vec![
            LayerSpec::Flatten,
            LayerSpec::dense(top * h * w),
            LayerSpec::act(self.activation),
            LayerSpec::Reshape { dims: [top, h, w] },
        ];
        for level in (0..depth).rev() {
            let (th, tw) = sizes[level];
            let out = if level == 0 { out_ch } else { self.channels[level - 1] };
            let spec = LayerSpec::transposed_for(out, self.kernel, 2, th);
            if spec != LayerSpec::transposed_for(out, self.kernel, 2, tw) {
                return Err(Error::InvalidSpec(format!(
                    "grid {}x{} halves to sizes of different parity; use matching nx and ny parities",
                    grid.nx, grid.ny
                )));
            }
            layers.push(spec);
            if level > 0 {
                layers.push(LayerSpec::act(self.activation));
            }
        }
        Ok(Architecture {
            input: [in_dim, 1, 1],
            layers,
        })
    }
}

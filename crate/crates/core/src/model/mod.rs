//! The split CNN: construction, division and composition at a level, and
//! activation-map extraction from the lower part.

mod arch;
mod dump;

use rand_distr::{Distribution, Normal};

pub use arch::{ArchSpec, Level, PlannedLayer, SplitLevel};
pub use dump::{read_activation_dump, write_activation_dump};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::nn::{self, ForwardCache, LayerParams};
use crate::parallel;
use crate::seed::rng;
use crate::tensor::Tensor;

/// Samples per forward call during extraction and evaluation.
pub(crate) const INFER_CHUNK: usize = 250;

#[derive(Clone, Debug, PartialEq)]
pub struct ModelWeights {
    arch: ArchSpec,
    layers: Vec<LayerParams>,
    group_boundaries: [usize; 3],
}

impl ModelWeights {
    /// He-initialized weights (normal, std `sqrt(2 / fan_in)`), zero biases.
    pub fn build(arch: &ArchSpec, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut r = rng(seed);
        let layers = arch
            .layer_plan()
            .into_iter()
            .map(|pl| {
                let mut p = LayerParams::zeros(pl.kind, pl.in_dim, pl.out_dim);
                let fan_in = p.weights.len() / pl.out_dim;
                let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt())
                    .expect("positive standard deviation");
                for w in p.weights.data_mut() {
                    *w = normal.sample(&mut r);
                }
                p
            })
            .collect();
        Ok(ModelWeights {
            arch: arch.clone(),
            layers,
            group_boundaries: arch.group_boundaries(),
        })
    }

    /// Checks `layers` against the plan of `arch`.
    pub fn from_layers(arch: &ArchSpec, layers: Vec<LayerParams>) -> Result<Self> {
        arch.validate()?;
        check_layers(arch, 0, &layers)?;
        if layers.len() != arch.layer_count() {
            return Err(Error::Composition(format!(
                "{} layers given, architecture has {}",
                layers.len(),
                arch.layer_count()
            )));
        }
        Ok(ModelWeights {
            arch: arch.clone(),
            layers,
            group_boundaries: arch.group_boundaries(),
        })
    }

    pub fn arch(&self) -> &ArchSpec {
        &self.arch
    }

    pub fn layers(&self) -> &[LayerParams] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [LayerParams] {
        &mut self.layers
    }

    pub fn group_boundaries(&self) -> [usize; 3] {
        self.group_boundaries
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(LayerParams::param_count).sum()
    }

    pub fn lower_layers(&self, j: SplitLevel) -> &[LayerParams] {
        &self.layers[..self.group_boundaries[j.group()]]
    }

    pub fn upper_layers(&self, j: SplitLevel) -> &[LayerParams] {
        &self.layers[self.group_boundaries[j.group()]..]
    }

    /// Runs the layers between two levels. The batch must have the declared
    /// shape of `from`.
    pub fn forward(&self, batch: &Tensor, from: Level, to: Level) -> Result<(Tensor, ForwardCache)> {
        let range = self.level_range(batch, from, to)?;
        nn::forward(&self.layers[range], batch)
    }

    /// [`ModelWeights::forward`] without a backward cache.
    pub fn infer(&self, batch: &Tensor, from: Level, to: Level) -> Result<Tensor> {
        let range = self.level_range(batch, from, to)?;
        nn::infer(&self.layers[range], batch)
    }

    fn level_range(&self, batch: &Tensor, from: Level, to: Level) -> Result<std::ops::Range<usize>> {
        if from >= to {
            return Err(Error::config(format!(
                "forward from {from:?} to {to:?}: start must precede end"
            )));
        }
        let expected = self.arch.level_shape(from);
        if batch.shape().len() != expected.len() + 1 || batch.sample_shape() != expected.as_slice() {
            return Err(Error::dim(format!(
                "batch shape {:?} does not match {expected:?} expected at {from:?}",
                batch.shape()
            )));
        }
        Ok(self.arch.boundary(from)..self.arch.boundary(to))
    }

    pub fn split(&self, j: SplitLevel) -> SplitWeights {
        SplitWeights {
            arch: self.arch.clone(),
            level: j,
            lower: self.lower_layers(j).to_vec(),
            upper: self.upper_layers(j).to_vec(),
        }
    }

    pub fn bitwise_eq(&self, other: &ModelWeights) -> bool {
        self.arch == other.arch
            && self.layers.len() == other.layers.len()
            && self.layers.iter().zip(&other.layers).all(|(a, b)| a.bitwise_eq(b))
    }
}

fn check_layers(arch: &ArchSpec, offset: usize, layers: &[LayerParams]) -> Result<()> {
    let plan = arch.layer_plan();
    if offset + layers.len() > plan.len() {
        return Err(Error::Composition(format!(
            "{} layers starting at {offset} exceed the architecture's {}",
            layers.len(),
            plan.len()
        )));
    }
    for (i, (p, pl)) in layers.iter().zip(&plan[offset..]).enumerate() {
        p.validate()?;
        if p.kind != pl.kind || p.in_dim() != pl.in_dim || p.out_dim() != pl.out_dim {
            return Err(Error::Composition(format!(
                "layer {} is {:?} {}→{}, architecture expects {:?} {}→{}",
                offset + i,
                p.kind,
                p.in_dim(),
                p.out_dim(),
                pl.kind,
                pl.in_dim,
                pl.out_dim
            )));
        }
    }
    Ok(())
}

/// A model divided at level `j` into lower layers (input up to `j`) and
/// upper layers (`j` to output).
#[derive(Clone, Debug, PartialEq)]
pub struct SplitWeights {
    pub arch: ArchSpec,
    pub level: SplitLevel,
    pub lower: Vec<LayerParams>,
    pub upper: Vec<LayerParams>,
}

impl SplitWeights {
    pub fn compose(&self) -> Result<ModelWeights> {
        compose_weights(&self.arch, &self.lower, &self.upper, self.level)
    }
}

/// Joins a lower and an upper part cut at `j` from the same architecture.
pub fn compose_weights(
    arch: &ArchSpec,
    lower: &[LayerParams],
    upper: &[LayerParams],
    j: SplitLevel,
) -> Result<ModelWeights> {
    let cut = arch.boundary(j.into());
    if lower.len() != cut || upper.len() != arch.layer_count() - cut {
        return Err(Error::Composition(format!(
            "parts of {} and {} layers do not form a split at {j}",
            lower.len(),
            upper.len()
        )));
    }
    check_layers(arch, 0, lower)?;
    check_layers(arch, cut, upper)?;
    let mut layers = Vec::with_capacity(arch.layer_count());
    layers.extend_from_slice(lower);
    layers.extend_from_slice(upper);
    Ok(ModelWeights {
        arch: arch.clone(),
        layers,
        group_boundaries: arch.group_boundaries(),
    })
}

/// Activation maps of a set of samples at one level, with their labels.
#[derive(Clone, Debug, PartialEq)]
pub struct ActivationMaps {
    /// `n × c × h × w`.
    pub maps: Tensor,
    pub labels: Vec<usize>,
    pub level: SplitLevel,
}

impl ActivationMaps {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Feeds every sample of `data` through the lower layers and pairs each
/// resulting map with its label. Weights are only read.
pub fn extract_activations(
    arch: &ArchSpec,
    lower: &[LayerParams],
    j: SplitLevel,
    data: &LabeledDataset,
) -> Result<ActivationMaps> {
    check_layers(arch, 0, lower)?;
    if lower.len() != arch.boundary(j.into()) {
        return Err(Error::Composition(format!(
            "{} lower layers do not end at {j}",
            lower.len()
        )));
    }
    let input = arch.level_shape(Level::Input);
    if data.images.sample_shape() != input.as_slice() {
        return Err(Error::dim(format!(
            "dataset samples have shape {:?}, architecture expects {input:?}",
            data.images.sample_shape()
        )));
    }
    let maps = infer_chunked(lower, &data.images)?;
    Ok(ActivationMaps {
        maps,
        labels: data.labels.clone(),
        level: j,
    })
}

/// Batched inference in fixed-size chunks, concatenated in sample order.
pub(crate) fn infer_chunked(layers: &[LayerParams], inputs: &Tensor) -> Result<Tensor> {
    if inputs.batch() == 0 {
        let mut shape = vec![0];
        shape.extend(nn::output_shape(layers, inputs.sample_shape())?);
        return Ok(Tensor::zeros(&shape));
    }
    let parts = parallel::map_chunks(inputs.batch(), INFER_CHUNK, |r| {
        nn::infer(layers, &inputs.slice_batch(r))
    });
    let parts = parts.into_iter().collect::<Result<Vec<_>>>()?;
    Tensor::concat(&parts)
}

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use super::augment::{augment_only, canonicalize, AugmentationSpec};
use super::model::{to_tensor, EmbedderModel};
use super::net::{init_parameters, loss_and_gradient, pack_batch, Adam, Architecture};
use super::EmbedderError;
use crate::raster::RasterImage;
use crate::rng::{stream, Domain};
use crate::sampler::Candidate;

pub const MIN_TRAINING_PATCHES: usize = 32;

/// Samples per gradient work unit. The batch gradient is the in-order sum of
/// these partial gradients, so it never depends on the number of threads.
const GRAD_CHUNK: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    #[serde(skip)]
    pub arch: Architecture,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 64,
            learning_rate: 1e-4,
            arch: Architecture::default(),
        }
    }
}

/// Loss trace of one training run (mean squared error, `[0, 1]` units).
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TrainingLog {
    /// Loss of the first batch before any update.
    pub initial_loss: f64,
    pub epoch_losses: Vec<f64>,
}

impl TrainingLog {
    pub fn final_loss(&self) -> f64 {
        self.epoch_losses.last().copied().unwrap_or(self.initial_loss)
    }
}

pub fn train_autoencoder(
    candidates: &[Candidate],
    spec: &AugmentationSpec,
    hyper: &TrainConfig,
    seed: u64,
) -> Result<EmbedderModel, EmbedderError> {
    let patches: Vec<&RasterImage> = candidates.iter().map(|c| &c.patch).collect();
    train_on_patches(&patches, spec, hyper, seed).map(|(m, _)| m)
}

/// Trains the augmented autoencoder: inputs are augmented patches, targets
/// the canonicalized originals, loss the mean squared error.
///
/// Deterministic in `seed`: batch order, augmentation draws and initial
/// weights all come from counter-based streams.
pub fn train_on_patches(
    patches: &[&RasterImage],
    spec: &AugmentationSpec,
    hyper: &TrainConfig,
    seed: u64,
) -> Result<(EmbedderModel, TrainingLog), EmbedderError> {
    if patches.len() < MIN_TRAINING_PATCHES {
        return Err(EmbedderError::TooFewCandidates {
            got: patches.len(),
            need: MIN_TRAINING_PATCHES,
        });
    }
    spec.validate().map_err(EmbedderError::InvalidConfig)?;
    let arch = hyper.arch;
    arch.validate().map_err(EmbedderError::InvalidConfig)?;
    if hyper.batch_size == 0 || !(hyper.learning_rate > 0.0) {
        return Err(EmbedderError::InvalidConfig(
            "batch size and learning rate must be positive".into(),
        ));
    }

    let size = arch.canonical_size;
    let sample_len = arch.sample_len();
    let targets: Vec<Vec<f32>> = patches
        .par_iter()
        .map(|p| to_tensor(&canonicalize(p, size)))
        .collect();
    let identity = *spec == AugmentationSpec::identity();

    let mut params: Vec<f32> = init_parameters(&arch, seed);
    let mut adam = Adam::new(params.len(), hyper.learning_rate);
    let mut log = TrainingLog::default();
    let n = patches.len();

    for epoch in 0..hyper.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut stream(seed, Domain::Shuffle, epoch as u64));
        let mut epoch_loss = 0.0;
        let mut epoch_count = 0usize;

        for (step, batch) in order.chunks(hyper.batch_size).enumerate() {
            let inputs: Vec<Vec<f32>> = if identity {
                Vec::new()
            } else {
                batch
                    .par_iter()
                    .map(|&i| {
                        let mut rng = stream(seed, Domain::Augment, (epoch * n + i) as u64);
                        to_tensor(&augment_only(patches[i], spec, size, &mut rng))
                    })
                    .collect()
            };
            let input_of = |j: usize| -> &[f32] {
                if identity {
                    &targets[batch[j]]
                } else {
                    &inputs[j]
                }
            };

            let scale = 1.0 / (batch.len() * sample_len) as f32;
            let partials: Vec<(f32, Vec<f32>)> = (0..batch.len())
                .collect::<Vec<_>>()
                .par_chunks(GRAD_CHUNK)
                .map(|js| {
                    let xs: Vec<&[f32]> = js.iter().map(|&j| input_of(j)).collect();
                    let ts: Vec<&[f32]> = js.iter().map(|&j| targets[batch[j]].as_slice()).collect();
                    let x = pack_batch(&xs, sample_len);
                    let t = pack_batch(&ts, sample_len);
                    let mut grad = vec![0.0f32; params.len()];
                    let loss = loss_and_gradient(&arch, &params, &x, &t, js.len(), scale, &mut grad);
                    (loss, grad)
                })
                .collect();

            let mut grad = vec![0.0f32; params.len()];
            let mut loss = 0.0f64;
            for (l, g) in &partials {
                loss += *l as f64;
                grad.iter_mut().zip(g).for_each(|(a, b)| *a += b);
            }
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(EmbedderError::DivergedTraining { epoch, step });
            }
            if epoch == 0 && step == 0 {
                log.initial_loss = loss;
            }
            epoch_loss += loss * batch.len() as f64;
            epoch_count += batch.len();
            adam.update(&mut params, &grad);
        }
        log.epoch_losses.push(epoch_loss / epoch_count as f64);
    }

    if params.iter().any(|p| !p.is_finite()) {
        return Err(EmbedderError::DivergedTraining {
            epoch: hyper.epochs,
            step: 0,
        });
    }
    Ok((EmbedderModel::from_parameters(arch, params)?, log))
}

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::dataset::{build_pool, PatchDataset, Triplet, TripletPool};
use super::loss::{batch_triplet_loss, triplet_loss};
use crate::error::{Error, Result};
use crate::nn::{backward_batch, forward, forward_batch, Mode, NetworkParams, OptimizerState, Sgd, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f32,
    pub momentum: f32,
    pub weight_decay: f32,
    pub margin: f32,
    /// Rebuild the triplet pool every this many epochs.
    pub refresh_interval: usize,
    /// Triplets per pool; `None` means 32 per person.
    pub pool_size: Option<usize>,
    pub epochs: usize,
    pub seed: u64,
    pub l2_normalize: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 64,
            learning_rate: 0.001,
            momentum: 0.09,
            weight_decay: 0.0005,
            margin: 0.2,
            refresh_interval: 10,
            pool_size: None,
            epochs: 50,
            seed: 42,
            l2_normalize: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.margin > 0.0) {
            return Err(Error::invalid(format!("margin must be > 0, got {}", self.margin)));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        if self.refresh_interval == 0 {
            return Err(Error::invalid("pool refresh interval must be at least 1"));
        }
        if !self.learning_rate.is_finite() || !self.momentum.is_finite() || !self.weight_decay.is_finite() {
            return Err(Error::invalid("optimizer hyperparameters must be finite"));
        }
        Ok(())
    }

    pub fn effective_pool_size(&self, persons: usize) -> usize {
        self.pool_size.unwrap_or(32 * persons)
    }
}

/// Fixed triplets of patches for tracking generalization during training.
#[derive(Debug, Clone, Default)]
pub struct HeldOutTriplets {
    pub triplets: Vec<[Tensor<f32>; 3]>,
}

impl HeldOutTriplets {
    pub fn sample(dataset: &PatchDataset, count: usize, seed: u64) -> Result<Self> {
        let pool = build_pool(dataset, count, &mut ChaCha8Rng::seed_from_u64(seed))?;
        Ok(HeldOutTriplets {
            triplets: pool
                .triplets
                .iter()
                .map(|t| [dataset.get(t.anchor).clone(), dataset.get(t.positive).clone(), dataset.get(t.negative).clone()])
                .collect(),
        })
    }
}

/// Mean of `max(term, 0)` over the held-out triplets, inference mode.
pub fn heldout_loss(params: &NetworkParams<f32>, set: &HeldOutTriplets, margin: f32) -> Result<f64> {
    if set.triplets.is_empty() {
        return Err(Error::invalid("empty held-out triplet set"));
    }
    let losses: Vec<f64> = set
        .triplets
        .par_iter()
        .map(|[a, p, n]| -> Result<f64> {
            let (ea, ep, en) = (forward(params, a)?, forward(params, p)?, forward(params, n)?);
            Ok(triplet_loss(&ea, &ep, &en, margin)?.loss() as f64)
        })
        .collect::<Result<_>>()?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    /// 1-based.
    pub epoch: usize,
    pub mean_batch_loss: f64,
    pub valid_fraction: f64,
    pub seconds: f64,
    pub pool_generation: u64,
    pub heldout_loss: Option<f64>,
}

impl EpochLog {
    pub const CSV_HEADER: &'static str = "epoch,mean_batch_loss,valid_fraction,seconds,pool_generation,heldout_loss";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{:.3},{},{}",
            self.epoch,
            self.mean_batch_loss,
            self.valid_fraction,
            self.seconds,
            self.pool_generation,
            self.heldout_loss.map(|v| v.to_string()).unwrap_or_default()
        )
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: NetworkParams<f32>,
    pub history: Vec<EpochLog>,
    pub initial_heldout_loss: Option<f64>,
}

fn gather(dataset: &PatchDataset, batch: &[Triplet]) -> Vec<Tensor<f32>> {
    let mut out = Vec::with_capacity(3 * batch.len());
    out.extend(batch.iter().map(|t| dataset.get(t.anchor).clone()));
    out.extend(batch.iter().map(|t| dataset.get(t.positive).clone()));
    out.extend(batch.iter().map(|t| dataset.get(t.negative).clone()));
    out
}

/// Trains one network on `dataset`.
///
/// Each batch embeds all anchors, positives and negatives with one shared
/// parameter set (batch norm sees all 3 x batch patches), keeps the triplets
/// whose term is positive, and takes one SGD step on the summed loss. The
/// pool is rebuilt at epochs 0, r, 2r, ... for refresh interval r. All
/// randomness derives from `config.seed`.
pub fn train(dataset: &PatchDataset, config: &TrainConfig, heldout: Option<&HeldOutTriplets>) -> Result<TrainOutcome> {
    config.validate()?;
    dataset.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = NetworkParams::<f32>::init(&mut rng);
    params.l2_normalize = config.l2_normalize;
    let mut state = OptimizerState::new(&params);
    let sgd = Sgd {
        learning_rate: config.learning_rate,
        momentum: config.momentum,
        weight_decay: config.weight_decay,
    };
    let pool_size = config.effective_pool_size(dataset.person_count());
    let initial_heldout_loss = match heldout {
        Some(h) if config.epochs > 0 => Some(heldout_loss(&params, h, config.margin)?),
        _ => None,
    };
    let mut pool = TripletPool::default();
    let mut generation = 0;
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let started = Instant::now();
        if epoch % config.refresh_interval == 0 {
            generation += 1;
            pool = build_pool(dataset, pool_size, &mut rng)?;
            pool.generation = generation;
        }
        pool.triplets.shuffle(&mut rng);
        let mut batch_losses = Vec::new();
        let mut valid = 0usize;
        for (b, batch) in pool.triplets.chunks(config.batch_size).enumerate() {
            let patches = gather(dataset, batch);
            let (embeddings, trace) = forward_batch(&mut params, &patches, Mode::Training)?;
            let n = batch.len();
            let (loss, n_valid, grads) =
                batch_triplet_loss(&embeddings[..n], &embeddings[n..2 * n], &embeddings[2 * n..], config.margin)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!(
                    "triplet loss {loss} at epoch {}, batch {b}",
                    epoch + 1
                )));
            }
            let [ga, gp, gn] = grads;
            let grad_embeddings: Vec<Tensor<f32>> = ga.into_iter().chain(gp).chain(gn).collect();
            let param_grads = backward_batch(&params, &trace, &grad_embeddings)?;
            sgd.step(&mut params, &param_grads, &mut state)
                .map_err(|e| Error::NonFinite(format!("epoch {}, batch {b}: {e}", epoch + 1)))?;
            batch_losses.push(loss as f64);
            valid += n_valid;
        }
        let mean_batch_loss = if batch_losses.is_empty() {
            0.0
        } else {
            batch_losses.iter().sum::<f64>() / batch_losses.len() as f64
        };
        let heldout_loss = heldout.map(|h| heldout_loss(&params, h, config.margin)).transpose()?;
        history.push(EpochLog {
            epoch: epoch + 1,
            mean_batch_loss,
            valid_fraction: if pool.triplets.is_empty() {
                0.0
            } else {
                valid as f64 / pool.triplets.len() as f64
            },
            seconds: started.elapsed().as_secs_f64(),
            pool_generation: generation,
            heldout_loss,
        });
    }
    Ok(TrainOutcome {
        params,
        history,
        initial_heldout_loss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn toy_dataset(seed: u64) -> PatchDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut d = PatchDataset::new();
        for person in 0..3 {
            for _ in 0..6 {
                let data = (0..400)
                    .map(|i| {
                        let (y, x) = ((i / 20) as f32, (i % 20) as f32);
                        let base = match person {
                            0 => (x * 0.8).sin(),
                            1 => (y * 0.8).sin(),
                            _ => ((x + y) * 0.5).cos(),
                        };
                        base + rng.random_range(-0.2..0.2)
                    })
                    .collect();
                d.push(&format!("id{person}"), Tensor::from_vec(&[1, 20, 20], data).unwrap()).unwrap();
            }
        }
        d
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let d = toy_dataset(0);
        let config = TrainConfig { epochs: 0, seed: 5, ..Default::default() };
        let out = train(&d, &config, None).unwrap();
        assert!(out.history.is_empty());
        let init = NetworkParams::<f32>::init(&mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(out.params, init);
    }

    #[test]
    fn same_seed_same_bits() {
        let d = toy_dataset(1);
        let config = TrainConfig { epochs: 3, pool_size: Some(24), batch_size: 8, refresh_interval: 2, ..Default::default() };
        let a = train(&d, &config, None).unwrap();
        let b = train(&d, &config, None).unwrap();
        assert_eq!(crate::nn::serialize_params(&a.params), crate::nn::serialize_params(&b.params));
        assert_eq!(
            a.history.iter().map(|h| h.mean_batch_loss).collect::<Vec<_>>(),
            b.history.iter().map(|h| h.mean_batch_loss).collect::<Vec<_>>()
        );
    }

    #[test]
    fn pool_regenerates_on_schedule() {
        let d = toy_dataset(2);
        let config = TrainConfig { epochs: 7, pool_size: Some(9), batch_size: 9, refresh_interval: 3, ..Default::default() };
        let out = train(&d, &config, None).unwrap();
        let gens: Vec<u64> = out.history.iter().map(|h| h.pool_generation).collect();
        assert_eq!(gens, vec![1, 1, 1, 2, 2, 2, 3]);
    }

    #[test]
    fn rejects_bad_config() {
        let d = toy_dataset(3);
        for config in [
            TrainConfig { margin: 0.0, ..Default::default() },
            TrainConfig { batch_size: 0, ..Default::default() },
            TrainConfig { refresh_interval: 0, ..Default::default() },
        ] {
            assert!(matches!(train(&d, &config, None), Err(Error::InvalidArgument(_))));
        }
    }

    #[test]
    fn loss_decreases_on_separable_toy_data() {
        let d = toy_dataset(4);
        let held = HeldOutTriplets::sample(&toy_dataset(40), 30, 7).unwrap();
        let config = TrainConfig { epochs: 30, pool_size: Some(48), batch_size: 16, learning_rate: 0.01, momentum: 0.9, ..Default::default() };
        let out = train(&d, &config, Some(&held)).unwrap();
        let first = out.history[0].heldout_loss.unwrap();
        let last = out.history.last().unwrap().heldout_loss.unwrap();
        assert!(last < first, "held-out loss {first} -> {last}");
    }
}

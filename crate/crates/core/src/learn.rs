//! Prototype learning: batch sampling, OT assignment and EMA updates.
//!
//! Every scale carries two banks, a global one (alpha = 0) and a local one
//! (alpha = `alpha_local`). For each batch and each bank the normalized cost
//! matrix is built, the entropic plan is solved, and every prototype moves
//! towards the plan-weighted barycenter of the batch features:
//!
//! `p_i <- eta * p_i + (1 - eta) * Np * sum_k T[k, i] * z_k`
//!
//! All prototypes of a bank are updated from the same pre-update weights.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::TrainConfig;
use crate::cost::{batch_features, cost_matrix};
use crate::error::{Error, Result};
use crate::grid::{init_prototypes, FeatureGrid, PrototypeSet};
use crate::sinkhorn::{solve, TransportPlan};

/// All training grids of one scale, indexed by sample.
#[derive(Debug, Clone)]
pub struct ScaleData {
    pub scale_id: u16,
    pub grids: Vec<FeatureGrid>,
}

impl ScaleData {
    fn validate(&self) -> Result<()> {
        let first = self.grids.first().ok_or(Error::EmptyDataset)?;
        for g in &self.grids {
            if !g.same_shape(first) {
                return Err(Error::dims(
                    "training grids of one scale",
                    format!("{}x{}x{}", first.height(), first.width(), first.dim()),
                    format!("{}x{}x{}", g.height(), g.width(), g.dim()),
                ));
            }
            if g.scale_id() != self.scale_id {
                return Err(Error::dims("grid scale id", self.scale_id, g.scale_id()));
            }
        }
        Ok(())
    }
}

/// Per-epoch diagnostics of one bank.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub scale_id: u16,
    pub alpha: f32,
    /// Mean of `<M, T>` over the batches of the epoch.
    pub mean_cost: f64,
    /// Fraction of solves that met the marginal tolerance.
    pub converged_fraction: f64,
    pub batches: usize,
}

/// Mutable training state: the banks, counters and the shuffling stream.
#[derive(Debug, Clone)]
pub struct TrainState {
    banks: Vec<PrototypeSet>,
    epoch: usize,
    batches: usize,
    rng: ChaCha8Rng,
    history: Vec<EpochStats>,
}

/// Seed of bank `index` derived from the run seed.
fn bank_seed(seed: u64, index: usize) -> u64 {
    seed ^ 0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index as u64 + 1)
}

impl TrainState {
    /// Validates the dataset against `cfg` and draws the initial banks,
    /// global then local for each scale in dataset order.
    pub fn new(dataset: &[ScaleData], cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        check_dataset(dataset, cfg)?;
        let mut banks = Vec::with_capacity(dataset.len() * 2);
        for scale in dataset {
            let g = &scale.grids[0];
            for alpha in cfg.bank_alphas() {
                let seed = bank_seed(cfg.rng_seed, banks.len());
                banks.push(init_prototypes(
                    cfg.n,
                    g.height(),
                    g.width(),
                    g.dim(),
                    alpha as f32,
                    scale.scale_id,
                    seed,
                    cfg.init_mean,
                    cfg.init_std,
                )?);
            }
        }
        Ok(Self {
            banks,
            epoch: 0,
            batches: 0,
            rng: ChaCha8Rng::seed_from_u64(cfg.rng_seed),
            history: Vec::new(),
        })
    }

    /// Rebuilds a state from checkpointed parts.
    pub fn from_parts(banks: Vec<PrototypeSet>, epoch: usize, rng: ChaCha8Rng) -> Self {
        Self {
            banks,
            epoch,
            batches: 0,
            rng,
            history: Vec::new(),
        }
    }

    pub fn banks(&self) -> &[PrototypeSet] {
        &self.banks
    }

    pub fn into_banks(self) -> Vec<PrototypeSet> {
        self.banks
    }

    /// Bank for `(scale_id, alpha)`, if trained.
    pub fn bank(&self, scale_id: u16, alpha: f32) -> Option<&PrototypeSet> {
        self.banks.iter().find(|b| b.scale_id() == scale_id && b.alpha() == alpha)
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn batches(&self) -> usize {
        self.batches
    }

    pub fn rng(&self) -> &ChaCha8Rng {
        &self.rng
    }

    pub fn history(&self) -> &[EpochStats] {
        &self.history
    }

    /// Runs one pass over the shuffled dataset and returns the stats of
    /// every bank for this epoch.
    pub fn run_epoch(
        &mut self,
        dataset: &[ScaleData],
        cfg: &TrainConfig,
        mut augment: Option<&mut dyn FnMut(&mut FeatureGrid)>,
    ) -> Result<Vec<EpochStats>> {
        cfg.validate()?;
        check_dataset(dataset, cfg)?;
        for bank in &self.banks {
            let scale = dataset
                .iter()
                .find(|s| s.scale_id == bank.scale_id())
                .ok_or_else(|| Error::dims("bank scale present in dataset", bank.scale_id(), "missing"))?;
            bank.check_grid(&scale.grids[0])?;
        }

        let solver = cfg.solver();
        let mut order: Vec<usize> = (0..dataset[0].grids.len()).collect();
        order.shuffle(&mut self.rng);

        let mut cost_sum = vec![0.0; self.banks.len()];
        let mut converged = vec![0usize; self.banks.len()];
        let mut batch_count = 0;

        for batch_idx in order.chunks(cfg.batch_size) {
            // A short tail that cannot give n grids per prototype cell is dropped.
            if batch_idx.len() < cfg.n {
                continue;
            }
            for scale in dataset {
                let owned: Vec<FeatureGrid>;
                let batch: Vec<&FeatureGrid> = match augment.as_deref_mut() {
                    Some(hook) => {
                        owned = batch_idx
                            .iter()
                            .map(|&i| {
                                let mut g = scale.grids[i].clone();
                                hook(&mut g);
                                g
                            })
                            .collect();
                        owned.iter().collect()
                    }
                    None => batch_idx.iter().map(|&i| &scale.grids[i]).collect(),
                };
                let features = batch_features(&batch);
                for (b, bank) in self.banks.iter_mut().enumerate() {
                    if bank.scale_id() != scale.scale_id {
                        continue;
                    }
                    let costs = cost_matrix(&batch, bank, bank.alpha() as f64, cfg.zero_vector)?;
                    let plan = solve(&costs, &solver)?;
                    cost_sum[b] += plan.transport_cost(costs.data());
                    converged[b] += plan.converged() as usize;
                    *bank = ema_update(bank, &plan, &features, cfg.eta)?;
                }
            }
            batch_count += 1;
            self.batches += 1;
        }
        if batch_count == 0 {
            return Err(Error::InvalidConfig(format!(
                "dataset of {} grids yields no batch of at least n = {} grids",
                order.len(),
                cfg.n
            )));
        }

        self.epoch += 1;
        let stats: Vec<EpochStats> = self
            .banks
            .iter()
            .enumerate()
            .map(|(b, bank)| EpochStats {
                epoch: self.epoch,
                scale_id: bank.scale_id(),
                alpha: bank.alpha(),
                mean_cost: cost_sum[b] / batch_count as f64,
                converged_fraction: converged[b] as f64 / batch_count as f64,
                batches: batch_count,
            })
            .collect();
        self.history.extend(stats.iter().cloned());
        Ok(stats)
    }

    /// True when every bank's mean cost moved by less than `tol` (relative)
    /// between the last two epochs.
    fn plateaued(&self, tol: f64) -> bool {
        let k = self.banks.len();
        if tol <= 0.0 || self.history.len() < 2 * k {
            return false;
        }
        let (prev, last) = self.history[self.history.len() - 2 * k..].split_at(k);
        prev.iter().zip(last).all(|(a, b)| {
            let scale = a.mean_cost.abs().max(f64::MIN_POSITIVE);
            ((b.mean_cost - a.mean_cost) / scale).abs() < tol
        })
    }
}

fn check_dataset(dataset: &[ScaleData], cfg: &TrainConfig) -> Result<()> {
    let first = dataset.first().ok_or(Error::EmptyDataset)?;
    for scale in dataset {
        scale.validate()?;
        if scale.grids.len() != first.grids.len() {
            return Err(Error::dims("samples per scale", first.grids.len(), scale.grids.len()));
        }
    }
    if first.grids.len() < cfg.n {
        return Err(Error::InvalidConfig(format!(
            "dataset of {} grids is smaller than n = {}",
            first.grids.len(),
            cfg.n
        )));
    }
    Ok(())
}

/// Trains fresh banks for `cfg.epochs` epochs (or until the plateau rule fires).
pub fn train(dataset: &[ScaleData], cfg: &TrainConfig) -> Result<TrainState> {
    train_with(dataset, cfg, |_, _| Ok(()))
}

/// Like [`train`], calling `on_epoch` after every epoch (e.g. to checkpoint).
pub fn train_with<F>(dataset: &[ScaleData], cfg: &TrainConfig, on_epoch: F) -> Result<TrainState>
where
    F: FnMut(&TrainState, &[EpochStats]) -> Result<()>,
{
    let mut state = TrainState::new(dataset, cfg)?;
    resume(&mut state, dataset, cfg, on_epoch)?;
    Ok(state)
}

/// Continues training `state` until it has run `cfg.epochs` epochs in total.
pub fn resume<F>(state: &mut TrainState, dataset: &[ScaleData], cfg: &TrainConfig, mut on_epoch: F) -> Result<()>
where
    F: FnMut(&TrainState, &[EpochStats]) -> Result<()>,
{
    while state.epoch < cfg.epochs {
        let stats = state.run_epoch(dataset, cfg, None)?;
        on_epoch(state, &stats)?;
        if state.plateaued(cfg.plateau_tol) {
            break;
        }
    }
    Ok(())
}

/// One EMA step of every prototype towards its plan-weighted barycenter.
///
/// `features` holds the batch embeddings in plan-row order, `rows x D`.
pub fn ema_update(protos: &PrototypeSet, plan: &TransportPlan, features: &[f32], eta: f64) -> Result<PrototypeSet> {
    let dim = protos.dim();
    let count = protos.len();
    if plan.cols() != count {
        return Err(Error::dims("plan columns vs prototypes", count, plan.cols()));
    }
    if features.len() != plan.rows() * dim {
        return Err(Error::dims("batch features vs plan rows", plan.rows() * dim, features.len()));
    }
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidConfig(format!("eta {eta} outside [0, 1]")));
    }
    let scale = (1.0 - eta) * count as f64;
    let cols = plan.cols();
    let t = plan.data();

    let mut updated = protos.clone();
    updated
        .weights_mut()
        .par_chunks_exact_mut(dim)
        .enumerate()
        .for_each(|(i, weight)| {
            let mut acc = vec![0.0f64; dim];
            for (k, z) in features.chunks_exact(dim).enumerate() {
                let mass = t[k * cols + i];
                if mass != 0.0 {
                    for (a, &zd) in acc.iter_mut().zip(z) {
                        *a += mass * zd as f64;
                    }
                }
            }
            for (w, a) in weight.iter_mut().zip(acc) {
                *w = (eta * *w as f64 + scale * a) as f32;
            }
        });
    if let Some(index) = updated.weights().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    Ok(updated)
}

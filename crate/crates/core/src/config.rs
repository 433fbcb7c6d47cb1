//! Hyperparameters for cost, solver and training.

use crate::cost::ZeroVectorPolicy;
use crate::error::{Error, Result};
use crate::sinkhorn::SolverParams;

/// Weight of the spatial term in the fused cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostConfig {
    alpha: f64,
}

impl CostConfig {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidConfig(format!("alpha {alpha} outside [0, 1]")));
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// Training hyperparameters. Defaults follow the reference setup:
/// 16 prototypes per cell, EMA rate 0.95, local alpha 0.3, epsilon 0.01,
/// 100 Sinkhorn iterations, 50 epochs, batches of 64.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Prototypes per lattice cell.
    pub n: usize,
    /// EMA rate; 1 freezes the prototypes.
    pub eta: f64,
    /// Alpha of the local bank; the global bank always uses 0.
    pub alpha_local: f64,
    pub epsilon: f64,
    pub max_sinkhorn_iters: usize,
    pub marginal_tol: f64,
    pub log_domain: bool,
    /// Anneal epsilon inside each solve (see [`SolverParams::eps_scaling`]).
    pub eps_scaling: bool,
    pub epochs: usize,
    pub batch_size: usize,
    pub rng_seed: u64,
    pub init_mean: f64,
    pub init_std: f64,
    pub zero_vector: ZeroVectorPolicy,
    /// Relative change in mean assignment cost under which training stops
    /// early. 0 disables early stopping.
    pub plateau_tol: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n: 16,
            eta: 0.95,
            alpha_local: 0.3,
            epsilon: 0.01,
            max_sinkhorn_iters: 100,
            marginal_tol: 1e-6,
            log_domain: true,
            eps_scaling: false,
            epochs: 50,
            batch_size: 64,
            rng_seed: 0,
            init_mean: 0.0,
            init_std: 1.0,
            zero_vector: ZeroVectorPolicy::Error,
            plateau_tol: 0.0,
        }
    }
}

impl TrainConfig {
    /// Keys accepted by [`TrainConfig::set`], in documentation order.
    pub const KEYS: &'static [&'static str] = &[
        "n",
        "eta",
        "alpha_local",
        "epsilon",
        "max_sinkhorn_iters",
        "marginal_tol",
        "log_domain",
        "eps_scaling",
        "epochs",
        "batch_size",
        "rng_seed",
        "init_mean",
        "init_std",
        "zero_vector",
        "plateau_tol",
    ];

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return bad(format!("eta {} outside [0, 1]", self.eta));
        }
        if !(0.0..=1.0).contains(&self.alpha_local) {
            return bad(format!("alpha_local {} outside [0, 1]", self.alpha_local));
        }
        if self.batch_size < self.n {
            return bad(format!(
                "batch_size {} is smaller than n {}; batches need at least n grids",
                self.batch_size, self.n
            ));
        }
        if !(self.init_std >= 0.0 && self.init_std.is_finite()) || !self.init_mean.is_finite() {
            return bad(format!("init distribution N({}, {}) is invalid", self.init_mean, self.init_std));
        }
        if !(self.plateau_tol >= 0.0) {
            return bad(format!("plateau_tol {} must be >= 0", self.plateau_tol));
        }
        self.solver().validate()
    }

    pub fn solver(&self) -> SolverParams {
        SolverParams {
            epsilon: self.epsilon,
            max_iters: self.max_sinkhorn_iters,
            marginal_tol: self.marginal_tol,
            log_domain: self.log_domain,
            eps_scaling: self.eps_scaling,
        }
    }

    /// Alphas of the banks trained per scale: global first, then local.
    pub fn bank_alphas(&self) -> [f64; 2] {
        [0.0, self.alpha_local]
    }

    /// Sets one field from its textual form. Unknown keys are errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .trim()
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("cannot parse {key} = {value:?}")))
        }
        match key {
            "n" => self.n = parse(key, value)?,
            "eta" => self.eta = parse(key, value)?,
            "alpha_local" => self.alpha_local = parse(key, value)?,
            "epsilon" => self.epsilon = parse(key, value)?,
            "max_sinkhorn_iters" => self.max_sinkhorn_iters = parse(key, value)?,
            "marginal_tol" => self.marginal_tol = parse(key, value)?,
            "log_domain" => self.log_domain = parse(key, value)?,
            "eps_scaling" => self.eps_scaling = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "rng_seed" => self.rng_seed = parse(key, value)?,
            "init_mean" => self.init_mean = parse(key, value)?,
            "init_std" => self.init_std = parse(key, value)?,
            "zero_vector" => self.zero_vector = parse(key, value)?,
            "plateau_tol" => self.plateau_tol = parse(key, value)?,
            other => return Err(Error::InvalidConfig(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Textual form of one field, the inverse of [`TrainConfig::set`].
    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "n" => self.n.to_string(),
            "eta" => self.eta.to_string(),
            "alpha_local" => self.alpha_local.to_string(),
            "epsilon" => self.epsilon.to_string(),
            "max_sinkhorn_iters" => self.max_sinkhorn_iters.to_string(),
            "marginal_tol" => self.marginal_tol.to_string(),
            "log_domain" => self.log_domain.to_string(),
            "eps_scaling" => self.eps_scaling.to_string(),
            "epochs" => self.epochs.to_string(),
            "batch_size" => self.batch_size.to_string(),
            "rng_seed" => self.rng_seed.to_string(),
            "init_mean" => self.init_mean.to_string(),
            "init_std" => self.init_std.to_string(),
            "zero_vector" => self.zero_vector.to_string(),
            "plateau_tol" => self.plateau_tol.to_string(),
            _ => return None,
        })
    }
}

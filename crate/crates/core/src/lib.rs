//! Prototype-based anomaly detection with entropic optimal transport.
//!
//! Feature grids from a frozen encoder are matched against banks of
//! prototypes anchored on the same spatial lattice. Training solves an
//! entropic transport problem between a batch of embeddings and the
//! prototypes under a cost that mixes cosine feature distance with squared
//! lattice distance, then moves each prototype towards its transported
//! barycenter. A global bank ignores positions (`alpha = 0`); a local bank
//! (`alpha > 0`) only matches nearby prototypes, which exposes features that
//! are normal in themselves but sit in the wrong place.
//!
//! At inference every cell is scored by its cheapest prototype; the global
//! and local maps are averaged, upsampled and summed over scales.
//!
//! ```
//! use otproto::{cost, grid, score};
//!
//! let protos = grid::init_prototypes(1, 2, 2, 3, 0.3, 2, 7, 0.0, 1.0).unwrap();
//! let test = grid::make_feature_grid(protos.weights(), 2, 2, 3, 2).unwrap();
//! let (field, _) = score::score_grid(&test, &protos, cost::ZeroVectorPolicy::Error).unwrap();
//! assert!(field.values.iter().all(|&s| s < 1e-9));
//! ```

pub mod config;
pub mod cost;
pub mod error;
pub mod grid;
pub mod io;
pub mod learn;
pub mod metrics;
pub mod report;
pub mod score;
pub mod sinkhorn;

pub use config::{CostConfig, TrainConfig};
pub use cost::{cost_matrix, fused_cost, struct_cost_table, CostMatrix, ZeroVectorPolicy};
pub use error::{Error, Result};
pub use grid::{init_prototypes, make_feature_grid, FeatureGrid, PrototypeSet};
pub use learn::{ema_update, train, EpochStats, ScaleData, TrainState};
pub use metrics::{auroc, spro_curve, DefectRegion, SproCurve};
pub use score::{aggregate, score_grid, AnomalyMap, AssignmentMap, ScaleFields, ScoreField};
pub use sinkhorn::{marginal_residuals, solve, solve_costs, SolverParams, TransportPlan};

//! Self-organizing maps for partially observed data.
//!
//! The crate learns a topology-preserving map and imputes missing entries
//! jointly, by alternating Kohonen updates (with winners computed on observed
//! coordinates) and closed-form neighborhood-weighted imputation. It also
//! ships the tooling needed to benchmark the method: Gaussian-mixture and
//! noisy-replicate generators, MCAR/MAR/MNAR amputation, baseline methods and
//! the usual map-quality metrics.
//!
//! ```
//! use missom::{ampute, gen_gaussian_mixture, misssom_accelerated};
//! use missom::{AmputationSpec, GridSpec, Mechanism, MixtureSpec, TrainingSchedule};
//!
//! let (x, _labels) = gen_gaussian_mixture(&MixtureSpec { n: 200, ..Default::default() }).unwrap();
//! let (data, _truth) = ampute(x.view(), &AmputationSpec { rate: 0.2, mechanism: Mechanism::Mcar, seed: 1 }).unwrap();
//! let grid = GridSpec::hexagonal(4, 5).unwrap();
//! let schedule = TrainingSchedule::for_grid(&grid, 7).with_epochs(20);
//! let result = misssom_accelerated(&data, &grid, &schedule).unwrap();
//! assert_eq!(result.imputations.len(), data.missing_count());
//! ```

pub mod baselines;
pub mod bench;
pub mod cluster;
pub mod data;
pub mod error;
pub mod io;
pub mod masked;
pub mod metrics;
pub mod misssom;
pub mod som;
pub mod svg;
pub mod topology;

pub use baselines::{cottrell_som, deletion_som, knn_impute, mean_impute, BaselineResult};
pub use data::{ampute, gen_gaussian_mixture, perturb_dataset, AmputationSpec, Mechanism, MixtureSpec};
pub use error::{Error, Result};
pub use masked::{
    impute_update, masked_winner, missom_loss, second_masked_winner, Imputation, ImputationSet,
    LossParts, MaskedDataset,
};
pub use metrics::{adjusted_rand_index, imputation_rmse, quantization_error, topographic_error, MetricsReport};
pub use misssom::{init_imputations, misssom_accelerated, misssom_basic, InitStrategy, MissSomResult};
pub use som::{init_codebook, kohonen_update, som_loss, train_som, winner, Codebook, TrainingSchedule, VisitOrder};
pub use topology::{GridSpec, NeuronCoord, Topology};

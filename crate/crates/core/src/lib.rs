//! Representation learning from random distance prediction.
//!
//! A one-layer leaky-ReLU encoder is trained so that inner products of its
//! outputs match inner products under a frozen random map, optionally joined
//! by a novelty loss (for anomaly scoring) or a reconstruction loss (for
//! clustering). The crate provides the map constructions, the learner, the
//! two downstream pipelines, their metrics and a binary model format.

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod ablation;
pub mod anomaly;
pub mod clustering;
pub mod error;
pub mod losses;
pub mod mapping;
pub mod metrics;
pub mod network;
pub mod numerics;
pub mod persist;

pub use ablation::Ablation;
pub use anomaly::{
    anomaly_score, boost_train_member, ensemble_score, fit_ensemble, run_anomaly, AnomalyOutcome, BoostConfig,
    Ensemble, Member,
};
pub use clustering::{kmeans, run_clustering, ClusterConfig, ClusterScores, ClusteringOutcome, KMeansResult};
pub use error::{Error, Result};
pub use mapping::{MapKind, RandomMap, Source};
pub use metrics::{auc_pr, auc_roc, nmi, nmi_with, pairwise_f, NmiNormalization};
pub use network::{train, RdpModel, Task, TrainConfig};
pub use numerics::{load_csv, prepare, standardize, Dataset, Matrix};
pub use persist::{load_ensemble, load_model, save_ensemble, save_model};

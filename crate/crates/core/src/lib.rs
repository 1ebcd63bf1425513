//! Survival kernets: kernel-weighted conditional Kaplan-Meier estimation
//! over an epsilon-net compression of the training embeddings, with
//! summary fine-tuning, concordance evaluation and cluster interpretation.

pub mod compress;
pub mod data;
pub mod error;
pub mod estimate;
pub mod eval;
pub mod grid;
pub mod ingest;
pub mod interpret;
pub mod kernel;
pub mod nnindex;
pub mod sft;

pub use compress::{
    assign_clusters, build_epsilon_net, compute_summaries, fit, fit_with_epsilon, ClusterSummaries, EpsilonNet,
    FitConfig, KernetModel,
};
pub use data::{euclidean, Dataset, FeatureColumn, FeatureKind, Points, RawFeatures, SurvivalRecord};
pub use error::{KernetError, Result};
pub use estimate::{
    cluster_survival, direct_hazard, greenwood_ci, interpolate_survival, kernet_hazard, kernet_survival, loo_hazard,
    median_survival_time, population_km, predict, predict_with, HazardVector, MedianSurvival, Prediction,
    SummarySource, SurvivalCurve,
};
pub use eval::{bootstrap_ci, ctd_index, ctd_subsampled, loss_report, CurveEval, MetricReport};
pub use grid::{build_time_grid, snap_dataset, GridMode, TimeGrid};
pub use interpret::{attribution, bin_features, heatmap_data, supercluster_curve, superclusters, HeatmapData};
pub use kernel::{project_to_sphere, KernelConfig, KernelKind};
pub use nnindex::{build_index, GraphParams, IndexBackend, NeighborIndex};
pub use sft::{sft_fit, sft_grad, sft_init, sft_loss, sft_summaries, SftHyper, SftParams};

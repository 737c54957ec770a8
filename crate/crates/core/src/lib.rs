//! Feature clustering in the extreme region of heavy-tailed multivariate data.
//!
//! Extremes are selected on Pareto-standardized margins, then a column-stochastic
//! mixture matrix `W` (p×m) and a responsibility matrix `Z` (m×k) are fitted by
//! alternating projected gradient ascent. Each column of `W` lives in the M-set,
//! the simplex with its vertices cut off, and describes a group of features that
//! are large together. The fitted `W` predicts the cluster of new extremes and
//! scores them for anomalies.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod inference;
pub mod io;
pub mod metrics;
pub mod mexico;
pub mod random;
pub mod sim;
pub mod simplex;
pub mod skmeans;
pub mod tail;

pub use error::{Error, Result};
pub use inference::{
    anomaly_score, empirical_risk, extract_clusters, predict_cluster, select_m, ClusterAssignment, FeatureClusterSet,
};
pub use io::{load_model, save_model};
pub use metrics::{average_precision, h_c_v, roc_auc, ContingencyTable};
pub use mexico::{
    fit_data, fit_data_best_of, fit_extremes, fit_matrix, FitConfig, FitOutcome, FittedModel, MixtureMatrix,
    ResponsibilityMatrix,
};
pub use sim::{AsymLogisticSpec, LabeledSample, LogisticSpec};
pub use simplex::{MSetSpec, ProjectionMethod};
pub use skmeans::{spherical_kmeans, SphericalKMeans};
pub use tail::{AngularMatrix, DataMatrix, ExtremeSet, Margins, StandardizedMatrix, Standardizer};

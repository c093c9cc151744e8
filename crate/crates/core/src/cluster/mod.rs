//! Truncated cluster expansion of channelled Gibbs states and their logarithms.

mod clusters;
mod expansion;
mod series;

pub use clusters::{enumerate_connected_clusters, Cluster, CLUSTER_COUNT_CAP};
pub use expansion::{
    channelled_gibbs_series_on, classical_series, cluster_derivatives, cluster_support, cmi_operator_series,
    derivative_norm_certificate, log_derivative_bound, pinned_series, pinned_series_check, reconstruct_log_derivative,
    series_of_channelled_gibbs, CertificateReport, ClusterCertificate, CmiOperatorSeries, PinnedReport, VanishingEntry,
    VanishingReason, DIAG_SERIES_DIM_CAP, SERIES_DIM_CAP, VANISHING_TOL,
};
pub use series::{Coefficient, Diag, Monomial, TruncatedSeries, Truncation, IDENTITY_TOL};

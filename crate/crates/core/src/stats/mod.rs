//! Unfolded local eigenvalue statistics and their goodness-of-fit tests.

mod counting;
mod io;
mod poisson;
mod report;
mod spacing;
mod unfold;

pub use counting::{
    clt_report, decays_monotonically, deviation_report, CltReport, CountReport, CLT_MIN_MEAN, CLT_MIN_REALIZATIONS,
};
pub use io::{batch_from_text, batch_to_text, read_batch, write_batch};
pub use poisson::{
    chi_square_poisson, count_correlation, half_line_check, poisson_count_test, poisson_process, spacing_null_threshold,
    spacing_statistic, tv_null_threshold, tv_to_poisson, uniform_t, EdgeSide, SpacingStatistic, MIN_REALIZATIONS,
};
pub use report::{empirical_quantile, ks_distance, ks_two_sample, moments, null_quantile, NullSpec, TestReport};
pub use spacing::{dls, spacings, DlsCurve, SpacingsReport};
pub use unfold::{collect_point_process, rescaled_uniform_process, unfold, PointProcessBatch, UnfoldedSample};

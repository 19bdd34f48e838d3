//! Image quality metrics, confidence intervals, test-set evaluation, and
//! report/grid output.

mod evaluate;
mod grid;
mod quality;
mod report;
mod summary;

pub use evaluate::{evaluate_pairs, evaluate_testset, Evaluation};
pub use grid::{render_grid, write_grid, GridRow};
pub use quality::{
    gaussian_window, psnr, ssim, SsimVariant, SSIM_C1, SSIM_C2, SSIM_SIGMA, SSIM_WINDOW,
};
pub use report::{emit_report, read_report_csv, ReportEntry, ReportRow};
pub use summary::{confidence_interval, Metric, MetricSummary, Z95};

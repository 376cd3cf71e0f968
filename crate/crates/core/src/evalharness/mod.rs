//! Running the baseline grid and turning scores into reports.

mod grid;
mod human;
mod report;
pub mod stats;

pub use grid::{run_approach, ApproachName, ApproachOutput, ApproachSpec};
pub use human::{auto_human_agreement, human_report, ingest_human_labels, Agreement, HumanRecord, HumanRow, MeanStd, DIMENSIONS};
pub use report::{aggregate, EvalReport, ReportRow, Significance};
pub use stats::{pearson, spearman, t_test, t_test_summary, TTest};

//! Impersonation attacks on point ranging, multilateration and fingerprinting.

mod plan;
mod report;
mod runners;
pub mod scenario;

pub use plan::{assign_impersonations, ApAssignment, AttackPlan};
pub use report::{cdf_samples, quantile, AttackReport, Cdf, ReportRow, SummaryRow, CDF_POINTS};
pub use runners::{
    run_attack, run_fingerprint_attack, run_multilateration_attack, run_point_attack, scenario_plan, survey_database,
    AttackMode,
};
pub use scenario::{bundled, Capture, ScenarioConfig, Strategy};

//! Spectrum coordination and RSS propagation.

pub mod channels;
pub mod propagation;

pub use propagation::{
    distance, observe_window, range_sweep, rss_at, rssi_range_report, PathLossModel, Placement, Point, RssObservation,
    RssiRangeReport, SourceKind, MIN_DISTANCE_M,
};

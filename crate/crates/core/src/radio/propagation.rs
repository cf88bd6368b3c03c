//! Log-distance path loss with log-normal shadowing, and the packet stream a
//! scanning phone sees from a set of sources.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SimRng;

pub type Point = [f64; 2];

pub fn distance(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Below this distance the log model is clamped.
pub const MIN_DISTANCE_M: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Ibeacon,
    WifiAp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathLossModel {
    pub n: f64,
    /// dB.
    pub sigma_beacon: f64,
    /// dB.
    pub sigma_ap: f64,
}

impl Default for PathLossModel {
    fn default() -> Self {
        Self { n: 2.0, sigma_beacon: 2.0, sigma_ap: 5.0 }
    }
}

impl PathLossModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.n > 0.0) || !(self.sigma_beacon >= 0.0) || !(self.sigma_ap >= 0.0) {
            return Err(Error::Config(format!("invalid path loss model {self:?}")));
        }
        Ok(())
    }

    pub fn sigma(&self, kind: SourceKind) -> f64 {
        match kind {
            SourceKind::Ibeacon => self.sigma_beacon,
            SourceKind::WifiAp => self.sigma_ap,
        }
    }

    /// Noise-free RSS at distance `d` for a source whose RSS at 1 m is `p0`.
    pub fn mean_rss(&self, p0: f64, d: f64) -> f64 {
        p0 - 10.0 * self.n * d.max(MIN_DISTANCE_M).log10()
    }
}

/// A transmitter: a genuine iBeacon or an attacker's AP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub name: String,
    pub position: Point,
    pub kind: SourceKind,
    /// True RSS at 1 m, dBm.
    pub true_power: f64,
    /// Power byte written into every packet, dBm.
    pub advertised_ref: f64,
    /// Advertising interval, seconds.
    pub interval: f64,
    /// Beacon ids this source broadcasts.
    pub impersonated_ids: Vec<String>,
    /// Probability a transmitted packet is decoded.
    pub prr: f64,
    /// Share of the scanner's channel dwell time this source can reach.
    pub scan_coverage: f64,
}

/// Scan coverage of a source that reaches only BLE channels 38 and 39.
pub fn wifi_scan_coverage() -> f64 {
    crate::radio::channels::reachable_fraction()
}

impl Placement {
    pub fn ibeacon(name: &str, position: Point, true_power: f64) -> Self {
        Self {
            name: name.to_string(),
            position,
            kind: SourceKind::Ibeacon,
            true_power,
            advertised_ref: true_power,
            interval: 0.1,
            impersonated_ids: vec![name.to_string()],
            prr: 1.0,
            scan_coverage: 1.0,
        }
    }

    pub fn wifi_ap(name: &str, position: Point, true_power: f64, advertised_ref: f64, prr: f64) -> Self {
        Self {
            name: name.to_string(),
            position,
            kind: SourceKind::WifiAp,
            true_power,
            advertised_ref,
            interval: 0.1,
            impersonated_ids: Vec::new(),
            prr,
            scan_coverage: wifi_scan_coverage(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == SourceKind::Ibeacon && self.impersonated_ids != [self.name.clone()] {
            return Err(Error::Config(format!("iBeacon {} must broadcast exactly its own id", self.name)));
        }
        if !(self.interval > 0.0) || !(0.0..=1.0).contains(&self.prr) || !(0.0..=1.0).contains(&self.scan_coverage) {
            return Err(Error::Config(format!("invalid source parameters for {}", self.name)));
        }
        Ok(())
    }

    pub fn survival(&self) -> f64 {
        self.prr * self.scan_coverage
    }
}

/// One received packet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RssObservation {
    pub beacon_id: String,
    /// dBm.
    pub rss: f64,
    /// The packet's power byte, dBm.
    pub embedded_ref: f64,
    /// Seconds from the window start.
    pub timestamp: f64,
    origin: usize,
}

impl RssObservation {
    pub fn new(beacon_id: &str, rss: f64, embedded_ref: f64, timestamp: f64, origin: usize) -> Self {
        Self { beacon_id: beacon_id.to_string(), rss, embedded_ref, timestamp, origin }
    }

    /// Index of the transmitting source. Ground truth for analysis only; the
    /// victim cannot tell genuine and forged packets apart.
    pub fn origin(&self) -> usize {
        self.origin
    }
}

/// One RSS reading from `source` at `receiver`.
pub fn rss_at(source: &Placement, receiver: Point, model: &PathLossModel, rng: &mut SimRng) -> f64 {
    let mut d = distance(source.position, receiver);
    if d < MIN_DISTANCE_M {
        log::warn!("receiver {d:.3} m from {}, clamped to {MIN_DISTANCE_M} m", source.name);
        d = MIN_DISTANCE_M;
    }
    let z: f64 = rng.sample(rand_distr::StandardNormal);
    model.mean_rss(source.true_power, d) + model.sigma(source.kind) * z
}

/// Packets heard from every source during `window` seconds. Each source sends
/// ⌊window / interval⌋ packets per id; each survives with probability
/// `prr × scan_coverage`. Observations come out ordered by time, then source.
pub fn observe_window(
    sources: &[Placement],
    receiver: Point,
    model: &PathLossModel,
    window: f64,
    rng: &mut SimRng,
) -> Vec<RssObservation> {
    let mut out = Vec::new();
    for (si, s) in sources.iter().enumerate() {
        let count = (window / s.interval + 1e-9).floor() as usize;
        let p = s.survival();
        for k in 0..count {
            for id in &s.impersonated_ids {
                // draw both numbers for every packet so streams stay aligned
                // whatever the survival probability
                let heard = rng.random::<f64>() < p;
                let rss = rss_at(s, receiver, model, rng);
                if heard {
                    out.push(RssObservation::new(id, rss, s.advertised_ref, k as f64 * s.interval, si));
                }
            }
        }
    }
    out.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp).then(a.origin.cmp(&b.origin)));
    out
}

/// Mean RSS over a grid of transmit power levels and distances.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RssiRangeReport {
    /// (power level at 1 m, distance, mean RSS).
    pub grid: Vec<(f64, f64, f64)>,
    pub min: f64,
    pub max: f64,
}

pub fn rssi_range_report(
    source: &Placement,
    distances: &[f64],
    power_levels: &[f64],
    model: &PathLossModel,
) -> Result<RssiRangeReport> {
    if distances.is_empty() || power_levels.is_empty() {
        return Err(Error::Config(format!("RSSI range of {} needs a distance and a power level", source.name)));
    }
    let grid: Vec<(f64, f64, f64)> =
        power_levels.iter().flat_map(|&p| distances.iter().map(move |&d| (p, d, model.mean_rss(p, d)))).collect();
    let min = grid.iter().map(|g| g.2).fold(f64::INFINITY, f64::min);
    let max = grid.iter().map(|g| g.2).fold(f64::NEG_INFINITY, f64::max);
    Ok(RssiRangeReport { grid, min, max })
}

/// Transmit power levels (RSS at 1 m) and distances of the desk-scale range
/// sweep: a WiFi AP reaches 1 m RSS of −30…−60 dBm and is measured out to
/// 31.6 m; an iBeacon only offers −65…−75 dBm and is measured to 10 m.
pub fn range_sweep(kind: SourceKind) -> (Vec<f64>, Vec<f64>) {
    match kind {
        SourceKind::WifiAp => {
            (vec![-30.0, -35.0, -40.0, -45.0, -50.0, -55.0, -60.0], vec![1.0, 2.0, 4.0, 8.0, 16.0, 10f64.powf(1.5)])
        }
        SourceKind::Ibeacon => (vec![-65.0, -70.0, -75.0], vec![1.0, 2.0, 5.0, 10.0]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_for;

    fn quiet() -> PathLossModel {
        PathLossModel { n: 2.0, sigma_beacon: 0.0, sigma_ap: 0.0 }
    }

    #[test]
    fn log_distance_values() {
        let mut rng = rng_for(1, &[]);
        let m = quiet();
        let b = Placement::ibeacon("b", [0.0, 0.0], -64.0);
        assert_eq!(rss_at(&b, [1.0, 0.0], &m, &mut rng), -64.0);
        assert!((rss_at(&b, [10.0, 0.0], &m, &mut rng) + 84.0).abs() < 1e-12);
        let ap = Placement::wifi_ap("ap", [0.0, 0.0], -40.0, -40.0, 1.0);
        assert!((rss_at(&ap, [31.62, 0.0], &m, &mut rng) + 70.0).abs() < 1e-3);
        // clamped, not infinite
        assert!((rss_at(&b, [0.0, 0.0], &m, &mut rng) + 44.0).abs() < 1e-12);
    }

    #[test]
    fn window_counts() {
        let mut rng = rng_for(2, &[]);
        let b = Placement::ibeacon("b", [0.0, 0.0], -64.0);
        assert_eq!(observe_window(&[b], [3.0, 4.0], &quiet(), 1.0, &mut rng).len(), 10);

        let mut ap = Placement::wifi_ap("ap", [1.0, 1.0], -40.0, -40.0, 1.0);
        ap.scan_coverage = 1.0;
        ap.impersonated_ids = vec!["x".into(), "y".into()];
        let obs = observe_window(&[ap], [3.0, 4.0], &quiet(), 1.0, &mut rng);
        assert_eq!(obs.iter().filter(|o| o.beacon_id == "x").count(), 10);
        assert_eq!(obs.iter().filter(|o| o.beacon_id == "y").count(), 10);
        assert!(obs.iter().all(|o| o.embedded_ref == -40.0 && o.origin() == 0));
    }

    #[test]
    fn seeded_determinism() {
        let srcs =
            [Placement::ibeacon("b", [0.0, 0.0], -64.0), Placement::wifi_ap("a", [5.0, 0.0], -30.0, -40.0, 0.662)];
        let a = observe_window(&srcs, [2.0, 2.0], &PathLossModel::default(), 1.0, &mut rng_for(9, &[1]));
        let b = observe_window(&srcs, [2.0, 2.0], &PathLossModel::default(), 1.0, &mut rng_for(9, &[1]));
        assert_eq!(a, b);
    }

    #[test]
    fn range_sweeps() {
        let m = quiet();
        let (lv, d) = range_sweep(SourceKind::WifiAp);
        let ap = Placement::wifi_ap("a", [0.0, 0.0], -30.0, -40.0, 1.0);
        let r = rssi_range_report(&ap, &d, &lv, &m).unwrap();
        assert!((r.min + 90.0).abs() < 1e-9 && (r.max + 30.0).abs() < 1e-9);
        let (lv, d) = range_sweep(SourceKind::Ibeacon);
        let b = Placement::ibeacon("b", [0.0, 0.0], -64.0);
        let r = rssi_range_report(&b, &d, &lv, &m).unwrap();
        assert!((r.min + 95.0).abs() < 1e-9 && (r.max + 65.0).abs() < 1e-9);
        let one = rssi_range_report(&b, &[3.0], &[-60.0], &m).unwrap();
        assert_eq!(one.min, one.max);
        assert!(rssi_range_report(&b, &[], &[-60.0], &m).is_err());
    }
}

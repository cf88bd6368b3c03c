//! Scenario files: deployment, victim behaviour and per-experiment knobs.

use std::collections::BTreeSet;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::localization::{Aggregation, DEFAULT_EPSILON, DEFAULT_K, DEFAULT_MISSING_RSS};
use crate::radio::{PathLossModel, Placement, Point};
use crate::rng::rng_for;

pub const SCHEMA_VERSION: u32 = 1;

/// PRR of an emulated beacon on a commodity WiFi card.
pub const DEFAULT_FAKE_PRR: f64 = 0.662;

const EVAL_TAG: u64 = 0xE7A1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Area {
    pub w: f64,
    pub h: f64,
}

impl Area {
    pub fn contains(&self, p: Point) -> bool {
        (0.0..=self.w).contains(&p[0]) && (0.0..=self.h).contains(&p[1])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeaconSpec {
    pub id: String,
    pub position: Point,
    /// RSS at 1 m, dBm.
    pub p0: f64,
    /// Power byte the beacon advertises; defaults to `p0`.
    #[serde(default)]
    pub tx_power_ref: Option<f64>,
    #[serde(default = "default_interval")]
    pub interval: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApSpec {
    pub id: String,
    pub position: Point,
    /// RSS at 1 m of the AP's real transmit power, dBm.
    pub p0: f64,
    #[serde(default = "default_interval")]
    pub interval: f64,
    #[serde(default = "default_fake_prr")]
    pub prr: f64,
    #[serde(default = "crate::radio::propagation::wifi_scan_coverage")]
    pub scan_coverage: f64,
}

fn default_interval() -> f64 {
    0.1
}

fn default_fake_prr() -> f64 {
    DEFAULT_FAKE_PRR
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum EvalPoints {
    /// Explicit positions.
    Points(Vec<Point>),
    /// Cell centres of an nx × ny grid over the area.
    Grid { nx: usize, ny: usize },
    /// Uniform random positions drawn from the scenario seed.
    Random { count: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Manual,
    Random,
    #[default]
    Farthest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManualAssignment {
    pub ap: String,
    pub ids: Vec<String>,
    #[serde(default)]
    pub p_f: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttackSpec {
    pub strategy: Strategy,
    /// APs switched on for single-count runs; all of them when absent.
    pub enabled_ap_count: Option<usize>,
    pub ids_per_ap: usize,
    /// Injected power byte, dBm.
    pub p_f: f64,
    pub manual: Vec<ManualAssignment>,
}

impl Default for AttackSpec {
    fn default() -> Self {
        Self { strategy: Strategy::Farthest, enabled_ap_count: None, ids_per_ap: 1, p_f: -40.0, manual: Vec::new() }
    }
}

/// Which packets reach the victim for an impersonated id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Capture {
    /// Genuine and forged packets both arrive and are pooled.
    #[default]
    Mixed,
    /// Only forged packets arrive, as when the victim has locked onto the
    /// attacker's stronger stream.
    FakeOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VictimSpec {
    pub aggregation: Aggregation,
    pub capture: Capture,
    pub k: usize,
    pub epsilon: f64,
    pub missing_value: f64,
    /// Estimated ranges below this are raised to it, metres.
    pub min_distance: Option<f64>,
}

impl Default for VictimSpec {
    fn default() -> Self {
        Self {
            aggregation: Aggregation::Mean,
            capture: Capture::Mixed,
            k: DEFAULT_K,
            epsilon: DEFAULT_EPSILON,
            missing_value: DEFAULT_MISSING_RSS,
            min_distance: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PointSpec {
    pub pf_sweep: Vec<f64>,
}

impl Default for PointSpec {
    fn default() -> Self {
        Self { pf_sweep: vec![-55.0, -52.0, -49.0, -46.0, -43.0, -40.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseStudy {
    pub victim: Point,
    /// Power bytes tried on every AP; all combinations are run.
    pub pf_grid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrilatSpec {
    pub case_study: Option<CaseStudy>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FingerprintSpec {
    /// Offline survey time per spot, seconds.
    pub survey_window: f64,
    /// Spots within this distance of an enabled AP count as affected, metres.
    pub affected_radius: f64,
    pub multi_ap_count: usize,
    pub multi_ids_per_ap: usize,
    pub stddev_spots: usize,
    pub stddev_windows: usize,
    pub sigma_ap_levels: Vec<f64>,
}

impl Default for FingerprintSpec {
    fn default() -> Self {
        Self {
            survey_window: 20.0,
            affected_radius: 12.0,
            multi_ap_count: 3,
            multi_ids_per_ap: 2,
            stddev_spots: 15,
            stddev_windows: 20,
            sigma_ap_levels: vec![2.0, 5.0, 8.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema: u32,
    pub name: String,
    pub area: Area,
    #[serde(default)]
    pub model: PathLossModel,
    pub beacons: Vec<BeaconSpec>,
    #[serde(default)]
    pub aps: Vec<ApSpec>,
    pub eval_points: EvalPoints,
    /// Seconds of packets per localization attempt.
    #[serde(default = "default_window")]
    pub window: f64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub attack: AttackSpec,
    #[serde(default)]
    pub victim: VictimSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub point: PointSpec,
    #[serde(default)]
    pub trilat: TrilatSpec,
    #[serde(default)]
    pub fingerprint: FingerprintSpec,
}

fn default_window() -> f64 {
    1.0
}

fn default_trials() -> usize {
    20
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.schema != SCHEMA_VERSION {
            return bad(format!("scenario schema {} not supported, expected {SCHEMA_VERSION}", self.schema));
        }
        if !(self.area.w > 0.0 && self.area.h > 0.0) {
            return bad("area must have positive size".into());
        }
        self.model.validate()?;
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        let mut names = BTreeSet::new();
        for (id, pos, interval) in self
            .beacons
            .iter()
            .map(|b| (&b.id, b.position, b.interval))
            .chain(self.aps.iter().map(|a| (&a.id, a.position, a.interval)))
        {
            if !names.insert(id.as_str()) {
                return bad(format!("duplicate source id {id:?}"));
            }
            if !self.area.contains(pos) {
                return bad(format!("source {id:?} at {pos:?} lies outside the area"));
            }
            if !(interval > 0.0) || self.window + 1e-9 < interval {
                return bad(format!("window {} s is shorter than the interval of {id:?}", self.window));
            }
        }
        for a in &self.aps {
            if !(0.0..=1.0).contains(&a.prr) || !(0.0..=1.0).contains(&a.scan_coverage) {
                return bad(format!("AP {:?} has a probability outside [0, 1]", a.id));
            }
        }
        if let Some(n) = self.attack.enabled_ap_count {
            if n > self.aps.len() {
                return bad(format!("enabled_ap_count {n} exceeds the {} APs deployed", self.aps.len()));
            }
        }
        if let Some(m) = self.victim.min_distance {
            if !(m > 0.0) {
                return bad("min_distance must be positive".into());
            }
        }
        if self.victim.k == 0 {
            return bad("k must be at least 1".into());
        }
        for p in self.eval_points()? {
            if !self.area.contains(p) {
                return bad(format!("evaluation point {p:?} lies outside the area"));
            }
        }
        Ok(())
    }

    pub fn eval_points(&self) -> Result<Vec<Point>> {
        match &self.eval_points {
            EvalPoints::Points(p) if !p.is_empty() => Ok(p.clone()),
            EvalPoints::Grid { nx, ny } if *nx > 0 && *ny > 0 => Ok((0..*ny)
                .flat_map(|j| {
                    (0..*nx).map(move |i| {
                        [(i as f64 + 0.5) * self.area.w / *nx as f64, (j as f64 + 0.5) * self.area.h / *ny as f64]
                    })
                })
                .collect()),
            EvalPoints::Random { count } if *count > 0 => {
                let mut rng = rng_for(self.seed, &[EVAL_TAG]);
                Ok((0..*count)
                    .map(|_| [rng.random::<f64>() * self.area.w, rng.random::<f64>() * self.area.h])
                    .collect())
            }
            _ => Err(Error::Config("no evaluation points".into())),
        }
    }

    pub fn beacon_placements(&self) -> Vec<Placement> {
        self.beacons
            .iter()
            .map(|b| {
                let mut p = Placement::ibeacon(&b.id, b.position, b.p0);
                p.advertised_ref = b.tx_power_ref.unwrap_or(b.p0);
                p.interval = b.interval;
                p
            })
            .collect()
    }

    /// AP placements with no ids assigned yet.
    pub fn ap_placements(&self) -> Vec<Placement> {
        self.aps
            .iter()
            .map(|a| {
                let mut p = Placement::wifi_ap(&a.id, a.position, a.p0, self.attack.p_f, a.prr);
                p.interval = a.interval;
                p.scan_coverage = a.scan_coverage;
                p
            })
            .collect()
    }

    /// The same scenario with every shadowing term switched off.
    pub fn noise_free(&self) -> Self {
        let mut c = self.clone();
        c.model.sigma_beacon = 0.0;
        c.model.sigma_ap = 0.0;
        c
    }
}

/// Scenario files shipped with the crate.
pub mod bundled {
    pub const POINT: &str = include_str!("../../scenarios/point.json");
    pub const TRILAT: &str = include_str!("../../scenarios/trilat.json");
    pub const FINGERPRINT: &str = include_str!("../../scenarios/fingerprint.json");
}

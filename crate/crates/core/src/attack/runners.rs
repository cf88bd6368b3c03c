use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;

use super::plan::{assign_impersonations, AttackPlan};
use super::report::{AttackReport, ReportRow};
use super::scenario::{Capture, ScenarioConfig};
use crate::error::{Error, Result};
use crate::localization::{
    aggregate_observations, estimate_distance, multilaterate, wknn_locate, Aggregation, FingerprintDatabase, Spot,
};
use crate::radio::{distance, observe_window, Placement, Point};
use crate::rng::{rng_for, SimRng};

const PLAN_TAG: u64 = 0x9A17;
const TRIAL_TAG: u64 = 0x7121;
const SURVEY_TAG: u64 = 0x5E1F;
const CASE_TAG: u64 = 0xCA5E;
const SPREAD_TAG: u64 = 0x5D5D;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackMode {
    Point,
    Trilat,
    Fingerprint,
}

impl FromStr for AttackMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "point" => Ok(Self::Point),
            "trilat" => Ok(Self::Trilat),
            "fingerprint" => Ok(Self::Fingerprint),
            _ => Err(Error::Config(format!("unknown attack mode {s:?}"))),
        }
    }
}

pub fn run_attack(cfg: &ScenarioConfig, mode: AttackMode) -> Result<AttackReport> {
    match mode {
        AttackMode::Point => run_point_attack(cfg),
        AttackMode::Trilat => run_multilateration_attack(cfg),
        AttackMode::Fingerprint => run_fingerprint_attack(cfg),
    }
}

/// Plan from the scenario's attack section with `ids_per_ap` overridden.
pub fn scenario_plan(cfg: &ScenarioConfig, ids_per_ap: usize) -> Result<AttackPlan> {
    let mut rng = rng_for(cfg.seed, &[PLAN_TAG, ids_per_ap as u64]);
    let a = &cfg.attack;
    let plan = assign_impersonations(
        &cfg.ap_placements(),
        &cfg.beacon_placements(),
        a.strategy,
        ids_per_ap,
        a.p_f,
        &a.manual,
        &mut rng,
    )?;
    Ok(plan.with_enabled(a.enabled_ap_count.unwrap_or(cfg.aps.len())))
}

/// Genuine beacons first, then the enabled APs, so the genuine packets of a
/// trial are drawn identically whatever the attack.
fn sources(cfg: &ScenarioConfig, plan: &AttackPlan) -> Vec<Placement> {
    let targeted = plan.targeted_ids();
    let mut out = cfg.beacon_placements();
    if cfg.victim.capture == Capture::FakeOnly {
        for b in &mut out {
            if targeted.contains(b.name.as_str()) {
                b.prr = 0.0;
            }
        }
    }
    for (ap, asg) in cfg.ap_placements().into_iter().zip(plan.enabled()) {
        out.push(Placement { impersonated_ids: asg.ids.clone(), advertised_ref: asg.p_f, ..ap });
    }
    out
}

fn pooled_window(
    cfg: &ScenarioConfig,
    srcs: &[Placement],
    at: Point,
    rng: &mut SimRng,
) -> BTreeMap<String, crate::localization::Pooled> {
    let obs = observe_window(srcs, at, &cfg.model, cfg.window, rng);
    aggregate_observations(&obs, cfg.victim.aggregation)
}

fn range(cfg: &ScenarioConfig, reference: f64, rss: f64) -> f64 {
    let d = estimate_distance(reference, rss, cfg.model.n);
    cfg.victim.min_distance.map_or(d, |m| d.max(m))
}

fn clamp_note(cfg: &ScenarioConfig, report: &mut AttackReport) {
    if let Some(m) = cfg.victim.min_distance {
        report.notes.push(format!("minimum-distance clamp active: estimated ranges below {m} m are raised to {m} m"));
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Root mean square distance of estimates from their centroid.
fn spread(points: &[Point]) -> f64 {
    let c = [
        mean(&points.iter().map(|p| p[0]).collect::<Vec<_>>()),
        mean(&points.iter().map(|p| p[1]).collect::<Vec<_>>()),
    ];
    mean(&points.iter().map(|p| distance(*p, c).powi(2)).collect::<Vec<_>>()).sqrt()
}

fn row(
    cfg: &ScenarioConfig,
    mode: &str,
    ap_count: usize,
    i: usize,
    p: Point,
    error_m: f64,
    stddev_m: f64,
) -> ReportRow {
    ReportRow {
        scenario: cfg.name.clone(),
        mode: mode.to_string(),
        ap_count,
        point_id: i,
        x: p[0],
        y: p[1],
        error_m,
        stddev_m,
        estimate_m: None,
    }
}

/// Rows for every point with at least one usable trial; the rest become notes.
fn collect_rows(report: &mut AttackReport, mode: &str, ap_count: usize, rows: Vec<Option<ReportRow>>) {
    for (i, r) in rows.into_iter().enumerate() {
        match r {
            Some(r) => report.rows.push(r),
            None => report.notes.push(format!("{mode} with {ap_count} APs: point {i} had no usable window")),
        }
    }
}

/// Single-beacon ranging: the victim turns the pooled RSS and power byte of
/// the beacon's id into a distance.
pub fn run_point_attack(cfg: &ScenarioConfig) -> Result<AttackReport> {
    cfg.validate()?;
    if cfg.beacons.len() != 1 {
        return Err(Error::Config(format!("point attack needs exactly one beacon, got {}", cfg.beacons.len())));
    }
    let beacon = cfg.beacon_placements().remove(0);
    let points = cfg.eval_points()?;
    let plan = scenario_plan(cfg, 1)?;
    let enabled = plan.enabled_ap_count;
    let mut report = AttackReport { scenario: cfg.name.clone(), ..Default::default() };

    let mut runs = vec![("baseline".to_string(), plan.with_enabled(0), None, true)];
    if enabled > 0 {
        runs.push(("attack".to_string(), plan.clone(), Some(cfg.attack.p_f), true));
        for &pf in &cfg.point.pf_sweep {
            let mut p = plan.clone();
            p.assignments.iter_mut().for_each(|a| a.p_f = pf);
            runs.push((format!("sweep{pf}"), p, Some(pf), false));
        }
    }
    let mut sweep = String::from("# p_f mean_error_m\n");
    for (mode, p, pf, cdf) in &runs {
        log::info!("point attack: {mode}");
        let srcs = sources(cfg, p);
        let rows: Vec<Option<ReportRow>> = points
            .par_iter()
            .enumerate()
            .map(|(i, &at)| {
                let truth = distance(at, beacon.position);
                let est: Vec<f64> = (0..cfg.trials)
                    .filter_map(|t| {
                        let mut rng = rng_for(cfg.seed, &[TRIAL_TAG, i as u64, t as u64]);
                        let pooled = pooled_window(cfg, &srcs, at, &mut rng);
                        pooled.get(&beacon.name).map(|b| range(cfg, b.reference, b.rss))
                    })
                    .collect();
                (!est.is_empty()).then(|| {
                    let m = mean(&est);
                    let sd = mean(&est.iter().map(|e| (e - m).powi(2)).collect::<Vec<_>>()).sqrt();
                    let err = mean(&est.iter().map(|e| (e - truth).abs()).collect::<Vec<_>>());
                    ReportRow { estimate_m: Some(m), ..row(cfg, mode, p.enabled_ap_count, i, at, err, sd) }
                })
            })
            .collect();
        collect_rows(&mut report, mode, p.enabled_ap_count, rows);
        report.summarise(mode, p.enabled_ap_count, *pf, *cdf);
        if !cdf {
            if let Some(s) = report.summary_for(mode, p.enabled_ap_count) {
                let _ = writeln!(sweep, "{} {}", pf.unwrap_or(f64::NAN), s.mean_error_m);
            }
        }
    }
    if enabled > 0 && !cfg.point.pf_sweep.is_empty() {
        report.data_files.push(("pf_sweep.dat".into(), sweep));
    }
    clamp_note(cfg, &mut report);
    Ok(report)
}

fn multilat_fix(
    cfg: &ScenarioConfig,
    beacons: &[Placement],
    srcs: &[Placement],
    at: Point,
    rng: &mut SimRng,
) -> Result<Option<Point>> {
    let pooled = pooled_window(cfg, srcs, at, rng);
    let (anchors, ranges): (Vec<Point>, Vec<f64>) = beacons
        .iter()
        .filter_map(|b| pooled.get(&b.name).map(|p| (b.position, range(cfg, p.reference, p.rss))))
        .unzip();
    if anchors.len() < 3 {
        return Ok(None);
    }
    Ok(Some(multilaterate(&anchors, &ranges, None)?.position))
}

/// Multilateration over the genuine beacons with 0..=|aps| APs switched on,
/// plus the power-byte case study when the scenario asks for it.
pub fn run_multilateration_attack(cfg: &ScenarioConfig) -> Result<AttackReport> {
    cfg.validate()?;
    if cfg.beacons.len() < 3 {
        return Err(Error::InsufficientAnchors(cfg.beacons.len()));
    }
    let beacons = cfg.beacon_placements();
    let points = cfg.eval_points()?;
    let plan = scenario_plan(cfg, cfg.attack.ids_per_ap)?;
    let mut report = AttackReport { scenario: cfg.name.clone(), ..Default::default() };
    for k in 0..=cfg.aps.len() {
        log::info!("multilateration attack: {k} APs");
        let p = plan.with_enabled(k);
        let srcs = sources(cfg, &p);
        let rows: Vec<Option<ReportRow>> = points
            .par_iter()
            .enumerate()
            .map(|(i, &at)| {
                let mut fixes = Vec::new();
                for t in 0..cfg.trials {
                    let mut rng = rng_for(cfg.seed, &[TRIAL_TAG, i as u64, t as u64]);
                    if let Some(x) = multilat_fix(cfg, &beacons, &srcs, at, &mut rng)? {
                        fixes.push(x);
                    }
                }
                Ok((!fixes.is_empty()).then(|| {
                    let err = mean(&fixes.iter().map(|x| distance(*x, at)).collect::<Vec<_>>());
                    row(cfg, "attack", k, i, at, err, spread(&fixes))
                }))
            })
            .collect::<Result<_>>()?;
        collect_rows(&mut report, "attack", k, rows);
        report.summarise("attack", k, (k > 0).then_some(cfg.attack.p_f), true);
    }

    if let Some(cs) = &cfg.trilat.case_study {
        let n_ap = cfg.aps.len();
        let combos = cs.pf_grid.len().checked_pow(n_ap as u32).filter(|&c| c > 0 && c <= 100_000);
        let combos = combos.ok_or_else(|| Error::Config("case study grid is empty or too large".into()))?;
        let base = plan.with_enabled(n_ap);
        let results: Vec<(Vec<f64>, Option<Point>)> = (0..combos)
            .into_par_iter()
            .map(|c| {
                let mut p = base.clone();
                let mut rest = c;
                for a in p.assignments.iter_mut() {
                    a.p_f = cs.pf_grid[rest % cs.pf_grid.len()];
                    rest /= cs.pf_grid.len();
                }
                let pfs = p.assignments.iter().map(|a| a.p_f).collect();
                // one shared stream: combinations differ only in the power bytes
                let mut rng = rng_for(cfg.seed, &[CASE_TAG]);
                Ok((pfs, multilat_fix(cfg, &beacons, &sources(cfg, &p), cs.victim, &mut rng)?))
            })
            .collect::<Result<_>>()?;
        let mut dat = String::from("#");
        for a in &cfg.aps {
            let _ = write!(dat, " pf_{}", a.id);
        }
        dat.push_str(" x y error_m\n");
        for (pfs, fix) in results {
            if let Some(x) = fix {
                for v in pfs {
                    let _ = write!(dat, "{v} ");
                }
                let _ = writeln!(dat, "{} {} {}", x[0], x[1], distance(x, cs.victim));
            }
        }
        report.data_files.push(("case_study.dat".into(), dat));
    }
    clamp_note(cfg, &mut report);
    Ok(report)
}

/// Offline survey of the genuine beacons at every evaluation point.
pub fn survey_database(cfg: &ScenarioConfig) -> Result<FingerprintDatabase> {
    let beacons = cfg.beacon_placements();
    let spots: Vec<Spot> = cfg
        .eval_points()?
        .par_iter()
        .enumerate()
        .map(|(i, &at)| {
            let mut rng = rng_for(cfg.seed, &[SURVEY_TAG, i as u64]);
            let obs = observe_window(&beacons, at, &cfg.model, cfg.fingerprint.survey_window, &mut rng);
            let vector = aggregate_observations(&obs, Aggregation::Mean).into_iter().map(|(k, v)| (k, v.rss)).collect();
            Spot { id: format!("s{i}"), position: at, vector }
        })
        .collect();
    FingerprintDatabase::new(spots, cfg.victim.missing_value)
}

fn wknn_fix(
    cfg: &ScenarioConfig,
    db: &FingerprintDatabase,
    srcs: &[Placement],
    at: Point,
    rng: &mut SimRng,
) -> Result<Point> {
    let observed = pooled_window(cfg, srcs, at, rng).into_iter().map(|(k, v)| (k, v.rss)).collect();
    wknn_locate(db, &observed, cfg.victim.k, cfg.victim.epsilon)
}

fn fingerprint_rows(
    cfg: &ScenarioConfig,
    db: &FingerprintDatabase,
    plan: &AttackPlan,
    mode: &str,
    spots: &[(usize, Point)],
    windows: usize,
    tag: u64,
) -> Result<Vec<Option<ReportRow>>> {
    let srcs = sources(cfg, plan);
    spots
        .par_iter()
        .map(|&(i, at)| {
            let fixes = (0..windows)
                .map(|t| wknn_fix(cfg, db, &srcs, at, &mut rng_for(cfg.seed, &[tag, i as u64, t as u64])))
                .collect::<Result<Vec<_>>>()?;
            let err = mean(&fixes.iter().map(|x| distance(*x, at)).collect::<Vec<_>>());
            Ok(Some(row(cfg, mode, plan.enabled_ap_count, i, at, err, spread(&fixes))))
        })
        .collect()
}

/// Weighted-kNN fingerprinting against a database surveyed without any
/// attack. Reports the error against AP count, single against double
/// impersonation with the same APs, and the spread of fixes at each
/// `sigma_ap` level.
pub fn run_fingerprint_attack(cfg: &ScenarioConfig) -> Result<AttackReport> {
    cfg.validate()?;
    let fp = &cfg.fingerprint;
    log::info!("fingerprint attack: surveying");
    let db = survey_database(cfg)?;
    if cfg.victim.k > db.spots().len() {
        return Err(Error::Config(format!("k = {} with {} spots", cfg.victim.k, db.spots().len())));
    }
    let spots: Vec<(usize, Point)> = cfg.eval_points()?.into_iter().enumerate().collect();
    let plan = scenario_plan(cfg, cfg.attack.ids_per_ap)?;
    let mut report = AttackReport { scenario: cfg.name.clone(), ..Default::default() };

    for k in 0..=cfg.aps.len() {
        log::info!("fingerprint attack: {k} APs");
        let rows = fingerprint_rows(cfg, &db, &plan.with_enabled(k), "ap_sweep", &spots, cfg.trials, TRIAL_TAG)?;
        collect_rows(&mut report, "ap_sweep", k, rows);
        report.summarise("ap_sweep", k, (k > 0).then_some(cfg.attack.p_f), true);
    }

    let m = fp.multi_ap_count.min(cfg.aps.len());
    if m > 0 && fp.multi_ids_per_ap > 1 {
        let enabled: Vec<Point> = cfg.aps[..m].iter().map(|a| a.position).collect();
        let affected = |r: &ReportRow| enabled.iter().any(|a| distance(*a, [r.x, r.y]) <= fp.affected_radius);
        for (mode, ids) in [("single_id", 1), ("multi_id", fp.multi_ids_per_ap)] {
            log::info!("fingerprint attack: {m} APs x {ids} ids");
            let p = scenario_plan(cfg, ids)?.with_enabled(m);
            let rows = fingerprint_rows(cfg, &db, &p, mode, &spots, cfg.trials, TRIAL_TAG)?;
            collect_rows(&mut report, mode, m, rows);
            report.summarise(mode, m, Some(cfg.attack.p_f), true);
            report.summarise_subset(&format!("{mode}_affected"), mode, m, Some(cfg.attack.p_f), false, affected);
        }
    }

    if fp.stddev_spots > 0 && fp.stddev_windows > 0 {
        let n = spots.len();
        let chosen: Vec<(usize, Point)> =
            (0..fp.stddev_spots.min(n)).map(|j| spots[j * n / fp.stddev_spots.min(n)]).collect();
        for &sigma in &fp.sigma_ap_levels {
            let mut c = cfg.clone();
            c.model.sigma_ap = sigma;
            c.model.validate()?;
            let mode = format!("spread_sigma{sigma}");
            log::info!("fingerprint attack: {mode}");
            let rows = fingerprint_rows(&c, &db, &plan, &mode, &chosen, fp.stddev_windows, SPREAD_TAG)?;
            collect_rows(&mut report, &mode, plan.enabled_ap_count, rows);
            report.summarise(&mode, plan.enabled_ap_count, Some(cfg.attack.p_f), false);
        }
    }
    clamp_note(cfg, &mut report);
    Ok(report)
}

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use serde::Serialize;

use super::scenario::{ManualAssignment, Strategy};
use crate::error::{Error, Result};
use crate::radio::{distance, Placement};
use crate::rng::SimRng;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApAssignment {
    pub ap: String,
    pub ids: Vec<String>,
    pub p_f: f64,
}

/// Which beacons each AP forges, at what power byte. `assignments` covers
/// every deployed AP in order; runs switch on a prefix of them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttackPlan {
    pub strategy: Strategy,
    pub enabled_ap_count: usize,
    pub assignments: Vec<ApAssignment>,
}

impl AttackPlan {
    pub fn with_enabled(&self, n: usize) -> Self {
        Self { enabled_ap_count: n.min(self.assignments.len()), ..self.clone() }
    }

    pub fn enabled(&self) -> &[ApAssignment] {
        &self.assignments[..self.enabled_ap_count]
    }

    /// Every id some enabled AP forges.
    pub fn targeted_ids(&self) -> BTreeSet<&str> {
        self.enabled().iter().flat_map(|a| a.ids.iter().map(String::as_str)).collect()
    }
}

/// Picks the beacons each AP impersonates.
///
/// `farthest` walks the APs in order and gives each the beacons farthest
/// from it that no earlier AP has taken, falling back to taken ones only when
/// the free ones run out. `random` deals from a shuffled deck so ids repeat
/// across APs only after every beacon has been dealt once.
pub fn assign_impersonations(
    aps: &[Placement],
    beacons: &[Placement],
    strategy: Strategy,
    ids_per_ap: usize,
    p_f: f64,
    manual: &[ManualAssignment],
    rng: &mut SimRng,
) -> Result<AttackPlan> {
    if beacons.is_empty() {
        return Err(Error::Config("no beacons to impersonate".into()));
    }
    let known: BTreeSet<&str> = beacons.iter().map(|b| b.name.as_str()).collect();
    let assignments = match strategy {
        Strategy::Manual => {
            for m in manual {
                if !aps.iter().any(|a| a.name == m.ap) {
                    return Err(Error::Config(format!("manual plan names unknown AP {:?}", m.ap)));
                }
                if let Some(id) = m.ids.iter().find(|id| !known.contains(id.as_str())) {
                    return Err(Error::UnknownBeacon(id.clone()));
                }
            }
            aps.iter()
                .map(|a| {
                    let m = manual.iter().find(|m| m.ap == a.name);
                    ApAssignment {
                        ap: a.name.clone(),
                        ids: m.map(|m| m.ids.clone()).unwrap_or_default(),
                        p_f: m.and_then(|m| m.p_f).unwrap_or(p_f),
                    }
                })
                .collect()
        }
        Strategy::Farthest | Strategy::Random => {
            if ids_per_ap == 0 || ids_per_ap > beacons.len() {
                return Err(Error::Config(format!("{ids_per_ap} ids per AP with {} beacons", beacons.len())));
            }
            let mut used = vec![false; beacons.len()];
            let mut deck: Vec<usize> = Vec::new();
            aps.iter()
                .map(|a| {
                    let picks = if strategy == Strategy::Farthest {
                        let mut order: Vec<usize> = (0..beacons.len()).collect();
                        order.sort_by(|&i, &j| {
                            distance(a.position, beacons[j].position)
                                .total_cmp(&distance(a.position, beacons[i].position))
                                .then(i.cmp(&j))
                        });
                        let fresh = order.iter().copied().filter(|&i| !used[i]);
                        let stale = order.iter().copied().filter(|&i| used[i]);
                        fresh.chain(stale).take(ids_per_ap).collect::<Vec<_>>()
                    } else {
                        let mut picks = Vec::with_capacity(ids_per_ap);
                        while picks.len() < ids_per_ap {
                            if deck.is_empty() {
                                deck = (0..beacons.len()).collect();
                                deck.shuffle(rng);
                            }
                            // never give one AP the same id twice
                            match deck.iter().position(|i| !picks.contains(i)) {
                                Some(k) => picks.push(deck.remove(k)),
                                None => deck.clear(),
                            }
                        }
                        picks
                    };
                    for &i in &picks {
                        used[i] = true;
                    }
                    ApAssignment {
                        ap: a.name.clone(),
                        ids: picks.iter().map(|&i| beacons[i].name.clone()).collect(),
                        p_f,
                    }
                })
                .collect()
        }
    };
    Ok(AttackPlan { strategy, enabled_ap_count: aps.len(), assignments })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_for;

    fn beacons(pos: &[[f64; 2]]) -> Vec<Placement> {
        pos.iter().enumerate().map(|(i, p)| Placement::ibeacon(&format!("b{i}"), *p, -64.0)).collect()
    }

    fn aps(pos: &[[f64; 2]]) -> Vec<Placement> {
        pos.iter().enumerate().map(|(i, p)| Placement::wifi_ap(&format!("ap{i}"), *p, -30.0, -40.0, 0.662)).collect()
    }

    #[test]
    fn farthest_takes_the_far_beacon() {
        let plan = assign_impersonations(
            &aps(&[[0.0, 0.0]]),
            &beacons(&[[1.0, 1.0], [40.0, 20.0]]),
            Strategy::Farthest,
            1,
            -40.0,
            &[],
            &mut rng_for(0, &[]),
        )
        .unwrap();
        assert_eq!(plan.assignments[0].ids, ["b1"]);
    }

    #[test]
    fn random_partitions_and_is_seeded() {
        let a = aps(&[[0.0, 0.0], [5.0, 5.0], [9.0, 1.0]]);
        let b = beacons(&[[1.0, 1.0], [2.0, 2.0], [3.0, 3.0], [4.0, 1.0], [5.0, 2.0], [6.0, 3.0]]);
        let p1 = assign_impersonations(&a, &b, Strategy::Random, 2, -40.0, &[], &mut rng_for(3, &[])).unwrap();
        let p2 = assign_impersonations(&a, &b, Strategy::Random, 2, -40.0, &[], &mut rng_for(3, &[])).unwrap();
        assert_eq!(p1, p2);
        let mut all: Vec<&str> = p1.assignments.iter().flat_map(|x| x.ids.iter().map(String::as_str)).collect();
        all.sort();
        assert_eq!(all, ["b0", "b1", "b2", "b3", "b4", "b5"]);
        let f = assign_impersonations(&a, &b, Strategy::Farthest, 2, -40.0, &[], &mut rng_for(3, &[])).unwrap();
        let set: BTreeSet<_> = f.assignments.iter().flat_map(|x| x.ids.clone()).collect();
        assert_eq!(set.len(), 6);
    }

    #[test]
    fn manual_plans() {
        let a = aps(&[[0.0, 0.0], [1.0, 0.0]]);
        let b = beacons(&[[1.0, 1.0], [2.0, 2.0]]);
        let m = [ManualAssignment { ap: "ap1".into(), ids: vec!["b0".into(), "b1".into()], p_f: Some(-45.0) }];
        let p = assign_impersonations(&a, &b, Strategy::Manual, 1, -40.0, &m, &mut rng_for(0, &[])).unwrap();
        assert!(p.assignments[0].ids.is_empty());
        assert_eq!(p.assignments[1].p_f, -45.0);
        assert_eq!(p.with_enabled(1).targeted_ids().len(), 0);
        assert_eq!(p.targeted_ids().len(), 2);
        let bad = [ManualAssignment { ap: "ap0".into(), ids: vec!["b9".into()], p_f: None }];
        assert!(matches!(
            assign_impersonations(&a, &b, Strategy::Manual, 1, -40.0, &bad, &mut rng_for(0, &[])),
            Err(Error::UnknownBeacon(_))
        ));
    }
}

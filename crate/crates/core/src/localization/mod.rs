//! Victim-side estimators: log-distance ranging, multilateration and
//! weighted-kNN fingerprinting.

mod fingerprint;
mod multilat;

use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::radio::RssObservation;

pub use fingerprint::{wknn_locate, FingerprintDatabase, Spot, DEFAULT_EPSILON, DEFAULT_K, DEFAULT_MISSING_RSS};
pub use multilat::{multilaterate, PositionEstimate, MAX_ITERATIONS, STEP_TOLERANCE};

/// Distance implied by an embedded reference `p` and a measured RSS `s`.
pub fn estimate_distance(p: f64, s: f64, n: f64) -> f64 {
    10f64.powf((p - s) / (10.0 * n))
}

/// Distance a victim `d0` metres from a source of true 1 m power `p0`
/// believes when the source advertises `pf` instead.
pub fn fake_distance(d0: f64, p0: f64, pf: f64, n: f64) -> f64 {
    d0 * 10f64.powf((pf - p0) / (10.0 * n))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    Mean,
    Median,
    Latest,
}

impl FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "mean" => Ok(Self::Mean),
            "median" => Ok(Self::Median),
            "latest" => Ok(Self::Latest),
            _ => Err(Error::Config(format!("unknown aggregation policy {s:?}"))),
        }
    }
}

/// RSS and reference pooled over one window for one id.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pooled {
    pub rss: f64,
    pub reference: f64,
    pub packets: usize,
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

/// Pools every packet heard under each id. Genuine and forged packets carry
/// the same id and look identical to the victim, so they share one pool.
pub fn aggregate_observations(obs: &[RssObservation], policy: Aggregation) -> BTreeMap<String, Pooled> {
    let mut groups: BTreeMap<&str, Vec<&RssObservation>> = BTreeMap::new();
    for o in obs {
        groups.entry(&o.beacon_id).or_default().push(o);
    }
    groups
        .into_iter()
        .map(|(id, g)| {
            let pooled = match policy {
                Aggregation::Mean => {
                    let k = g.len() as f64;
                    Pooled {
                        rss: g.iter().map(|o| o.rss).sum::<f64>() / k,
                        reference: g.iter().map(|o| o.embedded_ref).sum::<f64>() / k,
                        packets: g.len(),
                    }
                }
                Aggregation::Median => Pooled {
                    rss: median(&mut g.iter().map(|o| o.rss).collect::<Vec<_>>()),
                    reference: median(&mut g.iter().map(|o| o.embedded_ref).collect::<Vec<_>>()),
                    packets: g.len(),
                },
                Aggregation::Latest => {
                    // on equal timestamps the later observation in the input wins
                    let last = g
                        .iter()
                        .copied()
                        .reduce(|a, b| if b.timestamp >= a.timestamp { b } else { a })
                        .expect("groups are never empty");
                    Pooled { rss: last.rss, reference: last.embedded_ref, packets: g.len() }
                }
            };
            (id.to_string(), pooled)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(id: &str, rss: f64, r: f64, t: f64) -> RssObservation {
        RssObservation::new(id, rss, r, t, 0)
    }

    #[test]
    fn ranging_values() {
        assert_eq!(estimate_distance(-60.0, -60.0, 2.0), 1.0);
        assert!((estimate_distance(-64.0, -84.0, 2.0) - 10.0).abs() < 1e-12);
        assert!((estimate_distance(-40.0, -70.0, 2.0) - 31.6228).abs() < 1e-4);
        assert!((fake_distance(2.0, -64.0, -40.0, 2.0) - 31.698).abs() < 1e-3);
        assert!((fake_distance(5.0, -40.0, -64.0, 2.0) - 0.31548).abs() < 1e-5);
        assert_eq!(fake_distance(3.3, -50.0, -50.0, 2.5), 3.3);
    }

    #[test]
    fn pooling() {
        let mut v: Vec<_> = (0..6).map(|i| obs("a", -70.0, -64.0, i as f64 * 0.1)).collect();
        v.extend((0..4).map(|i| obs("a", -50.0, -40.0, 0.6 + i as f64 * 0.1)));
        let m = aggregate_observations(&v, Aggregation::Mean)["a"];
        assert!((m.rss + 62.0).abs() < 1e-12);
        assert!((m.reference + 54.4).abs() < 1e-12);
        assert_eq!(m.packets, 10);
        let md = aggregate_observations(&v, Aggregation::Median)["a"];
        assert_eq!(md.rss, -70.0);
        let l = aggregate_observations(&v, Aggregation::Latest)["a"];
        assert_eq!((l.rss, l.reference), (-50.0, -40.0));

        let g = [obs("b", -71.0, -64.0, 0.0), obs("b", -73.0, -64.0, 0.1), obs("c", -80.0, -59.0, 0.0)];
        let p = aggregate_observations(&g, Aggregation::Mean);
        assert_eq!(p.len(), 2);
        assert_eq!(p["b"].rss, -72.0);
        assert_eq!(p["c"].reference, -59.0);
        assert!("mode".parse::<Aggregation>().is_err());
    }
}

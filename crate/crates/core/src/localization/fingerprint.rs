use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radio::Point;

pub const DEFAULT_MISSING_RSS: f64 = -100.0;
pub const DEFAULT_K: usize = 3;
pub const DEFAULT_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Spot {
    pub id: String,
    pub position: Point,
    /// Mean RSS per beacon id, dBm. Covers every id of the database.
    pub vector: BTreeMap<String, f64>,
}

/// Surveyed RSS vectors of the points of interest.
#[derive(Debug, Clone, PartialEq)]
pub struct FingerprintDatabase {
    spots: Vec<Spot>,
    beacon_ids: Vec<String>,
    missing_value: f64,
}

#[derive(Serialize, Deserialize)]
struct Row {
    spot_id: String,
    x: f64,
    y: f64,
    beacon_id: String,
    rss: f64,
}

impl FingerprintDatabase {
    /// Builds a database, filling ids a spot did not hear with `missing_value`.
    pub fn new(mut spots: Vec<Spot>, missing_value: f64) -> Result<Self> {
        if spots.is_empty() {
            return Err(Error::EmptyDatabase);
        }
        let ids: BTreeSet<String> = spots.iter().flat_map(|s| s.vector.keys().cloned()).collect();
        for s in &mut spots {
            for id in &ids {
                s.vector.entry(id.clone()).or_insert(missing_value);
            }
        }
        Ok(Self { spots, beacon_ids: ids.into_iter().collect(), missing_value })
    }

    pub fn spots(&self) -> &[Spot] {
        &self.spots
    }

    pub fn beacon_ids(&self) -> &[String] {
        &self.beacon_ids
    }

    pub fn missing_value(&self) -> f64 {
        self.missing_value
    }

    /// Long-format CSV: spot_id,x,y,beacon_id,rss.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for s in &self.spots {
            for (id, rss) in &s.vector {
                out.serialize(Row {
                    spot_id: s.id.clone(),
                    x: s.position[0],
                    y: s.position[1],
                    beacon_id: id.clone(),
                    rss: *rss,
                })?;
            }
        }
        out.flush()?;
        Ok(())
    }

    /// Reads the CSV written by [`Self::write_csv`]. Spots keep their first
    /// appearance order.
    pub fn read_csv<R: Read>(r: R, missing_value: f64) -> Result<Self> {
        let mut spots: Vec<Spot> = Vec::new();
        let mut index: BTreeMap<String, usize> = BTreeMap::new();
        for row in csv::Reader::from_reader(r).deserialize() {
            let row: Row = row?;
            let i = *index.entry(row.spot_id.clone()).or_insert_with(|| {
                spots.push(Spot { id: row.spot_id.clone(), position: [row.x, row.y], vector: BTreeMap::new() });
                spots.len() - 1
            });
            if spots[i].position != [row.x, row.y] {
                return Err(Error::Config(format!("spot {} listed at two positions", row.spot_id)));
            }
            spots[i].vector.insert(row.beacon_id, row.rss);
        }
        Self::new(spots, missing_value)
    }
}

/// Weighted centroid of the `k` spots whose RSS vectors are nearest to the
/// observation. Ids the victim did not hear count as the missing value;
/// ids unknown to the database are ignored.
pub fn wknn_locate(
    db: &FingerprintDatabase,
    observed: &BTreeMap<String, f64>,
    k: usize,
    epsilon: f64,
) -> Result<Point> {
    if db.spots.is_empty() {
        return Err(Error::EmptyDatabase);
    }
    if k == 0 || k > db.spots.len() {
        return Err(Error::Config(format!("k = {k} with {} spots", db.spots.len())));
    }
    let probe: Vec<f64> =
        db.beacon_ids.iter().map(|id| observed.get(id).copied().unwrap_or(db.missing_value)).collect();
    let mut ranked: Vec<(f64, usize)> = db
        .spots
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let d2: f64 = s.vector.values().zip(&probe).map(|(a, b)| (a - b).powi(2)).sum();
            (d2.sqrt(), i)
        })
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    if k == 1 {
        return Ok(db.spots[ranked[0].1].position);
    }
    let (mut wx, mut wy, mut wsum) = (0.0, 0.0, 0.0);
    for &(d, i) in &ranked[..k] {
        let w = 1.0 / (epsilon + d);
        wx += w * db.spots[i].position[0];
        wy += w * db.spots[i].position[1];
        wsum += w;
    }
    Ok([wx / wsum, wy / wsum])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spot(id: &str, pos: Point, v: &[(&str, f64)]) -> Spot {
        Spot { id: id.into(), position: pos, vector: v.iter().map(|(k, r)| (k.to_string(), *r)).collect() }
    }

    fn db() -> FingerprintDatabase {
        FingerprintDatabase::new(
            vec![
                spot("s0", [0.0, 0.0], &[("a", -60.0), ("b", -80.0)]),
                spot("s1", [10.0, 0.0], &[("a", -80.0), ("b", -60.0)]),
                spot("s2", [0.0, 7.0], &[("a", -70.0)]),
            ],
            DEFAULT_MISSING_RSS,
        )
        .unwrap()
    }

    fn obs(v: &[(&str, f64)]) -> BTreeMap<String, f64> {
        v.iter().map(|(k, r)| (k.to_string(), *r)).collect()
    }

    #[test]
    fn substitution_and_exact_match() {
        let d = db();
        assert_eq!(d.spots()[2].vector["b"], -100.0);
        assert_eq!(wknn_locate(&d, &obs(&[("a", -80.0), ("b", -60.0)]), 1, 1e-6).unwrap(), [10.0, 0.0]);
        let p = wknn_locate(&d, &obs(&[("a", -70.0)]), 1, 1e-6).unwrap();
        assert_eq!(p, [0.0, 7.0]);
    }

    #[test]
    fn equidistant_pair_gives_midpoint() {
        let p = wknn_locate(&db(), &obs(&[("a", -70.0), ("b", -70.0)]), 2, 1e-6).unwrap();
        assert!((p[0] - 5.0).abs() < 1e-12 && p[1].abs() < 1e-12, "{p:?}");
    }

    #[test]
    fn bounds_and_errors() {
        assert!(wknn_locate(&db(), &obs(&[]), 0, 1e-6).is_err());
        assert!(wknn_locate(&db(), &obs(&[]), 4, 1e-6).is_err());
        assert!(matches!(FingerprintDatabase::new(vec![], -100.0), Err(Error::EmptyDatabase)));
    }

    #[test]
    fn csv_round_trip() {
        let d = db();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("spot_id,x,y,beacon_id,rss\n"));
        let back = FingerprintDatabase::read_csv(buf.as_slice(), DEFAULT_MISSING_RSS).unwrap();
        assert_eq!(back, d);
    }
}

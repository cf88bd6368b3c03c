use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;

/// Number of quantile samples in every reported CDF.
pub const CDF_POINTS: usize = 101;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub scenario: String,
    pub mode: String,
    pub ap_count: usize,
    pub point_id: usize,
    pub x: f64,
    pub y: f64,
    /// Mean over trials, metres.
    pub error_m: f64,
    /// Spread of the estimates over trials, metres.
    pub stddev_m: f64,
    /// Mean estimated range in point runs; unused elsewhere.
    #[serde(skip)]
    pub estimate_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub scenario: String,
    pub mode: String,
    pub ap_count: usize,
    pub p_f: Option<f64>,
    pub points: usize,
    pub mean_error_m: f64,
    pub median_error_m: f64,
    pub p90_error_m: f64,
    pub mean_stddev_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cdf {
    pub mode: String,
    pub ap_count: usize,
    /// Error at quantiles 0, 0.01, …, 1.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AttackReport {
    pub scenario: String,
    pub rows: Vec<ReportRow>,
    pub summary: Vec<SummaryRow>,
    pub cdfs: Vec<Cdf>,
    pub notes: Vec<String>,
    /// Extra plot data as (file name, contents).
    pub data_files: Vec<(String, String)>,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn cdf_samples(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    (0..CDF_POINTS).map(|i| quantile(&v, i as f64 / (CDF_POINTS - 1) as f64)).collect()
}

impl AttackReport {
    /// Appends summary and CDF entries for the rows of one (mode, ap_count).
    pub(crate) fn summarise(&mut self, mode: &str, ap_count: usize, p_f: Option<f64>, with_cdf: bool) {
        self.summarise_subset(mode, mode, ap_count, p_f, with_cdf, |_| true);
    }

    pub(crate) fn summarise_subset(
        &mut self,
        label: &str,
        mode: &str,
        ap_count: usize,
        p_f: Option<f64>,
        with_cdf: bool,
        keep: impl Fn(&ReportRow) -> bool,
    ) {
        let rows: Vec<&ReportRow> =
            self.rows.iter().filter(|r| r.mode == mode && r.ap_count == ap_count && keep(r)).collect();
        if rows.is_empty() {
            self.notes.push(format!("{label} with {ap_count} APs: no usable points"));
            return;
        }
        let mut errs: Vec<f64> = rows.iter().map(|r| r.error_m).collect();
        errs.sort_by(f64::total_cmp);
        let n = rows.len() as f64;
        self.summary.push(SummaryRow {
            scenario: self.scenario.clone(),
            mode: label.to_string(),
            ap_count,
            p_f,
            points: rows.len(),
            mean_error_m: errs.iter().sum::<f64>() / n,
            median_error_m: quantile(&errs, 0.5),
            p90_error_m: quantile(&errs, 0.9),
            mean_stddev_m: rows.iter().map(|r| r.stddev_m).sum::<f64>() / n,
        });
        if with_cdf {
            self.cdfs.push(Cdf { mode: label.to_string(), ap_count, values: cdf_samples(&errs) });
        }
    }

    pub fn summary_for(&self, mode: &str, ap_count: usize) -> Option<&SummaryRow> {
        self.summary.iter().find(|s| s.mode == mode && s.ap_count == ap_count)
    }

    pub fn rows_for<'a>(&'a self, mode: &'a str, ap_count: usize) -> impl Iterator<Item = &'a ReportRow> + 'a {
        self.rows.iter().filter(move |r| r.mode == mode && r.ap_count == ap_count)
    }

    pub fn report_csv(&self) -> Result<String> {
        to_csv(&self.rows)
    }

    pub fn summary_csv(&self) -> Result<String> {
        to_csv(&self.summary)
    }

    /// Two columns, quantile and error, one row per sample.
    pub fn cdf_dat(cdf: &Cdf) -> String {
        let mut s = format!("# {} ap_count={}\n# quantile error_m\n", cdf.mode, cdf.ap_count);
        for (i, v) in cdf.values.iter().enumerate() {
            let _ = writeln!(s, "{:.2} {v}", i as f64 / (CDF_POINTS - 1) as f64);
        }
        s
    }

    pub fn cdf_file_name(cdf: &Cdf) -> String {
        format!("cdf_{}_ap{}.dat", cdf.mode, cdf.ap_count)
    }

    /// Writes report.csv, summary.csv, the CDF files, any extra data files
    /// and notes.txt when there is something to note.
    pub fn write_dir(&self, dir: &Path) -> Result<Vec<String>> {
        std::fs::create_dir_all(dir)?;
        let mut files =
            vec![("report.csv".to_string(), self.report_csv()?), ("summary.csv".to_string(), self.summary_csv()?)];
        files.extend(self.cdfs.iter().map(|c| (Self::cdf_file_name(c), Self::cdf_dat(c))));
        files.extend(self.data_files.iter().cloned());
        if !self.notes.is_empty() {
            files.push(("notes.txt".to_string(), self.notes.join("\n") + "\n"));
        }
        for (name, body) in &files {
            std::fs::write(dir.join(name), body)?;
        }
        Ok(files.into_iter().map(|f| f.0).collect())
    }
}

fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 0.5), 3.0);
        assert_eq!(quantile(&v, 0.625), 3.5);
        assert_eq!(quantile(&v, 1.0), 5.0);
        let c = cdf_samples(&[3.0, 1.0, 2.0]);
        assert_eq!(c.len(), CDF_POINTS);
        assert!(c.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn csv_header() {
        let mut r = AttackReport { scenario: "s".into(), ..Default::default() };
        r.rows.push(ReportRow {
            scenario: "s".into(),
            mode: "attack".into(),
            ap_count: 1,
            point_id: 0,
            x: 1.0,
            y: 2.0,
            error_m: 0.5,
            stddev_m: 0.0,
            estimate_m: Some(3.0),
        });
        r.summarise("attack", 1, None, true);
        let csv = r.report_csv().unwrap();
        assert_eq!(csv.lines().next().unwrap(), "scenario,mode,ap_count,point_id,x,y,error_m,stddev_m");
        assert_eq!(csv.lines().nth(1).unwrap(), "s,attack,1,0,1.0,2.0,0.5,0.0");
        assert!(r.summary_csv().unwrap().starts_with("scenario,mode,ap_count,p_f,points,"));
        assert_eq!(AttackReport::cdf_dat(&r.cdfs[0]).lines().count(), CDF_POINTS + 2);
    }
}

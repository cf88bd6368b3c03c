//! Monte Carlo packet reception over random receiver timing.

use rayon::prelude::*;
use serde::Serialize;

use super::{frames_clean, DecodeTarget, SamplingContext};
use crate::ble::AdvertisingPacket;
use crate::emulation::{emulate_packet, EmulationConfig, QamOrder, Variant, WaveformFrame};
use crate::error::{Error, Result};
use crate::rng::rng_for;

const PRR_TAG: u64 = 0x0050_5252;
const STABILITY_TAG: u64 = 0x5354_4142;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrrEstimate {
    pub variant: Variant,
    pub qam_order: QamOrder,
    pub snr_db: Option<f64>,
    pub trials: u64,
    pub successes: u64,
    pub prr: f64,
    /// Normal-approximation 95% half-width.
    pub ci95: f64,
}

impl PrrEstimate {
    pub const CSV_HEADER: &'static str = "variant,qam_order,snr_db,trials,prr,ci95";

    pub fn csv_row(&self) -> String {
        let snr = self.snr_db.map_or("none".to_string(), |s| format!("{s}"));
        format!("{},{},{},{},{:.6},{:.6}", self.variant, self.qam_order.label(), snr, self.trials, self.prr, self.ci95)
    }
}

/// One packet per trial, each with its own (τ, mode, noise) draw.
pub fn count_successes(
    frames: &[WaveformFrame],
    target: &DecodeTarget,
    snr_db: Option<f64>,
    trials: u64,
    seed: u64,
    tag: u64,
) -> u64 {
    (0..trials)
        .into_par_iter()
        .filter(|&t| {
            let mut rng = rng_for(seed, &[tag, t]);
            let ctx = SamplingContext::draw(&mut rng, snr_db);
            frames_clean(frames, target, &ctx)
        })
        .count() as u64
}

pub fn estimate_prr(
    packet: &AdvertisingPacket,
    config: &EmulationConfig,
    snr_db: Option<f64>,
    trials: u64,
    seed: u64,
) -> Result<PrrEstimate> {
    if trials == 0 {
        return Err(Error::Config("PRR needs at least one trial".into()));
    }
    let frames = emulate_packet(packet, config)?;
    let target = DecodeTarget::from_packet(packet);
    let successes = count_successes(&frames, &target, snr_db, trials, seed, PRR_TAG);
    let p = successes as f64 / trials as f64;
    Ok(PrrEstimate {
        variant: config.variant,
        qam_order: config.qam_order,
        snr_db,
        trials,
        successes,
        prr: p,
        ci95: 1.96 * (p * (1.0 - p) / trials as f64).sqrt(),
    })
}

/// Received packets per second over a periodic broadcast.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityTrace {
    pub counts: Vec<u32>,
    pub per_second: u32,
    pub mean: f64,
    /// Population standard deviation over mean; 0 when nothing is received.
    pub cv: f64,
}

impl StabilityTrace {
    fn from_counts(counts: Vec<u32>, per_second: u32) -> Self {
        let n = counts.len() as f64;
        let mean = counts.iter().map(|&c| c as f64).sum::<f64>() / n;
        let var = counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / n;
        let cv = if mean > 0.0 { var.sqrt() / mean } else { 0.0 };
        Self { counts, per_second, mean, cv }
    }
}

pub fn stability_trace(
    packet: &AdvertisingPacket,
    config: &EmulationConfig,
    interval: f64,
    duration: f64,
    snr_db: Option<f64>,
    seed: u64,
) -> Result<StabilityTrace> {
    let seconds = duration.round();
    if seconds < 1.0 || (duration - seconds).abs() > 1e-9 {
        return Err(Error::Config(format!("duration {duration} s is not a whole number of seconds")));
    }
    let per_second = (1.0 / interval).round();
    if interval <= 0.0 || (per_second * interval - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("interval {interval} s does not divide one second")));
    }
    let (seconds, per_second) = (seconds as u64, per_second as u64);
    let frames = emulate_packet(packet, config)?;
    let target = DecodeTarget::from_packet(packet);
    let counts = (0..seconds)
        .into_par_iter()
        .map(|s| {
            (0..per_second)
                .filter(|&k| {
                    let mut rng = rng_for(seed, &[STABILITY_TAG, s * per_second + k]);
                    let ctx = SamplingContext::draw(&mut rng, snr_db);
                    frames_clean(&frames, &target, &ctx)
                })
                .count() as u32
        })
        .collect();
    Ok(StabilityTrace::from_counts(counts, per_second as u32))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_statistics() {
        let t = StabilityTrace::from_counts(vec![10; 30], 10);
        assert_eq!((t.mean, t.cv), (10.0, 0.0));
        let z = StabilityTrace::from_counts(vec![0; 30], 10);
        assert_eq!((z.mean, z.cv), (0.0, 0.0));
        let h = StabilityTrace::from_counts(vec![4, 6], 10);
        assert!((h.cv - 0.2).abs() < 1e-12);
    }

    #[test]
    fn csv_row_format() {
        let e = PrrEstimate {
            variant: Variant::Adjusted,
            qam_order: QamOrder::Off,
            snr_db: None,
            trials: 10,
            successes: 7,
            prr: 0.7,
            ci95: 0.28,
        };
        assert_eq!(e.csv_row(), "adjusted,off,none,10,0.700000,0.280000");
    }
}

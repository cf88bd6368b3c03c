//! Snapping OFDM subcarriers to a square QAM grid.

use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use super::{BinPolicy, EmulationConfig, SymbolGeometry};
use crate::error::{Error, Result};
use crate::radio::channels::subcarrier_offset;
use crate::Complex64;

/// Square M-QAM with levels at odd multiples of `unit` on each axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constellation {
    pub order: usize,
    pub unit: f64,
}

impl Constellation {
    pub fn new(order: usize, unit: f64) -> Result<Self> {
        let side = (order as f64).sqrt().round() as usize;
        if side * side != order || side < 2 || !side.is_multiple_of(2) {
            return Err(Error::Config(format!("{order}-QAM is not a square even-sided grid")));
        }
        Ok(Self { order, unit })
    }

    /// Scaled to unit average power.
    pub fn unit_power(order: usize) -> Result<Self> {
        Self::new(order, (3.0 / (2.0 * (order as f64 - 1.0))).sqrt())
    }

    pub fn side(&self) -> usize {
        (self.order as f64).sqrt().round() as usize
    }

    fn axis(&self, x: f64) -> f64 {
        let max = (self.side() - 1) as f64;
        let odd = 2.0 * ((x / self.unit - 1.0) / 2.0).round() + 1.0;
        odd.clamp(-max, max) * self.unit
    }

    pub fn nearest(&self, z: Complex64) -> Complex64 {
        Complex64::new(self.axis(z.re), self.axis(z.im))
    }

    pub fn max_amplitude(&self) -> f64 {
        (self.side() - 1) as f64 * self.unit * std::f64::consts::SQRT_2
    }

    pub fn points(&self) -> Vec<Complex64> {
        let s = self.side() as i32;
        let lv: Vec<f64> = (0..s).map(|i| (2 * i - (s - 1)) as f64 * self.unit).collect();
        lv.iter().flat_map(|&re| lv.iter().map(move |&im| Complex64::new(re, im))).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BinRule {
    Quantize,
    Pass,
    Null,
    Pilot,
}

/// Per-bin treatment, in FFT order (bin i is frequency i for i < N/2, i − N above).
#[derive(Debug, Clone)]
pub struct BinMap {
    rules: Vec<BinRule>,
}

impl BinMap {
    pub fn new(config: &EmulationConfig, channel: u8, geom: &SymbolGeometry) -> Result<Self> {
        let n = geom.body;
        let rules = match config.bin_policy {
            BinPolicy::AllBins => vec![BinRule::Quantize; n],
            BinPolicy::Window => {
                let half = (n / 2) as i32;
                (0..n as i32)
                    .map(|i| {
                        let k = if i < half { i } else { i - n as i32 };
                        if k.unsigned_abs() as usize <= config.window_half_width {
                            BinRule::Quantize
                        } else {
                            BinRule::Pass
                        }
                    })
                    .collect()
            }
            BinPolicy::Strict => {
                let off = subcarrier_offset(channel)?;
                let half = (n / 2) as i32;
                (0..n as i32)
                    .map(|i| {
                        let k = if i < half { i } else { i - n as i32 };
                        let w = (k + off + half).rem_euclid(n as i32) - half;
                        if w == 0 || w.abs() >= 27 {
                            BinRule::Null
                        } else if w.abs() == 7 || w.abs() == 21 {
                            BinRule::Pilot
                        } else if k.unsigned_abs() as usize <= config.window_half_width {
                            BinRule::Quantize
                        } else {
                            BinRule::Pass
                        }
                    })
                    .collect()
            }
        };
        Ok(Self { rules })
    }
}

pub(crate) struct QuantizedSymbol {
    pub samples: Vec<Complex64>,
    pub error_energy: f64,
    pub signal_energy: f64,
}

/// Log-spaced scale candidates relative to the RMS of the quantized bins.
/// The grid does not depend on the order, so a denser constellation (a superset
/// at every scale) can never end up with a larger error.
fn scale_grid(rms: f64) -> impl Iterator<Item = f64> {
    (-240..=60).map(move |j| rms * 10f64.powf(j as f64 / 80.0))
}

struct Transforms {
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

fn transforms(n: usize) -> Transforms {
    thread_local! {
        static PLANNER: std::cell::RefCell<FftPlanner<f64>> = std::cell::RefCell::new(FftPlanner::new());
    }
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        Transforms { fwd: p.plan_fft_forward(n), inv: p.plan_fft_inverse(n) }
    })
}

pub(crate) fn quantize_symbol(
    sym: &[Complex64],
    order: usize,
    map: &BinMap,
    geom: &SymbolGeometry,
) -> Result<QuantizedSymbol> {
    let n = geom.body;
    if sym.len() != geom.symbol() {
        return Err(Error::Shape(format!("expected {} samples per symbol, got {}", geom.symbol(), sym.len())));
    }
    let t = transforms(n);
    let norm = 1.0 / (n as f64).sqrt();
    let mut bins: Vec<Complex64> = sym[geom.cp..].to_vec();
    t.fwd.process(&mut bins);
    bins.iter_mut().for_each(|b| *b *= norm);

    let quant: Vec<usize> = (0..n).filter(|&i| map.rules[i] == BinRule::Quantize).collect();
    let rms = if quant.is_empty() {
        1.0
    } else {
        (quant.iter().map(|&i| bins[i].norm_sqr()).sum::<f64>() / quant.len() as f64).sqrt()
    };
    let apply = |order: usize, unit: f64| -> Result<(Vec<Complex64>, f64)> {
        let c = Constellation::new(order, unit)?;
        let mut out = bins.clone();
        let mut err = 0.0;
        for (i, o) in out.iter_mut().enumerate() {
            let q = match map.rules[i] {
                BinRule::Quantize => c.nearest(bins[i]),
                BinRule::Pass => bins[i],
                BinRule::Null => Complex64::new(0.0, 0.0),
                BinRule::Pilot => Complex64::new(unit, unit),
            };
            err += (bins[i] - q).norm_sqr();
            *o = q;
        }
        Ok((out, err))
    };
    // Least-squares rescale with the point assignment held fixed, repeated
    // while it helps.
    let refine = |order: usize, mut unit: f64, mut err: f64| -> Result<(f64, f64)> {
        for _ in 0..20 {
            let (q, _) = apply(order, unit)?;
            let (mut num, mut den) = (0.0, 0.0);
            for (i, rule) in map.rules.iter().enumerate() {
                if matches!(rule, BinRule::Quantize | BinRule::Pilot) {
                    let c = q[i] / unit;
                    num += (c.conj() * bins[i]).re;
                    den += c.norm_sqr();
                }
            }
            if !(den > 0.0 && num > 0.0) {
                break;
            }
            let (_, e) = apply(order, num / den)?;
            if e >= err - 1e-15 {
                break;
            }
            unit = num / den;
            err = e;
        }
        Ok((unit, err))
    };
    // Each order also tries the scale chosen for the next sparser order. The
    // sparser constellation is a subset at equal scale, so EVM can only drop
    // as the order grows.
    let mut best: Option<(f64, f64)> = None;
    if rms > 0.0 && !quant.is_empty() {
        let mut o = 4;
        loop {
            let mut cand: Option<(f64, f64)> = best.map(|(u, _)| apply(o, u).map(|r| (u, r.1))).transpose()?;
            for unit in scale_grid(rms) {
                let (_, err) = apply(o, unit)?;
                if cand.is_none_or(|(_, e)| err < e) {
                    cand = Some((unit, err));
                }
            }
            let (u, e) = cand.expect("the scale grid is not empty");
            best = Some(refine(o, u, e)?);
            if o >= order {
                break;
            }
            o *= 4;
        }
    }
    let unit = best.map_or(rms.max(1e-12), |(u, _)| u);
    let (mut q, err) = apply(order, unit)?;
    let signal: f64 = bins.iter().map(|b| b.norm_sqr()).sum();

    t.inv.process(&mut q);
    q.iter_mut().for_each(|b| *b *= norm);
    let mut samples = Vec::with_capacity(geom.symbol());
    samples.extend_from_slice(&q[n - geom.cp..]);
    samples.extend_from_slice(&q);
    Ok(QuantizedSymbol { samples, error_energy: err, signal_energy: signal })
}

/// Quantizes one symbol (CP plus body) and returns the new samples with the
/// RMS error of the bins relative to their RMS value.
pub fn qam_quantize(symbol: &[Complex64], config: &EmulationConfig, channel: u8) -> Result<(Vec<Complex64>, f64)> {
    let geom = config.geometry()?;
    let order = config
        .qam_order
        .points()
        .ok_or_else(|| Error::Config("QAM quantization requested with qam_order off".into()))?;
    let map = BinMap::new(config, channel, &geom)?;
    let q = quantize_symbol(symbol, order, &map, &geom)?;
    let evm = if q.signal_energy > 0.0 { (q.error_energy / q.signal_energy).sqrt() } else { 0.0 };
    Ok((q.samples, evm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emulation::QamOrder;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn naive_idft(bins: &[Complex64]) -> Vec<Complex64> {
        let n = bins.len();
        (0..n)
            .map(|t| {
                bins.iter()
                    .enumerate()
                    .map(|(k, &b)| b * Complex64::from_polar(1.0, 2.0 * PI * (k * t) as f64 / n as f64))
                    .sum::<Complex64>()
                    / (n as f64).sqrt()
            })
            .collect()
    }

    fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(t, &v)| v * Complex64::from_polar(1.0, -2.0 * PI * (k * t) as f64 / n as f64))
                    .sum::<Complex64>()
                    / (n as f64).sqrt()
            })
            .collect()
    }

    fn with_cp(body: &[Complex64]) -> Vec<Complex64> {
        let mut s = body[48..].to_vec();
        s.extend_from_slice(body);
        s
    }

    #[test]
    fn unit_power_nearest_point() {
        let c = Constellation::unit_power(4).unwrap();
        let q = c.nearest(Complex64::new(0.9, 0.1));
        assert!((q.re - FRAC_1_SQRT_2).abs() < 1e-15 && (q.im - FRAC_1_SQRT_2).abs() < 1e-15);
        for m in [4, 16, 64] {
            let c = Constellation::unit_power(m).unwrap();
            let p = c.points();
            assert_eq!(p.len(), m);
            let pow = p.iter().map(|z| z.norm_sqr()).sum::<f64>() / m as f64;
            assert!((pow - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn on_grid_spectrum_is_a_fixed_point() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let c = Constellation::new(16, 0.25).unwrap();
        let pts = c.points();
        let bins: Vec<Complex64> = (0..64).map(|_| pts[rng.random_range(0..16)]).collect();
        let sym = with_cp(&naive_idft(&bins));
        let cfg = EmulationConfig { qam_order: QamOrder::Qam16, bin_policy: BinPolicy::AllBins, ..Default::default() };
        let (q, evm) = qam_quantize(&sym, &cfg, 38).unwrap();
        assert!(evm < 1e-12, "evm {evm}");
        for (a, b) in q.iter().zip(&sym) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn random_symbol_against_naive_transform() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let body: Vec<Complex64> = (0..64).map(|_| Complex64::from_polar(1.0, rng.random_range(-PI..PI))).collect();
        let sym = with_cp(&body);
        let mut last = f64::INFINITY;
        for order in [QamOrder::Qam4, QamOrder::Qam16, QamOrder::Qam64] {
            let cfg = EmulationConfig { qam_order: order, bin_policy: BinPolicy::AllBins, ..Default::default() };
            let (q, evm) = qam_quantize(&sym, &cfg, 38).unwrap();
            assert!(evm > 0.0 && evm <= last, "{order:?} evm {evm} after {last}");
            last = evm;
            assert_eq!(q[..16], q[64..]);
            // the output spectrum must sit on one scaled grid
            let spectrum = naive_dft(&q[16..]);
            let orig = naive_dft(&body);
            let err: f64 = spectrum.iter().zip(&orig).map(|(a, b)| (a - b).norm_sqr()).sum();
            let pow: f64 = orig.iter().map(|b| b.norm_sqr()).sum();
            assert!(((err / pow).sqrt() - evm).abs() < 1e-9);
            let unit = spectrum.iter().map(|z| z.re.abs().min(z.im.abs())).fold(f64::INFINITY, f64::min);
            let grid = Constellation::new(order.points().unwrap(), unit).unwrap();
            for z in &spectrum {
                let n = grid.nearest(*z);
                assert!((n - z).norm() < 1e-9 * unit.max(1.0), "{z} off grid");
            }
        }
    }

    #[test]
    fn strict_policy_bins() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let body: Vec<Complex64> = (0..64).map(|_| Complex64::from_polar(1.0, rng.random_range(-PI..PI))).collect();
        let sym = with_cp(&body);
        let cfg = EmulationConfig { bin_policy: BinPolicy::Strict, ..Default::default() };
        let (q, _) = qam_quantize(&sym, &cfg, 38).unwrap();
        let spectrum = naive_dft(&q[16..]);
        let orig = naive_dft(&body);
        // BLE bin k is WiFi subcarrier k - 3 on channel 38
        let bin = |k: i32| k.rem_euclid(64) as usize;
        assert!(spectrum[bin(3)].norm() < 1e-12, "WiFi DC must be empty");
        assert!(spectrum[bin(30)].norm() < 1e-12, "guard band must be empty");
        assert!((spectrum[bin(10)] - orig[bin(10)]).norm() > 1e-9, "pilot -7 is fixed");
        assert!((spectrum[bin(-12)] - orig[bin(-12)]).norm() < 1e-9, "outside window passes");
        assert!(qam_quantize(&sym, &cfg, 37).is_err());
    }

    #[test]
    fn window_policy_touches_only_the_ble_band() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        let body: Vec<Complex64> = (0..64).map(|_| Complex64::from_polar(1.0, rng.random_range(-PI..PI))).collect();
        let sym = with_cp(&body);
        let cfg = EmulationConfig::default();
        assert_eq!(cfg.bin_policy, BinPolicy::Window);
        let (q, evm) = qam_quantize(&sym, &cfg, 37).unwrap();
        assert!(evm > 0.0 && evm < 1.0);
        assert_eq!(q[..16], q[64..]);
        let spectrum = naive_dft(&q[16..]);
        let orig = naive_dft(&body);
        let changed: Vec<i32> = (-32..32)
            .filter(|&k: &i32| (spectrum[k.rem_euclid(64) as usize] - orig[k.rem_euclid(64) as usize]).norm() > 1e-9)
            .collect();
        assert!(!changed.is_empty());
        assert!(changed.iter().all(|k| k.abs() <= 3), "{changed:?}");
    }

    #[test]
    fn wrong_length_is_shape_error() {
        let cfg = EmulationConfig::default();
        assert!(matches!(qam_quantize(&[Complex64::new(1.0, 0.0); 79], &cfg, 38), Err(Error::Shape(_))));
    }
}

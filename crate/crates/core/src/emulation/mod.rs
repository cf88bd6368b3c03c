//! Turning a BLE phase trajectory into WiFi OFDM symbols.
//!
//! Each 4 µs OFDM symbol (16 samples of cyclic prefix plus a 64-sample body at
//! 20 MHz) carries one 4-bit BLE symbol, i.e. eight 0.5 µs phase ladders.
//! Because the last 0.8 µs of every symbol must repeat its first 0.8 µs, the
//! trajectory is rebuilt symbol by symbol (see [`constrain`]), optionally
//! complemented by delayed replicas ([`supplementary`]) and snapped to a QAM
//! grid ([`qam`]).

pub mod constrain;
pub mod qam;
pub mod supplementary;
pub mod waveform;

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ble::AdvertisingPacket;
use crate::error::{Error, Result};
use crate::Complex64;

pub use constrain::{apply_cp_constraint, constrain_bits, EmulatedSymbol};
pub use qam::{qam_quantize, Constellation};
pub use supplementary::make_supplementary;
pub use waveform::{synthesize_waveform, unconstrained_trajectory, Trajectory};

/// Delays of the supplementary frames, in seconds.
pub const SUPPLEMENTARY_DELAYS: [f64; 2] = [0.2e-6, 0.3e-6];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// CP copy only; the free 0.2 µs keeps the shift of the symbol's first bit.
    Basic,
    /// The free 0.2 µs before the CP copy is re-chosen so b3 survives delayed decoding there.
    Adjusted,
    /// Adjusted plus two replicas delayed by 0.2 µs and 0.3 µs.
    Enhanced,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Basic, Variant::Adjusted, Variant::Enhanced];

    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Basic => "basic",
            Variant::Adjusted => "adjusted",
            Variant::Enhanced => "enhanced",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "basic" => Ok(Variant::Basic),
            "adjusted" => Ok(Variant::Adjusted),
            "enhanced" => Ok(Variant::Enhanced),
            _ => Err(Error::Config(format!("unknown variant {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QamOrder {
    Off,
    #[serde(rename = "4")]
    Qam4,
    #[serde(rename = "16")]
    Qam16,
    #[serde(rename = "64")]
    Qam64,
}

impl QamOrder {
    pub fn points(&self) -> Option<usize> {
        match self {
            QamOrder::Off => None,
            QamOrder::Qam4 => Some(4),
            QamOrder::Qam16 => Some(16),
            QamOrder::Qam64 => Some(64),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            QamOrder::Off => "off",
            QamOrder::Qam4 => "4",
            QamOrder::Qam16 => "16",
            QamOrder::Qam64 => "64",
        }
    }
}

impl FromStr for QamOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "off" | "0" => Ok(QamOrder::Off),
            "4" => Ok(QamOrder::Qam4),
            "16" => Ok(QamOrder::Qam16),
            "64" => Ok(QamOrder::Qam64),
            _ => Err(Error::Config(format!("unsupported QAM order {s:?}"))),
        }
    }
}

/// Which FFT bins the quantizer touches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinPolicy {
    /// Every one of the 64 bins snaps to the constellation.
    AllBins,
    /// Only the bins within ±`window_half_width` of the BLE carrier are
    /// quantized; the rest pass through.
    Window,
    /// Only the bins within ±1 MHz of the BLE carrier are quantized; 802.11 null
    /// bins are zeroed, pilots fixed, everything else passes through.
    Strict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmulationConfig {
    pub variant: Variant,
    pub qam_order: QamOrder,
    /// Hz.
    pub sample_rate: f64,
    /// Seconds.
    pub symbol_body: f64,
    /// Seconds.
    pub cp_length: f64,
    pub bin_policy: BinPolicy,
    /// Half-width of the BLE band in FFT bins, centred on the BLE carrier.
    pub window_half_width: usize,
}

impl Default for EmulationConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Adjusted,
            qam_order: QamOrder::Qam64,
            sample_rate: 20e6,
            symbol_body: 3.2e-6,
            cp_length: 0.8e-6,
            bin_policy: BinPolicy::Window,
            window_half_width: 3,
        }
    }
}

/// Sample counts derived from an [`EmulationConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SymbolGeometry {
    pub body: usize,
    pub cp: usize,
    /// Samples per 0.5 µs ladder.
    pub ladder: usize,
    /// Samples per 0.1 µs.
    pub tenth_us: usize,
}

impl SymbolGeometry {
    pub fn symbol(&self) -> usize {
        self.body + self.cp
    }

    /// First sample of ladder x6 that the CP copy pins ([3.2, 3.5) µs).
    pub fn pinned_start(&self) -> usize {
        self.body
    }
}

fn integral(x: f64, what: &str) -> Result<usize> {
    let r = x.round();
    if r < 1.0 || (x - r).abs() > 1e-6 {
        return Err(Error::Config(format!("{what} = {x} samples is not a positive integer")));
    }
    Ok(r as usize)
}

impl EmulationConfig {
    pub fn with_variant(variant: Variant, qam_order: QamOrder) -> Self {
        Self { variant, qam_order, ..Self::default() }
    }

    pub fn geometry(&self) -> Result<SymbolGeometry> {
        if (self.symbol_body - 3.2e-6).abs() > 1e-12 || (self.cp_length - 0.8e-6).abs() > 1e-12 {
            return Err(Error::Config("one BLE symbol needs a 3.2 µs body and a 0.8 µs cyclic prefix".into()));
        }
        let g = SymbolGeometry {
            body: integral(self.sample_rate * self.symbol_body, "symbol body")?,
            cp: integral(self.sample_rate * self.cp_length, "cyclic prefix")?,
            ladder: integral(self.sample_rate * 0.5e-6, "ladder")?,
            tenth_us: integral(self.sample_rate * 0.1e-6, "0.1 µs")?,
        };
        if g.body <= 2 * self.window_half_width + 1 {
            return Err(Error::Config("BLE window wider than the FFT".into()));
        }
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry().map(|_| ())
    }

    pub fn samples_per_us(&self) -> f64 {
        self.sample_rate * 1e-6
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameRole {
    Beacon1,
    Beacon2,
    Beacon3,
}

/// Complex baseband samples of one emulated WiFi frame.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveformFrame {
    pub samples: Vec<Complex64>,
    pub role: FrameRole,
    /// Seconds.
    pub built_in_delay: f64,
    pub evm: f64,
    pub samples_per_us: f64,
    pub symbol_len: usize,
}

impl WaveformFrame {
    /// Number of samples the built-in delay spans.
    pub fn delay_samples(&self) -> usize {
        (self.built_in_delay * 1e6 * self.samples_per_us).round() as usize
    }

    /// `cp` leading samples of every symbol equal the last `cp` samples of it.
    pub fn cp_holds(&self, cp: usize) -> bool {
        self.samples.chunks(self.symbol_len).all(|s| s.len() == self.symbol_len && s[..cp] == s[self.symbol_len - cp..])
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(RawFrame::from(self)).expect("frame serializes")
    }

    pub fn from_json(value: serde_json::Value) -> Result<Self> {
        let raw: RawFrame = serde_json::from_value(value)?;
        if !(raw.samples_per_us > 0.0) || raw.symbol_len == 0 || raw.samples.is_empty() {
            return Err(Error::Config("frame needs samples, a sample rate and a symbol length".into()));
        }
        Ok(Self {
            samples: raw.samples.iter().map(|&[re, im]| Complex64::new(re, im)).collect(),
            role: raw.role,
            built_in_delay: raw.delay_s,
            evm: raw.evm,
            samples_per_us: raw.samples_per_us,
            symbol_len: raw.symbol_len,
        })
    }

    /// Interleaved little-endian float32 I/Q.
    pub fn write_f32_le<W: Write>(&self, mut w: W) -> Result<()> {
        for c in &self.samples {
            w.write_all(&(c.re as f32).to_le_bytes())?;
            w.write_all(&(c.im as f32).to_le_bytes())?;
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFrame {
    role: FrameRole,
    delay_s: f64,
    evm: f64,
    samples_per_us: f64,
    symbol_len: usize,
    samples: Vec<[f64; 2]>,
}

impl From<&WaveformFrame> for RawFrame {
    fn from(f: &WaveformFrame) -> Self {
        Self {
            role: f.role,
            delay_s: f.built_in_delay,
            evm: f.evm,
            samples_per_us: f.samples_per_us,
            symbol_len: f.symbol_len,
            samples: f.samples.iter().map(|c| [c.re, c.im]).collect(),
        }
    }
}

/// On-air bits of a packet padded to whole 4-bit symbols by repeating the last bit,
/// which continues the final phase slope.
pub fn padded_bits(bits: &[bool]) -> Vec<bool> {
    let mut out = bits.to_vec();
    let last = bits.last().copied().unwrap_or(false);
    while !out.len().is_multiple_of(4) {
        out.push(last);
    }
    out
}

/// Builds the frames for `packet`: one for basic and adjusted, three for enhanced.
pub fn emulate_packet(packet: &AdvertisingPacket, config: &EmulationConfig) -> Result<Vec<WaveformFrame>> {
    emulate_bits(&packet.whitened_bits, packet.channel_index, config)
}

pub fn emulate_bits(bits: &[bool], channel: u8, config: &EmulationConfig) -> Result<Vec<WaveformFrame>> {
    let geom = config.geometry()?;
    if bits.is_empty() {
        return Err(Error::Shape("no bits to emulate".into()));
    }
    let bits = padded_bits(bits);
    let base = constrain_bits(&bits, config.variant, 0.0, &geom);
    let mut trajectories = vec![(FrameRole::Beacon1, 0.0, base.clone())];
    if config.variant == Variant::Enhanced {
        for (role, d) in [FrameRole::Beacon2, FrameRole::Beacon3].into_iter().zip(SUPPLEMENTARY_DELAYS) {
            trajectories.push((role, d, make_supplementary(&base, d, &geom)?));
        }
    }
    let bin_map = qam::BinMap::new(config, channel, &geom)?;
    trajectories
        .into_iter()
        .map(|(role, delay, traj)| {
            let mut samples = synthesize_waveform(&traj);
            let evm = match config.qam_order.points() {
                None => 0.0,
                Some(m) => {
                    let (mut err, mut pow) = (0.0, 0.0);
                    for sym in samples.chunks_mut(geom.symbol()) {
                        let q = qam::quantize_symbol(sym, m, &bin_map, &geom)?;
                        err += q.error_energy;
                        pow += q.signal_energy;
                        sym.copy_from_slice(&q.samples);
                    }
                    if pow > 0.0 {
                        (err / pow).sqrt()
                    } else {
                        0.0
                    }
                }
            };
            Ok(WaveformFrame {
                samples,
                role,
                built_in_delay: delay,
                evm,
                samples_per_us: config.samples_per_us(),
                symbol_len: geom.symbol(),
            })
        })
        .collect()
}

//! The BLE receiver as a 2 Msps phase sampler.
//!
//! Samples fall at t_k = τ + 0.5k µs. A bit is the sign of the wrapped phase
//! change between two consecutive samples, and which two depends on the
//! half-bit alignment the receiver locked onto:
//!
//! * early: (τ + i − 0.5, τ + i) µs, the change across the bit's first half;
//! * delayed: (τ + i, τ + i + 0.5) µs, the change across its second half.
//!
//! With eight ladders per OFDM symbol, the delayed decision for b3 reads the
//! split ladder x6 at τ + 3 µs: its first 0.2 µs (segment A, τ < 0.2 µs) is free,
//! its last 0.3 µs (segment B) is pinned by the cyclic prefix.

pub mod analytic;
pub mod prr;

use std::ops::Range;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::ble::packet::crc_matches;
use crate::ble::AdvertisingPacket;
use crate::emulation::constrain::wrap_phase;
use crate::emulation::{padded_bits, FrameRole, WaveformFrame};
use crate::error::{Error, Result};
use crate::rng::{rng_for, SimRng};
use crate::Complex64;

pub use analytic::{analytic_decode_prob, P_SEGMENT_A, P_SEGMENT_B};
pub use prr::{estimate_prr, stability_trace, PrrEstimate, StabilityTrace};

/// Half a bit, in µs.
const HALF_BIT_US: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecodeMode {
    Early,
    Delayed,
}

/// Receiver timing for one packet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingContext {
    /// Sampling offset τ in seconds, within [0, 0.5 µs).
    pub offset: f64,
    pub mode: DecodeMode,
    pub noise_snr_db: Option<f64>,
    pub seed: u64,
}

impl SamplingContext {
    pub fn new(offset: f64, mode: DecodeMode) -> Result<Self> {
        if !(0.0..0.5e-6).contains(&offset) {
            return Err(Error::Config(format!("offset {} µs outside [0, 0.5)", offset * 1e6)));
        }
        Ok(Self { offset, mode, noise_snr_db: None, seed: 0 })
    }

    pub fn with_noise(mut self, snr_db: Option<f64>, seed: u64) -> Self {
        self.noise_snr_db = snr_db;
        self.seed = seed;
        self
    }

    /// Draws τ uniformly and the mode with probability 1/2 each.
    pub fn draw(rng: &mut SimRng, noise_snr_db: Option<f64>) -> Self {
        let offset = rng.random_range(0.0..0.5e-6);
        let mode = if rng.random_bool(0.5) { DecodeMode::Early } else { DecodeMode::Delayed };
        Self { offset, mode, noise_snr_db, seed: rng.random() }
    }

    pub fn offset_us(&self) -> f64 {
        self.offset * 1e6
    }
}

/// What a decode is checked against.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeTarget {
    /// Transmitted bits, padded to whole symbols.
    pub bits: Vec<bool>,
    /// Bits that must be right for the packet to count.
    pub checked: Range<usize>,
    /// Channel for the CRC check; `None` skips it.
    pub channel: Option<u8>,
    /// Bits covered by the CRC check.
    pub packet_len: usize,
}

impl DecodeTarget {
    /// Access address through CRC must be right; the preamble only trains the receiver.
    pub fn from_packet(packet: &AdvertisingPacket) -> Self {
        Self {
            bits: padded_bits(&packet.whitened_bits),
            checked: crate::ble::packet::ACCESS_ADDRESS_BIT..packet.bit_len(),
            channel: Some(packet.channel_index),
            packet_len: packet.bit_len(),
        }
    }

    pub fn raw(bits: Vec<bool>, checked: Range<usize>) -> Self {
        let n = bits.len();
        Self { bits, checked, channel: None, packet_len: n }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeResult {
    pub bits: Vec<bool>,
    pub packet_ok: bool,
    /// Indices inside the checked range where the decoded bit is wrong.
    pub per_bit_errors: Vec<usize>,
}

/// Phases seen at the 2 Msps sample instants. `phases[j]` is the phase at
/// t_{j−1}, so a stream for n bits holds 2n + 1 values.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseStream {
    pub phases: Vec<f64>,
}

impl PhaseStream {
    pub fn bit_capacity(&self) -> usize {
        self.phases.len().saturating_sub(1) / 2
    }
}

/// Offset of the frame's content relative to its own start, after the
/// receiver locks with the same mode onto a frame delayed by `d`.
fn effective_offset_us(frame: &WaveformFrame, ctx: &SamplingContext) -> f64 {
    (ctx.offset_us() - frame.built_in_delay * 1e6).rem_euclid(HALF_BIT_US)
}

fn sample_index(frame: &WaveformFrame, t_us: f64) -> usize {
    let origin = frame.delay_samples() as f64;
    let raw = origin + (t_us * frame.samples_per_us + 1e-6).floor();
    raw.clamp(0.0, (frame.samples.len() - 1) as f64) as usize
}

fn noise_sigma(frame: &WaveformFrame, snr_db: f64) -> f64 {
    let power = frame.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / frame.samples.len() as f64;
    (power / 10f64.powf(snr_db / 10.0) / 2.0).sqrt()
}

fn role_tag(role: FrameRole) -> u64 {
    match role {
        FrameRole::Beacon1 => 1,
        FrameRole::Beacon2 => 2,
        FrameRole::Beacon3 => 3,
    }
}

/// Lazily produces the phase at each instant, with optional AWGN drawn only there.
struct Sampler<'a> {
    frame: &'a WaveformFrame,
    tau: f64,
    noise: Option<(f64, SimRng)>,
}

impl<'a> Sampler<'a> {
    fn new(frame: &'a WaveformFrame, ctx: &SamplingContext) -> Self {
        // the standard normals depend only on (seed, role); σ scales them, so
        // streams at different SNRs are paired sample by sample
        let noise = ctx.noise_snr_db.map(|snr| (noise_sigma(frame, snr), rng_for(ctx.seed, &[role_tag(frame.role)])));
        Self { frame, tau: effective_offset_us(frame, ctx), noise }
    }

    /// Phase at t_{j−1}, to be called for consecutive j starting at 0.
    fn phase(&mut self, j: usize) -> f64 {
        let t = self.tau + HALF_BIT_US * (j as f64 - 1.0);
        let mut s = self.frame.samples[sample_index(self.frame, t)];
        if let Some((sigma, rng)) = self.noise.as_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            s += Complex64::new(re, im) * *sigma;
        }
        s.arg()
    }
}

pub fn sample_phases(frame: &WaveformFrame, n_bits: usize, ctx: &SamplingContext) -> PhaseStream {
    let mut s = Sampler::new(frame, ctx);
    PhaseStream { phases: (0..2 * n_bits + 1).map(|j| s.phase(j)).collect() }
}

fn bit_from(a: f64, b: f64) -> bool {
    wrap_phase(b - a) > 0.0
}

/// Decides `n_bits` bits from a phase stream.
pub fn decode_bits(stream: &PhaseStream, mode: DecodeMode, n_bits: usize) -> Result<Vec<bool>> {
    if stream.bit_capacity() < n_bits {
        return Err(Error::Shape(format!("{} phase samples cannot carry {n_bits} bits", stream.phases.len())));
    }
    let p = &stream.phases;
    Ok((0..n_bits)
        .map(|i| match mode {
            DecodeMode::Early => bit_from(p[2 * i], p[2 * i + 1]),
            DecodeMode::Delayed => bit_from(p[2 * i + 1], p[2 * i + 2]),
        })
        .collect())
}

/// Decodes a phase stream and scores it against `target`.
pub fn decode(stream: &PhaseStream, ctx: &SamplingContext, target: &DecodeTarget) -> Result<DecodeResult> {
    let bits = decode_bits(stream, ctx.mode, target.bits.len())?;
    let per_bit_errors: Vec<usize> = target.checked.clone().filter(|&i| bits[i] != target.bits[i]).collect();
    let crc_ok = target.channel.is_none_or(|ch| crc_matches(&bits[..target.packet_len], ch));
    Ok(DecodeResult { packet_ok: per_bit_errors.is_empty() && crc_ok, per_bit_errors, bits })
}

pub fn decode_frame(frame: &WaveformFrame, target: &DecodeTarget, ctx: &SamplingContext) -> Result<DecodeResult> {
    let stream = sample_phases(frame, target.bits.len(), ctx);
    decode(&stream, ctx, target)
}

fn check_enhanced_roles(frames: &[WaveformFrame]) -> Result<()> {
    let roles = [FrameRole::Beacon1, FrameRole::Beacon2, FrameRole::Beacon3];
    if frames.len() != 3 || roles.iter().any(|r| !frames.iter().any(|f| f.role == *r)) {
        return Err(Error::Config("enhanced decoding needs beacon1, beacon2 and beacon3".into()));
    }
    Ok(())
}

/// The packet is received if any of the three frames decodes fully. Returns
/// the first successful frame's result, or beacon1's when all fail.
pub fn decode_enhanced(frames: &[WaveformFrame], target: &DecodeTarget, ctx: &SamplingContext) -> Result<DecodeResult> {
    check_enhanced_roles(frames)?;
    let mut sorted: Vec<&WaveformFrame> = frames.iter().collect();
    sorted.sort_by_key(|f| role_tag(f.role));
    let mut first = None;
    for f in sorted {
        let r = decode_frame(f, target, ctx)?;
        if r.packet_ok {
            return Ok(r);
        }
        first.get_or_insert(r);
    }
    Ok(first.expect("three frames"))
}

/// Single-frame or enhanced decoding, depending on how many frames there are.
pub fn decode_frames(frames: &[WaveformFrame], target: &DecodeTarget, ctx: &SamplingContext) -> Result<DecodeResult> {
    match frames.len() {
        1 => decode_frame(&frames[0], target, ctx),
        _ => decode_enhanced(frames, target, ctx),
    }
}

/// Whether every checked bit of one frame decodes, stopping at the first error.
pub(crate) fn frame_clean(frame: &WaveformFrame, target: &DecodeTarget, ctx: &SamplingContext) -> bool {
    let mut s = Sampler::new(frame, ctx);
    let off = (ctx.mode == DecodeMode::Delayed) as usize;
    let (start, end) = (target.checked.start, target.checked.end);
    if start >= end {
        return true;
    }
    // bit i is decided by the pair (2i + off, 2i + off + 1)
    let mut prev = s.skip_to(2 * start + off);
    for i in start..end {
        let cur = s.phase(2 * i + off + 1);
        if bit_from(prev, cur) != target.bits[i] {
            return false;
        }
        if i + 1 < end {
            prev = s.phase(2 * i + off + 2);
        }
    }
    true
}

impl Sampler<'_> {
    /// Draws (and discards the noise of) instants before `j`, returning the phase at `j`.
    fn skip_to(&mut self, j: usize) -> f64 {
        for k in 0..j {
            self.phase(k);
        }
        self.phase(j)
    }
}

/// Fast success test for a (possibly enhanced) frame set.
pub(crate) fn frames_clean(frames: &[WaveformFrame], target: &DecodeTarget, ctx: &SamplingContext) -> bool {
    frames.iter().any(|f| frame_clean(f, target, ctx))
}

/// Reads an advertising packet out of freshly decoded bits, trusting the
/// length field to find its end. The preamble only trains the receiver, so it
/// is restored rather than checked.
pub fn recover_packet(bits: &[bool], channel: u8) -> Result<AdvertisingPacket> {
    use crate::ble::packet::{bits_to_bytes, whiten, PDU_BIT, PREAMBLE};
    if bits.len() < PDU_BIT + 16 {
        return Err(Error::MalformedPacket(format!("{} bits hold no PDU header", bits.len())));
    }
    let mut header = bits[PDU_BIT..PDU_BIT + 16].to_vec();
    whiten(&mut header, channel);
    let len = bits_to_bytes(&header)[1] as usize;
    let total = PDU_BIT + 8 * (2 + len + 3);
    if bits.len() < total {
        return Err(Error::MalformedPacket(format!("length field {len} runs past {} bits", bits.len())));
    }
    let mut on_air = bits[..total].to_vec();
    for (i, b) in on_air.iter_mut().take(8).enumerate() {
        *b = PREAMBLE >> i & 1 == 1;
    }
    AdvertisingPacket::parse(&on_air, channel)
}

/// Decodes every frame at `ctx` and returns the first packet that survives
/// the CRC, with the role of the frame that carried it.
pub fn receive(
    frames: &[WaveformFrame],
    channel: u8,
    ctx: &SamplingContext,
) -> Result<Option<(FrameRole, AdvertisingPacket)>> {
    let mut sorted: Vec<&WaveformFrame> = frames.iter().collect();
    sorted.sort_by_key(|f| role_tag(f.role));
    for f in sorted {
        // one bit per microsecond
        let n = (f.samples.len() as f64 / f.samples_per_us).round() as usize;
        let bits = decode_bits(&sample_phases(f, n, ctx), ctx.mode, n)?;
        if let Ok(p) = recover_packet(&bits, channel) {
            return Ok(Some((f.role, p)));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ble::{bits_to_phase_ladders, split_fine_grained};
    use crate::emulation::{synthesize_waveform, unconstrained_trajectory};

    fn frame_from_bits(bits: &[bool], fine: bool) -> WaveformFrame {
        let c = bits_to_phase_ladders(bits, 0.0);
        let seq = if fine { split_fine_grained(&c) } else { c };
        let t = unconstrained_trajectory(&seq, 20.0);
        WaveformFrame {
            samples: synthesize_waveform(&t),
            role: FrameRole::Beacon1,
            built_in_delay: 0.0,
            evm: 0.0,
            samples_per_us: 20.0,
            symbol_len: 80,
        }
    }

    fn offsets() -> impl Iterator<Item = f64> {
        (0..50).map(|i| i as f64 * 0.01e-6)
    }

    #[test]
    fn all_ones_staircase() {
        let bits = vec![true; 16];
        let f = frame_from_bits(&bits, true);
        let target = DecodeTarget::raw(bits.clone(), 1..16);
        for tau in offsets() {
            for mode in [DecodeMode::Early, DecodeMode::Delayed] {
                let ctx = SamplingContext::new(tau, mode).unwrap();
                let r = decode_frame(&f, &target, &ctx).unwrap();
                assert!(r.packet_ok, "τ={tau} {mode:?}");
                assert!(frame_clean(&f, &target, &ctx));
            }
        }
    }

    #[test]
    fn short_stream_is_shape_error() {
        let s = PhaseStream { phases: vec![0.0; 6] };
        assert!(decode_bits(&s, DecodeMode::Early, 3).is_err());
        assert!(decode_bits(&s, DecodeMode::Early, 2).is_ok());
    }

    #[test]
    fn offset_out_of_range() {
        assert!(SamplingContext::new(0.5e-6, DecodeMode::Early).is_err());
        assert!(SamplingContext::new(-1e-9, DecodeMode::Early).is_err());
    }

    #[test]
    fn fast_path_agrees_with_full_decode() {
        let bits: Vec<bool> = (0..40).map(|i| (i * 5 + i / 3) % 3 == 0).collect();
        let cfg = crate::emulation::EmulationConfig::with_variant(
            crate::emulation::Variant::Basic,
            crate::emulation::QamOrder::Off,
        );
        let frames = crate::emulation::emulate_bits(&bits, 38, &cfg).unwrap();
        let target = DecodeTarget::raw(bits.clone(), 4..40);
        for tau in offsets() {
            for mode in [DecodeMode::Early, DecodeMode::Delayed] {
                let ctx = SamplingContext::new(tau, mode).unwrap().with_noise(Some(8.0), 11);
                let full = decode_frame(&frames[0], &target, &ctx).unwrap();
                assert_eq!(full.packet_ok, frame_clean(&frames[0], &target, &ctx), "τ={tau} {mode:?}");
            }
        }
    }

    #[test]
    fn receive_recovers_the_packet() {
        use crate::emulation::{emulate_packet, EmulationConfig, QamOrder, Variant};
        let pkt = crate::ble::canonical_packet(39).unwrap();
        let frames = emulate_packet(&pkt, &EmulationConfig::with_variant(Variant::Enhanced, QamOrder::Off)).unwrap();
        for k in 0..10 {
            for mode in [DecodeMode::Early, DecodeMode::Delayed] {
                let ctx = SamplingContext::new(k as f64 * 0.05e-6, mode).unwrap();
                let (_, got) = receive(&frames, 39, &ctx).unwrap().expect("enhanced set always decodes");
                assert_eq!(got, pkt);
            }
        }
        let mut bits = pkt.whitened_bits.clone();
        bits.extend([true; 13]);
        bits[3] = !bits[3];
        assert_eq!(recover_packet(&bits, 39).unwrap(), pkt);
        bits[200] = !bits[200];
        assert!(recover_packet(&bits, 39).is_err());
        assert!(recover_packet(&bits[..50], 39).is_err());
    }
}

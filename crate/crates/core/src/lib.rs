//! Emulating BLE iBeacon advertisements with WiFi OFDM symbols, a model of the
//! BLE receiver that decodes them, and simulations of RSS-based localization
//! under impersonation attacks.

// `!(x > 0.0)` is used on purpose so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attack;
pub mod ble;
pub mod emulation;
pub mod error;
pub mod localization;
pub mod radio;
pub mod receiver;
pub mod rng;

pub use rustfft::num_complex::Complex64;

pub use attack::{run_attack, AttackMode, AttackReport, ScenarioConfig};
pub use ble::{
    assemble_packet, bits_to_phase_ladders, build_ibeacon_payload, canonical_packet, split_fine_grained,
    AdvertisingPacket, IBeaconIdentity, PhaseLadderSequence,
};
pub use emulation::{emulate_packet, EmulationConfig, QamOrder, Variant, WaveformFrame};
pub use error::{Error, Result};
pub use localization::{estimate_distance, fake_distance, multilaterate, wknn_locate, FingerprintDatabase};
pub use radio::{PathLossModel, Placement, RssObservation};
pub use receiver::{
    analytic_decode_prob, decode, decode_enhanced, decode_frame, estimate_prr, stability_trace, DecodeMode,
    DecodeResult, SamplingContext,
};

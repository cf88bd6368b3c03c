//! iBeacon advertising packets and their phase-ladder representation.

pub mod ibeacon;
pub mod ladder;
pub mod packet;

pub use ibeacon::{build_ibeacon_payload, IBeaconIdentity};
pub use ladder::{bits_to_phase_ladders, split_fine_grained, PhaseLadderSequence};
pub use packet::{assemble_packet, assemble_packet_with_header, crc24, whiten, AdvertisingPacket};

/// Proximity UUID, major, minor and power byte of the reference beacon used
/// by the PRR experiments and benches.
pub fn canonical_identity() -> IBeaconIdentity {
    let uuid = [0xE2, 0xC5, 0x6D, 0xB5, 0xDF, 0xFB, 0x48, 0xD2, 0xB0, 0x60, 0xD0, 0xF5, 0xA7, 0x10, 0x96, 0xE0];
    IBeaconIdentity::new(uuid, 1, 2, -59).expect("constant identity is valid")
}

pub const CANONICAL_ADDRESS: [u8; 6] = [0x11, 0x22, 0x33, 0x44, 0x55, 0x66];

/// The reference beacon's advertisement on `channel`.
pub fn canonical_packet(channel: u8) -> crate::Result<AdvertisingPacket> {
    assemble_packet(&build_ibeacon_payload(&canonical_identity()), CANONICAL_ADDRESS, channel)
}

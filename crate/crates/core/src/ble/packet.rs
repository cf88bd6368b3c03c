//! BLE 1M advertising channel framing: CRC-24, data whitening and on-air bit order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PREAMBLE: u8 = 0xAA;
pub const ADV_ACCESS_ADDRESS: u32 = 0x8E89BED6;
/// ADV_NONCONN_IND with a random advertiser address (TxAdd set).
pub const ADV_NONCONN_IND_RANDOM: u8 = 0x42;
pub const CRC_INIT: u32 = 0x555555;
pub const MAX_AD_PAYLOAD: usize = 31;
pub const ADVERTISING_CHANNELS: [u8; 3] = [37, 38, 39];

// Bit offsets of the fields inside the on-air bit stream.
pub const ACCESS_ADDRESS_BIT: usize = 8;
pub const PDU_BIT: usize = 40;

fn reflect24(v: u32) -> u32 {
    (v.reverse_bits() >> 8) & 0xFF_FFFF
}

/// CRC-24 over `pdu` (header, address and payload), returned as the three
/// bytes in transmit order. Each byte goes out LSB first like every other field,
/// which makes the register's bit 23 the first CRC bit on air.
///
/// The register runs in reflected form, so bit 0 holds the LFSR cell that is
/// shifted out first and the polynomial 0x00065B becomes 0xDA6000.
pub fn crc24(pdu: &[u8], init: u32) -> [u8; 3] {
    let mut crc = reflect24(init);
    for &byte in pdu {
        crc ^= byte as u32;
        for _ in 0..8 {
            if crc & 1 != 0 {
                crc = (crc >> 1) ^ 0xDA6000;
            } else {
                crc >>= 1;
            }
        }
    }
    let b = crc.to_le_bytes();
    [b[0], b[1], b[2]]
}

pub fn check_channel(channel: u8) -> Result<()> {
    if ADVERTISING_CHANNELS.contains(&channel) {
        Ok(())
    } else {
        Err(Error::InvalidChannel(channel))
    }
}

/// XORs `bits` in place with the whitening sequence for `channel`.
/// The 7-bit LFSR (x^7 + x^4 + 1) starts at `1` followed by the six channel bits.
pub fn whiten(bits: &mut [bool], channel: u8) {
    let mut lfsr = 0x40 | (channel as u32 & 0x3F);
    for b in bits.iter_mut() {
        let out = lfsr & 1;
        lfsr >>= 1;
        if out != 0 {
            lfsr ^= 0x44;
            *b = !*b;
        }
    }
}

pub fn bytes_to_bits(bytes: &[u8]) -> Vec<bool> {
    bytes.iter().flat_map(|&b| (0..8).map(move |i| (b >> i) & 1 == 1)).collect()
}

/// Inverse of [`bytes_to_bits`]. Trailing bits that do not fill a byte are dropped.
pub fn bits_to_bytes(bits: &[bool]) -> Vec<u8> {
    bits.chunks_exact(8).map(|c| c.iter().enumerate().fold(0u8, |acc, (i, &b)| acc | ((b as u8) << i))).collect()
}

/// One advertising packet with all link-layer fields and its whitened on-air bits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdvertisingPacket {
    pub channel_index: u8,
    pub preamble: u8,
    /// Access address bytes in transmit (little endian) order.
    pub access_address: [u8; 4],
    pub pdu_header: [u8; 2],
    pub adv_address: [u8; 6],
    pub ad_payload: Vec<u8>,
    pub crc: [u8; 3],
    /// Preamble through CRC, whitened, first transmitted bit first.
    pub whitened_bits: Vec<bool>,
}

pub fn assemble_packet(payload: &[u8], adv_address: [u8; 6], channel: u8) -> Result<AdvertisingPacket> {
    assemble_packet_with_header(payload, adv_address, channel, ADV_NONCONN_IND_RANDOM)
}

/// Like [`assemble_packet`] with an explicit first header byte (PDU type and flags).
pub fn assemble_packet_with_header(
    payload: &[u8],
    adv_address: [u8; 6],
    channel: u8,
    header0: u8,
) -> Result<AdvertisingPacket> {
    check_channel(channel)?;
    if payload.len() > MAX_AD_PAYLOAD {
        return Err(Error::PayloadTooLong { len: payload.len(), max: MAX_AD_PAYLOAD });
    }
    let pdu_header = [header0, (6 + payload.len()) as u8];
    let mut pdu = Vec::with_capacity(8 + payload.len());
    pdu.extend_from_slice(&pdu_header);
    pdu.extend_from_slice(&adv_address);
    pdu.extend_from_slice(payload);
    let crc = crc24(&pdu, CRC_INIT);

    let access_address = ADV_ACCESS_ADDRESS.to_le_bytes();
    let mut whitened: Vec<bool> = bytes_to_bits(&[PREAMBLE]);
    whitened.extend(bytes_to_bits(&access_address));
    let mut tail = bytes_to_bits(&pdu);
    tail.extend(bytes_to_bits(&crc));
    whiten(&mut tail, channel);
    whitened.extend(tail);

    Ok(AdvertisingPacket {
        channel_index: channel,
        preamble: PREAMBLE,
        access_address,
        pdu_header,
        adv_address,
        ad_payload: payload.to_vec(),
        crc,
        whitened_bits: whitened,
    })
}

/// True when the whitened bits after the access address carry a consistent
/// length field and a matching CRC. The preamble is not looked at.
pub fn crc_matches(bits: &[bool], channel: u8) -> bool {
    if bits.len() <= PDU_BIT + 16 + 24 || !(bits.len() - PDU_BIT).is_multiple_of(8) {
        return false;
    }
    let mut tail = bits[PDU_BIT..].to_vec();
    whiten(&mut tail, channel);
    let body = bits_to_bytes(&tail);
    let len = body[1] as usize;
    if body.len() != 2 + len + 3 {
        return false;
    }
    crc24(&body[..2 + len], CRC_INIT) == body[2 + len..]
}

impl AdvertisingPacket {
    pub fn bit_len(&self) -> usize {
        self.whitened_bits.len()
    }

    /// Parses whitened on-air bits received on `channel`. Fails on a wrong
    /// preamble or access address, an inconsistent length, or a CRC mismatch.
    pub fn parse(bits: &[bool], channel: u8) -> Result<Self> {
        check_channel(channel)?;
        if !bits.len().is_multiple_of(8) || bits.len() < 8 * (1 + 4 + 2 + 6 + 3) {
            return Err(Error::MalformedPacket(format!("{} bits is not a whole packet", bits.len())));
        }
        let head = bits_to_bytes(&bits[..PDU_BIT]);
        if head[0] != PREAMBLE {
            return Err(Error::MalformedPacket(format!("preamble {:#04x}", head[0])));
        }
        let access_address = [head[1], head[2], head[3], head[4]];
        if u32::from_le_bytes(access_address) != ADV_ACCESS_ADDRESS {
            return Err(Error::MalformedPacket("not the advertising access address".into()));
        }
        let mut tail = bits[PDU_BIT..].to_vec();
        whiten(&mut tail, channel);
        let body = bits_to_bytes(&tail);
        let len = body[1] as usize;
        if len < 6 || len - 6 > MAX_AD_PAYLOAD || body.len() != 2 + len + 3 {
            return Err(Error::MalformedPacket(format!("length field {len} vs {} bytes", body.len())));
        }
        let pdu = &body[..2 + len];
        let crc = [body[2 + len], body[3 + len], body[4 + len]];
        if crc24(pdu, CRC_INIT) != crc {
            return Err(Error::MalformedPacket("CRC mismatch".into()));
        }
        let mut adv_address = [0u8; 6];
        adv_address.copy_from_slice(&pdu[2..8]);
        Ok(Self {
            channel_index: channel,
            preamble: head[0],
            access_address,
            pdu_header: [pdu[0], pdu[1]],
            adv_address,
            ad_payload: pdu[8..].to_vec(),
            crc,
            whitened_bits: bits.to_vec(),
        })
    }

    /// Hex strings of every field, for golden files.
    pub fn to_hex_json(&self) -> serde_json::Value {
        serde_json::json!({
            "channel_index": self.channel_index,
            "preamble": hex::encode([self.preamble]),
            "access_address": hex::encode(self.access_address),
            "pdu_header": hex::encode(self.pdu_header),
            "adv_address": hex::encode(self.adv_address),
            "ad_payload": hex::encode(&self.ad_payload),
            "crc": hex::encode(self.crc),
            "on_air": hex::encode(bits_to_bytes(&self.whitened_bits)),
            "bit_count": self.bit_len(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// CRC as the remainder of a GF(2) long division: the register preset
    /// contributes I(x)·x^n and the message M(x)·x^24, first bit highest.
    fn crc_by_division(bits: &[bool], init: u32) -> Vec<bool> {
        let n = bits.len();
        // coefficients of x^0..x^(n+23)
        let mut poly = vec![false; n + 24];
        for k in 0..24 {
            if (init >> k) & 1 == 1 {
                poly[n + k] ^= true;
            }
        }
        for (i, &b) in bits.iter().enumerate() {
            if b {
                poly[24 + n - 1 - i] ^= true;
            }
        }
        let g = [0, 1, 3, 4, 6, 9, 10, 24];
        for deg in (24..n + 24).rev() {
            if poly[deg] {
                for &t in &g {
                    poly[deg - 24 + t] ^= true;
                }
            }
        }
        (0..24).rev().map(|k| poly[k]).collect()
    }

    #[test]
    fn crc_matches_polynomial_division() {
        let pdus: Vec<Vec<u8>> = vec![
            vec![0x42, 0x06, 1, 2, 3, 4, 5, 6],
            vec![0x00, 0x00],
            (0u8..39).map(|i| i.wrapping_mul(37).wrapping_add(11)).collect(),
        ];
        for pdu in pdus {
            let expect = crc_by_division(&bytes_to_bits(&pdu), CRC_INIT);
            assert_eq!(bytes_to_bits(&crc24(&pdu, CRC_INIT)), expect, "pdu {pdu:02x?}");
        }
    }

    #[test]
    fn whitening_matches_reference_sequence() {
        // First 24 whitening bits per channel, taken from a table-driven
        // receiver implementation.
        let seqs =
            [(37, "101100010100101111101010"), (38, "011010111010001100100010"), (39, "111110001110110001010010")];
        for (ch, s) in seqs {
            let mut bits = vec![false; 24];
            whiten(&mut bits, ch);
            let got: String = bits.iter().map(|b| if *b { '1' } else { '0' }).collect();
            assert_eq!(got, s, "channel {ch}");
        }
    }

    #[test]
    fn assemble_round_trip_and_length() {
        let payload: Vec<u8> = (0..30).collect();
        for ch in ADVERTISING_CHANNELS {
            let p = assemble_packet(&payload, [1, 2, 3, 4, 5, 6], ch).unwrap();
            assert_eq!(p.bit_len(), 8 * (1 + 4 + 2 + 6 + 30 + 3));
            assert_eq!(p.pdu_header, [0x42, 36]);
            assert_eq!(AdvertisingPacket::parse(&p.whitened_bits, ch).unwrap(), p);
        }
    }

    #[test]
    fn preamble_and_access_address_on_air() {
        let p = assemble_packet(&[], [0; 6], 37).unwrap();
        let head = bits_to_bytes(&p.whitened_bits[..40]);
        assert_eq!(head, vec![0xAA, 0xD6, 0xBE, 0x89, 0x8E]);
    }

    #[test]
    fn rejects_long_payload_and_bad_channel() {
        assert!(matches!(assemble_packet(&[0; 32], [0; 6], 37), Err(Error::PayloadTooLong { len: 32, max: 31 })));
        assert!(matches!(assemble_packet(&[], [0; 6], 12), Err(Error::InvalidChannel(12))));
    }

    #[test]
    fn single_bit_flips_fail_crc() {
        let p = assemble_packet(&[0x02, 0x01, 0x06, 0x55], [9, 8, 7, 6, 5, 4], 38).unwrap();
        for i in PDU_BIT..p.bit_len() {
            let mut bits = p.whitened_bits.clone();
            bits[i] = !bits[i];
            assert!(AdvertisingPacket::parse(&bits, 38).is_err(), "bit {i}");
        }
    }

    #[test]
    fn wrong_channel_fails() {
        let p = assemble_packet(&[1, 2, 3], [0; 6], 37).unwrap();
        assert!(AdvertisingPacket::parse(&p.whitened_bits, 39).is_err());
    }
}

//! iBeacon identity and its advertising data structure.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Apple's Bluetooth SIG company identifier, little endian on air.
pub const APPLE_COMPANY_ID: u16 = 0x004C;
const IBEACON_TYPE: u8 = 0x02;
const IBEACON_LEN: u8 = 0x15;

/// Length of the manufacturer-specific data (company id through measured power).
pub const MANUFACTURER_DATA_LEN: usize = 25;
/// Length of the full advertising data: flags AD plus the manufacturer AD.
pub const IBEACON_PAYLOAD_LEN: usize = 3 + 2 + MANUFACTURER_DATA_LEN;

/// The identity an iBeacon broadcasts, plus the calibrated power byte the
/// receiver treats as the RSS one meter away.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawIdentity", into = "RawIdentity")]
pub struct IBeaconIdentity {
    pub proximity_uuid: [u8; 16],
    pub major: u16,
    pub minor: u16,
    tx_power_ref: i8,
}

impl IBeaconIdentity {
    pub fn new(proximity_uuid: [u8; 16], major: u16, minor: u16, tx_power_ref: i8) -> Result<Self> {
        if !(-127..=0).contains(&tx_power_ref) {
            return Err(Error::InvalidIdentity(format!("tx_power_ref {tx_power_ref} dBm outside [-127, 0]")));
        }
        Ok(Self { proximity_uuid, major, minor, tx_power_ref })
    }

    /// Measured power at 1 m, in dBm.
    pub fn tx_power_ref(&self) -> i8 {
        self.tx_power_ref
    }

    /// Same identity carrying a different (possibly forged) power reference.
    pub fn with_tx_power_ref(&self, tx_power_ref: i8) -> Result<Self> {
        Self::new(self.proximity_uuid, self.major, self.minor, tx_power_ref)
    }

    /// The 25-byte manufacturer-specific data: `4C 00 02 15`, UUID, major,
    /// minor, measured power.
    pub fn manufacturer_data(&self) -> [u8; MANUFACTURER_DATA_LEN] {
        let mut out = [0u8; MANUFACTURER_DATA_LEN];
        out[..2].copy_from_slice(&APPLE_COMPANY_ID.to_le_bytes());
        out[2] = IBEACON_TYPE;
        out[3] = IBEACON_LEN;
        out[4..20].copy_from_slice(&self.proximity_uuid);
        out[20..22].copy_from_slice(&self.major.to_be_bytes());
        out[22..24].copy_from_slice(&self.minor.to_be_bytes());
        out[24] = self.tx_power_ref as u8;
        out
    }

    pub fn uuid_string(&self) -> String {
        let h = hex::encode(self.proximity_uuid);
        format!("{}-{}-{}-{}-{}", &h[..8], &h[8..12], &h[12..16], &h[16..20], &h[20..])
    }
}

/// Builds the 30-byte iBeacon advertising data: a flags AD (LE general
/// discoverable, BR/EDR unsupported) followed by the manufacturer AD.
pub fn build_ibeacon_payload(id: &IBeaconIdentity) -> Vec<u8> {
    let mut out = Vec::with_capacity(IBEACON_PAYLOAD_LEN);
    out.extend_from_slice(&[0x02, 0x01, 0x06]);
    out.push(MANUFACTURER_DATA_LEN as u8 + 1);
    out.push(0xFF);
    out.extend_from_slice(&id.manufacturer_data());
    out
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIdentity {
    uuid: String,
    major: u16,
    minor: u16,
    tx_power_ref: i32,
}

impl TryFrom<RawIdentity> for IBeaconIdentity {
    type Error = Error;

    fn try_from(raw: RawIdentity) -> Result<Self> {
        let digits: String = raw.uuid.chars().filter(|c| *c != '-').collect();
        let bytes = hex::decode(&digits).map_err(|e| Error::InvalidIdentity(format!("uuid {:?}: {e}", raw.uuid)))?;
        let uuid: [u8; 16] = bytes
            .try_into()
            .map_err(|b: Vec<u8>| Error::InvalidIdentity(format!("uuid must be 16 bytes, got {}", b.len())))?;
        let tx = i8::try_from(raw.tx_power_ref)
            .map_err(|_| Error::InvalidIdentity(format!("tx_power_ref {} dBm outside [-127, 0]", raw.tx_power_ref)))?;
        IBeaconIdentity::new(uuid, raw.major, raw.minor, tx)
    }
}

impl From<IBeaconIdentity> for RawIdentity {
    fn from(id: IBeaconIdentity) -> Self {
        RawIdentity { uuid: id.uuid_string(), major: id.major, minor: id.minor, tx_power_ref: id.tx_power_ref as i32 }
    }
}

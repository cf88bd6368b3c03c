//! Which 20 MHz WiFi channel can carry each BLE advertising channel.

use serde::Serialize;

use crate::error::{Error, Result};

pub const WIFI_CHANNEL_WIDTH_MHZ: f64 = 20.0;
pub const BLE_CHANNEL_WIDTH_MHZ: f64 = 2.0;
/// 802.11 OFDM subcarrier spacing at 20 MHz.
pub const SUBCARRIER_SPACING_MHZ: f64 = 0.3125;

pub fn ble_center_mhz(channel: u8) -> Result<f64> {
    match channel {
        37 => Ok(2402.0),
        38 => Ok(2426.0),
        39 => Ok(2480.0),
        0..=36 => {
            Ok(if channel <= 10 { 2404.0 + 2.0 * channel as f64 } else { 2428.0 + 2.0 * (channel as f64 - 11.0) })
        }
        _ => Err(Error::InvalidChannel(channel)),
    }
}

/// Centre of 2.4 GHz WiFi channel 1..=13.
pub fn wifi_center_mhz(channel: u8) -> Result<f64> {
    if (1..=13).contains(&channel) {
        Ok(2407.0 + 5.0 * channel as f64)
    } else {
        Err(Error::Config(format!("no 2.4 GHz WiFi channel {channel}")))
    }
}

fn covers(wifi: u8, ble_center: f64) -> bool {
    let c = 2407.0 + 5.0 * wifi as f64;
    let half = WIFI_CHANNEL_WIDTH_MHZ / 2.0;
    c - half <= ble_center - 1.0 && ble_center + 1.0 <= c + half
}

/// Overlap in MHz between a WiFi channel and a BLE channel.
pub fn overlap_mhz(wifi: u8, ble: u8) -> Result<f64> {
    let w = wifi_center_mhz(wifi)?;
    let b = ble_center_mhz(ble)?;
    let lo = (w - WIFI_CHANNEL_WIDTH_MHZ / 2.0).max(b - BLE_CHANNEL_WIDTH_MHZ / 2.0);
    let hi = (w + WIFI_CHANNEL_WIDTH_MHZ / 2.0).min(b + BLE_CHANNEL_WIDTH_MHZ / 2.0);
    Ok((hi - lo).max(0.0))
}

/// The WiFi channel whose band fully contains the BLE channel, nearest centre
/// first. Channel 37 sits below every usable WiFi band.
pub fn wifi_channel_for(ble: u8) -> Result<Option<u8>> {
    let b = ble_center_mhz(ble)?;
    Ok((1..=13u8).filter(|&w| covers(w, b)).min_by(|&x, &y| {
        let dx = (2407.0 + 5.0 * x as f64 - b).abs();
        let dy = (2407.0 + 5.0 * y as f64 - b).abs();
        dx.total_cmp(&dy).then(x.cmp(&y))
    }))
}

/// Offset of the BLE carrier from the WiFi centre in subcarriers, rounded.
/// A bin k around the BLE carrier is WiFi subcarrier `k + offset`.
pub fn subcarrier_offset(ble: u8) -> Result<i32> {
    let w = wifi_channel_for(ble)?
        .ok_or_else(|| Error::Config(format!("BLE channel {ble} has no covering WiFi channel")))?;
    let d = ble_center_mhz(ble)? - wifi_center_mhz(w)?;
    Ok((d / SUBCARRIER_SPACING_MHZ).round() as i32)
}

#[derive(Debug, Clone, Serialize)]
pub struct ChannelPlanEntry {
    pub ble_channel: u8,
    pub ble_center_mhz: f64,
    pub wifi_channel: Option<u8>,
    pub wifi_center_mhz: Option<f64>,
    pub subcarrier_offset: Option<i32>,
}

/// The mapping for the three advertising channels.
pub fn channel_plan() -> Vec<ChannelPlanEntry> {
    [37u8, 38, 39]
        .into_iter()
        .map(|ble| {
            let wifi = wifi_channel_for(ble).expect("advertising channel");
            ChannelPlanEntry {
                ble_channel: ble,
                ble_center_mhz: ble_center_mhz(ble).unwrap(),
                wifi_channel: wifi,
                wifi_center_mhz: wifi.map(|w| wifi_center_mhz(w).unwrap()),
                subcarrier_offset: wifi.map(|_| subcarrier_offset(ble).unwrap()),
            }
        })
        .collect()
}

/// Fraction of advertising channels a WiFi transmitter can reach.
pub fn reachable_fraction() -> f64 {
    let plan = channel_plan();
    plan.iter().filter(|e| e.wifi_channel.is_some()).count() as f64 / plan.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn advertising_map() {
        let table = [(37, None), (38, Some(4)), (39, Some(13))];
        for (ble, wifi) in table {
            assert_eq!(wifi_channel_for(ble).unwrap(), wifi, "ble {ble}");
        }
        assert!((reachable_fraction() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn channel_one_barely_touches_37() {
        assert_eq!(overlap_mhz(1, 37).unwrap(), 1.0);
        assert_eq!(overlap_mhz(4, 38).unwrap(), 2.0);
        assert_eq!(overlap_mhz(13, 39).unwrap(), 2.0);
    }

    #[test]
    fn offsets() {
        assert_eq!(subcarrier_offset(38).unwrap(), -3);
        assert_eq!(subcarrier_offset(39).unwrap(), 26);
        assert!(subcarrier_offset(37).is_err());
        assert!(ble_center_mhz(40).is_err());
    }
}

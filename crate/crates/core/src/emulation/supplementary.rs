use super::{SymbolGeometry, Trajectory, SUPPLEMENTARY_DELAYS};
use crate::error::{Error, Result};

/// Delays every symbol of `traj` by `delay` seconds (0.2 µs or 0.3 µs).
///
/// Inside each symbol the samples move right by the delay. The vacated head is
/// refilled from the body region just before [3.2 µs, 3.2 µs + delay), which is
/// exactly what the shifted tail will hold, so the CP identity survives.
pub fn make_supplementary(traj: &Trajectory, delay: f64, geom: &SymbolGeometry) -> Result<Trajectory> {
    let Some(tenths) = SUPPLEMENTARY_DELAYS.iter().position(|d| (d - delay).abs() < 1e-12).map(|i| [2, 3][i]) else {
        return Err(Error::Config(format!("supplementary delay must be 0.2 µs or 0.3 µs, got {} µs", delay * 1e6)));
    };
    let shift = tenths * geom.tenth_us;
    let n = geom.symbol();
    if !traj.len().is_multiple_of(n) {
        return Err(Error::Shape(format!("trajectory of {} samples is not whole symbols", traj.len())));
    }
    let mut phases = Vec::with_capacity(traj.len());
    for sym in traj.phases.chunks_exact(n) {
        phases.extend_from_slice(&sym[geom.body - shift..geom.body]);
        phases.extend_from_slice(&sym[..n - shift]);
    }
    Ok(Trajectory { phases, samples_per_us: traj.samples_per_us })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emulation::constrain::constrain_bits;
    use crate::emulation::{EmulationConfig, Variant};

    fn bits(s: &str) -> Vec<bool> {
        s.chars().map(|c| c == '1').collect()
    }

    #[test]
    fn shift_and_cp() {
        let g = EmulationConfig::default().geometry().unwrap();
        let t = constrain_bits(&bits("10101100"), Variant::Adjusted, 0.0, &g);
        let s = make_supplementary(&t, 0.2e-6, &g).unwrap();
        for (old, new) in t.phases.chunks(80).zip(s.phases.chunks(80)) {
            for j in 4..80 {
                assert_eq!(new[j], old[j - 4]);
            }
            assert_eq!(new[..16], new[64..]);
        }
        let s3 = make_supplementary(&t, 0.3e-6, &g).unwrap();
        for sym in s3.phases.chunks(80) {
            assert_eq!(sym[..16], sym[64..]);
        }
    }

    #[test]
    fn rejects_other_delays() {
        let g = EmulationConfig::default().geometry().unwrap();
        let t = constrain_bits(&bits("1010"), Variant::Adjusted, 0.0, &g);
        assert!(make_supplementary(&t, 0.0, &g).is_err());
        assert!(make_supplementary(&t, 0.25e-6, &g).is_err());
    }
}

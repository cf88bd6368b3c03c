use crate::ble::PhaseLadderSequence;
use crate::Complex64;

/// Phase of the emulated signal at every sample instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub phases: Vec<f64>,
    pub samples_per_us: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    pub fn duration_us(&self) -> f64 {
        self.phases.len() as f64 / self.samples_per_us
    }
}

/// Renders a ladder sequence without any CP constraint. Ladder k occupies
/// [kL, (k+1)L) and holds the phase reached at its end, so the sample pair
/// straddling each ladder boundary sees that ladder's step.
pub fn unconstrained_trajectory(seq: &PhaseLadderSequence, samples_per_us: f64) -> Trajectory {
    let per = (seq.ladder_duration * 1e6 * samples_per_us).round() as usize;
    let mut phases = Vec::with_capacity(per * seq.len());
    for k in 0..seq.len() {
        let v = seq.end_of(k);
        phases.extend(std::iter::repeat_n(v, per));
    }
    Trajectory { phases, samples_per_us }
}

/// Unit-amplitude baseband samples e^{jφ}.
pub fn synthesize_waveform(traj: &Trajectory) -> Vec<Complex64> {
    traj.phases.iter().map(|&p| Complex64::from_polar(1.0, p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ble::{bits_to_phase_ladders, split_fine_grained};
    use std::f64::consts::{FRAC_PI_4, PI};

    #[test]
    fn constant_phase_is_one() {
        let t = Trajectory { phases: vec![0.0; 80], samples_per_us: 20.0 };
        assert!(synthesize_waveform(&t).iter().all(|c| *c == Complex64::new(1.0, 0.0)));
    }

    #[test]
    fn ramp_is_staircase_of_ten() {
        let fine = split_fine_grained(&bits_to_phase_ladders(&[true; 4], 0.0));
        let t = unconstrained_trajectory(&fine, 20.0);
        assert_eq!(t.len(), 80);
        let s = synthesize_waveform(&t);
        for k in 0..8 {
            for j in 0..10 {
                let expect = FRAC_PI_4 * (k + 1) as f64;
                assert!((t.phases[10 * k + j] - expect).abs() < 1e-12);
                let a = s[10 * k + j].arg();
                let d = (a - expect).rem_euclid(2.0 * PI);
                assert!(d < 1e-12 || 2.0 * PI - d < 1e-12);
            }
            if k > 0 {
                let jump = (s[10 * k] * s[10 * k - 1].conj()).arg();
                assert!((jump - FRAC_PI_4).abs() < 1e-12);
            }
        }
    }
}

//! Square-FSK phase trajectory of a bit stream as a staircase of phase ladders.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

/// Duration of one bit at 1 Msym/s, in seconds.
pub const BIT_DURATION: f64 = 1e-6;
/// Phase advance per bit at modulation index 0.5.
pub const BIT_PHASE_STEP: f64 = FRAC_PI_2;

/// Piecewise-constant phase φ(t). `values[k]` is the phase at the start of
/// ladder k; `end_phase` is φ at the end of the last ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseLadderSequence {
    pub ladder_duration: f64,
    pub values: Vec<f64>,
    pub initial_phase: f64,
    pub end_phase: f64,
}

impl PhaseLadderSequence {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Phase at the end of ladder `k`, i.e. the start of ladder `k + 1`.
    pub fn end_of(&self, k: usize) -> f64 {
        self.values.get(k + 1).copied().unwrap_or(self.end_phase)
    }

    pub fn duration(&self) -> f64 {
        self.ladder_duration * self.values.len() as f64
    }
}

fn bit_sign(b: bool) -> f64 {
    if b {
        1.0
    } else {
        -1.0
    }
}

/// One 1 µs ladder per bit. A `1` raises the phase by π/2 over the bit, a `0`
/// lowers it by π/2.
pub fn bits_to_phase_ladders(bits: &[bool], initial_phase: f64) -> PhaseLadderSequence {
    let mut values = Vec::with_capacity(bits.len());
    let mut phase = initial_phase;
    for &b in bits {
        values.push(phase);
        phase += bit_sign(b) * BIT_PHASE_STEP;
    }
    PhaseLadderSequence { ladder_duration: BIT_DURATION, values, initial_phase, end_phase: phase }
}

/// Halves every ladder, inserting the midpoint phase so each step is ±π/4.
pub fn split_fine_grained(seq: &PhaseLadderSequence) -> PhaseLadderSequence {
    let mut values = Vec::with_capacity(2 * seq.values.len());
    for k in 0..seq.values.len() {
        let a = seq.values[k];
        let b = seq.end_of(k);
        values.push(a);
        values.push(0.5 * (a + b));
    }
    PhaseLadderSequence {
        ladder_duration: seq.ladder_duration / 2.0,
        values,
        initial_phase: seq.initial_phase,
        end_phase: seq.end_phase,
    }
}

/// Bits recovered from the sign of each full-bit phase change of a coarse sequence.
pub fn ladder_bits(seq: &PhaseLadderSequence) -> Vec<bool> {
    (0..seq.values.len()).map(|k| seq.end_of(k) > seq.values[k]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_4, PI};

    fn bits(s: &str) -> Vec<bool> {
        s.chars().map(|c| c == '1').collect()
    }

    #[test]
    fn single_one() {
        let c = bits_to_phase_ladders(&bits("1"), 0.0);
        assert_eq!(c.values, vec![0.0]);
        assert!((c.end_phase - FRAC_PI_2).abs() < 1e-15);
        let f = split_fine_grained(&c);
        assert_eq!(f.len(), 2);
        assert_eq!(f.values, vec![0.0, FRAC_PI_4]);
        assert_eq!(f.ladder_duration, 0.5e-6);
    }

    #[test]
    fn one_zero_returns_to_start() {
        let c = bits_to_phase_ladders(&bits("10"), 0.0);
        assert!(c.end_phase.abs() < 1e-15);
    }

    #[test]
    fn rise_fall_fall_rise() {
        // 1001: up, down, down, up; the staircase peaks after bit 0 and bottoms after bit 2
        let c = bits_to_phase_ladders(&bits("1001"), 0.0);
        let ends: Vec<f64> = (0..4).map(|k| c.end_of(k)).collect();
        assert_eq!(ends, vec![FRAC_PI_2, 0.0, -FRAC_PI_2, 0.0]);
        assert_eq!(ladder_bits(&c), bits("1001"));
    }

    #[test]
    fn fine_steps_are_quarter_pi() {
        let b = bits("1101000111010010");
        let f = split_fine_grained(&bits_to_phase_ladders(&b, PI / 3.0));
        assert_eq!(f.len(), 2 * b.len());
        for k in 0..f.len() {
            let step = f.end_of(k) - f.values[k];
            assert!((step.abs() - FRAC_PI_4).abs() < 1e-12);
            assert_eq!(step > 0.0, b[k / 2]);
        }
    }
}

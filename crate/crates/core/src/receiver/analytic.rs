//! Closed-form per-symbol decode probability.

use crate::emulation::Variant;

/// Probability the sampling instant for b3's delayed decision falls in the
/// free 0.2 µs of the split ladder (segment A) rather than the pinned 0.3 µs (B).
pub const P_SEGMENT_A: f64 = 0.2 / 0.5;
pub const P_SEGMENT_B: f64 = 0.3 / 0.5;
const P_DELAYED: f64 = 0.5;

/// P = 1 − P(A)·P(W|A) − P(B)·P(W|B) for one 4-bit symbol `[b0, b1, b2, b3]`.
/// The conditional error terms already include the 1/2 chance of delayed
/// decoding, the only mode in which b3 can go wrong.
pub fn analytic_decode_prob(bits: [bool; 4], variant: Variant) -> f64 {
    let mismatch = bits[0] != bits[3];
    let (w_a, w_b) = match (mismatch, variant) {
        (false, _) => (0.0, 0.0),
        (true, Variant::Basic) => (P_DELAYED, P_DELAYED),
        (true, Variant::Adjusted) => (0.0, P_DELAYED),
        (true, Variant::Enhanced) => (0.0, 0.0),
    };
    1.0 - P_SEGMENT_A * w_a - P_SEGMENT_B * w_b
}

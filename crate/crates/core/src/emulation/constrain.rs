//! Cyclic-prefix constrained rendering of 4-bit BLE symbols.
//!
//! Within one OFDM symbol the receiver's decisions are, with y_k the phase held
//! during ladder k and v the phase of the free [3.0, 3.2) µs section:
//!
//! ```text
//! y0 -> y1        b0 delayed
//! y1 -> y2 -> y3  b1 early, b1 delayed
//! y3 -> y4 -> y5  b2 early, b2 delayed
//! y5 -> v | y0    b3 early      (offset in segment A | segment B)
//! v  -> y0 | y0 -> y1  b3 delayed
//! y0 | y1 -> y0'  next symbol's b0 early
//! ```
//!
//! The CP copy forces [3.2, 4.0) µs to repeat y0 and the first 0.3 µs of y1,
//! so `y1 - y0` always carries b0's sign and b3's delayed decision in segment
//! B is wrong whenever b0 != b3. Everything else can be made right by choosing
//! the step sizes so the staircase closes: y0 - y5 must wrap to a jump with
//! b3's sign. Step sizes are free as long as each wrapped difference keeps its
//! sign, and the table below picks them to maximise the smallest distance of
//! any decision from a wrong sign.

use std::f64::consts::{FRAC_PI_4, PI, TAU};
use std::sync::OnceLock;

use super::{SymbolGeometry, Trajectory, Variant};

/// Wraps to (−π, π].
pub fn wrap_phase(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

fn sign(b: bool) -> f64 {
    if b {
        1.0
    } else {
        -1.0
    }
}

/// Step sizes for one 4-bit pattern.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymbolDesign {
    /// Magnitude of every rising step in the symbol body.
    pub rise: f64,
    /// Magnitude of every falling step in the symbol body.
    pub fall: f64,
    /// |y0 - y5| after wrapping: the jump the CP copy produces at 3.2 µs.
    pub closure: f64,
    /// Smallest decision margin over all decisions the design keeps correct.
    pub margin: f64,
}

impl SymbolDesign {
    fn step(&self, up: bool) -> f64 {
        if up {
            self.rise
        } else {
            self.fall
        }
    }

    /// Magnitude of the b0 step y0 -> y1.
    pub fn first_step(&self, bits: [bool; 4]) -> f64 {
        self.step(bits[0])
    }
}

fn body_signs(bits: [bool; 4]) -> [bool; 5] {
    [bits[0], bits[1], bits[1], bits[2], bits[2]]
}

fn design_margin(bits: [bool; 4], rise: f64, fall: f64, closure: f64) -> f64 {
    let signs = body_signs(bits);
    let mut m = closure.min(PI - closure).min(closure / 2.0);
    if signs.iter().any(|&s| s) {
        m = m.min(rise.min(PI - rise));
    }
    if signs.iter().any(|&s| !s) {
        m = m.min(fall.min(PI - fall));
    }
    if bits[0] != bits[3] {
        // basic keeps b0's shift in the free section: early b3 sees (π + C)/2
        m = m.min((PI - closure) / 2.0);
    }
    let first = if bits[0] { rise } else { fall };
    // the next symbol's first step, measured from y1 in segment B
    m.min((PI - first) / 2.0)
}

fn search(bits: [bool; 4], c_range: (f64, f64), c_step: f64, r_range: (f64, f64), r_step: f64) -> Option<SymbolDesign> {
    let signs = body_signs(bits);
    let p = signs.iter().filter(|&&s| s).count() as f64;
    let n = 5.0 - p;
    let s3 = sign(bits[3]);
    let ok = |x: f64| x > 0.0 && x < PI;
    let mut best: Option<SymbolDesign> = None;
    let mut consider = |rise: f64, fall: f64, closure: f64| {
        if !(ok(rise) && ok(fall)) {
            return;
        }
        let m = design_margin(bits, rise, fall, closure);
        if best.is_none_or(|b| m > b.margin + 1e-12) {
            best = Some(SymbolDesign { rise, fall, closure, margin: m });
        }
    };
    let mut c = c_range.0;
    while c <= c_range.1 {
        for k in -2..=2 {
            // y5 - y0 = p·rise − n·fall must equal 2πk − s3·C
            let target = TAU * k as f64 - s3 * c;
            if n == 0.0 {
                let r = target / p;
                consider(r, r, c);
            } else if p == 0.0 {
                let f = -target / n;
                consider(f, f, c);
            } else {
                let mut r = r_range.0;
                while r <= r_range.1 {
                    consider(r, (p * r - target) / n, c);
                    r += r_step;
                }
            }
        }
        c += c_step;
    }
    best
}

fn optimise(bits: [bool; 4]) -> SymbolDesign {
    let coarse = PI / 200.0;
    let first = search(bits, (coarse, PI - coarse), coarse, (coarse, PI - coarse), coarse)
        .expect("every pattern admits a closing staircase");
    let fine = coarse / 20.0;
    let span = 2.0 * coarse;
    search(
        bits,
        ((first.closure - span).max(fine), (first.closure + span).min(PI - fine)),
        fine,
        ((first.rise - span).max(fine), (first.rise + span).min(PI - fine)),
        fine,
    )
    .filter(|d| d.margin >= first.margin)
    .unwrap_or(first)
}

pub fn pattern_index(bits: [bool; 4]) -> usize {
    bits.iter().fold(0, |acc, &b| (acc << 1) | b as usize)
}

pub fn pattern_bits(index: usize) -> [bool; 4] {
    [index & 8 != 0, index & 4 != 0, index & 2 != 0, index & 1 != 0]
}

/// Precomputed designs for all 16 patterns, indexed by [`pattern_index`].
pub fn design_table() -> &'static [SymbolDesign; 16] {
    static TABLE: OnceLock<[SymbolDesign; 16]> = OnceLock::new();
    TABLE.get_or_init(|| std::array::from_fn(|i| optimise(pattern_bits(i))))
}

pub fn symbol_design(bits: [bool; 4]) -> SymbolDesign {
    design_table()[pattern_index(bits)]
}

/// Ladder phases y0..y5 and the free-section value v of one symbol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymbolLevels {
    pub y: [f64; 6],
    pub free: f64,
}

pub fn symbol_levels(bits: [bool; 4], variant: Variant, y0: f64) -> SymbolLevels {
    let d = symbol_design(bits);
    let mut y = [y0; 6];
    for (j, up) in body_signs(bits).into_iter().enumerate() {
        y[j + 1] = y[j] + sign(up) * d.step(up);
    }
    let s0 = sign(bits[0]);
    let s3 = sign(bits[3]);
    let free = if variant == Variant::Basic && bits[0] != bits[3] {
        // the free section just carries on from the pinned copy of b0's shift
        y0 - s0 * (PI - d.closure) / 2.0
    } else {
        // split the closing jump evenly on both sides of the free section
        y[5] + s3 * d.closure / 2.0
    };
    SymbolLevels { y, free }
}

/// y0 of the symbol following one whose first step was `first_step` with sign `prev_b0`.
pub fn next_start(y0: f64, prev_b0: bool, first_step: f64, next_b0: bool) -> f64 {
    let e = if next_b0 == prev_b0 { (PI + first_step) / 2.0 } else { (PI - first_step) / 2.0 };
    y0 + sign(next_b0) * e
}

fn render(levels: &SymbolLevels, geom: &SymbolGeometry, out: &mut Vec<f64>) {
    let start = out.len();
    for &y in &levels.y {
        out.extend(std::iter::repeat_n(y, geom.ladder));
    }
    out.extend(std::iter::repeat_n(levels.free, geom.body - 6 * geom.ladder));
    for j in 0..geom.cp {
        let v = out[start + j];
        out.push(v);
    }
}

/// One symbol after CP enforcement.
#[derive(Debug, Clone, PartialEq)]
pub struct EmulatedSymbol {
    pub target_ladders: [f64; 8],
    /// Per-sample phase over the full symbol, CP included.
    pub constrained: Vec<f64>,
    pub bits: [bool; 4],
}

/// Constrains a lone symbol given its eight fine ladders (start-of-ladder
/// values). The bits follow from the ladder steps and the symbol starts at the
/// phase reached at the end of x0.
pub fn apply_cp_constraint(target: &[f64; 8], variant: Variant, geom: &SymbolGeometry) -> EmulatedSymbol {
    let bits: [bool; 4] = std::array::from_fn(|i| target[2 * i + 1] > target[2 * i]);
    let levels = symbol_levels(bits, variant, target[1]);
    let mut constrained = Vec::with_capacity(geom.symbol());
    render(&levels, geom, &mut constrained);
    EmulatedSymbol { target_ladders: *target, constrained, bits }
}

/// Constrained trajectory for a bit stream whose length is a multiple of 4.
pub fn constrain_bits(bits: &[bool], variant: Variant, initial_phase: f64, geom: &SymbolGeometry) -> Trajectory {
    assert_eq!(bits.len() % 4, 0, "bit stream must be padded to whole symbols");
    let mut phases = Vec::with_capacity(bits.len() / 4 * geom.symbol());
    let mut y0 = initial_phase + sign(bits[0]) * FRAC_PI_4;
    let mut prev: Option<([bool; 4], f64)> = None;
    for chunk in bits.chunks_exact(4) {
        let sym = [chunk[0], chunk[1], chunk[2], chunk[3]];
        if let Some((p, start)) = prev {
            y0 = next_start(start, p[0], symbol_design(p).first_step(p), sym[0]);
        }
        render(&symbol_levels(sym, variant, y0), geom, &mut phases);
        prev = Some((sym, y0));
    }
    Trajectory { phases, samples_per_us: 2.0 * geom.ladder as f64 }
}

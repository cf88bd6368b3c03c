use serde::Serialize;

use crate::error::{Error, Result};
use crate::radio::{distance, Point};

pub const MAX_ITERATIONS: usize = 100;
/// Metres.
pub const STEP_TOLERANCE: f64 = 1e-6;
const GRADIENT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PositionEstimate {
    pub position: Point,
    /// RMS of ‖x − aᵢ‖ − dᵢ, metres.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn rms_residual(x: Point, anchors: &[Point], d: &[f64]) -> f64 {
    let ss: f64 = anchors.iter().zip(d).map(|(a, di)| (distance(x, *a) - di).powi(2)).sum();
    (ss / anchors.len() as f64).sqrt()
}

/// Jᵀr and JᵀJ of the range residuals at `x`. Anchors closer than 1e-12 m
/// have no defined direction and are left out.
fn normal_equations(x: Point, anchors: &[Point], d: &[f64]) -> ([f64; 2], [f64; 3]) {
    let mut g = [0.0; 2];
    let (mut hxx, mut hxy, mut hyy) = (0.0, 0.0, 0.0);
    for (a, di) in anchors.iter().zip(d) {
        let r = distance(x, *a);
        if r < 1e-12 {
            continue;
        }
        let (ux, uy) = ((x[0] - a[0]) / r, (x[1] - a[1]) / r);
        let res = r - di;
        g[0] += ux * res;
        g[1] += uy * res;
        hxx += ux * ux;
        hxy += ux * uy;
        hyy += uy * uy;
    }
    (g, [hxx, hxy, hyy])
}

fn solve2(h: [f64; 3], b: [f64; 2]) -> Option<[f64; 2]> {
    let det = h[0] * h[2] - h[1] * h[1];
    let scale = (h[0] * h[2]).max(h[1] * h[1]).max(1e-300);
    if det.abs() <= 1e-12 * scale {
        return None;
    }
    Some([(h[2] * b[0] - h[1] * b[1]) / det, (h[0] * b[1] - h[1] * b[0]) / det])
}

fn check_geometry(anchors: &[Point]) -> Result<()> {
    let k = anchors.len() as f64;
    let cx = anchors.iter().map(|a| a[0]).sum::<f64>() / k;
    let cy = anchors.iter().map(|a| a[1]).sum::<f64>() / k;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for a in anchors {
        let (dx, dy) = (a[0] - cx, a[1] - cy);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    // smallest eigenvalue of the scatter matrix, relative to the largest
    let tr = sxx + syy;
    let disc = ((sxx - syy).powi(2) + 4.0 * sxy * sxy).sqrt();
    let small = (tr - disc) / 2.0;
    if tr <= 0.0 || small <= 1e-10 * tr {
        return Err(Error::DegenerateGeometry);
    }
    Ok(())
}

/// Subtracting the last anchor's circle equation from the others leaves a
/// linear system in x.
fn linear_init(anchors: &[Point], d: &[f64]) -> Option<Point> {
    let n = anchors.len() - 1;
    let (an, dn) = (anchors[n], d[n]);
    let mut h = [0.0; 3];
    let mut b = [0.0; 2];
    for i in 0..n {
        let a = anchors[i];
        let row = [2.0 * (a[0] - an[0]), 2.0 * (a[1] - an[1])];
        let rhs = a[0] * a[0] + a[1] * a[1] - an[0] * an[0] - an[1] * an[1] - d[i] * d[i] + dn * dn;
        h[0] += row[0] * row[0];
        h[1] += row[0] * row[1];
        h[2] += row[1] * row[1];
        b[0] += row[0] * rhs;
        b[1] += row[1] * rhs;
    }
    solve2(h, b).filter(|p| p[0].is_finite() && p[1].is_finite())
}

/// Best point of a 41×41 grid over the anchors' box widened by the largest
/// range.
fn grid_init(anchors: &[Point], d: &[f64]) -> Point {
    let pad = d.iter().cloned().fold(0.0, f64::max);
    let lo = [
        anchors.iter().map(|a| a[0]).fold(f64::INFINITY, f64::min) - pad,
        anchors.iter().map(|a| a[1]).fold(f64::INFINITY, f64::min) - pad,
    ];
    let hi = [
        anchors.iter().map(|a| a[0]).fold(f64::NEG_INFINITY, f64::max) + pad,
        anchors.iter().map(|a| a[1]).fold(f64::NEG_INFINITY, f64::max) + pad,
    ];
    let mut best = (f64::INFINITY, lo);
    for i in 0..=40 {
        for j in 0..=40 {
            let p = [lo[0] + (hi[0] - lo[0]) * i as f64 / 40.0, lo[1] + (hi[1] - lo[1]) * j as f64 / 40.0];
            let r = rms_residual(p, anchors, d);
            if r < best.0 {
                best = (r, p);
            }
        }
    }
    best.1
}

/// Least-squares position from ranges to known anchors. Gauss–Newton with
/// step halving on a residual increase, started from the linearised solution
/// (or `init`); where the Jacobian is rank-deficient the start moves to the
/// best grid point and a gradient step is taken instead.
pub fn multilaterate(anchors: &[Point], distances: &[f64], init: Option<Point>) -> Result<PositionEstimate> {
    if anchors.len() != distances.len() {
        return Err(Error::Shape(format!("{} anchors but {} distances", anchors.len(), distances.len())));
    }
    if anchors.len() < 3 {
        return Err(Error::InsufficientAnchors(anchors.len()));
    }
    if distances.iter().chain(anchors.iter().flatten()).any(|v| !v.is_finite()) {
        return Err(Error::Config("non-finite anchor or distance".into()));
    }
    check_geometry(anchors)?;

    let mut x = init.or_else(|| linear_init(anchors, distances)).unwrap_or_else(|| grid_init(anchors, distances));
    let mut cost = rms_residual(x, anchors, distances);
    let mut iterations = 0;
    let mut fell_back = false;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let (g, h) = normal_equations(x, anchors, distances);
        let dir = match solve2(h, g) {
            Some(s) => [-s[0], -s[1]],
            None => {
                if !fell_back {
                    fell_back = true;
                    let p = grid_init(anchors, distances);
                    let c = rms_residual(p, anchors, distances);
                    if c < cost {
                        x = p;
                        cost = c;
                        continue;
                    }
                }
                [-g[0], -g[1]]
            }
        };
        let mut lambda = 1.0;
        let mut moved = false;
        for _ in 0..40 {
            let cand = [x[0] + lambda * dir[0], x[1] + lambda * dir[1]];
            let c = rms_residual(cand, anchors, distances);
            if c <= cost {
                let step = lambda * dir[0].hypot(dir[1]);
                x = cand;
                cost = c;
                moved = step >= STEP_TOLERANCE;
                break;
            }
            lambda *= 0.5;
        }
        if !moved {
            break;
        }
    }
    let (g, _) = normal_equations(x, anchors, distances);
    let scale = distances.iter().cloned().fold(1.0, f64::max);
    Ok(PositionEstimate {
        position: x,
        residual: cost,
        iterations,
        converged: g[0].hypot(g[1]) <= GRADIENT_TOLERANCE * scale,
    })
}

//! Planar segment geometry used for collision checks.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: Point,
    pub b: Point,
}

impl Segment {
    pub const fn new(ax: f64, ay: f64, bx: f64, by: f64) -> Self {
        Segment {
            a: Point::new(ax, ay),
            b: Point::new(bx, by),
        }
    }
}

const PARALLEL_EPS: f64 = 1e-15;

fn cross(ax: f64, ay: f64, bx: f64, by: f64) -> f64 {
    ax * by - ay * bx
}

/// Closed-segment intersection test (touching counts).
///
/// Solves `p + t·r = q + u·s` for the two segment parameters and checks
/// that both lie in `[0, 1]`; parallel pairs fall back to a collinear
/// overlap test on the projection onto `r`.
pub fn segments_intersect(first: &Segment, second: &Segment) -> bool {
    let (px, py) = (first.a.x, first.a.y);
    let (rx, ry) = (first.b.x - px, first.b.y - py);
    let (qx, qy) = (second.a.x, second.a.y);
    let (sx, sy) = (second.b.x - qx, second.b.y - qy);
    let (wx, wy) = (qx - px, qy - py);

    let denom = cross(rx, ry, sx, sy);
    let scale = (rx.abs() + ry.abs()) * (sx.abs() + sy.abs());
    if denom.abs() <= PARALLEL_EPS * scale.max(f64::MIN_POSITIVE) {
        let rr = rx * rx + ry * ry;
        if rr == 0.0 {
            // Degenerate first segment: a point.
            let ss = sx * sx + sy * sy;
            if ss == 0.0 {
                return wx == 0.0 && wy == 0.0;
            }
            if cross(wx, wy, sx, sy) != 0.0 {
                return false;
            }
            let u = -(wx * sx + wy * sy) / ss;
            return (0.0..=1.0).contains(&u);
        }
        if cross(wx, wy, rx, ry) != 0.0 {
            return false;
        }
        let t0 = (wx * rx + wy * ry) / rr;
        let t1 = t0 + (sx * rx + sy * ry) / rr;
        let (lo, hi) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
        return hi >= 0.0 && lo <= 1.0;
    }
    let t = cross(wx, wy, sx, sy) / denom;
    let u = cross(wx, wy, rx, ry) / denom;
    (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u)
}

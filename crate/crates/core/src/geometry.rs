//! Planar polygon primitives.
//!
//! Coordinates are assumed to be pre-projected; nothing here does geodesic
//! math. Rings are stored closed (first vertex repeated at the end).

use serde::{Deserialize, Serialize};

pub type Point = [f64; 2];

/// Closed ring of vertices; `points.first() == points.last()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ring {
    pub points: Vec<Point>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub exterior: Ring,
    pub holes: Vec<Ring>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiPolygon {
    pub polygons: Vec<Polygon>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub min: Point,
    pub max: Point,
}

impl BBox {
    pub fn empty() -> Self {
        BBox {
            min: [f64::INFINITY, f64::INFINITY],
            max: [f64::NEG_INFINITY, f64::NEG_INFINITY],
        }
    }

    pub fn include(&mut self, p: Point) {
        self.min[0] = self.min[0].min(p[0]);
        self.min[1] = self.min[1].min(p[1]);
        self.max[0] = self.max[0].max(p[0]);
        self.max[1] = self.max[1].max(p[1]);
    }

    pub fn merge(&mut self, other: &BBox) {
        self.include(other.min);
        self.include(other.max);
    }

    pub fn intersects(&self, other: &BBox, tol: f64) -> bool {
        self.min[0] <= other.max[0] + tol
            && other.min[0] <= self.max[0] + tol
            && self.min[1] <= other.max[1] + tol
            && other.min[1] <= self.max[1] + tol
    }

    pub fn diagonal(&self) -> f64 {
        let dx = self.max[0] - self.min[0];
        let dy = self.max[1] - self.min[1];
        (dx * dx + dy * dy).sqrt()
    }
}

impl Ring {
    /// Builds a ring, closing it if needed. Returns the ring and whether it
    /// had to be closed.
    pub fn closed(mut points: Vec<Point>) -> (Ring, bool) {
        let mut closed_now = false;
        if let (Some(first), Some(last)) = (points.first().copied(), points.last().copied()) {
            if first != last {
                points.push(first);
                closed_now = true;
            }
        }
        (Ring { points }, closed_now)
    }

    /// Shoelace area; positive for counter-clockwise rings.
    pub fn signed_area(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| w[0][0] * w[1][1] - w[1][0] * w[0][1])
            .sum::<f64>()
            / 2.0
    }

    pub fn is_ccw(&self) -> bool {
        self.signed_area() > 0.0
    }

    pub fn reverse(&mut self) {
        self.points.reverse();
    }

    pub fn segments(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        self.points.windows(2).map(|w| (w[0], w[1]))
    }

    /// True when no two non-adjacent edges touch or cross.
    pub fn is_simple(&self) -> bool {
        let segs: Vec<(Point, Point)> = self.segments().collect();
        let m = segs.len();
        for a in 0..m {
            for b in (a + 1)..m {
                let adjacent = b == a + 1 || (a == 0 && b == m - 1);
                if adjacent {
                    // Adjacent edges share one endpoint; they may only overlap if
                    // they fold back onto each other.
                    if collinear_overlap(segs[a], segs[b]) {
                        return false;
                    }
                    continue;
                }
                if segments_intersect(segs[a], segs[b]) {
                    return false;
                }
            }
        }
        true
    }

    fn centroid_moment(&self) -> (f64, f64, f64) {
        let mut a = 0.0;
        let mut cx = 0.0;
        let mut cy = 0.0;
        for (p, q) in self.segments() {
            let cross = p[0] * q[1] - q[0] * p[1];
            a += cross;
            cx += (p[0] + q[0]) * cross;
            cy += (p[1] + q[1]) * cross;
        }
        (a / 2.0, cx / 6.0, cy / 6.0)
    }
}

impl Polygon {
    /// Exterior counter-clockwise, holes clockwise.
    pub fn normalize_orientation(&mut self) {
        if !self.exterior.is_ccw() {
            self.exterior.reverse();
        }
        for hole in &mut self.holes {
            if hole.is_ccw() {
                hole.reverse();
            }
        }
    }

    pub fn rings(&self) -> impl Iterator<Item = &Ring> {
        std::iter::once(&self.exterior).chain(self.holes.iter())
    }
}

impl MultiPolygon {
    pub fn rings(&self) -> impl Iterator<Item = &Ring> {
        self.polygons.iter().flat_map(|p| p.rings())
    }

    pub fn segments(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        self.rings().flat_map(|r| r.segments())
    }

    pub fn vertices(&self) -> impl Iterator<Item = Point> + '_ {
        self.rings().flat_map(|r| r.points.iter().copied())
    }

    pub fn bbox(&self) -> BBox {
        let mut b = BBox::empty();
        for p in self.vertices() {
            b.include(p);
        }
        b
    }

    pub fn area(&self) -> f64 {
        self.rings().map(|r| r.signed_area()).sum::<f64>().abs()
    }

    /// Area-weighted centroid. Holes subtract through their orientation.
    /// Degenerate (zero-area) shapes fall back to the vertex mean.
    pub fn centroid(&self) -> Point {
        let mut a = 0.0;
        let mut cx = 0.0;
        let mut cy = 0.0;
        for ring in self.rings() {
            let (ra, rx, ry) = ring.centroid_moment();
            a += ra;
            cx += rx;
            cy += ry;
        }
        if a.abs() > f64::EPSILON * self.bbox().diagonal().powi(2) {
            [cx / a, cy / a]
        } else {
            let pts: Vec<Point> = self.vertices().collect();
            let n = pts.len().max(1) as f64;
            [
                pts.iter().map(|p| p[0]).sum::<f64>() / n,
                pts.iter().map(|p| p[1]).sum::<f64>() / n,
            ]
        }
    }
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn on_segment(a: Point, b: Point, p: Point) -> bool {
    p[0] >= a[0].min(b[0])
        && p[0] <= a[0].max(b[0])
        && p[1] >= a[1].min(b[1])
        && p[1] <= a[1].max(b[1])
}

/// Closed-segment intersection test (touching counts).
pub fn segments_intersect(s: (Point, Point), t: (Point, Point)) -> bool {
    let (p1, p2) = s;
    let (p3, p4) = t;
    let d1 = orient(p3, p4, p1);
    let d2 = orient(p3, p4, p2);
    let d3 = orient(p1, p2, p3);
    let d4 = orient(p1, p2, p4);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(p3, p4, p1))
        || (d2 == 0.0 && on_segment(p3, p4, p2))
        || (d3 == 0.0 && on_segment(p1, p2, p3))
        || (d4 == 0.0 && on_segment(p1, p2, p4))
}

fn collinear_overlap(s: (Point, Point), t: (Point, Point)) -> bool {
    let (a, b) = s;
    let (c, d) = t;
    if orient(a, b, c) != 0.0 || orient(a, b, d) != 0.0 {
        return false;
    }
    let dir = [b[0] - a[0], b[1] - a[1]];
    let len2 = dir[0] * dir[0] + dir[1] * dir[1];
    if len2 == 0.0 {
        return false;
    }
    let proj = |p: Point| ((p[0] - a[0]) * dir[0] + (p[1] - a[1]) * dir[1]) / len2;
    let (t0, t1) = {
        let (u, v) = (proj(c), proj(d));
        (u.min(v), u.max(v))
    };
    t1.min(1.0) - t0.max(0.0) > 0.0
}

/// Euclidean distance from `p` to the closed segment `ab`.
pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let dx = b[0] - a[0];
    let dy = b[1] - a[1];
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    };
    let qx = a[0] + t * dx - p[0];
    let qy = a[1] + t * dy - p[1];
    (qx * qx + qy * qy).sqrt()
}

/// Length of the shared stretch of two nearly collinear segments, or 0 when
/// either endpoint of the shorter one strays more than `tol` from the other's
/// supporting line.
pub fn shared_length(s: (Point, Point), t: (Point, Point), tol: f64) -> f64 {
    let len = |u: (Point, Point)| ((u.1[0] - u.0[0]).powi(2) + (u.1[1] - u.0[1]).powi(2)).sqrt();
    // Project the shorter segment onto the longer one so the test is symmetric.
    let (base, other) = if len(s) >= len(t) { (s, t) } else { (t, s) };
    let (a, b) = base;
    let l = len(base);
    if l == 0.0 {
        return 0.0;
    }
    let ux = (b[0] - a[0]) / l;
    let uy = (b[1] - a[1]) / l;
    let perp = |p: Point| ((p[0] - a[0]) * uy - (p[1] - a[1]) * ux).abs();
    if perp(other.0) > tol || perp(other.1) > tol {
        return 0.0;
    }
    let along = |p: Point| (p[0] - a[0]) * ux + (p[1] - a[1]) * uy;
    let (u, v) = (along(other.0), along(other.1));
    let lo = u.min(v).max(0.0);
    let hi = u.max(v).min(l);
    (hi - lo).max(0.0)
}

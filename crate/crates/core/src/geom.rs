//! Oriented rectangles and their exact overlap.
//!
//! A box's local axes in image coordinates (y down) are
//! `u = (cos θ, −sin θ)` along the width and `v = (sin θ, cos θ)` along the
//! height, so a positive θ turns the box counter-clockwise on screen. For
//! θ = 0, `−v` points to the top of the image.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Intersections smaller than this are treated as empty.
pub const AREA_EPSILON: f64 = 1e-12;

/// Collinearity tolerance for polygon convexity checks.
const CONVEXITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 2D cross product.
    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn scale(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }
}

impl std::ops::Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl std::ops::Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

/// Maps any angle onto (−π/2, π/2] by adding multiples of π.
///
/// A rectangle is symmetric under a half turn, so the point set is unchanged.
pub fn normalize_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(PI);
    if t > FRAC_PI_2 {
        t - PI
    } else {
        t
    }
}

/// Sine and cosine of an angle in degrees, exact at multiples of 90°.
pub fn sin_cos_deg(degrees: f64) -> (f64, f64) {
    if degrees % 90.0 == 0.0 {
        let quarter = (degrees / 90.0).rem_euclid(4.0) as i32;
        return match quarter {
            0 => (0.0, 1.0),
            1 => (1.0, 0.0),
            2 => (0.0, -1.0),
            _ => (-1.0, 0.0),
        };
    }
    degrees.to_radians().sin_cos()
}

/// Rotates `p` counter-clockwise on screen (y down) about `pivot`.
pub fn rotate_point(p: Point, pivot: Point, sin: f64, cos: f64) -> Point {
    let d = p - pivot;
    Point::new(
        pivot.x + d.x * cos + d.y * sin,
        pivot.y - d.x * sin + d.y * cos,
    )
}

/// A rotated rectangle with center, extents and orientation.
///
/// Construction validates extents and normalizes θ to (−π/2, π/2].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedBox {
    cx: f64,
    cy: f64,
    w: f64,
    h: f64,
    theta: f64,
}

impl OrientedBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64, theta: f64) -> Result<Self> {
        if ![cx, cy, w, h, theta].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidBox(format!(
                "non-finite parameter in ({cx}, {cy}, {w}, {h}, {theta})"
            )));
        }
        if w <= 0.0 || h <= 0.0 {
            return Err(Error::InvalidBox(format!(
                "extents must be positive, got w={w} h={h}"
            )));
        }
        Ok(Self {
            cx,
            cy,
            w,
            h,
            theta: normalize_angle(theta),
        })
    }

    /// Same as [`OrientedBox::new`] with the angle given in degrees.
    pub fn from_degrees(cx: f64, cy: f64, w: f64, h: f64, theta_deg: f64) -> Result<Self> {
        Self::new(cx, cy, w, h, deg_to_rad(theta_deg))
    }

    pub fn cx(&self) -> f64 {
        self.cx
    }
    pub fn cy(&self) -> f64 {
        self.cy
    }
    pub fn w(&self) -> f64 {
        self.w
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    /// Normalized angle in radians.
    pub fn theta(&self) -> f64 {
        self.theta
    }
    pub fn theta_deg(&self) -> f64 {
        rad_to_deg(self.theta)
    }

    pub fn center(&self) -> Point {
        Point::new(self.cx, self.cy)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Unit vectors along the width and height axes.
    pub fn axes(&self) -> (Point, Point) {
        let (s, c) = self.theta.sin_cos();
        (Point::new(c, -s), Point::new(s, c))
    }

    /// Corners in the order top-left, top-right, bottom-right, bottom-left
    /// of the box's own frame. The shoelace area of this order is positive.
    pub fn corners(&self) -> [Point; 4] {
        let (u, v) = self.axes();
        let a = u.scale(self.w / 2.0);
        let b = v.scale(self.h / 2.0);
        let c = self.center();
        [c - a - b, c + a - b, c + a + b, c - a + b]
    }

    pub fn to_polygon(&self) -> ConvexPolygon {
        ConvexPolygon {
            vertices: self.corners().to_vec(),
        }
    }

    pub fn translated(&self, dx: f64, dy: f64) -> OrientedBox {
        OrientedBox {
            cx: self.cx + dx,
            cy: self.cy + dy,
            ..*self
        }
    }

    /// Rotates the box counter-clockwise (on screen) by `alpha` radians about `pivot`.
    pub fn rotated_about(&self, pivot: Point, alpha: f64) -> OrientedBox {
        let (s, c) = alpha.sin_cos();
        let p = rotate_point(self.center(), pivot, s, c);
        OrientedBox {
            cx: p.x,
            cy: p.y,
            w: self.w,
            h: self.h,
            theta: normalize_angle(self.theta + alpha),
        }
    }
}

pub(crate) fn deg_to_rad(deg: f64) -> f64 {
    // Keep right angles bit-exact so that 90° maps onto π/2 itself.
    if deg % 90.0 == 0.0 {
        FRAC_PI_2 * (deg / 90.0)
    } else {
        deg.to_radians()
    }
}

pub(crate) fn rad_to_deg(rad: f64) -> f64 {
    let quarters = rad / FRAC_PI_2;
    if quarters == quarters.round() {
        quarters * 90.0
    } else {
        rad.to_degrees()
    }
}

/// A convex polygon with counter-clockwise (positive shoelace) vertex order.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexPolygon {
    vertices: Vec<Point>,
}

impl ConvexPolygon {
    pub fn new(vertices: Vec<Point>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::invalid(format!(
                "polygon needs at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if vertices
            .iter()
            .any(|p| !p.x.is_finite() || !p.y.is_finite())
        {
            return Err(Error::invalid("polygon has non-finite vertex"));
        }
        if signed_area(&vertices) <= 0.0 {
            return Err(Error::invalid(
                "polygon must have positive (counter-clockwise) signed area",
            ));
        }
        let n = vertices.len();
        for i in 0..n {
            let e1 = vertices[(i + 1) % n] - vertices[i];
            let e2 = vertices[(i + 2) % n] - vertices[(i + 1) % n];
            if e1.cross(e2) < -CONVEXITY_TOLERANCE * e1.norm() * e2.norm() {
                return Err(Error::invalid(format!(
                    "polygon is not convex at vertex {}",
                    (i + 1) % n
                )));
            }
        }
        Ok(Self { vertices })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }
}

/// Shoelace formula; positive for counter-clockwise order.
pub fn signed_area(vertices: &[Point]) -> f64 {
    let n = vertices.len();
    if n < 3 {
        return 0.0;
    }
    let twice: f64 = (0..n)
        .map(|i| vertices[i].cross(vertices[(i + 1) % n]))
        .sum();
    twice / 2.0
}

/// Area of `a ∩ b` by Sutherland–Hodgman clipping of `a` against every edge of `b`.
pub fn intersect(a: &ConvexPolygon, b: &ConvexPolygon) -> f64 {
    let mut subject = a.vertices.clone();
    let clip = &b.vertices;
    let n = clip.len();
    for i in 0..n {
        if subject.is_empty() {
            return 0.0;
        }
        let edge_start = clip[i];
        let edge = clip[(i + 1) % n] - edge_start;
        let side = |p: Point| edge.cross(p - edge_start);

        let mut clipped = Vec::with_capacity(subject.len() + 1);
        let m = subject.len();
        for j in 0..m {
            let cur = subject[j];
            let next = subject[(j + 1) % m];
            let (sc, sn) = (side(cur), side(next));
            if sc >= 0.0 {
                clipped.push(cur);
            }
            if (sc >= 0.0) != (sn >= 0.0) {
                let t = sc / (sc - sn);
                clipped.push(cur + (next - cur).scale(t));
            }
        }
        subject = clipped;
    }
    let area = signed_area(&subject);
    if area < AREA_EPSILON {
        0.0
    } else {
        area
    }
}

/// Intersection over union of two oriented boxes, computed exactly.
pub fn rotated_iou(a: &OrientedBox, b: &OrientedBox) -> f64 {
    // Cheap reject on circumscribed circles.
    let reach = (a.w.hypot(a.h) + b.w.hypot(b.h)) / 2.0;
    if (a.center() - b.center()).norm() >= reach {
        return 0.0;
    }
    let inter = intersect(&a.to_polygon(), &b.to_polygon());
    if inter == 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Greedy non-maximum suppression over oriented boxes.
///
/// Returns kept indices in descending score order. Equal scores keep the
/// lower index first. A box is dropped when its IoU with any kept box is
/// strictly greater than `iou_threshold`.
pub fn rotated_nms(
    boxes: &[OrientedBox],
    scores: &[f64],
    iou_threshold: f64,
) -> Result<Vec<usize>> {
    if boxes.len() != scores.len() {
        return Err(Error::invalid(format!(
            "{} boxes but {} scores",
            boxes.len(),
            scores.len()
        )));
    }
    if !(0.0..=1.0).contains(&iou_threshold) {
        return Err(Error::invalid(format!(
            "iou threshold {iou_threshold} outside [0, 1]"
        )));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::invalid(format!("score {i} is not finite")));
    }

    let order = descending_order(scores);
    let mut kept: Vec<usize> = Vec::new();
    for idx in order {
        let suppressed = kept
            .iter()
            .any(|&k| rotated_iou(&boxes[k], &boxes[idx]) > iou_threshold);
        if !suppressed {
            kept.push(idx);
        }
    }
    Ok(kept)
}

/// Indices sorted by descending score, ties by ascending index.
pub(crate) fn descending_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]).then(i.cmp(&j)));
    order
}

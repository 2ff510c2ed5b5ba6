//! Billiard table geometry.
//!
//! A [`Table`] is a list of boundary pieces (line segments and circular arcs)
//! carrying a global arc-length coordinate `r`. The boundary is traversed with
//! the billiard domain on the **left**, so the inward unit normal is always the
//! tangent rotated by +90 degrees. Under that convention an arc traversed
//! counterclockwise around its own center is a focusing wall (the domain lies
//! on the center side, as for the stadium caps) and an arc traversed clockwise
//! is dispersing (a scatterer seen from outside); straight walls are neutral.
//!
//! Reported curvature follows the dispersing-positive sign convention:
//! `+1/rho` on scatterer arcs, `-1/rho` on focusing arcs, `0` on segments.
//!
//! Tables live either in the plane (stadium, diamond) or on the unit torus
//! (Sinai scatterers); ray tracing in [`ray`] handles both.

mod diamond;
mod ray;
mod sinai;
mod stadium;

pub use diamond::{build_diamond, DiamondSpec};
pub use ray::{ray_next_collision, RayFault, RayHit};
pub use sinai::{build_sinai, build_sinai_sampled, default_scatterers, HorizonReport};
pub use stadium::build_stadium;

use crate::Vec2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Arc-length slack when validating that consecutive pieces chain up, and the
/// relative tolerance for the piece-sum perimeter cross-check.
pub const CHAIN_TOLERANCE: f64 = 1e-9;

/// Collisions closer than this (in arc length) to a true corner are refused
/// rather than resolved; the billiard map is discontinuous there.
pub const CORNER_TOLERANCE: f64 = 1e-9;

/// Post-reflection angles with `|phi| > pi/2 - TANGENCY_TOLERANCE` count as
/// tangential grazes and are refused.
pub const TANGENCY_TOLERANCE: f64 = 1e-7;

/// Minimum admissible flight length; shorter intersections are treated as the
/// ray re-detecting its own start point and are skipped.
pub const MIN_FLIGHT: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("parameter {name} must be positive, got {value}")]
    NonPositiveParam { name: &'static str, value: f64 },
    #[error("scatterer {i} and {j} overlap: torus center distance {dist:.6} < radius sum {sum:.6}")]
    OverlappingScatterers { i: usize, j: usize, dist: f64, sum: f64 },
    #[error("scatterer {i} overlaps its own torus translate: diameter {diameter:.6} >= 1")]
    SelfOverlap { i: usize, diameter: f64 },
    #[error("scatterer list is empty")]
    NoScatterers,
    #[error("adjacent arcs do not intersect: center distance {dist:.6} >= radius sum {sum:.6}")]
    ArcsDoNotIntersect { dist: f64, sum: f64 },
    #[error("arc radius {radius:.6} >= sqrt(2) x offset {offset:.6}: the enclosed region is empty")]
    ArcsSwallowDomain { radius: f64, offset: f64 },
    #[error("corner angle {angle:.6} rad is below the transversality floor {floor:.6}")]
    NonTransversalCorner { angle: f64, floor: f64 },
    #[error("boundary chain broken between pieces {prev} and {next}: gap {gap:.3e}")]
    ChainBroken { prev: usize, next: usize, gap: f64 },
    #[error("arc-length coordinate {r:.12} lies within {tol:.1e} of a corner")]
    AtCorner { r: f64, tol: f64 },
}

/// How a table is embedded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Topology {
    Plane,
    /// Fundamental domain `[0,1)^2` with opposite sides identified.
    UnitTorus,
}

/// Shape of a single boundary piece.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub enum PieceKind {
    Segment {
        a: Vec2,
        b: Vec2,
    },
    Arc {
        center: Vec2,
        radius: f64,
        /// Angle of the piece's start point as seen from the center.
        start_angle: f64,
        /// Signed angular extent; positive sweeps counterclockwise around the
        /// center (focusing), negative clockwise (dispersing). A full circle
        /// is `sweep = -2*pi` for a scatterer.
        sweep: f64,
    },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BoundaryPiece {
    pub kind: PieceKind,
}

impl BoundaryPiece {
    pub fn segment(a: Vec2, b: Vec2) -> Self {
        BoundaryPiece {
            kind: PieceKind::Segment { a, b },
        }
    }

    pub fn arc(center: Vec2, radius: f64, start_angle: f64, sweep: f64) -> Self {
        BoundaryPiece {
            kind: PieceKind::Arc {
                center,
                radius,
                start_angle,
                sweep,
            },
        }
    }

    pub fn length(&self) -> f64 {
        match self.kind {
            PieceKind::Segment { a, b } => (b - a).norm(),
            PieceKind::Arc { radius, sweep, .. } => radius * sweep.abs(),
        }
    }

    /// Curvature in the dispersing-positive convention.
    pub fn curvature(&self) -> f64 {
        match self.kind {
            PieceKind::Segment { .. } => 0.0,
            PieceKind::Arc { radius, sweep, .. } => -sweep.signum() / radius,
        }
    }

    /// Point at arc length `s` from the piece start (`0 <= s <= length`).
    pub fn point_at(&self, s: f64) -> Vec2 {
        match self.kind {
            PieceKind::Segment { a, b } => {
                let dir = (b - a).normalized();
                a + dir * s
            }
            PieceKind::Arc {
                center,
                radius,
                start_angle,
                sweep,
            } => {
                let theta = start_angle + sweep.signum() * s / radius;
                center + Vec2::from_angle(theta) * radius
            }
        }
    }

    /// Unit tangent in the traversal direction at arc length `s`.
    pub fn tangent_at(&self, s: f64) -> Vec2 {
        match self.kind {
            PieceKind::Segment { a, b } => (b - a).normalized(),
            PieceKind::Arc {
                radius,
                start_angle,
                sweep,
                ..
            } => {
                let theta = start_angle + sweep.signum() * s / radius;
                // d/ds of center + rho*e(theta(s)) with theta' = sign/rho.
                Vec2::new(-theta.sin(), theta.cos()) * sweep.signum()
            }
        }
    }

    pub fn start(&self) -> Vec2 {
        self.point_at(0.0)
    }

    pub fn end(&self) -> Vec2 {
        self.point_at(self.length())
    }

    /// Is the angle `theta` (as seen from an arc's center) inside the sweep?
    /// Always true for segments.
    pub fn angle_in_range(&self, theta: f64) -> bool {
        match self.kind {
            PieceKind::Segment { .. } => true,
            PieceKind::Arc {
                start_angle, sweep, ..
            } => {
                if sweep.abs() >= 2.0 * std::f64::consts::PI - 1e-12 {
                    return true;
                }
                let offset = if sweep >= 0.0 {
                    wrap_angle_positive(theta - start_angle)
                } else {
                    wrap_angle_positive(start_angle - theta)
                };
                offset <= sweep.abs() + 1e-12
            }
        }
    }

    /// Arc length from the piece start to the boundary point at angle `theta`
    /// (arcs only; must be inside the sweep).
    pub fn arc_length_of_angle(&self, theta: f64) -> f64 {
        match self.kind {
            PieceKind::Segment { .. } => unreachable!("arc_length_of_angle on a segment"),
            PieceKind::Arc {
                radius,
                start_angle,
                sweep,
                ..
            } => {
                let offset = if sweep >= 0.0 {
                    wrap_angle_positive(theta - start_angle)
                } else {
                    wrap_angle_positive(start_angle - theta)
                };
                (offset * radius).min(self.length())
            }
        }
    }
}

/// Wrap an angle into `[0, 2*pi)`.
pub fn wrap_angle_positive(theta: f64) -> f64 {
    theta.rem_euclid(2.0 * std::f64::consts::PI)
}

/// A genuine (tangent-discontinuous) boundary corner.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Corner {
    /// Global arc-length coordinate of the corner.
    pub r: f64,
    pub point: Vec2,
    /// Interior wedge angle of the domain at the corner (pi = smooth).
    pub interior_angle: f64,
}

/// Interior membership test, table-family specific.
#[derive(Debug, Clone, Serialize, Deserialize)]
enum Interior {
    Stadium {
        half_length: f64,
    },
    /// Complement of a disc union, optionally restricted to a bounding box
    /// (diamond) or wrapped on the torus (Sinai).
    OutsideDiscs {
        discs: Vec<(Vec2, f64)>,
        torus: bool,
        bbox: Option<[f64; 4]>,
    },
}

/// A complete billiard table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Table {
    topology: Topology,
    pieces: Vec<BoundaryPiece>,
    /// `cum_len[i]` = arc length at the *end* of piece `i`.
    cum_len: Vec<f64>,
    perimeter: f64,
    area: f64,
    corners: Vec<Corner>,
    interior: Interior,
    /// Free-flight report for torus tables (None for planar tables).
    horizon: Option<HorizonReport>,
}

/// Everything known about a boundary point addressed by arc length.
#[derive(Debug, Clone, Copy)]
pub struct BoundarySample {
    /// The input coordinate wrapped into `[0, perimeter)`.
    pub r: f64,
    pub point: Vec2,
    /// Unit tangent in the traversal direction.
    pub tangent: Vec2,
    /// Inward unit normal (tangent rotated +90 degrees).
    pub normal: Vec2,
    /// Dispersing-positive curvature.
    pub curvature: f64,
    pub piece: usize,
}

impl Table {
    /// Assemble a table from ordered pieces; validates chain closure and
    /// computes arc length, area (Green's theorem) and corner data.
    ///
    /// `component_starts` lists the piece index opening each closed chain
    /// (a single `[0]` for one closed curve; one entry per scatterer circle).
    fn assemble(
        topology: Topology,
        pieces: Vec<BoundaryPiece>,
        component_starts: Vec<usize>,
        interior: Interior,
        horizon: Option<HorizonReport>,
    ) -> Result<Table, GeometryError> {
        assert!(!pieces.is_empty());
        let mut cum = Vec::with_capacity(pieces.len());
        let mut total = 0.0;
        for p in &pieces {
            total += p.length();
            cum.push(total);
        }

        // Chain closure within every component, corner detection at junctions.
        let mut corners = Vec::new();
        for (ci, &start) in component_starts.iter().enumerate() {
            let end = component_starts
                .get(ci + 1)
                .copied()
                .unwrap_or(pieces.len());
            for i in start..end {
                let j = if i + 1 < end { i + 1 } else { start };
                let gap = (pieces[i].end() - pieces[j].start()).norm();
                if gap > CHAIN_TOLERANCE {
                    return Err(GeometryError::ChainBroken {
                        prev: i,
                        next: j,
                        gap,
                    });
                }
                if i == j {
                    continue; // single-piece component (full circle)
                }
                let t_out = pieces[i].tangent_at(pieces[i].length());
                let t_in = pieces[j].tangent_at(0.0);
                // Signed turn at the junction; |turn| > 0 means a corner.
                let turn = t_out.cross(t_in).atan2(t_out.dot(t_in));
                if turn.abs() > 1e-9 {
                    // Canonical coordinate: end of piece i, except for the
                    // junction closing the loop, which lives at the start.
                    let r = if i + 1 < end {
                        cum[i]
                    } else if start == 0 {
                        0.0
                    } else {
                        cum[start - 1]
                    };
                    corners.push(Corner {
                        r,
                        point: pieces[j].start(),
                        interior_angle: std::f64::consts::PI - turn.abs(),
                    });
                }
            }
        }
        corners.sort_by(|a, b| a.r.partial_cmp(&b.r).unwrap());

        // Area by Green's theorem; torus tables add the fundamental domain.
        let mut area = match topology {
            Topology::Plane => 0.0,
            Topology::UnitTorus => 1.0,
        };
        for p in &pieces {
            area += green_area_contribution(p);
        }

        Ok(Table {
            topology,
            pieces,
            cum_len: cum,
            perimeter: total,
            area,
            corners,
            interior,
            horizon,
        })
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn perimeter(&self) -> f64 {
        self.perimeter
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    pub fn pieces(&self) -> &[BoundaryPiece] {
        &self.pieces
    }

    pub fn corners(&self) -> &[Corner] {
        &self.corners
    }

    pub fn horizon(&self) -> Option<&HorizonReport> {
        self.horizon.as_ref()
    }

    /// Mean free path `pi * area / perimeter` — exact for every billiard
    /// (the phase-space average of the flight time).
    pub fn mean_free_path(&self) -> f64 {
        std::f64::consts::PI * self.area / self.perimeter
    }

    /// Global arc-length range `[r0, r1)` occupied by piece `idx`.
    pub fn piece_range(&self, idx: usize) -> (f64, f64) {
        let r0 = if idx == 0 { 0.0 } else { self.cum_len[idx - 1] };
        (r0, self.cum_len[idx])
    }

    /// Locate the piece containing arc-length coordinate `r` (wrapped);
    /// returns `(piece index, local offset)`.
    pub fn locate(&self, r: f64) -> (usize, f64) {
        let r = r.rem_euclid(self.perimeter);
        let idx = self.cum_len.partition_point(|&end| end <= r);
        let idx = idx.min(self.pieces.len() - 1);
        let (r0, _) = self.piece_range(idx);
        (idx, r - r0)
    }

    /// Wrapped arc-length distance along the whole boundary.
    pub fn boundary_distance(&self, r1: f64, r2: f64) -> f64 {
        let d = (r1 - r2).rem_euclid(self.perimeter);
        d.min(self.perimeter - d)
    }

    /// Resolve a boundary point; refuses coordinates within
    /// [`CORNER_TOLERANCE`] of a true corner.
    pub fn boundary_point(&self, r: f64) -> Result<BoundarySample, GeometryError> {
        let wrapped = r.rem_euclid(self.perimeter);
        for c in &self.corners {
            if self.boundary_distance(wrapped, c.r) < CORNER_TOLERANCE {
                return Err(GeometryError::AtCorner {
                    r: wrapped,
                    tol: CORNER_TOLERANCE,
                });
            }
        }
        let (idx, s) = self.locate(wrapped);
        let piece = &self.pieces[idx];
        let tangent = piece.tangent_at(s);
        Ok(BoundarySample {
            r: wrapped,
            point: piece.point_at(s),
            tangent,
            normal: tangent.perp(),
            curvature: piece.curvature(),
            piece: idx,
        })
    }

    /// Is `p` inside the (closed) billiard domain?
    pub fn contains(&self, p: Vec2) -> bool {
        match &self.interior {
            Interior::Stadium { half_length } => {
                let l = *half_length;
                (p.x.abs() <= l && p.y.abs() <= 1.0)
                    || (p - Vec2::new(l, 0.0)).norm() <= 1.0
                    || (p - Vec2::new(-l, 0.0)).norm() <= 1.0
            }
            Interior::OutsideDiscs { discs, torus, bbox } => {
                if let Some([x0, y0, x1, y1]) = bbox {
                    if p.x < *x0 || p.x > *x1 || p.y < *y0 || p.y > *y1 {
                        return false;
                    }
                }
                discs.iter().all(|&(c, rho)| {
                    let d = if *torus {
                        torus_distance(p, c)
                    } else {
                        (p - c).norm()
                    };
                    d >= rho
                })
            }
        }
    }

    /// Global arc-length coordinate of the boundary point of piece `idx` at
    /// center-angle `theta` (arcs only).
    pub fn r_of_arc_angle(&self, idx: usize, theta: f64) -> f64 {
        let (r0, _) = self.piece_range(idx);
        r0 + self.pieces[idx].arc_length_of_angle(theta)
    }
}

/// Signed area contribution of one piece via Green's theorem
/// (`integral of (x dy - y dx) / 2` along the piece).
fn green_area_contribution(p: &BoundaryPiece) -> f64 {
    match p.kind {
        PieceKind::Segment { a, b } => a.cross(b) / 2.0,
        PieceKind::Arc {
            center,
            radius,
            start_angle,
            sweep,
        } => {
            let e1 = Vec2::from_angle(start_angle);
            let e2 = Vec2::from_angle(start_angle + sweep);
            (center.cross(e2 - e1) * radius + radius * radius * sweep) / 2.0
        }
    }
}

/// Shortest displacement from `b` to `a` on the unit torus, componentwise in
/// `[-1/2, 1/2)`.
pub fn torus_displacement(a: Vec2, b: Vec2) -> Vec2 {
    let wrap = |d: f64| d - (d + 0.5).floor();
    Vec2::new(wrap(a.x - b.x), wrap(a.y - b.y))
}

/// Euclidean distance on the unit torus.
pub fn torus_distance(a: Vec2, b: Vec2) -> f64 {
    torus_displacement(a, b).norm()
}

/// Wrap a point into the fundamental domain `[0,1)^2`.
pub fn torus_wrap(p: Vec2) -> Vec2 {
    Vec2::new(p.x.rem_euclid(1.0), p.y.rem_euclid(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn green_area_of_unit_circle() {
        let full = BoundaryPiece::arc(Vec2::new(3.0, -1.0), 1.0, 0.3, 2.0 * std::f64::consts::PI);
        let a = green_area_contribution(&full);
        assert!((a - std::f64::consts::PI).abs() < 1e-12);
        // Clockwise traversal flips the sign.
        let cw = BoundaryPiece::arc(Vec2::new(3.0, -1.0), 1.0, 0.3, -2.0 * std::f64::consts::PI);
        assert!((green_area_contribution(&cw) + std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn arc_tangent_and_normal_follow_traversal() {
        // Counterclockwise quarter arc of the unit circle starting at angle 0.
        let arc = BoundaryPiece::arc(Vec2::ZERO, 1.0, 0.0, std::f64::consts::FRAC_PI_2);
        let t = arc.tangent_at(0.0);
        assert!((t - Vec2::new(0.0, 1.0)).norm() < 1e-12);
        // Domain on the left: inward normal points toward the center.
        assert!((t.perp() - Vec2::new(-1.0, 0.0)).norm() < 1e-12);
        assert!((arc.curvature() + 1.0).abs() < 1e-12, "ccw arc is focusing");

        // Clockwise (scatterer) arc: normal points away from the center.
        let sc = BoundaryPiece::arc(Vec2::ZERO, 0.5, std::f64::consts::FRAC_PI_2, -std::f64::consts::PI);
        let t = sc.tangent_at(0.0);
        assert!((t - Vec2::new(1.0, 0.0)).norm() < 1e-12);
        assert!((t.perp() - Vec2::new(0.0, 1.0)).norm() < 1e-12);
        assert!((sc.curvature() - 2.0).abs() < 1e-12, "scatterer curvature +1/rho");
    }

    #[test]
    fn torus_distance_wraps() {
        let a = Vec2::new(0.95, 0.1);
        let b = Vec2::new(0.05, 0.1);
        assert!((torus_distance(a, b) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn angle_range_handles_wrapping_sweeps() {
        let arc = BoundaryPiece::arc(Vec2::ZERO, 1.0, 3.0, 1.0); // covers [3.0, 4.0]
        assert!(arc.angle_in_range(3.5));
        assert!(arc.angle_in_range(4.0 - 2.0 * std::f64::consts::PI));
        assert!(!arc.angle_in_range(2.0));
        let cw = BoundaryPiece::arc(Vec2::ZERO, 1.0, 0.5, -1.0); // covers [-0.5, 0.5]
        assert!(cw.angle_in_range(0.0));
        assert!(cw.angle_in_range(-0.4));
        assert!(!cw.angle_in_range(1.0));
    }
}

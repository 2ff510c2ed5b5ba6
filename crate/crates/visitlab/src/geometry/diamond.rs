//! The diamond table: four dispersing arcs of radius `R`, centered at the
//! corners `(+-offset, +-offset)` of a square, bounding the curvilinear
//! diamond caught between them.
//!
//! The table is posed so its left corner sits at the origin with the
//! horizontal axis as angle bisector; the corners are then `(0, 0)`,
//! `(2w, 0)` and `(w, +-w)` with half-width `w = offset - sqrt(R^2 -
//! offset^2)`. All four corner angles equal `pi - acos(1 - 2 offset^2 / R^2)`
//! and the builder rejects shapes whose corners come too close to a cusp.

use super::{BoundaryPiece, GeometryError, Interior, Table, Topology};
use crate::Vec2;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Corners flatter than this (interior wedge angle, radians) are refused:
/// the collision map degenerates as the walls become tangent.
pub const MIN_CORNER_ANGLE: f64 = 0.1;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DiamondSpec {
    /// Radius of the four bounding arcs.
    pub radius: f64,
    /// Arc centers sit at `(+-offset, +-offset)` around the diamond center.
    pub offset: f64,
}

impl Default for DiamondSpec {
    fn default() -> Self {
        DiamondSpec {
            radius: 2.5,
            offset: 2.0,
        }
    }
}

pub fn build_diamond(spec: DiamondSpec) -> Result<Table, GeometryError> {
    let (radius, c) = (spec.radius, spec.offset);
    if !(radius > 0.0) {
        return Err(GeometryError::NonPositiveParam {
            name: "radius",
            value: radius,
        });
    }
    if !(c > 0.0) {
        return Err(GeometryError::NonPositiveParam {
            name: "offset",
            value: c,
        });
    }
    // Adjacent centers are 2*offset apart; their circles must cross.
    if radius <= c {
        return Err(GeometryError::ArcsDoNotIntersect {
            dist: 2.0 * c,
            sum: 2.0 * radius,
        });
    }
    let s = (radius * radius - c * c).sqrt();
    let w = c - s;
    if w <= 1e-9 {
        return Err(GeometryError::ArcsSwallowDomain {
            radius,
            offset: c,
        });
    }

    // Corner directions seen from an arc center: alpha toward the near axis
    // corner, beta toward the far one; each arc subtends delta = alpha - beta.
    let alpha = c.atan2(s);
    let beta = s.atan2(c);
    let delta = alpha - beta;
    let pieces = vec![
        BoundaryPiece::arc(Vec2::new(w - c, -c), radius, alpha, -delta),
        BoundaryPiece::arc(Vec2::new(w + c, -c), radius, PI - beta, -delta),
        BoundaryPiece::arc(Vec2::new(w + c, c), radius, alpha - PI, -delta),
        BoundaryPiece::arc(Vec2::new(w - c, c), radius, -beta, -delta),
    ];
    let discs = pieces
        .iter()
        .map(|p| match p.kind {
            super::PieceKind::Arc { center, .. } => (center, radius),
            _ => unreachable!(),
        })
        .collect();
    let table = Table::assemble(
        Topology::Plane,
        pieces,
        vec![0],
        Interior::OutsideDiscs {
            discs,
            torus: false,
            bbox: Some([0.0, -w, 2.0 * w, w]),
        },
        None,
    )?;

    for corner in table.corners() {
        if corner.interior_angle < MIN_CORNER_ANGLE {
            return Err(GeometryError::NonTransversalCorner {
                angle: corner.interior_angle,
                floor: MIN_CORNER_ANGLE,
            });
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_shape_closed_forms() {
        // radius 2.5, offset 2: corner directions have cosine 0.96, so the
        // perimeter is 4 * 2.5 * acos(0.96) and the area is the corner square
        // minus four circular segments of angle acos(0.96) (whose sine is
        // exactly 0.28).
        let t = build_diamond(DiamondSpec::default()).unwrap();
        let theta = 0.96f64.acos();
        assert!((t.perimeter() - 10.0 * theta).abs() < 1e-12);
        assert!((t.area() - (0.5 - 12.5 * (theta - 0.28))).abs() < 1e-12);
        assert!((t.perimeter() - 2.837941092083276).abs() < 1e-12);
        assert!((t.area() - 0.4525736348958862).abs() < 1e-12);
    }

    #[test]
    fn default_corners_and_angles() {
        let t = build_diamond(DiamondSpec::default()).unwrap();
        let corners = t.corners();
        assert_eq!(corners.len(), 4);
        // Left corner pinned to the origin, bisected by the x axis.
        assert!(corners[0].r.abs() < 1e-12);
        assert!(corners[0].point.norm() < 1e-9);
        let expected: Vec<Vec2> = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(0.5, -0.5),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.5, 0.5),
        ];
        for (corner, want) in corners.iter().zip(&expected) {
            assert!((corner.point - *want).norm() < 1e-9, "{:?}", corner);
            let wedge = PI - (1.0f64 - 2.0 * 4.0 / 6.25).acos();
            assert!((corner.interior_angle - wedge).abs() < 1e-9);
        }
        // Corner spacing is one arc length each.
        let quarter = t.perimeter() / 4.0;
        for (i, corner) in corners.iter().enumerate() {
            assert!((corner.r - i as f64 * quarter).abs() < 1e-9);
        }
    }

    #[test]
    fn walls_curve_away_from_the_interior() {
        let t = build_diamond(DiamondSpec::default()).unwrap();
        for piece in t.pieces() {
            assert!((piece.curvature() - 0.4).abs() < 1e-12);
        }
        // Midpoint of the bottom-left wall sits at 45 degrees from its arc
        // center; the inward normal points up-right, away from that center.
        let mid = t.boundary_point(t.perimeter() / 8.0).unwrap();
        let e = Vec2::new(std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2);
        let arc_center = Vec2::new(0.5 - 2.0, -2.0);
        assert!((mid.point - (arc_center + e * 2.5)).norm() < 1e-9);
        assert!((mid.normal - e).norm() < 1e-9);
    }

    #[test]
    fn interior_membership() {
        let t = build_diamond(DiamondSpec::default()).unwrap();
        assert!(t.contains(Vec2::new(0.5, 0.0)));
        assert!(t.contains(Vec2::new(0.05, 0.0)));
        assert!(!t.contains(Vec2::new(0.5, 0.51))); // beyond the top corner
        assert!(!t.contains(Vec2::new(0.1, 0.45))); // inside the top-left disc
        assert!(!t.contains(Vec2::new(-0.01, 0.0)));
    }

    #[test]
    fn non_intersecting_arcs_rejected() {
        let bad = DiamondSpec {
            radius: 2.0,
            offset: 3.0,
        };
        assert!(matches!(
            build_diamond(bad),
            Err(GeometryError::ArcsDoNotIntersect { .. })
        ));
    }

    #[test]
    fn empty_interior_rejected() {
        // radius >= sqrt(2) * offset collapses the diamond to nothing.
        let bad = DiamondSpec {
            radius: 2.0 * std::f64::consts::SQRT_2,
            offset: 2.0,
        };
        assert!(matches!(
            build_diamond(bad),
            Err(GeometryError::ArcsSwallowDomain { .. })
        ));
    }

    #[test]
    fn near_cusp_corners_rejected() {
        // Barely-crossing circles meet at a grazing angle.
        let bad = DiamondSpec {
            radius: 2.001,
            offset: 2.0,
        };
        assert!(matches!(
            build_diamond(bad),
            Err(GeometryError::NonTransversalCorner { .. })
        ));
    }
}

//! The stadium table: a rectangle `[-l/2, l/2] x [-1, 1]` capped by two unit
//! half-discs centered at `(+-l/2, 0)`.

use super::{BoundaryPiece, GeometryError, Interior, Table, Topology};
use crate::Vec2;
use std::f64::consts::{FRAC_PI_2, PI};

/// Build a stadium with two unit-radius caps and straight sides spanning
/// `[-l/2, l/2]`; the argument is the full flat length `l`, so the perimeter
/// is `2l + 2*pi` and the area `2l + pi`.
///
/// Arc length starts at the bottom-left junction `(-l/2, -1)` and runs
/// counterclockwise: bottom flat, right cap, top flat, left cap. The boundary
/// is C^1 (caps join the flats tangentially), so the table has no corners.
pub fn build_stadium(flat_length: f64) -> Result<Table, GeometryError> {
    if !(flat_length > 0.0) {
        return Err(GeometryError::NonPositiveParam {
            name: "flat_length",
            value: flat_length,
        });
    }
    let h = flat_length / 2.0;
    let pieces = vec![
        BoundaryPiece::segment(Vec2::new(-h, -1.0), Vec2::new(h, -1.0)),
        BoundaryPiece::arc(Vec2::new(h, 0.0), 1.0, -FRAC_PI_2, PI),
        BoundaryPiece::segment(Vec2::new(h, 1.0), Vec2::new(-h, 1.0)),
        BoundaryPiece::arc(Vec2::new(-h, 0.0), 1.0, FRAC_PI_2, PI),
    ];
    Table::assemble(
        Topology::Plane,
        pieces,
        vec![0],
        Interior::Stadium { half_length: h },
        None,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::CORNER_TOLERANCE;

    #[test]
    fn perimeter_and_area_closed_forms() {
        let t = build_stadium(2.0).unwrap();
        assert!((t.perimeter() - (4.0 + 2.0 * PI)).abs() < 1e-12);
        assert!((t.area() - (4.0 + PI)).abs() < 1e-12);
        // Piece lengths sum to the perimeter.
        let sum: f64 = t.pieces().iter().map(|p| p.length()).sum();
        assert!((sum - t.perimeter()).abs() / t.perimeter() < 1e-9);
    }

    #[test]
    fn degenerate_length_rejected() {
        assert!(build_stadium(0.0).is_err());
        assert!(build_stadium(-1.0).is_err());
    }

    #[test]
    fn right_cap_midpoint_and_normal() {
        let t = build_stadium(2.0).unwrap();
        // Bottom flat has length 2; cap midpoint sits at r = 2 + pi/2.
        let s = t.boundary_point(2.0 + FRAC_PI_2).unwrap();
        assert!((s.point - Vec2::new(2.0, 0.0)).norm() < 1e-12);
        assert!((s.normal - Vec2::new(-1.0, 0.0)).norm() < 1e-12);
        assert!((s.curvature + 1.0).abs() < 1e-12, "caps are focusing");
    }

    #[test]
    fn junctions_are_smooth_not_corners() {
        let t = build_stadium(2.0).unwrap();
        assert!(t.corners().is_empty());
        // Coordinate r = 2.0 is a junction but resolvable.
        assert!(t.boundary_point(2.0).is_ok());
        let _ = CORNER_TOLERANCE; // corners simply don't exist here
    }

    #[test]
    fn wrapping_r_by_perimeter_is_identity() {
        let t = build_stadium(2.0).unwrap();
        let a = t.boundary_point(0.7).unwrap();
        let b = t.boundary_point(0.7 + t.perimeter()).unwrap();
        assert!((a.point - b.point).norm() < 1e-12);
        assert!((a.r - b.r).abs() < 1e-12);
    }

    #[test]
    fn contains_distinguishes_inside_and_outside() {
        let t = build_stadium(2.0).unwrap();
        assert!(t.contains(Vec2::new(0.0, 0.0)));
        assert!(t.contains(Vec2::new(1.9, 0.0))); // inside the right cap
        assert!(!t.contains(Vec2::new(1.9, 0.9)));
        assert!(!t.contains(Vec2::new(0.0, 1.1)));
    }
}

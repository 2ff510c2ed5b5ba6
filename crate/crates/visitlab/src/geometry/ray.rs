//! Ray tracing against a table boundary.
//!
//! Planar tables intersect the ray with every piece directly. Torus tables
//! march the ray through unit cells of the universal cover and test the 3x3
//! neighborhood of scatterer translates around each cell, which is exhaustive
//! because every scatterer has diameter < 1. Marching costs O(flight length),
//! so heavy-tailed free flights on infinite-horizon tables stay affordable.

use super::{
    BoundarySample, PieceKind, Table, Topology, MIN_FLIGHT, TANGENCY_TOLERANCE,
};
use crate::Vec2;
use thiserror::Error;

/// Give up marching a torus ray past this flight length; only a ray aimed
/// exactly down an open corridor can get anywhere near it.
const MAX_FLIGHT: f64 = 1.0e6;

#[derive(Debug, Error)]
pub enum RayFault {
    #[error("ray direction is zero or non-finite")]
    DegenerateDirection,
    #[error("ray from ({x:.6}, {y:.6}) found no collision within flight length {cap:.1}")]
    Escaped { x: f64, y: f64, cap: f64 },
    #[error("collision at r = {r:.9} lands on a boundary corner")]
    CornerHit { r: f64 },
    #[error("tangential graze at r = {r:.9} (cos of incidence {cos_in:.3e})")]
    TangentialGraze { r: f64, cos_in: f64 },
}

/// A resolved ray-boundary collision.
#[derive(Debug, Clone, Copy)]
pub struct RayHit {
    /// Free-flight length (equals flight time at unit speed).
    pub tau: f64,
    /// Unit direction of travel at impact.
    pub incoming: Vec2,
    /// Boundary data at the impact point.
    pub at: BoundarySample,
}

/// First collision of the ray `origin + t * dir` (`t > 0`) with the boundary.
///
/// Collisions landing on a corner or grazing the wall tangentially are
/// refused: the billiard map is not defined there.
pub fn ray_next_collision(table: &Table, origin: Vec2, dir: Vec2) -> Result<RayHit, RayFault> {
    let norm = dir.norm();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(RayFault::DegenerateDirection);
    }
    let d = dir * (1.0 / norm);
    let (tau, r) = match table.topology() {
        Topology::Plane => planar_hit(table, origin, d)?,
        Topology::UnitTorus => torus_hit(table, origin, d)?,
    };
    // Re-resolving through the arc-length coordinate snaps the collision
    // point back onto the boundary curve, so roundoff cannot accumulate
    // across bounces. Corner refusal comes along for free.
    let at = table
        .boundary_point(r)
        .map_err(|_| RayFault::CornerHit { r })?;
    let cos_in = -d.dot(at.normal);
    if cos_in < TANGENCY_TOLERANCE {
        return Err(RayFault::TangentialGraze { r, cos_in });
    }
    Ok(RayHit {
        tau,
        incoming: d,
        at,
    })
}

fn planar_hit(table: &Table, origin: Vec2, d: Vec2) -> Result<(f64, f64), RayFault> {
    let mut best: Option<(f64, f64)> = None;
    for (idx, piece) in table.pieces().iter().enumerate() {
        match piece.kind {
            PieceKind::Segment { a, b } => {
                let e = b - a;
                let len = e.norm();
                let denom = d.cross(e);
                if denom.abs() < 1e-14 {
                    continue; // parallel to the wall
                }
                let ao = a - origin;
                let t = ao.cross(e) / denom;
                let u = ao.cross(d) / denom;
                if t > MIN_FLIGHT && (-1e-12..=1.0 + 1e-12).contains(&u) {
                    let (r0, _) = table.piece_range(idx);
                    let r = r0 + (u * len).clamp(0.0, len);
                    if best.map_or(true, |(bt, _)| t < bt) {
                        best = Some((t, r));
                    }
                }
            }
            PieceKind::Arc { center, radius, .. } => {
                for t in circle_roots(origin, d, center, radius) {
                    let hit = origin + d * t;
                    let theta = (hit - center).angle();
                    if !piece.angle_in_range(theta) {
                        continue;
                    }
                    if best.map_or(true, |(bt, _)| t < bt) {
                        best = Some((t, table.r_of_arc_angle(idx, theta)));
                    }
                    break; // roots come sorted; the first valid one wins
                }
            }
        }
    }
    best.ok_or(RayFault::Escaped {
        x: origin.x,
        y: origin.y,
        cap: f64::INFINITY,
    })
}

/// Positive, Newton-polished intersection parameters of a ray with a circle,
/// in ascending order.
fn circle_roots(origin: Vec2, d: Vec2, center: Vec2, radius: f64) -> impl Iterator<Item = f64> {
    let oc = origin - center;
    let b = oc.dot(d);
    let c2 = oc.norm_sq() - radius * radius;
    let disc = b * b - c2;
    let roots = if disc >= 0.0 {
        let sq = disc.sqrt();
        [Some(-b - sq), Some(-b + sq)]
    } else {
        [None, None]
    };
    roots.into_iter().flatten().filter_map(move |root| {
        let mut t = root;
        // One Newton step against f(t) = |origin + t d - center|^2 - rho^2
        // recovers the precision the quadratic loses to cancellation.
        let p = oc + d * t;
        let fp = 2.0 * p.dot(d);
        if fp.abs() > 1e-12 {
            t -= (p.norm_sq() - radius * radius) / fp;
        }
        (t > MIN_FLIGHT).then_some(t)
    })
}

fn torus_hit(table: &Table, origin: Vec2, d: Vec2) -> Result<(f64, f64), RayFault> {
    // Scatterer data: (piece index, canonical center, radius).
    let discs: Vec<(usize, Vec2, f64)> = table
        .pieces()
        .iter()
        .enumerate()
        .map(|(idx, piece)| match piece.kind {
            PieceKind::Arc { center, radius, .. } => (idx, center, radius),
            PieceKind::Segment { .. } => unreachable!("torus tables have only circular scatterers"),
        })
        .collect();

    let mut cell_x = origin.x.floor() as i64;
    let mut cell_y = origin.y.floor() as i64;
    let step_x: i64 = if d.x >= 0.0 { 1 } else { -1 };
    let step_y: i64 = if d.y >= 0.0 { 1 } else { -1 };
    let t_delta_x = if d.x != 0.0 { 1.0 / d.x.abs() } else { f64::INFINITY };
    let t_delta_y = if d.y != 0.0 { 1.0 / d.y.abs() } else { f64::INFINITY };
    let mut t_max_x = if d.x > 0.0 {
        ((cell_x + 1) as f64 - origin.x) / d.x
    } else if d.x < 0.0 {
        (cell_x as f64 - origin.x) / d.x
    } else {
        f64::INFINITY
    };
    let mut t_max_y = if d.y > 0.0 {
        ((cell_y + 1) as f64 - origin.y) / d.y
    } else if d.y < 0.0 {
        (cell_y as f64 - origin.y) / d.y
    } else {
        f64::INFINITY
    };

    loop {
        let t_exit = t_max_x.min(t_max_y);
        // A disc of radius < 1/2 meeting this cell has its canonical center
        // in the 3x3 neighborhood of integer translates.
        let mut best: Option<(f64, f64)> = None;
        for &(idx, center, radius) in &discs {
            for dx in -1..=1i64 {
                for dy in -1..=1i64 {
                    let ctr = center + Vec2::new((cell_x + dx) as f64, (cell_y + dy) as f64);
                    for t in circle_roots(origin, d, ctr, radius) {
                        if t > t_exit + 1e-9 {
                            break; // beyond this cell; rediscovered later
                        }
                        if best.map_or(true, |(bt, _)| t < bt) {
                            let theta = (origin + d * t - ctr).angle();
                            best = Some((t, table.r_of_arc_angle(idx, theta)));
                        }
                        break;
                    }
                }
            }
        }
        if let Some(hit) = best {
            return Ok(hit);
        }
        if t_exit > MAX_FLIGHT {
            return Err(RayFault::Escaped {
                x: origin.x,
                y: origin.y,
                cap: MAX_FLIGHT,
            });
        }
        if t_max_x < t_max_y {
            cell_x += step_x;
            t_max_x += t_delta_x;
        } else {
            cell_y += step_y;
            t_max_y += t_delta_y;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_sinai_sampled, build_stadium};
    use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

    #[test]
    fn stadium_axis_shot_hits_cap_apex() {
        let t = build_stadium(2.0).unwrap();
        let hit = ray_next_collision(&t, Vec2::ZERO, Vec2::new(1.0, 0.0)).unwrap();
        assert!((hit.tau - 2.0).abs() < 1e-12);
        assert!((hit.at.point - Vec2::new(2.0, 0.0)).norm() < 1e-12);
        assert!((hit.at.normal - Vec2::new(-1.0, 0.0)).norm() < 1e-12);
        assert!((hit.at.r - (2.0 + FRAC_PI_2)).abs() < 1e-12);
    }

    #[test]
    fn stadium_diagonal_shot_hits_top_flat() {
        let t = build_stadium(2.0).unwrap();
        let hit = ray_next_collision(&t, Vec2::ZERO, Vec2::new(0.6, 0.8)).unwrap();
        assert!((hit.tau - 1.25).abs() < 1e-12);
        assert!((hit.at.point - Vec2::new(0.75, 1.0)).norm() < 1e-12);
        // Top flat runs right to left from (1,1); r = 2 + pi + 0.25.
        assert!((hit.at.r - (2.25 + PI)).abs() < 1e-12);
    }

    #[test]
    fn chord_within_a_single_cap() {
        let t = build_stadium(2.0).unwrap();
        let origin = Vec2::new(1.0 + SQRT_2 / 2.0, -SQRT_2 / 2.0);
        let hit = ray_next_collision(&t, origin, Vec2::new(0.0, 1.0)).unwrap();
        assert!((hit.tau - SQRT_2).abs() < 1e-9);
        assert!((hit.at.point - Vec2::new(1.0 + SQRT_2 / 2.0, SQRT_2 / 2.0)).norm() < 1e-9);
        assert!((hit.at.r - (2.0 + 0.75 * PI)).abs() < 1e-9);
    }

    #[test]
    fn torus_shot_wraps_to_nearest_translate() {
        let t = build_sinai_sampled(&[(Vec2::new(0.5, 0.5), 0.25)], 64).unwrap();
        let hit = ray_next_collision(&t, Vec2::new(0.25, 0.5), Vec2::new(-1.0, 0.0)).unwrap();
        assert!((hit.tau - 0.5).abs() < 1e-12);
        assert!((hit.at.point - Vec2::new(0.75, 0.5)).norm() < 1e-12);
        assert!(hit.at.r.abs() < 1e-9 || (t.perimeter() - hit.at.r).abs() < 1e-9);
        assert!((hit.at.normal - Vec2::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn exact_tangent_ray_is_refused() {
        let t = build_sinai_sampled(&[(Vec2::new(0.5, 0.5), 0.25)], 64).unwrap();
        let res = ray_next_collision(&t, Vec2::new(0.0, 0.75), Vec2::new(1.0, 0.0));
        assert!(matches!(res, Err(RayFault::TangentialGraze { .. })));
    }

    #[test]
    fn zero_direction_is_refused() {
        let t = build_stadium(2.0).unwrap();
        let res = ray_next_collision(&t, Vec2::ZERO, Vec2::ZERO);
        assert!(matches!(res, Err(RayFault::DegenerateDirection)));
    }
}

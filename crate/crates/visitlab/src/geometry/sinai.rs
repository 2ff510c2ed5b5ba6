//! Dispersing billiards on the unit torus: point particle bouncing off a
//! union of disjoint circular scatterers.
//!
//! Besides assembling the table this module decides whether the horizon is
//! finite. A free corridor in lattice direction `(p, q)` exists iff the
//! projections of all scatterer translates onto the direction's unit normal
//! fail to cover a period `d = 1 / sqrt(p^2 + q^2)`; we scan every primitive
//! direction with `|p|, |q| <= CORRIDOR_SCAN_BOUND` and additionally sample
//! random boundary rays to report an empirical free-flight bound.

use super::{
    torus_distance, torus_wrap, ray_next_collision, BoundaryPiece, GeometryError, Interior, Table,
    Topology,
};
use crate::{rng, Vec2};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

/// Largest |p|, |q| of primitive lattice directions scanned for corridors.
/// Directions beyond it have period `d <= 1/8`, narrower than any scatterer
/// admissible here would leave open unless the table is nearly empty.
pub const CORRIDOR_SCAN_BOUND: i64 = 8;

/// Rays used by [`build_sinai`] to estimate the free-flight bound.
pub const DEFAULT_HORIZON_RAYS: usize = 100_000;

/// Finite-horizon verdict for a scatterer configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HorizonReport {
    /// True iff the corridor scan found every primitive direction blocked.
    pub finite: bool,
    /// Primitive directions (one per +-pair) left open by the scatterers.
    pub open_corridors: Vec<(i64, i64)>,
    /// Largest sampled free flight plus a 0.01 margin. For an infinite
    /// horizon this is only the observed maximum, not a bound.
    pub free_flight_bound: f64,
    /// Rays that actually produced a collision during sampling.
    pub rays_sampled: usize,
}

/// Two-disc configuration with a provably finite horizon: a large disc at the
/// origin blocks every corridor family except the axes, and a small
/// off-center disc plugs those.
pub fn default_scatterers() -> Vec<(Vec2, f64)> {
    vec![
        (Vec2::new(0.0, 0.0), 0.45),
        (Vec2::new(0.5, 0.5), 0.2),
    ]
}

/// Build a toral dispersing billiard, sampling [`DEFAULT_HORIZON_RAYS`] rays
/// for the free-flight report.
pub fn build_sinai(scatterers: &[(Vec2, f64)]) -> Result<Table, GeometryError> {
    build_sinai_sampled(scatterers, DEFAULT_HORIZON_RAYS)
}

/// As [`build_sinai`] with an explicit ray budget for the horizon report.
pub fn build_sinai_sampled(
    scatterers: &[(Vec2, f64)],
    n_rays: usize,
) -> Result<Table, GeometryError> {
    if scatterers.is_empty() {
        return Err(GeometryError::NoScatterers);
    }
    let discs: Vec<(Vec2, f64)> = scatterers
        .iter()
        .map(|&(c, rho)| (torus_wrap(c), rho))
        .collect();
    for (i, &(_, rho)) in discs.iter().enumerate() {
        if !(rho > 0.0) {
            return Err(GeometryError::NonPositiveParam {
                name: "scatterer radius",
                value: rho,
            });
        }
        // Diameter >= 1 collides with the disc's own torus translate (and
        // breaks the 3x3 neighborhood bound used by the ray tracer).
        if 2.0 * rho >= 1.0 {
            return Err(GeometryError::SelfOverlap {
                i,
                diameter: 2.0 * rho,
            });
        }
    }
    for i in 0..discs.len() {
        for j in (i + 1)..discs.len() {
            let dist = torus_distance(discs[i].0, discs[j].0);
            let sum = discs[i].1 + discs[j].1;
            // Tangency breeds a cusp, as bad as an overlap; insist on a gap.
            if dist < sum + 1e-9 {
                return Err(GeometryError::OverlappingScatterers { i, j, dist, sum });
            }
        }
    }

    // One full clockwise circle per scatterer: dispersing walls, each its own
    // closed boundary component.
    let pieces: Vec<BoundaryPiece> = discs
        .iter()
        .map(|&(c, rho)| BoundaryPiece::arc(c, rho, 0.0, -2.0 * PI))
        .collect();
    let component_starts = (0..discs.len()).collect();
    let mut table = Table::assemble(
        Topology::UnitTorus,
        pieces,
        component_starts,
        Interior::OutsideDiscs {
            discs: discs.clone(),
            torus: true,
            bbox: None,
        },
        None,
    )?;
    table.horizon = Some(horizon_report(&table, &discs, n_rays));
    Ok(table)
}

fn horizon_report(table: &Table, discs: &[(Vec2, f64)], n_rays: usize) -> HorizonReport {
    let open = open_corridors(discs);
    let mut rng = rng::stream(0x5349_4E41, &[n_rays as u64]);
    let mut max_tau: f64 = 0.0;
    let mut used = 0;
    for _ in 0..n_rays {
        let r = rng.gen::<f64>() * table.perimeter();
        let phi = (rng.gen::<f64>() * 2.0 - 1.0) * (FRAC_PI_2 - 1e-6);
        let Ok(start) = table.boundary_point(r) else {
            continue;
        };
        let dir = start.normal * phi.cos() + start.tangent * phi.sin();
        // Grazes and corridor-exact escapes are skipped, not counted.
        if let Ok(hit) = ray_next_collision(table, start.point, dir) {
            max_tau = max_tau.max(hit.tau);
            used += 1;
        }
    }
    HorizonReport {
        finite: open.is_empty(),
        open_corridors: open,
        free_flight_bound: max_tau + 0.01,
        rays_sampled: used,
    }
}

/// Primitive lattice directions (canonical half-plane) whose corridor family
/// is not fully blocked by the scatterers.
fn open_corridors(discs: &[(Vec2, f64)]) -> Vec<(i64, i64)> {
    let mut open = Vec::new();
    for p in -CORRIDOR_SCAN_BOUND..=CORRIDOR_SCAN_BOUND {
        for q in -CORRIDOR_SCAN_BOUND..=CORRIDOR_SCAN_BOUND {
            if (p, q) == (0, 0) || gcd(p.abs(), q.abs()) != 1 {
                continue;
            }
            // (p,q) and (-p,-q) define the same corridor family.
            if !(q > 0 || (q == 0 && p > 0)) {
                continue;
            }
            if !direction_blocked(discs, p, q) {
                open.push((p, q));
            }
        }
    }
    open
}

/// Is every corridor in lattice direction `(p, q)` blocked?
///
/// Projecting all translates of the scatterers onto the unit normal of the
/// direction tiles the line with period `d = 1/sqrt(p^2+q^2)` (primitivity
/// makes the translate offsets exactly the multiples of `d`). The direction
/// is blocked iff the projected discs cover a full period.
fn direction_blocked(discs: &[(Vec2, f64)], p: i64, q: i64) -> bool {
    let d = 1.0 / ((p * p + q * q) as f64).sqrt();
    let normal = Vec2::new(-q as f64, p as f64) * d;
    let mut intervals = Vec::with_capacity(discs.len());
    for &(c, rho) in discs {
        if 2.0 * rho >= d {
            return true; // one disc already covers a period on its own
        }
        let proj = c.dot(normal).rem_euclid(d);
        intervals.push((proj - rho, proj + rho));
    }
    intervals_cover_circle(intervals, d)
}

/// Do the intervals cover the whole circle of circumference `d`?
fn intervals_cover_circle(mut intervals: Vec<(f64, f64)>, d: f64) -> bool {
    if intervals.is_empty() {
        return false;
    }
    for iv in intervals.iter_mut() {
        let len = iv.1 - iv.0;
        let s = iv.0.rem_euclid(d);
        *iv = (s, s + len);
    }
    intervals.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let target = intervals[0].0 + d;
    let mut reach = intervals[0].1;
    let wrapped: Vec<(f64, f64)> = intervals.iter().map(|&(s, e)| (s + d, e + d)).collect();
    for &(s, e) in intervals.iter().skip(1).chain(wrapped.iter()) {
        if s > reach + 1e-12 {
            return false; // gap: a corridor fits through here
        }
        reach = reach.max(e);
        if reach >= target - 1e-12 {
            return true;
        }
    }
    reach >= target - 1e-12
}

fn gcd(mut a: i64, mut b: i64) -> i64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

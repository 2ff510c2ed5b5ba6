//! The collision map of a billiard table.
//!
//! A phase point lives on the boundary: arc-length coordinate `r` plus the
//! outgoing angle `phi` measured from the inward normal toward the tangent,
//! `phi` in `(-pi/2, pi/2)`. One step flies the particle to the next wall and
//! reflects it specularly. The map preserves the measure with density
//! `cos(phi) / (2 |boundary|)` in `(r, phi)`.

use crate::geometry::{ray_next_collision, GeometryError, RayFault, Table};
use crate::Vec2;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BilliardError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Ray(#[from] RayFault),
}

/// Post-collision phase point of the billiard map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    /// Arc-length coordinate on the boundary.
    pub r: f64,
    /// Outgoing angle from the inward normal, in `(-pi/2, pi/2)`.
    pub phi: f64,
}

/// One application of the collision map.
#[derive(Debug, Clone, Copy)]
pub struct FlightRecord {
    /// Phase point after the collision.
    pub state: PhasePoint,
    /// Free-flight time (unit speed) of this step.
    pub tau: f64,
    pub from: Vec2,
    pub to: Vec2,
}

/// Outgoing unit velocity of a phase point.
pub fn velocity(table: &Table, p: PhasePoint) -> Result<Vec2, BilliardError> {
    let s = table.boundary_point(p.r)?;
    Ok(s.normal * p.phi.cos() + s.tangent * p.phi.sin())
}

/// Advance one collision: fly from `p`, reflect at the next wall.
pub fn step(table: &Table, p: PhasePoint) -> Result<FlightRecord, BilliardError> {
    let s = table.boundary_point(p.r)?;
    let dir = s.normal * p.phi.cos() + s.tangent * p.phi.sin();
    let hit = ray_next_collision(table, s.point, dir)?;
    let n = hit.at.normal;
    let reflected = hit.incoming - n * (2.0 * hit.incoming.dot(n));
    // The tangency guard in the ray tracer keeps the normal component
    // strictly positive, so phi stays inside (-pi/2, pi/2).
    let phi = reflected.dot(hit.at.tangent).atan2(reflected.dot(n));
    Ok(FlightRecord {
        state: PhasePoint { r: hit.at.r, phi },
        tau: hit.tau,
        from: s.point,
        to: hit.at.point,
    })
}

/// Invariant density of the collision map at angle `phi`.
pub fn invariant_density(table: &Table, phi: f64) -> f64 {
    phi.cos() / (2.0 * table.perimeter())
}

/// Draw a phase point from the invariant measure: `r` uniform on the
/// boundary, `sin(phi)` uniform on `(-1, 1)`. Coordinates refused as corners
/// are resampled.
pub fn sample_mu<R: Rng>(table: &Table, rng: &mut R) -> PhasePoint {
    loop {
        let r = rng.gen::<f64>() * table.perimeter();
        if table.boundary_point(r).is_err() {
            continue;
        }
        let phi = (2.0 * rng.gen::<f64>() - 1.0).asin();
        return PhasePoint { r, phi };
    }
}

/// Iterator over successive collisions; stops permanently at the first fault
/// (corner hit or tangential graze — both measure zero).
pub fn orbit(table: &Table, start: PhasePoint) -> Orbit<'_> {
    Orbit {
        table,
        state: start,
        dead: false,
    }
}

pub struct Orbit<'a> {
    table: &'a Table,
    state: PhasePoint,
    dead: bool,
}

impl Iterator for Orbit<'_> {
    type Item = Result<FlightRecord, BilliardError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.dead {
            return None;
        }
        match step(self.table, self.state) {
            Ok(rec) => {
                self.state = rec.state;
                Some(Ok(rec))
            }
            Err(e) => {
                self.dead = true;
                Some(Err(e))
            }
        }
    }
}

/// Birkhoff average of the flight time over `n` collisions; converges to
/// `pi * area / perimeter` for an ergodic table.
pub fn birkhoff_tau(table: &Table, start: PhasePoint, n: usize) -> Result<f64, BilliardError> {
    assert!(n > 0);
    let mut sum = 0.0;
    let mut state = start;
    for _ in 0..n {
        let rec = step(table, state)?;
        sum += rec.tau;
        state = rec.state;
    }
    Ok(sum / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_diamond, build_sinai_sampled, build_stadium, default_scatterers, DiamondSpec};
    use crate::rng::stream;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn stadium_bouncing_ball_has_period_two() {
        let t = build_stadium(2.0).unwrap();
        let apex_right = PhasePoint {
            r: 2.0 + FRAC_PI_2,
            phi: 0.0,
        };
        let rec = step(&t, apex_right).unwrap();
        assert!((rec.tau - 4.0).abs() < 1e-12);
        assert!((rec.state.r - (4.0 + 1.5 * PI)).abs() < 1e-9);
        assert!(rec.state.phi.abs() < 1e-12);
        let back = step(&t, rec.state).unwrap();
        assert!((back.state.r - apex_right.r).abs() < 1e-9);
        assert!((back.tau - 4.0).abs() < 1e-12);
    }

    #[test]
    fn reversing_the_angle_retraces_the_orbit() {
        for (name, table) in [
            ("stadium", build_stadium(2.0).unwrap()),
            ("diamond", build_diamond(DiamondSpec::default()).unwrap()),
            ("sinai", build_sinai_sampled(&default_scatterers(), 64).unwrap()),
        ] {
            let start = PhasePoint { r: 0.37, phi: 0.3 };
            let fwd = step(&table, start).unwrap();
            let reversed = PhasePoint {
                r: fwd.state.r,
                phi: -fwd.state.phi,
            };
            let back = step(&table, reversed).unwrap();
            assert!(
                (back.state.r - start.r).abs() < 1e-9,
                "{name}: came back to r = {}, started at {}",
                back.state.r,
                start.r
            );
            assert!((back.state.phi + start.phi).abs() < 1e-9, "{name}");
            assert!((back.tau - fwd.tau).abs() < 1e-9, "{name}");
        }
    }

    #[test]
    fn flat_wall_reflection_is_specular() {
        let t = build_stadium(2.0).unwrap();
        // Leave the bottom flat at 30 degrees; the angle at the top flat
        // equals the departure angle with the same sign convention.
        let start = PhasePoint { r: 1.0, phi: 0.5 };
        let rec = step(&t, start).unwrap();
        if rec.state.r > 2.0 + PI && rec.state.r < 4.0 + PI {
            assert!((rec.state.phi - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn mu_sampler_matches_cosine_law() {
        let t = build_stadium(2.0).unwrap();
        let mut rng = stream(11, &[0]);
        let n = 20_000;
        let mean_cos: f64 = (0..n).map(|_| sample_mu(&t, &mut rng).phi.cos()).sum::<f64>() / n as f64;
        // E[cos phi] under the invariant measure is pi/4; sd of the mean at
        // this n is about 0.0016, so 0.005 is a 3-sigma gate.
        assert!((mean_cos - PI / 4.0).abs() < 0.005, "mean {mean_cos}");
    }

    #[test]
    fn flight_time_average_approaches_mean_free_path() {
        for (name, table) in [
            ("stadium", build_stadium(2.0).unwrap()),
            ("diamond", build_diamond(DiamondSpec::default()).unwrap()),
            ("sinai", build_sinai_sampled(&default_scatterers(), 64).unwrap()),
        ] {
            let mut rng = stream(5, &[1]);
            let start = sample_mu(&table, &mut rng);
            let tau = birkhoff_tau(&table, start, 20_000).unwrap();
            let expect = table.mean_free_path();
            assert!(
                (tau - expect).abs() / expect < 0.05,
                "{name}: birkhoff {tau} vs exact {expect}"
            );
        }
    }
}

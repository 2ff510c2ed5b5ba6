//! Target families: the small sets whose visit processes we extract, their
//! mark normalizers, and the reference mark intensities the limit laws
//! predict.
//!
//! Billiard-map targets live in the boundary coordinates `(r, phi)` with the
//! sup metric; toral-map targets use the sup metric on the torus. The diamond
//! barrier is a flow target: a short vertical segment at the table's left
//! corner, hit when a flight chord crosses it moving leftward.

use crate::billiard::{self, PhasePoint};
use crate::geometry::{torus_displacement, PieceKind, Table};
use crate::maps::ToralAutomorphism;
use crate::stats::special::{wilson_interval, Z_95};
use crate::Vec2;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TargetError {
    #[error("epsilon must be positive and small, got {0}")]
    BadEpsilon(f64),
    #[error("corner index {index} unsupported (table has {count} corners; barriers pose at corner 0)")]
    BadCorner { index: usize, count: usize },
    #[error("barrier length {eps} does not fit in the corner wedge of half-width {w}")]
    BarrierTooWide { eps: f64, w: f64 },
    #[error("pruning depth q0 must be at least 1")]
    BadQ0,
    #[error("center is not {period}-periodic: M^{period} moved it by {dist:.3e}")]
    NotPeriodic { period: u32, dist: f64 },
    #[error("no hits in {budget} samples; raise the Monte Carlo budget")]
    NoHits { budget: usize },
    #[error("table is not a corner-barrier candidate: {why}")]
    UnsuitableTable { why: &'static str },
}

/// Signed difference wrapped into `[-period/2, period/2)`.
fn signed_wrap(d: f64, period: f64) -> f64 {
    (d + period / 2.0).rem_euclid(period) - period / 2.0
}

// ---------------------------------------------------------------------------
// Billiard-map targets
// ---------------------------------------------------------------------------

/// Target on the collision-map phase space of a billiard.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub enum BilliardTarget {
    /// Sup-metric ball `max(|r - r0|, |phi - phi0|) < eps`.
    PhaseBall { center: PhasePoint, eps: f64 },
    /// Position strip `|r - r0| < eps`, all angles admitted.
    PositionStrip { center_r: f64, eps: f64 },
}

impl BilliardTarget {
    pub fn eps(&self) -> f64 {
        match *self {
            BilliardTarget::PhaseBall { eps, .. } | BilliardTarget::PositionStrip { eps, .. } => {
                eps
            }
        }
    }

    pub fn contains(&self, table: &Table, p: PhasePoint) -> bool {
        let per = table.perimeter();
        match *self {
            BilliardTarget::PhaseBall { center, eps } => {
                let dr = signed_wrap(p.r - center.r, per);
                dr.abs().max((p.phi - center.phi).abs()) < eps
            }
            BilliardTarget::PositionStrip { center_r, eps } => {
                signed_wrap(p.r - center_r, per).abs() < eps
            }
        }
    }

    /// Zoomed mark of a member state.
    ///
    /// Balls map onto the open unit square `(-1,1)^2`; strips keep the raw
    /// angle: `((r-r0)/eps, phi)` in `[-1,1] x [-pi/2, pi/2]`.
    pub fn mark(&self, table: &Table, p: PhasePoint) -> (f64, f64) {
        assert!(self.contains(table, p), "mark of a non-member state");
        let per = table.perimeter();
        match *self {
            BilliardTarget::PhaseBall { center, eps } => {
                let dr = signed_wrap(p.r - center.r, per);
                (dr / eps, (p.phi - center.phi) / eps)
            }
            BilliardTarget::PositionStrip { center_r, eps } => {
                (signed_wrap(p.r - center_r, per) / eps, p.phi)
            }
        }
    }

    /// Closed-form invariant measure of the target.
    ///
    /// Integrating the density `cos(phi) / (2 |boundary|)`: a ball gives
    /// `2 eps (sin(phi_hi) - sin(phi_lo)) / (2 |boundary|)` (exact, with the
    /// angle window clipped to `[-pi/2, pi/2]`), a strip `2 eps / |boundary|`.
    pub fn analytic_measure(&self, table: &Table) -> f64 {
        let per = table.perimeter();
        match *self {
            BilliardTarget::PhaseBall { center, eps } => {
                let hi = (center.phi + eps).min(FRAC_PI_2);
                let lo = (center.phi - eps).max(-FRAC_PI_2);
                2.0 * eps * (hi.sin() - lo.sin()).max(0.0) / (2.0 * per)
            }
            BilliardTarget::PositionStrip { eps, .. } => 2.0 * eps / per,
        }
    }

    pub fn reference_intensity(&self) -> IntensityModel {
        match self {
            BilliardTarget::PhaseBall { .. } => IntensityModel::UniformSquare,
            BilliardTarget::PositionStrip { .. } => IntensityModel::CosineStrip,
        }
    }
}

// ---------------------------------------------------------------------------
// Toral-map targets
// ---------------------------------------------------------------------------

/// Sup-norm ball around a periodic point, minus the states that fall back
/// into the ball within `q0` returns of the `period`-fold map. Visits to the
/// pruned set mark cluster ends, which is what makes their process Poisson
/// rather than compound Poisson.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PrunedBall {
    pub center: Vec2,
    pub period: u32,
    pub q0: u32,
    pub eps: f64,
}

impl PrunedBall {
    /// Pruned ball at a genuine periodic center (validated).
    pub fn new(
        map: &ToralAutomorphism,
        center: Vec2,
        period: u32,
        q0: u32,
        eps: f64,
    ) -> Result<Self, TargetError> {
        if !(eps > 0.0 && eps < 0.5) {
            return Err(TargetError::BadEpsilon(eps));
        }
        if q0 < 1 {
            return Err(TargetError::BadQ0);
        }
        let mut y = center;
        for _ in 0..period {
            y = map.step(y);
        }
        let dist = torus_displacement(y, center).sup_norm();
        if dist > 1e-9 {
            return Err(TargetError::NotPeriodic { period, dist });
        }
        Ok(PrunedBall {
            center,
            period,
            q0,
            eps,
        })
    }

    /// Same pruning rule around an arbitrary center — the generic-center
    /// control, where pruning should remove almost nothing as eps shrinks.
    pub fn generic(center: Vec2, period: u32, q0: u32, eps: f64) -> Result<Self, TargetError> {
        if !(eps > 0.0 && eps < 0.5) {
            return Err(TargetError::BadEpsilon(eps));
        }
        if q0 < 1 {
            return Err(TargetError::BadQ0);
        }
        Ok(PrunedBall {
            center,
            period,
            q0,
            eps,
        })
    }
}

/// Target on the torus for a hyperbolic automorphism.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub enum TorusTarget {
    /// Sup-norm ball of radius `eps`.
    Ball { center: Vec2, eps: f64 },
    Pruned(PrunedBall),
}

impl TorusTarget {
    pub fn eps(&self) -> f64 {
        match *self {
            TorusTarget::Ball { eps, .. } => eps,
            TorusTarget::Pruned(p) => p.eps,
        }
    }

    pub fn center(&self) -> Vec2 {
        match *self {
            TorusTarget::Ball { center, .. } => center,
            TorusTarget::Pruned(p) => p.center,
        }
    }

    pub fn contains(&self, map: &ToralAutomorphism, x: Vec2) -> bool {
        match *self {
            TorusTarget::Ball { center, eps } => {
                torus_displacement(x, center).sup_norm() < eps
            }
            TorusTarget::Pruned(p) => {
                if torus_displacement(x, p.center).sup_norm() >= p.eps {
                    return false;
                }
                // Member iff none of the next q0 returns of the p-fold map
                // lands back in the ball.
                let mut y = x;
                for _ in 0..p.q0 {
                    for _ in 0..p.period {
                        y = map.step(y);
                    }
                    if torus_displacement(y, p.center).sup_norm() < p.eps {
                        return false;
                    }
                }
                true
            }
        }
    }

    /// Zoomed mark `(x - center) / eps`, componentwise in `(-1, 1)^2`.
    pub fn mark(&self, map: &ToralAutomorphism, x: Vec2) -> (f64, f64) {
        assert!(self.contains(map, x), "mark of a non-member state");
        let d = torus_displacement(x, self.center());
        (d.x / self.eps(), d.y / self.eps())
    }

    /// Lebesgue measure, exact for plain balls, None for pruned sets.
    pub fn analytic_measure(&self) -> Option<f64> {
        match *self {
            TorusTarget::Ball { eps, .. } => {
                let side = (2.0 * eps).min(1.0);
                Some(side * side)
            }
            TorusTarget::Pruned(_) => None,
        }
    }

    pub fn reference_intensity(&self) -> IntensityModel {
        // The pruned set's limiting mark law is not uniform; use
        // `empirical_pruned_marks` for it.
        IntensityModel::UniformSquare
    }
}

/// Empirical mark reference for a pruned ball: uniform draws on the ball,
/// kept iff pruned membership holds, zoomed to `(-1,1)^2`.
pub fn empirical_pruned_marks<R: Rng>(
    map: &ToralAutomorphism,
    t: &PrunedBall,
    n_marks: usize,
    rng: &mut R,
) -> Result<IntensityModel, TargetError> {
    let target = TorusTarget::Pruned(*t);
    let mut sample = Vec::with_capacity(n_marks);
    let cap = n_marks.saturating_mul(200);
    let mut attempts = 0usize;
    while sample.len() < n_marks {
        if attempts >= cap {
            return Err(TargetError::NoHits { budget: cap });
        }
        attempts += 1;
        let u = Vec2::new(
            (rng.gen::<f64>() * 2.0 - 1.0) * t.eps,
            (rng.gen::<f64>() * 2.0 - 1.0) * t.eps,
        );
        let x = Vec2::new(
            (t.center.x + u.x).rem_euclid(1.0),
            (t.center.y + u.y).rem_euclid(1.0),
        );
        if target.contains(map, x) {
            sample.push((u.x / t.eps, u.y / t.eps));
        }
    }
    Ok(IntensityModel::Empirical { sample })
}

// ---------------------------------------------------------------------------
// Diamond corner barrier (flow target)
// ---------------------------------------------------------------------------

/// Vertical segment of Euclidean length `eps` spanned between the two walls
/// meeting at the table's left corner, bisected by the horizontal axis.
/// A visit is a flight chord crossing it while moving leftward.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CornerBarrier {
    pub eps: f64,
    /// Abscissa of the segment (both endpoints lie on the corner walls).
    pub x: f64,
}

/// One barrier passage along a flight chord.
#[derive(Debug, Clone, Copy)]
pub struct Crossing {
    /// Chord parameter in `(0, 1)` where the barrier is met.
    pub t: f64,
    pub mark: (f64, f64),
}

impl CornerBarrier {
    pub fn new(table: &Table, corner: usize, eps: f64) -> Result<Self, TargetError> {
        let corners = table.corners();
        if corners.len() != 4 {
            return Err(TargetError::UnsuitableTable {
                why: "need a four-corner table",
            });
        }
        if corner != 0 {
            return Err(TargetError::BadCorner {
                index: corner,
                count: corners.len(),
            });
        }
        if corners[0].point.norm() > 1e-9 {
            return Err(TargetError::UnsuitableTable {
                why: "pose puts corner 0 at the origin",
            });
        }
        let w = corners[3].point.y; // top corner height
        if !(eps > 0.0) {
            return Err(TargetError::BadEpsilon(eps));
        }
        if eps >= w {
            return Err(TargetError::BarrierTooWide { eps, w });
        }
        // Upper endpoint lies on the top-left wall: solve the circle at
        // height eps/2.
        let top_left = table
            .pieces()
            .iter()
            .filter_map(|p| match p.kind {
                PieceKind::Arc { center, radius, .. } if center.x < 0.0 && center.y > 0.0 => {
                    Some((center, radius))
                }
                _ => None,
            })
            .next()
            .ok_or(TargetError::UnsuitableTable {
                why: "no upper-left wall arc",
            })?;
        let (c, radius) = top_left;
        let x = c.x + (radius * radius - (c.y - eps / 2.0).powi(2)).sqrt();
        Ok(CornerBarrier { eps, x })
    }

    pub fn endpoints(&self) -> (Vec2, Vec2) {
        (
            Vec2::new(self.x, -self.eps / 2.0),
            Vec2::new(self.x, self.eps / 2.0),
        )
    }

    /// Leftward crossing of the chord `from -> to`, if any. The mark is
    /// `(height / eps, angle of the velocity against (-1, 0))`, landing in
    /// `[-1/2, 1/2] x (-pi/2, pi/2)`; `t` is the chord parameter of the
    /// crossing point, so the physical instant interpolates the flight.
    pub fn crossing(&self, from: Vec2, to: Vec2) -> Option<Crossing> {
        let dx = to.x - from.x;
        if dx >= 0.0 {
            return None; // only leftward passages count
        }
        let t = (self.x - from.x) / dx;
        if !(t > 0.0 && t < 1.0) {
            return None;
        }
        let y = from.y + t * (to.y - from.y);
        if y.abs() > self.eps / 2.0 {
            return None;
        }
        let v = (to - from).normalized();
        Some(Crossing {
            t,
            mark: (y / self.eps, v.y.atan2(-v.x)),
        })
    }

    /// Flux through the barrier per collision: `eps / |boundary|`, exact.
    pub fn analytic_measure(&self, table: &Table) -> f64 {
        self.eps / table.perimeter()
    }

    pub fn reference_intensity(&self) -> IntensityModel {
        IntensityModel::CosineBarrier
    }
}

// ---------------------------------------------------------------------------
// Reference intensities
// ---------------------------------------------------------------------------

/// Closed-form (or empirical) reference law of the marks under the limit
/// process. The flow-ball variants of the wider theory — entry marks into a
/// metric ball of the full billiard flow, with densities proportional to the
/// positive part of an inner product with the entry normal — are documented
/// here for completeness but carry no extractor in this crate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum IntensityModel {
    /// Uniform density 1/4 on `(-1,1)^2` (zoomed balls).
    UniformSquare,
    /// Density `cos(phi)/4` on `[-1,1] x [-pi/2, pi/2]` (position strips).
    CosineStrip,
    /// Density `cos(phi)/2` on `[-1/2,1/2] x (-pi/2, pi/2)` (corner barrier).
    CosineBarrier,
    /// Empirical sample of marks (pruned sets).
    Empirical { sample: Vec<(f64, f64)> },
}

fn overlap(lo: f64, hi: f64, a: f64, b: f64) -> f64 {
    (hi.min(b) - lo.max(a)).max(0.0)
}

impl IntensityModel {
    /// Support rectangle of the mark law.
    pub fn support(&self) -> ((f64, f64), (f64, f64)) {
        match self {
            IntensityModel::UniformSquare | IntensityModel::Empirical { .. } => {
                ((-1.0, -1.0), (1.0, 1.0))
            }
            IntensityModel::CosineStrip => ((-1.0, -FRAC_PI_2), (1.0, FRAC_PI_2)),
            IntensityModel::CosineBarrier => ((-0.5, -FRAC_PI_2), (0.5, FRAC_PI_2)),
        }
    }

    /// Mass of the axis rectangle `[lo, hi]` under the mark law.
    pub fn mark_mass(&self, lo: (f64, f64), hi: (f64, f64)) -> f64 {
        match self {
            IntensityModel::UniformSquare => {
                overlap(lo.0, hi.0, -1.0, 1.0) * overlap(lo.1, hi.1, -1.0, 1.0) / 4.0
            }
            IntensityModel::CosineStrip => {
                let a = lo.1.clamp(-FRAC_PI_2, FRAC_PI_2);
                let b = hi.1.clamp(-FRAC_PI_2, FRAC_PI_2);
                overlap(lo.0, hi.0, -1.0, 1.0) / 2.0 * ((b.sin() - a.sin()).max(0.0) / 2.0)
            }
            IntensityModel::CosineBarrier => {
                let a = lo.1.clamp(-FRAC_PI_2, FRAC_PI_2);
                let b = hi.1.clamp(-FRAC_PI_2, FRAC_PI_2);
                overlap(lo.0, hi.0, -0.5, 0.5) * ((b.sin() - a.sin()).max(0.0) / 2.0)
            }
            IntensityModel::Empirical { sample } => {
                if sample.is_empty() {
                    return 0.0;
                }
                let inside = sample
                    .iter()
                    .filter(|&&(x, y)| x >= lo.0 && x < hi.0 && y >= lo.1 && y < hi.1)
                    .count();
                inside as f64 / sample.len() as f64
            }
        }
    }

    /// Draw one mark from the model.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> (f64, f64) {
        match self {
            IntensityModel::UniformSquare => {
                (rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0)
            }
            IntensityModel::CosineStrip => (
                rng.gen::<f64>() * 2.0 - 1.0,
                (rng.gen::<f64>() * 2.0 - 1.0).asin(),
            ),
            IntensityModel::CosineBarrier => (
                rng.gen::<f64>() - 0.5,
                (rng.gen::<f64>() * 2.0 - 1.0).asin(),
            ),
            IntensityModel::Empirical { sample } => {
                assert!(!sample.is_empty());
                sample[rng.gen_range(0..sample.len())]
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Monte Carlo measure estimation
// ---------------------------------------------------------------------------

/// Measure estimate with a 95% Wilson interval and, where a closed form
/// exists, the analytic value alongside.
#[derive(Debug, Clone, Serialize)]
pub struct MeasureEstimate {
    pub estimate: f64,
    pub ci: (f64, f64),
    pub hits: u64,
    pub trials: u64,
    pub analytic: Option<f64>,
    /// Pruned targets: conditional fraction of the ball surviving pruning
    /// (extremal-index estimate), with its own Wilson interval.
    pub theta: Option<(f64, (f64, f64))>,
}

/// Estimate a billiard target's invariant measure by direct sampling of the
/// invariant law (no orbit needed — the sampler is exact).
pub fn measure_billiard<R: Rng>(
    target: &BilliardTarget,
    table: &Table,
    budget: usize,
    rng: &mut R,
) -> Result<MeasureEstimate, TargetError> {
    assert!(budget >= 10_000, "measure needs a serious budget");
    let mut hits = 0u64;
    for _ in 0..budget {
        if target.contains(table, billiard::sample_mu(table, rng)) {
            hits += 1;
        }
    }
    if hits == 0 {
        return Err(TargetError::NoHits { budget });
    }
    Ok(MeasureEstimate {
        estimate: hits as f64 / budget as f64,
        ci: wilson_interval(hits, budget as u64, Z_95),
        hits,
        trials: budget as u64,
        analytic: Some(target.analytic_measure(table)),
        theta: None,
    })
}

/// Estimate the barrier's per-collision crossing probability: sample the
/// invariant law, take one step, test the chord.
pub fn measure_barrier<R: Rng>(
    barrier: &CornerBarrier,
    table: &Table,
    budget: usize,
    rng: &mut R,
) -> Result<MeasureEstimate, TargetError> {
    assert!(budget >= 10_000, "measure needs a serious budget");
    let mut hits = 0u64;
    for _ in 0..budget {
        let start = billiard::sample_mu(table, rng);
        // Corner/tangency faults are measure-zero; count them as misses.
        if let Ok(rec) = billiard::step(table, start) {
            if barrier.crossing(rec.from, rec.to).is_some() {
                hits += 1;
            }
        }
    }
    if hits == 0 {
        return Err(TargetError::NoHits { budget });
    }
    Ok(MeasureEstimate {
        estimate: hits as f64 / budget as f64,
        ci: wilson_interval(hits, budget as u64, Z_95),
        hits,
        trials: budget as u64,
        analytic: Some(barrier.analytic_measure(table)),
        theta: None,
    })
}

/// Estimate a torus target's Lebesgue measure. Plain balls sample the whole
/// torus; pruned balls sample inside the ball only and scale by the exact
/// ball mass, which also yields the extremal-index estimate.
pub fn measure_torus<R: Rng>(
    target: &TorusTarget,
    map: &ToralAutomorphism,
    budget: usize,
    rng: &mut R,
) -> Result<MeasureEstimate, TargetError> {
    assert!(budget >= 10_000, "measure needs a serious budget");
    match *target {
        TorusTarget::Ball { .. } => {
            let mut hits = 0u64;
            for _ in 0..budget {
                let x = Vec2::new(rng.gen::<f64>(), rng.gen::<f64>());
                if target.contains(map, x) {
                    hits += 1;
                }
            }
            if hits == 0 {
                return Err(TargetError::NoHits { budget });
            }
            Ok(MeasureEstimate {
                estimate: hits as f64 / budget as f64,
                ci: wilson_interval(hits, budget as u64, Z_95),
                hits,
                trials: budget as u64,
                analytic: target.analytic_measure(),
                theta: None,
            })
        }
        TorusTarget::Pruned(p) => {
            let ball_mass = (2.0 * p.eps).min(1.0).powi(2);
            let mut hits = 0u64;
            for _ in 0..budget {
                let x = Vec2::new(
                    (p.center.x + (rng.gen::<f64>() * 2.0 - 1.0) * p.eps).rem_euclid(1.0),
                    (p.center.y + (rng.gen::<f64>() * 2.0 - 1.0) * p.eps).rem_euclid(1.0),
                );
                if target.contains(map, x) {
                    hits += 1;
                }
            }
            if hits == 0 {
                return Err(TargetError::NoHits { budget });
            }
            let theta = hits as f64 / budget as f64;
            let theta_ci = wilson_interval(hits, budget as u64, Z_95);
            Ok(MeasureEstimate {
                estimate: ball_mass * theta,
                ci: (ball_mass * theta_ci.0, ball_mass * theta_ci.1),
                hits,
                trials: budget as u64,
                analytic: None,
                theta: Some((theta, theta_ci)),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_diamond, build_sinai_sampled, build_stadium, default_scatterers, DiamondSpec};
    use crate::rng::stream;

    #[test]
    fn phase_ball_membership_and_mark() {
        let t = build_stadium(2.0).unwrap();
        let ball = BilliardTarget::PhaseBall {
            center: PhasePoint { r: 0.7, phi: 0.25 },
            eps: 0.1,
        };
        let inside = PhasePoint { r: 0.75, phi: 0.3 };
        assert!(ball.contains(&t, inside));
        let (m1, m2) = ball.mark(&t, inside);
        assert!((m1 - 0.5).abs() < 1e-12 && (m2 - 0.5).abs() < 1e-12);
        assert!(!ball.contains(&t, PhasePoint { r: 0.81, phi: 0.25 }));
        assert!(!ball.contains(&t, PhasePoint { r: 0.7, phi: 0.36 }));
    }

    #[test]
    fn phase_ball_wraps_around_r_origin() {
        let t = build_stadium(2.0).unwrap();
        let ball = BilliardTarget::PhaseBall {
            center: PhasePoint { r: 0.02, phi: 0.0 },
            eps: 0.1,
        };
        let wrapped = PhasePoint {
            r: t.perimeter() - 0.03,
            phi: 0.0,
        };
        assert!(ball.contains(&t, wrapped));
        let (m1, _) = ball.mark(&t, wrapped);
        assert!((m1 + 0.5).abs() < 1e-9);
    }

    #[test]
    fn strip_mark_keeps_raw_angle() {
        let t = build_sinai_sampled(&default_scatterers(), 64).unwrap();
        let strip = BilliardTarget::PositionStrip {
            center_r: 1.0,
            eps: 0.05,
        };
        let p = PhasePoint {
            r: 1.0 + 0.025,
            phi: 0.3,
        };
        let (m1, m2) = strip.mark(&t, p);
        assert!((m1 - 0.5).abs() < 1e-12);
        assert!((m2 - 0.3).abs() < 1e-12);
    }

    #[test]
    fn torus_ball_and_pruning_examples() {
        let m = ToralAutomorphism::cat();
        let ball = TorusTarget::Ball {
            center: Vec2::ZERO,
            eps: 0.1,
        };
        assert!(ball.contains(&m, Vec2::new(0.04, 0.01)));
        let (mx, my) = ball.mark(&m, Vec2::new(0.04, 0.01));
        assert!((mx - 0.4).abs() < 1e-12 && (my - 0.1).abs() < 1e-12);

        // Pruned at the fixed point with q0 = 1: (0.04, 0.01) maps to
        // (0.09, 0.05), still inside, so it is not a member...
        let pruned = TorusTarget::Pruned(
            PrunedBall::new(&m, Vec2::ZERO, 1, 1, 0.1).unwrap(),
        );
        assert!(!pruned.contains(&m, Vec2::new(0.04, 0.01)));
        // ...while (0.09, 0.01) escapes to (0.19, 0.10) and is one.
        assert!(pruned.contains(&m, Vec2::new(0.09, 0.01)));
    }

    #[test]
    fn pruned_ball_requires_periodicity_and_depth() {
        let m = ToralAutomorphism::cat();
        assert!(matches!(
            PrunedBall::new(&m, Vec2::new(0.3, 0.41), 1, 1, 0.1),
            Err(TargetError::NotPeriodic { .. })
        ));
        assert!(matches!(
            PrunedBall::new(&m, Vec2::ZERO, 1, 0, 0.1),
            Err(TargetError::BadQ0)
        ));
        // (0.2, 0.4) has period 2 under the cat map: check it is accepted.
        let p2 = m.periodic_points(2).unwrap();
        let non_origin = p2.iter().find(|pt| pt.least_period == 2).unwrap();
        assert!(PrunedBall::new(&m, non_origin.point, 2, 3, 0.05).is_ok());
    }

    #[test]
    fn pruned_members_are_ball_members_with_theta_in_range() {
        let m = ToralAutomorphism::cat();
        let pruned = TorusTarget::Pruned(PrunedBall::new(&m, Vec2::ZERO, 1, 2, 0.05).unwrap());
        let ball = TorusTarget::Ball {
            center: Vec2::ZERO,
            eps: 0.05,
        };
        let mut rng = stream(31, &[4]);
        for _ in 0..2000 {
            let x = Vec2::new(rng.gen::<f64>(), rng.gen::<f64>());
            if pruned.contains(&m, x) {
                assert!(ball.contains(&m, x));
            }
        }
        let est = measure_torus(&pruned, &m, 20_000, &mut rng).unwrap();
        let (theta, _) = est.theta.unwrap();
        assert!(theta > 0.0 && theta <= 1.0);
        assert!(est.estimate <= 0.01 + 1e-9); // never above the ball mass
    }

    #[test]
    fn generic_center_pruning_removes_almost_nothing() {
        let m = ToralAutomorphism::cat();
        let mut theta_by_eps = Vec::new();
        for eps in [0.1, 0.05, 0.02] {
            let t = TorusTarget::Pruned(
                PrunedBall::generic(Vec2::new(0.3, 0.41), 1, 2, eps).unwrap(),
            );
            let mut rng = stream(32, &[(eps * 1000.0) as u64]);
            let est = measure_torus(&t, &m, 30_000, &mut rng).unwrap();
            theta_by_eps.push(est.theta.unwrap().0);
        }
        assert!(
            theta_by_eps[2] > 0.97,
            "theta ladder {theta_by_eps:?} should approach 1"
        );
        assert!(theta_by_eps[2] >= theta_by_eps[0] - 0.02);
    }

    #[test]
    fn ball_measure_matches_closed_form_over_the_ladder() {
        let t = build_stadium(2.0).unwrap();
        let mut prev = 0.0;
        for (i, eps) in [0.05, 0.1, 0.2].into_iter().enumerate() {
            let ball = BilliardTarget::PhaseBall {
                center: PhasePoint { r: 0.7, phi: 0.25 },
                eps,
            };
            let mut rng = stream(7, &[i as u64]);
            let est = measure_billiard(&ball, &t, 40_000, &mut rng).unwrap();
            let analytic = est.analytic.unwrap();
            let sd = (analytic * (1.0 - analytic) / 40_000.0).sqrt();
            assert!(
                (est.estimate - analytic).abs() < 3.0 * sd,
                "eps {eps}: {} vs {analytic} (sd {sd})",
                est.estimate
            );
            assert!(analytic > prev, "measure grows with eps");
            prev = analytic;
        }
    }

    #[test]
    fn strip_measure_on_sinai_matches_closed_form() {
        let t = build_sinai_sampled(&default_scatterers(), 200).unwrap();
        let strip = BilliardTarget::PositionStrip {
            center_r: 1.0,
            eps: 0.05,
        };
        let analytic = strip.analytic_measure(&t);
        assert!((analytic - 0.1 / (1.3 * std::f64::consts::PI)).abs() < 1e-12);
        let mut rng = stream(8, &[0]);
        let est = measure_billiard(&strip, &t, 40_000, &mut rng).unwrap();
        let sd = (analytic * (1.0 - analytic) / 40_000.0).sqrt();
        assert!((est.estimate - analytic).abs() < 3.0 * sd);
    }

    #[test]
    fn torus_ball_measure_is_exact_square() {
        let m = ToralAutomorphism::cat();
        let ball = TorusTarget::Ball {
            center: Vec2::new(0.25, 0.7),
            eps: 0.1,
        };
        assert!((ball.analytic_measure().unwrap() - 0.04).abs() < 1e-15);
        let mut rng = stream(9, &[0]);
        let est = measure_torus(&ball, &m, 40_000, &mut rng).unwrap();
        let sd = (0.04f64 * 0.96 / 40_000.0).sqrt();
        assert!((est.estimate - 0.04).abs() < 3.0 * sd);
    }

    #[test]
    fn barrier_geometry_and_crossings() {
        let t = build_diamond(DiamondSpec::default()).unwrap();
        let b = CornerBarrier::new(&t, 0, 0.05).unwrap();
        // Endpoint height eps/2 on the upper-left wall:
        // x = (w - c) + sqrt(R^2 - (c - eps/2)^2) with R=2.5, c=2, w=0.5.
        let want_x = -1.5 + (6.25f64 - 1.975f64.powi(2)).sqrt();
        assert!((b.x - want_x).abs() < 1e-12, "{} vs {want_x}", b.x);
        let (lo, hi) = b.endpoints();
        assert!((hi - Vec2::new(want_x, 0.025)).norm() < 1e-12);
        assert!((lo - Vec2::new(want_x, -0.025)).norm() < 1e-12);

        // Mid-height horizontal leftward passage marks (0, 0).
        let c = b.crossing(Vec2::new(0.5, 0.0), Vec2::new(0.01, 0.0)).unwrap();
        assert!(c.mark.0.abs() < 1e-12 && c.mark.1.abs() < 1e-12);
        assert!((c.t - (0.5 - b.x) / 0.49).abs() < 1e-12);
        // Height 0.02 => normalized height 0.4.
        let c = b.crossing(Vec2::new(0.5, 0.02), Vec2::new(0.01, 0.02)).unwrap();
        assert!((c.mark.0 - 0.4).abs() < 1e-12);
        // Rightward passages and missed chords do not count.
        assert!(b.crossing(Vec2::new(0.01, 0.0), Vec2::new(0.5, 0.0)).is_none());
        assert!(b.crossing(Vec2::new(0.5, 0.04), Vec2::new(0.01, 0.04)).is_none());
    }

    #[test]
    fn barrier_flux_matches_closed_form() {
        let t = build_diamond(DiamondSpec::default()).unwrap();
        let b = CornerBarrier::new(&t, 0, 0.05).unwrap();
        let analytic = b.analytic_measure(&t);
        let mut rng = stream(10, &[0]);
        let est = measure_barrier(&b, &t, 60_000, &mut rng).unwrap();
        let sd = (analytic * (1.0 - analytic) / 60_000.0).sqrt();
        assert!(
            (est.estimate - analytic).abs() < 3.0 * sd,
            "{} vs {analytic} (sd {sd})",
            est.estimate
        );
    }

    #[test]
    fn barrier_rejects_bad_configurations() {
        let t = build_diamond(DiamondSpec::default()).unwrap();
        assert!(matches!(
            CornerBarrier::new(&t, 1, 0.05),
            Err(TargetError::BadCorner { .. })
        ));
        assert!(matches!(
            CornerBarrier::new(&t, 0, 0.6),
            Err(TargetError::BarrierTooWide { .. })
        ));
        let stadium = build_stadium(2.0).unwrap();
        assert!(matches!(
            CornerBarrier::new(&stadium, 0, 0.05),
            Err(TargetError::UnsuitableTable { .. })
        ));
    }

    #[test]
    fn intensity_models_are_probabilities() {
        for model in [
            IntensityModel::UniformSquare,
            IntensityModel::CosineStrip,
            IntensityModel::CosineBarrier,
        ] {
            let (lo, hi) = model.support();
            let total = model.mark_mass(lo, hi);
            assert!((total - 1.0).abs() < 1e-12, "{model:?} mass {total}");
            let mut rng = stream(12, &[0]);
            for _ in 0..500 {
                let (x, y) = model.sample(&mut rng);
                assert!(x >= lo.0 && x <= hi.0 && y >= lo.1 && y <= hi.1);
            }
        }
        // Spot value: strip density over the upper-right quadrant.
        let quad = IntensityModel::CosineStrip.mark_mass((0.0, 0.0), (1.0, FRAC_PI_2));
        assert!((quad - 0.25).abs() < 1e-12);
    }

    #[test]
    fn empirical_model_counts_fractions() {
        let m = ToralAutomorphism::cat();
        let p = PrunedBall::new(&m, Vec2::ZERO, 1, 2, 0.05).unwrap();
        let mut rng = stream(13, &[0]);
        let model = empirical_pruned_marks(&m, &p, 5_000, &mut rng).unwrap();
        let (lo, hi) = model.support();
        assert!((model.mark_mass(lo, hi) - 1.0).abs() < 1e-12);
        let left = model.mark_mass((-1.0, -1.0), (0.0, 1.0));
        let right = model.mark_mass((0.0, -1.0), (1.0, 1.0));
        assert!((left + right - 1.0).abs() < 1e-9);
    }
}

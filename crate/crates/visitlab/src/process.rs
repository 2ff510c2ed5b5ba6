//! Point-process extraction: run a system against a target and emit the
//! rescaled space-time visit points.
//!
//! Map-time processes put a point at `(n * mu(A), mark)` for every step `n`
//! whose state lands in the target; flow-time processes use the physical
//! flight clock normalized by `mu(A) / tau_bar`. The cluster extractor
//! additionally groups ball visits near a periodic point into clusters and
//! carries both time normalizations.

use crate::billiard::{self, PhasePoint};
use crate::geometry::Table;
use crate::maps::{BitShiftOrbit, Mat2, ToralAutomorphism};
use crate::rng;
use crate::targets::{BilliardTarget, CornerBarrier, IntensityModel, PrunedBall, TorusTarget};
use crate::Vec2;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Refuse runs that would iterate more than this many raw steps.
pub const MAX_STEPS: u64 = 100_000_000;

/// Backward search depth cap for the cluster map.
pub const PSI_DEPTH_CAP: usize = 1_000;

#[derive(Debug, Error)]
pub enum ProcessError {
    #[error("horizon needs {steps} raw steps, beyond the {cap} cap")]
    HorizonTooLarge { steps: u64, cap: u64 },
    #[error("normalizing measure must be positive, got {0}")]
    BadMeasure(f64),
    #[error("theta must lie in (0, 1], got {0}")]
    BadTheta(f64),
    #[error("cluster map is undefined at the zero mark")]
    ZeroMark,
    #[error("backward stopping-set search exceeded {0} iterates (mark too close to the stable line)")]
    StoppingSearchFailed(usize),
    #[error("anchor sampling starved after {attempts} attempts")]
    AnchorStarved { attempts: usize },
    #[error("malformed realization csv at line {line}")]
    BadCsv { line: usize },
}

/// One visit: normalized time plus the zoomed mark.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkedPoint {
    pub t: f64,
    pub mark: (f64, f64),
}

/// A full extracted process on one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Realization {
    pub points: Vec<MarkedPoint>,
    /// Normalized-time horizon; all point times are `<=` this.
    pub window: f64,
    pub eps: f64,
    /// Measure used for the time normalization.
    pub mu_a: f64,
    /// Raw steps (or collisions) consumed.
    pub steps: u64,
    pub seed: u64,
    /// A degenerate orbit ended the run before the horizon.
    pub truncated: bool,
}

impl Realization {
    /// Number of points with time in `(lo, hi]`.
    pub fn count_in(&self, lo: f64, hi: f64) -> usize {
        self.points.iter().filter(|p| p.t > lo && p.t <= hi).count()
    }

    /// CSV dump, one row per point: `seed,t,mark0,mark1` with shortest
    /// round-trip float formatting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("seed,t,mark0,mark1\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{},{}\n", self.seed, p.t, p.mark.0, p.mark.1));
        }
        out
    }

    /// Parse a CSV dump back into `(seed, points)`. Bit-exact against
    /// `to_csv` for finite values.
    pub fn from_csv(s: &str) -> Result<(u64, Vec<MarkedPoint>), ProcessError> {
        let mut lines = s.lines().enumerate();
        match lines.next() {
            Some((_, "seed,t,mark0,mark1")) => {}
            _ => return Err(ProcessError::BadCsv { line: 1 }),
        }
        let mut seed = None;
        let mut points = Vec::new();
        for (i, line) in lines {
            if line.is_empty() {
                continue;
            }
            let bad = || ProcessError::BadCsv { line: i + 1 };
            let mut fields = line.split(',');
            let s: u64 = fields.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
            let t: f64 = fields.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
            let m0: f64 = fields.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
            let m1: f64 = fields.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
            if fields.next().is_some() {
                return Err(bad());
            }
            match seed {
                None => seed = Some(s),
                Some(prev) if prev != s => return Err(bad()),
                _ => {}
            }
            points.push(MarkedPoint { t, mark: (m0, m1) });
        }
        Ok((seed.unwrap_or(0), points))
    }
}

fn plan_steps(horizon: f64, mu_a: f64) -> Result<u64, ProcessError> {
    if !(mu_a > 0.0) {
        return Err(ProcessError::BadMeasure(mu_a));
    }
    assert!(horizon > 0.0, "horizon must be positive");
    let steps = (horizon / mu_a).ceil() as u64;
    if steps > MAX_STEPS {
        return Err(ProcessError::HorizonTooLarge {
            steps,
            cap: MAX_STEPS,
        });
    }
    Ok(steps)
}

// ---------------------------------------------------------------------------
// Map-time extraction
// ---------------------------------------------------------------------------

/// Visits of a toral orbit to a target, times normalized by `mu_a`.
pub fn extract_toral_process(
    map: &ToralAutomorphism,
    target: &TorusTarget,
    mu_a: f64,
    x0: Vec2,
    horizon: f64,
    seed: u64,
) -> Result<Realization, ProcessError> {
    let steps = plan_steps(horizon, mu_a)?;
    let mut points = Vec::new();
    let mut x = x0;
    for n in 1..=steps {
        x = map.step(x);
        if target.contains(map, x) {
            points.push(MarkedPoint {
                t: n as f64 * mu_a,
                mark: target.mark(map, x),
            });
        }
    }
    Ok(Realization {
        points,
        window: steps as f64 * mu_a,
        eps: target.eps(),
        mu_a,
        steps,
        seed,
        truncated: false,
    })
}

/// Visits of a doubling orbit to the interval `[lo, hi)`; marks are the
/// interval-relative position `((x - lo)/(hi - lo), 0)`.
pub fn extract_doubling_process<R: Rng>(
    orbit: &mut BitShiftOrbit<R>,
    interval: (f64, f64),
    horizon: f64,
    seed: u64,
) -> Result<Realization, ProcessError> {
    let (lo, hi) = interval;
    assert!(0.0 <= lo && lo < hi && hi <= 1.0, "bad interval");
    let mu_a = hi - lo;
    let steps = plan_steps(horizon, mu_a)?;
    let mut points = Vec::new();
    for n in 1..=steps {
        let x = orbit.step();
        if (lo..hi).contains(&x) {
            points.push(MarkedPoint {
                t: n as f64 * mu_a,
                mark: ((x - lo) / mu_a, 0.0),
            });
        }
    }
    Ok(Realization {
        points,
        window: steps as f64 * mu_a,
        eps: mu_a,
        mu_a,
        steps,
        seed,
        truncated: false,
    })
}

/// Collision-indexed visits of a billiard orbit to a target.
pub fn extract_billiard_process(
    table: &Table,
    target: &BilliardTarget,
    mu_a: f64,
    start: PhasePoint,
    horizon: f64,
    seed: u64,
) -> Result<Realization, ProcessError> {
    let steps = plan_steps(horizon, mu_a)?;
    let mut points = Vec::new();
    let mut state = start;
    let mut truncated = false;
    let mut n_done = 0;
    for n in 1..=steps {
        match billiard::step(table, state) {
            Ok(rec) => {
                state = rec.state;
                n_done = n;
                if target.contains(table, state) {
                    points.push(MarkedPoint {
                        t: n as f64 * mu_a,
                        mark: target.mark(table, state),
                    });
                }
            }
            Err(_) => {
                truncated = true;
                break;
            }
        }
    }
    Ok(Realization {
        points,
        window: steps as f64 * mu_a,
        eps: target.eps(),
        mu_a,
        steps: n_done,
        seed,
        truncated,
    })
}

/// Flow-time visits of a billiard orbit to a target: event times are the
/// physical collision instants, normalized by `mu_a / tau_bar`.
pub fn extract_billiard_flow_process(
    table: &Table,
    target: &BilliardTarget,
    mu_a: f64,
    tau_bar: f64,
    start: PhasePoint,
    horizon: f64,
    seed: u64,
) -> Result<Realization, ProcessError> {
    plan_steps(horizon, mu_a)?; // same budget guard as the map clock
    assert!(tau_bar > 0.0);
    let scale = mu_a / tau_bar;
    let mut points = Vec::new();
    let mut state = start;
    let mut s_phys = 0.0;
    let mut truncated = false;
    let mut n = 0u64;
    loop {
        n += 1;
        if n > 2 * MAX_STEPS {
            truncated = true;
            break;
        }
        match billiard::step(table, state) {
            Ok(rec) => {
                s_phys += rec.tau;
                state = rec.state;
                let t = s_phys * scale;
                if t > horizon {
                    break;
                }
                if target.contains(table, state) {
                    points.push(MarkedPoint {
                        t,
                        mark: target.mark(table, state),
                    });
                }
            }
            Err(_) => {
                truncated = true;
                break;
            }
        }
    }
    Ok(Realization {
        points,
        window: horizon,
        eps: target.eps(),
        mu_a,
        steps: n - 1,
        seed,
        truncated,
    })
}

/// Flow-time barrier crossings on the diamond. Event times interpolate the
/// flight chord at the crossing point; the normalization uses the exact flux
/// measure `eps / |boundary|` over the exact mean free path, so the time
/// scale equals `eps / (pi * area)` identically.
pub fn extract_barrier_process(
    table: &Table,
    barrier: &CornerBarrier,
    start: PhasePoint,
    horizon: f64,
    seed: u64,
) -> Result<Realization, ProcessError> {
    let mu_a = barrier.analytic_measure(table);
    plan_steps(horizon, mu_a)?;
    let scale = mu_a / table.mean_free_path();
    let mut points = Vec::new();
    let mut state = start;
    let mut s_phys = 0.0;
    let mut truncated = false;
    let mut n = 0u64;
    loop {
        n += 1;
        if n > 2 * MAX_STEPS {
            truncated = true;
            break;
        }
        match billiard::step(table, state) {
            Ok(rec) => {
                if let Some(c) = barrier.crossing(rec.from, rec.to) {
                    let t = (s_phys + c.t * rec.tau) * scale;
                    if t <= horizon {
                        points.push(MarkedPoint { t, mark: c.mark });
                    }
                }
                s_phys += rec.tau;
                state = rec.state;
                if s_phys * scale > horizon {
                    break;
                }
            }
            Err(_) => {
                truncated = true;
                break;
            }
        }
    }
    Ok(Realization {
        points,
        window: horizon,
        eps: barrier.eps,
        mu_a,
        steps: n - 1,
        seed,
        truncated,
    })
}

// ---------------------------------------------------------------------------
// Cluster extraction at periodic points
// ---------------------------------------------------------------------------

/// One cluster of ball visits: chronological steps and marks; the last visit
/// is the pruned-set event anchoring the cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub anchor_step: u64,
    /// Anchor time normalized by the pruned-set measure.
    pub anchor_t: f64,
    pub steps: Vec<u64>,
    pub marks: Vec<(f64, f64)>,
}

impl Cluster {
    pub fn size(&self) -> usize {
        self.steps.len()
    }
}

/// Ball-visit process near a periodic point with its cluster structure and
/// both time normalizations.
#[derive(Debug, Clone, Serialize)]
pub struct ClusterRealization {
    pub clusters: Vec<Cluster>,
    /// `mu_a / mu_ball` actually used.
    pub theta: f64,
    pub mu_a: f64,
    pub mu_ball: f64,
    /// Every ball visit, times normalized by the ball measure.
    pub ball: Realization,
    /// Pruned-set visits only, times normalized by `mu_a`.
    pub pruned: Realization,
    /// Clusters still open at the horizon, dropped from `clusters`.
    pub dropped_open: u32,
}

impl ClusterRealization {
    /// Times-only ball process (the temporal projection).
    pub fn temporal(&self) -> Realization {
        temporal_projection(&self.ball)
    }
}

/// Extract ball visits around a periodic site and group them into clusters.
/// Consecutive visits separated by at most `q0 * period` steps share a
/// cluster; a cluster closes once the observed gap to the next visit (or the
/// horizon) exceeds that, which is exactly the pruned-set condition.
pub fn extract_cluster_process(
    map: &ToralAutomorphism,
    site: &PrunedBall,
    mu_a: f64,
    x0: Vec2,
    horizon: f64,
    seed: u64,
) -> Result<ClusterRealization, ProcessError> {
    let steps = plan_steps(horizon, mu_a)?;
    let mu_ball = (2.0 * site.eps).min(1.0).powi(2);
    let theta = mu_a / mu_ball;
    if !(theta > 0.0 && theta <= 1.0 + 1e-9) {
        return Err(ProcessError::BadTheta(theta));
    }
    let ball_target = TorusTarget::Ball {
        center: site.center,
        eps: site.eps,
    };
    let pruned_target = TorusTarget::Pruned(*site);
    let gap_cap = (site.q0 as u64) * (site.period as u64);

    let mut ball_points = Vec::new();
    let mut pruned_points = Vec::new();
    let mut clusters = Vec::new();
    let mut pending: Vec<(u64, (f64, f64))> = Vec::new();
    let mut dropped_open = 0u32;

    let close = |pending: &mut Vec<(u64, (f64, f64))>, clusters: &mut Vec<Cluster>| {
        let (anchor_step, _) = *pending.last().expect("closing an empty cluster");
        clusters.push(Cluster {
            anchor_step,
            anchor_t: anchor_step as f64 * mu_a,
            steps: pending.iter().map(|&(n, _)| n).collect(),
            marks: pending.iter().map(|&(_, m)| m).collect(),
        });
        pending.clear();
    };

    let mut x = x0;
    for n in 1..=steps {
        x = map.step(x);
        if !ball_target.contains(map, x) {
            continue;
        }
        let mark = ball_target.mark(map, x);
        ball_points.push(MarkedPoint {
            t: n as f64 * mu_ball,
            mark,
        });
        if pruned_target.contains(map, x) {
            pruned_points.push(MarkedPoint {
                t: n as f64 * mu_a,
                mark,
            });
        }
        match pending.last() {
            Some(&(last, _)) if n - last > gap_cap => {
                close(&mut pending, &mut clusters);
                pending.push((n, mark));
            }
            _ => pending.push((n, mark)),
        }
    }
    if let Some(&(last, _)) = pending.last() {
        if steps - last > gap_cap {
            close(&mut pending, &mut clusters);
        } else {
            dropped_open += 1;
        }
    }

    let window = steps as f64 * mu_a;
    Ok(ClusterRealization {
        clusters,
        theta,
        mu_a,
        mu_ball,
        ball: Realization {
            points: ball_points,
            window: steps as f64 * mu_ball,
            eps: site.eps,
            mu_a: mu_ball,
            steps,
            seed,
            truncated: false,
        },
        pruned: Realization {
            points: pruned_points,
            window,
            eps: site.eps,
            mu_a,
            steps,
            seed,
            truncated: false,
        },
        dropped_open,
    })
}

// ---------------------------------------------------------------------------
// The cluster map and its size law
// ---------------------------------------------------------------------------

/// Backward cluster reconstruction from an anchor mark: walk `y` through
/// powers of the inverse linearization until reaching a point of the unit
/// ball whose own `q0` backward iterates all sit outside it (the rescaled
/// first visit). Returns every iterate on the way, including out-of-ball
/// ones — real clusters revisit the ball non-consecutively.
pub fn psi_predict(dt_p: &Mat2, q0: u32, y: Vec2) -> Result<Vec<Vec2>, ProcessError> {
    assert!(q0 >= 1, "pruning depth must be at least 1");
    if y.sup_norm() == 0.0 {
        return Err(ProcessError::ZeroMark);
    }
    let inv = dt_p.inverse();
    let mut inv_pows = Vec::with_capacity(q0 as usize);
    let mut acc = inv;
    for _ in 0..q0 {
        inv_pows.push(acc);
        acc = acc.mul(&inv);
    }
    let stopping = |w: Vec2| {
        w.sup_norm() < 1.0 && inv_pows.iter().all(|m| m.apply(w).sup_norm() >= 1.0)
    };
    let mut marks = Vec::new();
    let mut w = y;
    for _ in 0..=PSI_DEPTH_CAP {
        marks.push(w);
        if stopping(w) {
            return Ok(marks);
        }
        w = inv.apply(w);
    }
    Err(ProcessError::StoppingSearchFailed(PSI_DEPTH_CAP))
}

/// Ball visits within a predicted cluster (atoms outside the unit ball do
/// not count as visits).
pub fn psi_cluster_size(marks: &[Vec2]) -> usize {
    marks.iter().filter(|m| m.sup_norm() < 1.0).count()
}

/// Model cluster-size law: anchors drawn uniformly from the linearized
/// pruned set, sizes from the backward reconstruction.
#[derive(Debug, Clone, Serialize)]
pub struct ClusterSizeModel {
    /// `pmf[k]` is the probability of size `k + 1`.
    pub pmf: Vec<f64>,
    pub mean: f64,
    pub anchors: usize,
    /// Fraction of the unit ball surviving the linearized pruning.
    pub theta: f64,
}

impl ClusterSizeModel {
    pub fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (k, &p) in self.pmf.iter().enumerate() {
            acc += p;
            if u < acc {
                return k + 1;
            }
        }
        self.pmf.len()
    }
}

/// Monte Carlo construction of the model size law for the linearization
/// `dt_p` with pruning depth `q0`.
pub fn psi_size_distribution<R: Rng>(
    dt_p: &Mat2,
    q0: u32,
    n_anchors: usize,
    rng: &mut R,
) -> Result<ClusterSizeModel, ProcessError> {
    assert!(q0 >= 1);
    let mut fwd_pows = Vec::with_capacity(q0 as usize);
    let mut acc = *dt_p;
    for _ in 0..q0 {
        fwd_pows.push(acc);
        acc = acc.mul(dt_p);
    }
    let pruned = |w: Vec2| fwd_pows.iter().all(|m| m.apply(w).sup_norm() >= 1.0);

    let cap = n_anchors.saturating_mul(1_000);
    let mut counts: Vec<u64> = Vec::new();
    let mut collected = 0usize;
    let mut attempts = 0usize;
    let mut ball_draws = 0u64;
    let mut pruned_draws = 0u64;
    while collected < n_anchors {
        if attempts >= cap {
            return Err(ProcessError::AnchorStarved { attempts });
        }
        attempts += 1;
        let w = Vec2::new(rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0);
        ball_draws += 1;
        if !pruned(w) {
            continue;
        }
        pruned_draws += 1;
        let size = psi_cluster_size(&psi_predict(dt_p, q0, w)?);
        if counts.len() < size {
            counts.resize(size, 0);
        }
        counts[size - 1] += 1;
        collected += 1;
    }
    let total = collected as f64;
    let pmf: Vec<f64> = counts.iter().map(|&c| c as f64 / total).collect();
    let mean = counts
        .iter()
        .enumerate()
        .map(|(k, &c)| (k + 1) as f64 * c as f64)
        .sum::<f64>()
        / total;
    Ok(ClusterSizeModel {
        pmf,
        mean,
        anchors: collected,
        theta: pruned_draws as f64 / ball_draws as f64,
    })
}

// ---------------------------------------------------------------------------
// Transformations
// ---------------------------------------------------------------------------

/// Drop marks, keep the time normalization.
pub fn temporal_projection(r: &Realization) -> Realization {
    Realization {
        points: r
            .points
            .iter()
            .map(|p| MarkedPoint {
                t: p.t,
                mark: (0.0, 0.0),
            })
            .collect(),
        ..r.clone()
    }
}

/// Divide all times (and the window) by `theta`, keeping marks: switches a
/// pruned-set normalization to the ball normalization.
pub fn theta_rescale(r: &Realization, theta: f64) -> Result<Realization, ProcessError> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(ProcessError::BadTheta(theta));
    }
    Ok(Realization {
        points: r
            .points
            .iter()
            .map(|p| MarkedPoint {
                t: p.t / theta,
                mark: p.mark,
            })
            .collect(),
        window: r.window / theta,
        mu_a: r.mu_a / theta,
        ..r.clone()
    })
}

// ---------------------------------------------------------------------------
// Reference engines
// ---------------------------------------------------------------------------

/// Product model of the digit shift: every step exposes a fresh uniform, so
/// visit indicators to any fixed set are exactly independent across steps.
/// This is the engine behind the exact avoidance product — unlike
/// [`BitShiftOrbit`], which carries digit memory between steps.
pub struct IidShift<R> {
    rng: R,
}

impl<R: Rng> IidShift<R> {
    pub fn new(rng: R) -> Self {
        IidShift { rng }
    }

    pub fn step(&mut self) -> f64 {
        self.rng.gen()
    }
}

/// Homogeneous rate-one Poisson realization with marks from `intensity`;
/// the calibration fixture for the verification battery.
pub fn synthetic_poisson(window: f64, intensity: &IntensityModel, seed: u64) -> Realization {
    let mut rng = rng::stream(seed, &[0x504F_4953]);
    let mut points = Vec::new();
    let mut t = 0.0;
    loop {
        let u: f64 = rng.gen();
        t -= (1.0 - u).ln();
        if t > window {
            break;
        }
        points.push(MarkedPoint {
            t,
            mark: intensity.sample(&mut rng),
        });
    }
    Realization {
        points,
        window,
        eps: 0.0,
        mu_a: 1.0,
        steps: 0,
        seed,
        truncated: false,
    }
}

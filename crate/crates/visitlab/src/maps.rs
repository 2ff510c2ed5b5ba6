//! Hyperbolic toral automorphisms and the doubling map.
//!
//! Toral automorphisms keep two representations: exact `i64` matrices for
//! periodic-point enumeration (counts must come out as integers) and `f64`
//! [`Mat2`] for the dynamics and the contraction-exponent search.

use crate::{rng, Vec2};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use thiserror::Error;

/// The contraction search gives up beyond this exponent.
pub const CONTRACTION_Q_MAX: u32 = 64;

/// Width of the window `[2q, 2q + CONTRACTION_WINDOW]` over which the
/// contraction inequality is verified.
pub const CONTRACTION_WINDOW: usize = 16;

/// Directions sampled by default when certifying a contraction exponent.
pub const CONTRACTION_DIRECTIONS: usize = 100_000;

/// Periodic-point enumeration refuses above this many points.
pub const PERIODIC_POINT_CAP: i64 = 100_000;

#[derive(Debug, Error)]
pub enum MapError {
    #[error("matrix determinant must be +1 or -1, got {det}")]
    NotUnimodular { det: i64 },
    #[error("matrix is not hyperbolic: eigenvalues {l1:.6} and {l2:.6} do not straddle the unit circle")]
    NotHyperbolic { l1: f64, l2: f64 },
    #[error("integer overflow while raising the matrix to power {p}")]
    PowerOverflow { p: u32 },
    #[error("{count} periodic points exceed the enumeration cap {cap}")]
    TooManyPeriodicPoints { count: i64, cap: i64 },
    #[error("no contraction exponent up to q = {q_max} certifies (worst ratio {worst:.4}, need <= 0.25)")]
    ContractionSearchFailed { q_max: u32, worst: f64 },
    #[error("contraction certificate violated: ratio {ratio:.4} > 0.25 at q = {q}")]
    ContractionViolated { q: u32, ratio: f64 },
}

/// Real 2x2 matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Mat2 {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2 { a, b, c, d }
    }

    pub fn diag(a: f64, d: f64) -> Self {
        Mat2::new(a, 0.0, 0.0, d)
    }

    pub fn apply(&self, v: Vec2) -> Vec2 {
        Vec2::new(self.a * v.x + self.b * v.y, self.c * v.x + self.d * v.y)
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    pub fn mul(&self, o: &Mat2) -> Mat2 {
        Mat2::new(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )
    }

    pub fn powi(&self, p: u32) -> Mat2 {
        let mut out = Mat2::diag(1.0, 1.0);
        for _ in 0..p {
            out = out.mul(self);
        }
        out
    }

    pub fn inverse(&self) -> Mat2 {
        let det = self.det();
        Mat2::new(self.d / det, -self.b / det, -self.c / det, self.a / det)
    }

    /// Real eigenvalues ordered by descending magnitude.
    pub fn eigenvalues(&self) -> Option<(f64, f64)> {
        let tr = self.trace();
        let disc = tr * tr - 4.0 * self.det();
        if disc <= 0.0 {
            return None;
        }
        let s = disc.sqrt();
        let (l1, l2) = ((tr + s) / 2.0, (tr - s) / 2.0);
        if l1.abs() >= l2.abs() {
            Some((l1, l2))
        } else {
            Some((l2, l1))
        }
    }

    /// Unit eigenvector for the eigenvalue `l`.
    fn eigenvector(&self, l: f64) -> Vec2 {
        // (A - l) v = 0; pick the better-conditioned row.
        let r1 = Vec2::new(self.a - l, self.b);
        let r2 = Vec2::new(self.c, self.d - l);
        let v = if r1.norm() >= r2.norm() {
            Vec2::new(-r1.y, r1.x)
        } else {
            Vec2::new(-r2.y, r2.x)
        };
        v.normalized()
    }

    /// Require eigenvalues strictly off the unit circle on both sides.
    pub fn require_hyperbolic(&self) -> Result<(f64, f64), MapError> {
        match self.eigenvalues() {
            Some((l1, l2)) if l1.abs() > 1.0 + 1e-9 && l2.abs() < 1.0 - 1e-9 => Ok((l1, l2)),
            Some((l1, l2)) => Err(MapError::NotHyperbolic { l1, l2 }),
            None => Err(MapError::NotHyperbolic {
                l1: f64::NAN,
                l2: f64::NAN,
            }),
        }
    }
}

/// Unimodular hyperbolic integer matrix acting on the unit torus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToralAutomorphism {
    m: [[i64; 2]; 2],
}

impl ToralAutomorphism {
    pub fn new(m: [[i64; 2]; 2]) -> Result<Self, MapError> {
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        if det.abs() != 1 {
            return Err(MapError::NotUnimodular { det });
        }
        let auto = ToralAutomorphism { m };
        auto.matrix().require_hyperbolic()?;
        Ok(auto)
    }

    /// The standard [[2,1],[1,1]] automorphism.
    pub fn cat() -> Self {
        ToralAutomorphism::new([[2, 1], [1, 1]]).unwrap()
    }

    pub fn entries(&self) -> [[i64; 2]; 2] {
        self.m
    }

    pub fn matrix(&self) -> Mat2 {
        Mat2::new(
            self.m[0][0] as f64,
            self.m[0][1] as f64,
            self.m[1][0] as f64,
            self.m[1][1] as f64,
        )
    }

    pub fn det(&self) -> i64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    /// Integer inverse (exists because |det| = 1).
    pub fn inverse(&self) -> ToralAutomorphism {
        let [[a, b], [c, d]] = self.m;
        let s = self.det(); // adj / det with det = +-1
        ToralAutomorphism {
            m: [[s * d, -s * b], [-s * c, s * a]],
        }
    }

    /// Plane action (no wrapping).
    pub fn apply(&self, v: Vec2) -> Vec2 {
        self.matrix().apply(v)
    }

    /// One torus step: multiply and wrap into `[0,1)^2`.
    pub fn step(&self, x: Vec2) -> Vec2 {
        let y = self.apply(x);
        Vec2::new(y.x.rem_euclid(1.0), y.y.rem_euclid(1.0))
    }

    /// Exact integer power, refusing on overflow.
    pub fn pow(&self, p: u32) -> Result<[[i64; 2]; 2], MapError> {
        let mut out = [[1i64, 0], [0, 1]];
        for _ in 0..p {
            out = mat_mul_checked(out, self.m).ok_or(MapError::PowerOverflow { p })?;
        }
        Ok(out)
    }

    /// All fixed points of the p-th iterate, with least-period annotation.
    ///
    /// The solutions of `(M^p - I) x` integer form a subgroup of the torus of
    /// order `|det(M^p - I)|`, generated by the columns of the inverse; the
    /// subgroup closure enumerates them in exact rational arithmetic.
    pub fn periodic_points(&self, p: u32) -> Result<Vec<PeriodicPoint>, MapError> {
        assert!(p >= 1);
        let mp = self.pow(p)?;
        let n = [[mp[0][0] - 1, mp[0][1]], [mp[1][0], mp[1][1] - 1]];
        let det = n[0][0] * n[1][1] - n[0][1] * n[1][0];
        debug_assert!(det != 0, "hyperbolic powers never have eigenvalue 1");
        let dabs = det.abs();
        if dabs > PERIODIC_POINT_CAP {
            return Err(MapError::TooManyPeriodicPoints {
                count: dabs,
                cap: PERIODIC_POINT_CAP,
            });
        }
        let s = det.signum();
        // Columns of N^{-1} = adj(N)/det, as numerators over dabs.
        let g1 = (
            (s * n[1][1]).rem_euclid(dabs),
            (-s * n[1][0]).rem_euclid(dabs),
        );
        let g2 = (
            (-s * n[0][1]).rem_euclid(dabs),
            (s * n[0][0]).rem_euclid(dabs),
        );
        let mut seen: HashSet<(i64, i64)> = HashSet::new();
        let mut queue = vec![(0i64, 0i64)];
        seen.insert((0, 0));
        while let Some((u, v)) = queue.pop() {
            for g in [g1, g2] {
                let next = ((u + g.0).rem_euclid(dabs), (v + g.1).rem_euclid(dabs));
                if seen.insert(next) {
                    queue.push(next);
                }
            }
        }
        assert_eq!(
            seen.len() as i64,
            dabs,
            "periodic point count must equal |det(M^p - I)|"
        );

        // Least period via exact divisor tests.
        let divisor_mats: Vec<(u32, [[i64; 2]; 2])> = (1..=p)
            .filter(|q| p % q == 0)
            .map(|q| Ok((q, self.pow(q)?)))
            .collect::<Result<_, MapError>>()?;
        let mut points: Vec<PeriodicPoint> = seen
            .into_iter()
            .map(|(u, v)| {
                let least = divisor_mats
                    .iter()
                    .find(|(_, mq)| fixes_rational(*mq, u, v, dabs))
                    .map(|(q, _)| *q)
                    .unwrap_or(p);
                PeriodicPoint {
                    point: Vec2::new(u as f64 / dabs as f64, v as f64 / dabs as f64),
                    num: (u, v),
                    den: dabs,
                    least_period: least,
                }
            })
            .collect();
        points.sort_by_key(|pt| pt.num);
        Ok(points)
    }
}

/// Does `M_q` fix the rational point `(u/den, v/den)` on the torus?
fn fixes_rational(mq: [[i64; 2]; 2], u: i64, v: i64, den: i64) -> bool {
    let x = (mq[0][0] - 1) as i128 * u as i128 + mq[0][1] as i128 * v as i128;
    let y = mq[1][0] as i128 * u as i128 + (mq[1][1] - 1) as i128 * v as i128;
    x.rem_euclid(den as i128) == 0 && y.rem_euclid(den as i128) == 0
}

fn mat_mul_checked(x: [[i64; 2]; 2], y: [[i64; 2]; 2]) -> Option<[[i64; 2]; 2]> {
    let mut out = [[0i64; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = x[i][0]
                .checked_mul(y[0][j])?
                .checked_add(x[i][1].checked_mul(y[1][j])?)?;
        }
    }
    Some(out)
}

/// A fixed point of `M^p` in exact rational coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodicPoint {
    pub point: Vec2,
    /// Numerators over `den`.
    pub num: (i64, i64),
    pub den: i64,
    pub least_period: u32,
}

/// Outcome of a successful contraction-exponent search.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ContractionCertificate {
    pub q: u32,
    /// Largest `|A^q v| / max(|v|, |A^n v|)` seen; certified <= 0.25.
    pub max_ratio: f64,
    pub directions: usize,
}

/// Smallest `q` with `|A^q v| <= max(|v|, |A^n v|) / 4` for all unit `v` and
/// all `n` in `[2q, 2q + CONTRACTION_WINDOW]`, certified over `n_dirs`
/// sampled directions plus both eigendirections and the axes.
pub fn contraction_exponent(
    a: Mat2,
    n_dirs: usize,
    seed: u64,
) -> Result<ContractionCertificate, MapError> {
    let (l1, l2) = a.require_hyperbolic()?;
    let mut dirs = vec![
        a.eigenvector(l1),
        a.eigenvector(l2),
        Vec2::new(1.0, 0.0),
        Vec2::new(0.0, 1.0),
    ];
    let mut rng = rng::stream(seed, &[n_dirs as u64]);
    dirs.extend((0..n_dirs).map(|_| Vec2::from_angle(rng.gen::<f64>() * std::f64::consts::TAU)));

    let mut worst_at_qmax = 0.0f64;
    for q in 1..=CONTRACTION_Q_MAX {
        match check_contraction(a, q, &dirs) {
            Ok(max_ratio) => {
                return Ok(ContractionCertificate {
                    q,
                    max_ratio,
                    directions: dirs.len(),
                })
            }
            Err(ratio) => worst_at_qmax = ratio,
        }
    }
    Err(MapError::ContractionSearchFailed {
        q_max: CONTRACTION_Q_MAX,
        worst: worst_at_qmax,
    })
}

/// Re-verify a claimed exponent on a fresh direction sample; returns the max
/// ratio on success.
pub fn verify_contraction(a: Mat2, q: u32, n_dirs: usize, seed: u64) -> Result<f64, MapError> {
    a.require_hyperbolic()?;
    let mut rng = rng::stream(seed, &[q as u64, n_dirs as u64]);
    let dirs: Vec<Vec2> = (0..n_dirs)
        .map(|_| Vec2::from_angle(rng.gen::<f64>() * std::f64::consts::TAU))
        .collect();
    check_contraction(a, q, &dirs).map_err(|ratio| MapError::ContractionViolated { q, ratio })
}

/// `Ok(max ratio)` when the window inequality holds for every direction,
/// `Err(first violating ratio)` otherwise.
fn check_contraction(a: Mat2, q: u32, dirs: &[Vec2]) -> Result<f64, f64> {
    let top = 2 * q as usize + CONTRACTION_WINDOW;
    let mut max_ratio = 0.0f64;
    for &v in dirs {
        let mut w = v;
        let mut norm_q = 0.0;
        for k in 1..=top {
            w = a.apply(w);
            if k == q as usize {
                norm_q = w.norm();
            }
            if k >= 2 * q as usize {
                let ratio = norm_q / v.norm().max(w.norm());
                if ratio > 0.25 {
                    return Err(ratio);
                }
                max_ratio = max_ratio.max(ratio);
            }
        }
    }
    Ok(max_ratio)
}

/// Membership of `A^k v` in the Euclidean unit ball for `k = 0..=n_max`.
pub fn ball_itinerary(a: Mat2, v: Vec2, n_max: usize) -> Vec<bool> {
    let mut out = Vec::with_capacity(n_max + 1);
    let mut w = v;
    out.push(w.norm() < 1.0);
    for _ in 0..n_max {
        w = a.apply(w);
        out.push(w.norm() < 1.0);
    }
    out
}

/// One doubling-map step. Fine for short illustrative orbits; long orbits
/// must use [`BitShiftOrbit`] because `2x mod 1` drains an f64 mantissa to
/// zero in 53 steps.
pub fn doubling_step(x: f64) -> f64 {
    (2.0 * x).rem_euclid(1.0)
}

/// Doubling-map orbit fed by an i.i.d. bit reservoir.
///
/// The state is a 64-bit window interpreted as the binary expansion of the
/// current point; each step shifts one fresh random bit in. For a
/// Lebesgue-random start this is the doubling map exactly (up to 2^-64), and
/// it never suffers the mantissa drain of naive iteration.
pub struct BitShiftOrbit<R> {
    window: u64,
    rng: R,
}

impl<R: Rng> BitShiftOrbit<R> {
    pub fn new(mut rng: R) -> Self {
        let window = rng.gen::<u64>();
        BitShiftOrbit { window, rng }
    }

    /// Orbit starting from a prescribed point (quantized to 53 bits); the
    /// bits below the f64 resolution come from the reservoir.
    pub fn from_point(x0: f64, mut rng: R) -> Self {
        assert!((0.0..1.0).contains(&x0));
        let top = (x0 * (1u64 << 53) as f64) as u64;
        let window = (top << 11) | (rng.gen::<u64>() & 0x7FF);
        BitShiftOrbit { window, rng }
    }

    /// Current point in `[0, 1)`.
    pub fn x(&self) -> f64 {
        (self.window >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Advance one step and return the new point.
    pub fn step(&mut self) -> f64 {
        self.window = (self.window << 1) | (self.rng.gen::<u64>() & 1);
        self.x()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn cat_map_wraps_the_square() {
        let m = ToralAutomorphism::cat();
        let y = m.step(Vec2::new(0.5, 0.5));
        assert!((y - Vec2::new(0.5, 0.0)).norm() < 1e-12);
        assert!(m.step(Vec2::ZERO).norm() < 1e-12);
    }

    #[test]
    fn inverse_undoes_the_map() {
        let m = ToralAutomorphism::cat();
        let inv = m.inverse();
        for (x, y) in [(0.12, 0.77), (0.5, 0.25), (0.9, 0.05)] {
            let p = Vec2::new(x, y);
            let back = inv.step(m.step(p));
            assert!((back - p).norm() < 1e-12, "{p:?} -> {back:?}");
        }
        // M M^{-1} = I exactly in integer arithmetic.
        let prod = mat_mul_checked(m.entries(), inv.entries()).unwrap();
        assert_eq!(prod, [[1, 0], [0, 1]]);
    }

    #[test]
    fn non_unimodular_and_elliptic_matrices_rejected() {
        assert!(matches!(
            ToralAutomorphism::new([[2, 0], [0, 2]]),
            Err(MapError::NotUnimodular { det: 4 })
        ));
        // Rotation-like: det 1, |trace| < 2.
        assert!(matches!(
            ToralAutomorphism::new([[0, -1], [1, 0]]),
            Err(MapError::NotHyperbolic { .. })
        ));
    }

    #[test]
    fn cat_periodic_point_counts() {
        let m = ToralAutomorphism::cat();
        let p1 = m.periodic_points(1).unwrap();
        assert_eq!(p1.len(), 1);
        assert_eq!(p1[0].num, (0, 0));
        assert_eq!(p1[0].least_period, 1);

        let p2 = m.periodic_points(2).unwrap();
        assert_eq!(p2.len(), 5);
        assert_eq!(
            p2.iter().filter(|pt| pt.least_period == 2).count(),
            4,
            "only the origin has period 1"
        );

        let p3 = m.periodic_points(3).unwrap();
        assert_eq!(p3.len(), 16);
        assert_eq!(p3.iter().filter(|pt| pt.least_period == 3).count(), 15);
        // Every point really is fixed by M^3 (float cross-check).
        for pt in &p3 {
            let mut y = pt.point;
            for _ in 0..3 {
                y = m.step(y);
            }
            let d = crate::geometry::torus_distance(y, pt.point);
            assert!(d < 1e-9, "{pt:?} moved by {d}");
        }
    }

    #[test]
    fn contraction_exponent_of_diagonal_matrix() {
        let cert = contraction_exponent(Mat2::diag(4.0, 0.25), 5_000, 3).unwrap();
        assert_eq!(cert.q, 2);
        assert!(cert.max_ratio <= 0.25);
    }

    #[test]
    fn contraction_exponent_of_cat_matrix() {
        let cert = contraction_exponent(ToralAutomorphism::cat().matrix(), 20_000, 3).unwrap();
        assert!(cert.q <= 4, "q = {}", cert.q);
        assert!(cert.max_ratio <= 0.25);
        // Fresh-sample re-verification.
        let ratio = verify_contraction(ToralAutomorphism::cat().matrix(), cert.q, 20_000, 99).unwrap();
        assert!(ratio <= 0.25);
    }

    #[test]
    fn weak_hyperbolicity_fails_the_search() {
        let res = contraction_exponent(Mat2::diag(1.01, 1.0 / 1.01), 500, 3);
        assert!(matches!(res, Err(MapError::ContractionSearchFailed { .. })));
    }

    #[test]
    fn known_itinerary_pattern() {
        let a = Mat2::new(-0.2, 1.8, 0.6, -0.4);
        let pattern = ball_itinerary(a, Vec2::new(0.5, 0.7), 3);
        assert_eq!(pattern, vec![true, false, true, false]);
        assert_eq!(ball_itinerary(a, Vec2::ZERO, 2), vec![true; 3]);
        assert!(!ball_itinerary(a, Vec2::new(3.0, 0.0), 0)[0]);
    }

    #[test]
    fn doubling_orbit_of_three_tenths() {
        let mut x = 0.3;
        let want = [0.6, 0.2, 0.4, 0.8, 0.6];
        for w in want {
            x = doubling_step(x);
            assert!((x - w).abs() < 1e-12, "{x} vs {w}");
        }
        // First entry of the orbit of 0.3 into [0, 1/4) is at n = 2.
        let mut x = 0.3;
        let mut first = None;
        for n in 1..=5 {
            x = doubling_step(x);
            if x < 0.25 && first.is_none() {
                first = Some(n);
            }
        }
        assert_eq!(first, Some(2));
    }

    #[test]
    fn doubling_one_third_is_period_two() {
        let x = 1.0 / 3.0;
        let y = doubling_step(x);
        assert!((y - 2.0 / 3.0).abs() < 1e-12);
        assert!((doubling_step(y) - x).abs() < 1e-12);
    }

    #[test]
    fn bit_shift_orbit_digits_are_uncorrelated() {
        // The indicator of [0, 1/2) along the orbit is exactly the fresh bit
        // stream, so lagged sample correlations sit within 3/sqrt(n).
        let mut orbit = BitShiftOrbit::new(stream(21, &[7]));
        let n = 40_000;
        let bits: Vec<f64> = (0..n).map(|_| if orbit.step() < 0.5 { 1.0 } else { 0.0 }).collect();
        let mean = bits.iter().sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 3.0 / (n as f64).sqrt());
        for lag in 1..=10 {
            let m = n - lag;
            let corr = (0..m)
                .map(|i| (bits[i] - mean) * (bits[i + lag] - mean))
                .sum::<f64>()
                / m as f64
                / 0.25; // Bernoulli(1/2) variance
            assert!(corr.abs() < 3.0 / (m as f64).sqrt(), "lag {lag}: {corr}");
        }
    }
}

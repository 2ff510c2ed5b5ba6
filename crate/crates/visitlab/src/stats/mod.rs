//! Statistical verification battery for the extracted point processes:
//! exponential inter-arrivals, dispersion, mean/void rectangle checks,
//! spatial goodness of fit, short-return diagnostics, compound-Poisson
//! cluster comparisons, and the exact independent-shift avoidance oracle.
//!
//! Every test returns a [`TestReport`] carrying the statistic, the headline
//! p-value (Bonferroni-adjusted where a report aggregates sub-tests), and the
//! verdict at the configured significance level.

pub mod special;

use crate::billiard;
use crate::geometry::Table;
use crate::maps::ToralAutomorphism;
use crate::process::{ClusterRealization, ClusterSizeModel, IidShift, MarkedPoint, Realization};
use crate::targets::{CornerBarrier, IntensityModel, TorusTarget};
use crate::Vec2;
use rand::Rng;
use serde::{Deserialize, Serialize};
use special::{chi2_cdf, chi2_sf, kolmogorov_sf, normal_cdf, wilson_interval, Z_95};
use thiserror::Error;

/// Per-test significance; reports aggregating several sub-tests apply a
/// Bonferroni correction internally so the headline verdict stays at this
/// level family-wise.
pub const DEFAULT_ALPHA: f64 = 0.01;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("test needs at least {needed} events, got {got}")]
    TooFewEvents { needed: usize, got: usize },
    #[error("degenerate data: {0}")]
    DegenerateData(&'static str),
    #[error("rectangle carries no intensity mass")]
    EmptyRectangle,
    #[error("avoidance windows overlap")]
    OverlappingWindows,
    #[error("conditioned sampler starved after {attempts} attempts")]
    Starved { attempts: usize },
}

/// Outcome of one hypothesis test.
#[derive(Debug, Clone, Serialize)]
pub struct TestReport {
    pub name: String,
    pub statistic: f64,
    /// Headline p-value; already Bonferroni-adjusted when the report pools
    /// sub-tests.
    pub p_value: f64,
    pub n: u64,
    pub alpha: f64,
    pub pass: bool,
    /// Named sub-test p-values or diagnostics.
    pub components: Vec<(String, f64)>,
    pub details: String,
}

impl TestReport {
    fn from_p(name: &str, statistic: f64, p_value: f64, n: u64, alpha: f64) -> Self {
        TestReport {
            name: name.to_string(),
            statistic,
            p_value,
            n,
            alpha,
            pass: p_value > alpha,
            components: Vec::new(),
            details: String::new(),
        }
    }

    /// One-line rendering for the summary table.
    pub fn summary_line(&self) -> String {
        format!(
            "{:<38} stat {:>10.4}  p {:>9.3e}  n {:>8}  {}",
            self.name,
            self.statistic,
            self.p_value,
            self.n,
            if self.pass { "pass" } else { "FAIL" }
        )
    }
}

/// Space-time rectangle: a time interval crossed with an axis box of marks.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Rectangle {
    pub t: (f64, f64),
    pub lo: (f64, f64),
    pub hi: (f64, f64),
}

impl Rectangle {
    /// Membership with `(t1, t2]` times and `[lo, hi)` marks, so adjacent
    /// rectangles tile without double counting.
    pub fn contains(&self, p: &MarkedPoint) -> bool {
        p.t > self.t.0
            && p.t <= self.t.1
            && p.mark.0 >= self.lo.0
            && p.mark.0 < self.hi.0
            && p.mark.1 >= self.lo.1
            && p.mark.1 < self.hi.1
    }

    pub fn count(&self, r: &Realization) -> u64 {
        r.points.iter().filter(|p| self.contains(p)).count() as u64
    }
}

// ---------------------------------------------------------------------------
// Kolmogorov-Smirnov
// ---------------------------------------------------------------------------

/// Two-sided Kolmogorov-Smirnov statistic of pre-sorted data against `cdf`.
pub fn ks_statistic(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max(((i + 1) as f64 / n - f).abs());
        d = d.max((f - i as f64 / n).abs());
    }
    d
}

/// One-sample KS test with the finite-sample-corrected asymptotic p-value.
pub fn ks_test(
    name: &str,
    data: &[f64],
    cdf: impl Fn(f64) -> f64,
    alpha: f64,
) -> Result<TestReport, StatsError> {
    if data.is_empty() {
        return Err(StatsError::DegenerateData("empty sample"));
    }
    let mut sorted = data.to_vec();
    sorted.sort_by(f64::total_cmp);
    let d = ks_statistic(&sorted, cdf);
    let n = sorted.len() as f64;
    let lambda = d * (n.sqrt() + 0.12 + 0.11 / n.sqrt());
    let p = kolmogorov_sf(lambda);
    Ok(TestReport::from_p(name, d, p, sorted.len() as u64, alpha))
}

/// Pooled inter-arrival gaps against the unit exponential law. The gap from
/// the window start to the first event counts; the censored tail after the
/// last event does not. Gaps never straddle realization boundaries.
pub fn interarrival_test(
    realizations: &[Realization],
    alpha: f64,
) -> Result<TestReport, StatsError> {
    let mut gaps = Vec::new();
    for r in realizations {
        let mut prev = 0.0;
        for p in &r.points {
            gaps.push(p.t - prev);
            prev = p.t;
        }
    }
    if gaps.len() < 500 {
        return Err(StatsError::TooFewEvents {
            needed: 500,
            got: gaps.len(),
        });
    }
    let mut report = ks_test("interarrival vs Exp(1)", &gaps, |t| 1.0 - (-t).exp(), alpha)?;
    report.details = format!("{} gaps pooled from {} realizations", gaps.len(), realizations.len());
    Ok(report)
}

/// Gap test for processes with a structural dead time: after each visit the
/// next `exclusion_steps` steps cannot produce one, so raw gaps start at
/// `(exclusion_steps + 1) * mu_a`. Under the limit law the shifted, rescaled
/// gaps `(g - t0) / (1 - t0)` with `t0 = (exclusion_steps + 0.5) * mu_a` are
/// unit exponential, and the transform converges to the identity as the
/// target shrinks. The window-start gap has different structure (forward
/// recurrence over a dead time) and is dropped.
pub fn pruned_interarrival_test(
    realizations: &[Realization],
    exclusion_steps: u64,
    alpha: f64,
) -> Result<TestReport, StatsError> {
    let mut gaps = Vec::new();
    for r in realizations {
        let t0 = (exclusion_steps as f64 + 0.5) * r.mu_a;
        if t0 >= 0.5 {
            return Err(StatsError::DegenerateData(
                "dead time dominates the mean gap",
            ));
        }
        for pair in r.points.windows(2) {
            gaps.push((pair[1].t - pair[0].t - t0) / (1.0 - t0));
        }
    }
    if gaps.len() < 500 {
        return Err(StatsError::TooFewEvents {
            needed: 500,
            got: gaps.len(),
        });
    }
    let mut report = ks_test(
        "interarrival beyond dead time",
        &gaps,
        |t| 1.0 - (-t).exp(),
        alpha,
    )?;
    report.details = format!(
        "{} interior gaps from {} realizations, dead time {} steps",
        gaps.len(),
        realizations.len(),
        exclusion_steps
    );
    Ok(report)
}

/// Variance-to-mean ratio of windowed counts with its chi-square null.
/// Overdispersion (index above one) is the clustering signature.
pub fn dispersion_test(
    realizations: &[Realization],
    bin_width: f64,
    alpha: f64,
) -> Result<TestReport, StatsError> {
    assert!(bin_width > 0.0);
    let mut counts: Vec<u64> = Vec::new();
    for r in realizations {
        let nb = (r.window / bin_width).floor() as usize;
        for k in 0..nb {
            counts.push(r.count_in(k as f64 * bin_width, (k + 1) as f64 * bin_width) as u64);
        }
    }
    if counts.len() < 50 {
        return Err(StatsError::TooFewEvents {
            needed: 50,
            got: counts.len(),
        });
    }
    let n = counts.len() as f64;
    let mean = counts.iter().sum::<u64>() as f64 / n;
    if mean == 0.0 {
        return Err(StatsError::DegenerateData("all bins empty"));
    }
    let var = counts
        .iter()
        .map(|&c| {
            let d = c as f64 - mean;
            d * d
        })
        .sum::<f64>()
        / (n - 1.0);
    let index = var / mean;
    let statistic = (n - 1.0) * index;
    let df = n - 1.0;
    let upper = chi2_sf(statistic, df);
    let lower = chi2_cdf(statistic, df);
    let p = (2.0 * upper.min(lower)).min(1.0);
    let mut report = TestReport::from_p("dispersion index", index, p, counts.len() as u64, alpha);
    report.components.push(("overdispersion_p".into(), upper));
    report.details = format!("{} bins of width {bin_width}, mean count {mean:.3}", counts.len());
    Ok(report)
}

// ---------------------------------------------------------------------------
// Rectangle mean / void checks
// ---------------------------------------------------------------------------

/// Mean-count and void-probability checks on a family of space-time
/// rectangles, treating each realization as one independent draw of the
/// process. Sub-test p-values are Bonferroni-pooled; correlations between
/// counts on time-disjoint rectangles are reported as a diagnostic.
pub fn kallenberg_check(
    realizations: &[Realization],
    rectangles: &[Rectangle],
    intensity: &IntensityModel,
    alpha: f64,
) -> Result<TestReport, StatsError> {
    let m = realizations.len();
    if m < 100 {
        return Err(StatsError::TooFewEvents {
            needed: 100,
            got: m,
        });
    }
    if rectangles.is_empty() {
        return Err(StatsError::DegenerateData("no rectangles"));
    }
    let mf = m as f64;
    let mut components = Vec::new();
    let mut min_p = 1.0f64;
    let mut all_counts: Vec<Vec<u64>> = Vec::new();
    for (i, rect) in rectangles.iter().enumerate() {
        let mass = intensity.mark_mass(rect.lo, rect.hi);
        let eta = (rect.t.1 - rect.t.0) * mass;
        if !(eta > 0.0) {
            return Err(StatsError::EmptyRectangle);
        }
        let counts: Vec<u64> = realizations.iter().map(|r| rect.count(r)).collect();
        let mean = counts.iter().sum::<u64>() as f64 / mf;
        let sd = (counts
            .iter()
            .map(|&c| {
                let d = c as f64 - mean;
                d * d
            })
            .sum::<f64>()
            / (mf - 1.0))
            .sqrt();
        let p_mean = if sd == 0.0 {
            if (mean - eta).abs() < 1e-12 {
                1.0
            } else {
                0.0
            }
        } else {
            let z = (mean - eta) / (sd / mf.sqrt());
            2.0 * normal_cdf(-z.abs())
        };
        let voids = counts.iter().filter(|&&c| c == 0).count() as f64 / mf;
        let p0 = (-eta).exp();
        let se = (p0 * (1.0 - p0) / mf).sqrt();
        let z_v = (voids - p0) / se;
        let p_void = 2.0 * normal_cdf(-z_v.abs());
        components.push((format!("R{i} mean (eta {eta:.3})"), p_mean));
        components.push((format!("R{i} void"), p_void));
        min_p = min_p.min(p_mean).min(p_void);
        all_counts.push(counts);
    }
    // Independence diagnostic: max |correlation| over time-disjoint pairs.
    let mut max_corr = 0.0f64;
    for i in 0..rectangles.len() {
        for j in i + 1..rectangles.len() {
            let (a, b) = (&rectangles[i], &rectangles[j]);
            let disjoint = a.t.1 <= b.t.0 || b.t.1 <= a.t.0;
            if !disjoint {
                continue;
            }
            if let Some(c) = pearson(&all_counts[i], &all_counts[j]) {
                max_corr = max_corr.max(c.abs());
            }
        }
    }
    components.push(("max_disjoint_corr".into(), max_corr));

    let n_tests = (2 * rectangles.len()) as f64;
    let adjusted = (min_p * n_tests).min(1.0);
    let mut report = TestReport::from_p(
        "rectangle mean/void",
        min_p,
        adjusted,
        m as u64,
        alpha,
    );
    report.components = components;
    report.details = format!(
        "{} rectangles, Bonferroni over {} sub-tests",
        rectangles.len(),
        n_tests
    );
    Ok(report)
}

fn pearson(x: &[u64], y: &[u64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<u64>() as f64 / n;
    let my = y.iter().sum::<u64>() as f64 / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        let dx = a as f64 - mx;
        let dy = b as f64 - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Time-disjoint rectangles with unit-free mass around 2 per rectangle,
/// cycling through mark boxes (full support, four halves, a centered box) so
/// both margins of the intensity get exercised. Emits as many as fit in the
/// window, up to `count`.
pub fn auto_rectangles(
    intensity: &IntensityModel,
    window: f64,
    count: usize,
) -> Vec<Rectangle> {
    let ((x0, y0), (x1, y1)) = intensity.support();
    let (mx, my) = ((x0 + x1) / 2.0, (y0 + y1) / 2.0);
    let (qx, qy) = ((x1 - x0) / 4.0, (y1 - y0) / 4.0);
    let boxes = [
        ((x0, y0), (x1, y1)),
        ((x0, y0), (mx, y1)),
        ((mx, y0), (x1, y1)),
        ((x0, y0), (x1, my)),
        ((x0, my), (x1, y1)),
        ((x0 + qx, y0 + qy), (x1 - qx, y1 - qy)),
    ];
    let target_eta = 2.0;
    let mut out = Vec::new();
    let mut t = 0.0;
    for k in 0..count {
        let (lo, hi) = boxes[k % boxes.len()];
        let mass = intensity.mark_mass(lo, hi);
        if !(mass > 0.0) {
            continue;
        }
        let len = target_eta / mass;
        if t + len > window {
            break;
        }
        out.push(Rectangle {
            t: (t, t + len),
            lo,
            hi,
        });
        t += len;
    }
    out
}

// ---------------------------------------------------------------------------
// Spatial goodness of fit
// ---------------------------------------------------------------------------

/// Chi-square test of marks against an intensity model on a regular grid.
/// Starved cells (expectation below 5) are merged smallest-first so the
/// chi-square approximation stays honest.
pub fn spatial_gof(
    marks: &[(f64, f64)],
    intensity: &IntensityModel,
    grid: (usize, usize),
    alpha: f64,
) -> Result<TestReport, StatsError> {
    if marks.len() < 1000 {
        return Err(StatsError::TooFewEvents {
            needed: 1000,
            got: marks.len(),
        });
    }
    let (gx, gy) = grid;
    assert!(gx >= 2 && gy >= 2, "grid too coarse");
    let ((x0, y0), (x1, y1)) = intensity.support();
    let (dx, dy) = ((x1 - x0) / gx as f64, (y1 - y0) / gy as f64);
    let n = marks.len() as f64;

    let mut observed = vec![0u64; gx * gy];
    for &(x, y) in marks {
        let ix = (((x - x0) / dx) as usize).min(gx - 1);
        let iy = (((y - y0) / dy) as usize).min(gy - 1);
        observed[iy * gx + ix] += 1;
    }
    let mut cells: Vec<(f64, f64)> = Vec::with_capacity(gx * gy); // (expected, observed)
    for iy in 0..gy {
        for ix in 0..gx {
            let lo = (x0 + ix as f64 * dx, y0 + iy as f64 * dy);
            let hi = (lo.0 + dx, lo.1 + dy);
            let e = n * intensity.mark_mass(lo, hi);
            cells.push((e, observed[iy * gx + ix] as f64));
        }
    }
    // Merge starved cells smallest-expected-first, accumulating pairs until
    // every bin clears the threshold.
    cells.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let mut acc = (0.0, 0.0);
    for (e, o) in cells {
        acc.0 += e;
        acc.1 += o;
        if acc.0 >= 5.0 {
            bins.push(acc);
            acc = (0.0, 0.0);
        }
    }
    if acc.0 > 0.0 {
        match bins.last_mut() {
            Some(last) => {
                last.0 += acc.0;
                last.1 += acc.1;
            }
            None => return Err(StatsError::DegenerateData("no viable bins")),
        }
    }
    if bins.len() < 2 {
        return Err(StatsError::DegenerateData("all mass in one bin"));
    }
    let chi2: f64 = bins.iter().map(|(e, o)| (o - e) * (o - e) / e).sum();
    let df = (bins.len() - 1) as f64;
    let p = chi2_sf(chi2, df);
    let mut report = TestReport::from_p("spatial distribution", chi2, p, marks.len() as u64, alpha);
    report.details = format!("{}x{} grid merged to {} bins (df {df})", gx, gy, bins.len());
    Ok(report)
}

// ---------------------------------------------------------------------------
// Short returns and annuli
// ---------------------------------------------------------------------------

/// Fraction of target-conditioned starts that re-enter the target within
/// `p_steps` iterations, with a 95% Wilson interval.
pub fn short_return_torus<R: Rng>(
    map: &ToralAutomorphism,
    target: &TorusTarget,
    p_steps: u32,
    budget: usize,
    rng: &mut R,
) -> Result<(f64, (f64, f64)), StatsError> {
    let center = target.center();
    let eps = target.eps();
    let cap = budget.saturating_mul(200);
    let mut attempts = 0usize;
    let mut returned = 0u64;
    for _ in 0..budget {
        // Rejection sampling of the conditioned law from the bounding ball.
        let x = loop {
            if attempts >= cap {
                return Err(StatsError::Starved { attempts });
            }
            attempts += 1;
            let x = Vec2::new(
                (center.x + (rng.gen::<f64>() * 2.0 - 1.0) * eps).rem_euclid(1.0),
                (center.y + (rng.gen::<f64>() * 2.0 - 1.0) * eps).rem_euclid(1.0),
            );
            if target.contains(map, x) {
                break x;
            }
        };
        let mut y = x;
        for _ in 0..p_steps {
            y = map.step(y);
            if target.contains(map, y) {
                returned += 1;
                break;
            }
        }
    }
    let est = returned as f64 / budget as f64;
    Ok((est, wilson_interval(returned, budget as u64, Z_95)))
}

/// Same diagnostic for barrier crossings: conditioned on a crossing flight,
/// the probability of another crossing within `p_steps` collisions.
pub fn short_return_barrier<R: Rng>(
    table: &Table,
    barrier: &CornerBarrier,
    p_steps: u32,
    budget: usize,
    rng: &mut R,
) -> Result<(f64, (f64, f64)), StatsError> {
    let cap = budget.saturating_mul(2_000);
    let mut attempts = 0usize;
    let mut returned = 0u64;
    for _ in 0..budget {
        // Find a crossing flight by sampling the invariant law.
        let state = loop {
            if attempts >= cap {
                return Err(StatsError::Starved { attempts });
            }
            attempts += 1;
            let start = billiard::sample_mu(table, rng);
            if let Ok(rec) = billiard::step(table, start) {
                if barrier.crossing(rec.from, rec.to).is_some() {
                    break rec.state;
                }
            }
        };
        let mut s = state;
        for _ in 0..p_steps {
            match billiard::step(table, s) {
                Ok(rec) => {
                    if barrier.crossing(rec.from, rec.to).is_some() {
                        returned += 1;
                        break;
                    }
                    s = rec.state;
                }
                Err(_) => break,
            }
        }
    }
    let est = returned as f64 / budget as f64;
    Ok((est, wilson_interval(returned, budget as u64, Z_95)))
}

/// Independent-shift model: returns within `p_steps` of a visit happen with
/// probability `1 - (1 - mu)^p` exactly; the Monte Carlo mirrors that.
pub fn short_return_iid<R: Rng>(
    mu: f64,
    p_steps: u32,
    budget: usize,
    rng: &mut R,
) -> (f64, (f64, f64)) {
    assert!(mu > 0.0 && mu < 1.0);
    let mut shift = IidShift::new(rng);
    let mut returned = 0u64;
    for _ in 0..budget {
        for _ in 0..p_steps {
            if shift.step() < mu {
                returned += 1;
                break;
            }
        }
    }
    let est = returned as f64 / budget as f64;
    (est, wilson_interval(returned, budget as u64, Z_95))
}

/// Exact mass fraction of the outer shell `{eps - eps^delta < |x| <= eps}`
/// of a planar sup-norm ball.
pub fn annulus_ratio_exact(eps: f64, delta: f64) -> f64 {
    assert!(delta > 1.0, "shell exponent must exceed 1");
    assert!(eps > 0.0 && eps < 1.0);
    let inner = 1.0 - eps.powf(delta - 1.0);
    1.0 - inner.max(0.0).powi(2)
}

/// Monte Carlo shell fraction with a 95% Wilson interval.
pub fn annulus_ratio_mc<R: Rng>(
    eps: f64,
    delta: f64,
    budget: usize,
    rng: &mut R,
) -> (f64, (f64, f64)) {
    assert!(delta > 1.0);
    let inner = eps - eps.powf(delta);
    let mut hits = 0u64;
    for _ in 0..budget {
        let x = (rng.gen::<f64>() * 2.0 - 1.0) * eps;
        let y = (rng.gen::<f64>() * 2.0 - 1.0) * eps;
        if x.abs().max(y.abs()) > inner {
            hits += 1;
        }
    }
    let est = hits as f64 / budget as f64;
    (est, wilson_interval(hits, budget as u64, Z_95))
}

// ---------------------------------------------------------------------------
// Rank test
// ---------------------------------------------------------------------------

/// Two-sample Mann-Whitney U with tie-corrected normal approximation (no
/// continuity correction). Returns `(U, two-sided p)` where `U` counts pairs
/// won by the first sample (ties half).
pub fn mann_whitney_u(x: &[f64], y: &[f64]) -> Result<(f64, f64), StatsError> {
    let (n1, n2) = (x.len(), y.len());
    if n1 < 2 || n2 < 2 {
        return Err(StatsError::DegenerateData("samples too small"));
    }
    let mut all: Vec<(f64, usize)> = x
        .iter()
        .map(|&v| (v, 0))
        .chain(y.iter().map(|&v| (v, 1)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = all.len();
    let mut rank_sum_x = 0.0;
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && all[j].0 == all[i].0 {
            j += 1;
        }
        let t = (j - i) as f64;
        // Average rank for the tied run [i, j).
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        for item in &all[i..j] {
            if item.1 == 0 {
                rank_sum_x += avg_rank;
            }
        }
        tie_term += t * t * t - t;
        i = j;
    }
    let (n1f, n2f, nf) = (n1 as f64, n2 as f64, n as f64);
    let u = rank_sum_x - n1f * (n1f + 1.0) / 2.0;
    let var = n1f * n2f / 12.0 * ((nf + 1.0) - tie_term / (nf * (nf - 1.0)));
    if var <= 0.0 {
        return Err(StatsError::DegenerateData("all observations tied"));
    }
    let z = (u - n1f * n2f / 2.0) / var.sqrt();
    Ok((u, 2.0 * normal_cdf(-z.abs())))
}

// ---------------------------------------------------------------------------
// Compound-Poisson cluster tests
// ---------------------------------------------------------------------------

fn poisson_draw<R: Rng>(lambda: f64, rng: &mut R) -> u64 {
    // Product method; fine for the small rates used here.
    let limit = (-lambda).exp();
    let mut k = 0u64;
    let mut prod = 1.0;
    loop {
        prod *= rng.gen::<f64>();
        if prod <= limit {
            return k;
        }
        k += 1;
    }
}

/// Two-part comparison of the extracted cluster structure against the
/// backward-linearization model: (1) chi-square of cluster sizes against the
/// model law; (2) rank test of windowed ball-visit counts against a
/// synthetic compound Poisson process driven by the model sizes.
pub fn compound_poisson_test<R: Rng>(
    data: &[ClusterRealization],
    model: &ClusterSizeModel,
    window_width: f64,
    alpha: f64,
    rng: &mut R,
) -> Result<[TestReport; 2], StatsError> {
    let sizes: Vec<usize> = data
        .iter()
        .flat_map(|cr| cr.clusters.iter().map(|c| c.size()))
        .collect();
    if sizes.len() < 300 {
        return Err(StatsError::TooFewEvents {
            needed: 300,
            got: sizes.len(),
        });
    }

    // Part 1: size histogram vs the model probability mass function.
    let k_max = model
        .pmf
        .len()
        .max(sizes.iter().copied().max().unwrap_or(1));
    let nf = sizes.len() as f64;
    let mut expected: Vec<f64> = (0..k_max)
        .map(|k| nf * model.pmf.get(k).copied().unwrap_or(0.0))
        .collect();
    let mut observed = vec![0.0f64; k_max];
    for &s in &sizes {
        observed[s - 1] += 1.0;
    }
    // Merge the sparse tail downward until every bin clears the threshold.
    while expected.len() > 1 {
        let last = expected.len() - 1;
        if expected[last] < 5.0 {
            expected[last - 1] += expected[last];
            observed[last - 1] += observed[last];
            expected.pop();
            observed.pop();
        } else {
            break;
        }
    }
    let size_report = if expected.len() < 2 {
        // Degenerate: one size dominates both data and model — a perfect fit.
        let mut r = TestReport::from_p("cluster sizes vs model", 0.0, 1.0, sizes.len() as u64, alpha);
        r.details = "single viable size bin".into();
        r
    } else {
        let chi2: f64 = expected
            .iter()
            .zip(&observed)
            .map(|(e, o)| if *e > 0.0 { (o - e) * (o - e) / e } else { 0.0 })
            .sum();
        let df = (expected.len() - 1) as f64;
        let mut r = TestReport::from_p(
            "cluster sizes vs model",
            chi2,
            chi2_sf(chi2, df),
            sizes.len() as u64,
            alpha,
        );
        r.details = format!("{} size bins (df {df})", expected.len());
        r
    };

    // Part 2: windowed ball-visit counts vs a synthetic compound Poisson
    // with anchor rate 1/mean-size (so both sides have unit visit rate).
    let mut empirical: Vec<f64> = Vec::new();
    for cr in data {
        let nb = (cr.ball.window / window_width).floor() as usize;
        for k in 0..nb {
            empirical.push(cr.ball.count_in(
                k as f64 * window_width,
                (k + 1) as f64 * window_width,
            ) as f64);
        }
    }
    if empirical.len() < 50 {
        return Err(StatsError::TooFewEvents {
            needed: 50,
            got: empirical.len(),
        });
    }
    let anchor_rate = 1.0 / model.mean;
    let synthetic: Vec<f64> = (0..empirical.len())
        .map(|_| {
            let anchors = poisson_draw(anchor_rate * window_width, rng);
            (0..anchors).map(|_| model.sample(rng) as u64).sum::<u64>() as f64
        })
        .collect();
    let (u, p) = mann_whitney_u(&empirical, &synthetic)?;
    let mut count_report = TestReport::from_p(
        "windowed counts vs compound model",
        u,
        p,
        empirical.len() as u64,
        alpha,
    );
    count_report.details = format!(
        "{} windows of width {window_width}, anchor rate {anchor_rate:.4}",
        empirical.len()
    );
    Ok([size_report, count_report])
}

// ---------------------------------------------------------------------------
// Independent-shift avoidance oracle
// ---------------------------------------------------------------------------

/// One avoidance window: no visit to a set of measure `mu` may occur at
/// steps `p+1 ..= p+q`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AvoidanceWindow {
    pub p: u64,
    pub q: u64,
    pub mu: f64,
}

/// Joint avoidance probability under the independent-shift model against the
/// exact product `prod (1 - mu_i)^{q_i}`. Independence across steps makes
/// the product exact, so the Monte Carlo must agree within binomial noise.
pub fn iid_oracle_check<R: Rng>(
    windows: &[AvoidanceWindow],
    budget: usize,
    alpha: f64,
    rng: &mut R,
) -> Result<TestReport, StatsError> {
    if windows.is_empty() {
        return Err(StatsError::DegenerateData("no windows"));
    }
    let mut sorted = windows.to_vec();
    sorted.sort_by_key(|w| w.p);
    for w in &sorted {
        assert!(w.mu > 0.0 && w.mu < 1.0 && w.q >= 1);
    }
    for pair in sorted.windows(2) {
        if pair[0].p + pair[0].q > pair[1].p {
            return Err(StatsError::OverlappingWindows);
        }
    }
    let product: f64 = sorted
        .iter()
        .map(|w| (1.0 - w.mu).powi(w.q as i32))
        .product();
    let max_step = sorted.last().map(|w| w.p + w.q).unwrap();
    let mut shift = IidShift::new(rng);
    let mut avoided = 0u64;
    for _ in 0..budget {
        let mut ok = true;
        'steps: for s in 1..=max_step {
            let u = shift.step();
            for w in &sorted {
                if s > w.p && s <= w.p + w.q && u < w.mu {
                    ok = false;
                    break 'steps;
                }
            }
        }
        if ok {
            avoided += 1;
        }
    }
    let est = avoided as f64 / budget as f64;
    let se = (product * (1.0 - product) / budget as f64).sqrt();
    let z = (est - product) / se;
    let p = 2.0 * normal_cdf(-z.abs());
    let mut report = TestReport::from_p("avoidance vs exact product", z, p, budget as u64, alpha);
    report
        .components
        .push(("estimate".into(), est));
    report.components.push(("product".into(), product));
    report.details = format!("{} windows, product {product:.8}, estimate {est:.8}", sorted.len());
    Ok(report)
}

//! Simulation and statistical verification of Poisson limit laws for visits
//! of chaotic dynamical systems to small sets.
//!
//! The library builds planar and toroidal billiard tables (Bunimovich stadium,
//! two-scatterer Sinai table, dispersing "diamond" table) and hyperbolic toral
//! maps, extracts spatio-temporal point processes of visits to shrinking
//! targets — time rescaled by the target measure, position rescaled into a
//! fixed mark space — and tests the rescaled processes against their limiting
//! Poisson or compound-Poisson laws.
//!
//! Module map:
//!
//! * [`geometry`] — tables: boundary pieces, arc-length parametrization, ray
//!   tracing, perimeter/area bookkeeping.
//! * [`billiard`] — the billiard map on reflected vectors `(r, phi)`, its
//!   invariant measure, and flight-time (Birkhoff) accumulation.
//! * [`maps`] — hyperbolic toral automorphisms, the doubling map, periodic
//!   point enumeration, and the matrix contraction-exponent search.
//! * [`targets`] — shrinking target sets (phase balls, position strips, corner
//!   barriers, pruned balls at periodic points) with membership, mark
//!   normalization, and measure (analytic where exact, Monte Carlo otherwise).
//! * [`process`] — marked point-process extraction from orbits, cluster
//!   grouping at periodic points, the backward-linearization cluster model,
//!   time rescalings, and CSV/JSON round-tripping.
//! * [`stats`] — the hypothesis-test battery: exponential inter-arrivals,
//!   dispersion, Kallenberg mean/void checks, spatial goodness of fit, short
//!   returns, compound-Poisson comparisons, and the exact i.i.d. oracle.
//! * [`cluster`] — orchestration of the periodic-point experiments: pruning
//!   depth selection, separation validation, and the full test bundle.
//! * [`config`] — serializable experiment descriptions shared with the CLI.

pub mod billiard;
pub mod cluster;
pub mod config;
pub mod geometry;
pub mod maps;
pub mod process;
pub mod rng;
pub mod stats;
pub mod targets;
mod vec2;

pub use vec2::Vec2;

//! Experiment configuration: one human-editable TOML file describing the
//! system, the target family, the radius ladder, and the run budgets.
//! Parsing materializes every default into the returned value, so writing
//! the resolved config back out yields self-describing metadata.

use crate::geometry::{
    build_diamond, build_sinai, build_stadium, default_scatterers, DiamondSpec, GeometryError,
    Table,
};
use crate::maps::{contraction_exponent, MapError, Mat2, ToralAutomorphism};
use crate::targets::{BilliardTarget, CornerBarrier, PrunedBall, TargetError, TorusTarget};
use crate::billiard::PhasePoint;
use crate::Vec2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    /// Schema violations surface here with serde's field/variant naming.
    #[error("config parse: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("field `{field}`: {why}")]
    Invalid { field: &'static str, why: String },
    #[error("target `{target}` requires a {needs} system, got `{got}`")]
    Mismatch {
        target: &'static str,
        needs: &'static str,
        got: &'static str,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Target(#[from] TargetError),
}

/// Which dynamical system to run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemSpec {
    Stadium {
        #[serde(default = "default_flat_length")]
        flat_length: f64,
    },
    Sinai {
        /// Empty means the stock two-disc finite-horizon table.
        #[serde(default)]
        scatterers: Vec<Disc>,
    },
    Diamond {
        #[serde(default = "default_diamond_radius")]
        radius: f64,
        #[serde(default = "default_diamond_offset")]
        offset: f64,
    },
    Toral {
        #[serde(default = "default_toral_matrix")]
        matrix: [[i64; 2]; 2],
    },
    Doubling,
}

fn default_flat_length() -> f64 {
    2.0
}
fn default_diamond_radius() -> f64 {
    DiamondSpec::default().radius
}
fn default_diamond_offset() -> f64 {
    DiamondSpec::default().offset
}
fn default_toral_matrix() -> [[i64; 2]; 2] {
    [[2, 1], [1, 1]]
}

impl SystemSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            SystemSpec::Stadium { .. } => "stadium",
            SystemSpec::Sinai { .. } => "sinai",
            SystemSpec::Diamond { .. } => "diamond",
            SystemSpec::Toral { .. } => "toral",
            SystemSpec::Doubling => "doubling",
        }
    }

    fn is_billiard(&self) -> bool {
        matches!(
            self,
            SystemSpec::Stadium { .. } | SystemSpec::Sinai { .. } | SystemSpec::Diamond { .. }
        )
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Disc {
    pub center: [f64; 2],
    pub radius: f64,
}

/// Which family of shrinking targets to watch.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    /// Sup-metric ball in boundary coordinates around a billiard phase point.
    PhaseBall { center_r: f64, center_phi: f64 },
    /// All outgoing directions over a short boundary interval.
    PositionStrip { center_r: f64 },
    /// Sup-metric ball on the torus at a generic point.
    TorusBall { center: [f64; 2] },
    /// Ball at a periodic point minus its backward period-iterates.
    PrunedBall {
        center: [f64; 2],
        #[serde(default = "default_period")]
        period: u32,
        /// 0 derives the depth from the contraction certificate.
        #[serde(default)]
        q0: u32,
    },
    /// Vertical slit at the diamond's left corner, crossed in flight.
    CornerBarrier,
    /// Dyadic interval `[0, 2^-depth)` for the doubling map.
    Interval { depth: u32 },
}

fn default_period() -> u32 {
    1
}

impl TargetSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            TargetSpec::PhaseBall { .. } => "phase_ball",
            TargetSpec::PositionStrip { .. } => "position_strip",
            TargetSpec::TorusBall { .. } => "torus_ball",
            TargetSpec::PrunedBall { .. } => "pruned_ball",
            TargetSpec::CornerBarrier => "corner_barrier",
            TargetSpec::Interval { .. } => "interval",
        }
    }
}

/// Budgets and scales shared by every experiment family.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunParams {
    /// Radius ladder, conventionally decreasing.
    pub eps: Vec<f64>,
    /// Normalized time window per seed.
    pub horizon: f64,
    pub seeds: u32,
    pub master_seed: u64,
    /// Monte Carlo budget for measure estimates and validations.
    pub mc_budget: usize,
    /// Per-test significance level.
    pub alpha: f64,
    /// Separation-window coefficient for pruned targets.
    pub separation_a: f64,
}

impl Default for RunParams {
    fn default() -> Self {
        RunParams {
            eps: vec![0.2, 0.1, 0.05],
            horizon: 20.0,
            seeds: 100,
            master_seed: 1,
            mc_budget: 1_000_000,
            alpha: crate::stats::DEFAULT_ALPHA,
            separation_a: 0.1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemSpec,
    pub target: TargetSpec,
    #[serde(default)]
    pub run: RunParams,
}

impl ExperimentConfig {
    /// Parse and validate; the result has every default filled in.
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let r = &self.run;
        if r.eps.is_empty() {
            return Err(ConfigError::Invalid {
                field: "run.eps",
                why: "radius ladder is empty".into(),
            });
        }
        for &e in &r.eps {
            if !(e > 0.0 && e < 1.0) {
                return Err(ConfigError::Invalid {
                    field: "run.eps",
                    why: format!("radius {e} outside (0, 1)"),
                });
            }
        }
        if !(r.horizon > 0.0 && r.horizon.is_finite()) {
            return Err(ConfigError::Invalid {
                field: "run.horizon",
                why: format!("{} is not a positive finite window", r.horizon),
            });
        }
        if r.seeds == 0 {
            return Err(ConfigError::Invalid {
                field: "run.seeds",
                why: "at least one seed is required".into(),
            });
        }
        if r.mc_budget < 10_000 {
            return Err(ConfigError::Invalid {
                field: "run.mc_budget",
                why: format!("{} below the 10000 floor", r.mc_budget),
            });
        }
        if !(r.alpha > 0.0 && r.alpha < 1.0) {
            return Err(ConfigError::Invalid {
                field: "run.alpha",
                why: format!("{} outside (0, 1)", r.alpha),
            });
        }
        if !(r.separation_a >= 0.0) {
            return Err(ConfigError::Invalid {
                field: "run.separation_a",
                why: format!("{} is negative", r.separation_a),
            });
        }

        // Target/system cross-consistency.
        let got = self.system.kind_name();
        match &self.target {
            TargetSpec::PhaseBall { center_phi, .. } => {
                if !self.system.is_billiard() {
                    return Err(ConfigError::Mismatch {
                        target: "phase_ball",
                        needs: "billiard",
                        got,
                    });
                }
                if center_phi.abs() >= std::f64::consts::FRAC_PI_2 {
                    return Err(ConfigError::Invalid {
                        field: "target.center_phi",
                        why: format!("{center_phi} outside (-pi/2, pi/2)"),
                    });
                }
            }
            TargetSpec::PositionStrip { .. } => {
                if !self.system.is_billiard() {
                    return Err(ConfigError::Mismatch {
                        target: "position_strip",
                        needs: "billiard",
                        got,
                    });
                }
            }
            TargetSpec::CornerBarrier => {
                if !matches!(self.system, SystemSpec::Diamond { .. }) {
                    return Err(ConfigError::Mismatch {
                        target: "corner_barrier",
                        needs: "diamond",
                        got,
                    });
                }
            }
            TargetSpec::TorusBall { .. } => {
                if !matches!(self.system, SystemSpec::Toral { .. }) {
                    return Err(ConfigError::Mismatch {
                        target: "torus_ball",
                        needs: "toral",
                        got,
                    });
                }
            }
            TargetSpec::PrunedBall { period, .. } => {
                if !matches!(self.system, SystemSpec::Toral { .. }) {
                    return Err(ConfigError::Mismatch {
                        target: "pruned_ball",
                        needs: "toral",
                        got,
                    });
                }
                if *period == 0 {
                    return Err(ConfigError::Invalid {
                        field: "target.period",
                        why: "period must be at least 1".into(),
                    });
                }
            }
            TargetSpec::Interval { depth } => {
                if !matches!(self.system, SystemSpec::Doubling) {
                    return Err(ConfigError::Mismatch {
                        target: "interval",
                        needs: "doubling",
                        got,
                    });
                }
                if *depth == 0 || *depth > 30 {
                    return Err(ConfigError::Invalid {
                        field: "target.depth",
                        why: format!("depth {depth} outside 1..=30"),
                    });
                }
            }
        }
        Ok(())
    }

    /// Build the billiard table, if the system is one.
    pub fn build_table(&self) -> Result<Option<Table>, ConfigError> {
        match &self.system {
            SystemSpec::Stadium { flat_length } => Ok(Some(build_stadium(*flat_length)?)),
            SystemSpec::Sinai { scatterers } => {
                let discs: Vec<(Vec2, f64)> = if scatterers.is_empty() {
                    default_scatterers()
                } else {
                    scatterers
                        .iter()
                        .map(|d| (Vec2::new(d.center[0], d.center[1]), d.radius))
                        .collect()
                };
                Ok(Some(build_sinai(&discs)?))
            }
            SystemSpec::Diamond { radius, offset } => Ok(Some(build_diamond(DiamondSpec {
                radius: *radius,
                offset: *offset,
            })?)),
            SystemSpec::Toral { .. } | SystemSpec::Doubling => Ok(None),
        }
    }

    /// Build the toral map, if the system is one.
    pub fn build_map(&self) -> Result<Option<ToralAutomorphism>, ConfigError> {
        match &self.system {
            SystemSpec::Toral { matrix } => Ok(Some(ToralAutomorphism::new(*matrix)?)),
            _ => Ok(None),
        }
    }

    /// Billiard target at one radius (phase ball or strip).
    pub fn billiard_target(&self, eps: f64) -> Option<BilliardTarget> {
        match &self.target {
            TargetSpec::PhaseBall {
                center_r,
                center_phi,
            } => Some(BilliardTarget::PhaseBall {
                center: PhasePoint {
                    r: *center_r,
                    phi: *center_phi,
                },
                eps,
            }),
            TargetSpec::PositionStrip { center_r } => Some(BilliardTarget::PositionStrip {
                center_r: *center_r,
                eps,
            }),
            _ => None,
        }
    }

    /// Corner barrier at one radius (diamond only).
    pub fn barrier(&self, table: &Table, eps: f64) -> Result<Option<CornerBarrier>, ConfigError> {
        match self.target {
            TargetSpec::CornerBarrier => Ok(Some(CornerBarrier::new(table, 0, eps)?)),
            _ => Ok(None),
        }
    }

    /// Torus target at one radius; pruned depth 0 is resolved from the
    /// contraction certificate of the period power.
    pub fn torus_target(
        &self,
        map: &ToralAutomorphism,
        eps: f64,
    ) -> Result<Option<TorusTarget>, ConfigError> {
        match &self.target {
            TargetSpec::TorusBall { center } => Ok(Some(TorusTarget::Ball {
                center: Vec2::new(center[0], center[1]),
                eps,
            })),
            TargetSpec::PrunedBall { center, period, q0 } => {
                let q0 = if *q0 == 0 {
                    self.resolved_q0(map, *period)?
                } else {
                    *q0
                };
                let site = PrunedBall::new(
                    map,
                    Vec2::new(center[0], center[1]),
                    *period,
                    q0,
                    eps,
                )?;
                Ok(Some(TorusTarget::Pruned(site)))
            }
            _ => Ok(None),
        }
    }

    /// Pruning depth from the certified contraction exponent of the
    /// period-`p` matrix power.
    pub fn resolved_q0(&self, map: &ToralAutomorphism, period: u32) -> Result<u32, ConfigError> {
        let m = map.pow(period)?;
        let mat = Mat2::new(
            m[0][0] as f64,
            m[0][1] as f64,
            m[1][0] as f64,
            m[1][1] as f64,
        );
        let cert = contraction_exponent(mat, 256, 0x5153_3048)?;
        Ok(2 * cert.q)
    }

    /// Dyadic interval bounds for the doubling system.
    pub fn doubling_interval(&self) -> Option<(f64, f64)> {
        match self.target {
            TargetSpec::Interval { depth } => Some((0.0, 0.5f64.powi(depth as i32))),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_configs_parse_with_defaults_for_every_family() {
        let stadium = ExperimentConfig::from_toml(
            "[system]\nkind = \"stadium\"\n[target]\nkind = \"phase_ball\"\ncenter_r = 0.7\ncenter_phi = 0.3\n",
        )
        .unwrap();
        assert_eq!(stadium.run.eps, vec![0.2, 0.1, 0.05]);
        assert_eq!(stadium.run.seeds, 100);
        assert!(stadium.build_table().unwrap().is_some());
        assert!(stadium.build_map().unwrap().is_none());
        assert!(stadium.billiard_target(0.1).is_some());

        let sinai = ExperimentConfig::from_toml(
            "[system]\nkind = \"sinai\"\n[target]\nkind = \"position_strip\"\ncenter_r = 0.2\n",
        )
        .unwrap();
        let table = sinai.build_table().unwrap().unwrap();
        // Stock two-disc table: total perimeter 1.3 pi.
        assert!((table.perimeter() - 1.3 * std::f64::consts::PI).abs() < 1e-12);

        let diamond = ExperimentConfig::from_toml(
            "[system]\nkind = \"diamond\"\n[target]\nkind = \"corner_barrier\"\n",
        )
        .unwrap();
        let table = diamond.build_table().unwrap().unwrap();
        assert!(diamond.barrier(&table, 0.05).unwrap().is_some());

        let toral = ExperimentConfig::from_toml(
            "[system]\nkind = \"toral\"\n[target]\nkind = \"pruned_ball\"\ncenter = [0.0, 0.0]\n",
        )
        .unwrap();
        let map = toral.build_map().unwrap().unwrap();
        assert_eq!(map, ToralAutomorphism::cat());
        // Depth auto-resolves through the certificate.
        match toral.torus_target(&map, 0.05).unwrap().unwrap() {
            TorusTarget::Pruned(site) => assert_eq!(site.q0, 4),
            other => panic!("expected pruned target, got {other:?}"),
        }

        let doubling = ExperimentConfig::from_toml(
            "[system]\nkind = \"doubling\"\n[target]\nkind = \"interval\"\ndepth = 2\n",
        )
        .unwrap();
        assert_eq!(doubling.doubling_interval(), Some((0.0, 0.25)));
    }

    #[test]
    fn resolved_config_round_trips_and_records_defaults() {
        let cfg = ExperimentConfig::from_toml(
            "[system]\nkind = \"stadium\"\n[target]\nkind = \"position_strip\"\ncenter_r = 0.0\n",
        )
        .unwrap();
        let text = cfg.to_toml();
        // Every default is materialized in the emitted metadata.
        assert!(text.contains("flat_length = 2.0"), "{text}");
        assert!(text.contains("alpha = 0.01"), "{text}");
        assert!(text.contains("master_seed = 1"), "{text}");
        let back = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(back.run.eps, cfg.run.eps);
        assert_eq!(back.run.mc_budget, cfg.run.mc_budget);
    }

    #[test]
    fn mismatched_target_and_system_is_named() {
        let err = ExperimentConfig::from_toml(
            "[system]\nkind = \"stadium\"\n[target]\nkind = \"corner_barrier\"\n",
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("corner_barrier") && msg.contains("diamond"), "{msg}");

        let err = ExperimentConfig::from_toml(
            "[system]\nkind = \"doubling\"\n[target]\nkind = \"torus_ball\"\ncenter = [0.1, 0.2]\n",
        )
        .unwrap_err();
        assert!(err.to_string().contains("toral"), "{err}");
    }

    #[test]
    fn unknown_and_missing_fields_are_reported_by_name() {
        let err = ExperimentConfig::from_toml(
            "[system]\nkind = \"stadium\"\nflat_len = 2.0\n[target]\nkind = \"position_strip\"\ncenter_r = 0.0\n",
        )
        .unwrap_err();
        assert!(err.to_string().contains("flat_len"), "{err}");

        let err = ExperimentConfig::from_toml(
            "[system]\nkind = \"stadium\"\n[target]\nkind = \"phase_ball\"\ncenter_r = 0.7\n",
        )
        .unwrap_err();
        assert!(err.to_string().contains("center_phi"), "{err}");
    }

    #[test]
    fn out_of_range_run_parameters_are_refused() {
        let base = "[system]\nkind = \"stadium\"\n[target]\nkind = \"position_strip\"\ncenter_r = 0.0\n[run]\n";
        for (snippet, field) in [
            ("eps = []\n", "run.eps"),
            ("eps = [0.0]\n", "run.eps"),
            ("alpha = 1.5\n", "run.alpha"),
            ("seeds = 0\n", "run.seeds"),
            ("mc_budget = 100\n", "run.mc_budget"),
            ("horizon = -3.0\n", "run.horizon"),
        ] {
            let err = ExperimentConfig::from_toml(&format!("{base}{snippet}")).unwrap_err();
            assert!(
                err.to_string().contains(field),
                "{snippet} -> {err}"
            );
        }
    }

    #[test]
    fn overlapping_scatterers_are_rejected_at_build() {
        // The historically tempting three-disc layout self-intersects.
        let cfg = ExperimentConfig::from_toml(
            "[system]\nkind = \"sinai\"\nscatterers = [\n { center = [0.5, 0.0], radius = 0.44 },\n { center = [0.0, 0.5], radius = 0.44 },\n { center = [0.5, 0.5], radius = 0.44 },\n]\n[target]\nkind = \"position_strip\"\ncenter_r = 0.1\n",
        )
        .unwrap();
        assert!(cfg.build_table().is_err());
    }
}

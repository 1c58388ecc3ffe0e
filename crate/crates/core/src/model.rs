//! Scenario configuration, tower grid geometry, and candidate link selection.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::propagation::LinkGainTable;
use crate::traffic::TrafficParams;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("grid must contain at least two towers (rows*cols = {0})")]
    TooFewTowers(usize),
    #[error("fiber set must not be empty")]
    EmptyFiberSet,
    #[error("fiber id {id} is outside the tower range 1..={count}")]
    FiberIdOutOfRange { id: usize, count: usize },
    #[error("spacing_km must be positive (got {0})")]
    NonPositiveSpacing(f64),
    #[error("pmax_w must be positive (got {0})")]
    NonPositivePower(f64),
    #[error("channel_bw_hz must be positive (got {0})")]
    NonPositiveBandwidth(f64),
    #[error("channel list must not be empty")]
    NoChannels,
    #[error("channel frequency must be positive (got {0} MHz)")]
    NonPositiveFrequency(f64),
    #[error("pwl_step_db must be positive (got {0})")]
    NonPositivePwlStep(f64),
    #[error("positions_km lists {got} towers but the grid has {expected}")]
    PositionCountMismatch { got: usize, expected: usize },
    #[error("link override references unknown tower pair ({from}, {to})")]
    BadLinkOverride { from: usize, to: usize },
    #[error("traffic: {0}")]
    Traffic(String),
    #[error("solver: {0}")]
    Solver(String),
}

fn default_pmax_w() -> f64 {
    4.0
}
fn default_noise_figure_db() -> f64 {
    10.0
}
fn default_antenna_gain_db() -> f64 {
    6.0
}
fn default_link_height_m() -> f64 {
    30.0
}
fn default_obstruction_height_m() -> f64 {
    15.0
}
fn default_channel_bw_hz() -> f64 {
    6.0e6
}
fn default_noise_psd_dbm_hz() -> f64 {
    -174.0
}
fn default_pwl_step_db() -> f64 {
    10.0
}

/// Per-link obstruction geometry override. Distances are measured from the
/// transmitter; `clearance_m` follows the same sign convention as the global
/// default (positive clears the obstruction).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkObstruction {
    pub from: usize,
    pub to: usize,
    #[serde(default)]
    pub d1_km: Option<f64>,
    pub clearance_m: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMode {
    /// Binary search for the highest feasible target rate on a fixed grid.
    Granularity,
    /// Single max-min solve with an epigraph objective.
    Epigraph,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub mode: SolveMode,
    pub granularity_bps: f64,
    pub gap: f64,
    pub time_limit_s: f64,
    pub node_limit: Option<u64>,
    /// Branch-and-bound node budget for each bisection probe.
    pub probe_node_limit: u64,
    pub workers: usize,
    pub seed: u64,
    pub log_nodes: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            mode: SolveMode::Granularity,
            granularity_bps: 1.0e6,
            gap: 1.0e-6,
            time_limit_s: 1800.0,
            node_limit: None,
            probe_node_limit: 20_000,
            workers: 1,
            seed: 0,
            log_nodes: false,
        }
    }
}

/// Full declarative description of a planning problem: grid, radio
/// parameters, channel set, traffic assumptions, and solver knobs.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub rows: usize,
    pub cols: usize,
    pub spacing_km: f64,
    pub fiber_ids: Vec<usize>,
    pub channels_mhz: Vec<f64>,
    #[serde(default = "default_pmax_w")]
    pub pmax_w: f64,
    #[serde(default = "default_noise_figure_db")]
    pub noise_figure_db: f64,
    #[serde(default = "default_antenna_gain_db")]
    pub gtx_db: f64,
    #[serde(default = "default_antenna_gain_db")]
    pub grx_db: f64,
    #[serde(default = "default_link_height_m")]
    pub link_height_m: f64,
    #[serde(default = "default_obstruction_height_m")]
    pub obstruction_height_m: f64,
    /// Signed line-of-sight clearance over the mid-path obstruction, meters.
    /// When absent it is derived as obstruction_height_m - link_height_m.
    #[serde(default)]
    pub clearance_m: Option<f64>,
    #[serde(default = "default_channel_bw_hz")]
    pub channel_bw_hz: f64,
    #[serde(default = "default_noise_psd_dbm_hz")]
    pub noise_psd_dbm_hz: f64,
    /// Receiver protection threshold. When absent it defaults to 10 dB below
    /// the channel noise floor.
    #[serde(default)]
    pub interference_threshold_dbm: Option<f64>,
    /// Emit one interference row per (link, other transmitter) instead of the
    /// aggregated per-receiver form. Same integer solutions, larger model.
    #[serde(default)]
    pub interference_pairwise: bool,
    /// Candidate-link pruning threshold; links whose best-channel full-power
    /// SNR falls below this are dropped. Absent means keep everything.
    #[serde(default)]
    pub min_snr_db: Option<f64>,
    /// Explicit tower positions overriding the grid layout, row-major order.
    #[serde(default)]
    pub positions_km: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub link_overrides: Vec<LinkObstruction>,
    #[serde(default)]
    pub traffic: TrafficParams,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default = "default_pwl_step_db")]
    pub pwl_step_db: f64,
}

impl ScenarioConfig {
    /// Table-III-style defaults around a required grid shape and channel set.
    pub fn new(
        rows: usize,
        cols: usize,
        spacing_km: f64,
        fiber_ids: Vec<usize>,
        channels_mhz: Vec<f64>,
    ) -> Self {
        ScenarioConfig {
            rows,
            cols,
            spacing_km,
            fiber_ids,
            channels_mhz,
            pmax_w: default_pmax_w(),
            noise_figure_db: default_noise_figure_db(),
            gtx_db: default_antenna_gain_db(),
            grx_db: default_antenna_gain_db(),
            link_height_m: default_link_height_m(),
            obstruction_height_m: default_obstruction_height_m(),
            clearance_m: None,
            channel_bw_hz: default_channel_bw_hz(),
            noise_psd_dbm_hz: default_noise_psd_dbm_hz(),
            interference_threshold_dbm: None,
            interference_pairwise: false,
            min_snr_db: None,
            positions_km: None,
            link_overrides: Vec::new(),
            traffic: TrafficParams::default(),
            solver: SolverConfig::default(),
            pwl_step_db: default_pwl_step_db(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn tower_count(&self) -> usize {
        self.rows * self.cols
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let n = self.tower_count();
        if n < 2 {
            return Err(ConfigError::TooFewTowers(n));
        }
        if self.fiber_ids.is_empty() {
            return Err(ConfigError::EmptyFiberSet);
        }
        for &id in &self.fiber_ids {
            if id < 1 || id > n {
                return Err(ConfigError::FiberIdOutOfRange { id, count: n });
            }
        }
        if !(self.spacing_km > 0.0) {
            return Err(ConfigError::NonPositiveSpacing(self.spacing_km));
        }
        if !(self.pmax_w > 0.0) {
            return Err(ConfigError::NonPositivePower(self.pmax_w));
        }
        if !(self.channel_bw_hz > 0.0) {
            return Err(ConfigError::NonPositiveBandwidth(self.channel_bw_hz));
        }
        if self.channels_mhz.is_empty() {
            return Err(ConfigError::NoChannels);
        }
        for &f in &self.channels_mhz {
            if !(f > 0.0) {
                return Err(ConfigError::NonPositiveFrequency(f));
            }
        }
        if !(self.pwl_step_db > 0.0) {
            return Err(ConfigError::NonPositivePwlStep(self.pwl_step_db));
        }
        if let Some(pos) = &self.positions_km {
            if pos.len() != n {
                return Err(ConfigError::PositionCountMismatch {
                    got: pos.len(),
                    expected: n,
                });
            }
        }
        for ov in &self.link_overrides {
            let ok = ov.from >= 1 && ov.from <= n && ov.to >= 1 && ov.to <= n && ov.from != ov.to;
            if !ok {
                return Err(ConfigError::BadLinkOverride {
                    from: ov.from,
                    to: ov.to,
                });
            }
        }
        self.traffic.validate().map_err(ConfigError::Traffic)?;
        if self.solver.workers == 0 {
            return Err(ConfigError::Solver("workers must be at least 1".into()));
        }
        if !(self.solver.granularity_bps > 0.0) {
            return Err(ConfigError::Solver(format!(
                "granularity_bps must be positive (got {})",
                self.solver.granularity_bps
            )));
        }
        Ok(())
    }

    /// Thermal noise power over one channel, watts.
    pub fn noise_power_w(&self) -> f64 {
        let dbm = self.noise_psd_dbm_hz + 10.0 * self.channel_bw_hz.log10();
        10f64.powf((dbm - 30.0) / 10.0)
    }

    /// Receiver protection threshold in watts (configured value, or 10 dB
    /// below the channel noise floor when unset).
    pub fn interference_threshold_w(&self) -> f64 {
        let dbm = self
            .interference_threshold_dbm
            .unwrap_or_else(|| self.noise_psd_dbm_hz + 10.0 * self.channel_bw_hz.log10() - 10.0);
        10f64.powf((dbm - 30.0) / 10.0)
    }

    /// Default signed clearance applied to links without an override.
    pub fn default_clearance_m(&self) -> f64 {
        self.clearance_m
            .unwrap_or(self.obstruction_height_m - self.link_height_m)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Tower {
    pub id: usize,
    pub x_km: f64,
    pub y_km: f64,
    pub fiber: bool,
}

/// Tower layout plus the channel set; everything downstream keys off this.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Network {
    pub towers: Vec<Tower>,
    pub channels_mhz: Vec<f64>,
}

impl Network {
    pub fn len(&self) -> usize {
        self.towers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.towers.is_empty()
    }

    pub fn tower(&self, id: usize) -> &Tower {
        &self.towers[id - 1]
    }

    pub fn is_fiber(&self, id: usize) -> bool {
        self.tower(id).fiber
    }

    pub fn fiber_ids(&self) -> Vec<usize> {
        self.towers.iter().filter(|t| t.fiber).map(|t| t.id).collect()
    }

    pub fn non_fiber_ids(&self) -> Vec<usize> {
        self.towers.iter().filter(|t| !t.fiber).map(|t| t.id).collect()
    }

    pub fn distance_km(&self, i: usize, j: usize) -> f64 {
        let a = self.tower(i);
        let b = self.tower(j);
        ((a.x_km - b.x_km).powi(2) + (a.y_km - b.y_km).powi(2)).sqrt()
    }
}

/// Lays out `rows x cols` towers at cell centers with row-major ids starting
/// at 1, so id = (row-1)*cols + col and tower 1 sits at (l/2, l/2).
pub fn build_grid(cfg: &ScenarioConfig) -> Result<Network, ConfigError> {
    cfg.validate()?;
    let fiber: BTreeSet<usize> = cfg.fiber_ids.iter().copied().collect();
    let mut towers = Vec::with_capacity(cfg.tower_count());
    for row in 1..=cfg.rows {
        for col in 1..=cfg.cols {
            let id = (row - 1) * cfg.cols + col;
            let (x, y) = match &cfg.positions_km {
                Some(pos) => (pos[id - 1][0], pos[id - 1][1]),
                None => (
                    (col as f64 - 0.5) * cfg.spacing_km,
                    (row as f64 - 0.5) * cfg.spacing_km,
                ),
            };
            towers.push(Tower {
                id,
                x_km: x,
                y_km: y,
                fiber: fiber.contains(&id),
            });
        }
    }
    Ok(Network {
        towers,
        channels_mhz: cfg.channels_mhz.clone(),
    })
}

/// Directed links eligible for planning: every ordered pair whose source is
/// not a fiber tower, optionally pruned by best-channel full-power SNR.
pub fn candidate_links(
    net: &Network,
    gains: &LinkGainTable,
    min_snr_db: Option<f64>,
) -> Vec<(usize, usize)> {
    let mut links = Vec::new();
    for src in &net.towers {
        if src.fiber {
            continue;
        }
        for dst in &net.towers {
            if dst.id == src.id {
                continue;
            }
            let keep = match min_snr_db {
                None => true,
                Some(thresh) => {
                    let best = (0..net.channels_mhz.len())
                        .map(|m| gains.snr_full_db(src.id, dst.id, m))
                        .fold(f64::NEG_INFINITY, f64::max);
                    best >= thresh
                }
            };
            if keep {
                links.push((src.id, dst.id));
            }
        }
    }
    links
}

//! Per-cell traffic demand projection from device growth and usage
//! assumptions.

use serde::{Deserialize, Serialize};

/// A device class tracked by the growth projection: installed base per
/// household and its compound annual growth rate.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceClass {
    pub name: String,
    pub base_per_household: f64,
    pub cagr: f64,
    pub years: u32,
}

fn default_devices() -> Vec<DeviceClass> {
    let mk = |name: &str, base: f64, cagr: f64| DeviceClass {
        name: name.to_string(),
        base_per_household: base,
        cagr,
        years: 5,
    };
    vec![
        mk("pcs", 1.2, -0.10),
        mk("smartphones", 1.2, 0.20),
        mk("tablets", 0.5, 0.40),
        mk("web_tv", 0.5, 0.30),
        mk("set_top_boxes", 1.0, 0.10),
    ]
}

fn default_penetration() -> f64 {
    0.78
}
fn default_household_size() -> f64 {
    3.0
}
fn default_active_fraction() -> f64 {
    0.25
}
fn default_monthly_gb() -> f64 {
    130.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrafficParams {
    pub density_per_km2: f64,
    pub penetration: f64,
    pub household_size: f64,
    pub active_fraction: f64,
    pub monthly_gb_per_connection: f64,
    pub devices: Vec<DeviceClass>,
}

impl Default for TrafficParams {
    fn default() -> Self {
        TrafficParams {
            density_per_km2: 0.0,
            penetration: default_penetration(),
            household_size: default_household_size(),
            active_fraction: default_active_fraction(),
            monthly_gb_per_connection: default_monthly_gb(),
            devices: default_devices(),
        }
    }
}

impl TrafficParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.penetration) {
            return Err(format!("penetration must be in [0, 1] (got {})", self.penetration));
        }
        if !(0.0..=1.0).contains(&self.active_fraction) {
            return Err(format!(
                "active_fraction must be in [0, 1] (got {})",
                self.active_fraction
            ));
        }
        if !(self.household_size >= 1.0) {
            return Err(format!(
                "household_size must be at least 1 (got {})",
                self.household_size
            ));
        }
        if self.monthly_gb_per_connection < 0.0 {
            return Err(format!(
                "monthly_gb_per_connection must be non-negative (got {})",
                self.monthly_gb_per_connection
            ));
        }
        if self.density_per_km2 < 0.0 {
            return Err(format!(
                "density_per_km2 must be non-negative (got {})",
                self.density_per_km2
            ));
        }
        Ok(())
    }
}

/// Compound growth: `base * (1 + cagr)^years`.
pub fn project_devices(base: f64, cagr: f64, years: u32) -> f64 {
    base * (1.0 + cagr).powi(years as i32)
}

/// Average sustained rate of one connection consuming `monthly_gb` GB per
/// 30-day month, in bps.
pub fn avg_rate_bps(monthly_gb: f64) -> f64 {
    monthly_gb * 1.0e9 * 8.0 / (30.0 * 86_400.0)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CellDemand {
    pub l_km: f64,
    pub population: f64,
    pub subscriptions: f64,
    pub r_avg_bps: f64,
    /// Rate seen by each concurrently active subscriber; the aggregate is
    /// the same either way.
    pub busy_rate_bps: f64,
    pub demand_bps: f64,
}

/// Aggregate demand of one square cell with side `l_km`.
pub fn per_cell_demand(params: &TrafficParams, l_km: f64) -> CellDemand {
    let population = params.density_per_km2 * (l_km * l_km);
    let subscriptions = population * params.penetration / params.household_size;
    let r_avg = avg_rate_bps(params.monthly_gb_per_connection);
    let busy = if params.active_fraction > 0.0 {
        r_avg / params.active_fraction
    } else {
        0.0
    };
    CellDemand {
        l_km,
        population,
        subscriptions,
        r_avg_bps: r_avg,
        busy_rate_bps: busy,
        demand_bps: subscriptions * r_avg,
    }
}

/// Projected devices per household for each configured class.
pub fn device_projection(params: &TrafficParams) -> Vec<(String, f64)> {
    params
        .devices
        .iter()
        .map(|d| {
            (
                d.name.clone(),
                project_devices(d.base_per_household, d.cagr, d.years),
            )
        })
        .collect()
}

/// Demand curve across cell sizes: `l_km,population,subscriptions,demand_mbps`.
pub fn demand_csv(params: &TrafficParams, spacings_km: &[f64]) -> String {
    let mut out = String::from("l_km,population,subscriptions,demand_mbps\n");
    for &l in spacings_km {
        let d = per_cell_demand(params, l);
        out.push_str(&format!(
            "{},{},{},{}\n",
            d.l_km,
            d.population,
            d.subscriptions,
            d.demand_bps / 1.0e6
        ));
    }
    out
}

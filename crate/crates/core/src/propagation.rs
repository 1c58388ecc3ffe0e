//! ITU line-of-sight link budget: free-space loss, first Fresnel zone,
//! knife-edge diffraction, and the resulting per-channel link gains.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Network, ScenarioConfig};

#[derive(Debug, Error)]
pub enum PropagationError {
    #[error("path length must be at least 1 m (got {0} km)")]
    DegenerateDistance(f64),
    #[error("frequency must be positive (got {0} GHz)")]
    NonPositiveFrequency(f64),
    #[error("sub-path split {d1} + {d2} km does not match path length {d} km")]
    SplitMismatch { d1: f64, d2: f64, d: f64 },
    #[error("sub-path distances must be non-negative (got {0} km)")]
    NegativeSubPath(f64),
}

const MIN_PATH_KM: f64 = 1.0e-3;

/// Free-space path loss in dB for a path of `d_km` at `f_ghz`.
pub fn free_space_loss_db(d_km: f64, f_ghz: f64) -> Result<f64, PropagationError> {
    if !(d_km >= MIN_PATH_KM) {
        return Err(PropagationError::DegenerateDistance(d_km));
    }
    if !(f_ghz > 0.0) {
        return Err(PropagationError::NonPositiveFrequency(f_ghz));
    }
    Ok(20.0 * d_km.log10() + 20.0 * (1000.0 * f_ghz).log10() + 32.44)
}

/// Radius of the first Fresnel zone, meters, at a point splitting the path
/// into `d1_km` + `d2_km`.
pub fn fresnel_radius_m(
    d1_km: f64,
    d2_km: f64,
    f_ghz: f64,
    d_km: f64,
) -> Result<f64, PropagationError> {
    if d1_km < 0.0 {
        return Err(PropagationError::NegativeSubPath(d1_km));
    }
    if d2_km < 0.0 {
        return Err(PropagationError::NegativeSubPath(d2_km));
    }
    if !(d_km > 0.0) {
        return Err(PropagationError::DegenerateDistance(d_km));
    }
    if !(f_ghz > 0.0) {
        return Err(PropagationError::NonPositiveFrequency(f_ghz));
    }
    let sum = d1_km + d2_km;
    if (sum - d_km).abs() > 1.0e-9 * d_km.max(1.0) {
        return Err(PropagationError::SplitMismatch {
            d1: d1_km,
            d2: d2_km,
            d: d_km,
        });
    }
    Ok(17.3 * (d1_km * d2_km / (f_ghz * d_km)).sqrt())
}

/// Knife-edge diffraction loss in dB. `h_m` is the signed clearance of the
/// line-of-sight path over the obstruction (positive clears it); with
/// `clamp` set, negative losses are reported as 0.
pub fn diffraction_loss_db(h_m: f64, f1_m: f64, clamp: bool) -> f64 {
    assert!(f1_m > 0.0, "Fresnel radius must be positive");
    let raw = -20.0 * h_m / f1_m + 10.0;
    if clamp {
        raw.max(0.0)
    } else {
        raw
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RadioParams {
    pub noise_figure_db: f64,
    pub gtx_db: f64,
    pub grx_db: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LinkGeometry {
    pub d_km: f64,
    pub d1_km: f64,
    pub d2_km: f64,
    /// Signed clearance of the LOS path over the obstruction, meters.
    pub h_m: f64,
    pub clamp_diffraction: bool,
}

/// Complete link budget for one tower pair on one channel.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LinkGainEntry {
    pub d_km: f64,
    pub d1_km: f64,
    pub d2_km: f64,
    pub h_m: f64,
    pub f_ghz: f64,
    pub fsl_db: f64,
    pub f1_m: f64,
    pub ad_db: f64,
    pub pl_db: f64,
    pub gain_db: f64,
    pub gain_linear: f64,
}

/// Evaluates the link budget: PL = FSL + A_d, then
/// gain = -PL - N_f + G_TX + G_RX.
pub fn link_gain(
    geom: &LinkGeometry,
    f_ghz: f64,
    radio: &RadioParams,
) -> Result<LinkGainEntry, PropagationError> {
    let fsl_db = free_space_loss_db(geom.d_km, f_ghz)?;
    let f1_m = fresnel_radius_m(geom.d1_km, geom.d2_km, f_ghz, geom.d_km)?;
    let ad_db = diffraction_loss_db(geom.h_m, f1_m, geom.clamp_diffraction);
    let pl_db = fsl_db + ad_db;
    let gain_db = -pl_db - radio.noise_figure_db + radio.gtx_db + radio.grx_db;
    Ok(LinkGainEntry {
        d_km: geom.d_km,
        d1_km: geom.d1_km,
        d2_km: geom.d2_km,
        h_m: geom.h_m,
        f_ghz,
        fsl_db,
        f1_m,
        ad_db,
        pl_db,
        gain_db,
        gain_linear: 10f64.powf(gain_db / 10.0),
    })
}

/// Noise power in watts for a PSD in dBm/Hz over a bandwidth in Hz.
pub fn noise_power_w(noise_psd_dbm_hz: f64, w_hz: f64) -> f64 {
    10f64.powf((noise_psd_dbm_hz + 10.0 * w_hz.log10() - 30.0) / 10.0)
}

/// Linear SNR for transmit power `p_w` through linear gain into a noise
/// floor of `noise_w` watts.
pub fn snr_linear(p_w: f64, gain_linear: f64, noise_w: f64) -> f64 {
    p_w * gain_linear / noise_w
}

pub fn snr_db(p_w: f64, gain_linear: f64, noise_w: f64) -> f64 {
    10.0 * snr_linear(p_w, gain_linear, noise_w).log10()
}

/// Shannon capacity in bps over bandwidth `w_hz` at linear SNR `s`.
pub fn capacity_bps(w_hz: f64, s: f64) -> f64 {
    w_hz * (1.0 + s).log2()
}

/// Cached link budgets for every ordered tower pair and channel.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LinkGainTable {
    entries: BTreeMap<(usize, usize, usize), LinkGainEntry>,
    pub channels_mhz: Vec<f64>,
    pub noise_w: f64,
    pub pmax_w: f64,
    pub channel_bw_hz: f64,
}

impl LinkGainTable {
    pub fn build(net: &Network, cfg: &ScenarioConfig) -> Result<Self, PropagationError> {
        let radio = RadioParams {
            noise_figure_db: cfg.noise_figure_db,
            gtx_db: cfg.gtx_db,
            grx_db: cfg.grx_db,
        };
        let mut overrides = BTreeMap::new();
        for ov in &cfg.link_overrides {
            overrides.insert((ov.from, ov.to), (ov.d1_km, ov.clearance_m));
        }
        let default_h = cfg.default_clearance_m();
        let mut entries = BTreeMap::new();
        for a in &net.towers {
            for b in &net.towers {
                if a.id == b.id {
                    continue;
                }
                let d = net.distance_km(a.id, b.id);
                let (d1, h) = match overrides.get(&(a.id, b.id)) {
                    Some((d1, h)) => (d1.unwrap_or(d / 2.0), *h),
                    None => (d / 2.0, default_h),
                };
                let geom = LinkGeometry {
                    d_km: d,
                    d1_km: d1,
                    d2_km: d - d1,
                    h_m: h,
                    clamp_diffraction: true,
                };
                for (m, &f_mhz) in net.channels_mhz.iter().enumerate() {
                    let entry = link_gain(&geom, f_mhz / 1000.0, &radio)?;
                    entries.insert((a.id, b.id, m), entry);
                }
            }
        }
        Ok(LinkGainTable {
            entries,
            channels_mhz: net.channels_mhz.clone(),
            noise_w: cfg.noise_power_w(),
            pmax_w: cfg.pmax_w,
            channel_bw_hz: cfg.channel_bw_hz,
        })
    }

    pub fn entry(&self, i: usize, j: usize, channel: usize) -> &LinkGainEntry {
        &self.entries[&(i, j, channel)]
    }

    pub fn gain_linear(&self, i: usize, j: usize, channel: usize) -> f64 {
        self.entry(i, j, channel).gain_linear
    }

    /// Full-power SNR in dB on one link and channel.
    pub fn snr_full_db(&self, i: usize, j: usize, channel: usize) -> f64 {
        snr_db(self.pmax_w, self.gain_linear(i, j, channel), self.noise_w)
    }

    /// Full-power Shannon capacity in bps on one link and channel.
    pub fn capacity_full_bps(&self, i: usize, j: usize, channel: usize) -> f64 {
        let s = snr_linear(self.pmax_w, self.gain_linear(i, j, channel), self.noise_w);
        capacity_bps(self.channel_bw_hz, s)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(usize, usize, usize), &LinkGainEntry)> {
        self.entries.iter()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,j,f_mhz,fsl_db,ad_db,gain_db\n");
        for ((i, j, m), e) in &self.entries {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                i, j, self.channels_mhz[*m], e.fsl_db, e.ad_db, e.gain_db
            ));
        }
        out
    }
}

//! Channel profiles: named power/delay tables with a Doppler spec,
//! quantization onto the sample grid, and the symbol-count horizons over
//! which delays and gains can be treated as stable.

use serde::{Deserialize, Serialize};

use super::ChannelError;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Doppler {
    Static,
    Jakes { v_mps: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelProfile {
    pub name: String,
    pub source: String,
    pub delays_us: Vec<f64>,
    pub powers_db: Vec<f64>,
    pub fc_hz: f64,
    pub fs_hz: f64,
    pub doppler: Doppler,
}

impl ChannelProfile {
    pub fn parse(text: &str) -> Result<Self, ChannelError> {
        let p: ChannelProfile =
            toml::from_str(text).map_err(|e| ChannelError::BadProfile(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if self.delays_us.is_empty() {
            return Err(ChannelError::EmptyProfile);
        }
        if self.delays_us.len() != self.powers_db.len() {
            return Err(ChannelError::BadProfile(format!(
                "{} delays but {} powers",
                self.delays_us.len(),
                self.powers_db.len()
            )));
        }
        if self.fs_hz <= 0.0 || self.fc_hz <= 0.0 {
            return Err(ChannelError::BadProfile("fc_hz/fs_hz must be positive".into()));
        }
        if self.delays_us.iter().any(|&d| !d.is_finite() || d < 0.0) {
            return Err(ChannelError::BadProfile("delays must be finite and >= 0".into()));
        }
        if let Doppler::Jakes { v_mps } = self.doppler {
            if v_mps == 0.0 {
                return Err(ChannelError::BadDoppler("use static".into()));
            }
            if !(v_mps.is_finite() && v_mps > 0.0) {
                return Err(ChannelError::BadDoppler(format!("bad speed {v_mps}")));
            }
        }
        Ok(())
    }

    /// Maximum Doppler shift v*fc/c (0 for static).
    pub fn doppler_hz(&self) -> f64 {
        match self.doppler {
            Doppler::Static => 0.0,
            Doppler::Jakes { v_mps } => v_mps * self.fc_hz / SPEED_OF_LIGHT,
        }
    }
}

/// Profile quantized onto the sample grid: strictly increasing integer
/// delays with linear mean powers summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct TapSet {
    pub delays: Vec<usize>,
    pub powers: Vec<f64>,
}

impl TapSet {
    pub fn path_count(&self) -> usize {
        self.delays.len()
    }

    /// Dense CIR length: max delay + 1.
    pub fn cir_len(&self) -> usize {
        self.delays.last().map_or(0, |&d| d + 1)
    }
}

/// Nearest-sample delay quantization; colliding taps are power-merged and
/// the result renormalized to unit total power.
pub fn quantize_profile(p: &ChannelProfile) -> Result<TapSet, ChannelError> {
    p.validate()?;
    let mut merged: Vec<(usize, f64)> = Vec::new();
    for (d_us, p_db) in p.delays_us.iter().zip(&p.powers_db) {
        let tap = (d_us * p.fs_hz * 1e-6).round() as usize;
        let lin = 10f64.powf(p_db / 10.0);
        match merged.iter_mut().find(|(t, _)| *t == tap) {
            Some((_, acc)) => *acc += lin,
            None => merged.push((tap, lin)),
        }
    }
    merged.sort_by_key(|&(t, _)| t);
    let total: f64 = merged.iter().map(|&(_, p)| p).sum();
    Ok(TapSet {
        delays: merged.iter().map(|&(t, _)| t).collect(),
        powers: merged.iter().map(|&(_, p)| p / total).collect(),
    })
}

/// Symbol-count horizons: delays stable over R_d symbols, gains highly
/// correlated over R_g1, channel quasi-static over R_g2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherenceParams {
    pub r_d: usize,
    pub r_g1: usize,
    pub r_g2: usize,
    pub f_d_hz: f64,
}

/// Derive the averaging horizons. Mobile profiles get the closed-form
/// floors capped at `cap_r_d`; static ones take R_g1 from config (odd, so
/// the symmetric windows 2R_d - 1 == 2R_g2 - 1 == R_g1 come out integral).
pub fn coherence_params(
    p: &ChannelProfile,
    m: usize,
    n: usize,
    cap_r_d: usize,
    static_r_g1: usize,
) -> Result<CoherenceParams, ChannelError> {
    p.validate()?;
    let sym = (m + n) as f64;
    match p.doppler {
        Doppler::Static => {
            if static_r_g1 == 0 || static_r_g1 % 2 == 0 {
                return Err(ChannelError::BadDoppler(format!(
                    "static R_g1 must be odd and positive, got {static_r_g1}"
                )));
            }
            let r = (static_r_g1 + 1) / 2;
            Ok(CoherenceParams {
                r_d: r,
                r_g1: static_r_g1,
                r_g2: r,
                f_d_hz: 0.0,
            })
        }
        Doppler::Jakes { v_mps } => {
            let f_d = p.doppler_hz();
            let t_s = 1.0 / p.fs_hz;
            let r_g1 = (SPEED_OF_LIGHT / (2.0 * v_mps * sym * p.fc_hz * t_s))
                .floor()
                .max(1.0) as usize;
            let r_d_raw = (SPEED_OF_LIGHT / (2.0 * v_mps * sym)).floor().max(1.0) as usize;
            Ok(CoherenceParams {
                r_d: r_d_raw.min(cap_r_d),
                r_g1,
                r_g2: 1,
                f_d_hz: f_d,
            })
        }
    }
}

/// Profiles compiled into the library, addressable by name.
pub fn builtin_profiles() -> Vec<ChannelProfile> {
    const SOURCES: [&str; 4] = [
        include_str!("../../profiles/itu_vehicular_b_static.toml"),
        include_str!("../../profiles/itu_vehicular_b_120kmh.toml"),
        include_str!("../../profiles/cdt8_static.toml"),
        include_str!("../../profiles/cdt8_120kmh.toml"),
    ];
    SOURCES
        .iter()
        .map(|s| ChannelProfile::parse(s).expect("builtin profile must parse"))
        .collect()
}

pub fn find_profile(name: &str) -> Result<ChannelProfile, ChannelError> {
    builtin_profiles()
        .into_iter()
        .find(|p| p.name == name)
        .ok_or_else(|| ChannelError::UnknownProfile(name.to_string()))
}

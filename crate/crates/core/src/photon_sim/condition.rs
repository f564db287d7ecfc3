use std::fs;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Detector and flux parameters of one simulated acquisition.
///
/// Serialized as a JSON object with keys `delta_t_s`, `pulse_rms_s`,
/// `t_bin_max`, `n_pulses`, `msppp`, `sbr` (a number or `"inf"`) and `gain`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationCondition {
    /// Width of one TCSPC time bin, seconds.
    #[serde(rename = "delta_t_s")]
    pub delta_t: f64,
    /// RMS width of the laser pulse, seconds.
    #[serde(rename = "pulse_rms_s")]
    pub pulse_rms: f64,
    /// Bin of the maximum detection distance.
    pub t_bin_max: u32,
    pub n_pulses: f64,
    /// Mean signal photons per pixel.
    pub msppp: f64,
    /// Signal-to-background ratio; infinity means no background.
    #[serde(serialize_with = "ser_sbr", deserialize_with = "de_sbr")]
    pub sbr: f64,
    #[serde(default = "default_gain")]
    pub gain: f64,
}

fn default_gain() -> f64 {
    1.0
}

fn ser_sbr<S: Serializer>(sbr: &f64, s: S) -> Result<S::Ok, S::Error> {
    if sbr.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*sbr)
    }
}

fn de_sbr<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Sbr {
        Num(f64),
        Text(String),
    }
    match Sbr::deserialize(d)? {
        Sbr::Num(v) => Ok(v),
        Sbr::Text(t) if matches!(t.as_str(), "inf" | "Infinity" | "infinity") => Ok(f64::INFINITY),
        Sbr::Text(t) => Err(serde::de::Error::custom(format!("invalid sbr {t:?}"))),
    }
}

impl Default for SimulationCondition {
    /// 100 ps bins, 1.5 ns pulses, ~120 m range, 4 photons/pixel at SBR 4.
    fn default() -> Self {
        Self {
            delta_t: 100e-12,
            pulse_rms: 1.5e-9,
            t_bin_max: 8000,
            n_pulses: 1.0,
            msppp: 4.0,
            sbr: 4.0,
            gain: 1.0,
        }
    }
}

impl SimulationCondition {
    pub fn with_flux(mut self, msppp: f64, sbr: f64) -> Self {
        self.msppp = msppp;
        self.sbr = sbr;
        self
    }

    pub fn speed_of_light(&self) -> f64 {
        SPEED_OF_LIGHT
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidCondition(what.to_string()));
        if !(self.delta_t > 0.0 && self.delta_t.is_finite()) {
            return bad("delta_t must be > 0");
        }
        if !(self.pulse_rms >= 0.0 && self.pulse_rms.is_finite()) {
            return bad("pulse_rms must be >= 0");
        }
        if self.t_bin_max < 1 {
            return bad("t_bin_max must be >= 1");
        }
        if !(self.n_pulses > 0.0 && self.n_pulses.is_finite()) {
            return bad("n_pulses must be > 0");
        }
        if !(self.msppp >= 0.0 && self.msppp.is_finite()) {
            return bad("msppp must be >= 0");
        }
        if !(self.sbr > 0.0) {
            return bad("sbr must be > 0 or inf");
        }
        if !(self.gain >= 0.0 && self.gain.is_finite()) {
            return bad("gain must be >= 0");
        }
        Ok(())
    }

    /// Standard deviation of the signal jitter in bins, `(pulse_rms / 2) / delta_t`.
    pub fn sigma_bins(&self) -> f64 {
        self.pulse_rms / 2.0 / self.delta_t
    }

    /// Number of histogram bins, `t_bin_max + 1`.
    pub fn n_bins(&self) -> usize {
        self.t_bin_max as usize + 1
    }

    /// Depth in meters of a (possibly fractional) time bin.
    pub fn bin_to_depth(&self, bin: f64) -> f64 {
        bin * SPEED_OF_LIGHT * self.delta_t / 2.0
    }

    /// Depth spanned by a single bin, `c * delta_t / 2`.
    pub fn bin_depth(&self) -> f64 {
        self.bin_to_depth(1.0)
    }

    pub fn max_depth(&self) -> f64 {
        self.bin_to_depth(self.t_bin_max as f64)
    }

    /// Mean signal photons for a pixel of the given reflectance.
    pub fn signal_mean(&self, reflectance: f64) -> f64 {
        self.n_pulses * self.msppp * reflectance
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let cond: Self = serde_json::from_slice(&fs::read(path)?)?;
        cond.validate()?;
        Ok(cond)
    }

    /// Loads a JSON array of conditions (a single object is accepted as a
    /// one-element list).
    pub fn load_list(path: impl AsRef<Path>) -> Result<Vec<Self>> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum OneOrMany {
            Many(Vec<SimulationCondition>),
            One(SimulationCondition),
        }
        let list = match serde_json::from_slice(&fs::read(path)?)? {
            OneOrMany::Many(v) => v,
            OneOrMany::One(c) => vec![c],
        };
        for c in &list {
            c.validate()?;
        }
        Ok(list)
    }
}

/// Converts a depth to its (fractional) time bin, `2 d / (c dt)`.
pub fn depth_to_bin(depth_m: f64, cond: &SimulationCondition) -> Result<f64> {
    let bin = 2.0 * depth_m / (SPEED_OF_LIGHT * cond.delta_t);
    if bin > cond.t_bin_max as f64 {
        return Err(Error::OutOfRange {
            depth_m,
            bin,
            t_bin_max: cond.t_bin_max,
        });
    }
    Ok(bin)
}

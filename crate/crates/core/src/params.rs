//! System parameters, the quantizer model and the derived noise/INR scalars.
//!
//! All dB quantities convert with `10·log10(x)` and `10^(x/10)`; powers in dBm
//! are referenced to 1 mW. Config files are TOML with one key per field of
//! [`SystemParams`]; the key names are the field names.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Prefix for environment-variable overrides, e.g. `FDMIMO_NUM_ANTENNAS=256`.
pub const ENV_PREFIX: &str = "FDMIMO_";

/// Distortion factors for 1..=5 bits.
pub const RHO_TABLE: [f64; 5] = [0.3634, 0.1175, 0.03454, 0.009497, 0.002499];

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm) * 1e-3
}

pub fn watts_to_dbm(w: f64) -> f64 {
    linear_to_db(w * 1e3)
}

/// Distortion factor ρ of a `bits`-bit quantizer.
///
/// Tabulated for 1 to 5 bits; beyond that the uniform-quantizer law
/// `(π√3/2)·2^(−2b)` is used.
pub fn rho_for_bits(bits: u32) -> Result<f64> {
    match bits {
        0 => Err(Error::ZeroBits),
        1..=5 => Ok(RHO_TABLE[bits as usize - 1]),
        b => Ok(rho_asymptotic(b)),
    }
}

/// High-resolution distortion law `(π√3/2)·2^(−2b)`.
pub fn rho_asymptotic(bits: u32) -> f64 {
    std::f64::consts::PI * 3f64.sqrt() / 2.0 * 2f64.powi(-2 * bits as i32)
}

/// Converter resolution: a bit count or an ideal (unquantized) converter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Resolution {
    Bits(u32),
    Full,
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Resolution::Bits(b) => write!(f, "{b}"),
            Resolution::Full => f.write_str("full"),
        }
    }
}

impl FromStr for Resolution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("full") || s.eq_ignore_ascii_case("inf") {
            return Ok(Resolution::Full);
        }
        let bits: u32 = s
            .parse()
            .map_err(|_| Error::Usage(format!("`{s}` is neither a bit count nor `full`")))?;
        if bits == 0 {
            return Err(Error::ZeroBits);
        }
        Ok(Resolution::Bits(bits))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ResolutionRepr {
    Bits(u32),
    Word(String),
}

impl Serialize for Resolution {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            Resolution::Bits(b) => ResolutionRepr::Bits(b),
            Resolution::Full => ResolutionRepr::Word("full".into()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Resolution {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match ResolutionRepr::deserialize(d)? {
            ResolutionRepr::Bits(b) => Ok(Resolution::Bits(b)),
            ResolutionRepr::Word(w) => w.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// AQNM quantizer: linear gain `alpha = 1 − rho` plus uncorrelated distortion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantizer {
    /// `None` for synthetic quantizers built from a gain directly.
    pub resolution: Option<Resolution>,
    pub rho: f64,
    pub alpha: f64,
}

impl Quantizer {
    pub fn new(resolution: Resolution) -> Result<Self> {
        let rho = match resolution {
            Resolution::Bits(b) => rho_for_bits(b)?,
            Resolution::Full => 0.0,
        };
        Ok(Quantizer {
            resolution: Some(resolution),
            rho,
            alpha: 1.0 - rho,
        })
    }

    pub fn bits(bits: u32) -> Result<Self> {
        Self::new(Resolution::Bits(bits))
    }

    pub fn full() -> Self {
        Quantizer {
            resolution: Some(Resolution::Full),
            rho: 0.0,
            alpha: 1.0,
        }
    }

    /// Quantizer with an explicit gain; used for synthetic budgets.
    pub fn with_alpha(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::param("alpha", "must lie in (0, 1]"));
        }
        Ok(Quantizer {
            resolution: None,
            rho: 1.0 - alpha,
            alpha,
        })
    }
}

/// Uplink power-control ratios `P_k/P_u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PowerControl {
    /// Same ratio for every user.
    Uniform(f64),
    /// Ratio for the k-th user of every cell.
    PerUser(Vec<f64>),
}

impl PowerControl {
    pub fn ratio(&self, user: usize) -> f64 {
        match self {
            PowerControl::Uniform(r) => *r,
            PowerControl::PerUser(v) => v[user],
        }
    }
}

impl Default for PowerControl {
    fn default() -> Self {
        PowerControl::Uniform(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemParams {
    pub bandwidth_hz: f64,
    pub pathloss_exponent: f64,
    pub shadowing_sigma_db: f64,
    pub uplink_power_w: f64,
    pub si_power_w: f64,
    /// SI channel power μ_SI² in dB.
    pub si_channel_gain_db: f64,
    pub noise_psd_dbm_hz: f64,
    pub noise_figure_db: f64,
    /// Receive-array gain applied to every UE→BS uplink link, never to the SI loop.
    pub bs_antenna_gain_db: f64,
    pub num_antennas: usize,
    pub users_ul_per_cell: usize,
    pub users_dl_per_cell: usize,
    pub pilots_per_cell: usize,
    pub overhead_fraction: f64,
    pub coherence_tile: usize,
    pub adc_bits: Resolution,
    pub dac_bits: Resolution,
    pub inter_site_distance_m: f64,
    pub min_ue_bs_distance_m: f64,
    pub pathloss_intercept_db: f64,
    pub power_control: PowerControl,
    /// Rings of cells around the cell of interest (0, 1 or 2).
    pub tiers: usize,
    /// Pilot reuse factor (1 or 3).
    pub reuse_factor: usize,
    pub wraparound: bool,
    /// Spectral-efficiency prelog of the half-duplex baseline.
    pub hd_prelog: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        SystemParams {
            bandwidth_hz: 20e6,
            pathloss_exponent: 4.0,
            shadowing_sigma_db: 8.0,
            uplink_power_w: 0.2,
            si_power_w: 40.0,
            si_channel_gain_db: 10.0,
            noise_psd_dbm_hz: -174.0,
            noise_figure_db: 3.0,
            bs_antenna_gain_db: 30.0,
            num_antennas: 100,
            users_ul_per_cell: 10,
            users_dl_per_cell: 10,
            pilots_per_cell: 30,
            overhead_fraction: 0.5,
            coherence_tile: 20_000,
            adc_bits: Resolution::Bits(3),
            dac_bits: Resolution::Bits(3),
            inter_site_distance_m: 500.0,
            min_ue_bs_distance_m: 10.0,
            pathloss_intercept_db: -38.46,
            power_control: PowerControl::default(),
            tiers: 2,
            reuse_factor: 3,
            wraparound: true,
            hd_prelog: 0.5,
        }
    }
}

fn finite(key: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(key, "must be finite"))
    }
}

fn positive(key: &str, v: f64) -> Result<()> {
    finite(key, v)?;
    if v > 0.0 {
        Ok(())
    } else {
        Err(Error::param(key, format!("must be > 0 (got {v})")))
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        positive("bandwidth_hz", self.bandwidth_hz)?;
        finite("pathloss_exponent", self.pathloss_exponent)?;
        if self.pathloss_exponent <= 2.0 {
            return Err(Error::param(
                "pathloss_exponent",
                format!("pathloss exponent η must satisfy η > 2 (got {})", self.pathloss_exponent),
            ));
        }
        finite("shadowing_sigma_db", self.shadowing_sigma_db)?;
        if self.shadowing_sigma_db < 0.0 {
            return Err(Error::param("shadowing_sigma_db", "must be ≥ 0"));
        }
        positive("uplink_power_w", self.uplink_power_w)?;
        positive("si_power_w", self.si_power_w)?;
        finite("si_channel_gain_db", self.si_channel_gain_db)?;
        finite("noise_psd_dbm_hz", self.noise_psd_dbm_hz)?;
        finite("noise_figure_db", self.noise_figure_db)?;
        finite("bs_antenna_gain_db", self.bs_antenna_gain_db)?;
        finite("pathloss_intercept_db", self.pathloss_intercept_db)?;
        for (key, v) in [
            ("num_antennas", self.num_antennas),
            ("users_ul_per_cell", self.users_ul_per_cell),
            ("users_dl_per_cell", self.users_dl_per_cell),
            ("pilots_per_cell", self.pilots_per_cell),
            ("coherence_tile", self.coherence_tile),
        ] {
            if v == 0 {
                return Err(Error::param(key, "must be a positive integer"));
            }
        }
        if self.pilots_per_cell < self.users_ul_per_cell {
            return Err(Error::param(
                "pilots_per_cell",
                format!(
                    "N_p = {} is below the {} uplink users per cell",
                    self.pilots_per_cell, self.users_ul_per_cell
                ),
            ));
        }
        finite("overhead_fraction", self.overhead_fraction)?;
        if !(0.0..=1.0).contains(&self.overhead_fraction) {
            return Err(Error::param("overhead_fraction", "β must lie in [0, 1]"));
        }
        let overhead = self.pilot_overhead();
        if overhead >= 1.0 {
            return Err(Error::param(
                "coherence_tile",
                format!("pilot overhead β·N_p/N_c = {overhead} must be below 1"),
            ));
        }
        for (key, r) in [("adc_bits", self.adc_bits), ("dac_bits", self.dac_bits)] {
            if r == Resolution::Bits(0) {
                return Err(Error::param(key, "a 0-bit quantizer is not defined"));
            }
        }
        positive("inter_site_distance_m", self.inter_site_distance_m)?;
        positive("min_ue_bs_distance_m", self.min_ue_bs_distance_m)?;
        if self.min_ue_bs_distance_m >= self.inter_site_distance_m / 2.0 {
            return Err(Error::param(
                "min_ue_bs_distance_m",
                "must be below half the inter-site distance",
            ));
        }
        match &self.power_control {
            PowerControl::Uniform(r) => check_ratio(*r)?,
            PowerControl::PerUser(v) => {
                if v.len() != self.users_ul_per_cell {
                    return Err(Error::param(
                        "power_control",
                        format!(
                            "expected {} per-user ratios, got {}",
                            self.users_ul_per_cell,
                            v.len()
                        ),
                    ));
                }
                for r in v {
                    check_ratio(*r)?;
                }
            }
        }
        if self.tiers > 2 {
            return Err(Error::param("tiers", "only 0, 1 or 2 tiers are supported"));
        }
        if self.reuse_factor != 1 && self.reuse_factor != 3 {
            return Err(Error::param("reuse_factor", "must be 1 or 3"));
        }
        finite("hd_prelog", self.hd_prelog)?;
        if !(self.hd_prelog > 0.0 && self.hd_prelog <= 1.0) {
            return Err(Error::param("hd_prelog", "must lie in (0, 1]"));
        }
        Ok(())
    }

    /// `β·N_p/N_c`.
    pub fn pilot_overhead(&self) -> f64 {
        self.overhead_fraction * self.pilots_per_cell as f64 / self.coherence_tile as f64
    }

    pub fn uplink_quantizer(&self) -> Result<Quantizer> {
        Quantizer::new(self.adc_bits)
    }

    pub fn downlink_quantizer(&self) -> Result<Quantizer> {
        Quantizer::new(self.dac_bits)
    }

    pub fn noise_power_w(&self) -> f64 {
        dbm_to_watts(noise_power_dbm(self))
    }

    /// Pathloss intercept `L_ref` as a linear factor.
    pub fn pathloss_intercept(&self) -> f64 {
        db_to_linear(self.pathloss_intercept_db)
    }

    pub fn antenna_gain(&self) -> f64 {
        db_to_linear(self.bs_antenna_gain_db)
    }

    pub fn si_channel_gain(&self) -> f64 {
        db_to_linear(self.si_channel_gain_db)
    }

    pub fn from_toml_str(s: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(s)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("SystemParams always serializes")
    }

    /// Reads and validates a config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let params = Self::from_toml_str(&text).map_err(|e| Error::ConfigParse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        params.validate()?;
        Ok(params)
    }

    /// Overrides one key with a TOML-syntax value (`"256"`, `"full"`, `"[1.0, 0.5]"`).
    /// Bare words that are not valid TOML are taken as strings.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let mut table = toml::Table::try_from(&*self).expect("SystemParams is a table");
        if !table.contains_key(key) {
            return Err(Error::param(key, "unknown configuration key"));
        }
        let parsed = match toml::from_str::<toml::Table>(&format!("v = {value}")) {
            Ok(mut t) => t.remove("v").expect("key present"),
            Err(_) => toml::Value::String(value.to_string()),
        };
        let old = table.insert(key.to_string(), parsed);
        let coerced = match (&old, table.get(key)) {
            // integers written where a float is expected
            (Some(toml::Value::Float(_)), Some(toml::Value::Integer(i))) => {
                Some(toml::Value::Float(*i as f64))
            }
            _ => None,
        };
        if let Some(v) = coerced {
            table.insert(key.to_string(), v);
        }
        *self = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::param(key, e.message().to_string()))?;
        Ok(())
    }

    /// Applies every `FDMIMO_<KEY>` variable found in `vars`.
    pub fn apply_env<I>(&mut self, vars: I) -> Result<()>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut found: Vec<(String, String)> = vars
            .into_iter()
            .filter_map(|(k, v)| {
                k.strip_prefix(ENV_PREFIX)
                    .map(|key| (key.to_ascii_lowercase(), v))
            })
            .collect();
        found.sort();
        for (key, value) in found {
            self.set(&key, &value)?;
        }
        Ok(())
    }
}

fn check_ratio(r: f64) -> Result<()> {
    if r > 0.0 && r <= 1.0 {
        Ok(())
    } else {
        Err(Error::param(
            "power_control",
            format!("P_k/P_u must lie in (0, 1] (got {r})"),
        ))
    }
}

/// Receiver noise power `N_0·B·NF` in dBm.
pub fn noise_power_dbm(params: &SystemParams) -> f64 {
    params.noise_psd_dbm_hz + linear_to_db(params.bandwidth_hz) + params.noise_figure_db
}

/// Self-interference-to-noise ratio `P_SI·μ_SI²/σ²` (linear).
pub fn inr(params: &SystemParams) -> f64 {
    params.si_power_w * params.si_channel_gain() / params.noise_power_w()
}

//! Scenario configuration: flat dotted-key files, defaults, validation and
//! the resolved (linear-unit) scenario used by every analysis.

use crate::channel::{NakagamiLaw, NoiseModel, PathLoss, RicianLaw};
use crate::error::{Error, Result};
use crate::geometry::{distance, AntennaSpec, NodePosition, SCurveParams};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt;

/// Transmission mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    /// Omnidirectional microwave.
    Om,
    /// Directional millimetre wave.
    Dm,
}

impl Mode {
    pub const BOTH: [Mode; 2] = [Mode::Om, Mode::Dm];

    #[must_use]
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Om => "OM",
            Mode::Dm => "DM",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Per-mode propagation constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandModel {
    pub los: PathLoss,
    pub nlos: PathLoss,
    /// Carrier bandwidth, Hz.
    pub bandwidth: f64,
}

impl BandModel {
    #[must_use]
    pub fn path_loss(&self, state: crate::channel::ChannelState) -> &PathLoss {
        match state {
            crate::channel::ChannelState::Los => &self.los,
            crate::channel::ChannelState::Nlos => &self.nlos,
        }
    }
}

/// UPA descriptions used in directional mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Antennas {
    pub alice: AntennaSpec,
    pub bob: AntennaSpec,
    pub willie: AntennaSpec,
}

/// Planner grid sizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerGrid {
    pub power_points: usize,
    pub rate_points: usize,
    /// The power grid spans `(P_max · 10^{-span/10}, P_max]`.
    pub power_span_db: f64,
}

/// Fully resolved scenario; powers in mW, ratios linear.
///
/// The omnidirectional band uses Rician fading, the directional band
/// Nakagami fading.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub alice: NodePosition,
    pub bob: NodePosition,
    pub willie: NodePosition,
    pub d_aw_min: f64,
    pub d_aw_max: f64,
    /// Power budget, mW.
    pub p_max: f64,
    /// Operating transmit power for sweeps, mW.
    pub p_a: f64,
    pub epsilon: f64,
    pub noise: NoiseModel,
    pub scurve: SCurveParams,
    pub rician: RicianLaw,
    pub nakagami: NakagamiLaw,
    pub om: BandModel,
    pub dm: BandModel,
    pub antennas: Antennas,
    /// Target rate, bit/s.
    pub r_b: f64,
    pub seed: u64,
    pub grid: PlannerGrid,
}

impl Scenario {
    #[must_use]
    pub fn band(&self, mode: Mode) -> &BandModel {
        match mode {
            Mode::Om => &self.om,
            Mode::Dm => &self.dm,
        }
    }

    /// Copy of the scenario with Alice moved along x.
    #[must_use]
    pub fn with_alice_x(&self, x: f64) -> Self {
        let mut s = self.clone();
        s.alice.x = x;
        s
    }

    /// Checks the Alice-Willie safe-distance window for `uav`.
    ///
    /// # Errors
    /// [`Error::Validation`] naming `alice.x` when the distance is outside
    /// `[d_aw_min, d_aw_max]`.
    pub fn check_safe_distance(&self, uav: NodePosition) -> Result<()> {
        let d = distance(uav, self.willie);
        if d < self.d_aw_min || d > self.d_aw_max {
            return Err(Error::Validation {
                field: "alice.x".into(),
                reason: format!(
                    "Alice-Willie distance {d:.3} m is outside [{}, {}]",
                    self.d_aw_min, self.d_aw_max
                ),
            });
        }
        Ok(())
    }
}

/// Scenario in file units (dBm, dB, metres, Hz, bit/s).
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    values: BTreeMap<&'static str, f64>,
}

/// Every accepted key with its default (the network parameter table).
/// Optional beamwidths default to NaN, meaning "derive from N".
const KEYS: &[(&str, f64)] = &[
    ("alice.x", 1000.0),
    ("alice.y", 0.0),
    ("alice.h", 500.0),
    ("bob.x", -500.0),
    ("bob.y", 0.0),
    ("bob.h", 0.0),
    ("willie.x", 1000.0),
    ("willie.y", 0.0),
    ("willie.h", 0.0),
    ("safety.d_aw_min", 300.0),
    ("safety.d_aw_max", 1500.0),
    ("power.p_max_dbm", 20.0),
    ("power.p_a_dbm", 15.0),
    ("covert.epsilon", 0.2),
    ("noise.sigma_n2_dbm", -80.0),
    ("noise.rho_db", 2.0),
    ("link.r_b", 1e6),
    ("scurve.sigma", 4.88),
    ("scurve.f", 0.429),
    ("rician.k0_db", 5.0),
    ("rician.k_half_pi_db", 15.0),
    ("nakagami.s_los", 3.0),
    ("nakagami.s_nlos", 2.0),
    ("om.beta_los", 1e-6),
    ("om.beta_nlos", 1e-7),
    ("om.alpha_los", 1.64),
    ("om.alpha_nlos", 2.71),
    ("om.bandwidth_hz", 40e6),
    ("dm.beta_los", 7.762_471_166_286_912e-7),
    ("dm.beta_nlos", 6.606_934_480_075_958e-8),
    ("dm.alpha_los", 2.0),
    ("dm.alpha_nlos", 3.0),
    ("dm.bandwidth_hz", 100e6),
    ("antenna.alice.n", 6.0),
    ("antenna.alice.theta_h", f64::NAN),
    ("antenna.alice.theta_ed", f64::NAN),
    ("antenna.bob.n", 18.0),
    ("antenna.bob.theta_h", f64::NAN),
    ("antenna.bob.theta_ed", f64::NAN),
    ("antenna.willie.n", 18.0),
    ("antenna.willie.theta_h", f64::NAN),
    ("antenna.willie.theta_ed", f64::NAN),
    ("planner.power_points", 200.0),
    ("planner.rate_points", 200.0),
    ("planner.power_span_db", 40.0),
    ("seed", 1.0),
];

const INTEGER_KEYS: &[&str] = &[
    "nakagami.s_los",
    "nakagami.s_nlos",
    "antenna.alice.n",
    "antenna.bob.n",
    "antenna.willie.n",
    "planner.power_points",
    "planner.rate_points",
    "seed",
];

/// Smallest accepted linear noise uncertainty.
pub const MIN_RHO: f64 = 1.0 + 1e-6;

#[must_use]
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[must_use]
pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

fn invalid(field: &str, reason: impl Into<String>) -> Error {
    Error::Validation {
        field: field.to_string(),
        reason: reason.into(),
    }
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut Vec<(String, toml::Value)>) {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            toml::Value::Table(t) => flatten(&key, t, out),
            other => out.push((key, other.clone())),
        }
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            values: KEYS.iter().copied().collect(),
        }
    }
}

impl ScenarioConfig {
    /// Parses a scenario file. Missing keys keep their defaults.
    ///
    /// # Errors
    /// [`Error::Parse`] for malformed text, [`Error::Validation`] for
    /// unknown keys or non-numeric values.
    pub fn parse(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        let mut flat = Vec::new();
        flatten("", &table, &mut flat);
        let mut cfg = Self::default();
        for (key, value) in flat {
            let v = match value {
                toml::Value::Integer(i) => i as f64,
                toml::Value::Float(f) => f,
                _ => return Err(invalid(&key, "expected a number")),
            };
            cfg.set(&key, v)?;
        }
        Ok(cfg)
    }

    /// Overrides one key.
    ///
    /// # Errors
    /// [`Error::Validation`] for unknown keys.
    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        let Some((k, _)) = KEYS.iter().find(|(k, _)| *k == key) else {
            return Err(invalid(key, "unknown key"));
        };
        self.values.insert(k, value);
        Ok(())
    }

    #[must_use]
    pub fn get(&self, key: &str) -> f64 {
        self.values.get(key).copied().unwrap_or(f64::NAN)
    }

    /// Renders every key in file syntax; byte-stable.
    #[must_use]
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        for (k, _) in KEYS {
            let v = self.get(k);
            if v.is_nan() {
                s.push_str(&format!("# {k} = (derived from the element count)\n"));
            } else if INTEGER_KEYS.contains(k) {
                s.push_str(&format!("{k} = {}\n", v as i64));
            } else {
                s.push_str(&format!("{k} = {v:e}\n"));
            }
        }
        s
    }

    /// SHA-256 of [`Self::to_config_string`], hex encoded.
    #[must_use]
    pub fn hash_hex(&self) -> String {
        hex::encode(Sha256::digest(self.to_config_string().as_bytes()))
    }

    /// Validates and converts to linear units.
    ///
    /// # Errors
    /// [`Error::Validation`] naming the offending field.
    pub fn resolve(&self, allow_unsafe: bool) -> Result<Scenario> {
        let g = |k: &str| self.get(k);
        let finite = |k: &str| -> Result<f64> {
            let v = g(k);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(invalid(k, "must be a finite number"))
            }
        };
        let positive = |k: &str| -> Result<f64> {
            let v = finite(k)?;
            if v > 0.0 {
                Ok(v)
            } else {
                Err(invalid(k, format!("must be positive, got {v}")))
            }
        };
        let integer = |k: &str, min: f64| -> Result<u32> {
            let v = finite(k)?;
            if v.fract() != 0.0 {
                return Err(invalid(k, format!("must be an integer, got {v}")));
            }
            if v < min || v > f64::from(u32::MAX) {
                return Err(invalid(k, format!("must be at least {min}, got {v}")));
            }
            Ok(v as u32)
        };
        let pos = |p: &str| -> Result<NodePosition> {
            Ok(NodePosition::new(
                finite(&format!("{p}.x"))?,
                finite(&format!("{p}.y"))?,
                finite(&format!("{p}.h"))?,
            ))
        };
        let antenna = |who: &str| -> Result<AntennaSpec> {
            let nk = format!("antenna.{who}.n");
            let n = integer(&nk, 1.0)?;
            let mut a = AntennaSpec::with_default_beamwidths(n);
            let hk = format!("antenna.{who}.theta_h");
            if !g(&hk).is_nan() {
                a.theta_h = positive(&hk)?;
                if a.theta_h > 2.0 * std::f64::consts::PI {
                    return Err(invalid(&hk, "must not exceed 2π"));
                }
            }
            let ek = format!("antenna.{who}.theta_ed");
            if !g(&ek).is_nan() {
                a.theta_ed = positive(&ek)?;
                if a.theta_ed > std::f64::consts::PI {
                    return Err(invalid(&ek, "must not exceed π"));
                }
            }
            Ok(a)
        };
        let band = |m: &str| -> Result<BandModel> {
            Ok(BandModel {
                los: PathLoss {
                    beta: positive(&format!("{m}.beta_los"))?,
                    alpha: positive(&format!("{m}.alpha_los"))?,
                },
                nlos: PathLoss {
                    beta: positive(&format!("{m}.beta_nlos"))?,
                    alpha: positive(&format!("{m}.alpha_nlos"))?,
                },
                bandwidth: positive(&format!("{m}.bandwidth_hz"))?,
            })
        };

        let alice = pos("alice")?;
        let bob = pos("bob")?;
        let willie = pos("willie")?;
        if alice.h <= 0.0 {
            return Err(invalid("alice.h", "UAV height must be positive"));
        }
        if bob.h >= alice.h {
            return Err(invalid("bob.h", "ground node must be below the UAV"));
        }
        if willie.h >= alice.h {
            return Err(invalid("willie.h", "ground node must be below the UAV"));
        }

        let rho = db_to_linear(finite("noise.rho_db")?);
        if rho < MIN_RHO {
            return Err(invalid(
                "noise.rho_db",
                "noise uncertainty must exceed 0 dB; without it the detector is perfect",
            ));
        }
        let epsilon = finite("covert.epsilon")?;
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(invalid("covert.epsilon", "must lie in (0, 1]"));
        }
        let k0 = db_to_linear(finite("rician.k0_db")?);
        let k_half_pi = db_to_linear(finite("rician.k_half_pi_db")?);
        if k_half_pi < k0 {
            return Err(invalid("rician.k_half_pi_db", "must be at least rician.k0_db"));
        }
        let r_b = finite("link.r_b")?;
        if r_b < 0.0 {
            return Err(invalid("link.r_b", "must be non-negative"));
        }
        let d_aw_min = finite("safety.d_aw_min")?;
        let d_aw_max = finite("safety.d_aw_max")?;
        if !(d_aw_min >= 0.0 && d_aw_min < d_aw_max) {
            return Err(invalid("safety.d_aw_max", "must exceed safety.d_aw_min"));
        }
        let power_points = integer("planner.power_points", 2.0)? as usize;
        let rate_points = integer("planner.rate_points", 2.0)? as usize;
        let seed = finite("seed")?;
        if seed < 0.0 || seed.fract() != 0.0 || seed > 9.007_199_254_740_992e15 {
            return Err(invalid("seed", "must be a non-negative integer below 2^53"));
        }

        let scenario = Scenario {
            alice,
            bob,
            willie,
            d_aw_min,
            d_aw_max,
            p_max: db_to_linear(finite("power.p_max_dbm")?),
            p_a: db_to_linear(finite("power.p_a_dbm")?),
            epsilon,
            noise: NoiseModel {
                sigma_n2: db_to_linear(finite("noise.sigma_n2_dbm")?),
                rho,
            },
            scurve: SCurveParams {
                sigma: positive("scurve.sigma")?,
                f: positive("scurve.f")?,
            },
            rician: RicianLaw { k0, k_half_pi },
            nakagami: NakagamiLaw {
                s_los: integer("nakagami.s_los", 1.0)?,
                s_nlos: integer("nakagami.s_nlos", 1.0)?,
            },
            om: band("om")?,
            dm: band("dm")?,
            antennas: Antennas {
                alice: antenna("alice")?,
                bob: antenna("bob")?,
                willie: antenna("willie")?,
            },
            r_b,
            seed: seed as u64,
            grid: PlannerGrid {
                power_points,
                rate_points,
                power_span_db: positive("planner.power_span_db")?,
            },
        };
        for a in [&scenario.antennas.alice, &scenario.antennas.bob, &scenario.antennas.willie] {
            crate::geometry::lobe_gains(a)?;
        }
        if allow_unsafe {
            if let Err(e) = scenario.check_safe_distance(scenario.alice) {
                log::warn!("{e}");
            }
        } else {
            scenario.check_safe_distance(scenario.alice)?;
        }
        Ok(scenario)
    }
}

/// Parses and resolves a scenario file.
///
/// # Errors
/// See [`ScenarioConfig::parse`] and [`ScenarioConfig::resolve`].
pub fn load_scenario_str(text: &str, allow_unsafe: bool) -> Result<(ScenarioConfig, Scenario)> {
    let cfg = ScenarioConfig::parse(text)?;
    let sc = cfg.resolve(allow_unsafe)?;
    Ok((cfg, sc))
}

impl Default for Scenario {
    fn default() -> Self {
        ScenarioConfig::default()
            .resolve(false)
            .expect("built-in defaults are valid")
    }
}

//! Flat `key = value` configuration with `[section]` headers.
//!
//! ```text
//! [otfs]
//! m = 32
//! n = 8
//! [channel]
//! max_delay = 3
//! [hardware]
//! xi_i = 1, 0.95
//! xi_o = 1, 0.95
//! [sim]
//! snr_db = 5:25:5
//! ```
//!
//! Omitted keys fall back to the reference scenario: `M = 64`, `N = 16`,
//! `L = 5`, `f_c = 4 GHz`, `Δf = 30 kHz`, `v_max = 500 km/h`, `R = 2`,
//! 4-QAM. BEM orders are derived from the Doppler spread unless given.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::bem::derive_orders;
use crate::channel::ChannelProfile;
use crate::error::{Error, Result};
use crate::frame::{ModulationSpec, OtfsParams, PilotConfig};

pub const SECTIONS: [&str; 5] = ["otfs", "channel", "hardware", "pilot", "sim"];

const KEYS: [(&str, &[&str]); 5] = [
    ("otfs", &["m", "n", "delta_f", "carrier_hz", "cp_len", "qam"]),
    ("channel", &["max_delay", "speed_kmh", "path_powers", "resolution"]),
    ("hardware", &["xi_i", "xi_o"]),
    ("pilot", &["l_p", "k_p", "q_s", "q_l", "pilot_power", "data_power"]),
    (
        "sim",
        &[
            "mode",
            "seed",
            "snr_db",
            "trials",
            "mse_trials",
            "ber_trials",
            "min_bits",
            "out_dir",
            "threads",
            "timing",
        ],
    ),
];

pub const DEFAULT_SEED: u64 = 20240601;
pub const DEFAULT_MSE_TRIALS: usize = 2000;
pub const DEFAULT_MIN_BITS: u64 = 100_000;

/// What a sweep measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Mse,
    Ber,
    Both,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mse" => Ok(Mode::Mse),
            "ber" => Ok(Mode::Ber),
            "both" => Ok(Mode::Both),
            other => Err(Error::config("sim.mode", format!("expected mse, ber or both, got `{other}`"))),
        }
    }
}

/// Raw `section.key → value` pairs, kept until validation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut raw = RawConfig::default();
        let mut section: Option<String> = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = strip_comment(line).trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| Error::config(format!("line {}", lineno + 1), "unterminated section header"))?
                    .trim()
                    .to_ascii_lowercase();
                if !SECTIONS.contains(&name.as_str()) {
                    return Err(Error::config(name, "unknown section"));
                }
                section = Some(name);
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}", lineno + 1), format!("expected `key = value`, got `{line}`")))?;
            let sec = section
                .as_deref()
                .ok_or_else(|| Error::config(key.trim(), "key appears before any section header"))?;
            raw.set(&format!("{sec}.{}", key.trim().to_ascii_lowercase()), value.trim())?;
        }
        Ok(raw)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Sets `section.key`, rejecting unknown keys.
    pub fn set(&mut self, dotted: &str, value: &str) -> Result<()> {
        let (sec, key) = dotted
            .split_once('.')
            .ok_or_else(|| Error::config(dotted, "expected `section.key`"))?;
        let known = KEYS
            .iter()
            .find(|(s, _)| *s == sec)
            .ok_or_else(|| Error::config(dotted, "unknown section"))?;
        if !known.1.contains(&key) {
            return Err(Error::config(dotted, "unknown key"));
        }
        self.entries.insert(dotted.to_string(), value.to_string());
        Ok(())
    }

    pub fn get(&self, dotted: &str) -> Option<&str> {
        self.entries.get(dotted).map(String::as_str)
    }

    pub fn contains(&self, dotted: &str) -> bool {
        self.entries.contains_key(dotted)
    }

    fn parse_or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|e| Error::config(key, format!("cannot parse `{v}`: {e}"))),
        }
    }

    fn parse_opt<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|v| v.parse().map_err(|e| Error::config(key, format!("cannot parse `{v}`: {e}"))))
            .transpose()
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find(['#', ';']) {
        Some(i) => &line[..i],
        None => line,
    }
}

/// Comma-separated floats.
pub fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|e| Error::config(key, format!("cannot parse `{}`: {e}", v.trim())))
        })
        .collect()
}

/// `a:b:step` (inclusive) or a comma list.
pub fn parse_grid(key: &str, value: &str) -> Result<Vec<f64>> {
    if !value.contains(':') {
        return parse_list(key, value);
    }
    let parts = parse_list(key, &value.replace(':', ","))?;
    let [a, b, step] = parts[..] else {
        return Err(Error::config(key, format!("expected `start:stop:step`, got `{value}`")));
    };
    if !(step > 0.0) || b < a {
        return Err(Error::config(key, format!("empty range `{value}`")));
    }
    let count = ((b - a) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| a + step * i as f64).collect())
}

/// Pairs quality factors elementwise; a single value is broadcast.
pub fn pair_xi(xi_i: &[f64], xi_o: &[f64]) -> Result<Vec<(f64, f64)>> {
    let pairs: Vec<(f64, f64)> = match (xi_i.len(), xi_o.len()) {
        (a, b) if a == b => xi_i.iter().copied().zip(xi_o.iter().copied()).collect(),
        (1, _) => xi_o.iter().map(|&o| (xi_i[0], o)).collect(),
        (_, 1) => xi_i.iter().map(|&i| (i, xi_o[0])).collect(),
        (a, b) => {
            return Err(Error::config(
                "hardware.xi_o",
                format!("{a} transmit and {b} receive quality factors cannot be paired"),
            ))
        }
    };
    for &(i, o) in &pairs {
        for (key, v) in [("hardware.xi_i", i), ("hardware.xi_o", o)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::config(key, format!("quality factor {v} outside (0, 1]")));
            }
        }
    }
    Ok(pairs)
}

/// Fully validated sweep description.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub params: OtfsParams,
    pub profile: ChannelProfile,
    pub pilot: PilotConfig,
    pub resolution: usize,
    /// ascending, dB
    pub snr_grid: Vec<f64>,
    pub xi_grid: Vec<(f64, f64)>,
    pub mse_trials: usize,
    /// fixed BER frame count; `None` runs enough frames for `min_bits`
    pub ber_trials: Option<usize>,
    pub min_bits: u64,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub mode: Mode,
    pub threads: Option<usize>,
    /// record wall-clock time per cell; off gives byte-reproducible CSVs
    pub timing: bool,
}

impl SweepConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self> {
        let m = raw.parse_or("otfs.m", 64usize)?;
        let n = raw.parse_or("otfs.n", 16usize)?;
        let delta_f = raw.parse_or("otfs.delta_f", 30e3)?;
        let carrier = raw.parse_or("otfs.carrier_hz", 4e9)?;
        let l = raw.parse_or("channel.max_delay", 5usize)?;
        let cp_len = raw.parse_or("otfs.cp_len", l)?;
        let qam = raw.parse_or("otfs.qam", 4usize)?;
        let modulation = ModulationSpec::qam(qam).map_err(|e| Error::config("otfs.qam", e.to_string()))?;
        let params = OtfsParams::new(m, n, delta_f, carrier, cp_len, modulation)?;
        if cp_len < l {
            return Err(Error::config(
                "otfs.cp_len",
                format!("cyclic prefix {cp_len} is shorter than the delay spread {l}"),
            ));
        }

        let speed_kmh = raw.parse_or("channel.speed_kmh", 500.0)?;
        if !(speed_kmh >= 0.0) {
            return Err(Error::config("channel.speed_kmh", format!("speed {speed_kmh} is negative")));
        }
        let powers = raw
            .get("channel.path_powers")
            .map(|v| parse_list("channel.path_powers", v))
            .transpose()?;
        let profile = ChannelProfile::jakes(&params, l, speed_kmh / 3.6, powers)?;
        let resolution = raw.parse_or("channel.resolution", 2usize)?;
        if resolution == 0 {
            return Err(Error::config("channel.resolution", "resolution must be at least 1"));
        }

        let (q_s_auto, q_l_auto) = derive_orders(&params, &profile, resolution)?;
        let q_s = raw.parse_or("pilot.q_s", q_s_auto)?;
        let q_l = raw.parse_or("pilot.q_l", q_l_auto)?;
        let mut pilot = PilotConfig::centered(&params, l, q_s, q_l);
        pilot.l_p = raw.parse_or("pilot.l_p", pilot.l_p)?;
        pilot.k_p = raw.parse_or("pilot.k_p", pilot.k_p)?;
        pilot.data_power = raw.parse_or("pilot.data_power", 1.0)?;
        // by default the pilot carries the energy of its guard region
        let default_pilot = pilot.guard_cells() as f64 * pilot.data_power;
        pilot.pilot_power = raw.parse_or("pilot.pilot_power", default_pilot)?;
        for (key, v) in [("pilot.data_power", pilot.data_power), ("pilot.pilot_power", pilot.pilot_power)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(key, format!("power {v} must be finite and nonnegative")));
            }
        }
        pilot.validate(&params)?;

        let xi_i = parse_list("hardware.xi_i", raw.get("hardware.xi_i").unwrap_or("1, 0.99, 0.95, 0.99, 0.95"))?;
        let xi_o = parse_list("hardware.xi_o", raw.get("hardware.xi_o").unwrap_or("1, 0.99, 0.95, 0.95, 0.99"))?;
        let xi_grid = pair_xi(&xi_i, &xi_o)?;

        let snr_grid = parse_grid("sim.snr_db", raw.get("sim.snr_db").unwrap_or("0:25:5"))?;
        if snr_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("sim.snr_db", "SNR grid must be strictly ascending"));
        }
        if snr_grid.iter().any(|s| !s.is_finite()) {
            return Err(Error::config("sim.snr_db", "SNR values must be finite"));
        }

        let trials: Option<usize> = raw.parse_opt("sim.trials")?;
        let mse_trials = match raw.parse_opt("sim.mse_trials")? {
            Some(t) => t,
            None => trials.unwrap_or(DEFAULT_MSE_TRIALS),
        };
        let ber_trials = match raw.parse_opt("sim.ber_trials")? {
            Some(t) => Some(t),
            None => trials,
        };
        if mse_trials == 0 {
            return Err(Error::config("sim.mse_trials", "at least one trial is required"));
        }
        if ber_trials == Some(0) {
            return Err(Error::config("sim.ber_trials", "at least one trial is required"));
        }
        let min_bits = raw.parse_or("sim.min_bits", DEFAULT_MIN_BITS)?;
        let threads: Option<usize> = raw.parse_opt("sim.threads")?;
        if threads == Some(0) {
            return Err(Error::config("sim.threads", "thread count must be positive"));
        }

        Ok(SweepConfig {
            params,
            profile,
            pilot,
            resolution,
            snr_grid,
            xi_grid,
            mse_trials,
            ber_trials,
            min_bits,
            seed: raw.parse_or("sim.seed", DEFAULT_SEED)?,
            out_dir: PathBuf::from(raw.get("sim.out_dir").unwrap_or("results")),
            mode: raw.parse_or("sim.mode", Mode::Both)?,
            threads,
            timing: raw.parse_or("sim.timing", true)?,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_raw(&RawConfig::parse(text)?)
    }

    /// Frames per BER cell.
    pub fn ber_frames(&self) -> usize {
        self.ber_trials.unwrap_or_else(|| {
            let bits = crate::frame::bits_per_frame(&self.params, &self.pilot) as u64;
            self.min_bits.div_ceil(bits.max(1)) as usize
        })
    }
}

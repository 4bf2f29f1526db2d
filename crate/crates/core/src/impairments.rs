//! Transceiver hardware distortion and AWGN.
//!
//! `s_i = √ξ_i s + z_i` at the transmitter and
//! `r_o = √ξ_o H_t s_i + w_t + z_o` at the receiver, with white circular
//! Gaussian `z_i`, `z_o` and `w_t`.

use rand::Rng;

use crate::channel::{apply_channel, ChannelRealization};
use crate::error::{Error, Result};
use crate::lin::{c64, complex_normal};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HardwareProfile {
    /// transmitter quality factor `ξ_i`
    pub xi_i: f64,
    /// receiver quality factor `ξ_o`
    pub xi_o: f64,
    /// AWGN variance `σ_w²` per sample
    pub noise_var: f64,
}

impl HardwareProfile {
    pub fn new(xi_i: f64, xi_o: f64, noise_var: f64) -> Result<Self> {
        for (key, xi) in [("hardware.xi_i", xi_i), ("hardware.xi_o", xi_o)] {
            if !(xi > 0.0 && xi <= 1.0) {
                return Err(Error::config(key, format!("quality factor must lie in (0, 1], got {xi}")));
            }
        }
        if !(noise_var >= 0.0 && noise_var.is_finite()) {
            return Err(Error::config("hardware.sigma_w2", "noise variance must be finite and nonnegative"));
        }
        Ok(HardwareProfile { xi_i, xi_o, noise_var })
    }

    pub fn ideal(noise_var: f64) -> Self {
        HardwareProfile {
            xi_i: 1.0,
            xi_o: 1.0,
            noise_var,
        }
    }

    /// Noise variance for `SNR = σ_d²/σ_w²` in dB.
    pub fn from_snr_db(xi_i: f64, xi_o: f64, snr_db: f64, data_power: f64) -> Result<Self> {
        HardwareProfile::new(xi_i, xi_o, noise_variance(snr_db, data_power))
    }

    /// Combined factor `ξ_o ξ_i`.
    pub fn xi(&self) -> f64 {
        self.xi_o * self.xi_i
    }

    pub fn distortion(&self, signal_power: f64, channel_gain: f64) -> Distortion {
        let (sigma_zi2, sigma_zo2) = distortion_variances(self, signal_power, channel_gain);
        Distortion {
            sigma_zi2,
            sigma_zo2,
            channel_gain,
        }
    }
}

/// `σ_w² = σ_d² / 10^{SNR/10}`.
pub fn noise_variance(snr_db: f64, data_power: f64) -> f64 {
    data_power / 10f64.powf(snr_db / 10.0)
}

/// Distortion noise variances fixed by the configured frame power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Distortion {
    pub sigma_zi2: f64,
    pub sigma_zo2: f64,
    /// `Σ σ_{l'}²`
    pub channel_gain: f64,
}

impl Distortion {
    /// Per-sample white noise seen after the receiver,
    /// `ξ_o σ_zi² Σσ² + σ_w² + σ_zo²`.
    pub fn white_variance(&self, hw: &HardwareProfile) -> f64 {
        hw.xi_o * self.sigma_zi2 * self.channel_gain + hw.noise_var + self.sigma_zo2
    }
}

/// `σ_zi² = (1−ξ_i)E|s|²` and `σ_zo² = (1−ξ_o)(ξ_i E|s|² + σ_zi²)·Σσ²`.
pub fn distortion_variances(hw: &HardwareProfile, signal_power: f64, channel_gain: f64) -> (f64, f64) {
    let sigma_zi2 = (1.0 - hw.xi_i) * signal_power;
    let sigma_zo2 = (1.0 - hw.xi_o) * (hw.xi_i * signal_power + sigma_zi2) * channel_gain;
    (sigma_zi2, sigma_zo2)
}

/// `s_i = √ξ_i s + z_i`, applied to every sample including the prefix.
pub fn impair_transmit<R: Rng + ?Sized>(
    s: &[c64],
    hw: &HardwareProfile,
    dist: &Distortion,
    rng: &mut R,
) -> Vec<c64> {
    let gain = hw.xi_i.sqrt();
    let mut out: Vec<c64> = s.iter().map(|v| v * gain).collect();
    if dist.sigma_zi2 > 0.0 {
        for v in out.iter_mut() {
            *v += complex_normal(rng, dist.sigma_zi2);
        }
    }
    out
}

/// `r_o = √ξ_o H_t s_i + w_t + z_o` with the prefix removed.
///
/// `w_t` is drawn first; `z_o` draws are skipped when `σ_zo² = 0`, so ideal
/// hardware consumes exactly the AWGN stream.
pub fn receive_chain<R: Rng + ?Sized>(
    s_i: &[c64],
    h: &ChannelRealization,
    hw: &HardwareProfile,
    dist: &Distortion,
    rng: &mut R,
) -> Result<Vec<c64>> {
    if s_i.len() < h.len() {
        return Err(Error::dim(format!(
            "signal has {} samples, channel spans {}",
            s_i.len(),
            h.len()
        )));
    }
    let cp = s_i.len() - h.len();
    let gain = hw.xi_o.sqrt();
    let mut r: Vec<c64> = apply_channel(h, s_i, cp)?.into_iter().map(|v| v * gain).collect();
    if hw.noise_var > 0.0 {
        for v in r.iter_mut() {
            *v += complex_normal(rng, hw.noise_var);
        }
    }
    if dist.sigma_zo2 > 0.0 {
        for v in r.iter_mut() {
            *v += complex_normal(rng, dist.sigma_zo2);
        }
    }
    Ok(r)
}

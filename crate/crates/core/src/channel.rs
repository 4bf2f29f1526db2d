//! Jakes-correlated time-varying multipath channel.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::{Error, Result};
use crate::frame::OtfsParams;
use crate::lin::{c64, complex_normal, ComplexMatrix, HermitianPsd, ONE, ZERO};

/// Propagation speed used for `f_max = f_c·v/c`. The round value reproduces
/// the 1851.85 Hz maximum Doppler of the 4 GHz / 500 km/h reference setup.
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

/// Statistical description of a WSSUS channel with Jakes fading per path.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelProfile {
    /// maximum delay spread `L` in samples; there are `L+1` paths
    pub max_delay: usize,
    /// `σ_{l'}²`, summing to one
    pub path_powers: Vec<f64>,
    /// maximum Doppler shift, Hz
    pub f_max: f64,
    /// user speed, m/s
    pub v_max: f64,
    /// sample interval `T_s`, s
    pub sample_interval: f64,
}

impl ChannelProfile {
    pub fn new(path_powers: Vec<f64>, f_max: f64, v_max: f64, sample_interval: f64) -> Result<Self> {
        if path_powers.is_empty() {
            return Err(Error::config("channel.path_powers", "need at least one path"));
        }
        if path_powers.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
            return Err(Error::config("channel.path_powers", "powers must be finite and nonnegative"));
        }
        let total: f64 = path_powers.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::config(
                "channel.path_powers",
                format!("path powers must sum to 1, got {total}"),
            ));
        }
        if !(f_max >= 0.0 && f_max.is_finite()) {
            return Err(Error::config("channel.f_max", "maximum Doppler must be nonnegative"));
        }
        if !(sample_interval > 0.0) {
            return Err(Error::config("otfs.delta_f", "sample interval must be positive"));
        }
        Ok(ChannelProfile {
            max_delay: path_powers.len() - 1,
            path_powers,
            f_max,
            v_max,
            sample_interval,
        })
    }

    /// Profile for a user moving at `v_max` m/s, `f_max = f_c·v_max/c`.
    /// With `path_powers = None` the power-delay profile is uniform.
    pub fn jakes(
        params: &OtfsParams,
        max_delay: usize,
        v_max: f64,
        path_powers: Option<Vec<f64>>,
    ) -> Result<Self> {
        let powers = path_powers
            .unwrap_or_else(|| vec![1.0 / (max_delay + 1) as f64; max_delay + 1]);
        if powers.len() != max_delay + 1 {
            return Err(Error::config(
                "channel.path_powers",
                format!("expected {} powers, got {}", max_delay + 1, powers.len()),
            ));
        }
        let profile = ChannelProfile::new(
            powers,
            params.carrier_hz * v_max / SPEED_OF_LIGHT,
            v_max,
            params.sample_interval(),
        )?;
        profile.check_fits(params)?;
        Ok(profile)
    }

    pub fn paths(&self) -> usize {
        self.max_delay + 1
    }

    pub fn total_power(&self) -> f64 {
        self.path_powers.iter().sum()
    }

    pub fn check_fits(&self, params: &OtfsParams) -> Result<()> {
        if self.paths() > params.m {
            return Err(Error::config(
                "channel.l",
                format!("{} paths do not fit {} delay bins", self.paths(), params.m),
            ));
        }
        Ok(())
    }

    /// Normalized autocorrelation `J₀(2π f_max τ T_s)` of one path at lag `τ`.
    pub fn correlation(&self, lag: usize) -> f64 {
        bessel_j0(2.0 * PI * self.f_max * lag as f64 * self.sample_interval)
    }
}

/// Bessel function of the first kind, order zero.
///
/// Uses the trapezoidal rule on `J₀(x) = (1/2π)∫ cos(x sin θ) dθ` over a full
/// period, which converges geometrically once the node count exceeds `|x|`.
pub fn bessel_j0(x: f64) -> f64 {
    let x = x.abs();
    let nodes = 64 + 2 * x.ceil() as usize;
    let step = 2.0 * PI / nodes as f64;
    let sum: f64 = (0..nodes).map(|k| (x * (k as f64 * step).sin()).cos()).sum();
    sum / nodes as f64
}

/// Unit-power Toeplitz correlation `J₀(2π f_max |m−n| T_s)` over `size` samples.
pub fn jakes_correlation(profile: &ChannelProfile, size: usize) -> ComplexMatrix {
    let lags: Vec<f64> = (0..size).map(|d| profile.correlation(d)).collect();
    ComplexMatrix::from_fn(size, size, |i, j| c64::new(lags[i.abs_diff(j)], 0.0))
}

/// Toeplitz covariance of path `path` over `size` consecutive samples.
pub fn jakes_covariance(profile: &ChannelProfile, size: usize, path: usize) -> Result<HermitianPsd> {
    if path > profile.max_delay {
        return Err(Error::Input(format!(
            "path {path} exceeds maximum delay {}",
            profile.max_delay
        )));
    }
    let sigma2 = profile.path_powers[path];
    let lags: Vec<f64> = (0..size).map(|d| sigma2 * profile.correlation(d)).collect();
    let m = ComplexMatrix::from_fn(size, size, |i, j| c64::new(lags[i.abs_diff(j)], 0.0));
    HermitianPsd::new(m)
}

/// One channel draw: `gains[(l', t)] = h_{l'}[t]`, `(L+1) × NM`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub gains: ComplexMatrix,
}

impl ChannelRealization {
    pub fn new(gains: ComplexMatrix) -> Self {
        ChannelRealization { gains }
    }

    /// Time-invariant single tap: `h_{l}[t] = 1` for the given delay.
    pub fn single_tap(paths: usize, delay: usize, len: usize) -> Self {
        let mut gains = ComplexMatrix::zeros(paths, len);
        for t in 0..len {
            gains[(delay, t)] = c64::new(1.0, 0.0);
        }
        ChannelRealization { gains }
    }

    pub fn paths(&self) -> usize {
        self.gains.nrows()
    }

    pub fn len(&self) -> usize {
        self.gains.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.ncols() == 0
    }

    pub fn tap(&self, path: usize) -> Vec<c64> {
        self.gains.row(path).iter().copied().collect()
    }

    /// `H_t s` with circular delay, for CP-free signals of length `NM`.
    pub fn apply_circular(&self, s: &[c64]) -> Vec<c64> {
        let nm = self.len();
        assert_eq!(s.len(), nm);
        (0..nm)
            .map(|t| {
                (0..self.paths()).fold(ZERO, |acc, l| acc + self.gains[(l, t)] * s[(t + nm - l % nm) % nm])
            })
            .collect()
    }

    /// `H_t^H v` with circular delay.
    pub fn apply_adjoint_circular(&self, v: &[c64]) -> Vec<c64> {
        let nm = self.len();
        assert_eq!(v.len(), nm);
        let mut out = vec![ZERO; nm];
        for t in 0..nm {
            for l in 0..self.paths() {
                out[(t + nm - l % nm) % nm] += self.gains[(l, t)].conj() * v[t];
            }
        }
        out
    }

    /// `H_t X` for a dense `X` with `NM` rows.
    pub fn mul_left(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let nm = self.len();
        assert_eq!(x.nrows(), nm);
        let mut out = ComplexMatrix::zeros(nm, x.ncols());
        for j in 0..x.ncols() {
            let src = x.column(j);
            let mut dst = out.column_mut(j);
            for t in 0..nm {
                let mut acc = ZERO;
                for l in 0..self.paths() {
                    acc += self.gains[(l, t)] * src[(t + nm - l % nm) % nm];
                }
                dst[t] = acc;
            }
        }
        out
    }

    /// `X H_t^H` for a dense `X` with `NM` columns.
    pub fn mul_right_adjoint(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let nm = self.len();
        assert_eq!(x.ncols(), nm);
        let mut out = ComplexMatrix::zeros(x.nrows(), nm);
        for t in 0..nm {
            for l in 0..self.paths() {
                let g = self.gains[(l, t)].conj();
                let src = x.column((t + nm - l % nm) % nm);
                let mut dst = out.column_mut(t);
                dst.axpy(g, &src, ONE);
            }
        }
        out
    }

    /// Dense `H_t` with `H_t[t, (t − l') mod NM] = h_{l'}[t]`.
    pub fn matrix(&self) -> ComplexMatrix {
        let nm = self.len();
        let mut h = ComplexMatrix::zeros(nm, nm);
        for t in 0..nm {
            for l in 0..self.paths() {
                h[(t, (t + nm - l % nm) % nm)] += self.gains[(l, t)];
            }
        }
        h
    }

    /// `‖h‖²` over all taps and times.
    pub fn energy(&self) -> f64 {
        self.gains.norm_squared()
    }
}

/// Shared-factor sampler for repeated draws from one profile.
///
/// Every path has the same normalized Toeplitz covariance, so one square-root
/// factor is computed and scaled by `σ_{l'}` per path.
#[derive(Debug, Clone)]
pub struct JakesSampler {
    profile: ChannelProfile,
    normalized: HermitianPsd,
    len: usize,
}

impl JakesSampler {
    pub fn new(profile: &ChannelProfile, len: usize) -> Result<Self> {
        let normalized = HermitianPsd::new(jakes_correlation(profile, len))?;
        normalized.factor()?;
        Ok(JakesSampler {
            profile: profile.clone(),
            normalized,
            len,
        })
    }

    pub fn profile(&self) -> &ChannelProfile {
        &self.profile
    }

    /// Normalized per-path covariance `J₀(2π f_max |m−n| T_s)`.
    pub fn normalized_covariance(&self) -> &HermitianPsd {
        &self.normalized
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ChannelRealization {
        let factor = self.normalized.factor().expect("factor computed in constructor");
        let l = &factor.lower;
        let rank = l.ncols();
        let paths = self.profile.paths();
        let mut gains = ComplexMatrix::zeros(paths, self.len);
        let mut w = vec![ZERO; rank];
        for (p, &power) in self.profile.path_powers.iter().enumerate() {
            let sigma = power.sqrt();
            for v in w.iter_mut() {
                *v = complex_normal(rng, 1.0);
            }
            for (j, wj) in w.iter().enumerate() {
                let col = l.column(j);
                let scaled = wj * sigma;
                for t in 0..self.len {
                    gains[(p, t)] += col[t] * scaled;
                }
            }
        }
        ChannelRealization { gains }
    }
}

/// Draws one realization with exact Jakes second-order statistics.
pub fn sample_channel<R: Rng + ?Sized>(
    profile: &ChannelProfile,
    params: &OtfsParams,
    rng: &mut R,
) -> Result<ChannelRealization> {
    Ok(JakesSampler::new(profile, params.nm())?.sample(rng))
}

/// Passes a CP-prefixed signal through the channel and drops the prefix:
/// `out[t] = Σ_{l'} h_{l'}[t]·s_cp[t + L_cp − l']`.
pub fn apply_channel(h: &ChannelRealization, s_cp: &[c64], cp_len: usize) -> Result<Vec<c64>> {
    let l = h.paths() - 1;
    if cp_len < l {
        return Err(Error::config(
            "otfs.cp_len",
            format!("cyclic prefix {cp_len} is shorter than the delay spread {l}"),
        ));
    }
    if s_cp.len() != h.len() + cp_len {
        return Err(Error::dim(format!(
            "signal has {} samples, expected {} + {cp_len}",
            s_cp.len(),
            h.len()
        )));
    }
    Ok((0..h.len())
        .map(|t| (0..h.paths()).fold(ZERO, |acc, p| acc + h.gains[(p, t)] * s_cp[t + cp_len - p]))
        .collect())
}

pub fn channel_matrix(h: &ChannelRealization) -> ComplexMatrix {
    h.matrix()
}

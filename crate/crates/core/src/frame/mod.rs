//! Delay-Doppler frame layout, OTFS modulation and QAM mapping.

mod qam;

pub use qam::ModulationSpec;

use crate::error::{Error, Result};
use crate::lin::{c64, dd_forward, dd_inverse, ComplexMatrix, ZERO};

/// OTFS grid geometry and waveform parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct OtfsParams {
    /// delay bins
    pub m: usize,
    /// Doppler bins
    pub n: usize,
    /// subcarrier spacing, Hz
    pub delta_f: f64,
    /// carrier frequency, Hz
    pub carrier_hz: f64,
    /// cyclic prefix, samples
    pub cp_len: usize,
    pub modulation: ModulationSpec,
}

impl OtfsParams {
    pub fn new(
        m: usize,
        n: usize,
        delta_f: f64,
        carrier_hz: f64,
        cp_len: usize,
        modulation: ModulationSpec,
    ) -> Result<Self> {
        if m < 2 {
            return Err(Error::config("otfs.m", format!("need at least 2 delay bins, got {m}")));
        }
        if n < 2 {
            return Err(Error::config("otfs.n", format!("need at least 2 Doppler bins, got {n}")));
        }
        if !(delta_f > 0.0 && delta_f.is_finite()) {
            return Err(Error::config("otfs.delta_f", "subcarrier spacing must be positive"));
        }
        if !(carrier_hz >= 0.0 && carrier_hz.is_finite()) {
            return Err(Error::config("otfs.f_c", "carrier frequency must be nonnegative"));
        }
        Ok(OtfsParams {
            m,
            n,
            delta_f,
            carrier_hz,
            cp_len,
            modulation,
        })
    }

    /// Samples per frame, `N·M`.
    pub fn nm(&self) -> usize {
        self.m * self.n
    }

    /// `T_s = 1 / (M·Δf)`.
    pub fn sample_interval(&self) -> f64 {
        1.0 / (self.m as f64 * self.delta_f)
    }

    /// Column-major (delay-fastest) index of DD cell `(l, k)`.
    pub fn cell_index(&self, l: usize, k: usize) -> usize {
        k * self.m + l
    }
}

/// Embedded pilot with a rectangular zero guard around it.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotConfig {
    /// pilot delay index
    pub l_p: usize,
    /// pilot Doppler index
    pub k_p: usize,
    /// guard delay half-width (maximum channel delay `L`)
    pub delay_spread: usize,
    pub q_s: usize,
    pub q_l: usize,
    pub pilot_power: f64,
    pub data_power: f64,
}

impl PilotConfig {
    /// Pilot at `(⌊M/2⌋, ⌊N/2⌋)` with unit pilot and data power.
    pub fn centered(params: &OtfsParams, delay_spread: usize, q_s: usize, q_l: usize) -> Self {
        PilotConfig {
            l_p: params.m / 2,
            k_p: params.n / 2,
            delay_spread,
            q_s,
            q_l,
            pilot_power: 1.0,
            data_power: 1.0,
        }
    }

    /// Doppler half-width of the guard, `(Q_S + Q_L) / 2`.
    pub fn doppler_half_width(&self) -> usize {
        (self.q_s + self.q_l) / 2
    }

    pub fn validate(&self, params: &OtfsParams) -> Result<()> {
        if (self.q_s + self.q_l) % 2 != 0 {
            return Err(Error::config(
                "pilot.q_s",
                format!("Q_S + Q_L must be even, got {} + {}", self.q_s, self.q_l),
            ));
        }
        let l = self.delay_spread;
        let d = self.doppler_half_width();
        if self.l_p < l || self.l_p + l >= params.m {
            return Err(Error::config(
                "pilot.l_p",
                format!(
                    "delay guard [{}-{l}, {}+{l}] leaves the {}-bin delay axis",
                    self.l_p, self.l_p, params.m
                ),
            ));
        }
        if self.k_p < d || self.k_p + d >= params.n {
            return Err(Error::config(
                "pilot.k_p",
                format!(
                    "Doppler guard [{}-{d}, {}+{d}] leaves the {}-bin Doppler axis",
                    self.k_p, self.k_p, params.n
                ),
            ));
        }
        if self.q_l / 2 > d {
            return Err(Error::config("pilot.q_l", "observation region exceeds the guard"));
        }
        if !(self.pilot_power >= 0.0 && self.data_power >= 0.0) {
            return Err(Error::config("pilot.sigma_p2", "powers must be nonnegative"));
        }
        Ok(())
    }

    pub fn in_guard(&self, l: usize, k: usize) -> bool {
        let dl = l.abs_diff(self.l_p);
        let dk = k.abs_diff(self.k_p);
        dl <= self.delay_spread && dk <= self.doppler_half_width()
    }

    /// Number of pilot plus guard cells, `(2L+1)(Q_S+Q_L+1)`.
    pub fn guard_cells(&self) -> usize {
        (2 * self.delay_spread + 1) * (self.q_s + self.q_l + 1)
    }

    /// Pilot overhead `λ`.
    pub fn overhead(&self, params: &OtfsParams) -> f64 {
        self.guard_cells() as f64 / params.nm() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellKind {
    Pilot,
    Guard,
    Data,
}

/// `M × N` delay-Doppler frame with its cell labels (column-major).
#[derive(Debug, Clone)]
pub struct DdFrame {
    pub grid: ComplexMatrix,
    pub mask: Vec<CellKind>,
}

impl DdFrame {
    /// `vec(X)`, delay index fastest.
    pub fn to_vec(&self) -> Vec<c64> {
        self.grid.as_slice().to_vec()
    }

    pub fn data_cells(&self) -> Vec<usize> {
        indices_of(&self.mask, CellKind::Data)
    }

    pub fn pilot_cell(&self) -> usize {
        indices_of(&self.mask, CellKind::Pilot)[0]
    }

    /// Fraction of cells that are pilot or guard.
    pub fn overhead(&self) -> f64 {
        let reserved = self.mask.iter().filter(|c| **c != CellKind::Data).count();
        reserved as f64 / self.mask.len() as f64
    }
}

fn indices_of(mask: &[CellKind], kind: CellKind) -> Vec<usize> {
    mask.iter()
        .enumerate()
        .filter(|(_, c)| **c == kind)
        .map(|(i, _)| i)
        .collect()
}

/// Cell labels of the frame, column-major.
pub fn layout(params: &OtfsParams, pilot: &PilotConfig) -> Vec<CellKind> {
    let mut mask = vec![CellKind::Data; params.nm()];
    for k in 0..params.n {
        for l in 0..params.m {
            if l == pilot.l_p && k == pilot.k_p {
                mask[params.cell_index(l, k)] = CellKind::Pilot;
            } else if pilot.in_guard(l, k) {
                mask[params.cell_index(l, k)] = CellKind::Guard;
            }
        }
    }
    mask
}

/// Data cell indices of the frame layout.
pub fn data_cells(params: &OtfsParams, pilot: &PilotConfig) -> Vec<usize> {
    indices_of(&layout(params, pilot), CellKind::Data)
}

pub fn bits_per_frame(params: &OtfsParams, pilot: &PilotConfig) -> usize {
    (params.nm() - pilot.guard_cells()) * params.modulation.bits_per_symbol()
}

/// Places the pilot `√σ_p²`, zero guard cells and Gray-mapped data scaled to
/// power `σ_d²`. Only the first [`bits_per_frame`] bits are consumed.
pub fn build_frame(params: &OtfsParams, pilot: &PilotConfig, data_bits: &[u8]) -> Result<DdFrame> {
    pilot.validate(params)?;
    let mask = layout(params, pilot);
    let cells = indices_of(&mask, CellKind::Data);
    let needed = cells.len() * params.modulation.bits_per_symbol();
    if data_bits.len() < needed {
        return Err(Error::Input(format!(
            "frame needs {needed} data bits, got {}",
            data_bits.len()
        )));
    }
    let symbols = params.modulation.map(&data_bits[..needed])?;
    let amp = pilot.data_power.sqrt();
    let mut grid = ComplexMatrix::zeros(params.m, params.n);
    {
        let g = grid.as_mut_slice();
        for (&cell, s) in cells.iter().zip(&symbols) {
            g[cell] = s * amp;
        }
        g[params.cell_index(pilot.l_p, pilot.k_p)] = c64::new(pilot.pilot_power.sqrt(), 0.0);
    }
    Ok(DdFrame { grid, mask })
}

/// Time-domain frame `s = vec(X F_N^H)` with a cyclic prefix of `cp_len`
/// samples prepended (`G_tx = I_M`).
pub fn modulate_grid(grid: &ComplexMatrix, cp_len: usize) -> Vec<c64> {
    let (m, n) = grid.shape();
    let s = dd_inverse(grid.as_slice(), m, n);
    add_cp(&s, cp_len)
}

pub fn modulate(frame: &DdFrame, params: &OtfsParams) -> Result<Vec<c64>> {
    if frame.grid.shape() != (params.m, params.n) {
        return Err(Error::dim(format!(
            "frame is {:?}, parameters expect {}x{}",
            frame.grid.shape(),
            params.m,
            params.n
        )));
    }
    Ok(modulate_grid(&frame.grid, params.cp_len))
}

pub fn add_cp(s: &[c64], cp_len: usize) -> Vec<c64> {
    let nm = s.len();
    let mut out = Vec::with_capacity(nm + cp_len);
    if cp_len > 0 {
        // the prefix may exceed the frame length on tiny grids; wrap cyclically
        out.extend((0..cp_len).map(|i| s[(nm * cp_len - cp_len + i) % nm]));
    }
    out.extend_from_slice(s);
    out
}

pub fn strip_cp(s_cp: &[c64], cp_len: usize) -> Vec<c64> {
    s_cp[cp_len..].to_vec()
}

/// DD-domain observation `y = F r` for a CP-free received frame.
pub fn demodulate(r: &[c64], params: &OtfsParams) -> Result<Vec<c64>> {
    if r.len() != params.nm() {
        return Err(Error::dim(format!(
            "received frame has {} samples, expected {}",
            r.len(),
            params.nm()
        )));
    }
    Ok(dd_forward(r, params.m, params.n))
}

/// Pilot-only time signal `s_p` (no CP).
pub fn pilot_signal(params: &OtfsParams, pilot: &PilotConfig) -> Vec<c64> {
    let mut x = vec![ZERO; params.nm()];
    x[params.cell_index(pilot.l_p, pilot.k_p)] = c64::new(pilot.pilot_power.sqrt(), 0.0);
    dd_inverse(&x, params.m, params.n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lin::dd_transform;
    use rand::Rng;

    fn params(m: usize, n: usize) -> OtfsParams {
        OtfsParams::new(m, n, 30e3, 4e9, 2, ModulationSpec::qam(4).unwrap()).unwrap()
    }

    fn random_bits(count: usize, seed: u64) -> Vec<u8> {
        let mut rng = crate::lin::trial_rng(seed, 0, 0);
        (0..count).map(|_| rng.random_range(0..2u8)).collect()
    }

    #[test]
    fn overhead_default_grid() {
        let p = params(64, 16);
        let pilot = PilotConfig::centered(&p, 5, 2, 4);
        assert_eq!(pilot.guard_cells(), 77);
        assert!((pilot.overhead(&p) - 77.0 / 1024.0).abs() < 1e-15);
        let f = build_frame(&p, &pilot, &random_bits(bits_per_frame(&p, &pilot), 1)).unwrap();
        assert!((f.overhead() - 77.0 / 1024.0).abs() < 1e-15);
    }

    #[test]
    fn single_cell_guard() {
        let p = params(8, 4);
        let pilot = PilotConfig::centered(&p, 0, 0, 0);
        assert_eq!(pilot.overhead(&p), 1.0 / 32.0);
        let f = build_frame(&p, &pilot, &random_bits(62, 2)).unwrap();
        assert_eq!(f.mask.iter().filter(|c| **c == CellKind::Guard).count(), 0);
    }

    #[test]
    fn guard_cell_count_and_values() {
        let p = params(8, 4);
        let pilot = PilotConfig::centered(&p, 1, 2, 2);
        // 4-bin Doppler axis cannot host a ±2 guard
        assert!(build_frame(&p, &pilot, &[]).is_err());

        let p = params(8, 6);
        let pilot = PilotConfig::centered(&p, 1, 2, 2);
        let bits = random_bits(bits_per_frame(&p, &pilot), 3);
        let f = build_frame(&p, &pilot, &bits).unwrap();
        let guards: Vec<usize> = (0..p.nm()).filter(|&i| f.mask[i] == CellKind::Guard).collect();
        assert_eq!(guards.len(), 14);
        let g = f.grid.as_slice();
        assert!(guards.iter().all(|&i| g[i] == ZERO));
        assert_eq!(g[f.pilot_cell()], c64::new(1.0, 0.0));
        assert_eq!(f.data_cells().len() + 15, p.nm());
    }

    #[test]
    fn bit_underflow_rejected() {
        let p = params(8, 6);
        let pilot = PilotConfig::centered(&p, 1, 2, 2);
        assert!(matches!(build_frame(&p, &pilot, &[0, 1]), Err(Error::Input(_))));
    }

    #[test]
    fn modulate_edge_cases() {
        let p = params(4, 4);
        let zero = DdFrame {
            grid: ComplexMatrix::zeros(4, 4),
            mask: vec![CellKind::Data; 16],
        };
        assert!(modulate(&zero, &p).unwrap().iter().all(|z| *z == ZERO));

        // N = 1: IDFT is the identity, so s is vec(X) behind its CP
        let grid = ComplexMatrix::from_fn(3, 1, |i, _| c64::new(i as f64 + 1.0, 0.0));
        let s = modulate_grid(&grid, 1);
        assert_eq!(s, vec![c64::new(3.0, 0.0), c64::new(1.0, 0.0), c64::new(2.0, 0.0), c64::new(3.0, 0.0)]);
    }

    #[test]
    fn modulate_two_by_two_by_hand() {
        // X = I_2: vec(X F_2^H) = (1/√2)[1, 1, 1, -1]
        let grid = ComplexMatrix::identity(2, 2);
        let s = modulate_grid(&grid, 0);
        let h = 1.0 / 2f64.sqrt();
        let expected = [h, h, h, -h];
        for (a, e) in s.iter().zip(expected) {
            assert!((a - c64::new(e, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn roundtrip_and_power() {
        let p = params(4, 4);
        let mut rng = crate::lin::trial_rng(9, 0, 0);
        let grid = ComplexMatrix::from_fn(4, 4, |_, _| crate::lin::complex_normal(&mut rng, 1.0));
        let frame = DdFrame {
            grid: grid.clone(),
            mask: vec![CellKind::Data; 16],
        };
        let s = modulate(&frame, &p).unwrap();
        assert_eq!(s.len(), 18);
        let body = strip_cp(&s, p.cp_len);
        let energy: f64 = body.iter().map(|z| z.norm_sqr()).sum();
        assert!((energy - grid.norm_squared()).abs() < 1e-12);
        let y = demodulate(&body, &p).unwrap();
        for (a, b) in y.iter().zip(grid.as_slice()) {
            assert!((a - b).norm() < 1e-12);
        }
        assert!(demodulate(&s, &p).is_err());
    }

    #[test]
    fn impulse_demodulates_to_transform_column() {
        let p = params(4, 4);
        let f = dd_transform(4, 4).unwrap();
        let mut r = vec![ZERO; 16];
        r[6] = c64::new(1.0, 0.0);
        let y = demodulate(&r, &p).unwrap();
        for (i, v) in y.iter().enumerate() {
            assert!((v - f[(i, 6)]).norm() < 1e-14);
        }
    }

    #[test]
    fn data_power_matches_configuration() {
        let p = params(16, 8);
        let mut pilot = PilotConfig::centered(&p, 2, 2, 2);
        pilot.data_power = 2.0;
        let mut total = 0.0;
        let mut count = 0usize;
        for seed in 0..1000 {
            let f = build_frame(&p, &pilot, &random_bits(bits_per_frame(&p, &pilot), seed)).unwrap();
            let g = f.grid.as_slice();
            for c in f.data_cells() {
                total += g[c].norm_sqr();
                count += 1;
            }
        }
        assert!((total / count as f64 - 2.0).abs() < 0.04);
    }
}

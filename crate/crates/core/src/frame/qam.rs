use crate::error::{Error, Result};
use crate::lin::c64;

/// Square Gray-coded QAM constellation with unit average energy.
///
/// Each symbol carries `2k` bits: the first `k` select the in-phase level and
/// the last `k` the quadrature level, each Gray-coded so that neighbouring
/// levels differ in one bit. For 4-QAM this gives
/// `00 → (1+j)/√2, 01 → (1−j)/√2, 11 → (−1−j)/√2, 10 → (−1+j)/√2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModulationSpec {
    order: usize,
    bits_per_axis: usize,
    a_m: f64,
    b_m: f64,
    /// indexed by the symbol's bit pattern read MSB-first
    points: Vec<c64>,
    levels: Vec<f64>,
    scale: f64,
}

fn gray_to_binary(mut g: usize) -> usize {
    let mut b = 0;
    while g != 0 {
        b ^= g;
        g >>= 1;
    }
    b
}

impl ModulationSpec {
    pub fn qam(order: usize) -> Result<Self> {
        let bits = order.trailing_zeros() as usize;
        if order < 4 || !order.is_power_of_two() || bits % 2 != 0 {
            return Err(Error::config(
                "modulation",
                format!("QAM order must be a square power of two (4, 16, 64, ...), got {order}"),
            ));
        }
        let k = bits / 2;
        let side = 1usize << k;
        let scale = (2.0 * (order as f64 - 1.0) / 3.0).sqrt();
        let level = |code: usize| (side as f64 - 1.0 - 2.0 * gray_to_binary(code) as f64) / scale;
        let levels: Vec<f64> = (0..side).map(level).collect();
        let points = (0..order)
            .map(|sym| {
                let i_code = sym >> k;
                let q_code = sym & (side - 1);
                c64::new(levels[i_code], levels[q_code])
            })
            .collect();
        let sqrt_m = side as f64;
        Ok(ModulationSpec {
            order,
            bits_per_axis: k,
            a_m: 2.0 / bits as f64 * (1.0 - 1.0 / sqrt_m),
            b_m: 3.0 / (2.0 * (order as f64 - 1.0)),
            points,
            levels,
            scale,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bits_per_symbol(&self) -> usize {
        2 * self.bits_per_axis
    }

    /// Multiplier in `a_M·erfc(√(b_M·SINR))`.
    pub fn a_m(&self) -> f64 {
        self.a_m
    }

    pub fn b_m(&self) -> f64 {
        self.b_m
    }

    pub fn points(&self) -> &[c64] {
        &self.points
    }

    pub fn map(&self, bits: &[u8]) -> Result<Vec<c64>> {
        let bps = self.bits_per_symbol();
        if bits.len() % bps != 0 {
            return Err(Error::Input(format!(
                "bit count {} is not a multiple of {bps}",
                bits.len()
            )));
        }
        Ok(bits
            .chunks(bps)
            .map(|chunk| {
                let idx = chunk.iter().fold(0usize, |acc, &b| (acc << 1) | (b & 1) as usize);
                self.points[idx]
            })
            .collect())
    }

    /// Nearest-point hard decisions. Square QAM decouples into two PAM slicers.
    pub fn demap(&self, symbols: &[c64]) -> Vec<u8> {
        let k = self.bits_per_axis;
        let mut out = Vec::with_capacity(symbols.len() * 2 * k);
        for s in symbols {
            let i_code = self.slice(s.re);
            let q_code = self.slice(s.im);
            for code in [i_code, q_code] {
                for b in (0..k).rev() {
                    out.push(((code >> b) & 1) as u8);
                }
            }
        }
        out
    }

    fn slice(&self, x: f64) -> usize {
        let side = self.levels.len();
        // level index i ↔ amplitude (side-1-2i)/scale
        let pos = ((side as f64 - 1.0) - x * self.scale) / 2.0;
        let idx = pos.round().clamp(0.0, side as f64 - 1.0) as usize;
        idx ^ (idx >> 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn qpsk_gray_layout() {
        let q = ModulationSpec::qam(4).unwrap();
        let h = 1.0 / 2f64.sqrt();
        let syms = q.map(&[0, 0, 0, 1, 1, 1, 1, 0]).unwrap();
        let expected = [
            c64::new(h, h),
            c64::new(h, -h),
            c64::new(-h, -h),
            c64::new(-h, h),
        ];
        for (s, e) in syms.iter().zip(expected) {
            assert!((s - e).norm() < 1e-15);
        }
        for w in 0..4 {
            let (a, b) = (syms[w], syms[(w + 1) % 4]);
            // neighbours around the square differ by 2/√2 in one coordinate
            assert!(((a - b).norm() - 2.0 * h).abs() < 1e-12);
        }
        assert_eq!(q.a_m(), 0.5);
        assert_eq!(q.b_m(), 0.5);
    }

    #[test]
    fn nearest_neighbour_decision() {
        let q = ModulationSpec::qam(4).unwrap();
        let h = 1.0 / 2f64.sqrt();
        assert_eq!(q.demap(&[c64::new(0.9 * h, 0.8 * h)]), vec![0, 0]);
    }

    #[test]
    fn unit_energy_and_gray_adjacency() {
        for order in [4, 16, 64, 256] {
            let q = ModulationSpec::qam(order).unwrap();
            let e: f64 = q.points().iter().map(|p| p.norm_sqr()).sum::<f64>() / order as f64;
            assert!((e - 1.0).abs() < 1e-12, "order {order}");
            let dmin = q.points()[..]
                .iter()
                .enumerate()
                .flat_map(|(i, a)| q.points()[i + 1..].iter().map(move |b| (a - b).norm()))
                .fold(f64::INFINITY, f64::min);
            for (i, a) in q.points().iter().enumerate() {
                for (j, b) in q.points().iter().enumerate() {
                    if i != j && ((a - b).norm() - dmin).abs() < 1e-9 {
                        assert_eq!((i ^ j).count_ones(), 1, "order {order}: {i} vs {j}");
                    }
                }
            }
        }
    }

    #[test]
    fn roundtrip_random_bits() {
        let mut rng = crate::lin::trial_rng(5, 0, 0);
        for order in [4, 16, 64] {
            let q = ModulationSpec::qam(order).unwrap();
            let n = 10_000 / q.bits_per_symbol() * q.bits_per_symbol();
            let bits: Vec<u8> = (0..n).map(|_| rng.random_range(0..2u8)).collect();
            assert_eq!(q.demap(&q.map(&bits).unwrap()), bits);
        }
    }

    #[test]
    fn invalid_orders_rejected() {
        for order in [0, 2, 8, 12, 32] {
            assert!(ModulationSpec::qam(order).is_err(), "order {order}");
        }
        let q = ModulationSpec::qam(16).unwrap();
        assert!(q.map(&[0, 1, 1]).is_err());
    }
}

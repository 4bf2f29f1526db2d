use crate::bem::{tap_dft, BemConfig};
use crate::error::{Error, Result};
use crate::frame::{pilot_signal, OtfsParams, PilotConfig};
use crate::lin::{c64, dd_forward, dd_transform, dft_matrix, diag, ComplexMatrix, ONE, ZERO};

/// Pilot observation model `E y = √ξ E A_p c + E z`.
///
/// Column `q·(L+1) + l'` of `A_p` is `F (b_q ∘ Π^{l'} s_p)`, which equals
/// `V_q diag(F_MN s_p) F_{MN×L}` column `l'` with `V_q = F diag(b_q) F_MN^H`.
#[derive(Debug, Clone)]
pub struct PilotOperator {
    /// `(l, k)` cells, delay-major
    pub observation_cells: Vec<(usize, usize)>,
    /// DD vector indices of the observation cells
    pub observation_index: Vec<usize>,
    /// `A_p`, `NM × (Q_L+1)(L+1)`
    pub a_p: ComplexMatrix,
    /// pilot-only time signal `s_p`
    pub pilot_signal: Vec<c64>,
    pub paths: usize,
}

impl PilotOperator {
    pub fn new(params: &OtfsParams, pilot: &PilotConfig, bem: &BemConfig, paths: usize) -> Result<Self> {
        let nm = params.nm();
        if bem.len() != nm {
            return Err(Error::dim(format!("basis spans {} samples, frame has {nm}", bem.len())));
        }
        let half = bem.q_l / 2;
        let l_hi = pilot.l_p + paths - 1;
        if l_hi >= params.m || pilot.k_p < half || pilot.k_p + half >= params.n {
            return Err(Error::config(
                "pilot.l_p",
                format!(
                    "observation region [{}, {l_hi}] x [{}-{half}, {}+{half}] leaves the {}x{} grid",
                    pilot.l_p, pilot.k_p, pilot.k_p, params.m, params.n
                ),
            ));
        }
        let mut observation_cells = Vec::with_capacity(paths * (2 * half + 1));
        for l in pilot.l_p..=l_hi {
            for k in pilot.k_p - half..=pilot.k_p + half {
                observation_cells.push((l, k));
            }
        }
        let observation_index = observation_cells.iter().map(|&(l, k)| params.cell_index(l, k)).collect();

        let s_p = pilot_signal(params, pilot);
        let order = bem.order();
        let mut a_p = ComplexMatrix::zeros(nm, order * paths);
        let mut buf = vec![ZERO; nm];
        for q in 0..order {
            for l in 0..paths {
                for (t, v) in buf.iter_mut().enumerate() {
                    *v = bem.basis[(t, q)] * s_p[(t + nm - l) % nm];
                }
                let col = dd_forward(&buf, params.m, params.n);
                a_p.column_mut(q * paths + l).copy_from_slice(&col);
            }
        }
        Ok(PilotOperator {
            observation_cells,
            observation_index,
            a_p,
            pilot_signal: s_p,
            paths,
        })
    }

    /// Observation count `(L+1)(Q_L+1)`.
    pub fn observations(&self) -> usize {
        self.observation_index.len()
    }

    /// `E y`.
    pub fn select(&self, y: &[c64]) -> Vec<c64> {
        self.observation_index.iter().map(|&i| y[i]).collect()
    }

    /// `E A_p`.
    pub fn observed(&self) -> ComplexMatrix {
        let rows = self.observations();
        ComplexMatrix::from_fn(rows, self.a_p.ncols(), |i, j| self.a_p[(self.observation_index[i], j)])
    }

    /// Dense one-hot `E`.
    pub fn selection_matrix(&self, nm: usize) -> ComplexMatrix {
        let mut e = ComplexMatrix::zeros(self.observations(), nm);
        for (i, &c) in self.observation_index.iter().enumerate() {
            e[(i, c)] = ONE;
        }
        e
    }
}

/// Dense `V_q = F diag(b_q) F_MN^H`.
pub fn basis_operator(params: &OtfsParams, bem: &BemConfig, q: usize) -> Result<ComplexMatrix> {
    let f = dd_transform(params.m, params.n)?;
    let f_mn = dft_matrix(params.nm())?;
    Ok(f * diag(&bem.column(q)) * f_mn.adjoint())
}

/// Dense `A_{p,q} = V_q diag(F_MN s_p) F_{MN×L}`, the literal construction.
pub fn pilot_block(params: &OtfsParams, pilot: &PilotConfig, bem: &BemConfig, q: usize, paths: usize) -> Result<ComplexMatrix> {
    let nm = params.nm();
    let f_mn = dft_matrix(nm)?;
    let s_p = nalgebra::DVector::from_vec(pilot_signal(params, pilot));
    let spec = &f_mn * s_p;
    Ok(basis_operator(params, bem, q)? * diag(spec.as_slice()) * tap_dft(nm, paths))
}

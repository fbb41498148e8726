//! Two-state transition matrices, their stationary law, the lifted pair
//! chain, and spectral gaps.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::LatentMode;
use crate::error::{Error, Result};

const ROW_SUM_TOL: f64 = 1e-12;

/// Row-stochastic 2x2 matrix with strictly positive entries, indexed
/// `[from][to]` with `L = 0`, `H = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[[f64; 2]; 2]", into = "[[f64; 2]; 2]")]
pub struct TransitionMatrix([[f64; 2]; 2]);

impl TransitionMatrix {
    pub fn new(rows: [[f64; 2]; 2]) -> Result<Self> {
        for (i, row) in rows.iter().enumerate() {
            if row.iter().any(|p| !p.is_finite() || *p <= 0.0) {
                return Err(Error::InvalidTransition(format!("row {i} has a non-positive entry: {row:?}")));
            }
            let s = row[0] + row[1];
            if (s - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidTransition(format!("row {i} sums to {s}")));
            }
        }
        Ok(Self(rows))
    }

    /// Chain with `P(L -> H) = p_lh` and `P(H -> L) = p_hl`.
    pub fn from_switching(p_lh: f64, p_hl: f64) -> Result<Self> {
        Self::new([[1.0 - p_lh, p_lh], [p_hl, 1.0 - p_hl]])
    }

    /// Symmetric chain switching with probability `p` in both directions.
    pub fn symmetric(p: f64) -> Result<Self> {
        Self::from_switching(p, p)
    }

    pub fn rows(&self) -> [[f64; 2]; 2] {
        self.0
    }

    pub fn prob(&self, from: LatentMode, to: LatentMode) -> f64 {
        self.0[from.index()][to.index()]
    }

    pub fn p_lh(&self) -> f64 {
        self.0[0][1]
    }

    pub fn p_hl(&self) -> f64 {
        self.0[1][0]
    }

    /// Non-unit eigenvalue, `1 - P_LH - P_HL`.
    pub fn second_eigenvalue(&self) -> f64 {
        1.0 - self.p_lh() - self.p_hl()
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(2, 2, |i, j| self.0[i][j])
    }
}

impl TryFrom<[[f64; 2]; 2]> for TransitionMatrix {
    type Error = Error;
    fn try_from(rows: [[f64; 2]; 2]) -> Result<Self> {
        Self::new(rows)
    }
}

impl From<TransitionMatrix> for [[f64; 2]; 2] {
    fn from(t: TransitionMatrix) -> Self {
        t.0
    }
}

/// Stationary distribution `(pi_L, pi_H)` of a two-state chain.
pub fn stationary_distribution(p: &TransitionMatrix) -> [f64; 2] {
    let (a, b) = (p.p_lh(), p.p_hl());
    [b / (a + b), a / (a + b)]
}

/// Transition matrix of the pair chain `(Z_{t-1}, Z_t)`.
///
/// States are ordered `(L,L), (L,H), (H,L), (H,H)`; `(i,j) -> (j,k)` has
/// probability `P[j][k]` and every other transition is zero.
pub fn second_order_chain(p: &TransitionMatrix) -> DMatrix<f64> {
    let rows = p.rows();
    DMatrix::from_fn(4, 4, |from, to| {
        let (_i, j) = (from / 2, from % 2);
        let (j2, k) = (to / 2, to % 2);
        if j == j2 {
            rows[j][k]
        } else {
            0.0
        }
    })
}

/// Stationary mass of each pair state, `pi_i * P_ij`, in the order used by
/// [`second_order_chain`].
pub fn pair_stationary(p: &TransitionMatrix) -> [f64; 4] {
    let pi = stationary_distribution(p);
    let r = p.rows();
    [pi[0] * r[0][0], pi[0] * r[0][1], pi[1] * r[1][0], pi[1] * r[1][1]]
}

/// Second-largest eigenvalue modulus of a stochastic matrix, and `1 - |lambda_2|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralGap {
    pub lambda2: f64,
    pub gap: f64,
}

/// Spectral gap of a square row-stochastic matrix.
pub fn spectral_gap(m: &DMatrix<f64>) -> Result<SpectralGap> {
    let n = m.nrows();
    if n < 2 || m.ncols() != n {
        return Err(Error::InvalidInput(format!("expected a square matrix of size >= 2, got {}x{}", n, m.ncols())));
    }
    for (i, row) in m.row_iter().enumerate() {
        if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidTransition(format!("row {i} has a negative or non-finite entry")));
        }
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidTransition(format!("row {i} sums to {s}")));
        }
    }
    // Non-zero eigenvalues of `U S V^T` are those of `S V^T U` restricted to
    // the numerical rank; this drops defective zero blocks, which Schur only
    // resolves to about sqrt(eps).
    let svd = m.clone().svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let s_max = svd.singular_values.max();
    let rank = svd.singular_values.iter().filter(|&&s| s > 1e-12 * s_max).count().max(1);
    let mut reduced = DMatrix::<f64>::zeros(rank, rank);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if k < rank {
            reduced.row_mut(k).copy_from(&((v_t.row(k) * u.columns(0, rank)) * s));
        }
    }
    let schur = nalgebra::linalg::Schur::try_new(reduced, 1e-15, 10_000)
        .ok_or_else(|| Error::Numerical("eigen-decomposition did not converge".into()))?;
    let mut moduli: Vec<f64> = schur.complex_eigenvalues().iter().map(|z| z.norm()).collect();
    moduli.resize(n, 0.0);
    moduli.sort_by(|a, b| b.total_cmp(a));
    let lambda2 = moduli[1].min(1.0);
    Ok(SpectralGap { lambda2, gap: 1.0 - lambda2 })
}

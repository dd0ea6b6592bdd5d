//! Discrete-time, level-independent quasi-birth-death chains.
//!
//! The transition matrix has the block layout
//!
//! ```text
//! | B  C  0  0  ... |
//! | E  A1 A0 0  ... |
//! | 0  A2 A1 A0 ... |
//! | ...             |
//! ```
//!
//! where level 0 is the empty buffer and level `k >= 1` holds `k` packets.

use nalgebra::{DMatrix, DVector, RowDVector};
use thiserror::Error;

/// Tolerance on row sums of the assembled transition structure.
pub const ROW_SUM_TOL: f64 = 1e-12;
/// Stop the rate-matrix iteration once `||R_{k+1} - R_k||_inf` drops below this.
pub const RATE_MATRIX_TOL: f64 = 1e-13;
pub const RATE_MATRIX_MAX_ITER: usize = 100_000;
/// A minimal solution with spectral radius this close to 1 belongs to a
/// null-recurrent or transient chain.
pub const UNIT_RADIUS_MARGIN: f64 = 1e-8;
/// Relative singular-value threshold for the boundary null space.
pub const NULL_SPACE_RTOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QbdError {
    #[error("block {block} has shape {actual:?}, expected {expected:?}")]
    Dimension {
        block: &'static str,
        expected: (usize, usize),
        actual: (usize, usize),
    },
    #[error("block {block} has negative entry {value} at ({row}, {col})")]
    Negative {
        block: &'static str,
        row: usize,
        col: usize,
        value: f64,
    },
    #[error("row {row} of [{blocks}] sums to 1 {deviation:+e}")]
    RowSum {
        blocks: &'static str,
        row: usize,
        deviation: f64,
    },
    #[error("phase process is reducible: stationary system is singular")]
    Reducible,
    #[error("rate matrix iteration did not converge after {iterations} steps (last change {change:e}, residual {residual:e})")]
    NonConvergence {
        iterations: usize,
        change: f64,
        residual: f64,
    },
    #[error("rate matrix spectral radius {spectral_radius} is not below 1: chain is not positive recurrent")]
    NotPositiveRecurrent { spectral_radius: f64 },
    #[error("boundary null space has dimension {dimension}, expected 1")]
    NullSpace { dimension: usize },
    #[error("singular matrix in {0}")]
    Singular(&'static str),
}

/// The six blocks of a QBD transition matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct QbdSpec {
    /// Boundary to boundary.
    pub b: DMatrix<f64>,
    /// Boundary to level 1.
    pub c: DMatrix<f64>,
    /// Level 1 to boundary.
    pub e: DMatrix<f64>,
    /// Level up.
    pub a0: DMatrix<f64>,
    /// Level unchanged.
    pub a1: DMatrix<f64>,
    /// Level down.
    pub a2: DMatrix<f64>,
}

fn check_shape(block: &'static str, m: &DMatrix<f64>, expected: (usize, usize)) -> Result<(), QbdError> {
    if m.shape() == expected {
        Ok(())
    } else {
        Err(QbdError::Dimension {
            block,
            expected,
            actual: m.shape(),
        })
    }
}

fn check_nonnegative(block: &'static str, m: &DMatrix<f64>) -> Result<(), QbdError> {
    for (col, column) in m.column_iter().enumerate() {
        for (row, &value) in column.iter().enumerate() {
            if value.is_nan() || value < 0.0 {
                return Err(QbdError::Negative { block, row, col, value });
            }
        }
    }
    Ok(())
}

fn check_row_sums(blocks: &'static str, parts: &[&DMatrix<f64>]) -> Result<(), QbdError> {
    for row in 0..parts[0].nrows() {
        let sum: f64 = parts.iter().map(|m| m.row(row).sum()).sum();
        let deviation = sum - 1.0;
        if deviation.abs() > ROW_SUM_TOL {
            return Err(QbdError::RowSum { blocks, row, deviation });
        }
    }
    Ok(())
}

/// Induced infinity norm (maximum absolute row sum).
pub fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Drift of the level process under the stationary phase law.
#[derive(Debug, Clone, PartialEq)]
pub struct Drift {
    /// Stationary vector of `A0 + A1 + A2`.
    pub phase_law: RowDVector<f64>,
    /// `Pi A2 1`.
    pub down: f64,
    /// `Pi A0 1`.
    pub up: f64,
}

impl Drift {
    pub fn is_stable(&self) -> bool {
        self.down > self.up
    }
}

/// Stationary vector of a stochastic matrix from the bordered system
/// `(A^T - I + 1 1^T) Pi^T = 1`.
pub fn stationary_vector(a: &DMatrix<f64>) -> Result<RowDVector<f64>, QbdError> {
    let n = a.nrows();
    let system = a.transpose() - DMatrix::identity(n, n) + DMatrix::from_element(n, n, 1.0);
    let pi = system
        .lu()
        .solve(&DVector::from_element(n, 1.0))
        .ok_or(QbdError::Reducible)?;
    if pi.iter().any(|x| !x.is_finite()) {
        return Err(QbdError::Reducible);
    }
    Ok(pi.transpose())
}

/// The stationary probability vector and the matrix `R` are the key
/// ingredients of the matrix-geometric solution `pi_k = pi_1 R^{k-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub pi0: RowDVector<f64>,
    pub pi1: RowDVector<f64>,
    pub rate_matrix: DMatrix<f64>,
}

impl SteadyState {
    fn fundamental(&self) -> Result<DMatrix<f64>, QbdError> {
        let n = self.rate_matrix.nrows();
        (DMatrix::identity(n, n) - &self.rate_matrix)
            .try_inverse()
            .ok_or(QbdError::Singular("I - R"))
    }

    /// `pi_0 1 + pi_1 (I - R)^{-1} 1`; equals 1 for a normalized solution.
    pub fn total_mass(&self) -> Result<f64, QbdError> {
        let inv = self.fundamental()?;
        Ok(self.pi0.sum() + (&self.pi1 * inv).sum())
    }

    /// `pi_k` for `k >= 1`.
    pub fn level(&self, k: usize) -> RowDVector<f64> {
        assert!(k >= 1, "level 0 is the boundary vector pi0");
        let mut v = self.pi1.clone();
        for _ in 1..k {
            v = &v * &self.rate_matrix;
        }
        v
    }

    /// Mean number of buffered packets, `pi_1 (I - R)^{-2} 1`.
    pub fn mean_queue_length(&self) -> Result<f64, QbdError> {
        let inv = self.fundamental()?;
        Ok((&self.pi1 * &inv * &inv).sum())
    }

    /// Mean packet latency in slots by Little's law, `pi_1 (I - R)^{-2} 1 / alpha`.
    pub fn mean_latency(&self, arrival_prob: f64) -> Result<f64, QbdError> {
        Ok(self.mean_queue_length()? / arrival_prob)
    }
}

/// Free-function form of [`SteadyState::mean_latency`].
pub fn mean_latency(ss: &SteadyState, arrival_prob: f64) -> Result<f64, QbdError> {
    ss.mean_latency(arrival_prob)
}

impl QbdSpec {
    pub fn boundary_phases(&self) -> usize {
        self.b.nrows()
    }

    pub fn level_phases(&self) -> usize {
        self.a0.nrows()
    }

    /// Checks block shapes, nonnegativity and that every row of the
    /// transition matrix sums to 1.
    pub fn validate(&self) -> Result<(), QbdError> {
        let nb = self.boundary_phases();
        let nl = self.level_phases();
        check_shape("B", &self.b, (nb, nb))?;
        check_shape("C", &self.c, (nb, nl))?;
        check_shape("E", &self.e, (nl, nb))?;
        check_shape("A0", &self.a0, (nl, nl))?;
        check_shape("A1", &self.a1, (nl, nl))?;
        check_shape("A2", &self.a2, (nl, nl))?;
        for (name, m) in [
            ("B", &self.b),
            ("C", &self.c),
            ("E", &self.e),
            ("A0", &self.a0),
            ("A1", &self.a1),
            ("A2", &self.a2),
        ] {
            check_nonnegative(name, m)?;
        }
        check_row_sums("B C", &[&self.b, &self.c])?;
        check_row_sums("E A1 A0", &[&self.e, &self.a1, &self.a0])?;
        check_row_sums("A2 A1 A0", &[&self.a2, &self.a1, &self.a0])
    }

    /// `A = A0 + A1 + A2`, the phase process away from the boundary.
    pub fn phase_generator(&self) -> DMatrix<f64> {
        &self.a0 + &self.a1 + &self.a2
    }

    pub fn drift(&self) -> Result<Drift, QbdError> {
        let phase_law = stationary_vector(&self.phase_generator())?;
        let down = (&phase_law * &self.a2).sum();
        let up = (&phase_law * &self.a0).sum();
        Ok(Drift { phase_law, down, up })
    }

    /// Positive recurrence test `Pi A2 1 > Pi A0 1`.
    pub fn drift_stable(&self) -> Result<bool, QbdError> {
        Ok(self.drift()?.is_stable())
    }

    fn rate_residual(&self, r: &DMatrix<f64>) -> f64 {
        inf_norm(&(&self.a0 + r * &self.a1 + r * r * &self.a2 - r))
    }

    /// Minimal nonnegative solution of `R = A0 + R A1 + R^2 A2` by
    /// fixed-point iteration from `R = 0`, without any recurrence check.
    pub fn rate_matrix_iteration(&self) -> Result<DMatrix<f64>, QbdError> {
        let n = self.level_phases();
        let mut r = DMatrix::zeros(n, n);
        let mut change = f64::INFINITY;
        for _ in 0..RATE_MATRIX_MAX_ITER {
            let next = &self.a0 + &r * &self.a1 + &r * &r * &self.a2;
            change = inf_norm(&(&next - &r));
            r = next;
            if change < RATE_MATRIX_TOL {
                return Ok(r);
            }
        }
        Err(QbdError::NonConvergence {
            iterations: RATE_MATRIX_MAX_ITER,
            change,
            residual: self.rate_residual(&r),
        })
    }

    /// The rate matrix of a positive recurrent chain.
    ///
    /// Fails with [`QbdError::NotPositiveRecurrent`] when the minimal
    /// solution sits on the unit circle.
    pub fn solve_rate_matrix(&self) -> Result<DMatrix<f64>, QbdError> {
        let r = self.rate_matrix_iteration()?;
        let spectral_radius = spectral_radius(&r);
        if spectral_radius >= 1.0 - UNIT_RADIUS_MARGIN {
            return Err(QbdError::NotPositiveRecurrent { spectral_radius });
        }
        Ok(r)
    }

    /// Boundary and level-1 vectors from the null space of
    ///
    /// ```text
    /// | B - I   C            |
    /// | E       A1 + R A2 - I |
    /// ```
    ///
    /// normalized so that `pi_0 1 + pi_1 (I - R)^{-1} 1 = 1`.
    pub fn solve_steady_state(&self, rate_matrix: &DMatrix<f64>) -> Result<SteadyState, QbdError> {
        let nb = self.boundary_phases();
        let nl = self.level_phases();
        let size = nb + nl;
        let mut k = DMatrix::zeros(size, size);
        k.view_mut((0, 0), (nb, nb))
            .copy_from(&(&self.b - DMatrix::identity(nb, nb)));
        k.view_mut((0, nb), (nb, nl)).copy_from(&self.c);
        k.view_mut((nb, 0), (nl, nb)).copy_from(&self.e);
        k.view_mut((nb, nb), (nl, nl))
            .copy_from(&(&self.a1 + rate_matrix * &self.a2 - DMatrix::identity(nl, nl)));

        // x K = 0  <=>  K^T x^T = 0: the right singular vectors of K^T for
        // vanishing singular values span the solution set.
        let svd = k.transpose().svd(false, true);
        let v_t = svd.v_t.ok_or(QbdError::Singular("SVD"))?;
        let sigma_max = svd.singular_values.max();
        let threshold = NULL_SPACE_RTOL * sigma_max;
        let null: Vec<usize> = svd
            .singular_values
            .iter()
            .enumerate()
            .filter(|(_, &s)| s <= threshold)
            .map(|(i, _)| i)
            .collect();
        if null.len() != 1 {
            return Err(QbdError::NullSpace { dimension: null.len() });
        }
        let mut x: RowDVector<f64> = v_t.row(null[0]).into_owned();
        if x.sum() < 0.0 {
            x.neg_mut();
        }
        let mut ss = SteadyState {
            pi0: x.columns(0, nb).into_owned(),
            pi1: x.columns(nb, nl).into_owned(),
            rate_matrix: rate_matrix.clone(),
        };
        let mass = ss.total_mass()?;
        ss.pi0 /= mass;
        ss.pi1 /= mass;
        Ok(ss)
    }

    /// Drift check, rate matrix and steady state in one call.
    pub fn solve(&self) -> Result<SteadyState, QbdError> {
        let r = self.solve_rate_matrix()?;
        self.solve_steady_state(&r)
    }

    /// Sub-chain on the given boundary and level phase indices.
    ///
    /// Meant for closed classes of a reducible chain: the caller is
    /// responsible for choosing phases no probability flows out of.
    pub fn restrict(&self, boundary: &[usize], level: &[usize]) -> QbdSpec {
        let pick = |m: &DMatrix<f64>, rows: &[usize], cols: &[usize]| {
            DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
        };
        QbdSpec {
            b: pick(&self.b, boundary, boundary),
            c: pick(&self.c, boundary, level),
            e: pick(&self.e, level, boundary),
            a0: pick(&self.a0, level, level),
            a1: pick(&self.a1, level, level),
            a2: pick(&self.a2, level, level),
        }
    }
}

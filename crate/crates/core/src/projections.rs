//! Projection superoperators on dense composite density matrices.
//!
//! Everything here is explicit and small: environment dimensions up to
//! [`MAX_DENSE_ENV`]. Composite operators use the layout
//! `index = sys * dim_E + env`, so `A (x) B` is the Kronecker product with the
//! system factor first.

use std::ops::Range;

use nalgebra::{DMatrix, DVector, Matrix2};

use crate::state::{DensityMatrix2, RelevantSet};
use crate::{Error, Result, C64};

pub const MAX_DENSE_ENV: usize = 128;

const ONE: C64 = C64::new(1.0, 0.0);

/// Orthogonal decomposition of the environment identity into band projectors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BandPartition {
    band_sizes: Vec<usize>,
}

impl BandPartition {
    pub fn new(band_sizes: Vec<usize>) -> Result<Self> {
        if band_sizes.is_empty() || band_sizes.contains(&0) {
            return Err(Error::config(format!("band sizes must be positive, got {band_sizes:?}")));
        }
        Ok(BandPartition { band_sizes })
    }

    pub fn two_band(n1: usize, n2: usize) -> Result<Self> {
        Self::new(vec![n1, n2])
    }

    pub fn bands(&self) -> usize {
        self.band_sizes.len()
    }

    pub fn band_sizes(&self) -> &[usize] {
        &self.band_sizes
    }

    pub fn size(&self, a: usize) -> usize {
        self.band_sizes[a]
    }

    pub fn env_dim(&self) -> usize {
        self.band_sizes.iter().sum()
    }

    /// Environment basis positions belonging to band `a`.
    pub fn range(&self, a: usize) -> Range<usize> {
        let start: usize = self.band_sizes[..a].iter().sum();
        start..start + self.band_sizes[a]
    }

    pub fn projector(&self, a: usize) -> DMatrix<C64> {
        let dim = self.env_dim();
        let mut p = DMatrix::zeros(dim, dim);
        for k in self.range(a) {
            p[(k, k)] = ONE;
        }
        p
    }

    fn check_dim(&self, env_dim: usize) -> Result<()> {
        if env_dim != self.env_dim() {
            return Err(Error::config(format!(
                "partition covers {} environment levels but the operator has {}",
                self.env_dim(),
                env_dim
            )));
        }
        Ok(())
    }
}

/// Hermitian, unit-trace density matrix of system plus environment.
#[derive(Clone, Debug, PartialEq)]
pub struct TotalDensity {
    matrix: DMatrix<C64>,
}

impl TotalDensity {
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        env_dim_of(&matrix)?;
        let herm = (&matrix - matrix.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm > 1e-12 {
            return Err(Error::config(format!("density matrix is not Hermitian (deviation {herm:.3e})")));
        }
        let tr = matrix.trace();
        if (tr - ONE).norm() > 1e-12 {
            return Err(Error::config(format!("density matrix trace is {tr}, expected 1")));
        }
        Ok(TotalDensity { matrix })
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn env_dim(&self) -> usize {
        self.matrix.nrows() / 2
    }
}

fn env_dim_of(rho: &DMatrix<C64>) -> Result<usize> {
    let n = rho.nrows();
    if n != rho.ncols() || n == 0 || !n.is_multiple_of(2) {
        return Err(Error::config(format!(
            "composite operator must be square with even dimension, got {}x{}",
            rho.nrows(),
            rho.ncols()
        )));
    }
    if n / 2 > MAX_DENSE_ENV {
        return Err(Error::config(format!(
            "dense projections support environments up to {MAX_DENSE_ENV} levels, got {}",
            n / 2
        )));
    }
    Ok(n / 2)
}

/// `A (x) B` with the system factor first.
pub fn tensor(system: &Matrix2<C64>, env: &DMatrix<C64>) -> DMatrix<C64> {
    let sys = DMatrix::from_fn(2, 2, |i, j| system[(i, j)]);
    sys.kronecker(env)
}

/// `tr_E{(1 (x) X) rho}` for an environment operator `X`.
fn weighted_env_trace(rho: &DMatrix<C64>, env_dim: usize, rows: Range<usize>) -> Matrix2<C64> {
    Matrix2::from_fn(|i, j| rows.clone().map(|e| rho[(i * env_dim + e, j * env_dim + e)]).sum())
}

pub fn partial_trace_env(rho: &DMatrix<C64>) -> Result<DensityMatrix2> {
    let d = env_dim_of(rho)?;
    Ok(DensityMatrix2(weighted_env_trace(rho, d, 0..d)))
}

pub fn partial_trace_system(rho: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let d = env_dim_of(rho)?;
    Ok(DMatrix::from_fn(d, d, |e, f| rho[(e, f)] + rho[(d + e, d + f)]))
}

/// `P rho = (tr_E rho) (x) reference`.
pub fn project_standard(rho: &DMatrix<C64>, reference: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let d = env_dim_of(rho)?;
    if reference.nrows() != d || reference.ncols() != d {
        return Err(Error::config(format!(
            "reference state is {}x{} but the environment has {d} levels",
            reference.nrows(),
            reference.ncols()
        )));
    }
    let herm = (reference - reference.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if herm > 1e-12 || (reference.trace() - ONE).norm() > 1e-12 {
        return Err(Error::config("reference state must be Hermitian with unit trace"));
    }
    Ok(tensor(partial_trace_env(rho)?.matrix(), reference))
}

/// `P rho = sum_a tr_E{Pi_a rho} (x) Pi_a / N_a`.
pub fn project_correlated(rho: &DMatrix<C64>, partition: &BandPartition) -> Result<DMatrix<C64>> {
    let d = env_dim_of(rho)?;
    partition.check_dim(d)?;
    let mut out = DMatrix::zeros(2 * d, 2 * d);
    for a in 0..partition.bands() {
        let block = weighted_env_trace(rho, d, partition.range(a)) / C64::from(partition.size(a) as f64);
        for i in 0..2 {
            for j in 0..2 {
                for e in partition.range(a) {
                    out[(i * d + e, j * d + e)] = block[(i, j)];
                }
            }
        }
    }
    Ok(out)
}

/// `B_ija = tr{(|i><j| (x) Pi_a) rho}`.
pub fn relevant_values(rho: &DMatrix<C64>, partition: &BandPartition) -> Result<RelevantSet> {
    let d = env_dim_of(rho)?;
    partition.check_dim(d)?;
    let mut set = RelevantSet::zeros(partition.bands());
    for a in 0..partition.bands() {
        let block = weighted_env_trace(rho, d, partition.range(a));
        for i in 0..2 {
            for j in 0..2 {
                set.set(i, j, a, block[(j, i)]);
            }
        }
    }
    Ok(set)
}

/// `|i><j| (x) Pi_a`.
pub fn relevant_operator(i: usize, j: usize, a: usize, partition: &BandPartition) -> DMatrix<C64> {
    let mut sys = Matrix2::zeros();
    sys[(i, j)] = ONE;
    tensor(&sys, &partition.projector(a))
}

fn check_consistent(b: &RelevantSet, partition: &BandPartition) -> Result<()> {
    if b.bands() != partition.bands() {
        return Err(Error::config(format!(
            "relevant set has {} bands, partition has {}",
            b.bands(),
            partition.bands()
        )));
    }
    for a in 0..b.bands() {
        for i in 0..2 {
            if b.get(i, i, a).im.abs() > 1e-12 {
                return Err(Error::config(format!("B_{i}{i}{a} must be real")));
            }
        }
        if (b.get(0, 1, a) - b.get(1, 0, a).conj()).norm() > 1e-12 {
            return Err(Error::config(format!("B_01{a} and B_10{a} are not complex conjugates")));
        }
    }
    Ok(())
}

/// Hilbert-space-average state `alpha = sum_ija (B_jia / N_a) |i><j| (x) Pi_a`.
pub fn ham_average_state(b: &RelevantSet, partition: &BandPartition) -> Result<DMatrix<C64>> {
    check_consistent(b, partition)?;
    let d = partition.env_dim();
    if d > MAX_DENSE_ENV {
        return Err(Error::config(format!("dense projections support environments up to {MAX_DENSE_ENV} levels, got {d}")));
    }
    let mut out = DMatrix::zeros(2 * d, 2 * d);
    for a in 0..partition.bands() {
        let n = partition.size(a) as f64;
        for i in 0..2 {
            for j in 0..2 {
                let value = b.get(j, i, a) / n;
                for e in partition.range(a) {
                    out[(i * d + e, j * d + e)] = value;
                }
            }
        }
    }
    Ok(out)
}

/// Same state obtained from the Gram system `B_m = sum_n tr{B_m B_n} b_n`.
/// The Gram matrix pairs `(i, j, a)` with `(j, i, a)` with weight `N_a`; this
/// structure is checked before solving.
pub fn ham_average_state_gram(b: &RelevantSet, partition: &BandPartition) -> Result<DMatrix<C64>> {
    check_consistent(b, partition)?;
    let labels: Vec<(usize, usize, usize)> = (0..partition.bands())
        .flat_map(|a| (0..2).flat_map(move |i| (0..2).map(move |j| (i, j, a))))
        .collect();
    let ops: Vec<DMatrix<C64>> = labels.iter().map(|&(i, j, a)| relevant_operator(i, j, a, partition)).collect();
    let m = labels.len();
    let gram = DMatrix::from_fn(m, m, |r, c| (&ops[r] * &ops[c]).trace());
    for (r, &(i, j, a)) in labels.iter().enumerate() {
        for (c, &(l, k, bb)) in labels.iter().enumerate() {
            let expected = if j == l && i == k && a == bb { partition.size(a) as f64 } else { 0.0 };
            if (gram[(r, c)] - C64::from(expected)).norm() > 1e-12 {
                return Err(Error::Internal(format!(
                    "unexpected Gram entry at ({r}, {c}): {}",
                    gram[(r, c)]
                )));
            }
        }
    }
    let rhs = DVector::from_iterator(m, labels.iter().map(|&(i, j, a)| b.get(i, j, a)));
    let coeffs = gram
        .full_piv_lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Internal("singular Gram system".into()))?;
    let d = partition.env_dim();
    let mut out = DMatrix::zeros(2 * d, 2 * d);
    for (k, op) in ops.iter().enumerate() {
        out += op * coeffs[k];
    }
    Ok(out)
}

/// `L rho = -i [V, rho]`.
pub fn liouvillian(v: &DMatrix<C64>, rho: &DMatrix<C64>) -> DMatrix<C64> {
    let comm = v * rho - rho * v;
    comm * C64::new(0.0, -1.0)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    let mut ev: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Largest entry modulus of a matrix.
pub fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

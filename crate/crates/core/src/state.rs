//! Small reduced-state containers shared by the propagator, the projection
//! oracles and the approximate solvers.
//!
//! Index conventions: system level 0 is the lower level `|0>`, level 1 the
//! upper level `|1>`. Matrix elements are `rho_ij = <i|rho|j>`.

use nalgebra::Matrix2;

use crate::C64;

/// A 2x2 system density matrix, possibly un-normalized.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityMatrix2(pub Matrix2<C64>);

impl DensityMatrix2 {
    pub fn zero() -> Self {
        DensityMatrix2(Matrix2::zeros())
    }

    /// Hermitian matrix from its independent elements.
    pub fn from_elements(rho00: f64, rho01: C64, rho11: f64) -> Self {
        DensityMatrix2(Matrix2::new(
            C64::new(rho00, 0.0),
            rho01,
            rho01.conj(),
            C64::new(rho11, 0.0),
        ))
    }

    /// Normalized state with the given upper population and coherence.
    pub fn from_population(rho11: f64, rho01: C64) -> Self {
        Self::from_elements(1.0 - rho11, rho01, rho11)
    }

    pub fn matrix(&self) -> &Matrix2<C64> {
        &self.0
    }

    pub fn rho00(&self) -> f64 {
        self.0[(0, 0)].re
    }

    pub fn rho11(&self) -> f64 {
        self.0[(1, 1)].re
    }

    pub fn rho01(&self) -> C64 {
        self.0[(0, 1)]
    }

    pub fn trace(&self) -> f64 {
        (self.0[(0, 0)] + self.0[(1, 1)]).re
    }

    /// Largest entrywise deviation from Hermiticity.
    pub fn hermiticity_error(&self) -> f64 {
        let m = &self.0;
        let d = m - m.adjoint();
        d.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let a = self.rho00();
        let d = self.rho11();
        let b = 0.5 * (self.0[(0, 1)] + self.0[(1, 0)].conj());
        let mean = 0.5 * (a + d);
        let r = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
        [mean - r, mean + r]
    }

    pub fn scaled(&self, s: f64) -> Self {
        DensityMatrix2(self.0.scale(s))
    }

    /// Largest entrywise difference to `other`.
    pub fn max_abs_diff(&self, other: &DensityMatrix2) -> f64 {
        (self.0 - other.0).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

impl std::ops::Add for DensityMatrix2 {
    type Output = DensityMatrix2;
    fn add(self, rhs: Self) -> Self {
        DensityMatrix2(self.0 + rhs.0)
    }
}

/// The pair `rho_S^(1)`, `rho_S^(2)` of un-normalized system matrices
/// correlated with the lower and upper environment band.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConditionalDensities {
    pub rho1: DensityMatrix2,
    pub rho2: DensityMatrix2,
}

impl ConditionalDensities {
    /// All weight in the lower band.
    pub fn lower_band(rho: DensityMatrix2) -> Self {
        ConditionalDensities { rho1: rho, rho2: DensityMatrix2::zero() }
    }

    /// Reduced density matrix `rho1 + rho2`.
    pub fn total(&self) -> DensityMatrix2 {
        self.rho1 + self.rho2
    }

    /// Band occupations `tr{Pi_a rho}`.
    pub fn band_populations(&self) -> [f64; 2] {
        [self.rho1.trace(), self.rho2.trace()]
    }

    pub fn band(&self, a: usize) -> &DensityMatrix2 {
        match a {
            0 => &self.rho1,
            _ => &self.rho2,
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        ConditionalDensities { rho1: self.rho1.scaled(s), rho2: self.rho2.scaled(s) }
    }
}

impl std::ops::Add for ConditionalDensities {
    type Output = ConditionalDensities;
    fn add(self, rhs: Self) -> Self {
        ConditionalDensities { rho1: self.rho1 + rhs.rho1, rho2: self.rho2 + rhs.rho2 }
    }
}

/// Expectation values `B_ija = <|i><j| (x) Pi_a>` for a two-level system and
/// any number of environment bands. Bands are indexed from zero here; band
/// `a = 0` is the lower band.
#[derive(Clone, Debug, PartialEq)]
pub struct RelevantSet {
    bands: usize,
    values: Vec<C64>,
}

impl RelevantSet {
    pub fn zeros(bands: usize) -> Self {
        RelevantSet { bands, values: vec![C64::new(0.0, 0.0); 4 * bands] }
    }

    fn index(&self, i: usize, j: usize, a: usize) -> usize {
        debug_assert!(i < 2 && j < 2 && a < self.bands);
        (i * 2 + j) * self.bands + a
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn get(&self, i: usize, j: usize, a: usize) -> C64 {
        self.values[self.index(i, j, a)]
    }

    pub fn set(&mut self, i: usize, j: usize, a: usize, value: C64) {
        let k = self.index(i, j, a);
        self.values[k] = value;
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }

    /// `B_ija = rho_a[j][i]`.
    pub fn from_conditional(cd: &ConditionalDensities) -> Self {
        let mut set = RelevantSet::zeros(2);
        for a in 0..2 {
            let m = cd.band(a).matrix();
            for i in 0..2 {
                for j in 0..2 {
                    set.set(i, j, a, m[(j, i)]);
                }
            }
        }
        set
    }

    /// Conditional density of band `a`: `rho_a[i][j] = B_jia`.
    pub fn conditional(&self, a: usize) -> DensityMatrix2 {
        DensityMatrix2(Matrix2::from_fn(|i, j| self.get(j, i, a)))
    }

    /// Reduced density matrix `rho_ij = sum_a B_jia`.
    pub fn reduced(&self) -> DensityMatrix2 {
        DensityMatrix2(Matrix2::from_fn(|i, j| (0..self.bands).map(|a| self.get(j, i, a)).sum()))
    }

    /// Total probability `sum_ia B_iia`.
    pub fn total_population(&self) -> f64 {
        (0..self.bands)
            .flat_map(|a| (0..2).map(move |i| (i, a)))
            .map(|(i, a)| self.get(i, i, a).re)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalues_of_diagonal_and_pure_states() {
        let rho = DensityMatrix2::from_population(0.3, C64::new(0.0, 0.0));
        let ev = rho.eigenvalues();
        assert!((ev[0] - 0.3).abs() < 1e-15 && (ev[1] - 0.7).abs() < 1e-15);

        let pure = DensityMatrix2::from_population(0.5, C64::new(0.5, 0.0));
        let ev = pure.eigenvalues();
        assert!(ev[0].abs() < 1e-15 && (ev[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn relevant_set_reconstructs_reduced_density() {
        let cd = ConditionalDensities {
            rho1: DensityMatrix2::from_elements(0.1, C64::new(0.05, 0.02), 0.4),
            rho2: DensityMatrix2::from_elements(0.3, C64::new(-0.01, 0.03), 0.2),
        };
        let set = RelevantSet::from_conditional(&cd);
        assert!(set.reduced().max_abs_diff(&cd.total()) < 1e-15);
        assert!(set.conditional(1).max_abs_diff(&cd.rho2) < 1e-15);
        assert!((set.total_population() - 1.0).abs() < 1e-15);
        // B_ija is the transposed element
        assert_eq!(set.get(0, 1, 0), cd.rho1.matrix()[(1, 0)]);
    }
}

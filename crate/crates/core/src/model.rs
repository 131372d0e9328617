//! The two-band model: band energies, random couplings, initial environment
//! states and the interaction-picture coupling operator.
//!
//! Everything is expressed in the interaction picture, where only the
//! transition frequencies `omega(n1, n2) = de * (n2/N2 - n1/N1)` enter. The
//! gap between the bands never appears at runtime.
//!
//! Levels are labelled `1..=N` inside each band; the public accessors take
//! zero-based positions.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

/// Band-internal level labels start at this value.
pub const LEVEL_INDEX_BASE: usize = 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Number of levels in the lower band (`N1`).
    pub n1: usize,
    /// Number of levels in the upper band (`N2`).
    pub n2: usize,
    /// Band width `de`.
    pub band_width: f64,
    /// Overall coupling strength `lambda`.
    pub coupling: f64,
}

impl ModelParams {
    pub fn new(n1: usize, n2: usize, band_width: f64, coupling: f64) -> Result<Self> {
        let params = ModelParams { n1, n2, band_width, coupling };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n1 == 0 || self.n2 == 0 {
            return Err(Error::config(format!(
                "band sizes must be positive (n1 = {}, n2 = {})",
                self.n1, self.n2
            )));
        }
        if !(self.band_width > 0.0 && self.band_width.is_finite()) {
            return Err(Error::config(format!("band width must be positive, got {}", self.band_width)));
        }
        if !(self.coupling >= 0.0 && self.coupling.is_finite()) {
            return Err(Error::config(format!(
                "coupling strength must be nonnegative, got {}",
                self.coupling
            )));
        }
        Ok(())
    }

    /// Environment dimension `N1 + N2`.
    pub fn env_dim(&self) -> usize {
        self.n1 + self.n2
    }

    /// Estimate `lambda (sqrt(N1) + sqrt(N2))` of the spectral norm of the
    /// coupling operator.
    pub fn coupling_norm_estimate(&self) -> f64 {
        self.coupling * ((self.n1 as f64).sqrt() + (self.n2 as f64).sqrt())
    }

    /// Time after which the discrete spectrum starts to rephase.
    pub fn recurrence_time(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.n1.min(self.n2) as f64 / self.band_width
    }
}

/// Dimensionless couplings `c(n1, n2)`, a deterministic function of the
/// band sizes and the seed.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingMatrix {
    pub entries: DMatrix<C64>,
    pub seed: u64,
}

impl CouplingMatrix {
    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn cols(&self) -> usize {
        self.entries.ncols()
    }
}

/// Draws an `N1 x N2` matrix of independent complex Gaussians with
/// `<c> = 0`, `<c c> = 0` and `<|c|^2> = 1`.
///
/// Entries are drawn row by row (lower-band index outer), real part first,
/// from a ChaCha20 stream seeded with `seed`.
pub fn sample_couplings(n1: usize, n2: usize, seed: u64) -> Result<CouplingMatrix> {
    if n1 == 0 || n2 == 0 {
        return Err(Error::config(format!(
            "coupling matrix needs positive dimensions, got {n1} x {n2}"
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let row_major: Vec<C64> = (0..n1 * n2).map(|_| complex_gaussian(&mut rng)).collect();
    Ok(CouplingMatrix { entries: DMatrix::from_row_slice(n1, n2, &row_major), seed })
}

/// Complex Gaussian with variance 1/2 per quadrature.
pub(crate) fn complex_gaussian<R: rand::Rng>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

#[derive(Clone, Debug, PartialEq)]
pub struct TwoBandModel {
    pub params: ModelParams,
    pub couplings: CouplingMatrix,
    /// `de * n1 / N1` for `n1 = 1..=N1`.
    pub lower_energies: Vec<f64>,
    /// `de * n2 / N2` for `n2 = 1..=N2`.
    pub upper_energies: Vec<f64>,
}

fn band_energies(levels: usize, band_width: f64) -> Vec<f64> {
    (LEVEL_INDEX_BASE..LEVEL_INDEX_BASE + levels)
        .map(|n| band_width * n as f64 / levels as f64)
        .collect()
}

pub fn build_model(params: ModelParams, seed: u64) -> Result<TwoBandModel> {
    params.validate()?;
    let couplings = sample_couplings(params.n1, params.n2, seed)?;
    Ok(TwoBandModel {
        params,
        couplings,
        lower_energies: band_energies(params.n1, params.band_width),
        upper_energies: band_energies(params.n2, params.band_width),
    })
}

impl TwoBandModel {
    pub fn n1(&self) -> usize {
        self.params.n1
    }

    pub fn n2(&self) -> usize {
        self.params.n2
    }

    pub fn env_dim(&self) -> usize {
        self.params.env_dim()
    }

    /// `omega(n1, n2)` for zero-based positions.
    pub fn transition_frequency(&self, n1: usize, n2: usize) -> f64 {
        self.upper_energies[n2] - self.lower_energies[n1]
    }

    /// `B(t)` with entries `lambda c(n1,n2) exp(-i omega(n1,n2) t)`.
    pub fn interaction_coupling(&self, t: f64) -> DMatrix<C64> {
        let lambda = self.params.coupling;
        DMatrix::from_fn(self.n1(), self.n2(), |r, c| {
            let phase = C64::from_polar(1.0, -self.transition_frequency(r, c) * t);
            self.couplings.entries[(r, c)] * phase * lambda
        })
    }

    /// `B(t)` embedded as an operator on the full environment space
    /// (lower band first), mapping upper-band levels to lower-band levels.
    pub fn env_coupling_operator(&self, t: f64) -> DMatrix<C64> {
        let dim = self.env_dim();
        let mut op = DMatrix::zeros(dim, dim);
        op.view_mut((0, self.n1()), (self.n1(), self.n2()))
            .copy_from(&self.interaction_coupling(t));
        op
    }

    /// Dense interaction-picture Hamiltonian
    /// `V(t) = sigma_+ (x) B(t) + sigma_- (x) B(t)^dagger` on the composite
    /// space, index `sys * (N1 + N2) + env`.
    pub fn interaction_hamiltonian(&self, t: f64) -> DMatrix<C64> {
        let dim = self.env_dim();
        let b = self.env_coupling_operator(t);
        let mut v = DMatrix::zeros(2 * dim, 2 * dim);
        // sigma_+ = |1><0|: rows of the upper system level, columns of the lower
        v.view_mut((dim, 0), (dim, dim)).copy_from(&b);
        v.view_mut((0, dim), (dim, dim)).copy_from(&b.adjoint());
        v
    }
}

/// Normalized environment state; lower band first, then upper band.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvVector {
    pub amplitudes: Vec<C64>,
}

impl EnvVector {
    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Random superposition of lower-band levels with i.i.d. complex Gaussian
/// amplitudes, normalized. The upper band is left empty.
pub fn random_lower_band_state(model: &TwoBandModel, seed: u64) -> EnvVector {
    let n1 = model.n1();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut amplitudes: Vec<C64> = (0..n1).map(|_| complex_gaussian(&mut rng)).collect();
    let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for z in &mut amplitudes {
        *z /= norm;
    }
    amplitudes.resize(model.env_dim(), C64::new(0.0, 0.0));
    EnvVector { amplitudes }
}

/// Seeds used for one member of an ensemble.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RealizationSeeds {
    pub index: u64,
    pub coupling: u64,
    pub state: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seeds of realization `k`: a pure function of `(master_seed, k)`, so the
/// ensemble does not depend on how work is scheduled.
pub fn realization_seeds(master_seed: u64, k: u64) -> RealizationSeeds {
    let base = splitmix64(master_seed);
    RealizationSeeds {
        index: k,
        coupling: splitmix64(base ^ splitmix64(2 * k)),
        state: splitmix64(base ^ splitmix64(2 * k + 1)),
    }
}

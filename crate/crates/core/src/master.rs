//! Reduced-dynamics approximations for the spin: standard TCL2/TCL4, the
//! two-band rate equations obtained from the Hilbert-space average method
//! (HAM), correlated-projection TCL2 and TCL4, and a multiband HAM engine.
//!
//! Operators: `sigma_+ = |1><0|`, `sigma_- = |0><1|`, so `sigma_+ sigma_-`
//! projects onto the upper level.

use log::warn;
use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::correlations::{Kernel, MemoryIntegral, RateSet};
use crate::ode::integrate_on_grid;
use crate::state::{ConditionalDensities, DensityMatrix2, RelevantSet};
use crate::trajectory::{Record, Trajectory, TrajectoryMeta};
use crate::{Error, Result, C64};

const ZERO: C64 = C64::new(0.0, 0.0);

/// Step for the correlated and multiband solvers, in units of the inverse
/// total rate.
pub const RATE_STEP_FRACTION: f64 = 0.0025;
/// Upper bound on the step in memory mode, in units of `1/de`.
pub const KERNEL_STEP_FRACTION: f64 = 0.05;

/// Time-dependent rates of the standard fourth-order expansion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TclStandardRates {
    pub gamma1: f64,
    pub gamma2: f64,
}

impl TclStandardRates {
    pub fn from_rates(rates: &RateSet) -> Self {
        TclStandardRates { gamma1: rates.gamma1, gamma2: rates.gamma2 }
    }

    /// `Gamma(t) = g2 (1 - g1 t)`.
    pub fn gamma_t(&self, t: f64) -> f64 {
        self.gamma2 * (1.0 - self.gamma1 * t)
    }

    /// `tilde Gamma(t) = g1 g2 t`.
    pub fn gamma_tilde_t(&self, t: f64) -> f64 {
        self.gamma1 * self.gamma2 * t
    }
}

fn with_population(rho0: &DensityMatrix2, rho11: f64, coherence_decay: f64) -> DensityMatrix2 {
    DensityMatrix2::from_elements(rho0.rho00() + (rho0.rho11() - rho11), rho0.rho01() * coherence_decay, rho11)
}

pub fn tcl2_standard(rates: &RateSet, rho0: &DensityMatrix2, t: f64) -> DensityMatrix2 {
    let g2 = rates.gamma2;
    with_population(rho0, rho0.rho11() * (-g2 * t).exp(), (-0.5 * g2 * t).exp())
}

/// Diverges for `t > 2 / g1`; that is the documented behavior.
pub fn tcl4_standard(rates: &RateSet, rho0: &DensityMatrix2, t: f64) -> DensityMatrix2 {
    let (g1, g2) = (rates.gamma1, rates.gamma2);
    let exponent = -g2 * t + 0.5 * g1 * g2 * t * t;
    with_population(rho0, rho0.rho11() * exponent.exp(), (-0.5 * g2 * t).exp())
}

/// Closed-form solution of the two-band rate equations for an environment
/// initially confined to the lower band.
pub fn ham_two_band(rates: &RateSet, rho0: &DensityMatrix2, t: f64) -> DensityMatrix2 {
    let total = rates.total();
    if total == 0.0 {
        return *rho0;
    }
    let fraction = 1.0 + rates.gamma2 / total * (-total * t).exp_m1();
    with_population(rho0, rho0.rho11() * fraction, (-0.5 * rates.gamma2 * t).exp())
}

fn sigma_plus() -> Matrix2<C64> {
    Matrix2::new(ZERO, ZERO, C64::from(1.0), ZERO)
}

fn sigma_minus() -> Matrix2<C64> {
    sigma_plus().transpose()
}

fn upper_projector() -> Matrix2<C64> {
    Matrix2::new(ZERO, ZERO, ZERO, C64::from(1.0))
}

fn lower_projector() -> Matrix2<C64> {
    Matrix2::new(C64::from(1.0), ZERO, ZERO, ZERO)
}

fn anticommutator(a: &Matrix2<C64>, b: &Matrix2<C64>) -> Matrix2<C64> {
    a * b + b * a
}

fn unpack(y: &[C64], offset: usize) -> Matrix2<C64> {
    Matrix2::new(y[offset], y[offset + 1], y[offset + 2], y[offset + 3])
}

fn pack(m: &Matrix2<C64>, out: &mut [C64], offset: usize) {
    out[offset] = m[(0, 0)];
    out[offset + 1] = m[(0, 1)];
    out[offset + 2] = m[(1, 0)];
    out[offset + 3] = m[(1, 1)];
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("solver time must be finite and >= 0, got {t}")));
    }
    Ok(())
}

fn rate_step(total_rate: f64, t_end: f64) -> f64 {
    if total_rate > 0.0 {
        RATE_STEP_FRACTION / total_rate
    } else {
        t_end.max(1.0)
    }
}

/// RK4 solution of the time-local standard master equation
/// `drho/dt = G(t) D[sigma_-] rho + tG(t) D[sigma_+ sigma_-] rho`, used to
/// cross-check the closed forms. `fourth_order = false` keeps `G = g2`,
/// `tG = 0`.
pub fn tcl_standard_ode(rates: &RateSet, rho0: &DensityMatrix2, times: &[f64], fourth_order: bool) -> Result<Vec<DensityMatrix2>> {
    let tcl = TclStandardRates::from_rates(rates);
    let (sp, sm, p1) = (sigma_plus(), sigma_minus(), upper_projector());
    let mut y0 = [ZERO; 4];
    pack(rho0.matrix(), &mut y0, 0);
    let t_end = *times.last().unwrap_or(&0.0);
    let out = integrate_on_grid(&y0, times, rate_step(rates.total(), t_end), |t, y, dy| {
        let rho = unpack(y, 0);
        let (g, gt) = if fourth_order { (tcl.gamma_t(t), tcl.gamma_tilde_t(t)) } else { (tcl.gamma2, 0.0) };
        let anti = anticommutator(&p1, &rho) * C64::from(0.5);
        let d = (sm * rho * sp - anti) * C64::from(g) + (p1 * rho * p1 - anti) * C64::from(gt);
        pack(&d, dy, 0);
    })?;
    Ok(out.iter().map(|y| DensityMatrix2(unpack(y, 0))).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelatedMode {
    /// Constant rates.
    Markov,
    /// Rates multiplied by `2 int_0^t h`.
    Memory,
}

/// Checks that a correlated state lies in the range of the correlated
/// projection: both conditional densities Hermitian and positive, total
/// trace 1.
pub fn validate_correlated_state(state: &ConditionalDensities) -> Result<()> {
    for (a, rho) in [&state.rho1, &state.rho2].into_iter().enumerate() {
        if rho.hermiticity_error() > 1e-12 {
            return Err(Error::config(format!("conditional density of band {} is not Hermitian", a + 1)));
        }
        if rho.eigenvalues()[0] < -1e-12 {
            return Err(Error::config(format!("conditional density of band {} is not positive", a + 1)));
        }
    }
    let trace = state.total().trace();
    if (trace - 1.0).abs() > 1e-12 {
        return Err(Error::config(format!("correlated state has total trace {trace}, expected 1")));
    }
    Ok(())
}

fn correlated_trajectory(
    state0: &ConditionalDensities,
    times: &[f64],
    step: f64,
    method: &str,
    mut rhs: impl FnMut(f64, &Matrix2<C64>, &Matrix2<C64>) -> (Matrix2<C64>, Matrix2<C64>),
) -> Result<Trajectory> {
    validate_correlated_state(state0)?;
    let mut y0 = [ZERO; 8];
    pack(state0.rho1.matrix(), &mut y0, 0);
    pack(state0.rho2.matrix(), &mut y0, 4);
    let out = integrate_on_grid(&y0, times, step, |t, y, dy| {
        let (d1, d2) = rhs(t, &unpack(y, 0), &unpack(y, 4));
        pack(&d1, dy, 0);
        pack(&d2, dy, 4);
    })?;
    let records = out
        .iter()
        .map(|y| {
            Record::correlated(ConditionalDensities {
                rho1: DensityMatrix2(unpack(y, 0)),
                rho2: DensityMatrix2(unpack(y, 4)),
            })
        })
        .collect();
    Trajectory::new(times.to_vec(), records, TrajectoryMeta { method: method.into(), ..Default::default() })
}

/// Correlated-projection TCL2 for the pair `(rho^(1), rho^(2))`.
pub fn correlated_tcl2(
    kernel: &Kernel,
    rates: &RateSet,
    state0: &ConditionalDensities,
    times: &[f64],
    mode: CorrelatedMode,
) -> Result<Trajectory> {
    let t_end = *times.last().unwrap_or(&0.0);
    let mut step = rate_step(rates.total(), t_end);
    let memory = match mode {
        CorrelatedMode::Markov => None,
        CorrelatedMode::Memory => {
            step = step.min(KERNEL_STEP_FRACTION / kernel.band_width);
            Some(MemoryIntegral::new(*kernel, rates, t_end))
        }
    };
    let (sp, sm, p1, p0) = (sigma_plus(), sigma_minus(), upper_projector(), lower_projector());
    let (g1, g2) = (C64::from(rates.gamma1), C64::from(rates.gamma2));
    let half = C64::from(0.5);
    let method = match mode {
        CorrelatedMode::Markov => "ctcl2_markov",
        CorrelatedMode::Memory => "ctcl2_memory",
    };
    correlated_trajectory(state0, times, step, method, |t, r1, r2| {
        let factor = C64::from(memory.as_ref().map_or(1.0, |m| m.rate_factor(t)));
        let d1 = sp * r2 * sm * g1 - anticommutator(&p1, r1) * (g2 * half);
        let d2 = sm * r1 * sp * g2 - anticommutator(&p0, r2) * (g1 * half);
        (d1 * factor, d2 * factor)
    })
}

/// Correlated-projection TCL4 on a grid.
pub fn correlated_tcl4_grid(rates: &RateSet, state0: &ConditionalDensities, times: &[f64]) -> Result<Trajectory> {
    let f = rates
        .fourth_order
        .ok_or_else(|| Error::config("correlated TCL4 needs fourth-order rates"))?;
    let (sp, sm, p1, p0) = (sigma_plus(), sigma_minus(), upper_projector(), lower_projector());
    let c = C64::from;
    let total = f.population_rate().max(rates.total());
    let t_end = *times.last().unwrap_or(&0.0);
    correlated_trajectory(state0, times, rate_step(total, t_end), "ctcl4", |_, r1, r2| {
        let d1 = sp * r2 * sm * c(f.big_gamma1)
            - anticommutator(&p1, r1) * c(0.5 * f.big_gamma2)
            - p1 * r1 * p1 * c(f.big_gamma3);
        let d2 = sm * r1 * sp * c(f.tilde_gamma2)
            - anticommutator(&p0, r2) * c(0.5 * f.tilde_gamma1)
            - p0 * r2 * p0 * c(f.tilde_gamma3);
        (d1, d2)
    })
}

/// Correlated-projection TCL4 state at time `t`.
pub fn correlated_tcl4(rates: &RateSet, state0: &ConditionalDensities, t: f64) -> Result<ConditionalDensities> {
    check_time(t)?;
    let traj = correlated_tcl4_grid(rates, state0, &[t])?;
    Ok(traj.last().conditional.expect("correlated records carry band densities"))
}

/// Closed-form upper population of the correlated TCL2 solution with a
/// memory kernel, for a state initially in the lower band.
pub fn ctcl2_memory_population(rho11_0: f64, rates: &RateSet, gamma_t: f64) -> f64 {
    let total = rates.total();
    if total == 0.0 {
        return rho11_0;
    }
    rho11_0 * (rates.gamma1 / total + rates.gamma2 / total * (-gamma_t).exp())
}

/// Closed-form upper population of correlated TCL4 for a lower-band start.
pub fn ctcl4_population(rho11_0: f64, rates: &RateSet, t: f64) -> Result<f64> {
    let f = rates
        .fourth_order
        .ok_or_else(|| Error::config("correlated TCL4 needs fourth-order rates"))?;
    let total = rates.total();
    if total == 0.0 {
        return Ok(rho11_0);
    }
    Ok(rho11_0 * (rates.gamma1 / total + rates.gamma2 / total * (-f.population_rate() * t).exp()))
}

/// Rate tensor `gamma(i, j, a, b)` of the multiband rate equations, with
/// system levels `i, j` and zero-based bands `a, b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultibandRates {
    band_sizes: Vec<usize>,
    gamma: Vec<f64>,
}

impl MultibandRates {
    pub fn new(band_sizes: Vec<usize>) -> Result<Self> {
        if band_sizes.is_empty() || band_sizes.contains(&0) {
            return Err(Error::config(format!("band sizes must be positive, got {band_sizes:?}")));
        }
        let n = band_sizes.len();
        Ok(MultibandRates { band_sizes, gamma: vec![0.0; 4 * n * n] })
    }

    /// Two-band tensor equivalent to the rates `g1`, `g2`:
    /// `gamma(1,0,0,1) = g1`, `gamma(0,1,1,0) = g2`.
    pub fn two_band(rates: &RateSet, n1: usize, n2: usize) -> Result<Self> {
        let mut m = Self::new(vec![n1, n2])?;
        m.set(1, 0, 0, 1, rates.gamma1)?;
        m.set(0, 1, 1, 0, rates.gamma2)?;
        Ok(m)
    }

    pub fn bands(&self) -> usize {
        self.band_sizes.len()
    }

    pub fn band_sizes(&self) -> &[usize] {
        &self.band_sizes
    }

    fn index(&self, i: usize, j: usize, a: usize, b: usize) -> usize {
        let n = self.bands();
        ((i * 2 + j) * n + a) * n + b
    }

    pub fn get(&self, i: usize, j: usize, a: usize, b: usize) -> f64 {
        self.gamma[self.index(i, j, a, b)]
    }

    pub fn set(&mut self, i: usize, j: usize, a: usize, b: usize, value: f64) -> Result<()> {
        if i > 1 || j > 1 || a >= self.bands() || b >= self.bands() {
            return Err(Error::config(format!("rate index ({i}, {j}, {a}, {b}) out of range")));
        }
        if !(value >= 0.0 && value.is_finite()) {
            return Err(Error::config(format!("rates must be finite and nonnegative, got {value}")));
        }
        let k = self.index(i, j, a, b);
        self.gamma[k] = value;
        Ok(())
    }

    /// Largest `|N_b g(ijab) - N_a g(jiba)|`, relative to the largest
    /// weighted rate.
    pub fn detailed_symmetry_violation(&self) -> f64 {
        let n = self.bands();
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                for a in 0..n {
                    for b in 0..n {
                        let lhs = self.band_sizes[b] as f64 * self.get(i, j, a, b);
                        let rhs = self.band_sizes[a] as f64 * self.get(j, i, b, a);
                        worst = worst.max((lhs - rhs).abs());
                        scale = scale.max(lhs.abs());
                    }
                }
            }
        }
        if scale > 0.0 {
            worst / scale
        } else {
            0.0
        }
    }

    /// Total rate out of `(i, a)`: `sum_kb g(k, i, b, a)`.
    pub fn out_rate(&self, i: usize, a: usize) -> f64 {
        (0..2).flat_map(|k| (0..self.bands()).map(move |b| (k, b))).map(|(k, b)| self.get(k, i, b, a)).sum()
    }
}

/// Solution of the multiband rate equations on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct MultibandTrajectory {
    pub times: Vec<f64>,
    pub values: Vec<RelevantSet>,
    /// Whether the tensor passed the detailed-symmetry check.
    pub symmetric: bool,
    /// Largest `|sum_ia B_iia(t) - sum_ia B_iia(0)|` along the run.
    pub population_drift: f64,
}

impl MultibandTrajectory {
    pub fn reduced(&self) -> Vec<DensityMatrix2> {
        self.values.iter().map(RelevantSet::reduced).collect()
    }
}

fn check_relevant_initial(b0: &RelevantSet) -> Result<()> {
    for a in 0..b0.bands() {
        for i in 0..2 {
            if b0.get(i, i, a).im.abs() > 1e-12 {
                return Err(Error::config(format!("B_{i}{i}{a} must be real")));
            }
        }
    }
    let total = b0.total_population();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::config(format!("initial band populations sum to {total}, expected 1")));
    }
    Ok(())
}

/// Integrates
/// `dB_iia/dt = sum_jb g(ijab) (B_jjb - (N_b/N_a) B_iia)` and
/// `dB_ija/dt = -(1/2) B_ija sum_kb (g(kiba) + g(kjba))` for `i != j`.
pub fn ham_multiband(rates: &MultibandRates, b0: &RelevantSet, times: &[f64]) -> Result<MultibandTrajectory> {
    if b0.bands() != rates.bands() {
        return Err(Error::config(format!(
            "initial set has {} bands, rate tensor has {}",
            b0.bands(),
            rates.bands()
        )));
    }
    check_relevant_initial(b0)?;
    let violation = rates.detailed_symmetry_violation();
    let symmetric = violation <= 1e-9;
    if !symmetric {
        warn!("rate tensor violates detailed symmetry (relative {violation:.3e}); probability is not conserved");
    }
    let n = rates.bands();
    let sizes: Vec<f64> = rates.band_sizes().iter().map(|&s| s as f64).collect();
    let decay: Vec<f64> = (0..2).flat_map(|i| (0..n).map(move |a| (i, a))).map(|(i, a)| rates.out_rate(i, a)).collect();
    let max_rate = decay.iter().copied().fold(0.0, f64::max);
    let template = b0.clone();
    let t_end = *times.last().unwrap_or(&0.0);
    let out = integrate_on_grid(b0.values(), times, rate_step(max_rate, t_end), |_, y, dy| {
        let mut cur = template.clone();
        cur.values_mut().copy_from_slice(y);
        let mut der = RelevantSet::zeros(n);
        for a in 0..n {
            for i in 0..2 {
                let mut d = ZERO;
                for j in 0..2 {
                    for b in 0..n {
                        let g = rates.get(i, j, a, b);
                        if g != 0.0 {
                            d += (cur.get(j, j, b) - cur.get(i, i, a) * (sizes[b] / sizes[a])) * g;
                        }
                    }
                }
                der.set(i, i, a, d);
            }
            for (i, j) in [(0, 1), (1, 0)] {
                let rate = 0.5 * (decay[i * n + a] + decay[j * n + a]);
                der.set(i, j, a, -cur.get(i, j, a) * rate);
            }
        }
        dy.copy_from_slice(der.values());
    })?;
    let total0 = b0.total_population();
    let values: Vec<RelevantSet> = out
        .into_iter()
        .map(|y| {
            let mut set = template.clone();
            set.values_mut().copy_from_slice(&y);
            set
        })
        .collect();
    let population_drift = values.iter().map(|v| (v.total_population() - total0).abs()).fold(0.0, f64::max);
    if !symmetric {
        warn!("multiband run: total population drifted by {population_drift:.3e}");
    }
    Ok(MultibandTrajectory { times: times.to_vec(), values, symmetric, population_drift })
}

//! Exact interaction-picture propagation of pure states of the composite
//! system, and extraction of reduced observables.
//!
//! The interaction `V(t) = sigma_+ (x) B(t) + h.c.` only connects the bright
//! states `|1,n1>` and `|0,n2>`. The dark states `|0,n1>` and `|1,n2>` are
//! annihilated by `V(t)` and never populated, so the default propagation
//! path stores the `N1 + N2` bright amplitudes and keeps the dark ones fixed.
//!
//! The phases of `B(t)` factorize,
//! `exp(-i omega(n1,n2) t) = exp(i e1(n1) t) * exp(-i e2(n2) t)`,
//! so every derivative evaluation costs a single pass over the coupling
//! matrix.

use log::warn;
use nalgebra::{DMatrix, DVector, Matrix2};

use crate::model::{EnvVector, ModelParams, TwoBandModel};
use crate::ode::{self, Rk4};
use crate::state::{ConditionalDensities, DensityMatrix2, RelevantSet};
use crate::trajectory::{Record, Trajectory, TrajectoryMeta};
use crate::{Error, Result, C64};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Pure state of the composite system, index `sys * (N1 + N2) + env`.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    amplitudes: Vec<C64>,
    env_dim: usize,
}

impl PureState {
    /// `(s0 |0> + s1 |1>) (x) |chi>`.
    pub fn product(system: [C64; 2], env: &EnvVector) -> Self {
        let env_dim = env.amplitudes.len();
        let amplitudes = system
            .iter()
            .flat_map(|s| env.amplitudes.iter().map(move |e| s * e))
            .collect();
        PureState { amplitudes, env_dim }
    }

    pub fn from_amplitudes(amplitudes: Vec<C64>, env_dim: usize) -> Result<Self> {
        if amplitudes.len() != 2 * env_dim {
            return Err(Error::config(format!(
                "state has {} amplitudes, expected {}",
                amplitudes.len(),
                2 * env_dim
            )));
        }
        Ok(PureState { amplitudes, env_dim })
    }

    pub fn env_dim(&self) -> usize {
        self.env_dim
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn amplitude(&self, sys: usize, env: usize) -> C64 {
        self.amplitudes[sys * self.env_dim + env]
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SectorMode {
    /// Propagate only the bright amplitudes; dark amplitudes stay fixed.
    #[default]
    Restricted,
    /// Propagate all `2 (N1 + N2)` amplitudes with dense environment operators.
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegratorOptions {
    /// Largest allowed step; `None` selects [`default_step`].
    pub max_step: Option<f64>,
    /// Allowed `| ||psi(t)|| - ||psi(0)|| |` before the run is rejected.
    pub norm_tolerance: f64,
    pub sector: SectorMode,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions { max_step: None, norm_tolerance: 1e-9, sector: SectorMode::Restricted }
    }
}

/// `min(0.05 / de, 0.1 / v)` with `v = lambda (sqrt N1 + sqrt N2)`.
pub fn default_step(params: &ModelParams) -> f64 {
    let phase_limit = 0.05 / params.band_width;
    let v = params.coupling_norm_estimate();
    if v > 0.0 {
        phase_limit.min(0.1 / v)
    } else {
        phase_limit
    }
}

/// Bright-sector derivative `da = -i B(t) b`, `db = -i B(t)^dagger a`.
struct SectorKernel<'a> {
    n1: usize,
    n2: usize,
    // lambda * c, row-major, split into real and imaginary parts
    cr: Vec<f64>,
    ci: Vec<f64>,
    lower: &'a [f64],
    upper: &'a [f64],
    p1: Vec<C64>,
    p2: Vec<C64>,
    xr: Vec<f64>,
    xi: Vec<f64>,
    zr: Vec<f64>,
    zi: Vec<f64>,
    phase_time: f64,
}

impl<'a> SectorKernel<'a> {
    fn new(model: &'a TwoBandModel) -> Self {
        let (n1, n2) = (model.n1(), model.n2());
        let lambda = model.params.coupling;
        let mut cr = Vec::with_capacity(n1 * n2);
        let mut ci = Vec::with_capacity(n1 * n2);
        for r in 0..n1 {
            for c in 0..n2 {
                let z = model.couplings.entries[(r, c)] * lambda;
                cr.push(z.re);
                ci.push(z.im);
            }
        }
        SectorKernel {
            n1,
            n2,
            cr,
            ci,
            lower: &model.lower_energies,
            upper: &model.upper_energies,
            p1: vec![ZERO; n1],
            p2: vec![ZERO; n2],
            xr: vec![0.0; n2],
            xi: vec![0.0; n2],
            zr: vec![0.0; n2],
            zi: vec![0.0; n2],
            phase_time: f64::NAN,
        }
    }

    fn update_phases(&mut self, t: f64) {
        if t == self.phase_time {
            return;
        }
        for (p, e) in self.p1.iter_mut().zip(self.lower) {
            *p = C64::from_polar(1.0, e * t);
        }
        for (p, e) in self.p2.iter_mut().zip(self.upper) {
            *p = C64::from_polar(1.0, e * t);
        }
        self.phase_time = t;
    }

    fn apply(&mut self, t: f64, y: &[C64], dy: &mut [C64]) {
        let (n1, n2) = (self.n1, self.n2);
        self.update_phases(t);
        let (a, b) = y.split_at(n1);
        let (da, db) = dy.split_at_mut(n1);

        for j in 0..n2 {
            let x = self.p2[j].conj() * b[j];
            self.xr[j] = x.re;
            self.xi[j] = x.im;
        }
        self.zr.fill(0.0);
        self.zi.fill(0.0);

        let (xr, xi) = (&self.xr[..n2], &self.xi[..n2]);
        let (zr, zi) = (&mut self.zr[..n2], &mut self.zi[..n2]);
        for i in 0..n1 {
            let u = self.p1[i].conj() * a[i];
            let row_r = &self.cr[i * n2..(i + 1) * n2];
            let row_i = &self.ci[i * n2..(i + 1) * n2];
            let (sr, si) = fused_row(row_r, row_i, xr, xi, u, zr, zi);
            // -i * p1 * y
            let yi = C64::new(sr, si) * self.p1[i];
            da[i] = C64::new(yi.im, -yi.re);
        }
        for j in 0..n2 {
            let w = C64::new(self.zr[j], self.zi[j]) * self.p2[j];
            db[j] = C64::new(w.im, -w.re);
        }
    }
}

/// Returns `sum_j C[j] x[j]` and accumulates `z[j] += conj(C[j]) u` in the
/// same pass. Four interleaved accumulators keep the summation order fixed.
#[inline]
fn fused_row(
    cr: &[f64],
    ci: &[f64],
    xr: &[f64],
    xi: &[f64],
    u: C64,
    zr: &mut [f64],
    zi: &mut [f64],
) -> (f64, f64) {
    let n = cr.len();
    let (cr, ci, xr, xi) = (&cr[..n], &ci[..n], &xr[..n], &xi[..n]);
    let (zr, zi) = (&mut zr[..n], &mut zi[..n]);
    let mut acc_r = [0.0f64; 4];
    let mut acc_i = [0.0f64; 4];
    let full = n - n % 4;
    let mut j = 0;
    while j < full {
        for l in 0..4 {
            let (a, b) = (cr[j + l], ci[j + l]);
            let (p, q) = (xr[j + l], xi[j + l]);
            acc_r[l] += a * p - b * q;
            acc_i[l] += a * q + b * p;
            zr[j + l] += a * u.re + b * u.im;
            zi[j + l] += a * u.im - b * u.re;
        }
        j += 4;
    }
    for k in full..n {
        let (a, b) = (cr[k], ci[k]);
        acc_r[0] += a * xr[k] - b * xi[k];
        acc_i[0] += a * xi[k] + b * xr[k];
        zr[k] += a * u.re + b * u.im;
        zi[k] += a * u.im - b * u.re;
    }
    (
        (acc_r[0] + acc_r[1]) + (acc_r[2] + acc_r[3]),
        (acc_i[0] + acc_i[1]) + (acc_i[2] + acc_i[3]),
    )
}

/// Full-space derivative with dense environment operators.
fn full_derivative(model: &TwoBandModel, t: f64, y: &[C64], dy: &mut [C64]) {
    let dim = model.env_dim();
    let b = model.env_coupling_operator(t);
    let psi0 = DVector::from_column_slice(&y[..dim]);
    let psi1 = DVector::from_column_slice(&y[dim..]);
    // sigma_+ (x) B takes the lower system level to the upper one
    let up = &b * &psi0;
    let down = b.adjoint() * &psi1;
    let minus_i = C64::new(0.0, -1.0);
    for e in 0..dim {
        dy[e] = minus_i * down[e];
        dy[dim + e] = minus_i * up[e];
    }
}

/// Evolves `psi0` (the state at `t = 0`) and records observables at every
/// grid time.
pub fn evolve(
    model: &TwoBandModel,
    psi0: &PureState,
    times: &[f64],
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    ode::validate_grid(times)?;
    if psi0.env_dim() != model.env_dim() {
        return Err(Error::config(format!(
            "state environment dimension {} does not match model ({})",
            psi0.env_dim(),
            model.env_dim()
        )));
    }
    let norm0 = psi0.norm();
    if (norm0 - 1.0).abs() > opts.norm_tolerance {
        return Err(Error::config(format!("initial state must be normalized, norm = {norm0}")));
    }
    let max_step = opts.max_step.unwrap_or_else(|| default_step(&model.params));
    ode::validate_step(max_step)?;
    let t_end = *times.last().expect("validated grid");
    if t_end > 0.5 * model.params.recurrence_time() {
        warn!(
            "t_max = {t_end} exceeds half the recurrence time {:.1}; finite-size revivals may appear",
            model.params.recurrence_time()
        );
    }

    let (n1, dim) = (model.n1(), model.env_dim());
    let record = |psi: &PureState, t: f64| -> Result<Record> {
        let norm = psi.norm();
        let drift = (norm - norm0).abs();
        if !(drift <= opts.norm_tolerance) {
            return Err(Error::Accuracy { drift, time: t, tolerance: opts.norm_tolerance });
        }
        let cd = conditional_densities(model, psi);
        Ok(Record { rho: cd.total(), conditional: Some(cd), norm: norm * norm })
    };

    let mut records = Vec::with_capacity(times.len());
    match opts.sector {
        SectorMode::Restricted => {
            let mut kernel = SectorKernel::new(model);
            let mut full = psi0.amplitudes.clone();
            let mut y: Vec<C64> = full[dim..dim + n1]
                .iter()
                .chain(&full[n1..dim])
                .copied()
                .collect();
            let mut rk = Rk4::new(y.len());
            let mut f = |t: f64, y: &[C64], dy: &mut [C64]| kernel.apply(t, y, dy);
            let mut t = 0.0;
            for &target in times {
                advance(&mut rk, &mut f, &mut y, &mut t, target, max_step);
                full[dim..dim + n1].copy_from_slice(&y[..n1]);
                full[n1..dim].copy_from_slice(&y[n1..]);
                let psi = PureState { amplitudes: full.clone(), env_dim: dim };
                records.push(record(&psi, target)?);
            }
        }
        SectorMode::Full => {
            let mut y = psi0.amplitudes.clone();
            let mut rk = Rk4::new(y.len());
            let mut f = |t: f64, y: &[C64], dy: &mut [C64]| full_derivative(model, t, y, dy);
            let mut t = 0.0;
            for &target in times {
                advance(&mut rk, &mut f, &mut y, &mut t, target, max_step);
                let psi = PureState { amplitudes: y.clone(), env_dim: dim };
                records.push(record(&psi, target)?);
            }
        }
    }

    Trajectory::new(
        times.to_vec(),
        records,
        TrajectoryMeta { method: "exact".into(), params: Some(model.params), seeds: Vec::new() },
    )
}

fn advance<F>(rk: &mut Rk4, f: &mut F, y: &mut [C64], t: &mut f64, target: f64, max_step: f64)
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    let n = ode::substeps(target - *t, max_step);
    if n > 0 {
        let h = (target - *t) / n as f64;
        let start = *t;
        for s in 0..n {
            rk.step(f, start + s as f64 * h, h, y);
        }
    }
    *t = target;
}

fn partial_trace_range(psi: &PureState, range: std::ops::Range<usize>) -> DensityMatrix2 {
    let dim = psi.env_dim;
    let (lower, upper) = psi.amplitudes.split_at(dim);
    let mut m = Matrix2::<C64>::zeros();
    for e in range {
        let (p0, p1) = (lower[e], upper[e]);
        m[(0, 0)] += p0 * p0.conj();
        m[(0, 1)] += p0 * p1.conj();
        m[(1, 1)] += p1 * p1.conj();
    }
    m[(1, 0)] = m[(0, 1)].conj();
    DensityMatrix2(m)
}

/// `rho_ij = sum_e psi(i,e) psi*(j,e)`.
pub fn reduced_density(model: &TwoBandModel, psi: &PureState) -> DensityMatrix2 {
    partial_trace_range(psi, 0..model.env_dim())
}

/// `rho_a = tr_E{Pi_a |psi><psi|}` for both bands.
pub fn conditional_densities(model: &TwoBandModel, psi: &PureState) -> ConditionalDensities {
    let n1 = model.n1();
    ConditionalDensities {
        rho1: partial_trace_range(psi, 0..n1),
        rho2: partial_trace_range(psi, n1..model.env_dim()),
    }
}

/// `B_ija = <psi| |i><j| (x) Pi_a |psi>`.
pub fn relevant_expectations(model: &TwoBandModel, psi: &PureState) -> RelevantSet {
    RelevantSet::from_conditional(&conditional_densities(model, psi))
}

/// Dense `|psi><psi|` on the composite space.
pub fn density_operator(psi: &PureState) -> DMatrix<C64> {
    let v = DVector::from_column_slice(&psi.amplitudes);
    &v * v.adjoint()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_model, random_lower_band_state};

    fn small_model(lambda: f64) -> TwoBandModel {
        build_model(ModelParams::new(4, 5, 0.5, lambda).unwrap(), 3).unwrap()
    }

    fn basis(model: &TwoBandModel, terms: &[(usize, usize, C64)]) -> PureState {
        let dim = model.env_dim();
        let mut amps = vec![ZERO; 2 * dim];
        for &(s, e, c) in terms {
            amps[s * dim + e] = c;
        }
        PureState::from_amplitudes(amps, dim).unwrap()
    }

    #[test]
    fn product_state_observables() {
        let m = small_model(0.01);
        let chi = random_lower_band_state(&m, 1);
        let one = C64::new(1.0, 0.0);
        let psi = PureState::product([ZERO, one], &chi);
        let rho = reduced_density(&m, &psi);
        assert!(rho.max_abs_diff(&DensityMatrix2::from_population(1.0, ZERO)) < 1e-14);
        let cd = conditional_densities(&m, &psi);
        assert!(cd.rho1.max_abs_diff(&rho) < 1e-14);
        assert!(cd.rho2.max_abs_diff(&DensityMatrix2::zero()) < 1e-14);
        let b = relevant_expectations(&m, &psi);
        assert!((b.get(1, 1, 0) - one).norm() < 1e-14);
        for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            assert_eq!(b.get(i, j, 1), ZERO);
        }

        let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let psi = PureState::product([h, h], &chi);
        let rho = reduced_density(&m, &psi);
        for z in rho.matrix().iter() {
            assert!((z - C64::new(0.5, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn orthogonal_environment_kills_coherence() {
        let m = small_model(0.01);
        let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        // (|1,n1=0> + |0,n2=0>)/sqrt2
        let psi = basis(&m, &[(1, 0, h), (0, m.n1(), h)]);
        let rho = reduced_density(&m, &psi);
        assert!(rho.max_abs_diff(&DensityMatrix2::from_population(0.5, ZERO)) < 1e-15);
        let cd = conditional_densities(&m, &psi);
        assert!(cd.rho1.max_abs_diff(&DensityMatrix2::from_elements(0.0, ZERO, 0.5)) < 1e-15);
        assert!(cd.rho2.max_abs_diff(&DensityMatrix2::from_elements(0.5, ZERO, 0.0)) < 1e-15);
        let b = relevant_expectations(&m, &psi);
        let total = b.get(0, 0, 0) + b.get(1, 1, 0) + b.get(0, 0, 1) + b.get(1, 1, 1);
        assert!((total.re - psi.norm().powi(2)).abs() < 1e-15);
    }

    #[test]
    fn zero_coupling_freezes_state() {
        let m = small_model(0.0);
        let chi = random_lower_band_state(&m, 4);
        let s = C64::new(0.6, 0.0);
        let psi0 = PureState::product([s, C64::new(0.0, 0.8)], &chi);
        let times: Vec<f64> = (0..5).map(|k| k as f64 * 3.0).collect();
        for sector in [SectorMode::Restricted, SectorMode::Full] {
            let opts = IntegratorOptions { sector, ..Default::default() };
            let traj = evolve(&m, &psi0, &times, &opts).unwrap();
            let rho0 = reduced_density(&m, &psi0);
            for r in &traj.records {
                assert!(r.rho.max_abs_diff(&rho0) < 1e-15);
            }
        }
    }

    #[test]
    fn restricted_and_full_paths_agree() {
        let m = small_model(0.05);
        let chi = random_lower_band_state(&m, 8);
        let psi0 = PureState::product([C64::new(0.6, 0.0), C64::new(0.0, 0.8)], &chi);
        let times: Vec<f64> = (1..=10).map(|k| k as f64 * 2.0).collect();
        let a = evolve(&m, &psi0, &times, &IntegratorOptions::default()).unwrap();
        let opts = IntegratorOptions { sector: SectorMode::Full, ..Default::default() };
        let b = evolve(&m, &psi0, &times, &opts).unwrap();
        for (x, y) in a.records.iter().zip(&b.records) {
            assert!(x.rho.max_abs_diff(&y.rho) < 1e-12);
        }
    }

    #[test]
    fn bad_inputs_rejected() {
        let m = small_model(0.01);
        let chi = random_lower_band_state(&m, 1);
        let psi = PureState::product([ZERO, C64::new(1.0, 0.0)], &chi);
        let opts = IntegratorOptions::default();
        assert!(matches!(evolve(&m, &psi, &[1.0, 0.5], &opts), Err(Error::Config(_))));
        let bad = IntegratorOptions { max_step: Some(-1.0), ..opts };
        assert!(matches!(evolve(&m, &psi, &[1.0], &bad), Err(Error::Config(_))));
        let unnormalized = PureState::product([ZERO, C64::new(2.0, 0.0)], &chi);
        assert!(matches!(evolve(&m, &unnormalized, &[1.0], &opts), Err(Error::Config(_))));
    }

    #[test]
    fn coarse_step_trips_norm_monitor() {
        let m = build_model(ModelParams::new(6, 6, 0.5, 0.5).unwrap(), 2).unwrap();
        let chi = random_lower_band_state(&m, 1);
        let psi = PureState::product([ZERO, C64::new(1.0, 0.0)], &chi);
        let opts = IntegratorOptions { max_step: Some(1.0), ..Default::default() };
        match evolve(&m, &psi, &[20.0], &opts) {
            Err(Error::Accuracy { drift, .. }) => assert!(drift > 1e-9),
            other => panic!("expected accuracy error, got {other:?}"),
        }
    }

    #[test]
    fn default_step_formula() {
        let p = ModelParams::new(500, 500, 0.5, 5e-4).unwrap();
        assert!((default_step(&p) - 0.1).abs() < 1e-15);
        let strong = ModelParams::new(500, 500, 0.5, 0.05).unwrap();
        let v = 0.05 * 2.0 * 500f64.sqrt();
        assert!((default_step(&strong) - 0.1 / v).abs() < 1e-15);
        let free = ModelParams::new(5, 5, 2.0, 0.0).unwrap();
        assert_eq!(default_step(&free), 0.025);
    }
}

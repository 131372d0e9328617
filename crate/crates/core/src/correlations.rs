//! Environmental correlation kernels, Golden-Rule rates, the memory
//! integral `Gamma(t)` and correlators measured on sampled coupling matrices.
//!
//! Both kernels are normalized so that the one-sided integral
//! `int_0^inf h(tau) dtau` equals 1/2. Rates built from them therefore carry
//! the factor 2 explicitly: `2 (g1 + g2) int_0^inf h = g1 + g2`.

use std::fmt;
use std::str::FromStr;

use gauss_quad::GaussLegendre;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::model::{build_model, sample_couplings, ModelParams, TwoBandModel};
use crate::parallel::map_indexed;
use crate::{Error, Result, C64};

/// Largest band size accepted by the dense correlator evaluations.
pub const MAX_DENSE_BAND: usize = 64;

const PANEL_WIDTH: f64 = 0.5; // in units of 1/de
const PANEL_ORDER: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    /// `(de/2pi) sin^2(de tau/2) / (de tau/2)^2`, constant density of states.
    Sinc2,
    /// `(de/2) exp(-de |tau|)`.
    Exponential,
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelKind::Sinc2 => "sinc2",
            KernelKind::Exponential => "exponential",
        })
    }
}

impl FromStr for KernelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "sinc2" => Ok(KernelKind::Sinc2),
            "exponential" | "exp" => Ok(KernelKind::Exponential),
            other => Err(Error::config(format!("unknown kernel kind {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub kind: KernelKind,
    pub band_width: f64,
}

impl Kernel {
    pub fn new(kind: KernelKind, band_width: f64) -> Result<Self> {
        if !(band_width > 0.0 && band_width.is_finite()) {
            return Err(Error::config(format!("kernel band width must be positive, got {band_width}")));
        }
        Ok(Kernel { kind, band_width })
    }

    pub fn h(&self, tau: f64) -> f64 {
        kernel_h(self, tau)
    }
}

pub fn kernel_h(kernel: &Kernel, tau: f64) -> f64 {
    let de = kernel.band_width;
    match kernel.kind {
        KernelKind::Sinc2 => {
            let x = 0.5 * de * tau;
            let s = if x.abs() < 1e-4 {
                1.0 - x * x / 3.0
            } else {
                (x.sin() / x).powi(2)
            };
            de / (2.0 * std::f64::consts::PI) * s
        }
        KernelKind::Exponential => 0.5 * de * (-de * tau.abs()).exp(),
    }
}

/// Rates of the fourth-order correlated-projection equations, derived with
/// the exponential kernel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourthOrderRates {
    pub big_gamma1: f64,
    pub big_gamma2: f64,
    pub big_gamma3: f64,
    pub tilde_gamma1: f64,
    pub tilde_gamma2: f64,
    pub tilde_gamma3: f64,
}

impl FourthOrderRates {
    pub fn new(gamma1: f64, gamma2: f64, band_width: f64) -> Self {
        let de = band_width;
        let sum = gamma1 + gamma2;
        let third = 3.0 * gamma1 * gamma2 / (4.0 * de);
        FourthOrderRates {
            big_gamma1: gamma1 * (1.0 + sum / (2.0 * de)),
            big_gamma2: gamma2 * (1.0 + (2.0 * gamma2 - gamma1) / (4.0 * de)),
            big_gamma3: third,
            tilde_gamma1: gamma1 * (1.0 + (2.0 * gamma1 - gamma2) / (4.0 * de)),
            tilde_gamma2: gamma2 * (1.0 + sum / (2.0 * de)),
            tilde_gamma3: third,
        }
    }

    /// Population relaxation rate `Gamma_1 + tilde Gamma_2`.
    pub fn population_rate(&self) -> f64 {
        self.big_gamma1 + self.tilde_gamma2
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateSet {
    /// Rate into the lower band, `2 pi lambda^2 N1 / de`.
    pub gamma1: f64,
    /// Rate into the upper band, `2 pi lambda^2 N2 / de`.
    pub gamma2: f64,
    pub fourth_order: Option<FourthOrderRates>,
}

impl RateSet {
    pub fn total(&self) -> f64 {
        self.gamma1 + self.gamma2
    }

    pub fn with_fourth_order(mut self, band_width: f64) -> Self {
        self.fourth_order = Some(FourthOrderRates::new(self.gamma1, self.gamma2, band_width));
        self
    }

    /// `gamma1 / (gamma1 + gamma2)`; 1 when both rates vanish.
    pub fn stationary_fraction(&self) -> f64 {
        let total = self.total();
        if total > 0.0 {
            self.gamma1 / total
        } else {
            1.0
        }
    }
}

pub fn golden_rule_rates(params: &ModelParams) -> RateSet {
    let scale = 2.0 * std::f64::consts::PI * params.coupling * params.coupling / params.band_width;
    RateSet { gamma1: scale * params.n1 as f64, gamma2: scale * params.n2 as f64, fourth_order: None }
}

/// Cumulative integrals `I0(t) = int_0^t h` and `I1(t) = int_0^t tau h`,
/// tabulated on Gauss-Legendre panels of width `0.5 / de`.
pub struct KernelIntegrals {
    kernel: Kernel,
    panel: f64,
    rule: GaussLegendre,
    zeroth: Vec<f64>,
    first: Vec<f64>,
}

impl KernelIntegrals {
    /// Tabulates panel boundaries up to `t_max`; later times are still
    /// evaluated correctly, just without the table.
    pub fn new(kernel: Kernel, t_max: f64) -> Self {
        let panel = PANEL_WIDTH / kernel.band_width;
        let rule = GaussLegendre::new(PANEL_ORDER).expect("fixed valid order");
        let mut table = KernelIntegrals { kernel, panel, rule, zeroth: vec![0.0], first: vec![0.0] };
        let panels = (t_max.max(0.0) / panel).ceil() as usize;
        for k in 0..panels {
            let (d0, d1) = table.panel_integrals(k as f64 * panel, (k + 1) as f64 * panel);
            table.zeroth.push(table.zeroth[k] + d0);
            table.first.push(table.first[k] + d1);
        }
        table
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    fn panel_integrals(&self, a: f64, b: f64) -> (f64, f64) {
        let h = |t: f64| kernel_h(&self.kernel, t);
        (self.rule.integrate(a, b, h), self.rule.integrate(a, b, |t| t * h(t)))
    }

    /// `(I0(t), I1(t))` for `t >= 0`.
    pub fn cumulative(&self, t: f64) -> (f64, f64) {
        let k = ((t / self.panel).floor() as usize).min(self.zeroth.len() - 1);
        let (mut i0, mut i1) = (self.zeroth[k], self.first[k]);
        let mut start = k as f64 * self.panel;
        while start + self.panel <= t {
            let (d0, d1) = self.panel_integrals(start, start + self.panel);
            i0 += d0;
            i1 += d1;
            start += self.panel;
        }
        if t > start {
            let (d0, d1) = self.panel_integrals(start, t);
            i0 += d0;
            i1 += d1;
        }
        (i0, i1)
    }

    /// `int_0^t h(tau) dtau`.
    pub fn integral(&self, t: f64) -> f64 {
        self.cumulative(t).0
    }

    /// `int_0^t dt1 int_0^t1 dt2 h(t1 - t2) = int_0^t (t - tau) h(tau) dtau`.
    pub fn double_integral(&self, t: f64) -> f64 {
        let (i0, i1) = self.cumulative(t);
        t * i0 - i1
    }
}

/// `Gamma(t) = 2 (g1 + g2) int_0^t dt1 int_0^t1 dt2 h(t1 - t2)` together with
/// its derivative factor `2 int_0^t h`.
pub struct MemoryIntegral {
    integrals: KernelIntegrals,
    total_rate: f64,
}

impl MemoryIntegral {
    pub fn new(kernel: Kernel, rates: &RateSet, t_max: f64) -> Self {
        MemoryIntegral { integrals: KernelIntegrals::new(kernel, t_max), total_rate: rates.total() }
    }

    pub fn gamma(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("memory integral needs t >= 0, got {t}")));
        }
        Ok(2.0 * self.total_rate * self.integrals.double_integral(t))
    }

    /// `2 int_0^t h = (dGamma/dt) / (g1 + g2)`, which tends to 1.
    pub fn rate_factor(&self, t: f64) -> f64 {
        2.0 * self.integrals.integral(t.max(0.0))
    }
}

pub fn memory_integral(kernel: &Kernel, rates: &RateSet, t: f64) -> Result<f64> {
    MemoryIntegral::new(*kernel, rates, t.max(0.0)).gamma(t)
}

/// `f2(tau) = (lambda^2 / N1) sum |c|^2 exp(-i omega tau)` for one model.
pub fn two_point_single(model: &TwoBandModel, tau: f64) -> C64 {
    let lambda2 = model.params.coupling * model.params.coupling;
    let upper: Vec<C64> = model.upper_energies.iter().map(|e| C64::from_polar(1.0, -e * tau)).collect();
    let mut total = C64::new(0.0, 0.0);
    for (r, e1) in model.lower_energies.iter().enumerate() {
        let row: C64 = (0..model.n2())
            .map(|c| upper[c] * model.couplings.entries[(r, c)].norm_sqr())
            .sum();
        total += row * C64::from_polar(1.0, e1 * tau);
    }
    total * (lambda2 / model.n1() as f64)
}

/// Seed average of the two-point function on `taus`.
pub fn empirical_two_point(params: &ModelParams, seeds: &[u64], taus: &[f64]) -> Result<Vec<C64>> {
    params.validate()?;
    if seeds.is_empty() {
        return Err(Error::config("empirical two-point function needs at least one seed"));
    }
    let per_seed: Vec<Result<Vec<C64>>> = map_indexed(seeds.len(), |k| {
        let model = build_model(*params, seeds[k])?;
        Ok(taus.iter().map(|&tau| two_point_single(&model, tau)).collect())
    });
    average(per_seed, taus.len(), seeds.len())
}

fn average(per_seed: Vec<Result<Vec<C64>>>, len: usize, count: usize) -> Result<Vec<C64>> {
    let mut acc = vec![C64::new(0.0, 0.0); len];
    for values in per_seed {
        for (a, v) in acc.iter_mut().zip(values?) {
            *a += v;
        }
    }
    Ok(acc.into_iter().map(|a| a / count as f64).collect())
}

fn dense_guard(params: &ModelParams) -> Result<()> {
    if params.n1 > MAX_DENSE_BAND || params.n2 > MAX_DENSE_BAND {
        return Err(Error::config(format!(
            "dense correlators support bands up to {MAX_DENSE_BAND} levels, got {} x {}",
            params.n1, params.n2
        )));
    }
    Ok(())
}

/// Seed average of `tr_E{B(t) B'(t1) B(t2) B'(t3) Pi_1/N1}` with `B'` the
/// adjoint.
pub fn empirical_four_point(params: &ModelParams, seeds: &[u64], times: [f64; 4]) -> Result<C64> {
    params.validate()?;
    dense_guard(params)?;
    if seeds.is_empty() {
        return Err(Error::config("empirical four-point function needs at least one seed"));
    }
    let [t, t1, t2, t3] = times;
    let per_seed: Vec<Result<Vec<C64>>> = map_indexed(seeds.len(), |k| {
        let model = build_model(*params, seeds[k])?;
        let product = model.interaction_coupling(t)
            * model.interaction_coupling(t1).adjoint()
            * model.interaction_coupling(t2)
            * model.interaction_coupling(t3).adjoint();
        Ok(vec![product.trace() / params.n1 as f64])
    });
    Ok(average(per_seed, 1, seeds.len())?[0])
}

/// Transition `(i, j, a, b)` between system levels `i, j` and environment
/// bands `a, b` (band 0 = lower, band 1 = upper).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Transition {
    pub i: usize,
    pub j: usize,
    pub a: usize,
    pub b: usize,
}

impl Transition {
    pub fn new(i: usize, j: usize, a: usize, b: usize) -> Result<Self> {
        if i > 1 || j > 1 || a > 1 || b > 1 {
            return Err(Error::config(format!(
                "two-band transitions take indices in {{0, 1}}, got ({i}, {j}, {a}, {b})"
            )));
        }
        Ok(Transition { i, j, a, b })
    }
}

/// Environment operator `<i|V(t)|j>` on the full environment space.
fn system_block(model: &TwoBandModel, i: usize, j: usize, t: f64) -> DMatrix<C64> {
    match (i, j) {
        (1, 0) => model.env_coupling_operator(t),
        (0, 1) => model.env_coupling_operator(t).adjoint(),
        _ => DMatrix::zeros(model.env_dim(), model.env_dim()),
    }
}

fn band_mask(model: &TwoBandModel, a: usize) -> std::ops::Range<usize> {
    if a == 0 {
        0..model.n1()
    } else {
        model.n1()..model.env_dim()
    }
}

/// `Re tr{Pi_a <i|V(s)|j> Pi_b <j|V(0)|i>}`.
fn transition_correlation(model: &TwoBandModel, tr: Transition, s: f64, back: &DMatrix<C64>) -> f64 {
    let forward = system_block(model, tr.i, tr.j, s);
    let mut total = C64::new(0.0, 0.0);
    for r in band_mask(model, tr.a) {
        for c in band_mask(model, tr.b) {
            total += forward[(r, c)] * back[(c, r)];
        }
    }
    total.re
}

/// `f(ijab, tau) = 2 int_0^tau dtau' int_0^tau' dtau''
/// tr{Pi_a <i|V(tau'')|j> Pi_b <j|V(0)|i>}` for one coupling realization.
pub fn transition_integral(params: &ModelParams, seed: u64, tr: Transition, tau: f64) -> Result<f64> {
    params.validate()?;
    dense_guard(params)?;
    if !(tau >= 0.0) {
        return Err(Error::Domain(format!("transition integral needs tau >= 0, got {tau}")));
    }
    if tr.i == tr.j || tau == 0.0 {
        return Ok(0.0);
    }
    let model = build_model(*params, seed)?;
    let back = system_block(&model, tr.j, tr.i, 0.0);
    let rule = GaussLegendre::new(PANEL_ORDER).expect("fixed valid order");
    let panel = PANEL_WIDTH / params.band_width;
    let panels = (tau / panel).ceil().max(1.0) as usize;
    let width = tau / panels as f64;
    let mut total = 0.0;
    for k in 0..panels {
        let (a, b) = (k as f64 * width, (k + 1) as f64 * width);
        total += rule.integrate(a, b, |s| (tau - s) * transition_correlation(&model, tr, s, &back));
    }
    Ok(2.0 * total)
}

/// Checks that the sampled couplings are usable for statistics; exposed for
/// callers that want the raw moments of a realization.
pub fn coupling_moments(n1: usize, n2: usize, seed: u64) -> Result<(f64, C64)> {
    let c = sample_couplings(n1, n2, seed)?;
    let count = (n1 * n2) as f64;
    let abs2 = c.entries.iter().map(|z| z.norm_sqr()).sum::<f64>() / count;
    let square = c.entries.iter().map(|z| z * z).sum::<C64>() / count;
    Ok((abs2, square))
}

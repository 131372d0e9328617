//! Experiment configuration, ensemble runs and curve comparison.

mod config;
mod output;

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::correlations::{golden_rule_rates, Kernel, KernelKind, RateSet};
use crate::master::{self, CorrelatedMode};
use crate::model::{build_model, random_lower_band_state, realization_seeds, ModelParams, RealizationSeeds};
use crate::parallel::map_indexed;
use crate::propagator::{evolve, IntegratorOptions, PureState};
use crate::state::{ConditionalDensities, DensityMatrix2};
use crate::trajectory::{Record, Trajectory, TrajectoryMeta};
use crate::{Error, Result, C64};

pub use config::{apply_setting, load_config, parse_settings, resolve, Setting};
pub use output::{csv_header, emit, emit_csv, emit_json, read_csv, CsvTable, OutputFormat};

pub const DEFAULT_REALIZATIONS: usize = 10;
pub const DEFAULT_SAMPLES: usize = 400;
pub const DEFAULT_MASTER_SEED: u64 = 20_240_917;
/// Default time span in units of `1 / (g1 + g2)`.
pub const DEFAULT_SPAN: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    Tcl2Std,
    Tcl4Std,
    Ham,
    Ctcl2Markov,
    Ctcl2Memory,
    Ctcl4,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Exact,
        Method::Tcl2Std,
        Method::Tcl4Std,
        Method::Ham,
        Method::Ctcl2Markov,
        Method::Ctcl2Memory,
        Method::Ctcl4,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::Tcl2Std => "tcl2_std",
            Method::Tcl4Std => "tcl4_std",
            Method::Ham => "ham",
            Method::Ctcl2Markov => "ctcl2_markov",
            Method::Ctcl2Memory => "ctcl2_memory",
            Method::Ctcl4 => "ctcl4",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::config(format!("unknown method {s:?}")))
    }
}

/// Parses a comma-separated method list; `all` selects every method.
pub fn parse_methods(list: &str) -> Result<BTreeSet<Method>> {
    if list.trim() == "all" {
        return Ok(Method::ALL.into_iter().collect());
    }
    list.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OutputPaths {
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub params: ModelParams,
    /// End of the sample grid; `None` uses the default span.
    pub t_max: Option<f64>,
    pub sample_count: usize,
    pub realizations: usize,
    pub master_seed: u64,
    pub methods: BTreeSet<Method>,
    pub kernel: KernelKind,
    pub rho11: f64,
    pub rho01: C64,
    /// Overrides the exact propagator's default step.
    pub integrator_step: Option<f64>,
    pub output: OutputPaths,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            params: ModelParams { n1: 500, n2: 500, band_width: 0.5, coupling: 5e-4 },
            t_max: None,
            sample_count: DEFAULT_SAMPLES,
            realizations: DEFAULT_REALIZATIONS,
            master_seed: DEFAULT_MASTER_SEED,
            methods: Method::ALL.into_iter().collect(),
            kernel: KernelKind::Sinc2,
            rho11: 1.0,
            rho01: C64::new(0.0, 0.0),
            integrator_step: None,
            output: OutputPaths::default(),
        }
    }
}

/// Figure presets: `N1 = N2 = 500`, `de = 0.5` and the figure's coupling.
pub fn preset(figure_id: &str) -> Result<ExperimentConfig> {
    let coupling = match figure_id.trim() {
        "fig2" => 5e-4,
        "fig3" => 1e-3,
        "fig4" => 3e-3,
        "fig5" => 1e-2,
        other => return Err(Error::config(format!("unknown preset {other:?} (expected fig2..fig5)"))),
    };
    let mut config = ExperimentConfig::default();
    config.params.coupling = coupling;
    Ok(config)
}

impl ExperimentConfig {
    pub fn rates(&self) -> RateSet {
        golden_rule_rates(&self.params).with_fourth_order(self.params.band_width)
    }

    pub fn kernel(&self) -> Result<Kernel> {
        Kernel::new(self.kernel, self.params.band_width)
    }

    pub fn initial_state(&self) -> DensityMatrix2 {
        DensityMatrix2::from_population(self.rho11, self.rho01)
    }

    /// `t_max` if set, else `5 / (g1 + g2)` capped at half the recurrence
    /// time.
    pub fn resolved_t_max(&self) -> f64 {
        if let Some(t) = self.t_max {
            return t;
        }
        let cap = 0.5 * self.params.recurrence_time();
        let total = self.rates().total();
        if total > 0.0 {
            (DEFAULT_SPAN / total).min(cap)
        } else {
            cap
        }
    }

    /// `sample_count` equally spaced times on `[0, t_max]`.
    pub fn time_grid(&self) -> Vec<f64> {
        let t_max = self.resolved_t_max();
        let last = (self.sample_count - 1) as f64;
        (0..self.sample_count).map(|k| t_max * k as f64 / last).collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if let Some(t) = self.t_max {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::config(format!("t_max must be positive, got {t}")));
            }
        }
        if let Some(h) = self.integrator_step {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::config(format!("integrator step must be positive, got {h}")));
            }
        }
        if self.sample_count < 2 {
            return Err(Error::config("the time grid needs at least 2 samples"));
        }
        if self.methods.is_empty() {
            return Err(Error::config("no methods selected"));
        }
        if self.methods.contains(&Method::Exact) && self.realizations == 0 {
            return Err(Error::config("exact runs need at least one realization"));
        }
        if !(0.0..=1.0).contains(&self.rho11) {
            return Err(Error::config(format!("rho11 must lie in [0, 1], got {}", self.rho11)));
        }
        let rho00 = 1.0 - self.rho11;
        let excess = self.rho01.norm_sqr() - rho00 * self.rho11;
        if excess > 1e-12 {
            return Err(Error::config("initial system state is not positive (|rho01|^2 > rho00 rho11)"));
        }
        if self.methods.contains(&Method::Exact) && excess < -1e-12 {
            return Err(Error::config(
                "exact runs need a pure initial system state (|rho01|^2 = rho00 rho11)",
            ));
        }
        Ok(())
    }

    /// System amplitudes `(a0, a1)` reproducing the pure initial state.
    fn system_amplitudes(&self) -> [C64; 2] {
        if self.rho11 > 0.0 {
            let a1 = self.rho11.sqrt();
            [self.rho01 / a1, C64::from(a1)]
        } else {
            [C64::from(1.0), C64::new(0.0, 0.0)]
        }
    }
}

/// Ensemble statistics that accompany the exact mean trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactStats {
    /// Sample standard deviation of `rho11` across realizations.
    pub rho11_std: Vec<f64>,
    /// Largest `| ||psi|| - 1 |` across realizations.
    pub norm_drift: Vec<f64>,
    pub seeds: Vec<RealizationSeeds>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealizationFailure {
    pub seeds: RealizationSeeds,
    pub message: String,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CurveMetrics {
    pub max_abs_rho11: f64,
    pub rms_rho11: f64,
    pub max_abs_coherence: f64,
    pub rms_coherence: f64,
    /// Final `rho11` of the first curve minus that of the second.
    pub final_rho11_diff: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub method: Method,
    pub reference: Method,
    pub metrics: CurveMetrics,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultSet {
    pub config: ExperimentConfig,
    pub rates: RateSet,
    pub times: Vec<f64>,
    /// One trajectory per selected method, in canonical method order.
    pub trajectories: Vec<(Method, Trajectory)>,
    pub exact_stats: Option<ExactStats>,
    pub failures: Vec<RealizationFailure>,
    pub comparisons: Vec<Comparison>,
    pub version: &'static str,
}

impl ResultSet {
    pub fn trajectory(&self, method: Method) -> Option<&Trajectory> {
        self.trajectories.iter().find(|(m, _)| *m == method).map(|(_, t)| t)
    }

    /// True when some realizations failed and the exact mean is partial.
    pub fn is_partial(&self) -> bool {
        !self.failures.is_empty()
    }
}

fn closed_form_trajectory(
    times: &[f64],
    method: Method,
    f: impl Fn(f64) -> DensityMatrix2,
) -> Result<Trajectory> {
    let records = times.iter().map(|&t| Record::reduced(f(t))).collect();
    Trajectory::new(times.to_vec(), records, TrajectoryMeta { method: method.name().into(), ..Default::default() })
}

fn run_realization(config: &ExperimentConfig, seeds: RealizationSeeds, times: &[f64]) -> Result<Trajectory> {
    let model = build_model(config.params, seeds.coupling)?;
    let chi = random_lower_band_state(&model, seeds.state);
    let psi = PureState::product(config.system_amplitudes(), &chi);
    let opts = IntegratorOptions { max_step: config.integrator_step, ..Default::default() };
    let mut traj = evolve(&model, &psi, times, &opts)?;
    traj.meta.seeds = vec![seeds];
    Ok(traj)
}

fn run_exact(config: &ExperimentConfig, times: &[f64]) -> Result<(Trajectory, ExactStats, Vec<RealizationFailure>)> {
    let all_seeds: Vec<RealizationSeeds> =
        (0..config.realizations).map(|k| realization_seeds(config.master_seed, k as u64)).collect();
    let runs = map_indexed(config.realizations, |k| {
        info!("exact realization {k} started");
        run_realization(config, all_seeds[k], times)
    });
    let mut ok = Vec::new();
    let mut failures = Vec::new();
    let mut first_error = None;
    for (seeds, run) in all_seeds.iter().zip(runs) {
        match run {
            Ok(t) => ok.push(t),
            Err(e) => {
                warn!("realization {} (coupling seed {}, state seed {}) failed: {e}", seeds.index, seeds.coupling, seeds.state);
                failures.push(RealizationFailure { seeds: *seeds, message: e.to_string() });
                first_error.get_or_insert(e);
            }
        }
    }
    if ok.is_empty() {
        return Err(first_error.unwrap_or_else(|| Error::Internal("no realizations ran".into())));
    }
    let count = ok.len() as f64;
    let mut records = Vec::with_capacity(times.len());
    let mut rho11_std = Vec::with_capacity(times.len());
    let mut norm_drift = Vec::with_capacity(times.len());
    for s in 0..times.len() {
        let mut rho = DensityMatrix2::zero();
        let mut cond = ConditionalDensities { rho1: DensityMatrix2::zero(), rho2: DensityMatrix2::zero() };
        let mut norm = 0.0;
        let mut drift: f64 = 0.0;
        for t in &ok {
            let r = &t.records[s];
            rho = rho + r.rho;
            if let Some(c) = r.conditional {
                cond = cond + c;
            }
            norm += r.norm;
            drift = drift.max((r.norm.sqrt() - 1.0).abs());
        }
        let mean11 = rho.rho11() / count;
        let var = if ok.len() > 1 {
            ok.iter().map(|t| (t.records[s].rho.rho11() - mean11).powi(2)).sum::<f64>() / (count - 1.0)
        } else {
            0.0
        };
        records.push(Record { rho: rho.scaled(1.0 / count), conditional: Some(cond.scaled(1.0 / count)), norm: norm / count });
        rho11_std.push(var.sqrt());
        norm_drift.push(drift);
    }
    let seeds: Vec<RealizationSeeds> = ok.iter().flat_map(|t| t.meta.seeds.clone()).collect();
    let meta = TrajectoryMeta { method: Method::Exact.name().into(), params: Some(config.params), seeds: seeds.clone() };
    let mean = Trajectory::new(times.to_vec(), records, meta)?;
    Ok((mean, ExactStats { rho11_std, norm_drift, seeds }, failures))
}

fn run_method(config: &ExperimentConfig, method: Method, rates: &RateSet, times: &[f64]) -> Result<Trajectory> {
    let rho0 = config.initial_state();
    let state0 = ConditionalDensities::lower_band(rho0);
    let mut traj = match method {
        Method::Exact => unreachable!("exact runs are handled separately"),
        Method::Tcl2Std => closed_form_trajectory(times, method, |t| master::tcl2_standard(rates, &rho0, t))?,
        Method::Tcl4Std => closed_form_trajectory(times, method, |t| master::tcl4_standard(rates, &rho0, t))?,
        Method::Ham => closed_form_trajectory(times, method, |t| master::ham_two_band(rates, &rho0, t))?,
        Method::Ctcl2Markov => master::correlated_tcl2(&config.kernel()?, rates, &state0, times, CorrelatedMode::Markov)?,
        Method::Ctcl2Memory => master::correlated_tcl2(&config.kernel()?, rates, &state0, times, CorrelatedMode::Memory)?,
        Method::Ctcl4 => master::correlated_tcl4_grid(rates, &state0, times)?,
    };
    traj.meta.params = Some(config.params);
    Ok(traj)
}

/// Runs every selected method on one shared grid. The result depends only
/// on the configuration.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ResultSet> {
    config.validate()?;
    let rates = config.rates();
    let times = config.time_grid();
    let mut trajectories = Vec::new();
    let mut exact_stats = None;
    let mut failures = Vec::new();
    for &method in &config.methods {
        if method == Method::Exact {
            let (mean, stats, failed) = run_exact(config, &times)?;
            trajectories.push((method, mean));
            exact_stats = Some(stats);
            failures = failed;
        } else {
            trajectories.push((method, run_method(config, method, &rates, &times)?));
        }
    }
    let reference = [Method::Exact, Method::Ham].into_iter().find(|m| config.methods.contains(m));
    let mut comparisons = Vec::new();
    if let Some(reference) = reference {
        let base = &trajectories.iter().find(|(m, _)| *m == reference).expect("selected").1;
        for (method, traj) in &trajectories {
            if *method != reference {
                comparisons.push(Comparison { method: *method, reference, metrics: compare_curves(traj, base)? });
            }
        }
    }
    Ok(ResultSet {
        config: config.clone(),
        rates,
        times,
        trajectories,
        exact_stats,
        failures,
        comparisons,
        version: env!("CARGO_PKG_VERSION"),
    })
}

/// Deviation metrics between two trajectories on the same grid.
pub fn compare_curves(a: &Trajectory, b: &Trajectory) -> Result<CurveMetrics> {
    if a.times != b.times {
        return Err(Error::config(format!(
            "cannot compare curves on different time grids ({} vs {} samples)",
            a.len(),
            b.len()
        )));
    }
    let n = a.len() as f64;
    let (mut max11, mut sum11, mut maxc, mut sumc) = (0.0f64, 0.0, 0.0f64, 0.0);
    for (ra, rb) in a.records.iter().zip(&b.records) {
        let d11 = (ra.rho.rho11() - rb.rho.rho11()).abs();
        let dc = (ra.rho.rho01().norm() - rb.rho.rho01().norm()).abs();
        max11 = max11.max(d11);
        maxc = maxc.max(dc);
        sum11 += d11 * d11;
        sumc += dc * dc;
    }
    Ok(CurveMetrics {
        max_abs_rho11: max11,
        rms_rho11: (sum11 / n).sqrt(),
        max_abs_coherence: maxc,
        rms_coherence: (sumc / n).sqrt(),
        final_rho11_diff: a.last().rho.rho11() - b.last().rho.rho11(),
    })
}

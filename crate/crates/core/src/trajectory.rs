use serde::{Deserialize, Serialize};

use crate::model::{ModelParams, RealizationSeeds};
use crate::state::{ConditionalDensities, DensityMatrix2};
use crate::{Error, Result};

/// Observables recorded at one sample time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Record {
    pub rho: DensityMatrix2,
    /// Band-resolved densities; only available for methods that track them.
    pub conditional: Option<ConditionalDensities>,
    /// `||psi||^2` for exact runs, `tr rho_S` otherwise.
    pub norm: f64,
}

impl Record {
    pub fn reduced(rho: DensityMatrix2) -> Self {
        Record { rho, conditional: None, norm: rho.trace() }
    }

    pub fn correlated(cd: ConditionalDensities) -> Self {
        let rho = cd.total();
        Record { rho, conditional: Some(cd), norm: rho.trace() }
    }

    pub fn band_populations(&self) -> Option<[f64; 2]> {
        self.conditional.map(|c| c.band_populations())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub method: String,
    pub params: Option<ModelParams>,
    pub seeds: Vec<RealizationSeeds>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub records: Vec<Record>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, records: Vec<Record>, meta: TrajectoryMeta) -> Result<Self> {
        if times.len() != records.len() {
            return Err(Error::Internal(format!(
                "trajectory has {} times but {} records",
                times.len(),
                records.len()
            )));
        }
        crate::ode::validate_grid(&times)?;
        Ok(Trajectory { times, records, meta })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn rho11(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.rho.rho11()).collect()
    }

    pub fn last(&self) -> &Record {
        self.records.last().expect("trajectories are never empty")
    }
}

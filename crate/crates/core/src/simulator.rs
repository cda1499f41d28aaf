//! Reproducible trajectories and Monte Carlo ensembles.
//!
//! Replication `i` of a run with seed `s` draws from
//! [`trajectory_rng(s, i)`](crate::model::trajectory_rng), so results do not
//! depend on the number of threads or on scheduling. Ensembles run
//! replications in parallel and reduce them in index order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::Scaling;
use crate::error::{invalid, Error, Result};
use crate::laws::SampleSizeLaw;
use crate::linalg::Rows3;
use crate::model::{init_history, step, trajectory_rng, walker_position, ModelParams, SampleMode, SamplingScheme};
use crate::reinforcement::ReinforcementSpec;
use crate::stats::{mean_and_covariance, second_moment_about};

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub params: ModelParams,
    pub spec: ReinforcementSpec,
    pub scheme: SamplingScheme,
    pub law: SampleSizeLaw,
    pub mode: SampleMode,
    pub n_max: u64,
    pub checkpoints: Vec<u64>,
    pub seed: u64,
    pub replications: u64,
    /// Keep the walker position at every epoch (single trajectories only).
    pub record_path: bool,
}

/// `{10^3, 10^3.5, ..., }` up to `n_max`, restricted to `(init_len, n_max]`,
/// with `n_max` always last.
pub fn default_checkpoints(init_len: u64, n_max: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut e = 6;
    loop {
        let c = 10f64.powf(e as f64 / 2.0).round() as u64;
        if c >= n_max {
            break;
        }
        if c > init_len {
            out.push(c);
        }
        e += 1;
    }
    if n_max > init_len {
        out.push(n_max);
    }
    out
}

impl RunConfig {
    pub fn new(
        params: ModelParams,
        spec: ReinforcementSpec,
        scheme: SamplingScheme,
        law: SampleSizeLaw,
        n_max: u64,
        seed: u64,
        replications: u64,
    ) -> Result<Self> {
        let cfg = RunConfig {
            checkpoints: default_checkpoints(params.init_len, n_max),
            params,
            spec,
            scheme,
            law,
            mode: SampleMode::Fast,
            n_max,
            seed,
            replications,
            record_path: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_checkpoints(mut self, checkpoints: Vec<u64>) -> Result<Self> {
        self.checkpoints = checkpoints;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.law.validate()?;
        if self.replications == 0 {
            return Err(invalid("replications", "must be at least 1"));
        }
        if self.n_max <= self.params.init_len {
            return Err(invalid("n_max", format!("{} must exceed init_len {}", self.n_max, self.params.init_len)));
        }
        if self.checkpoints.is_empty() {
            return Err(invalid("checkpoints", "at least one checkpoint is required"));
        }
        if self.checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("checkpoints", "must be strictly ascending"));
        }
        let (lo, hi) = (self.checkpoints[0], *self.checkpoints.last().unwrap());
        if lo <= self.params.init_len || hi > self.n_max {
            return Err(invalid(
                "checkpoints",
                format!("must lie in ({}, {}]", self.params.init_len, self.n_max),
            ));
        }
        if self.scheme == SamplingScheme::WithoutReplacement {
            if let Some(m) = self.law.max_support() {
                if m > self.params.init_len {
                    return Err(Error::SampleSize { k: m, n: self.params.init_len });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointRecord {
    pub n: u64,
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
    pub walker: i64,
}

impl CheckpointRecord {
    pub fn proportions(&self) -> [f64; 3] {
        let n = self.n as f64;
        [self.a as f64 / n, self.b as f64 / n, self.c as f64 / n]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    pub replication: u64,
    pub records: Vec<CheckpointRecord>,
    /// Walker positions at epochs `init_len, ..., n_max` when requested.
    pub path: Option<Vec<i64>>,
}

pub fn run_trajectory(cfg: &RunConfig, replication: u64) -> Result<Trajectory> {
    let mut rng = trajectory_rng(cfg.seed, replication);
    let mut state = init_history(&cfg.params, &mut rng);
    let mut records = Vec::with_capacity(cfg.checkpoints.len());
    let mut path = cfg.record_path.then(|| vec![walker_position(&state)]);
    let mut next = cfg.checkpoints.iter().copied().peekable();
    while state.n < cfg.n_max {
        state = step(&state, &cfg.params, cfg.scheme, &cfg.spec, &cfg.law, cfg.mode, &mut rng)?;
        if let Some(p) = path.as_mut() {
            p.push(walker_position(&state));
        }
        if next.peek() == Some(&state.n) {
            next.next();
            records.push(CheckpointRecord {
                n: state.n,
                a: state.a,
                b: state.b,
                c: state.c,
                d: state.d,
                walker: walker_position(&state),
            });
        }
    }
    Ok(Trajectory { replication, records, path })
}

/// Centre and scaling used to form `scale(n) · (θ_n - θ*)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationSpec {
    pub centre: [f64; 3],
    pub scaling: Scaling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointStats {
    pub n: u64,
    pub mean: [f64; 3],
    /// Sample covariance of `(a/n, b/n, c/n)`.
    pub cov: Rows3,
    /// Scaled deviations, one row per replication in index order.
    pub deviations: Option<Vec<[f64; 3]>>,
    /// Sample covariance of the scaled deviations.
    pub dev_cov: Option<Rows3>,
    /// Second moment of the scaled deviations about zero.
    pub dev_second_moment: Option<Rows3>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub replications: u64,
    pub deviation: Option<DeviationSpec>,
    pub checkpoints: Vec<CheckpointStats>,
}

impl EnsembleStats {
    pub fn at(&self, n: u64) -> Option<&CheckpointStats> {
        self.checkpoints.iter().find(|c| c.n == n)
    }

    pub fn last(&self) -> &CheckpointStats {
        self.checkpoints.last().expect("ensembles have at least one checkpoint")
    }
}

pub fn run_trajectories(cfg: &RunConfig) -> Result<Vec<Trajectory>> {
    cfg.validate()?;
    let runs: Vec<Result<Trajectory>> =
        (0..cfg.replications).into_par_iter().map(|i| run_trajectory(cfg, i)).collect();
    runs.into_iter()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| Error::Replication { replication: i as u64, source: Box::new(e) }))
        .collect()
}

/// Aggregates trajectories checkpoint by checkpoint.
pub fn summarize(trajectories: &[Trajectory], deviation: Option<DeviationSpec>) -> EnsembleStats {
    let n_cp = trajectories.first().map_or(0, |t| t.records.len());
    let mut checkpoints = Vec::with_capacity(n_cp);
    for c in 0..n_cp {
        let n = trajectories[0].records[c].n;
        let rows: Vec<[f64; 3]> = trajectories.iter().map(|t| t.records[c].proportions()).collect();
        let (mean, cov) = mean_and_covariance(&rows);
        let (deviations, dev_cov, dev_second_moment) = match deviation {
            Some(d) => {
                let s = d.scaling.factor(n as f64);
                let devs: Vec<[f64; 3]> =
                    rows.iter().map(|r| [0, 1, 2].map(|i| s * (r[i] - d.centre[i]))).collect();
                let (_, dc) = mean_and_covariance(&devs);
                let m2 = second_moment_about(&devs, &[0.0; 3]);
                (Some(devs), Some(dc), Some(m2))
            }
            None => (None, None, None),
        };
        checkpoints.push(CheckpointStats { n, mean, cov, deviations, dev_cov, dev_second_moment });
    }
    EnsembleStats { replications: trajectories.len() as u64, deviation, checkpoints }
}

pub fn run_ensemble(cfg: &RunConfig, deviation: Option<DeviationSpec>) -> Result<EnsembleStats> {
    if cfg.replications < 2 {
        return Err(invalid("replications", "an ensemble needs at least 2"));
    }
    Ok(summarize(&run_trajectories(cfg)?, deviation))
}

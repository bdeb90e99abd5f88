//! Parallel ensembles and duty-ratio sweeps.
//!
//! Run `i` of ensemble `e` always draws from stream `(e, i)`, so results do
//! not depend on the thread count. Feedback and open-loop ensembles at the same
//! sweep point share streams: each pair of runs sees the same initial well,
//! the same pre-measurement path and the same thermal noise until the
//! protocols diverge.

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{aggregate, EnsembleStats};
use crate::config::RunConfig;
use crate::dynamics::SimConfig;
use crate::error::{Error, Result};
use crate::measurement::SensorModel;
use crate::potential::PotentialParams;
use crate::protocol::{run_feedback_erasure, run_openloop_erasure, ErasureRun, InitialWell, ProtocolSchedule};
use crate::rng::stream_id;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProtocolKind {
    Feedback,
    OpenLoop,
}

impl ProtocolKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProtocolKind::Feedback => "feedback",
            ProtocolKind::OpenLoop => "openloop",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EnsembleSpec<'a> {
    pub kind: ProtocolKind,
    pub schedule: &'a ProtocolSchedule,
    pub sim: &'a SimConfig,
    pub params: &'a PotentialParams,
    pub sensor: &'a SensorModel,
    pub init: InitialWell,
    pub n_runs: usize,
    /// High half of every stream id in this ensemble.
    pub ensemble_index: u32,
}

/// Runs `n_runs` independent protocols; the result is ordered by run id.
pub fn run_ensemble(spec: &EnsembleSpec<'_>) -> Result<Vec<ErasureRun>> {
    let n = u32::try_from(spec.n_runs).map_err(|_| Error::invalid("n_runs", format!("{} too large", spec.n_runs)))?;
    (0..n)
        .into_par_iter()
        .map(|i| {
            let stream = stream_id(spec.ensemble_index, i);
            match spec.kind {
                ProtocolKind::Feedback => run_feedback_erasure(
                    spec.schedule,
                    spec.sim,
                    spec.params,
                    spec.sensor,
                    spec.init,
                    u64::from(i),
                    stream,
                ),
                ProtocolKind::OpenLoop => {
                    run_openloop_erasure(spec.schedule, spec.sim, spec.params, spec.init, u64::from(i), stream)
                }
            }
        })
        .collect()
}

/// Both ensembles at one duty ratio.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub d: f64,
    pub tau: f64,
    pub feedback: Vec<ErasureRun>,
    pub openloop: Vec<ErasureRun>,
    pub feedback_stats: EnsembleStats,
    pub openloop_stats: EnsembleStats,
}

/// Runs the feedback and open-loop ensembles at every duty ratio of the
/// config, with τ(d) from its scaling law.
pub fn run_sweep(cfg: &RunConfig) -> Result<Vec<SweepPoint>> {
    cfg.d_list
        .iter()
        .enumerate()
        .map(|(k, &d)| {
            let schedule = cfg.protocol.schedule(d)?;
            let index = u32::try_from(k).map_err(|_| Error::invalid("d_list", "too many duty ratios"))?;
            let spec = |kind| EnsembleSpec {
                kind,
                schedule: &schedule,
                sim: &cfg.sim,
                params: &cfg.potential,
                sensor: &cfg.sensor,
                init: cfg.protocol.init,
                n_runs: cfg.n_runs,
                ensemble_index: index,
            };
            let feedback = run_ensemble(&spec(ProtocolKind::Feedback))?;
            let openloop = run_ensemble(&spec(ProtocolKind::OpenLoop))?;
            Ok(SweepPoint {
                d,
                tau: schedule.tau,
                feedback_stats: aggregate(&feedback)?,
                openloop_stats: aggregate(&openloop)?,
                feedback,
                openloop,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::Action;

    fn fast() -> (ProtocolSchedule, SimConfig, PotentialParams, SensorModel) {
        let sim = SimConfig { gamma: 4.5e-8, dt: 5e-7, ..SimConfig::default() };
        let sched = ProtocolSchedule { t_m: 1e-3, tau: 0.05, t_relax: 0.01, d_erase: 0.75 };
        (sched, sim, PotentialParams::default(), SensorModel::new(300.0).unwrap())
    }

    #[test]
    fn ordered_and_thread_independent() {
        let (sched, sim, params, sensor) = fast();
        let spec = EnsembleSpec {
            kind: ProtocolKind::Feedback,
            schedule: &sched,
            sim: &sim,
            params: &params,
            sensor: &sensor,
            init: InitialWell::Random,
            n_runs: 12,
            ensemble_index: 3,
        };
        let many = run_ensemble(&spec).unwrap();
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| run_ensemble(&spec).unwrap());
        assert_eq!(many, one);
        assert!(many.iter().enumerate().all(|(i, r)| r.run_id == i as u64));
    }

    #[test]
    fn paired_runs_share_their_start() {
        let (sched, sim, params, sensor) = fast();
        let mk = |kind| EnsembleSpec {
            kind,
            schedule: &sched,
            sim: &sim,
            params: &params,
            sensor: &sensor,
            init: InitialWell::Random,
            n_runs: 10,
            ensemble_index: 0,
        };
        let fb = run_ensemble(&mk(ProtocolKind::Feedback)).unwrap();
        let ol = run_ensemble(&mk(ProtocolKind::OpenLoop)).unwrap();
        for (a, b) in fb.iter().zip(&ol) {
            assert_eq!(a.initial_well, b.initial_well);
            assert_eq!(a.x_at_tm, b.x_at_tm);
            assert_eq!(b.action, Action::Act);
            assert_eq!(b.sigma_n, None);
            if a.action == Action::Act {
                assert_eq!(a.w1, b.w1);
            }
        }
    }
}

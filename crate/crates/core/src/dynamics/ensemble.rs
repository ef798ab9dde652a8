use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;

use crate::bath::BathSpec;
use crate::dynamics::integrator::{Integrator, InterventionPoint, MemoryKernel, Trajectory};
use crate::dynamics::{Potential, Schedule};
use crate::error::{Error, Result};
use crate::noise::{FrequencyGrid, NoisePath, NoiseStatistics, NoiseSynthesizer};
use crate::preparation::Sampler;
use crate::rng::{SeedRecord, StreamPurpose};

/// Largest tolerated fraction of failed trajectories.
pub const MAX_FAILURE_FRACTION: f64 = 1e-3;

/// Progress callback: `(completed, total)`.
pub type ProgressFn = dyn Fn(usize, usize) + Sync + Send;

#[derive(Default, Clone)]
pub struct EnsembleOptions {
    /// Id of the first trajectory; ids run consecutively from here.
    pub first_id: u64,
    /// Synthesis grid to use instead of [`FrequencyGrid::for_span`].
    pub grid: Option<FrequencyGrid>,
    /// Keep the noise paths alongside the trajectories.
    pub keep_noise: bool,
    pub progress: Option<Arc<ProgressFn>>,
}

#[derive(Debug)]
pub struct Ensemble {
    /// Successful trajectories in id order.
    pub trajectories: Vec<Trajectory>,
    /// Ids and errors of failed trajectories.
    pub failures: Vec<(u64, Error)>,
    /// Noise paths in id order when requested.
    pub noise: Vec<NoisePath>,
    pub grid: FrequencyGrid,
}

/// Synthesis grid covering `[−t_eq, t_end]` at the schedule's step.
pub fn noise_grid(spec: &BathSpec, sched: &Schedule) -> Result<FrequencyGrid> {
    FrequencyGrid::for_span(spec, sched.dt, sched.total_steps() + 1, -sched.t_eq)
}

/// Integrate `n_traj` independent trajectories. Trajectory `id` uses the
/// streams `(master_seed, id, purpose)` for its noise, initial offset and
/// preparations, so the result does not depend on the worker count.
pub fn run_ensemble(
    spec: &BathSpec,
    pot: &Potential,
    sched: &Schedule,
    n_traj: usize,
    statistics: NoiseStatistics,
    master_seed: u64,
    opts: &EnsembleOptions,
) -> Result<Ensemble> {
    if n_traj == 0 {
        return Err(Error::config("run.n_traj", "must be >= 1"));
    }
    spec.validate()?;
    pot.validate()?;
    sched.validate(spec, pot)?;
    let grid = match opts.grid {
        Some(g) => g,
        None => noise_grid(spec, sched)?,
    };
    let synth = NoiseSynthesizer::new(spec, grid, statistics)?;
    let kernel = MemoryKernel::new(spec, sched.dt);
    let samplers = sched
        .interventions
        .iter()
        .map(|iv| Sampler::new(&iv.preparation, spec.hbar))
        .collect::<Result<Vec<_>>>()?;
    let times: Arc<[f64]> = sched.record_times().into();
    let integrator = Integrator {
        spec,
        pot,
        sched,
        kernel: &kernel,
    };
    let done = AtomicUsize::new(0);

    let one = |i: usize| -> (u64, Result<(Trajectory, Option<NoisePath>)>) {
        let id = opts.first_id + i as u64;
        let result = (|| {
            let noise_seed = SeedRecord::new(master_seed, id, StreamPurpose::Noise);
            let mut noise = synth.generate(&mut noise_seed.rng())?;
            noise.seed = Some(noise_seed);
            let mut x_start = sched.initial_x;
            if sched.position_spread > 0.0 {
                let mut r = SeedRecord::new(master_seed, id, StreamPurpose::InitialState).rng();
                x_start += sched.position_spread * (r.random::<f64>() - 0.5);
            }
            let mut prep_rng = SeedRecord::new(master_seed, id, StreamPurpose::Preparation).rng();
            let mut cb = |pt: InterventionPoint| samplers[pt.index].sample(pt.rbar, pt.pbar, &mut prep_rng);
            let tr = integrator.run(&noise, x_start, id, times.clone(), &mut cb)?;
            Ok((tr, opts.keep_noise.then_some(noise)))
        })();
        if let Some(progress) = &opts.progress {
            let k = done.fetch_add(1, Ordering::Relaxed) + 1;
            progress(k, n_traj);
        }
        (id, result)
    };
    let results: Vec<_> = (0..n_traj).into_par_iter().map(one).collect();

    let mut trajectories = Vec::with_capacity(n_traj);
    let mut noise = Vec::new();
    let mut failures = Vec::new();
    for (id, r) in results {
        match r {
            Ok((tr, path)) => {
                trajectories.push(tr);
                noise.extend(path);
            }
            Err(e) => failures.push((id, e)),
        }
    }
    if failures.len() as f64 > MAX_FAILURE_FRACTION * n_traj as f64 {
        let failed = failures.len();
        let first = failures.swap_remove(0).1;
        return Err(Error::EnsembleAborted {
            failed,
            total: n_traj,
            first: Box::new(first),
        });
    }
    Ok(Ensemble {
        trajectories,
        failures,
        noise,
        grid,
    })
}

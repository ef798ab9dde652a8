//! Trajectory integration of the generalized Langevin equation.

mod ensemble;
mod integrator;
mod potential;
mod schedule;

pub use ensemble::{noise_grid, run_ensemble, Ensemble, EnsembleOptions, ProgressFn, MAX_FAILURE_FRACTION};
pub use integrator::{
    integrate, memory_force, InterventionFn, InterventionPoint, InterventionRecord, Jump, MemoryKernel, Trajectory,
    KERNEL_CUTOFF,
};
pub use potential::{Potential, MAX_DEGREE};
pub use schedule::{default_dt, default_t_eq, grid_steps, Intervention, Schedule};

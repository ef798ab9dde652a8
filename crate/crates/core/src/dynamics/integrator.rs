//! Velocity-Verlet integration of the generalized Langevin equation
//!
//! `m ẍ = −V′(x) − ∫ M(t−τ) dx(τ) + ξ(t)`.
//!
//! The friction integral is a Stieltjes integral over the position path.
//! Between grid points the path is linear with the half-step velocity, so
//! each cell contributes `v_{j+½}·∫_cell M` with the cell integral of `M`
//! taken in closed form. Position jumps made by interventions add
//! `M(t−t_k)·Δx_k`. Only half-step velocities enter the force, which keeps
//! the scheme explicit.

use std::sync::Arc;

use crate::bath::BathSpec;
use crate::dynamics::{Potential, Schedule};
use crate::error::{Error, Result};
use crate::noise::NoisePath;
use crate::rng::SeedRecord;

/// Relative kernel magnitude `M(t_mem)/M(0)` at which the history window ends.
pub const KERNEL_CUTOFF: f64 = 1e-6;

/// A discontinuity of the position path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub time: f64,
    pub dx: f64,
}

/// State of a trajectory just before an intervention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterventionPoint {
    pub index: usize,
    pub time: f64,
    pub rbar: f64,
    pub pbar: f64,
}

/// What an intervention did to a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterventionRecord {
    pub index: usize,
    pub time: f64,
    pub rbar: f64,
    pub pbar: f64,
    pub r0: f64,
    pub p0: f64,
    pub factor: f64,
}

/// One integrated path, recorded on `times` (post-intervention values).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub id: u64,
    pub times: Arc<[f64]>,
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub interventions: Vec<InterventionRecord>,
    pub jumps: Vec<Jump>,
    pub seed: Option<SeedRecord>,
    /// Position at `t = −t_eq`.
    pub x_start: f64,
}

impl Trajectory {
    /// Product of all intervention weight factors.
    pub fn weight(&self) -> f64 {
        self.interventions.iter().map(|r| r.factor).product()
    }

    /// Product of the factors of interventions at or before `t`.
    pub fn weight_at(&self, t: f64) -> f64 {
        self.interventions
            .iter()
            .filter(|r| r.time <= t)
            .map(|r| r.factor)
            .product()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Friction kernel discretized on the integration grid.
#[derive(Debug, Clone)]
pub struct MemoryKernel {
    spec: BathSpec,
    dt: f64,
    /// `K_k = ∫_{(k−1)dt}^{k dt} M` stored in reverse: `cells_rev[W−k] = K_k`.
    cells_rev: Vec<f64>,
}

impl MemoryKernel {
    pub fn new(spec: &BathSpec, dt: f64) -> Self {
        let window = if spec.gamma > 0.0 {
            let t_mem = spec.eps * (1.0 / KERNEL_CUTOFF - 1.0).sqrt();
            (t_mem / dt).ceil() as usize
        } else {
            0
        };
        let cells_rev = (1..=window)
            .rev()
            .map(|k| spec.kernel_integral((k - 1) as f64 * dt, k as f64 * dt))
            .collect();
        MemoryKernel {
            spec: *spec,
            dt,
            cells_rev,
        }
    }

    /// Number of cells summed explicitly.
    pub fn window(&self) -> usize {
        self.cells_rev.len()
    }

    /// `K_k` for `1 ≤ k ≤ window`.
    pub fn cell(&self, k: usize) -> f64 {
        self.cells_rev[self.cells_rev.len() - k]
    }

    /// Friction from a continuous history of half-step velocities
    /// `velocities[j] = v_{j+½}`, evaluated at the end of the last cell.
    /// Cells older than the window are lumped onto the latest velocity with
    /// their exact kernel mass.
    pub fn history_force(&self, velocities: &[f64]) -> f64 {
        let n = velocities.len();
        let w = self.cells_rev.len();
        if n == 0 || w == 0 {
            return 0.0;
        }
        let m = n.min(w);
        let mut f = dot(&self.cells_rev[w - m..], &velocities[n - m..]);
        if n > w {
            let tail = self.spec.kernel_integral(w as f64 * self.dt, n as f64 * self.dt);
            f += tail * velocities[n - 1];
        }
        -f
    }

    /// `−Σ M(t − t_k) Δx_k` over jumps at or before `t`.
    pub fn jump_force(&self, jumps: &[Jump], t: f64) -> f64 {
        -jumps
            .iter()
            .filter(|j| j.time <= t)
            .map(|j| self.spec.memory_kernel(t - j.time) * j.dx)
            .sum::<f64>()
    }
}

/// Memory friction at time `t`: history term plus jump terms.
pub fn memory_force(kernel: &MemoryKernel, velocities: &[f64], jumps: &[Jump], t: f64) -> f64 {
    kernel.history_force(velocities) + kernel.jump_force(jumps, t)
}

/// Dot product with eight independent partial sums; the summation order is
/// fixed so results are reproducible.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    let mut acc = [0.0f64; 8];
    for (x, y) in ca.zip(cb) {
        for i in 0..8 {
            acc[i] += x[i] * y[i];
        }
    }
    let mut s = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

/// Intervention callback: receives the pre-intervention point and returns
/// `(r₀, p₀, weight factor)`.
pub type InterventionFn<'a> = dyn FnMut(InterventionPoint) -> Result<(f64, f64, f64)> + 'a;

/// Integrate one trajectory from `(initial_x, initial_p)` at `t = −t_eq`.
///
/// `noise` must hold the force on every grid point from `−t_eq` to `t_end`.
pub fn integrate(
    spec: &BathSpec,
    pot: &Potential,
    sched: &Schedule,
    noise: &NoisePath,
    on_intervention: &mut InterventionFn<'_>,
) -> Result<Trajectory> {
    spec.validate()?;
    pot.validate()?;
    sched.validate(spec, pot)?;
    let kernel = MemoryKernel::new(spec, sched.dt);
    let times: Arc<[f64]> = sched.record_times().into();
    let id = noise.seed.map(|s| s.trajectory).unwrap_or(0);
    Integrator {
        spec,
        pot,
        sched,
        kernel: &kernel,
    }
    .run(noise, sched.initial_x, id, times, on_intervention)
}

/// Shared, validated inputs for integrating many trajectories.
pub(crate) struct Integrator<'a> {
    pub spec: &'a BathSpec,
    pub pot: &'a Potential,
    pub sched: &'a Schedule,
    pub kernel: &'a MemoryKernel,
}

impl Integrator<'_> {
    pub fn run(
        &self,
        noise: &NoisePath,
        x_start: f64,
        id: u64,
        times: Arc<[f64]>,
        on_intervention: &mut InterventionFn<'_>,
    ) -> Result<Trajectory> {
        let sched = self.sched;
        let dt = sched.dt;
        let m = self.spec.mass;
        let n_eq = sched.eq_steps();
        let n_total = sched.total_steps();
        self.check_noise(noise, n_total)?;
        let xi = &noise.values;

        let mut steps = sched.intervention_steps().into_iter().enumerate().peekable();
        let mut interventions = Vec::with_capacity(sched.interventions.len());
        let mut jumps: Vec<Jump> = Vec::new();
        let mut velocities = Vec::with_capacity(n_total);
        let mut xs = Vec::with_capacity(times.len());
        let mut ps = Vec::with_capacity(times.len());

        let mut x = x_start;
        let mut p = sched.initial_p;
        let mut hist = 0.0;
        let mut force = self.pot.force(x, m) + xi[0];

        for n in 0..=n_total {
            if n > 0 {
                let ph = p + 0.5 * dt * force;
                let v = ph / m;
                velocities.push(v);
                x += dt * v;
                let t = sched.time_of_step(n);
                hist = self.kernel.history_force(&velocities);
                let jf = if jumps.is_empty() { 0.0 } else { self.kernel.jump_force(&jumps, t) };
                force = self.pot.force(x, m) + hist + jf + xi[n];
                p = ph + 0.5 * dt * force;
                if !(x.is_finite() && p.is_finite()) {
                    return Err(Error::Integration {
                        trajectory: id,
                        time: t,
                        reason: format!("non-finite state x = {x}, p = {p}"),
                    });
                }
            }
            while let Some(&(index, _)) = steps.peek().filter(|(_, s)| *s == n) {
                steps.next();
                let t = sched.time_of_step(n);
                let (r0, p0, factor) = on_intervention(InterventionPoint {
                    index,
                    time: t,
                    rbar: x,
                    pbar: p,
                })?;
                if !(r0.is_finite() && p0.is_finite() && factor.is_finite()) {
                    return Err(Error::Integration {
                        trajectory: id,
                        time: t,
                        reason: format!("intervention {index} returned a non-finite point or weight"),
                    });
                }
                interventions.push(InterventionRecord {
                    index,
                    time: t,
                    rbar: x,
                    pbar: p,
                    r0,
                    p0,
                    factor,
                });
                let dx = r0 - x;
                if dx != 0.0 {
                    jumps.push(Jump { time: t, dx });
                    x = r0;
                    force = self.pot.force(x, m) + hist + self.kernel.jump_force(&jumps, t) + xi[n];
                }
                p = p0;
            }
            if n >= n_eq && (n - n_eq) % sched.record_stride == 0 {
                xs.push(x);
                ps.push(p);
            }
        }

        Ok(Trajectory {
            id,
            times,
            x: xs,
            p: ps,
            interventions,
            jumps,
            seed: noise.seed,
            x_start,
        })
    }

    fn check_noise(&self, noise: &NoisePath, n_total: usize) -> Result<()> {
        let sched = self.sched;
        if noise.len() != n_total + 1 {
            return Err(Error::Domain(format!(
                "noise path has {} samples, the schedule needs {}",
                noise.len(),
                n_total + 1
            )));
        }
        if (noise.t_step - sched.dt).abs() > 1e-12 * sched.dt {
            return Err(Error::Domain(format!(
                "noise step {} differs from dt {}",
                noise.t_step, sched.dt
            )));
        }
        if (noise.t_start + sched.t_eq).abs() > 1e-9 * sched.t_eq.max(1.0) {
            return Err(Error::Domain(format!(
                "noise starts at {}, the schedule at {}",
                noise.t_start, -sched.t_eq
            )));
        }
        Ok(())
    }
}

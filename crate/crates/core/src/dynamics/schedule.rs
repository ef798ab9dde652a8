use serde::{Deserialize, Serialize};

use crate::bath::BathSpec;
use crate::dynamics::Potential;
use crate::error::{Error, Result};
use crate::preparation::PreparationFunction;

/// A preparation applied at time `time`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Intervention {
    pub time: f64,
    pub preparation: PreparationFunction,
}

/// Time grid and protocol of a run.
///
/// The particle starts at `t = −t_eq` and the recording window is
/// `[0, t_end]`. A zero `t_eq` is a factorized start: the particle begins at
/// `t = 0` in contact with a bath that has no memory of earlier motion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schedule {
    pub t_eq: f64,
    pub t_end: f64,
    pub dt: f64,
    #[serde(default)]
    pub interventions: Vec<Intervention>,
    #[serde(default = "one")]
    pub record_stride: usize,
    #[serde(default)]
    pub initial_x: f64,
    #[serde(default)]
    pub initial_p: f64,
    /// Width of a uniform random offset added to `initial_x`, centred on it.
    /// A wide offset makes the free particle's position distribution flat.
    #[serde(default)]
    pub position_spread: f64,
}

fn one() -> usize {
    1
}

/// Relative tolerance for "dt divides t".
const GRID_TOL: f64 = 1e-12;

impl Schedule {
    /// Defaults: `dt = ε/20` and `t_eq = max(10/γ, 50ε)` rounded up to the grid.
    pub fn new(spec: &BathSpec, t_end: f64) -> Self {
        let dt = default_dt(spec);
        Schedule {
            t_eq: default_t_eq(spec, dt),
            t_end,
            dt,
            interventions: Vec::new(),
            record_stride: 1,
            initial_x: 0.0,
            initial_p: 0.0,
            position_spread: 0.0,
        }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_t_eq(mut self, t_eq: f64) -> Self {
        self.t_eq = t_eq;
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.record_stride = stride;
        self
    }

    pub fn with_intervention(mut self, time: f64, preparation: PreparationFunction) -> Self {
        self.interventions.push(Intervention { time, preparation });
        self
    }

    pub fn with_position_spread(mut self, spread: f64) -> Self {
        self.position_spread = spread;
        self
    }

    pub fn validate(&self, spec: &BathSpec, pot: &Potential) -> Result<()> {
        let dt = self.dt;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::config("schedule.dt", format!("must be > 0, got {dt}")));
        }
        if dt > spec.eps / 10.0 * (1.0 + GRID_TOL) {
            return Err(Error::config(
                "schedule.dt",
                format!("dt = {dt} exceeds ε/10 = {}", spec.eps / 10.0),
            ));
        }
        if let Potential::Harmonic { omega0 } = pot {
            let limit = 2.0 * std::f64::consts::PI / omega0 / 50.0;
            if dt > limit * (1.0 + GRID_TOL) {
                return Err(Error::config(
                    "schedule.dt",
                    format!("dt = {dt} exceeds a fiftieth of the oscillator period ({limit})"),
                ));
            }
        }
        if !(self.t_eq.is_finite() && self.t_eq >= 0.0) {
            return Err(Error::config("schedule.t_eq", format!("must be >= 0, got {}", self.t_eq)));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(Error::config("schedule.t_end", format!("must be >= 0, got {}", self.t_end)));
        }
        grid_steps(self.t_eq, dt).ok_or_else(|| {
            Error::config("schedule.t_eq", format!("t_eq = {} is not a multiple of dt = {dt}", self.t_eq))
        })?;
        let run = grid_steps(self.t_end, dt).ok_or_else(|| {
            Error::config("schedule.t_end", format!("t_end = {} is not a multiple of dt = {dt}", self.t_end))
        })?;
        if self.record_stride == 0 {
            return Err(Error::config("schedule.record_stride", "must be >= 1"));
        }
        if run % self.record_stride != 0 {
            return Err(Error::config(
                "schedule.record_stride",
                format!("{run} steps to t_end are not a multiple of the stride {}", self.record_stride),
            ));
        }
        if !(self.initial_x.is_finite() && self.initial_p.is_finite()) {
            return Err(Error::config("schedule.initial_x", "initial state must be finite"));
        }
        if !(self.position_spread.is_finite() && self.position_spread >= 0.0) {
            return Err(Error::config("schedule.position_spread", "must be >= 0"));
        }
        let mut previous = f64::NEG_INFINITY;
        for (i, iv) in self.interventions.iter().enumerate() {
            let key = format!("intervention[{i}].time");
            if !(iv.time >= 0.0 && iv.time < self.t_end) {
                return Err(Error::config(key, format!("time {} outside [0, t_end)", iv.time)));
            }
            if iv.time <= previous {
                return Err(Error::config(key, "interventions must be strictly increasing in time"));
            }
            grid_steps(iv.time, dt)
                .ok_or_else(|| Error::config(key.clone(), format!("time {} is not a multiple of dt", iv.time)))?;
            iv.preparation.validate()?;
            previous = iv.time;
        }
        Ok(())
    }

    /// Steps from `−t_eq` to `0`.
    pub fn eq_steps(&self) -> usize {
        grid_steps(self.t_eq, self.dt).unwrap_or_else(|| (self.t_eq / self.dt).round() as usize)
    }

    /// Steps from `0` to `t_end`.
    pub fn run_steps(&self) -> usize {
        grid_steps(self.t_end, self.dt).unwrap_or_else(|| (self.t_end / self.dt).round() as usize)
    }

    pub fn total_steps(&self) -> usize {
        self.eq_steps() + self.run_steps()
    }

    /// Time of integration step `n`, counted from `−t_eq`.
    pub fn time_of_step(&self, n: usize) -> f64 {
        (n as f64 - self.eq_steps() as f64) * self.dt
    }

    /// Recorded times `0, s·dt, 2s·dt, …, t_end`.
    pub fn record_times(&self) -> Vec<f64> {
        let n = self.run_steps() / self.record_stride;
        (0..=n).map(|j| (j * self.record_stride) as f64 * self.dt).collect()
    }

    /// Step index of each intervention.
    pub fn intervention_steps(&self) -> Vec<usize> {
        self.interventions
            .iter()
            .map(|iv| self.eq_steps() + (iv.time / self.dt).round() as usize)
            .collect()
    }
}

/// `t/dt` as an integer when `dt` divides `t` to relative precision 1e-12.
pub fn grid_steps(t: f64, dt: f64) -> Option<usize> {
    let n = (t / dt).round();
    if n < 0.0 {
        return None;
    }
    if (t - n * dt).abs() <= GRID_TOL * t.abs().max(dt) {
        Some(n as usize)
    } else {
        None
    }
}

pub fn default_dt(spec: &BathSpec) -> f64 {
    spec.eps / 20.0
}

/// `max(10/γ, 50ε)` rounded up to a multiple of `dt`; `50ε` without friction.
pub fn default_t_eq(spec: &BathSpec, dt: f64) -> f64 {
    let raw = if spec.gamma > 0.0 {
        (10.0 / spec.gamma).max(50.0 * spec.eps)
    } else {
        50.0 * spec.eps
    };
    (raw / dt - 1e-9).ceil() * dt
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn bath() -> BathSpec {
        BathSpec::ohmic(FRAC_PI_2, 0.5, 1.0, 1.0, 0.0).unwrap()
    }

    #[test]
    fn defaults() {
        let s = Schedule::new(&bath(), 10.0);
        assert_eq!(s.dt, 0.025);
        assert!((s.t_eq - 25.0).abs() < 1e-12);
        s.validate(&bath(), &Potential::Free).unwrap();
        assert_eq!(s.record_times().len(), 401);
        assert_eq!(s.eq_steps(), 1000);
        assert_eq!(s.time_of_step(1000), 0.0);

        let strong = BathSpec::ohmic(FRAC_PI_2, 0.01, 1.0, 1.0, 1.0).unwrap();
        let s = Schedule::new(&strong, 1.0);
        let expected = 10.0 / FRAC_PI_2;
        assert!(s.t_eq >= expected && s.t_eq < expected + s.dt);
        assert!(grid_steps(s.t_eq, s.dt).is_some());
    }

    #[test]
    fn invariants() {
        let b = bath();
        let pot = Potential::Free;
        let too_coarse = Schedule::new(&b, 1.0).with_dt(0.1);
        assert!(too_coarse.validate(&b, &pot).is_err());
        let osc = Schedule::new(&b, 1.0).with_dt(0.05);
        assert!(osc.validate(&b, &Potential::Harmonic { omega0: 3.0 }).is_err());
        let misaligned = Schedule::new(&b, 1.0).with_intervention(0.01, PreparationFunction::Identity);
        assert!(misaligned.validate(&b, &pot).is_err());
        let unordered = Schedule::new(&b, 1.0)
            .with_intervention(0.5, PreparationFunction::Identity)
            .with_intervention(0.25, PreparationFunction::Identity);
        assert!(unordered.validate(&b, &pot).is_err());
        let late = Schedule::new(&b, 1.0).with_intervention(1.0, PreparationFunction::Identity);
        assert!(late.validate(&b, &pot).is_err());
        let stride = Schedule::new(&b, 1.0).with_stride(3);
        assert!(stride.validate(&b, &pot).is_err());
        let ok = Schedule::new(&b, 1.0)
            .with_stride(4)
            .with_intervention(0.0, PreparationFunction::Identity)
            .with_intervention(0.5, PreparationFunction::Identity);
        ok.validate(&b, &pot).unwrap();
        assert_eq!(ok.intervention_steps(), vec![1000, 1020]);
    }
}

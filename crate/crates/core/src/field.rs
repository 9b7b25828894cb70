use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Real control field E(t_i) on a uniform grid `t_i = i dt`, i = 0..=n_steps,
/// in atomic units. Values between samples are linear interpolants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlField {
    samples: Vec<f64>,
    dt: f64,
}

impl ControlField {
    pub fn new(samples: Vec<f64>, dt: f64) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::invalid("a control field needs at least two samples"));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid(format!("field sample spacing must be > 0, got {dt}")));
        }
        if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::numerical(format!("field sample {i} is not finite")));
        }
        Ok(ControlField { samples, dt })
    }

    pub fn zeros(n_steps: usize, dt: f64) -> Result<Self> {
        Self::new(vec![0.0; n_steps + 1], dt)
    }

    pub fn from_fn(n_steps: usize, dt: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new((0..=n_steps).map(|i| f(i as f64 * dt)).collect(), dt)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [f64] {
        &mut self.samples
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.samples.len() - 1
    }

    pub fn t_pulse(&self) -> f64 {
        self.n_steps() as f64 * self.dt
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    /// Field at the start, midpoint and end of step i.
    pub fn step_values(&self, i: usize) -> [f64; 3] {
        let (a, b) = (self.samples[i], self.samples[i + 1]);
        [a, 0.5 * (a + b), b]
    }

    /// `dt * sum E_i^2`
    pub fn fluence(&self) -> f64 {
        self.dt * self.samples.iter().map(|e| e * e).sum::<f64>()
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0f64, |m, e| m.max(e.abs()))
    }

    /// Same sampling, new values.
    pub fn with_samples(&self, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != self.samples.len() {
            return Err(Error::invalid("sample count mismatch"));
        }
        Self::new(samples, self.dt)
    }

    pub fn is_zero(&self) -> bool {
        self.samples.iter().all(|&e| e == 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duration_and_midpoints() {
        let f = ControlField::new(vec![0.0, 2.0, 4.0], 0.5).unwrap();
        assert_eq!(f.t_pulse(), 1.0);
        assert_eq!(f.step_values(1), [2.0, 3.0, 4.0]);
        assert_eq!(f.fluence(), 0.5 * 20.0);
        assert!(ControlField::new(vec![0.0], 1.0).is_err());
        assert!(ControlField::new(vec![0.0, f64::NAN], 1.0).is_err());
        assert!(ControlField::new(vec![0.0, 1.0], 0.0).is_err());
    }
}
